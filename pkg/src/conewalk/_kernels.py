"""Compiled inner loops.

Random numbers come from counter-based splitmix64 streams keyed by
(seed, stream id, coordinate label).  Every trial owns its streams, so results
depend only on trial ids, never on batch size or thread scheduling.
"""

import math
import os

os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

import numba as nb  # noqa: E402
import numpy as np

GOLD = np.uint64(0x9E3779B97F4A7C15)
M1 = np.uint64(0xBF58476D1CE4E5B9)
M2 = np.uint64(0x94D049BB133111EB)
S30 = np.uint64(30)
S27 = np.uint64(27)
S31 = np.uint64(31)
S11 = np.uint64(11)
ONE = np.uint64(1)
INV53 = 1.0 / 9007199254740992.0
TWO_PI = 2.0 * math.pi

# cone codes, mirrored from cones.KIND_CODES
C_HALF_LINE = 0
C_HALF_SPACE = 1
C_ORTHANT = 2
C_WEDGE = 3
C_WEYL_A = 4
C_WEYL_B = 5
C_LINE = 6



@nb.njit(inline="always", cache=True)
def mix64(z):
    z = (z ^ (z >> S30)) * M1
    z = (z ^ (z >> S27)) * M2
    return z ^ (z >> S31)


@nb.njit(inline="always", cache=True)
def stream_key(seed, stream, label):
    a = mix64(np.uint64(stream) + GOLD)
    b = mix64(np.uint64(seed) ^ a)
    return mix64(b + (np.uint64(label) + ONE) * GOLD)


@nb.njit(inline="always", cache=True)
def _next(st, c):
    st[c] += GOLD
    return mix64(st[c])


@nb.njit(inline="always", cache=True)
def _uniform(st, c):
    # uniform on (0, 1]
    return (np.float64(_next(st, c) >> S11) + 1.0) * INV53


@nb.njit(inline="always", cache=True)
def _normal(st, spare, has_spare, c):
    if has_spare[c]:
        has_spare[c] = False
        return spare[c]
    u1 = _uniform(st, c)
    u2 = _uniform(st, c)
    r = math.sqrt(-2.0 * math.log(u1))
    spare[c] = r * math.sin(TWO_PI * u2)
    has_spare[c] = True
    return r * math.cos(TWO_PI * u2)


@nb.njit(inline="always", cache=True)
def _sign(st, bits, nbits, c):
    if nbits[c] == 0:
        bits[c] = _next(st, c)
        nbits[c] = 64
    b = bits[c] & ONE
    bits[c] = bits[c] >> ONE
    nbits[c] -= 1
    return 1.0 if b else -1.0


@nb.njit(inline="always", cache=True)
def _draw_step(code, d, atoms, cdf, st, bits, nbits, spare, has_spare, step):
    if code == 0:
        for c in range(d):
            step[c] = _normal(st, spare, has_spare, c)
    elif code == 1:
        for c in range(d):
            step[c] = _sign(st, bits, nbits, c)
    elif code == 2:
        s = 0.0
        for c in range(d):
            g = _normal(st, spare, has_spare, 0)
            step[c] = g
            s += g * g
        f = math.sqrt(d / s)
        for c in range(d):
            step[c] *= f
    elif code == 3:
        u = _uniform(st, 0)
        i = np.searchsorted(cdf, u)
        for c in range(d):
            step[c] = atoms[i, c]
    else:
        for c in range(d):
            u = _uniform(st, c)
            i = np.searchsorted(cdf, u)
            step[c] = atoms[i, 0]


@nb.njit(inline="always", cache=True)
def inside(code, alpha, z, d):
    if code == 0:
        return z[0] > 0.0
    if code == 1:
        return z[d - 1] > 0.0
    if code == 2:
        for c in range(d):
            if z[c] <= 0.0:
                return False
        return True
    if code == 3:
        if z[0] == 0.0 and z[1] == 0.0:
            return False
        th = math.atan2(z[1], z[0])
        if th < 0.0:
            th += TWO_PI
        return th > 0.0 and th < alpha
    if code == 4:
        for c in range(d - 1):
            if z[c + 1] <= z[c]:
                return False
        return True
    if code == 5:
        if z[0] <= 0.0:
            return False
        for c in range(d - 1):
            if z[c + 1] <= z[c]:
                return False
        return True
    return True


@nb.njit(inline="always", cache=True)
def _update_seg(seg, z, d):
    # seg[0] tracks the squared norm; callers take the root when storing
    s = 0.0
    for c in range(d):
        s += z[c] * z[c]
    if s > seg[0]:
        seg[0] = s
    if z[d - 1] > seg[1]:
        seg[1] = z[d - 1]
    g = abs(z[d - 1] - z[0])
    if g > seg[2]:
        seg[2] = g


@nb.njit(inline="always", cache=True)
def _store_seg(seg_out, b, j, seg):
    seg_out[b, j, 0] = math.sqrt(seg[0]) if seg[0] >= 0.0 else -np.inf
    seg_out[b, j, 1] = seg[1]
    seg_out[b, j, 2] = seg[2]
    for q in range(3):
        seg[q] = -np.inf


@nb.njit(parallel=True, cache=True)
def run_batch(cone_code, alpha, step_code, atoms, cdf, starts, k0, k1, seed, streams, labels,
              rec_times, record, full, pos_out, seg_out, seg_state, final_out, exit_out, nchunk, shift):
    """Advance B trials from step k0 to k1.

    streams[b, c] is the stream id driving coordinate c of trial b (product
    laws) or the whole step (column 0, other laws).  labels[c] is the
    coordinate label mixed into the key.  exit_out[b] receives the first exit
    step or 0.  With ``record`` the positions at rec_times are stored in
    pos_out and running maxima over (t_{j-1}, t_j] in seg_out.  Membership
    is tested for z - shift, so the walk is kept in the translated cone K + shift.
    """
    B, d = starts.shape
    nrec = rec_times.shape[0]
    nchunk = max(1, min(B, nchunk))
    per = (B + nchunk - 1) // nchunk
    for ch in nb.prange(nchunk):
        st = np.empty(d, dtype=np.uint64)
        bits = np.empty(d, dtype=np.uint64)
        nbits = np.empty(d, dtype=np.int64)
        spare = np.empty(d)
        has_spare = np.empty(d, dtype=np.bool_)
        z = np.empty(d)
        zk = np.empty(d)
        step = np.empty(d)
        seg = np.empty(3)
        lo = ch * per
        hi = min(B, lo + per)
        for b in range(lo, hi):
            for c in range(d):
                col = c if streams.shape[1] > 1 else 0
                st[c] = stream_key(seed, streams[b, col], labels[c])
                bits[c] = np.uint64(0)
                nbits[c] = 0
                has_spare[c] = False
                z[c] = starts[b, c]
            if record:
                for q in range(3):
                    seg[q] = seg_state[b, q]
            j = 0
            while j < nrec and rec_times[j] < k0:
                j += 1
            if record and j < nrec and rec_times[j] == k0:
                for c in range(d):
                    pos_out[b, j, c] = z[c]
                j += 1
            ex = 0
            for k in range(k0 + 1, k1 + 1):
                _draw_step(step_code, d, atoms, cdf, st, bits, nbits, spare, has_spare, step)
                for c in range(d):
                    z[c] += step[c]
                    zk[c] = z[c] - shift[c]
                if ex == 0 and not inside(cone_code, alpha, zk, d):
                    ex = k
                    if not full:
                        break
                if record:
                    _update_seg(seg, z, d)
                    if j < nrec and rec_times[j] == k:
                        for c in range(d):
                            pos_out[b, j, c] = z[c]
                        if j > 0:
                            _store_seg(seg_out, b, j - 1, seg)
                        j += 1
            exit_out[b] = ex
            for c in range(d):
                final_out[b, c] = z[c]
            if record:
                for q in range(3):
                    seg_state[b, q] = seg[q]


@nb.njit(cache=True)
def draw_parents(seed, level, first, count, npar, out):
    """Uniform parent indices for splitting attempts first .. first+count-1."""
    for j in range(count):
        key = stream_key(seed, (np.uint64(level) << np.uint64(40)) | np.uint64(first + j), 1 << 20)
        out[j] = np.int64(mix64(key) % np.uint64(npar))


@nb.njit(parallel=True, cache=True)
def run_hwalk(table, lo, strides, shape, r2max, off, datoms, probs, starts, n, seed, streams,
              rec_times, record, pos_out, seg_out, final_out, status_out):
    """Doob-transformed lattice walk driven by a table of V on a box.

    table is flattened; a point z has flat index sum((z - lo) * strides).
    off[a] is the flat offset of atom a.  status_out[b] is 0 on success and
    the failing step when the walk left the interior radius (|z|^2 > r2max).
    """
    B, d = starts.shape
    A = datoms.shape[0]
    nrec = rec_times.shape[0]
    for b in nb.prange(B):
        st = np.empty(1, dtype=np.uint64)
        st[0] = stream_key(seed, streams[b], 0)
        z = np.empty(d)
        zi = np.empty(d, dtype=np.int64)
        seg = np.empty(3)
        w = np.empty(A)
        for q in range(3):
            seg[q] = -np.inf
        f = 0
        for c in range(d):
            zi[c] = starts[b, c]
            z[c] = zi[c]
            f += (zi[c] - lo[c]) * strides[c]
        j = 0
        if record and nrec > 0 and rec_times[0] == 0:
            for c in range(d):
                pos_out[b, 0, c] = z[c]
            j = 1
        status = 0
        for k in range(1, n + 1):
            r2 = 0.0
            for c in range(d):
                r2 += z[c] * z[c]
            if r2 > r2max:
                status = k
                break
            tot = 0.0
            for a in range(A):
                w[a] = probs[a] * table[f + off[a]]
                tot += w[a]
            if tot <= 0.0:
                status = k
                break
            u = (np.float64(mix64(st[0] + GOLD) >> S11) + 1.0) * INV53
            st[0] += GOLD
            u *= tot
            acc = 0.0
            pick = A - 1
            for a in range(A):
                acc += w[a]
                if u <= acc and w[a] > 0.0:
                    pick = a
                    break
            # guard against rounding at the top end
            while w[pick] <= 0.0:
                pick -= 1
            f += off[pick]
            for c in range(d):
                zi[c] += datoms[pick, c]
                z[c] = zi[c]
            if record:
                _update_seg(seg, z, d)
                if j < nrec and rec_times[j] == k:
                    for c in range(d):
                        pos_out[b, j, c] = z[c]
                    if j > 0:
                        _store_seg(seg_out, b, j - 1, seg)
                    j += 1
        status_out[b] = status
        for c in range(d):
            final_out[b, c] = z[c]


@nb.njit(cache=True)
def jacobi_sweeps(v, interior, off, probs, max_sweeps, tol, damping):
    """In-place damped Jacobi for v = P v on the interior indices.

    Returns (sweeps, final residual, scale) where the residual is the max
    absolute change of the undamped update in the last sweep.
    """
    A = off.shape[0]
    m = interior.shape[0]
    new = np.empty(m)
    res = np.inf
    sweeps = 0
    while sweeps < max_sweeps:
        res = 0.0
        scale = 0.0
        for i in range(m):
            f = interior[i]
            s = 0.0
            for a in range(A):
                s += probs[a] * v[f + off[a]]
            new[i] = s
            r = abs(s - v[f])
            if r > res:
                res = r
            if abs(v[f]) > scale:
                scale = abs(v[f])
        for i in range(m):
            f = interior[i]
            v[f] = v[f] + damping * (new[i] - v[f])
        sweeps += 1
        if res <= tol * max(scale, 1e-300):
            break
    return sweeps, res


@nb.njit(parallel=True, cache=True)
def advance_bridge(qblock, base_len, m0, m1, n, lo, shape, strides, spacing, datoms, probs, zs,
                   rng_state, rec_times, pos_out, seg_out, seg_state, jrec):
    """Move bridge paths from time m0 to m1 using q values for lengths in the block.

    qblock[L - base_len] holds q_L, the probability of reaching the target in
    L steps without leaving the cone.  A path at time m in state z steps to
    z + w with probability proportional to p(w) q_{n-m-1}(z + w).
    """
    count, d = zs.shape
    A = datoms.shape[0]
    nrec = rec_times.shape[0]
    for b in nb.prange(count):
        w = np.empty(A)
        z = np.empty(d)
        seg = np.empty(3)
        for q in range(3):
            seg[q] = seg_state[b, q]
        j = jrec[b]
        for m in range(m0, m1):
            L = n - m - 1
            row = L - base_len
            tot = 0.0
            for a in range(A):
                f = 0
                ok = True
                for c in range(d):
                    v = (zs[b, c] + datoms[a, c] - lo[c]) // spacing[c]
                    if v < 0 or v >= shape[c]:
                        ok = False
                        break
                    f += v * strides[c]
                if ok:
                    w[a] = probs[a] * qblock[row, f]
                else:
                    w[a] = 0.0
                tot += w[a]
            rng_state[b] += GOLD
            u = (np.float64(mix64(rng_state[b]) >> S11) + 1.0) * INV53 * tot
            acc = 0.0
            pick = -1
            for a in range(A):
                if w[a] > 0.0:
                    acc += w[a]
                    pick = a
                    if u <= acc:
                        break
            for c in range(d):
                zs[b, c] += datoms[pick, c]
                z[c] = zs[b, c]
            _update_seg(seg, z, d)
            k = m + 1
            if j < nrec and rec_times[j] == k:
                for c in range(d):
                    pos_out[b, j, c] = z[c]
                if j > 0:
                    _store_seg(seg_out, b, j - 1, seg)
                j += 1
        jrec[b] = j
        for q in range(3):
            seg_state[b, q] = seg[q]


@nb.njit(parallel=True, cache=True)
def scan_halfline(step_code, atoms, cdf, x0, n, seed, first, label, exit_out, final_out, nchunk):
    """Pass-one kernel for a single coordinate killed at leaving (0, inf).

    Same streams and draws as run_batch with d = 1, kept in registers.
    """
    B = exit_out.shape[0]
    nchunk = max(1, min(B, nchunk))
    per = (B + nchunk - 1) // nchunk
    for ch in nb.prange(nchunk):
        lo = ch * per
        hi = min(B, lo + per)
        for b in range(lo, hi):
            st = stream_key(seed, np.uint64(first + b), label)
            z = x0
            ex = 0
            if step_code == 1:
                bits = np.uint64(0)
                nb_ = 0
                for k in range(1, n + 1):
                    if nb_ == 0:
                        st += GOLD
                        bits = mix64(st)
                        nb_ = 64
                    if bits & ONE:
                        z += 1.0
                    else:
                        z -= 1.0
                    bits = bits >> ONE
                    nb_ -= 1
                    if z <= 0.0:
                        ex = k
                        break
            elif step_code == 0:
                spare = 0.0
                has = False
                for k in range(1, n + 1):
                    if has:
                        g = spare
                        has = False
                    else:
                        st += GOLD
                        u1 = (np.float64(mix64(st) >> S11) + 1.0) * INV53
                        st += GOLD
                        u2 = (np.float64(mix64(st) >> S11) + 1.0) * INV53
                        r = math.sqrt(-2.0 * math.log(u1))
                        spare = r * math.sin(TWO_PI * u2)
                        has = True
                        g = r * math.cos(TWO_PI * u2)
                    z += g
                    if z <= 0.0:
                        ex = k
                        break
            else:
                for k in range(1, n + 1):
                    st += GOLD
                    u = (np.float64(mix64(st) >> S11) + 1.0) * INV53
                    z += atoms[np.searchsorted(cdf, u), 0]
                    if z <= 0.0:
                        ex = k
                        break
            exit_out[b] = ex
            final_out[b] = z


@nb.njit(cache=True)
def init_keys(seed, first, label, out):
    for b in range(out.shape[0]):
        out[b] = stream_key(seed, np.uint64(first + b), label)
