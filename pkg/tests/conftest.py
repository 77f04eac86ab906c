import itertools

import numpy as np
import pytest


def enumerate_survivors(x, n, atoms, probs, inside):
    """Brute-force oracle: (step tuple, probability) for every n-step path staying inside."""
    out = []
    for seq in itertools.product(range(len(atoms)), repeat=n):
        z = np.array(x, dtype=float)
        ok = True
        for a in seq:
            z = z + atoms[a]
            if not inside(z):
                ok = False
                break
        if ok:
            out.append((seq, float(np.prod([probs[a] for a in seq])) if seq else 1.0))
    return out


@pytest.fixture
def srw_oracle():
    atoms = np.array([[1.0], [-1.0]])
    probs = np.array([0.5, 0.5])
    return lambda x, n: enumerate_survivors([x], n, atoms, probs, lambda z: z[0] > 0)


def survival_mass(x, n, atoms, probs, inside):
    return sum(p for _, p in enumerate_survivors(x, n, atoms, probs, inside))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: full acceptance criteria (long running)")


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for s in lines:
            terminalreporter.write_line(s)
