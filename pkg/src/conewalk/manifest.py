"""Versioned experiment manifests (schema 1) and the suite runner."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from . import experiments as E
from .cones import parse_cone
from .errors import InvalidInputError
from .harmonic import build_v_exact
from .increments import parse_steps
from .io import write_json
from .stats import horizon_grid

SCHEMA = 1

# kind -> (required keys, optional keys)
KINDS = {
    "exponent-catalogue": ((), ("seed", "count")),
    "survival-exponent": (("cone", "steps", "start", "horizons"), ("method", "replicas", "seed", "tol")),
    "harmonic-v": (("cone", "steps", "window"), ("tol", "method", "accuracy", "mc_points", "mc_n", "replicas",
                                                 "seed")),
    "test-meander": (("cone", "steps", "start", "n", "count", "seed"), ("bm_count", "eps", "grid", "split_levels",
                                                                         "reference", "level")),
    "meander-negative-control": (("cone", "steps", "start", "n", "count", "seed"), ("level",)),
    "test-htransform": (("cone", "steps", "start", "n", "count", "seed", "window"),
                        ("bessel_count", "bins", "tol", "reference", "level")),
    "htransform-negative-control": (("cone", "steps", "start", "n", "count", "seed"), ("level",)),
    "bridge-identity": (("cone", "steps", "start", "end", "horizons"), ("t", "sample_n", "sample_count", "seed")),
    "test-bridge": (("cone", "steps", "start", "end", "n", "t", "count", "seed"),
                    ("bm_count", "eps", "grid", "resamples", "method", "level")),
    "feierl": (("cone", "steps", "steps_b", "start", "end", "n", "count", "seed"),
               ("kind_functional", "level", "corrected")),
    "reference-analytics": ((), ("samples", "seed", "eps", "grid", "identity")),
}
COMMON = ("id", "kind", "expect", "criterion", "note")


def data_path(name: str) -> Path:
    return Path(str(resources.files("conewalk") / "data" / name))


def resolve(path) -> Path:
    """A manifest path, falling back to the manifests shipped with the package."""
    p = Path(path)
    if p.exists():
        return p
    q = data_path(p.name)
    if q.exists():
        return q
    raise InvalidInputError(f"manifest {path} not found")


def validate(manifest: dict) -> dict:
    if not isinstance(manifest, dict):
        raise InvalidInputError("a manifest is a JSON object")
    if manifest.get("schema") != SCHEMA:
        raise InvalidInputError(f"unsupported manifest schema {manifest.get('schema')!r}; expected {SCHEMA}")
    exps = manifest.get("experiments")
    if not isinstance(exps, list) or not exps:
        raise InvalidInputError("manifest needs a nonempty 'experiments' list")
    seen = set()
    for e in exps:
        if not isinstance(e, dict):
            raise InvalidInputError("each experiment is an object")
        eid, kind = e.get("id"), e.get("kind")
        if not isinstance(eid, str) or not eid:
            raise InvalidInputError("each experiment needs a string id")
        if eid in seen:
            raise InvalidInputError(f"duplicate experiment id {eid!r}")
        seen.add(eid)
        if kind not in KINDS:
            raise InvalidInputError(f"{eid}: unknown kind {kind!r}")
        req, opt = KINDS[kind]
        missing = [k for k in req if k not in e]
        if missing:
            raise InvalidInputError(f"{eid}: missing {', '.join(missing)}")
        extra = [k for k in e if k not in req and k not in opt and k not in COMMON]
        if extra:
            raise InvalidInputError(f"{eid}: unknown keys {', '.join(sorted(extra))}")
        if e.get("expect", "pass") not in ("pass", "fail"):
            raise InvalidInputError(f"{eid}: expect must be 'pass' or 'fail'")
    return manifest


def load(path) -> dict:
    p = resolve(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{p}: invalid JSON ({exc})") from None
    return validate(data)


def _horizons(v):
    return horizon_grid(v) if isinstance(v, str) else np.asarray(v, dtype=np.int64)


def run_experiment(e: dict) -> E.TestReport:
    kind = e["kind"]
    if kind == "exponent-catalogue":
        return E.catalogue_check(e.get("seed", 0), e.get("count", 1000))
    if kind == "reference-analytics":
        return E.reference_analytics_check(identity_samples=e.get("samples", 10**5), identity_seed=e.get("seed", 0),
                                           eps=e.get("eps", 0.01), m=e.get("grid", 4096),
                                           identity=e.get("identity", True))
    cone = parse_cone(e["cone"])
    dist = parse_steps(e["steps"], cone.dimension)
    lv = e.get("level", 0.01)
    if kind == "survival-exponent":
        return E.survival_exponent(cone, dist, e["start"], _horizons(e["horizons"]), method=e.get("method", "auto"),
                                   replicas=e.get("replicas", 10**6), seed=e.get("seed", 0),
                                   tol=e.get("tol", 0.05)).report
    if kind == "harmonic-v":
        return E.harmonic_v_check(cone, dist, e["window"], tol=e.get("tol", 1e-10), method=e.get("method", "jacobi"),
                                  accuracy=e.get("accuracy", 1e-6), mc_points=e.get("mc_points", ()),
                                  mc_n=e.get("mc_n", 10**4), replicas=e.get("replicas", 10**6), seed=e.get("seed", 0))
    if kind == "test-meander":
        return E.meander_convergence_test(cone, dist, e["start"], e["n"], e["count"], e["seed"],
                                          bm_count=e.get("bm_count"), eps=e.get("eps", 0.01), m=e.get("grid", 4096),
                                          split_levels=e.get("split_levels"), reference=e.get("reference", True),
                                          level=lv)
    if kind == "meander-negative-control":
        return E.meander_negative_control(cone, dist, e["start"], e["n"], e["count"], e["seed"], lv)
    if kind == "test-htransform":
        tab = build_v_exact(cone, dist, e["window"], e.get("tol", 1e-10))
        return E.htransform_convergence_test(cone, dist, tab, e["start"], e["n"], e["count"], e["seed"],
                                             bessel_count=e.get("bessel_count"), bins=e.get("bins", 20),
                                             reference=e.get("reference", True), level=lv)
    if kind == "htransform-negative-control":
        return E.htransform_negative_control(cone, dist, e["start"], e["n"], e["count"], e["seed"], lv)
    if kind == "bridge-identity":
        return E.bridge_identity_check(cone, dist, e["start"], e["end"], e["horizons"], e.get("t", 0.5),
                                       sample_n=e.get("sample_n", 4), sample_count=e.get("sample_count", 10**5),
                                       seed=e.get("seed", 0))
    if kind == "test-bridge":
        return E.bridge_convergence_test(cone, dist, e["start"], e["end"], e["n"], e["t"], e["count"], e["seed"],
                                         bm_count=e.get("bm_count"), eps=e.get("eps", 0.01), m=e.get("grid", 4096),
                                         resamples=e.get("resamples", 400), method=e.get("method", "auto"), level=lv)
    if kind == "feierl":
        dist_b = parse_steps(e["steps_b"], cone.dimension)
        return E.feierl_universality_test(cone, dist, dist_b, e["start"], e["end"], e["n"], e["count"], e["seed"],
                                          kind=e.get("kind_functional", "max-top"), level=lv,
                                          corrected=e.get("corrected", True))
    raise InvalidInputError(f"unknown kind {kind!r}")


def run_suite(manifest: dict, outdir=None, only=None, log=None) -> dict:
    """Run every experiment (or those with ids in ``only``); write one report per experiment and a summary."""
    out = Path(outdir) if outdir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    rows = []
    for e in manifest["experiments"]:
        if only and e["id"] not in only:
            continue
        rep = run_experiment(e)
        expect = e.get("expect", "pass")
        ok = rep.passed == (expect == "pass")
        doc = rep.to_dict()
        doc.update({"id": e["id"], "expect": expect, "ok": ok, "criterion": e.get("criterion"), "manifest_entry": e})
        if out:
            write_json(out / f"{e['id']}.json", doc)
        rows.append({"id": e["id"], "kind": e["kind"], "criterion": e.get("criterion"), "passed": rep.passed,
                     "expect": expect, "ok": ok, "statistic": rep.statistic})
        if log:
            log(f"{'ok  ' if ok else 'FAIL'} {e['id']}: statistic {rep.statistic:.4g} (expect {expect})")
    summary = {"schema": SCHEMA, "name": manifest.get("name"), "experiments": rows,
               "ok": all(r["ok"] for r in rows)}
    if out:
        write_json(out / "summary.json", summary)
    return summary
