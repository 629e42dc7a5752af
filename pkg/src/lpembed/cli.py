"""Command line front end: ``lpembed <command> [--config FILE] [--seed N] ...``.

Every command writes ``<out>/<command>.json``: a report holding the version
string, the fully resolved config and the seed.  Feeding that config back
through ``--config`` regenerates the run.  Exit codes: 0 success, 1 a
check failed, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import subprocess
import sys
import time
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import conditioning, regression, sampling, sketch, verify
from .generators import FAMILIES, generate_matrix, noisy_rhs
from .sparse_core import (
    SparseMatrix,
    load_matrix_market,
    load_vector,
    save_dense_array,
    save_matrix_market,
    save_vector,
)
from .stable_rand import DomainError, as_stream

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


# --- config schema -----------------------------------------------------------

@dataclass(frozen=True)
class Param:
    kind: type | tuple
    default: Any
    check: Callable[[Any], bool] | None = None
    why: str = ""


def _pos(x):
    return x > 0


def _unit(x):
    return 0 < x < 1


def _p12(x):
    return 1 <= x <= 2


INPUT = {
    "matrix": Param((str, type(None)), None, why="path to a Matrix Market file"),
    "rhs": Param((str, type(None)), None, why="path to a whitespace-separated vector"),
    "family": Param(str, "random_sparse", lambda f: f in FAMILIES, f"one of {FAMILIES}"),
    "n": Param(int, 2000, _pos, "> 0"),
    "d": Param(int, 3, _pos, "> 0"),
    "density": Param(float, 1.0, lambda x: 0 < x <= 1, "in (0, 1]"),
}

SCHEMAS: dict[str, dict[str, Param]] = {
    "generate": {**INPUT, "noise": Param(str, "cauchy", lambda s: s in ("cauchy", "gaussian", "none"))},
    "sketch": {
        **INPUT,
        "p": Param(float, 2.0, _p12, "in [1, 2]"),
        "dense": Param(bool, False),
        "s": Param((int, type(None)), None, lambda s: s is None or s > 0, "> 0"),
        "epsilon": Param(float, 0.5, _unit, "in (0, 1)"),
        "delta": Param(float, 0.1, _unit, "in (0, 1)"),
        "sketch_c": Param(float, 10.0, _pos, "> 0"),
        "probes": Param(int, 500, _pos, "> 0"),
        "assert_distortion": Param(bool, False),
    },
    "condition": {
        **INPUT,
        "p": Param(float, 1.0, _p12, "in [1, 2]"),
        "method": Param(str, "qr", lambda m: m in ("qr", "rounding"), "qr or rounding"),
        "sketch_first": Param(bool, True),
        "sketch_c": Param(float, 10.0, _pos, "> 0"),
        "max_iters": Param(int, 100, lambda x: x >= 0, ">= 0"),
        "probes": Param(int, 500, _pos, "> 0"),
        "assert_sandwich": Param(bool, True),
    },
    "sample": {
        **INPUT,
        "p": Param(float, 1.0, _p12, "in [1, 2]"),
        "epsilon": Param(float, 0.3, _unit, "in (0, 1)"),
        "leverage": Param(str, "exact", lambda m: m in ("exact", "sketched"), "exact or sketched"),
        "sample_constant": Param(float, 1.0, _pos, "> 0"),
        "sketch_c": Param(float, 10.0, _pos, "> 0"),
        "two_stage": Param(bool, False),
        "probes": Param(int, 500, _pos, "> 0"),
        "assert_distortion": Param(bool, False),
    },
    "regress": {
        **INPUT,
        "family": Param(str, "consistent_pair", lambda f: f in FAMILIES, f"one of {FAMILIES}"),
        "noise": Param(str, "cauchy", lambda s: s in ("cauchy", "gaussian")),
        "p": Param(float, 1.0, _p12, "in [1, 2]"),
        "epsilon": Param(float, 0.3, lambda x: 0 < x < 0.5, "in (0, 1/2)"),
        "delta": Param(float, 0.1, _unit, "in (0, 1)"),
        "retries": Param(int, 3, _pos, "> 0"),
        "sample_constant": Param(float, 1.0, _pos, "> 0"),
        "conditioning": Param(str, "qr", lambda m: m in ("qr", "rounding"), "qr or rounding"),
        "leverage": Param(str, "exact", lambda m: m in ("exact", "sketched"), "exact or sketched"),
        "max_objective": Param((float, type(None)), None, lambda x: x is None or x >= 0, ">= 0"),
    },
    "verify-tails": {
        "suite": Param(str, "default", lambda s: s in ("default", "grid"), "default or grid"),
        "trials": Param(int, 10**6, _pos, "> 0"),
        "p": Param(float, 1.5, lambda x: 1 < x < 2, "in (1, 2)"),
        "ps": Param(list, [1.25, 1.5, 1.75], lambda v: all(1 < x < 2 for x in v), "each in (1, 2)"),
        "ms": Param(list, [3, 10, 100], lambda v: all(isinstance(x, int) and x >= 3 for x in v), "ints >= 3"),
        "t_upper": Param(list, [2.0, 5.0, 10.0], lambda v: all(x >= 1 for x in v), "each >= 1"),
        "t_lower": Param(list, [0.3, 0.5], lambda v: all(0 < x < 1 for x in v), "each in (0, 1)"),
    },
    "cdf-order": {
        "p_grid": Param(list, [round(1 + 0.1 * k, 1) for k in range(11)], lambda v: len(v) > 0, "nonempty"),
        "t_min": Param(float, 1e-3, _pos, "> 0"),
        "t_max": Param(float, 1e3, _pos, "> 0"),
        "t_points": Param(int, 61, _pos, "> 0"),
        "samples": Param(int, 10**6, _pos, "> 0"),
    },
    "moments": {
        "n": Param(int, 200, _pos, "> 0"),
        "d": Param(int, 4, _pos, "> 0"),
        "s": Param(int, 400, _pos, "> 0"),
        "trials": Param(int, 10**4, lambda x: x > 1, "> 1"),
        "epsilon": Param(float, 0.2, _pos, "> 0"),
    },
    "bench": {
        "n": Param(int, 10**6, _pos, "> 0"),
        "d": Param(int, 10, _pos, "> 0"),
        "s": Param(int, 1000, _pos, "> 0"),
        "ladder": Param(list, [10**5, 2 * 10**5, 5 * 10**5, 10**6, 2 * 10**6, 5 * 10**6, 10**7],
                        lambda v: len(v) >= 2 and all(isinstance(x, int) and x > 0 for x in v), ">= 2 positive ints"),
        "reps": Param(int, 5, _pos, "> 0"),
        "min_r2": Param(float, 0.95, lambda x: 0 <= x <= 1, "in [0, 1]"),
    },
}


def resolve_config(command: str, raw: dict) -> dict:
    """Fill defaults, reject unknown keys and type or range violations."""
    schema = SCHEMAS[command]
    unknown = sorted(set(raw) - set(schema) - {"seed"})
    if unknown:
        raise ConfigError(f"unknown config keys for '{command}': {unknown}")
    cfg = {}
    for key, par in schema.items():
        val = raw.get(key, par.default)
        kinds = par.kind if isinstance(par.kind, tuple) else (par.kind,)
        if float in kinds and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if isinstance(val, bool) and bool not in kinds:
            raise ConfigError(f"{key}: expected {kinds}, got bool")
        if not isinstance(val, kinds):
            raise ConfigError(f"{key}: expected {'/'.join(k.__name__ for k in kinds)}, got {type(val).__name__}")
        if par.check is not None and not par.check(val):
            raise ConfigError(f"{key}={val!r} invalid ({par.why})")
        cfg[key] = val
    if "n" in cfg and "d" in cfg and cfg["n"] < cfg["d"]:
        raise ConfigError("need n >= d")
    if command == "cdf-order":
        if cfg["t_min"] >= cfg["t_max"]:
            raise ConfigError("need t_min < t_max")
        if sorted(cfg["p_grid"]) != cfg["p_grid"] or not all(1 <= x <= 2 for x in cfg["p_grid"]):
            raise ConfigError("p_grid must be sorted within [1, 2]")
    return cfg


# --- helpers -----------------------------------------------------------------

def version_string() -> str:
    base = "0+unknown"
    for dist in ("artifact", "lpembed"):
        try:
            base = metadata.version(dist)
            break
        except metadata.PackageNotFoundError:
            continue
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        desc = ""
    return f"{base}-g{desc}" if desc else base


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    return str(o)


def load_input(cfg: dict, seed: int):
    """``(A, b_or_None)`` from files or the synthetic generator."""
    if cfg.get("matrix"):
        A = load_matrix_market(cfg["matrix"])
        b = load_vector(cfg["rhs"]) if cfg.get("rhs") else None
        return A, b
    return generate_matrix(cfg["family"], cfg["n"], cfg["d"], cfg["density"], seed=as_stream(seed).child("input"))


def _check(name: str, ok: bool, **detail) -> dict:
    return {"check": name, "pass": bool(ok), **detail}


# --- commands ----------------------------------------------------------------
# Each returns (result dict, list of checks) and may write artifacts to ``out``.

def cmd_generate(cfg, seed, out: Path, threads):
    A, b = load_input(cfg, seed)
    save_matrix_market(out / "A.mtx", A)
    if b is None and cfg["noise"] != "none":
        b, x_true = noisy_rhs(A, seed=as_stream(seed).child("rhs"), noise=cfg["noise"])
        save_vector(out / "x_true.txt", x_true)
    if b is not None:
        save_vector(out / "b.txt", b)
    return {"n": A.n, "d": A.d, "nnz": A.nnz, "has_rhs": b is not None}, []


def cmd_sketch(cfg, seed, out, threads):
    A, _ = load_input(cfg, seed)
    n, d = A.shape
    p = cfg["p"]
    stream = as_stream(seed)
    if cfg["dense"]:
        kind = sketch.SketchKind.DENSE_PSTABLE
        s = cfg["s"] or sketch.default_sketch_size(sketch.SketchKind.PSTABLE, d, c=cfg["sketch_c"])
        B = sketch.apply_dense_pstable(p, s, A, stream.child("dense"))
    else:
        kind = sketch.sketch_kind_for(p)
        s = cfg["s"] or sketch.default_sketch_size(kind, d, cfg["epsilon"], cfg["delta"], cfg["sketch_c"])
        plan = sketch.plan_sketch(kind, n, s, stream.child("plan"), p=p)
        stats = {}
        B = sketch.apply_sketch(plan, A, stats)
    save_dense_array(out / "sketch.mtx", B)
    rep = sketch.measure_distortion(A, B, p, probes=cfg["probes"], seed=stream.child("probe"))
    rep.meta.update({"kind": kind.value, "n": n, "d": d, "s": s, "seed": seed})
    (out / "distortion.jsonl").write_text(rep.to_json() + "\n")
    result = {"kind": kind.value, "s": s, "distortion": rep.distortion(), "report": json.loads(rep.to_json())}
    checks = []
    if cfg["assert_distortion"]:
        checks.append(_check("distortion<=epsilon", rep.within(cfg["epsilon"]), value=rep.distortion()))
    return result, checks


def cmd_condition(cfg, seed, out, threads):
    A, _ = load_input(cfg, seed)
    n, d = A.shape
    p = cfg["p"]
    stream = as_stream(seed)
    B = A
    if cfg["sketch_first"]:
        kind = sketch.sketch_kind_for(p)
        s = sketch.default_sketch_size(kind, d, c=cfg["sketch_c"])
        B = sketch.apply_sketch(sketch.plan_sketch(kind, n, s, stream.child("plan"), p=p), A)
    if cfg["method"] == "qr":
        R = conditioning.qr_condition(B)
    else:
        R = conditioning.ellipsoidal_round(B, p, max_iters=cfg["max_iters"], probes=cfg["probes"], seed=stream.child("round"))
    R.save(out / "conditioner")
    before = conditioning.estimate_condition(A, p, probes=cfg["probes"], seed=stream.child("est"))
    after = conditioning.estimate_condition(R.transform(A), p, probes=cfg["probes"], seed=stream.child("est"))
    result = {"method": R.method, "warning": R.warning, "before": before.as_dict(), "after": after.as_dict()}
    checks = []
    if cfg["assert_sandwich"]:
        checks.append(_check("kappa_sandwich", after.sandwich_holds()))
    return result, checks


def cmd_sample(cfg, seed, out, threads):
    A, _ = load_input(cfg, seed)
    n, d = A.shape
    p, eps = cfg["p"], cfg["epsilon"]
    stream = as_stream(seed)
    if cfg["two_stage"]:
        if p >= 2:
            raise ConfigError("two_stage needs p < 2")
        S = regression.improve_embedding_dimension(
            A, p, eps, seed=stream.child("two_stage"), sketch_c=cfg["sketch_c"],
            sample_constant=cfg["sample_constant"], probes=cfg["probes"],
        )
        extra = {"trace": S.meta.get("trace")}
    else:
        kind = sketch.sketch_kind_for(p)
        s = sketch.default_sketch_size(kind, d, c=cfg["sketch_c"])
        B = sketch.apply_sketch(sketch.plan_sketch(kind, n, s, stream.child("plan"), p=p), A)
        R = conditioning.qr_condition(B)
        est = conditioning.estimate_condition(R.transform(A), p, probes=cfg["probes"], seed=stream.child("est"), grid=False)
        w = sampling.leverage_weights(A, R, p, cfg["leverage"], seed=stream.child("lev"))
        s_target = sampling.sampling_size(est.kappa_bar_hat, d, p, eps, cfg["sample_constant"])
        S = sampling.build_sampling_matrix(w, s_target, stream.child("sample"), target_epsilon=eps)
        extra = {"kappa_bar_hat": est.kappa_bar_hat}
    S.save_csv(out / "sampling.csv")
    rep = sampling.verify_sampling_distortion(A, S, p, probes=cfg["probes"], seed=stream.child("probe"))
    result = {"s_target": S.s_target, "s_realized": S.s_realized, "distortion": rep.distortion(),
              "report": json.loads(rep.to_json()), **extra}
    checks = []
    if cfg["assert_distortion"]:
        checks.append(_check("distortion<=epsilon", rep.within(eps), value=rep.distortion()))
    return result, checks


def cmd_regress(cfg, seed, out, threads):
    A, b = load_input(cfg, seed)
    stream = as_stream(seed)
    if b is None:
        b, _ = noisy_rhs(A, seed=stream.child("rhs"), noise=cfg["noise"])
    p, eps = cfg["p"], cfg["epsilon"]
    if p == 2:
        sol = regression.fast_l2_regression(A, b, eps, cfg["delta"], seed=stream.child("l2"), retries=cfg["retries"])
    else:
        sol = regression.fast_lp_regression(
            A, b, p, eps, seed=stream.child("lp"), retries=cfg["retries"], sample_constant=cfg["sample_constant"],
            conditioning=cfg["conditioning"], leverage=cfg["leverage"],
        )
    save_vector(out / "x_hat.txt", sol.x_hat)
    result = json.loads(sol.to_json(seed))
    limit = cfg["max_objective"]
    if limit is None and cfg["family"] == "consistent_pair" and not cfg["matrix"]:
        limit = 1e-6
    checks = []
    if limit is not None:
        checks.append(_check("objective<=max_objective", sol.objective <= limit, value=sol.objective, limit=limit))
    return result, checks


def cmd_verify_tails(cfg, seed, out, threads):
    trials = cfg["trials"]
    if cfg["suite"] == "default":
        root = as_stream(seed)
        reports = [
            verify.check_cauchy_upper(3, None, 10.0, trials, root.child("cauchy_upper")),
            verify.check_cauchy_lower(24, None, 0.5, trials, root.child("cauchy_lower")),
            verify.check_gaussian_lower(24, None, 0.5, trials, root.child("gaussian_lower")),
            *verify.check_pstable_tails(cfg["p"], m=3, t_upper=10.0, trials=trials, seed=root.child("pstable_upper")),
            *verify.check_pstable_tails(cfg["p"], m=24, t_lower=0.5, trials=trials, seed=root.child("pstable_lower")),
        ]
    else:
        kw = dict(ms=cfg["ms"], t_upper=cfg["t_upper"], t_lower=cfg["t_lower"], trials=trials, threads=threads)
        reports = verify.tail_suite(seed=as_stream(seed).child("classic"), **kw)
        reports += verify.tail_suite(seed=as_stream(seed).child("pstable"), ps=tuple(cfg["ps"]), **kw)
    with open(out / "tails.jsonl", "w") as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")
    failed = [json.loads(r.to_json()) for r in reports if not r.passed]
    result = {"reports": len(reports), "failed": failed}
    return result, [_check("all_tail_cells", not failed, failed=len(failed))]


def cmd_cdf_order(cfg, seed, out, threads):
    t_grid = np.geomspace(cfg["t_min"], cfg["t_max"], cfg["t_points"])
    table = verify.check_cdf_ordering(cfg["p_grid"], t_grid, cfg["samples"], seed=seed, threads=threads)
    table.write_csv(out / "cdf.csv")
    result = {"violations": table.violations, "csv": "cdf.csv"}
    return result, [_check("cdf_ordering", table.passed, violations=len(table.violations))]


def cmd_moments(cfg, seed, out, threads):
    n, d = cfg["n"], cfg["d"]
    U, _ = np.linalg.qr(as_stream(seed).child("U").generator.standard_normal((n, d)))
    rep = verify.check_l2_moments(U, cfg["s"], cfg["trials"], seed=as_stream(seed).child("moments"), epsilon=cfg["epsilon"])
    res = rep.as_dict()
    checks = [
        _check("moments_within_3_stderr", rep.passed),
        _check("frobenius_mean<=bound", rep.frob_hat <= rep.closed["frob_bound"],
               value=rep.frob_hat, bound=rep.closed["frob_bound"]),
    ]
    return res, checks


def bench_apply_sketch(n: int, d: int, s: int, ladder, reps: int = 5, seed=0):
    """Min-of-``reps`` wall time of ``apply_sketch`` for each ``nnz`` in ``ladder``.

    Returns rows ``(nnz, wall_ms)`` and the least-squares fit
    ``wall_ms = a + b nnz`` with its R^2.
    """
    stream = as_stream(seed)
    plan = sketch.plan_sketch(sketch.SketchKind.SIGN_L2, n, s, stream.child("plan"))
    rows = []
    for nnz in ladder:
        if nnz > n * d:
            raise ConfigError(f"nnz={nnz} exceeds n*d={n * d}")
        g = stream.child(("matrix", int(nnz))).generator
        cells = np.sort(g.choice(n * d, size=int(nnz), replace=False))
        A = SparseMatrix.from_coo(n, d, cells // d, cells % d, g.standard_normal(int(nnz)) + 3.0)
        best = math.inf
        for _ in range(reps):
            t0 = time.perf_counter()
            sketch.apply_sketch(plan, A)
            best = min(best, time.perf_counter() - t0)
        rows.append((int(A.nnz), best * 1e3))
    x = np.array([r[0] for r in rows], dtype=float)
    y = np.array([r[1] for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return rows, {"intercept_ms": float(intercept), "ms_per_nnz": float(slope), "r2": r2}


def cmd_bench(cfg, seed, out, threads):
    rows, fit = bench_apply_sketch(cfg["n"], cfg["d"], cfg["s"], cfg["ladder"], cfg["reps"], seed)
    with open(out / "bench.csv", "w") as fh:
        fh.write("nnz,wall_ms\n")
        for nnz, ms in rows:
            fh.write(f"{nnz},{ms:.6f}\n")
    return {"rows": rows, "fit": fit}, [_check("linear_fit_r2", fit["r2"] >= cfg["min_r2"], r2=fit["r2"])]


COMMANDS = {
    "generate": cmd_generate,
    "sketch": cmd_sketch,
    "condition": cmd_condition,
    "sample": cmd_sample,
    "regress": cmd_regress,
    "verify-tails": cmd_verify_tails,
    "cdf-order": cmd_cdf_order,
    "moments": cmd_moments,
    "bench": cmd_bench,
}


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lpembed", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {version_string()}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        keys = "\n".join(f"  {k:<18} default {json.dumps(v.default)}" + (f"  ({v.why})" if v.why else "")
                         for k, v in SCHEMAS[name].items())
        sp = sub.add_parser(name, help=f"run '{name}'", epilog="config keys:\n" + keys,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", type=Path, help="JSON file of parameters")
        sp.add_argument("--seed", type=int, default=None, help="master seed (u64); overrides the config")
        sp.add_argument("--out", type=Path, default=Path("lpembed-out"), help="output directory")
        sp.add_argument("--deterministic", action="store_true", help="force sequential reductions")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for trial loops")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                        help="override a single config key, e.g. --set n=5000")
    return ap


def _read_config(args) -> dict:
    raw = {}
    if args.config is not None:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        raw = raw.get("config", raw) if "command" in raw and "config" in raw else raw
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            raw[key] = json.loads(val)
        except json.JSONDecodeError:
            raw[key] = val
    return raw


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out: Path = args.out
    report: dict = {"version": version_string(), "command": args.command}
    try:
        raw = _read_config(args)
        seed = args.seed if args.seed is not None else raw.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
        cfg = resolve_config(args.command, raw)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as e:
        report.update({"pass": False, "error": {"type": "config", "message": str(e)}})
        print(json.dumps(report), file=sys.stderr)
        return EXIT_CONFIG

    threads = 1 if args.deterministic else args.threads
    cfg_echo = {**cfg, "seed": seed}
    report.update({"config": cfg_echo, "seed": seed, "threads": threads, "deterministic": args.deterministic})
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        result, checks = COMMANDS[args.command](cfg, seed, out, threads)
    except (ConfigError, DomainError, FileNotFoundError) as e:
        report.update({"pass": False, "error": {"type": "config", "message": str(e)}})
        _write_report(out, args.command, report)
        print(json.dumps(report["error"]), file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 -- every failure becomes a report
        report.update({"pass": False, "error": {"type": type(e).__name__, "message": str(e)}})
        _write_report(out, args.command, report)
        print(json.dumps(report["error"]), file=sys.stderr)
        return EXIT_CHECK
    ok = all(c["pass"] for c in checks)
    report.update({"result": result, "checks": checks, "pass": ok, "wall_s": time.perf_counter() - t0})
    path = _write_report(out, args.command, report)
    status = "PASS" if ok else "FAIL"
    print(f"{status} {args.command} -> {path}")
    for c in checks:
        print(f"  [{'ok' if c['pass'] else 'FAIL'}] {c['check']}")
    return EXIT_OK if ok else EXIT_CHECK


def _write_report(out: Path, command: str, report: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{command}.json"
    path.write_text(json.dumps(report, indent=2, default=_jsonable) + "\n")
    return path


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
