"""lp regression solvers and the sketch/condition/sample pipelines built on them."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .conditioning import Conditioner, RankDeficientError, ellipsoidal_round, estimate_condition, qr_condition
from .sampling import SamplingMatrix, build_sampling_matrix, leverage_weights, sampling_size
from .sketch import SketchKind, apply_sketch, default_sketch_size, plan_sketch, sketch_kind_for
from .sparse_core import SparseMatrix, lp_norm, spmm
from .stable_rand import DomainError, as_stream

__all__ = [
    "RegressionSolution",
    "PipelineError",
    "lp_objective",
    "solve_l2_exact",
    "solve_lp_small",
    "l1_oracle_bruteforce",
    "fast_l2_regression",
    "fast_lp_regression",
    "improve_embedding_dimension",
]


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {cause}")


@dataclass
class RegressionSolution:
    x_hat: np.ndarray
    objective: float
    p: float
    pipeline_trace: list = field(default_factory=list)
    claimed_ratio: float | None = None
    flagged: str | None = None
    iterations: int = 0

    def to_json(self, seed=None) -> str:
        return json.dumps(
            {
                "x_hat": self.x_hat.tolist(),
                "objective": self.objective,
                "p": self.p,
                "claimed_ratio": self.claimed_ratio,
                "flagged": self.flagged,
                "pipeline_trace": self.pipeline_trace,
                "seed": seed,
            },
            default=_jsonable,
        )


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _dense(A) -> np.ndarray:
    return A.to_dense() if isinstance(A, SparseMatrix) else np.asarray(A, dtype=float)


def lp_objective(A, x, b, p: float) -> float:
    """``||A x - b||_p`` recomputed from scratch."""
    Ax = spmm(A, x) if isinstance(A, SparseMatrix) else np.asarray(A, dtype=float) @ x
    return lp_norm(Ax - np.asarray(b, dtype=float), p)


def _qr_lstsq(A, b):
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag.min() <= 1e-12 * diag.max():
        bad = int(np.argmin(diag)) if diag.size else 0
        raise RankDeficientError(bad, diag[bad] / diag.max() if diag.size else 0.0)
    return sla.solve_triangular(R, Q.T @ b)


def solve_l2_exact(A, b) -> RegressionSolution:
    """Least squares by a thin QR of ``A``."""
    Ad = _dense(A)
    b = np.asarray(b, dtype=float)
    x = _qr_lstsq(Ad, b)
    return RegressionSolution(x, lp_norm(Ad @ x - b, 2), 2.0)


def solve_lp_small(
    A,
    b,
    p: float,
    epsilon: float = 0.01,
    x0=None,
    mu_factor: float = 0.1,
    max_iter: int = 500,
    inner_tol: float | None = None,
) -> RegressionSolution:
    """IRLS on the smoothed objective ``sum (r_i^2 + mu^2)^(p/2)``.

    Each smoothing stage runs majorize-minimize steps (weights
    ``(r_i^2 + mu^2)^(p/2 - 1)``), which never increase the smoothed objective;
    any increase beyond rounding is counted in ``trace["monotone_violations"]``.
    ``mu`` starts at ``||b||_p / n`` and shrinks by ``mu_factor`` per stage down
    to ``1e-12`` times its start.  The solve stops once a whole stage lowers
    the true objective by less than ``epsilon / 10`` relative.
    """
    if not (1.0 <= p <= 2.0):
        raise DomainError(f"p={p} outside [1, 2]")
    Ad = _dense(A)
    b = np.asarray(b, dtype=float)
    n, d = Ad.shape
    inner_tol = inner_tol if inner_tol is not None else min(1e-6, epsilon / 100)
    x = _qr_lstsq(Ad, b) if x0 is None else np.asarray(x0, dtype=float).copy()
    best_x, best_f = x, lp_norm(Ad @ x - b, p)
    mu0 = lp_norm(b, p) / n
    if mu0 == 0.0 or p == 2.0:
        return RegressionSolution(best_x, best_f, p, [{"stage": "irls", "stages": 0}], iterations=1)
    mu, floor = mu0, 1e-12 * mu0
    iters = violations = stages = 0
    prev_stage_f = best_f
    flagged = None
    while True:
        stages += 1
        r = Ad @ x - b
        F = np.sum((r * r + mu * mu) ** (p / 2))
        for k in range(max_iter):
            w = np.sqrt((r * r + mu * mu) ** (p / 2 - 1))
            x_new, *_ = np.linalg.lstsq(w[:, None] * Ad, w * b, rcond=None)
            r_new = Ad @ x_new - b
            F_new = np.sum((r_new * r_new + mu * mu) ** (p / 2))
            iters += 1
            if F_new > F * (1 + 1e-9):
                violations += 1
                break
            x, r, rel, F = x_new, r_new, (F - F_new) / F, F_new
            if rel < inner_tol:
                break
        else:
            flagged = f"iteration cap {max_iter} hit at mu={mu:.3g}"
        f = lp_norm(r, p)
        if f < best_f:
            best_x, best_f = x.copy(), f
        drop = (prev_stage_f - f) / prev_stage_f if prev_stage_f > 0 else 0.0
        prev_stage_f = f
        if mu <= floor or best_f == 0.0 or (stages > 1 and drop < epsilon / 10):
            break
        mu *= mu_factor
    trace = [{"stage": "irls", "stages": stages, "iterations": iters, "monotone_violations": violations, "final_mu": mu}]
    return RegressionSolution(best_x, lp_norm(Ad @ best_x - b, p), p, trace, flagged=flagged, iterations=iters)


def _combinations(n, d):
    return np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), d)), dtype=np.int64).reshape(-1, d)


def l1_oracle_bruteforce(A, b, batch: int = 50_000) -> RegressionSolution:
    """Exact l1 regression by enumerating all interpolating solutions.

    Some optimal solution of ``min ||A x - b||_1`` is a vertex of the LP, i.e.
    fits ``d`` linearly independent rows exactly.  Cost ``C(n, d)`` small solves.
    """
    Ad = _dense(A)
    b = np.asarray(b, dtype=float)
    n, d = Ad.shape
    if n > 200 or d > 4:
        raise ValueError("brute force oracle limited to n <= 200, d <= 4")
    idx_all = _combinations(n, d)
    scale = np.abs(Ad).max() ** d if Ad.size else 1.0
    best_f, best_x = math.inf, None
    for c0 in range(0, idx_all.shape[0], batch):
        idx = idx_all[c0 : c0 + batch]
        M = Ad[idx]
        det = np.linalg.det(M)
        ok = np.abs(det) > 1e-10 * scale
        if not ok.any():
            continue
        X = np.linalg.solve(M[ok], b[idx[ok]][..., None])[..., 0]
        f = np.abs(Ad @ X.T - b[:, None]).sum(axis=0)
        k = int(np.argmin(f))
        if f[k] < best_f:
            best_f, best_x = float(f[k]), X[k]
    if best_x is None:
        raise RankDeficientError(-1, 0.0)
    return RegressionSolution(best_x, lp_objective(Ad, best_x, b, 1.0), 1.0, [{"stage": "bruteforce", "subsets": int(idx_all.shape[0])}])


def _augment(A, b):
    if isinstance(A, SparseMatrix):
        return A.hstack_column(b)
    return np.hstack([np.asarray(A, dtype=float), np.asarray(b, dtype=float).reshape(-1, 1)])


def fast_l2_regression(A, b, epsilon: float, delta: float = 0.1, seed=0, retries: int = 3) -> RegressionSolution:
    """Sketch ``[A b]`` with a sign CountSketch and solve the small problem exactly.

    ``s = ((d+1)^2 + (d+1)) / ((eps/3)^2 delta)``; with probability
    ``>= 1 - delta`` the returned objective is within ``1 + eps`` of optimal.
    The best of ``retries`` independent sketches is kept.
    """
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie in (0, 1)")
    stream = as_stream(seed)
    n, d = A.shape
    Abar = _augment(A, b) if isinstance(A, SparseMatrix) else SparseMatrix.from_dense(_augment(A, b))
    s = int(math.ceil(((d + 1) ** 2 + (d + 1)) / ((epsilon / 3) ** 2 * delta)))
    best = None
    trace = []
    for r in range(max(1, retries)):
        try:
            plan = plan_sketch(SketchKind.SIGN_L2, n, s, stream.child(("l2", r)))
            B = apply_sketch(plan, Abar)
        except Exception as e:  # noqa: BLE001
            raise PipelineError("sketch", e) from e
        try:
            x = _qr_lstsq(B[:, :d], B[:, d])
        except RankDeficientError as e:
            raise PipelineError("solve", e) from e
        f = lp_objective(A, x, b, 2.0)
        trace.append({"stage": "sketch_solve", "retry": r, "kind": plan.kind.value, "s": s, "objective": f})
        if best is None or f < best[1]:
            best = (x, f)
    return RegressionSolution(best[0], best[1], 2.0, trace, claimed_ratio=1 + epsilon)


def _condition(B, method, p, seed):
    if method == "rounding":
        return ellipsoidal_round(B, p, seed=seed)
    return qr_condition(B)


def _fast_lp_once(A, b, p, epsilon, stream, sketch_size, sketch_c, sample_constant, conditioning, leverage, probes):
    n, d = A.shape
    trace = []
    Abar = _augment(A, b) if isinstance(A, SparseMatrix) else _augment(A, b)
    kind = sketch_kind_for(p)
    s1 = sketch_size or default_sketch_size(kind, d + 1, c=sketch_c)
    try:
        plan = plan_sketch(kind, n, s1, stream.child("sketch"), p=p)
        B = apply_sketch(plan, Abar)
    except Exception as e:  # noqa: BLE001
        raise PipelineError("sketch", e) from e
    trace.append({"stage": "sketch", "kind": kind.value, "s": s1})

    basis, note = Abar, None
    try:
        cond = _condition(B, conditioning, p, stream.child("cond"))
    except RankDeficientError as e:
        if e.column != d:
            raise PipelineError("condition", e) from e
        # b lies in range(A): condition on A alone
        basis, note = A, "b in range(A); conditioned on A only"
        try:
            cond = _condition(B[:, :d], conditioning, p, stream.child("cond"))
        except RankDeficientError as e2:
            raise PipelineError("condition", e2) from e2
    trace.append({"stage": "condition", "method": cond.method, "note": note})

    try:
        w = leverage_weights(basis, cond, p, method=leverage, seed=stream.child("lev"))
        U = cond.transform(basis)
        est = estimate_condition(U, p, probes=probes, seed=stream.child("est"), grid=False)
        dim = U.shape[1]
        s_target = sampling_size(est.kappa_bar_hat, dim, p, epsilon / 4, sample_constant)
        S = build_sampling_matrix(w, s_target, stream.child("sample"), target_epsilon=epsilon / 4)
    except Exception as e:  # noqa: BLE001
        raise PipelineError("sample", e) from e
    trace.append(
        {"stage": "sample", "kappa_bar_hat": est.kappa_bar_hat, "s_target": s_target, "s_realized": S.s_realized, "leverage": w.method}
    )

    try:
        sub = solve_lp_small(S.apply(A), S.apply_vector(b), p, epsilon / 4)
    except Exception as e:  # noqa: BLE001
        raise PipelineError("solve", e) from e
    trace.append({"stage": "solve", "iterations": sub.iterations, "flagged": sub.flagged})
    return sub.x_hat, trace


def fast_lp_regression(
    A,
    b,
    p: float,
    epsilon: float,
    seed=0,
    retries: int = 3,
    sketch_size: int | None = None,
    sketch_c: float = 10.0,
    sample_constant: float = 1.0,
    conditioning: str = "qr",
    leverage: str = "exact",
    probes: int = 200,
) -> RegressionSolution:
    """(1+eps)-approximate lp regression, 1 <= p < 2, in five stages.

    1. form ``[A b]``; 2. low-distortion sparse embedding (Cauchy at p = 1,
    p-stable otherwise); 3. conditioner from the sketch (QR or rounding);
    4. leverage sampling sized for ``(1 +- eps/4)`` distortion; 5. solve the
    sampled problem to ``(1 + eps/4)``.  The final guarantee is
    ``(1 + eps/4)^2 / (1 - eps/4) <= 1 + eps`` for ``eps < 1/2``.
    """
    if not (1.0 <= p < 2.0):
        raise DomainError("fast_lp_regression needs 1 <= p < 2")
    if not 0 < epsilon < 0.5:
        raise DomainError("epsilon must lie in (0, 1/2)")
    stream = as_stream(seed)
    b = np.asarray(b, dtype=float)
    best = None
    traces = []
    for r in range(max(1, retries)):
        x, trace = _fast_lp_once(
            A, b, p, epsilon, stream.child(("lp", r)), sketch_size, sketch_c, sample_constant, conditioning, leverage, probes
        )
        f = lp_objective(A, x, b, p)
        traces.append({"retry": r, "objective": f, "stages": trace})
        if best is None or f < best[1]:
            best = (x, f)
    return RegressionSolution(best[0], best[1], p, traces, claimed_ratio=1 + epsilon)


def improve_embedding_dimension(
    A,
    p: float,
    epsilon: float,
    seed=0,
    sketch_c: float = 10.0,
    sample_constant: float = 1.0,
    rounding: bool = True,
    probes: int = 200,
) -> SamplingMatrix:
    """Two rounds of sampling and conditioning for a smaller final embedding.

    1. low-distortion sparse embedding ``Pi A``; 2. ``R1`` from QR of ``Pi A``;
    3. a ``(1 +- 1/2)`` leverage sample ``S1`` of ``A R1^{-1}``; 4. ``R2`` by
    rounding ``S1 A``; 5. the final ``(1 +- eps)`` sample sized from the
    measured ``kappa_bar(A R2^{-1})``.

    ``meta["trace"]`` records each stage together with the single-stage
    baseline: a ``(1 +- eps)`` sample sized from ``kappa_bar(A R1^{-1})``.
    """
    if not (1.0 <= p < 2.0):
        raise DomainError("improve_embedding_dimension needs 1 <= p < 2")
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie in (0, 1)")
    stream = as_stream(seed)
    n, d = A.shape
    trace = {}

    kind = sketch_kind_for(p)
    s1 = default_sketch_size(kind, d, c=sketch_c)
    try:
        B = apply_sketch(plan_sketch(kind, n, s1, stream.child("sketch"), p=p), A)
        R1 = qr_condition(B)
    except Exception as e:  # noqa: BLE001
        raise PipelineError("sketch+condition", e) from e
    U1 = R1.transform(A)
    est1 = estimate_condition(U1, p, probes=probes, seed=stream.child("est"), grid=False)
    trace["sketch"] = {"kind": kind.value, "s": s1}
    trace["stage2_kappa_bar_hat"] = est1.kappa_bar_hat

    w1 = leverage_weights(U1, Conditioner(np.eye(d)), p)
    s_half = sampling_size(est1.kappa_bar_hat, d, p, 0.5, sample_constant)
    S_half = build_sampling_matrix(w1, s_half, stream.child("half"), target_epsilon=0.5)
    trace["half_sample"] = {"s_target": s_half, "s_realized": S_half.s_realized}

    try:
        SA = S_half.apply(A)
        R2 = ellipsoidal_round(SA, p, seed=stream.child("round")) if rounding else qr_condition(SA)
    except Exception as e:  # noqa: BLE001
        raise PipelineError("round", e) from e
    U2 = R2.transform(A)
    est2 = estimate_condition(U2, p, probes=probes, seed=stream.child("est"), grid=False)
    trace["round"] = {"method": R2.method, "warning": R2.warning}
    trace["stage4_kappa_bar_hat"] = est2.kappa_bar_hat
    trace["kappa_bar_target"] = 6 * d ** (1 / p + 1)

    w2 = leverage_weights(U2, Conditioner(np.eye(d)), p)
    s_final = sampling_size(est2.kappa_bar_hat, d, p, epsilon, sample_constant)
    S = build_sampling_matrix(w2, s_final, stream.child("final"), target_epsilon=epsilon)

    s_single = sampling_size(est1.kappa_bar_hat, d, p, epsilon, sample_constant)
    S_single = build_sampling_matrix(w1, s_single, stream.child("single"), target_epsilon=epsilon)
    trace["final"] = {"s_target": s_final, "s_realized": S.s_realized}
    trace["single_stage"] = {"s_target": s_single, "s_realized": S_single.s_realized}
    trace["theory_dimension"] = d ** (3 + p / 2) * math.log(1 / epsilon) / epsilon**2
    S.meta["trace"] = trace
    return S
