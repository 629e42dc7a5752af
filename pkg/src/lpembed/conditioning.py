"""Well-conditioning transforms ``R`` and lp condition-number estimates.

Two conditioning numbers are tracked for an ``n x d`` matrix ``A``:

``kappa_p``
    ``max ||A x||_p / min ||A x||_p`` over the Euclidean unit sphere.
``kappa_bar_p``
    ``alpha * beta`` with ``alpha = |A|_p`` (entrywise) and ``beta`` the smallest
    constant with ``||z||_q <= beta ||A z||_p`` for all ``z``, ``1/p + 1/q = 1``.

They always satisfy ``d^-|1/2-1/p| kappa <= kappa_bar <= d^max(1/2,1/p) kappa``.
Only ``alpha`` is computed exactly; the extremal quantities are estimated from
random directions, signed axes, a local search from the best directions and,
for ``d <= 3``, a deterministic grid on the sphere.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy import optimize

from .sketch import probe_directions
from .sparse_core import SparseMatrix, elementwise_lp_norm, load_dense_array, save_dense_array, spmm
from .stable_rand import DomainError, as_stream

__all__ = [
    "RankDeficientError",
    "Conditioner",
    "ConditionEstimate",
    "qr_condition",
    "estimate_condition",
    "ellipsoidal_round",
    "sphere_grid",
    "grid_extremes",
]

RANK_TOL = 1e-12


class RankDeficientError(np.linalg.LinAlgError):
    def __init__(self, column, ratio):
        self.column = column
        super().__init__(f"rank deficient: column {column} has |R_kk| = {ratio:.3g} x max diagonal")


@dataclass
class Conditioner:
    """Upper-triangular ``R`` such that ``A R^{-1}`` is (hopefully) well conditioned."""

    R: np.ndarray
    method: str = "QR"
    achieved_kappa_bar: float | None = None
    warning: str | None = None

    @property
    def d(self) -> int:
        return self.R.shape[0]

    def apply(self, x):
        return self.R @ np.asarray(x, dtype=float)

    def apply_inverse(self, y):
        return sla.solve_triangular(self.R, np.asarray(y, dtype=float))

    def inverse(self) -> np.ndarray:
        return sla.solve_triangular(self.R, np.eye(self.d))

    def transform(self, A) -> np.ndarray:
        """Dense ``A R^{-1}``; ``O(nnz(A) d)`` for sparse ``A``."""
        Rinv = self.inverse()
        if isinstance(A, SparseMatrix):
            return spmm(A, Rinv)
        return np.asarray(A, dtype=float) @ Rinv

    def save(self, prefix: str | os.PathLike) -> None:
        """Writes ``<prefix>.mtx`` (array format) and ``<prefix>.json``."""
        prefix = os.fspath(prefix)
        save_dense_array(prefix + ".mtx", self.R)
        with open(prefix + ".json", "w") as fh:
            json.dump(
                {"method": self.method, "achieved_kappa_bar": self.achieved_kappa_bar, "warning": self.warning},
                fh,
            )

    @classmethod
    def load(cls, prefix: str | os.PathLike) -> "Conditioner":
        prefix = os.fspath(prefix)
        with open(prefix + ".json") as fh:
            meta = json.load(fh)
        return cls(load_dense_array(prefix + ".mtx"), **meta)


def _check_rank(R):
    diag = np.abs(np.diag(R))
    top = diag.max(initial=0.0)
    if top == 0.0:
        raise RankDeficientError(0, 0.0)
    bad = np.flatnonzero(diag <= RANK_TOL * top)
    if bad.size:
        raise RankDeficientError(int(bad[0]), diag[bad[0]] / top)


def qr_condition(B) -> Conditioner:
    """``R`` factor of a Householder QR of ``B`` (no pivoting), diagonal made positive.

    ``B R^{-1}`` then has orthonormal columns.
    """
    B = np.asarray(B, dtype=float)
    s, d = B.shape
    if s < d:
        raise ValueError(f"need at least d={d} rows, got {s}")
    R = np.linalg.qr(B, mode="r")
    _check_rank(R)
    R = np.sign(np.diag(R))[:, None] * R
    return Conditioner(R, "QR")


@dataclass
class ConditionEstimate:
    p: float
    alpha: float
    beta_hat: float
    kappa_bar_hat: float
    kappa_hat: tuple[float, float]
    d: int = 0
    grid: dict | None = None

    @property
    def kappa(self) -> float:
        lo, hi = self.kappa_hat
        return hi / lo

    def sandwich_holds(self, tol: float = 0.05) -> bool:
        """The kappa / kappa_bar equivalence, with ``tol`` slack for estimation error."""
        lo = self.d ** -abs(0.5 - 1.0 / self.p) * self.kappa
        hi = self.d ** max(0.5, 1.0 / self.p) * self.kappa
        return lo <= self.kappa_bar_hat * (1 + tol) and self.kappa_bar_hat <= hi * (1 + tol)

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "alpha": self.alpha,
            "beta_hat": self.beta_hat,
            "kappa_bar_hat": self.kappa_bar_hat,
            "sigma_min_hat": self.kappa_hat[0],
            "sigma_max_hat": self.kappa_hat[1],
            "kappa_hat": self.kappa,
        }


def _dual(p):
    return math.inf if p == 1 else p / (p - 1.0)


def _colnorm(M, p):
    M = np.abs(M)
    if math.isinf(p):
        return M.max(axis=0)
    if p == 1:
        return M.sum(axis=0)
    if p == 2:
        return np.sqrt(np.einsum("ij,ij->j", M, M))
    return np.sum(M**p, axis=0) ** (1.0 / p)


def _image_norms(A, X, p, chunk=256):
    out = np.empty(X.shape[1])
    for c in range(0, X.shape[1], chunk):
        Xc = X[:, c : c + chunk]
        AX = spmm(A, Xc) if isinstance(A, SparseMatrix) else A @ Xc
        out[c : c + chunk] = _colnorm(AX, p)
    return out


def sphere_grid(d: int, points: int = 10_000) -> np.ndarray:
    """Deterministic near-uniform unit vectors (``d x points``) for ``d <= 3``."""
    if d == 1:
        return np.array([[1.0, -1.0]])
    if d == 2:
        th = np.linspace(0.0, 2 * np.pi, points, endpoint=False)
        return np.vstack([np.cos(th), np.sin(th)])
    if d == 3:
        k = np.arange(points) + 0.5
        z = 1 - 2 * k / points
        r = np.sqrt(1 - z * z)
        phi = np.pi * (1 + 5**0.5) * k
        return np.vstack([r * np.cos(phi), r * np.sin(phi), z])
    raise ValueError("sphere grid only for d <= 3")


def grid_extremes(A, p: float, points: int = 10_000) -> dict:
    """Grid oracle for ``sigma_min``, ``sigma_max`` and ``beta`` (``d <= 3``)."""
    X = sphere_grid(A.shape[1], points)
    img = _image_norms(A, X, p)
    q = _dual(p)
    beta = _colnorm(X, q) / img
    return {
        "sigma_min": float(img.min()),
        "sigma_max": float(img.max()),
        "beta": float(beta.max()),
        "points": X.shape[1],
    }


def _refine(fun, starts, maxiter):
    best = math.inf
    for x0 in starts:
        res = optimize.minimize(
            fun, x0, method="Nelder-Mead", options={"maxiter": maxiter, "xatol": 1e-9, "fatol": 1e-12}
        )
        best = min(best, float(res.fun))
    return best


def estimate_condition(
    A,
    p: float,
    probes: int = 500,
    seed=0,
    grid: bool | None = None,
    refine: int = 3,
    refine_iters: int = 200,
) -> ConditionEstimate:
    """Estimate ``kappa_p`` and ``kappa_bar_p`` of ``A`` (sparse or dense).

    Probe estimates bracket from inside: ``sigma_max`` and ``beta`` are
    underestimated, ``sigma_min`` is overestimated.  ``grid`` defaults to on
    for ``d <= 3``; grid values are folded into the estimate and also reported
    separately under ``grid``.
    """
    if not (1.0 <= p <= 2.0):
        raise DomainError(f"p={p} outside [1, 2]")
    if not isinstance(A, SparseMatrix):
        A = np.asarray(A, dtype=float)
    d = A.shape[1]
    q = _dual(p)
    alpha = elementwise_lp_norm(A, p)
    X = probe_directions(d, probes, as_stream(seed))
    img = _image_norms(A, X, p)
    if np.any(img <= 0):
        raise RankDeficientError(-1, 0.0)
    dual = _colnorm(X, q)
    smax, smin = img.max(), img.min()
    beta = (dual / img).max()

    if refine and d > 1:
        def ratio(x):
            nx = np.linalg.norm(x)
            if nx == 0:
                return math.inf, 0.0, math.inf
            ax = _image_norms(A, x[:, None] / nx, p)[0]
            return ax, _colnorm(x[:, None] / nx, q)[0], nx

        def neg_sigma(x):
            ax, _, _ = ratio(x)
            return -ax if math.isfinite(ax) else 0.0

        def pos_sigma(x):
            ax, _, _ = ratio(x)
            return ax

        def neg_beta(x):
            ax, zq, _ = ratio(x)
            return -zq / ax if ax > 0 and math.isfinite(ax) else 0.0

        top = lambda v: [X[:, i] for i in np.argsort(v)[:refine]]
        smax = max(smax, -_refine(neg_sigma, top(-img), refine_iters))
        smin = min(smin, _refine(pos_sigma, top(img), refine_iters))
        beta = max(beta, -_refine(neg_beta, top(-(dual / img)), refine_iters))

    grid_info = None
    if grid is None:
        grid = d <= 3
    if grid and d <= 3:
        grid_info = grid_extremes(A, p)
        smax = max(smax, grid_info["sigma_max"])
        smin = min(smin, grid_info["sigma_min"])
        beta = max(beta, grid_info["beta"])

    return ConditionEstimate(
        p=float(p),
        alpha=alpha,
        beta_hat=float(beta),
        kappa_bar_hat=float(alpha * beta),
        kappa_hat=(float(smin), float(smax)),
        d=d,
        grid=grid_info,
    )


def _probe_kappa(B, R, p, Y):
    img = _colnorm(B @ sla.solve_triangular(R, Y), p)
    return img.max() / img.min(), img


def ellipsoidal_round(B, p: float, max_iters: int = 100, probes: int = 500, seed=0) -> Conditioner:
    """Best-effort rounding of the body ``{x : ||B x||_p <= 1}`` by an ellipsoid.

    Starts from the QR conditioner.  The ellipsoid ``{x : ||R x||_2 <= 1}`` is
    kept as ``M = R^T R``.  Each iteration takes the probe directions where
    ``||B R^{-1} y||_p`` is largest and smallest and stretches (or shrinks) the
    ellipsoid along them with a rank-one update
    ``M + tau (M x)(M x)^T / (x^T M x)``, accepting the step only if the probe
    estimate of ``kappa_p(B R^{-1})`` decreases.  The step is halved on
    rejection; the loop ends when it falls below ``1/64`` (converged) or after
    ``max_iters`` iterations, in which case ``warning`` is set.  The returned
    conditioner is never worse than QR on the probe set.
    """
    B = np.asarray(B, dtype=float)
    base = qr_condition(B)
    if max_iters <= 0:
        base.method = "QR"
        base.warning = "rounding not run (max_iters=0); QR fallback"
        warnings.warn(base.warning, RuntimeWarning, stacklevel=2)
        return base
    d = B.shape[1]
    Y = probe_directions(d, probes, as_stream(seed))
    R = base.R
    kappa, img = _probe_kappa(B, R, p, Y)
    step = 1.0
    converged = False
    for _ in range(max_iters):
        if kappa <= 1.0 + 1e-12:
            converged = True
            break
        c = math.sqrt(img.max() * img.min())
        M = R.T @ R
        M_new = M.copy()
        for idx in (int(np.argmax(img)), int(np.argmin(img))):
            x = sla.solve_triangular(R, Y[:, idx])
            Mx = M @ x
            m = float(x @ Mx)
            tau = (img[idx] / c) ** (2 * step) - 1.0
            M_new += tau * np.outer(Mx, Mx) / m
        try:
            R_new = sla.cholesky(M_new, lower=False)
        except np.linalg.LinAlgError:
            R_new = None
        if R_new is not None:
            k_new, img_new = _probe_kappa(B, R_new, p, Y)
            if k_new < kappa:
                R, kappa, img = R_new, k_new, img_new
                step = min(1.0, step * 1.5)
                continue
        step /= 2
        if step < 1 / 64:
            converged = True
            break
    cond = Conditioner(R, "Rounding")
    if not converged:
        cond.warning = f"rounding stopped at max_iters={max_iters}"
    # final pick by the full estimator so probe resolution cannot make things worse
    est_new = estimate_condition(B @ cond.inverse(), p, probes=probes, seed=seed, grid=False)
    est_qr = estimate_condition(B @ base.inverse(), p, probes=probes, seed=seed, grid=False)
    if est_qr.kappa <= est_new.kappa:
        base.achieved_kappa_bar = est_qr.kappa_bar_hat
        base.warning = cond.warning
        return base
    cond.achieved_kappa_bar = est_new.kappa_bar_hat
    return cond
