"""Subspace-preserving row sampling driven by lp leverage of a conditioned basis."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .conditioning import Conditioner
from .sketch import DistortionReport, measure_distortion
from .sparse_core import SparseMatrix, row_lp_norms, spmm
from .stable_rand import DomainError, StableParams, abs_median, as_stream, sample_pstable

__all__ = [
    "LeverageWeights",
    "SamplingMatrix",
    "leverage_weights",
    "build_sampling_matrix",
    "verify_sampling_distortion",
    "sampling_size",
]


@dataclass
class LeverageWeights:
    lam: np.ndarray
    method: str
    p: float

    @property
    def n(self) -> int:
        return self.lam.size


@dataclass
class SamplingMatrix:
    """Row sampler with exactly one nonzero, ``weights[i]``, at column ``rows[i]``."""

    rows: np.ndarray
    weights: np.ndarray
    p: float
    n: int
    s_target: float
    target_epsilon: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def s_realized(self) -> int:
        return int(self.rows.size)

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.rows.tolist(), self.weights.tolist()))

    def apply(self, A) -> np.ndarray:
        """``S A`` as a dense ``s_realized x d`` array."""
        if isinstance(A, SparseMatrix):
            sub = A.to_scipy()[self.rows].toarray()
        else:
            sub = np.asarray(A, dtype=float)[self.rows]
        return self.weights[:, None] * sub if sub.ndim == 2 else self.weights * sub

    def apply_vector(self, b) -> np.ndarray:
        return self.weights * np.asarray(b, dtype=float)[self.rows]

    def save_csv(self, path: str | os.PathLike) -> None:
        header = {
            "p": self.p,
            "n": self.n,
            "s_target": self.s_target,
            "target_epsilon": self.target_epsilon,
            "seed": self.meta.get("seed"),
            "method": self.meta.get("method"),
        }
        with open(path, "w") as fh:
            fh.write("# " + json.dumps(header) + "\n")
            fh.write("row_index,weight\n")
            for r, w in zip(self.rows, self.weights):
                fh.write(f"{int(r)},{float(w)!r}\n")

    @classmethod
    def load_csv(cls, path: str | os.PathLike) -> "SamplingMatrix":
        with open(path) as fh:
            header = json.loads(fh.readline()[1:])
            fh.readline()
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        rows = data[:, 0].astype(np.int64) if data.size else np.empty(0, np.int64)
        weights = data[:, 1] if data.size else np.empty(0)
        meta = {k: header.pop(k) for k in ("seed", "method")}
        return cls(rows, weights, header["p"], header["n"], header["s_target"], header["target_epsilon"], meta)


def sampling_size(kappa_bar: float, d: int, p: float, epsilon: float, constant: float = 1.0) -> float:
    """``constant * kappa_bar^p * d^(|p/2 - 1| + 1) * log(1/eps) / eps^2``."""
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie in (0, 1)")
    return constant * kappa_bar**p * d ** (abs(p / 2 - 1) + 1) * math.log(1 / epsilon) / epsilon**2


def leverage_weights(
    A,
    R: Conditioner,
    p: float,
    method: str = "exact",
    seed=0,
    sketch_cols: int | None = None,
) -> LeverageWeights:
    """Row weights ``lam_j ~ ||(A R^{-1})_j||_p^p``.

    ``exact`` forms ``A R^{-1}`` (``O(nnz(A) d)``).  ``sketched`` multiplies
    ``R^{-1}`` by a ``d x k`` p-stable matrix ``G`` with ``k = O(log n)``; by
    stability each entry of row ``j`` of ``A R^{-1} G`` is ``||u_j||_p`` times a
    p-stable variate, so the row median of absolute values divided by the
    median of ``|X_p|`` estimates ``||u_j||_p``.
    """
    StableParams(p)
    Rinv = R.inverse()
    if not np.all(np.isfinite(Rinv)):
        raise np.linalg.LinAlgError("conditioner is singular")
    method = method.lower()
    if method == "exact":
        U = spmm(A, Rinv) if isinstance(A, SparseMatrix) else np.asarray(A) @ Rinv
        return LeverageWeights(row_lp_norms(U, p), "Exact", p)
    if method != "sketched":
        raise ValueError(f"unknown method {method!r}")
    n, d = A.shape
    k = sketch_cols or max(16, math.ceil(4 * math.log(max(n, 2))))
    G = sample_pstable(p, as_stream(seed).child("leverage"), (d, k))
    M = Rinv @ G
    V = spmm(A, M) if isinstance(A, SparseMatrix) else np.asarray(A) @ M
    est = np.median(np.abs(V), axis=1) / abs_median(p)
    return LeverageWeights(est**p, "Sketched", p)


def build_sampling_matrix(
    weights: LeverageWeights,
    s_target: float,
    seed=0,
    target_epsilon: float | None = None,
) -> SamplingMatrix:
    """Keep row ``j`` independently with ``pi_j = min(1, s_target lam_j / sum lam)``.

    Kept rows are rescaled by ``(1 / pi_j)^(1/p)`` so that
    ``E ||S y||_p^p = ||y||_p^p`` for every fixed ``y``.
    """
    if s_target < 1:
        raise ValueError("s_target must be >= 1")
    lam = np.asarray(weights.lam, dtype=float)
    total = lam.sum()
    if not total > 0:
        raise ValueError("all leverage weights are zero")
    pi = np.minimum(1.0, s_target * lam / total)
    u = as_stream(seed).child("sampling").generator.random(lam.size)
    rows = np.flatnonzero(u < pi)
    w = (1.0 / pi[rows]) ** (1.0 / weights.p)
    stream = as_stream(seed)
    return SamplingMatrix(
        rows,
        w,
        weights.p,
        lam.size,
        float(s_target),
        target_epsilon,
        {"method": weights.method, "seed": stream.label(), "expected_size": float(pi.sum())},
    )


def verify_sampling_distortion(A, S: SamplingMatrix, p: float, probes: int = 500, seed=0) -> DistortionReport:
    """Distortion of ``A -> S A``: exact singular values for p = 2, probes otherwise."""
    if S.s_realized == 0:
        raise ValueError("empty sample")
    rep = measure_distortion(A, S.apply(A), p, probes=probes, seed=seed)
    rep.meta.update({"kind": "sampling", "n": A.shape[0], "d": A.shape[1], "s": S.s_realized})
    return rep
