"""Sparse and dense random embeddings and distortion measurement.

The three sparse embeddings share one structure, ``Pi = S D``: ``S`` hashes
every input row ``j`` to a bucket ``bucket_of[j]`` uniformly at random and
``D`` is a random diagonal.  Applying such a plan to a CSR matrix costs one
scatter-add per stored nonzero.

* ``SIGN_L2``   diagonal of random signs (l2, CountSketch)
* ``CAUCHY_L1`` diagonal of standard Cauchy variates (l1)
* ``PSTABLE``   diagonal of p-stable variates (lp, 1 < p < 2)

``DENSE_PSTABLE`` is an ``s x n`` matrix of i.i.d. p-stable entries and is
applied strip by strip, see :func:`apply_dense_pstable`.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla

from .sparse_core import SparseMatrix, spmm
from .stable_rand import (
    DomainError,
    RngStream,
    StableParams,
    as_stream,
    sample_cauchy,
    sample_pstable,
    sample_signs,
)

__all__ = [
    "SketchKind",
    "SketchPlan",
    "DistortionReport",
    "plan_sketch",
    "apply_sketch",
    "apply_dense_pstable",
    "measure_distortion",
    "sketch_kind_for",
    "default_sketch_size",
    "theoretical_sketch_size",
    "probe_directions",
]

EXACT_MODE_MAX_ROWS = 100_000
DEFAULT_PROBES = 500


class SketchKind(str, enum.Enum):
    SIGN_L2 = "SignL2"
    CAUCHY_L1 = "CauchyL1"
    PSTABLE = "PStable"
    DENSE_PSTABLE = "DensePStable"


def sketch_kind_for(p: float) -> SketchKind:
    """Sparse embedding used for the lp norm: Cauchy at 1, signs at 2, p-stable between."""
    StableParams(p)
    if p == 1.0:
        return SketchKind.CAUCHY_L1
    if p == 2.0:
        return SketchKind.SIGN_L2
    return SketchKind.PSTABLE


def theoretical_sketch_size(kind, d, epsilon=0.5, delta=0.1, omega=1.0) -> float:
    """Embedding dimension the theory asks for (recorded in reports, rarely usable).

    l2: ``(d^2 + d) / (eps^2 delta)``; l1 and lp: ``omega d^5 log^5 d``.
    """
    kind = SketchKind(kind)
    if kind is SketchKind.SIGN_L2:
        return (d * d + d) / (epsilon**2 * delta)
    if kind is SketchKind.DENSE_PSTABLE:
        return omega * d * math.log(max(d, 2))
    return omega * d**5 * math.log(max(d, 2)) ** 5


def default_sketch_size(kind, d, epsilon=0.5, delta=0.1, c=10.0) -> int:
    """Practical preset: the l2 formula for signs, ``c * d^2`` otherwise."""
    kind = SketchKind(kind)
    if kind is SketchKind.SIGN_L2:
        return int(math.ceil((d * d + d) / (epsilon**2 * delta)))
    return max(int(math.ceil(c * d * d)), d)


@dataclass(frozen=True, eq=False)
class SketchPlan:
    kind: SketchKind
    n: int
    s: int
    bucket_of: np.ndarray
    diag: np.ndarray
    seed: RngStream
    p: float

    def dense(self) -> np.ndarray:
        """Materialize ``Pi`` as an ``s x n`` array (tests and tiny inputs only)."""
        Pi = np.zeros((self.s, self.n))
        Pi[self.bucket_of, np.arange(self.n)] = self.diag
        return Pi

    def fingerprint(self) -> bytes:
        return self.bucket_of.tobytes() + self.diag.tobytes()


def plan_sketch(kind, n: int, s: int, seed, p: float | None = None) -> SketchPlan:
    """Draw the bucket map and diagonal for a sparse embedding.

    The plan is a deterministic function of ``(kind, n, s, p, seed)``.
    """
    kind = SketchKind(kind)
    if n < 1 or s < 1:
        raise ValueError(f"need n >= 1 and s >= 1, got n={n}, s={s}")
    if kind is SketchKind.DENSE_PSTABLE:
        raise ValueError("dense p-stable embeddings have no plan; use apply_dense_pstable")
    if kind is SketchKind.SIGN_L2:
        p = 2.0
    elif kind is SketchKind.CAUCHY_L1:
        p = 1.0
    else:
        if p is None:
            raise ValueError("PStable plans need p")
        StableParams(p)
    stream = as_stream(seed)
    buckets = stream.child("buckets").generator.integers(0, s, size=n, dtype=np.int64)
    ds = stream.child("diag")
    if kind is SketchKind.SIGN_L2:
        diag = sample_signs(ds, n)
    elif kind is SketchKind.CAUCHY_L1:
        diag = sample_cauchy(ds, n)
    else:
        diag = sample_pstable(p, ds, n)
    buckets.setflags(write=False)
    diag.setflags(write=False)
    return SketchPlan(kind, n, s, buckets, diag, stream, float(p))


def apply_sketch(plan: SketchPlan, A, stats: dict | None = None) -> np.ndarray:
    """``Pi @ A`` as a dense ``s x d`` array, one scatter-add per stored nonzero.

    ``B[i, k] = sum over j with bucket_of[j] == i of diag[j] * A[j, k]``.  If
    ``stats`` is given, ``stats["nnz_read"]`` receives the number of entries read.
    """
    if not isinstance(A, SparseMatrix):
        A = SparseMatrix.from_dense(A)
    if plan.n != A.n:
        raise ValueError(f"plan is for n={plan.n}, matrix has n={A.n}")
    d = A.d
    rows = A.row_indices()
    target = plan.bucket_of[rows] * d + A.col_idx
    weights = plan.diag[rows] * A.values
    out = np.bincount(target, weights=weights, minlength=plan.s * d)
    if stats is not None:
        stats["nnz_read"] = int(weights.size)
    return out.reshape(plan.s, d)


def apply_dense_pstable(p: float, s: int, A, seed, strip: int = 2048) -> np.ndarray:
    """``Pi @ A`` for ``Pi`` with i.i.d. p-stable entries, never holding more than
    one ``s x strip`` block of ``Pi``.

    Block ``k`` (rows ``k*strip .. (k+1)*strip`` of ``A``) is drawn from child
    stream ``k``, so blocks with no nonzeros are skipped without changing the
    others.
    """
    StableParams(p)
    if s < 1:
        raise ValueError("s must be >= 1")
    if not isinstance(A, SparseMatrix):
        A = SparseMatrix.from_dense(A)
    stream = as_stream(seed)
    csr = A.to_scipy()
    out = np.zeros((s, A.d))
    for k, j0 in enumerate(range(0, A.n, strip)):
        j1 = min(j0 + strip, A.n)
        if A.row_ptr[j1] == A.row_ptr[j0]:
            continue
        block = sample_pstable(p, stream.child(k), (s, j1 - j0))
        out += np.asarray((csr[j0:j1].T @ block.T).T)
    return out


@dataclass
class DistortionReport:
    p: float
    lower: float
    upper: float
    probe_count: int
    exact: tuple[float, float] | None = None
    skipped_probes: int = 0
    rank_deficient: bool = False
    meta: dict = field(default_factory=dict)

    def distortion(self) -> float:
        """Largest relative deviation from 1; uses exact values when present."""
        lo, hi = self.exact if self.exact is not None else (self.lower, self.upper)
        return max(1.0 - lo, hi - 1.0)

    def within(self, epsilon: float) -> bool:
        return self.distortion() <= epsilon

    def to_json(self) -> str:
        m = dict(self.meta)
        row = {
            "kind": m.pop("kind", None),
            "p": self.p,
            "n": m.pop("n", None),
            "d": m.pop("d", None),
            "s": m.pop("s", None),
            "seed": m.pop("seed", None),
            "lower": self.lower,
            "upper": self.upper,
            "exact": list(self.exact) if self.exact is not None else None,
            "probe_count": self.probe_count,
        }
        if self.skipped_probes:
            row["skipped_probes"] = self.skipped_probes
        if self.rank_deficient:
            row["rank_deficient"] = True
        row.update(m)
        return json.dumps(row)


def probe_directions(d: int, probes: int, stream: RngStream) -> np.ndarray:
    """``d x (probes + 2d)``: random unit vectors then the signed coordinate axes."""
    g = stream.generator.standard_normal((d, probes))
    g /= np.linalg.norm(g, axis=0, keepdims=True)
    eye = np.eye(d)
    return np.hstack([g, eye, -eye])


def _col_lp(M, p):
    M = np.abs(M)
    if p == 2:
        return np.sqrt(np.einsum("ij,ij->j", M, M))
    if p == 1:
        return M.sum(axis=0)
    return np.sum(M**p, axis=0) ** (1.0 / p)


def probe_ratios(A, B, p, X, chunk: int = 64):
    """``||B x||_p / ||A x||_p`` per column ``x`` of ``X``; NaN where ``A x = 0``."""
    out = np.empty(X.shape[1])
    for c0 in range(0, X.shape[1], chunk):
        Xc = X[:, c0 : c0 + chunk]
        AX = spmm(A, Xc) if isinstance(A, SparseMatrix) else np.asarray(A) @ Xc
        na = _col_lp(AX, p)
        nb = _col_lp(B @ Xc, p)
        scale = max(float(na.max(initial=0.0)), 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[c0 : c0 + chunk] = np.where(na > 1e-13 * scale, nb / na, np.nan)
    return out


def _dense_qr_r(A):
    dense = A.to_dense() if isinstance(A, SparseMatrix) else np.asarray(A, dtype=float)
    return np.linalg.qr(dense, mode="r")


def measure_distortion(
    A,
    B,
    p: float,
    probes: int = DEFAULT_PROBES,
    seed=0,
    exact: bool = True,
    qr_r: np.ndarray | None = None,
) -> DistortionReport:
    """Measured distortion of the embedding ``A -> B`` (``B = Pi A``).

    Ratios ``||B x||_p / ||A x||_p`` are taken over ``probes`` random unit
    directions and the ``2d`` signed coordinate directions.  For ``p = 2`` and
    ``n <= 10^5`` the exact extremes are also computed: with ``A = QR`` the
    extremes over all ``x`` are the singular values of ``B R^{-1}``.  ``qr_r``
    may pass in a precomputed ``R``.
    """
    if probes < 1:
        raise ValueError("probes must be >= 1")
    B = np.asarray(B, dtype=float)
    n, d = A.shape
    if B.ndim != 2 or B.shape[1] != d:
        raise ValueError(f"B must have {d} columns")
    X = probe_directions(d, probes, as_stream(seed))
    r = probe_ratios(A, B, p, X)
    ok = ~np.isnan(r)
    if not ok.any():
        raise ValueError("A x = 0 for every probe direction")
    rep = DistortionReport(
        p=float(p),
        lower=float(r[ok].min()),
        upper=float(r[ok].max()),
        probe_count=int(ok.sum()),
        skipped_probes=int((~ok).sum()),
    )
    if p == 2 and exact and n <= EXACT_MODE_MAX_ROWS:
        R = _dense_qr_r(A) if qr_r is None else qr_r
        diag = np.abs(np.diag(R))
        if diag.size < d or diag.min() <= 1e-12 * diag.max():
            rep.rank_deficient = True
        else:
            sv = np.linalg.svd(sla.solve_triangular(R, B.T, trans="T").T, compute_uv=False)
            rep.exact = (float(sv.min()), float(sv.max()))
    return rep
