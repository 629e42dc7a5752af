"""Synthetic test matrices.

Families
--------
random_sparse    Bernoulli(density) pattern with standard normal values.
spiky_leverage   random_sparse with ceil(d/2) rows replaced by 1e3 * e_k, which
                 makes those rows dominate the leverage of column k.
identity_top     (I_d 0)^T: a "perfectly hashed" adversarial input.
consistent_pair  random_sparse A with b = A x_true exactly.
"""

from __future__ import annotations

import math

import numpy as np

from .sparse_core import SparseMatrix
from .stable_rand import as_stream

FAMILIES = ("random_sparse", "spiky_leverage", "identity_top", "consistent_pair")

_MAX_RESAMPLES = 20


def _full_rank(A: SparseMatrix) -> bool:
    G = (A.to_scipy().T @ A.to_scipy()).toarray()
    ev = np.linalg.eigvalsh(G)
    return ev.size > 0 and ev[0] > 1e-10 * ev[-1]


def _random_sparse(n, d, density, stream):
    gen = stream.generator
    mask = gen.random((n, d)) < density
    rows, cols = np.nonzero(mask)
    vals = gen.standard_normal(rows.size)
    return SparseMatrix.from_coo(n, d, rows, cols, vals)


def generate_matrix(family: str, n: int, d: int, density: float = 1.0, seed=0):
    """Returns ``(A, b)``; ``b`` is ``None`` except for ``consistent_pair``."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
    if not (n >= d >= 1):
        raise ValueError("need n >= d >= 1")
    if not (0 < density <= 1):
        raise ValueError("density must lie in (0, 1]")
    stream = as_stream(seed)
    if family == "identity_top":
        A = SparseMatrix.from_coo(n, d, np.arange(d), np.arange(d), np.ones(d))
        return A, None
    if family != "spiky_leverage" and n * density < d:
        raise ValueError(f"infeasible: n * density = {n * density} < d = {d}")

    for attempt in range(_MAX_RESAMPLES):
        sub = stream.child(("matrix", attempt))
        A = _random_sparse(n, d, density, sub)
        if family == "spiky_leverage":
            k = math.ceil(d / 2)
            spikes = sub.child("spikes").generator.choice(n, size=k, replace=False)
            csr = A.to_scipy().tolil()
            for col, r in enumerate(spikes):
                csr[r, :] = 0.0
                csr[r, col] = 1e3
            A = SparseMatrix.from_scipy(csr.tocsr())
        if _full_rank(A):
            break
    else:
        raise ValueError(f"could not draw a full column rank {family} matrix in {_MAX_RESAMPLES} tries")

    b = None
    if family == "consistent_pair":
        x_true = stream.child("x_true").generator.standard_normal(d)
        b = A @ x_true
    return A, b


def noisy_rhs(A: SparseMatrix, seed=0, noise: str = "cauchy", scale: float = 1.0):
    """``b = A x_true + noise`` with heavy-tailed (Cauchy) or Gaussian noise."""
    stream = as_stream(seed)
    x_true = stream.child("x_true").generator.standard_normal(A.d)
    g = stream.child("noise").generator
    e = g.standard_cauchy(A.n) if noise == "cauchy" else g.standard_normal(A.n)
    return A @ x_true + scale * e, x_true
