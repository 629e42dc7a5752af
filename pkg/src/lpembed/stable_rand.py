"""Seeded random streams and samplers for Cauchy, Gaussian, sign and p-stable variates.

The "standard" p-stable law used throughout the package has characteristic
function ``exp(-|t|**p)``.  At ``p = 1`` it is the standard Cauchy law and at
``p = 2`` it is a centred Gaussian with variance 2.

Streams
-------
An :class:`RngStream` is labelled by ``(master_seed, stream_id)``.  Its state is a
Philox counter-based generator keyed by a :class:`numpy.random.SeedSequence`
built from both integers, so equal labels give bit-identical sequences and
distinct labels give independent ones.  Child streams are derived by hashing
the parent label together with a child key (see :meth:`RngStream.child`).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "DomainError",
    "RngStream",
    "StableParams",
    "sample_cauchy",
    "sample_gaussian",
    "sample_signs",
    "sample_pstable",
    "empirical_cdf",
    "abs_median",
    "cauchy_abs_cdf",
    "tail_constant",
]

_MASK64 = (1 << 64) - 1


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


def _derive_id(master_seed: int, stream_id: int, key: int | str) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(f"{master_seed & _MASK64}:{stream_id & _MASK64}:{key}".encode())
    return int.from_bytes(h.digest(), "little")


@dataclass
class RngStream:
    """A reproducible random stream labelled by ``(master_seed, stream_id)``."""

    master_seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.master_seed = int(self.master_seed) & _MASK64
        self.stream_id = int(self.stream_id) & _MASK64
        ss = np.random.SeedSequence([self.master_seed, self.stream_id])
        self._gen = np.random.Generator(np.random.Philox(ss))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def child(self, key: int | str) -> "RngStream":
        """Independent sub-stream; depends only on this stream's label and ``key``."""
        return RngStream(self.master_seed, _derive_id(self.master_seed, self.stream_id, key))

    def fresh(self) -> "RngStream":
        """A new stream with the same label, rewound to its start."""
        return RngStream(self.master_seed, self.stream_id)

    def label(self) -> dict:
        return {"master_seed": self.master_seed, "stream_id": self.stream_id}


def as_stream(seed) -> RngStream:
    """Accept an ``RngStream`` or a bare integer seed."""
    if isinstance(seed, RngStream):
        return seed
    return RngStream(int(seed))


@dataclass(frozen=True)
class StableParams:
    p: float

    def __post_init__(self):
        if not (1.0 <= self.p <= 2.0) or math.isnan(self.p):
            raise DomainError(f"stability index p={self.p} outside [1, 2]")


def sample_cauchy(stream: RngStream, size=None):
    """Standard Cauchy variates, ``tan(pi * (U - 1/2))``."""
    u = stream.generator.random(size)
    return np.tan(np.pi * (u - 0.5))


def sample_gaussian(stream: RngStream, size=None):
    return stream.generator.standard_normal(size)


def sample_signs(stream: RngStream, size=None):
    """Uniform draws from {-1, +1} (as float64)."""
    bits = stream.generator.integers(0, 2, size=size, dtype=np.int8)
    return 2.0 * bits - 1.0


def sample_pstable(params: StableParams | float, stream: RngStream, size=None):
    """Symmetric p-stable variates with characteristic function ``exp(-|t|**p)``.

    Chambers-Mallows-Stuck with skewness 0::

        X = sin(p V) / cos(V)**(1/p) * (cos((1 - p) V) / W)**((1 - p) / p)

    with ``V ~ U(-pi/2, pi/2)`` and ``W ~ Exp(1)``.  The expression reduces to
    ``tan V`` at p = 1 and to ``2 sin(V) sqrt(W)`` (variance 2) at p = 2.
    """
    if not isinstance(params, StableParams):
        params = StableParams(float(params))
    p = params.p
    gen = stream.generator
    v = np.pi * (gen.random(size) - 0.5)
    w = gen.standard_exponential(size)
    if p == 1.0:
        return np.tan(v)
    return (
        np.sin(p * v)
        / np.cos(v) ** (1.0 / p)
        * (np.cos((1.0 - p) * v) / w) ** ((1.0 - p) / p)
    )


def empirical_cdf(samples, grid) -> np.ndarray:
    """Fraction of ``samples`` that are ``<= t`` for each ``t`` in ``grid``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise DomainError("empirical_cdf needs at least one sample")
    g = np.asarray(grid, dtype=float)
    if g.size > 1 and np.any(np.diff(g) < 0):
        raise DomainError("grid must be sorted ascending")
    return np.searchsorted(x, g, side="right") / x.size


def cauchy_abs_cdf(t):
    """CDF of ``|C|`` for standard Cauchy ``C``: ``(2/pi) atan(t)``."""
    return 2.0 / np.pi * np.arctan(t)


def tail_constant(p: float) -> float:
    """``c_p`` in ``Pr[X > x] ~ c_p x**-p`` for ``X ~ D_p``, p in [1, 2)."""
    return math.sin(math.pi * p / 2.0) * math.gamma(p) / math.pi


def _abs_cdf_pstable(m: float, p: float) -> float:
    # Conditional on V the CMS variate is a(V) * W**((p-1)/p), so
    # Pr[|X| <= m | V] = 1 - exp(-(m / |a(V)|)**(p / (p-1))).
    expo = p / (p - 1.0)

    def integrand(v):
        a = abs(np.sin(p * v)) / np.cos(v) ** (1.0 / p) * np.cos((1.0 - p) * v) ** ((1.0 - p) / p)
        if a == 0.0:
            return 1.0
        return -np.expm1(-((m / a) ** expo))

    val, _ = integrate.quad(integrand, 0.0, np.pi / 2.0, limit=200, epsabs=1e-12, epsrel=1e-10)
    return 2.0 / np.pi * val


@lru_cache(maxsize=64)
def abs_median(p: float) -> float:
    """Median of ``|X|`` for ``X ~ D_p``, by quadrature over the CMS representation."""
    StableParams(p)
    if p == 1.0:
        return 1.0
    if p == 2.0:
        return math.sqrt(2.0) * float(special.ndtri(0.75))
    return optimize.brentq(lambda m: _abs_cdf_pstable(m, p) - 0.5, 1e-3, 10.0, xtol=1e-13)
