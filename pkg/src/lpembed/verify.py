"""Monte Carlo checks of the tail inequalities, the CDF ordering of |X_p/2|^p,
and the second-moment identities of the sign CountSketch.

Every report carries ``(empirical, bound, mc_stderr)``; bounds are evaluated
from their closed forms when the report is built.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .sketch import SketchKind, apply_sketch, plan_sketch
from .sparse_core import SparseMatrix
from .stable_rand import (
    DomainError,
    StableParams,
    as_stream,
    empirical_cdf,
    sample_cauchy,
    sample_gaussian,
    sample_pstable,
)

__all__ = [
    "TailCheckReport",
    "CdfOrderingTable",
    "MomentReport",
    "cauchy_upper_bound",
    "cauchy_upper_bound_precise",
    "cauchy_lower_bound",
    "gaussian_lower_bound",
    "check_cauchy_upper",
    "check_cauchy_lower",
    "check_gaussian_lower",
    "check_pstable_tails",
    "check_cdf_ordering",
    "check_l2_moments",
    "l2_moment_closed_forms",
    "tail_suite",
]

CHUNK = 1 << 16


# --- bounds ------------------------------------------------------------------

def cauchy_upper_bound(m: int, t: float) -> float:
    """``2 ln(m t) / t`` (natural log)."""
    return 2.0 * math.log(m * t) / t


def cauchy_upper_bound_precise(m: int, t: float) -> float:
    """``(1/(pi t)) (log(1 + (2 m t)^2) / (1 - 1/(pi t)) + 1)``, valid for t > 1."""
    return (math.log1p((2 * m * t) ** 2) / (1 - 1 / (math.pi * t)) + 1) / (math.pi * t)


def cauchy_lower_bound(gamma, t: float) -> float:
    g = np.asarray(gamma, dtype=float)
    return math.exp(-g.sum() * t * t / (3 * g.max()))


def gaussian_lower_bound(gamma, t: float) -> float:
    g = np.asarray(gamma, dtype=float)
    return math.exp(-g.sum() * t * t / (6 * g.max()))


# --- reports -----------------------------------------------------------------

@dataclass
class TailCheckReport:
    lemma_id: str
    m: int
    gamma: list
    t: float
    trials: int
    empirical: float
    bound: float
    mc_stderr: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return json.dumps(d)


def _upper_report(lemma, m, gamma, t, hits, trials, bound, extra=None):
    emp = hits / trials
    se = math.sqrt(emp * (1 - emp) / trials)
    return TailCheckReport(lemma, m, list(map(float, gamma)), t, trials, emp, bound, se, emp <= bound + 3 * se, extra or {})


def _lower_report(lemma, m, gamma, t, hits, trials, bound, extra=None):
    emp = hits / trials
    se = math.sqrt(emp * (1 - emp) / trials)
    rel = se / emp if emp > 0 else 0.0
    return TailCheckReport(lemma, m, list(map(float, gamma)), t, trials, emp, bound, se, emp <= bound * (1 + 3 * rel), extra or {})


def _gamma(m, gamma):
    g = np.full(m, 1.0) if gamma is None else np.asarray(gamma, dtype=float)
    if g.shape != (m,):
        raise DomainError(f"gamma must have length m={m}")
    return g


def _weighted_sums(draw, gamma, trials, stream, dependent=False):
    """``sum_i gamma_i * draw(...)_i`` for ``trials`` rows, in chunks."""
    m = gamma.size
    out = np.empty(trials)
    for k, c0 in enumerate(range(0, trials, CHUNK)):
        c1 = min(c0 + CHUNK, trials)
        sub = stream.child(k)
        if dependent:
            out[c0:c1] = draw(sub, c1 - c0) * gamma.sum()
        else:
            out[c0:c1] = draw(sub, (c1 - c0, m)) @ gamma
    return out


def _abs_cauchy(s, size):
    return np.abs(sample_cauchy(s, size))


def _sq_gauss(s, size):
    g = sample_gaussian(s, size)
    return g * g


def _abs_pow_stable(p):
    return lambda s, size: np.abs(sample_pstable(p, s, size)) ** p


def check_cauchy_upper(m, gamma=None, t=10.0, trials=10**6, seed=0, dependent=False, samples=None) -> TailCheckReport:
    """``Pr[sum gamma_i |C_i| > t gamma] <= 2 ln(m t) / t`` for m >= 3, t >= 1.

    ``dependent=True`` uses one Cauchy variate for every ``i``.
    """
    if m < 3 or t < 1:
        raise DomainError("needs m >= 3 and t >= 1")
    g = _gamma(m, gamma)
    if np.any(g <= 0):
        raise DomainError("gamma_i must be > 0")
    X = samples if samples is not None else _weighted_sums(_abs_cauchy, g, trials, as_stream(seed), dependent)
    hits = int(np.count_nonzero(X > t * g.sum()))
    extra = {"bound_precise": cauchy_upper_bound_precise(m, t) if t > 1 / math.pi else None, "dependent": dependent}
    return _upper_report("CauchyUpper", m, g, t, hits, X.size, cauchy_upper_bound(m, t), extra)


def check_cauchy_lower(m, gamma=None, t=0.5, trials=10**6, seed=0, samples=None) -> TailCheckReport:
    """``Pr[sum gamma_i |C_i| <= (1-t) gamma] <= exp(-gamma t^2 / (3 max gamma_i))``."""
    if not 0 < t < 1:
        raise DomainError("t must lie in (0, 1)")
    g = _gamma(m, gamma)
    if np.any(g < 0):
        raise DomainError("gamma_i must be >= 0")
    X = samples if samples is not None else _weighted_sums(_abs_cauchy, g, trials, as_stream(seed))
    hits = int(np.count_nonzero(X <= (1 - t) * g.sum()))
    return _lower_report("CauchyLower", m, g, t, hits, X.size, cauchy_lower_bound(g, t))


def check_gaussian_lower(m, gamma=None, t=0.5, trials=10**6, seed=0, samples=None) -> TailCheckReport:
    """``Pr[sum gamma_i G_i^2 <= (1-t) gamma] <= exp(-gamma t^2 / (6 max gamma_i))``."""
    if not 0 < t < 1:
        raise DomainError("t must lie in (0, 1)")
    g = _gamma(m, gamma)
    if np.any(g < 0):
        raise DomainError("gamma_i must be >= 0")
    X = samples if samples is not None else _weighted_sums(_sq_gauss, g, trials, as_stream(seed))
    hits = int(np.count_nonzero(X <= (1 - t) * g.sum()))
    return _lower_report("GaussianLower", m, g, t, hits, X.size, gaussian_lower_bound(g, t))


def check_pstable_tails(
    p, alpha_p=None, beta_p=None, m=3, gamma=None, t_upper=None, t_lower=None, trials=10**6, seed=0, samples=None
) -> list[TailCheckReport]:
    """Both tails of ``X = sum gamma_i |X_i|^p`` for ``X_i ~ D_p``.

    Upper: ``Pr[X >= t alpha_p gamma] <= 2 ln(m t)/t`` (m >= 3, t >= 1).
    Lower: ``Pr[X <= (1-t) beta_p gamma] <= exp(-gamma t^2 / (6 max gamma_i))``.
    Only existence of ``alpha_p`` and ``beta_p`` is known; the defaults
    ``2^(p-1)`` are the empirical conjecture, so reports are tagged
    ``grade = "conjecture"``.
    """
    if not 1 < p < 2:
        raise DomainError("p must lie in (1, 2)")
    conj = 2.0 ** (p - 1)
    alpha_p = conj if alpha_p is None else alpha_p
    beta_p = conj if beta_p is None else beta_p
    if alpha_p <= 0 or beta_p <= 0:
        raise DomainError("alpha_p and beta_p must be positive")
    g = _gamma(m, gamma)
    X = samples if samples is not None else _weighted_sums(_abs_pow_stable(p), g, trials, as_stream(seed))
    out = []
    grade = "conjecture" if (alpha_p == conj and beta_p == conj) else "user-constants"
    if t_upper is not None:
        if m < 3 or t_upper < 1:
            raise DomainError("upper tail needs m >= 3 and t >= 1")
        hits = int(np.count_nonzero(X >= t_upper * alpha_p * g.sum()))
        out.append(
            _upper_report("PStableUpper", m, g, t_upper, hits, X.size, cauchy_upper_bound(m, t_upper),
                          {"p": p, "alpha_p": alpha_p, "grade": grade})
        )
    if t_lower is not None:
        if not 0 < t_lower < 1:
            raise DomainError("lower tail needs t in (0, 1)")
        hits = int(np.count_nonzero(X <= (1 - t_lower) * beta_p * g.sum()))
        out.append(
            _lower_report("PStableLower", m, g, t_lower, hits, X.size, gaussian_lower_bound(g, t_lower),
                          {"p": p, "beta_p": beta_p, "grade": grade})
        )
    return out


def geometric_gamma(m: int, ratio: float = 0.9) -> np.ndarray:
    return ratio ** np.arange(m)


def tail_suite(
    ms=(3, 10, 100),
    t_upper=(2.0, 5.0, 10.0),
    t_lower=(0.3, 0.5),
    trials=10**6,
    seed=0,
    ps=(),
    threads: int = 1,
) -> list[TailCheckReport]:
    """Grid of tail checks over m, t and uniform / geometric gamma.

    One sample of ``X`` per (law, m, gamma) is shared by every t.  With ``ps``
    empty the Cauchy and Gaussian lemmas are checked, otherwise the p-stable
    ones for each p.
    """
    root = as_stream(seed)
    cells = []
    for m in ms:
        for gname, g in (("uniform", np.ones(m)), ("geometric", geometric_gamma(m))):
            if ps:
                cells += [("pstable", p, m, gname, g) for p in ps]
            else:
                cells += [("cauchy", None, m, gname, g), ("gaussian", None, m, gname, g)]

    def run(cell):
        law, p, m, gname, g = cell
        stream = root.child((law, p, m, gname))
        if law == "cauchy":
            X = _weighted_sums(_abs_cauchy, g, trials, stream)
            reps = [check_cauchy_upper(m, g, t, samples=X) for t in t_upper]
            reps += [check_cauchy_lower(m, g, t, samples=X) for t in t_lower]
        elif law == "gaussian":
            X = _weighted_sums(_sq_gauss, g, trials, stream)
            reps = [check_gaussian_lower(m, g, t, samples=X) for t in t_lower]
        else:
            X = _weighted_sums(_abs_pow_stable(p), g, trials, stream)
            reps = []
            for t in t_upper:
                reps += check_pstable_tails(p, m=m, gamma=g, t_upper=t, samples=X)
            for t in t_lower:
                reps += check_pstable_tails(p, m=m, gamma=g, t_lower=t, samples=X)
        for r in reps:
            r.extra["gamma_family"] = gname
            r.extra["seed"] = root.label()
        return reps

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return [r for reps in pool.map(run, cells) for r in reps]


# --- CDF ordering ------------------------------------------------------------

@dataclass
class CdfOrderingTable:
    p_grid: np.ndarray
    t_grid: np.ndarray
    F: np.ndarray
    samples_per_p: int
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations

    def rows(self):
        for i, p in enumerate(self.p_grid):
            for j, t in enumerate(self.t_grid):
                yield float(p), float(t), float(self.F[i, j])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "t", "F_hat"])
            for r in self.rows():
                w.writerow([repr(v) for v in r])


def check_cdf_ordering(p_grid, t_grid, samples_per_p=10**6, seed=0, threads: int = 1) -> CdfOrderingTable:
    """Empirical CDFs of ``|X_p / 2|^p`` and the pairwise ordering
    ``F_p1(t) <= F_p2(t) + 3 * joint stderr`` for all ``p1 <= p2``.
    """
    p_grid = np.asarray(p_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if p_grid.size == 0 or t_grid.size == 0:
        raise DomainError("grids must be nonempty")
    if np.any(np.diff(p_grid) < 0) or p_grid.min() < 1 or p_grid.max() > 2:
        raise DomainError("p_grid must be sorted within [1, 2]")
    if np.any(np.diff(t_grid) < 0) or t_grid.min() <= 0:
        raise DomainError("t_grid must be sorted and positive")
    root = as_stream(seed)

    def one(p):
        x = sample_pstable(StableParams(p), root.child(("cdf", float(p))), samples_per_p)
        return empirical_cdf(np.abs(x / 2) ** p, t_grid)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        F = np.array(list(pool.map(one, p_grid)))
    var = F * (1 - F) / samples_per_p
    violations = []
    for i in range(p_grid.size):
        for j in range(i + 1, p_grid.size):
            slack = 3 * np.sqrt(var[i] + var[j])
            for k in np.flatnonzero(F[i] > F[j] + slack):
                violations.append((float(p_grid[i]), float(p_grid[j]), float(t_grid[k]), float(F[i, k] - F[j, k])))
    return CdfOrderingTable(p_grid, t_grid, F, samples_per_p, violations)


# --- l2 moments --------------------------------------------------------------

def l2_moment_closed_forms(U, s: int) -> dict:
    """Mean and second moment of ``X = (Pi U)^T (Pi U)`` for orthonormal ``U``.

    ``E x_kl = delta_kl`` and
    ``E x_kl^2 = delta_kl + (1 + delta_kl - 2 <U_k^2, U_l^2>) / s``, so
    ``E ||X - I||_F^2 = sum_kl (1 + delta_kl - 2 <U_k^2, U_l^2>) / s <= (d^2 + d) / s``.
    """
    U = np.asarray(U, dtype=float)
    d = U.shape[1]
    U2 = U * U
    inner = U2.T @ U2
    eye = np.eye(d)
    second = eye + (1 + eye - 2 * inner) / s
    return {
        "mean": eye,
        "second": second,
        "frob": float((second - eye).sum()),
        "frob_bound": (d * d + d) / s,
    }


@dataclass
class MomentReport:
    s: int
    trials: int
    mean_hat: np.ndarray
    mean_se: np.ndarray
    second_hat: np.ndarray
    second_se: np.ndarray
    frob_hat: float
    frob_se: float
    closed: dict
    markov_epsilon: float
    markov_empirical: float
    markov_bound: float
    frob_samples_max: float

    def z_scores(self) -> dict:
        def z(hat, ref, se):
            se = np.where(se > 0, se, np.inf)
            zz = np.abs(hat - ref) / se
            return np.where(np.isinf(se), np.where(np.isclose(hat, ref, atol=1e-12), 0.0, np.inf), zz)

        return {
            "mean": z(self.mean_hat, self.closed["mean"], self.mean_se),
            "second": z(self.second_hat, self.closed["second"], self.second_se),
            "frob": float(z(np.array(self.frob_hat), np.array(self.closed["frob"]), np.array(self.frob_se))),
        }

    @property
    def passed(self) -> bool:
        z = self.z_scores()
        return (
            bool(np.all(z["mean"] <= 3))
            and bool(np.all(z["second"] <= 3))
            and z["frob"] <= 3
            and self.markov_empirical <= self.markov_bound
        )

    def as_dict(self) -> dict:
        z = self.z_scores()
        return {
            "s": self.s,
            "trials": self.trials,
            "mean_max_z": float(np.max(z["mean"])),
            "second_max_z": float(np.max(z["second"])),
            "frob_hat": self.frob_hat,
            "frob_closed": self.closed["frob"],
            "frob_bound": self.closed["frob_bound"],
            "frob_z": z["frob"],
            "markov_epsilon": self.markov_epsilon,
            "markov_empirical": self.markov_empirical,
            "markov_bound": self.markov_bound,
            "pass": self.passed,
        }


def check_l2_moments(U, s: int, trials: int = 10**4, seed=0, epsilon: float = 0.2) -> MomentReport:
    """Monte Carlo of ``X = (Pi U)^T (Pi U)`` under the sign CountSketch against
    the closed forms, plus ``Pr[||X - I||_F >= eps] <= (d^2 + d) / (eps^2 s)``.
    """
    U = np.asarray(U, dtype=float)
    n, d = U.shape
    if not np.allclose(U.T @ U, np.eye(d), atol=1e-10):
        raise DomainError("U must have orthonormal columns")
    A = SparseMatrix.from_dense(U)
    root = as_stream(seed)
    eye = np.eye(d)
    X = np.empty((trials, d, d))
    for k in range(trials):
        Y = apply_sketch(plan_sketch(SketchKind.SIGN_L2, n, s, root.child(k)), A)
        X[k] = Y.T @ Y
    sq = X * X
    frob = ((X - eye) ** 2).sum(axis=(1, 2))
    root_t = math.sqrt(trials)
    markov_bound = (d * d + d) / (epsilon**2 * s)
    return MomentReport(
        s=s,
        trials=trials,
        mean_hat=X.mean(axis=0),
        mean_se=X.std(axis=0, ddof=1) / root_t,
        second_hat=sq.mean(axis=0),
        second_se=sq.std(axis=0, ddof=1) / root_t,
        frob_hat=float(frob.mean()),
        frob_se=float(frob.std(ddof=1) / root_t),
        closed=l2_moment_closed_forms(U, s),
        markov_epsilon=epsilon,
        markov_empirical=float(np.mean(np.sqrt(frob) >= epsilon)),
        markov_bound=markov_bound,
        frob_samples_max=float(np.sqrt(frob).max()),
    )
