import time

import numpy as np
import pytest
from scipy import stats

from lpembed.sketch import (
    DistortionReport,
    SketchKind,
    apply_dense_pstable,
    apply_sketch,
    default_sketch_size,
    measure_distortion,
    plan_sketch,
    probe_ratios,
    sketch_kind_for,
    theoretical_sketch_size,
)
from lpembed.sparse_core import SparseMatrix
from lpembed.stable_rand import RngStream

ALL_SPARSE = [(SketchKind.SIGN_L2, None), (SketchKind.CAUCHY_L1, None), (SketchKind.PSTABLE, 1.5)]


def test_kind_for_p():
    assert sketch_kind_for(1.0) is SketchKind.CAUCHY_L1
    assert sketch_kind_for(2.0) is SketchKind.SIGN_L2
    assert sketch_kind_for(1.3) is SketchKind.PSTABLE


def test_sizes():
    assert theoretical_sketch_size(SketchKind.SIGN_L2, 10, 0.5, 0.1) == pytest.approx(4400)
    assert default_sketch_size(SketchKind.SIGN_L2, 10, 0.5, 0.1) == 4400
    assert default_sketch_size(SketchKind.CAUCHY_L1, 3, c=10) == 90


@pytest.mark.parametrize("kind,p", ALL_SPARSE)
def test_single_bucket(kind, p):
    plan = plan_sketch(kind, 30, 1, seed=4, p=p)
    assert np.all(plan.bucket_of == 0)
    a = np.random.default_rng(0).standard_normal((30, 3))
    out = apply_sketch(plan, a)
    assert out.shape == (1, 3)
    assert np.allclose(out[0], (plan.diag[:, None] * a).sum(axis=0))


def test_bucket_occupancy_is_uniform():
    s = 200
    plan = plan_sketch(SketchKind.SIGN_L2, 10**5, s, seed=11)
    counts = np.bincount(plan.bucket_of, minlength=s)
    assert stats.chisquare(counts).pvalue > 0.01


@pytest.mark.parametrize("kind,p", ALL_SPARSE)
def test_plans_are_deterministic(kind, p):
    a = plan_sketch(kind, 1000, 50, seed=RngStream(9, 2), p=p)
    b = plan_sketch(kind, 1000, 50, seed=RngStream(9, 2), p=p)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != plan_sketch(kind, 1000, 50, seed=RngStream(9, 3), p=p).fingerprint()


def test_single_nonzero_is_embedded_isometrically():
    n, d, j, k = 40, 3, 17, 1
    A = SparseMatrix.from_coo(n, d, [j], [k], [1.0])
    plan = plan_sketch(SketchKind.SIGN_L2, n, 8, seed=0)
    out = apply_sketch(plan, A)
    nz = np.argwhere(out != 0)
    assert nz.tolist() == [[plan.bucket_of[j], k]]
    assert abs(out[plan.bucket_of[j], k]) == 1.0
    x = np.array([0.3, -2.0, 0.7])
    assert np.linalg.norm(out @ x) == pytest.approx(np.linalg.norm(A.to_dense() @ x), rel=1e-15)


@pytest.mark.parametrize("kind,p", ALL_SPARSE)
def test_dense_materialization_oracle(kind, p):
    a = np.random.default_rng(1).standard_normal((20, 3))
    plan = plan_sketch(kind, 20, 7, seed=42, p=p)
    S = np.zeros((7, 20))
    S[plan.bucket_of, np.arange(20)] = 1.0
    D = np.diag(plan.diag)
    assert np.allclose(apply_sketch(plan, a), S @ D @ a, rtol=1e-12, atol=1e-12)
    assert np.allclose(plan.dense(), S @ D)


def test_nnz_counter_and_shape_check():
    a = np.random.default_rng(2).standard_normal((100, 4)) * (np.random.default_rng(3).random((100, 4)) < 0.3)
    A = SparseMatrix.from_dense(a)
    st = {}
    apply_sketch(plan_sketch(SketchKind.SIGN_L2, 100, 10, 0), A, st)
    assert st["nnz_read"] == A.nnz
    with pytest.raises(ValueError):
        apply_sketch(plan_sketch(SketchKind.SIGN_L2, 99, 10, 0), A)
    with pytest.raises(ValueError):
        plan_sketch(SketchKind.SIGN_L2, 100, 0, 0)
    with pytest.raises(ValueError):
        plan_sketch(SketchKind.PSTABLE, 100, 10, 0)


def _random_sparse(n, d, nnz, seed):
    g = np.random.default_rng(seed)
    cells = np.sort(g.choice(n * d, size=nnz, replace=False))
    return SparseMatrix.from_coo(n, d, cells // d, cells % d, g.standard_normal(nnz) + 3.0)


def test_doubling_nnz_at_most_2_3x_runtime():
    n, d, s = 10**6, 10, 1000
    plan = plan_sketch(SketchKind.SIGN_L2, n, s, seed=0)

    def best(A):
        t = np.inf
        for _ in range(5):
            t0 = time.perf_counter()
            apply_sketch(plan, A)
            t = min(t, time.perf_counter() - t0)
        return t

    t1 = best(_random_sparse(n, d, 2 * 10**6, 1))
    t2 = best(_random_sparse(n, d, 4 * 10**6, 2))
    assert t2 / t1 <= 2.3


def test_l2_sketch_is_unbiased():
    a = np.random.default_rng(5).standard_normal((60, 3))
    x = np.array([1.0, -0.5, 2.0])
    target = np.linalg.norm(a @ x) ** 2
    vals = [np.linalg.norm(apply_sketch(plan_sketch(SketchKind.SIGN_L2, 60, 10, RngStream(7, k)), a) @ x) ** 2 for k in range(4000)]
    se = np.std(vals) / np.sqrt(len(vals))
    assert abs(np.mean(vals) - target) <= 3 * se


def test_dense_cauchy_single_entry_scaling():
    n, s = 5, 4
    A = SparseMatrix.from_coo(n, 2, [2], [0], [2.0])
    draws = np.concatenate([apply_dense_pstable(1.0, s, A, RngStream(13, k))[:, 0] for k in range(2500)])
    assert draws.size == 10**4
    assert stats.kstest(draws, stats.cauchy(scale=2.0).cdf).pvalue > 0.01


def test_dense_gaussian_singular_values():
    U, _ = np.linalg.qr(np.random.default_rng(6).standard_normal((100, 3)))
    s = 60
    sv = np.linalg.svd(apply_dense_pstable(2.0, s, U, seed=1) / np.sqrt(s), compute_uv=False)
    assert np.all(np.abs(sv / np.sqrt(2) - 1) <= 0.25)


def test_dense_strips_are_independent_and_additive():
    # each strip draws its own block, so splitting A by strips splits the output
    a = np.random.default_rng(7).standard_normal((50, 3))
    head, tail = a.copy(), a.copy()
    head[20:] = 0
    tail[:20] = 0
    whole = apply_dense_pstable(1.5, 6, a, seed=3, strip=20)
    parts = apply_dense_pstable(1.5, 6, head, seed=3, strip=20) + apply_dense_pstable(1.5, 6, tail, seed=3, strip=20)
    assert np.allclose(whole, parts, rtol=1e-12, atol=1e-12)
    with pytest.raises(ValueError):
        apply_dense_pstable(1.5, 0, a, seed=3)


def test_identity_embedding_has_no_distortion():
    a = np.random.default_rng(8).standard_normal((30, 4))
    for p in (1.0, 1.5, 2.0):
        rep = measure_distortion(a, a, p, probes=50)
        assert rep.lower == pytest.approx(1.0, abs=1e-14) and rep.upper == pytest.approx(1.0, abs=1e-14)
    rep = measure_distortion(a, a, 2.0)
    assert rep.exact[0] == pytest.approx(1.0) and rep.exact[1] == pytest.approx(1.0)
    assert rep.distortion() == pytest.approx(0.0, abs=1e-12)


def test_exact_mode_brackets_probes():
    a = np.random.default_rng(9).standard_normal((500, 5))
    B = apply_sketch(plan_sketch(SketchKind.SIGN_L2, 500, 120, 1), a)
    rep = measure_distortion(a, B, 2.0, probes=300)
    assert rep.exact[0] <= rep.lower + 1e-12 and rep.upper <= rep.exact[1] + 1e-12
    R = np.linalg.qr(a, mode="r")
    assert measure_distortion(a, B, 2.0, probes=1, qr_r=R).exact == pytest.approx(rep.exact)


def test_rank_deficient_flag():
    a = np.random.default_rng(10).standard_normal((40, 3))
    a[:, 2] = a[:, 0]
    rep = measure_distortion(a, a, 2.0, probes=20)
    assert rep.rank_deficient and rep.exact is None


def test_angular_grid_oracle_d2_p1():
    a = np.random.default_rng(11).standard_normal((80, 2))
    B = apply_sketch(plan_sketch(SketchKind.CAUCHY_L1, 80, 40, 2), a)
    theta = np.linspace(0, np.pi, 3600, endpoint=False)
    grid = probe_ratios(a, B, 1.0, np.vstack([np.cos(theta), np.sin(theta)]))
    rep = measure_distortion(a, B, 1.0, probes=500, seed=3)
    assert rep.lower == pytest.approx(grid.min(), rel=0.02)
    assert rep.upper == pytest.approx(grid.max(), rel=0.02)


def test_perfectly_hashed_identity_input():
    # A = (I_d 0)^T: if the d rows land in distinct buckets, ||Pi A x||_1 = sum |c_k x_k|,
    # so the extreme ratios are exactly min |c_k| and max |c_k|.
    d, n, s = 4, 100, 64
    A = SparseMatrix.from_coo(n, d, np.arange(d), np.arange(d), np.ones(d))
    for seed in range(50):
        plan = plan_sketch(SketchKind.CAUCHY_L1, n, s, seed)
        if np.unique(plan.bucket_of[:d]).size == d:
            break
    c = np.abs(plan.diag[:d])
    rep = measure_distortion(A, apply_sketch(plan, A), 1.0, probes=200)
    assert rep.lower == pytest.approx(c.min(), rel=1e-12)
    assert rep.upper == pytest.approx(c.max(), rel=1e-12)
    assert rep.upper / rep.lower == pytest.approx(c.max() / c.min(), rel=1e-12)


def test_report_json_fields():
    import json

    rep = DistortionReport(2.0, 0.9, 1.1, 10, exact=(0.85, 1.2), meta={"kind": "SignL2", "n": 5, "d": 2, "s": 3, "seed": 1})
    row = json.loads(rep.to_json())
    assert {"kind", "p", "n", "d", "s", "seed", "lower", "upper", "exact", "probe_count"} <= set(row)
    assert rep.distortion() == pytest.approx(0.2)
    assert not rep.within(0.19) and rep.within(0.2)
