import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from advinfo.estimators import (
    BinConfig,
    KdeConfig,
    MIRecord,
    bin_symbols,
    binning_mi,
    default_bin_size,
    default_sigma2,
    discrete_entropy,
    discretize,
    estimate_layer,
    gaussian_entropy,
    kde_mi_input,
    kde_mi_label,
    pairwise_sq_dists,
)


def naive_sq_dists(x):
    n = len(x)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = sum((a - b) ** 2 for a, b in zip(x[i], x[j]))
    return out


def joint_mi_bits(a, b):
    """I(A;B) from the empirical joint table, summed over every cell."""
    a_vals, a_idx = np.unique(a, axis=0, return_inverse=True)
    b_vals, b_idx = np.unique(b, axis=0, return_inverse=True)
    table = np.zeros((len(a_vals), len(b_vals)))
    for i, j in zip(a_idx.ravel(), b_idx.ravel()):
        table[i, j] += 1
    p = table / table.sum()
    pa, pb = p.sum(1), p.sum(0)
    total = 0.0
    for i, j in itertools.product(range(len(pa)), range(len(pb))):
        if p[i, j] > 0:
            total += p[i, j] * math.log2(p[i, j] / (pa[i] * pb[j]))
    return total


# ---- pairwise distances -------------------------------------------------


def test_pairwise_integer_cloud_exact(rng):
    x = rng.integers(-20, 20, size=(40, 7)).astype(float)
    np.testing.assert_array_equal(pairwise_sq_dists(x), naive_sq_dists(x))


def test_pairwise_real_cloud_close(rng):
    x = rng.standard_normal((30, 5))
    np.testing.assert_allclose(pairwise_sq_dists(x), naive_sq_dists(x), rtol=1e-12, atol=1e-12)


def test_pairwise_gram_path_matches_direct(rng, monkeypatch):
    import advinfo.estimators as est

    x = rng.integers(-5, 5, size=(70, 4)).astype(float)
    direct = pairwise_sq_dists(x)
    monkeypatch.setattr(est, "_DIRECT_LIMIT", 0)
    monkeypatch.setattr(est, "_ROW_BLOCK", 16)
    gram = pairwise_sq_dists(x)
    np.testing.assert_array_equal(gram, gram.T)
    assert (np.diag(gram) == 0).all()
    np.testing.assert_allclose(gram, direct, atol=1e-9)


def test_pairwise_accepts_lists_and_rejects_ragged():
    d = pairwise_sq_dists([[0.0, 0.0], [3.0, 4.0]])
    np.testing.assert_array_equal(d, [[0, 25], [25, 0]])
    with pytest.raises(ValueError):
        pairwise_sq_dists([[0.0], [1.0, 2.0]])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 5)), elements=st.floats(-1e3, 1e3)))
def test_pairwise_metric_properties(x):
    d = pairwise_sq_dists(x)
    assert (d >= 0).all()
    np.testing.assert_array_equal(d, d.T)
    assert (np.diag(d) == 0).all()


# ---- kernel estimator ---------------------------------------------------


def test_two_points_hand_value():
    # log 2 - log(1 + exp(-D / (2 gamma sigma2))) with D = 2, gamma = sigma2 = 1
    expected = math.log(2) - math.log(1 + math.exp(-1))
    assert expected == pytest.approx(0.379885, abs=1e-6)
    got = kde_mi_input([[0.0, 0.0], [1.0, 1.0]], KdeConfig(1.0, "upper"))
    assert got == pytest.approx(expected, rel=1e-12)


def test_far_points_reach_log_n():
    got = kde_mi_input([[0.0], [1e3], [2e3], [3e3]], KdeConfig(1.0))
    assert got == pytest.approx(math.log(4), rel=1e-12)


def test_identical_points_carry_no_information():
    assert kde_mi_input(np.ones((5, 3)), KdeConfig(0.5)) == pytest.approx(0.0, abs=1e-15)


def test_label_term_two_tight_classes():
    acts = [[0.0], [0.0], [100.0], [100.0]]
    got = kde_mi_label(acts, [0, 0, 1, 1], KdeConfig(1.0))
    assert got == pytest.approx(math.log(2), rel=1e-12)


def test_kde_validation():
    with pytest.raises(ValueError):
        KdeConfig(0.0)
    with pytest.raises(ValueError):
        KdeConfig(1.0, "middle")
    with pytest.raises(ValueError):
        kde_mi_input([[1.0]], KdeConfig(1.0))
    with pytest.raises(ValueError):
        kde_mi_label([[1.0], [2.0]], [0], KdeConfig(1.0))


def test_record_in_bits():
    r = MIRecord(1, "fc1", "clean", "kde_lower", math.log(2), 2 * math.log(2), "nats").in_bits()
    assert (r.i_tx, r.i_ty, r.units) == (pytest.approx(1.0), pytest.approx(2.0), "bits")


@pytest.mark.parametrize("dim,sigma2", [(1, 0.1), (1, 1.0), (1, 3.0), (2, 0.5)])
def test_gaussian_entropy_quadrature(dim, sigma2):
    def integrand(*xs):
        r2 = sum(v * v for v in xs)
        logp = -r2 / (2 * sigma2) - 0.5 * dim * math.log(2 * math.pi * sigma2)
        return -math.exp(logp) * logp

    lim = 12 * math.sqrt(sigma2)
    if dim == 1:
        val, _ = integrate.quad(integrand, -lim, lim)
    else:
        val, _ = integrate.dblquad(lambda y, x: integrand(x, y), -lim, lim, -lim, lim)
    assert gaussian_entropy(dim, sigma2) == pytest.approx(val, rel=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 20), st.integers(1, 6), st.sampled_from([0.01, 0.1, 1.0]), st.integers(0, 2**31))
def test_kde_bounds_bracketed_by_zero_and_log_n(n, d, sigma2, seed):
    x = np.random.default_rng(seed).standard_normal((n, d))
    for bound in ("lower", "upper"):
        v = kde_mi_input(x, KdeConfig(sigma2, bound))
        assert -1e-12 <= v <= math.log(n) + 1e-12


# ---- binning estimator --------------------------------------------------


def test_discretize_floor_semantics():
    assert discretize(0.99, 1.0) == 0
    assert discretize(-0.01, 1.0) == -1
    assert discretize(2.0, 0.5) == 4
    np.testing.assert_array_equal(discretize(np.array([-1.5, 0.0, 1.5]), 1.0), [-2, 0, 1])
    with pytest.raises(ValueError):
        discretize(1.0, 0.0)


def test_discrete_entropy_hand_values():
    assert discrete_entropy([7]) == 0.0
    assert discrete_entropy(["a", "b"]) == pytest.approx(1.0)
    assert discrete_entropy(range(8)) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        discrete_entropy([])


def test_row_symbols_are_whole_vectors():
    rows = np.array([[0, 1], [1, 0], [0, 1]])
    # a per-coordinate count would treat both rows as the same multiset
    assert discrete_entropy(rows) == pytest.approx(discrete_entropy(["x", "y", "x"]))


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 4)), elements=st.floats(-5, 5)),
    st.floats(0.1, 3.0),
    st.integers(0, 2**31),
)
def test_binning_matches_exhaustive_joint_table(acts, lam, seed):
    labels = np.random.default_rng(seed).integers(0, 3, size=len(acts))
    h_t, i_ty = binning_mi(acts, labels, BinConfig(lam))
    symbols = bin_symbols(acts, lam)
    sample_ids = np.arange(len(acts))[:, None]
    assert h_t == pytest.approx(joint_mi_bits(symbols, sample_ids), abs=1e-9)
    assert i_ty == pytest.approx(joint_mi_bits(symbols, labels[:, None]), abs=1e-9)
    assert -1e-12 <= i_ty <= h_t + 1e-12


def test_binning_rejects_label_mismatch():
    with pytest.raises(ValueError):
        binning_mi(np.zeros((3, 2)), [0, 1], BinConfig(1.0))
    with pytest.raises(ValueError):
        BinConfig(0)


# ---- defaults and the combined entry point -------------------------------


def test_defaults():
    x = np.array([[0.0, 0.0], [2.0, 4.0]])
    # per-coordinate variances 1 and 4
    assert default_sigma2(x) == pytest.approx(0.25)
    assert default_bin_size(x, bins=4) == pytest.approx(1.0)
    assert default_sigma2(np.ones((3, 2))) == 1.0
    assert default_bin_size(np.ones((3, 2))) == 1.0


def test_estimate_layer_records(rng):
    x = rng.standard_normal((20, 4))
    y = rng.integers(0, 2, 20)
    recs = estimate_layer(x, y, 0.3, 0.5, epoch=3, layer="fc1", kind="adversarial")
    assert [r.estimator for r in recs] == ["kde_lower", "kde_upper", "binning"]
    assert all(r.epoch == 3 and r.layer == "fc1" and r.kind == "adversarial" for r in recs)
    assert recs[0].i_tx == pytest.approx(kde_mi_input(x, KdeConfig(0.3, "lower")))
    assert recs[2].units == "bits"
    assert (recs[2].i_tx, recs[2].i_ty) == binning_mi(x, y, BinConfig(0.5))
