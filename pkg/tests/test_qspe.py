import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hamlearn import qspe
from hamlearn.errors import (
    BranchError,
    PhaseWrapWarning,
    RegimeWarning,
    UndefinedPhaseError,
    UnusableFidelityError,
)
from hamlearn.learner import simulate_batch
from hamlearn.model import HamiltonianSpec, make_pair
from hamlearn.noise import NoiseConfig, depolarize
from hamlearn.sim import ExperimentConfig, run_circuit

# Fourier coefficients of h for a=10, c12=40 rad/us, T=1e-3 us, d=5 with the
# logical-Z angle -omega_j; from a 40-digit matrix-exponential pipeline.
C_REF = np.array(
    [
        0.00039921430251565732 + 0.0099747013858745944j,
        0.0011948499232778053 + 0.0099089093557434151j,
        0.0019831201383025067 + 0.0097827039214997852j,
        0.0027596885931382658 + 0.009596766234652087j,
        0.0035202728908015747 + 0.0093520673024187784j,
        2.7603321386697545e-7 - 9.5990041523803436e-7j,
        5.9521369052627411e-7 - 2.9361808152610907e-6j,
        7.1725645323911641e-7 - 5.9482191374054039e-6j,
        3.9932731100751827e-7 - 9.9775249970360125e-6j,
    ]
)
# forward map of (A, B) = (0.01, 0.04), same oracle
THETA_REF = 0.009997333440032249165
ZETA_REF = 0.04000133296001436085


def synthetic(theta, zeta, d, chi=0.0):
    k = np.arange(d)
    pos = 1j * theta * np.exp(-1j * chi) * np.exp(-1j * (2 * k + 1) * zeta)
    return np.concatenate([pos, np.zeros(d - 1)])


def exact_coeffs(a, c, T, d, noise=None):
    spec = HamiltonianSpec(a=[a, a], c=[[0, c], [c, 0]])
    cfg = ExperimentConfig(d=d, N=1, T=T, mode="analog")
    p = simulate_batch(spec, [make_pair("00", 1)], cfg, noise or NoiseConfig())
    return qspe.fourier(qspe.build_series(p[0, :, 0], p[1, :, 0]))


# ---------------------------------------------------------------- series / DFT


def test_grid():
    w = qspe.omega_grid(4)
    assert w.size == 7 and w[0] == 0 and np.all(np.diff(w) > 0) and w[-1] < np.pi


def test_fourier_constant():
    c = qspe.fourier(np.full(7, 0.3 - 0.1j)).c
    assert c[0] == pytest.approx(0.3 - 0.1j) and np.allclose(c[1:], 0, atol=1e-16)


def test_fourier_single_tone():
    c = qspe.fourier(np.exp(2j * qspe.omega_grid(4))).c
    assert c[1] == pytest.approx(1.0) and np.allclose(np.delete(c, 1), 0, atol=1e-15)


def test_fourier_wrong_length():
    with pytest.raises(ValueError):
        qspe.fourier(np.zeros(6))


@given(st.integers(2, 30), st.integers(0, 2**31))
def test_dft_round_trip(d, seed):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=2 * d - 1) + 1j * rng.normal(size=2 * d - 1)
    assert np.allclose(qspe.inverse_fourier(qspe.fourier(h)), h, atol=1e-12)


def test_pipeline_coefficients_reference():
    c = exact_coeffs(10.0, 40.0, 1e-3, 5).c
    assert np.max(np.abs(c - C_REF)) < 1e-14


def test_pipeline_matches_first_order_form():
    d = 10
    fc = exact_coeffs(10.0, 40.0, 1e-3, d)
    theta, zeta = qspe.forward_mapping(0.01, 0.04)
    approx = synthetic(theta, zeta, d)[:d]
    assert np.max(np.abs(fc.nonnegative - approx)) < 5 * (d * theta) ** 3


def test_one_sidedness():
    for d in (3, 5):
        fc = exact_coeffs(10.0, 40.0, 1e-3, d)
        assert np.sum(np.abs(fc.negative)) <= 0.05 * np.sum(np.abs(fc.nonnegative))


# ---------------------------------------------------------------- estimators


def test_fixed_point():
    c = synthetic(0.05, 0.02, 8)
    assert qspe.estimate_theta(c) == pytest.approx(0.05, abs=1e-12)
    assert qspe.estimate_zeta(c) == pytest.approx(0.02, abs=1e-12)


@given(st.floats(1e-4, 0.5), st.floats(-0.35, 0.35), st.integers(2, 25))
def test_fixed_point_property(theta, zeta, d):
    c = synthetic(theta, zeta, d)
    assert qspe.estimate_theta(c, d) == pytest.approx(theta, abs=1e-12)
    assert qspe.estimate_zeta(c, d) == pytest.approx(zeta, abs=1e-12)


def test_zero_zeta():
    c = synthetic(0.01, 0.0, 6)
    assert np.allclose(qspe.phase_differences(c), 0)
    assert qspe.estimate_zeta(c) == pytest.approx(0.0, abs=1e-15)


def test_phase_differences_exact():
    d = 7
    delta = qspe.phase_differences(synthetic(0.01, 0.1, d), d)
    assert delta.shape == (d - 1,) and np.allclose(delta, 0.2)


def test_phase_differences_zero_coefficient():
    with pytest.raises(UndefinedPhaseError):
        qspe.phase_differences(np.zeros(5, dtype=complex))


def test_laplacian_weights():
    w = qspe.laplacian_weights(5)
    D = 2 * np.eye(4) - np.eye(4, k=1) - np.eye(4, k=-1)
    assert np.allclose(D @ w, 1)
    assert np.allclose(w, [2, 3, 3, 2])


def test_exact_pipeline_theta_error():
    d, theta = 10, 0.01
    fc = exact_coeffs(10.0, 40.0, 1e-3, d)
    t_true, z_true = qspe.forward_mapping(0.01, 0.04)
    assert abs(qspe.estimate_theta(fc) - t_true) <= (d * theta) ** 3
    assert abs(qspe.estimate_zeta(fc) - z_true) <= (d * theta) ** 3


def test_wrap_warning():
    c = synthetic(0.01, 1.3, 5)
    with pytest.warns(PhaseWrapWarning):
        qspe.estimate_zeta(c)


def test_unwrap_to_median_fixes_single_wrap():
    delta = np.array([3.0, 3.1, -3.1, 3.05])
    out = qspe.unwrap_to_median(delta)
    assert np.allclose(out, [3.0, 3.1, -3.1 + 2 * np.pi, 3.05])
    assert np.array_equal(qspe.unwrap_to_median(np.array([0.1, 0.2, 0.15])), [0.1, 0.2, 0.15])


def test_chi_recovered():
    c = synthetic(0.02, 0.05, 6, chi=0.3)
    est = qspe.estimate(c, with_chi=True)
    assert est.chi_hat == pytest.approx(0.3, abs=1e-12)


# ---------------------------------------------------------------- rescaled estimators


def test_rescaled_noiseless():
    alpha, theta = qspe.rescaled_estimators(exact_coeffs(10.0, 40.0, 1e-3, 10))
    assert alpha == pytest.approx(1.0, abs=5e-3)


@pytest.mark.parametrize("method", ["phase_aligned", "magnitude"])
def test_rescaled_synthetic_channel(method):
    d, theta, zeta = 10, 0.01, 0.04
    c = 0.5 * synthetic(theta, zeta, d)
    c[0] -= 0.5 * (1 + 1j) / 4
    alpha, th = qspe.rescaled_estimators(c, method=method)
    tol = 1e-12 if method == "phase_aligned" else 0.05
    assert alpha == pytest.approx(0.5, abs=tol)


def test_rescaled_exact_depolarized_pipeline():
    d = 10
    fc = exact_coeffs(10.0, 40.0, 1e-3, d, NoiseConfig(depol_alpha=0.5))
    alpha, theta = qspe.rescaled_estimators(fc)
    t_true, _ = qspe.forward_mapping(0.01, 0.04)
    assert alpha == pytest.approx(0.5, abs=(d * 0.01) ** 2)
    assert abs(theta - t_true) <= (d * 0.01) ** 3


def test_rescaled_errors():
    with pytest.raises(ValueError):
        qspe.rescaled_estimators(synthetic(0.01, 0.02, 2))
    c = synthetic(0.01, 0.02, 5)
    c[0] -= 2.0 * (1 + 1j)
    with pytest.raises(UnusableFidelityError):
        qspe.rescaled_estimators(c)


def test_depolarized_series_is_affine():
    # alpha h + (1 - alpha)(-1/4)(1 + i) moves only c_0
    d = 4
    h = (np.random.default_rng(2).random(7) - 0.5) * 0.1
    px, py = 0.5 + h, 0.5 - h
    c1 = qspe.fourier(qspe.build_series(px, py)).c
    c2 = qspe.fourier(qspe.build_series(depolarize(px, 0.7), depolarize(py, 0.7))).c
    assert np.allclose(c2[1:], 0.7 * c1[1:])
    assert c2[0] == pytest.approx(0.7 * c1[0] - 0.3 * (1 + 1j) / 4)


# ---------------------------------------------------------------- coherent prep


def test_prep_estimator_alpha_zero():
    c = exact_coeffs(10.0, 40.0, 1e-3, 6).c
    assert qspe.scaled_prep_estimator(c, prep_alpha=0.0) == pytest.approx(qspe.estimate_theta(c), abs=1e-15)


def test_prep_bound_value():
    assert qspe.prep_bound(10, 0.01, 0.01) == pytest.approx(0.00034227391199561098463, rel=1e-12)


def _idle_coeffs(d, prep_alpha):
    spec = HamiltonianSpec(a=[0.0, 0.0], c=np.zeros((2, 2)))
    cfg = ExperimentConfig(d=d, N=1, T=1e-3, mode="analog")
    pair = [make_pair("00", 1)]
    p = [[run_circuit(spec, pair, cfg, -w, k, prep_alpha).dense()[0] for w in cfg.omegas()] for k in ("plus", "i")]
    return qspe.fourier(qspe.build_series(*p)).c


def test_prep_offset_matches_pipeline():
    d = 5
    clean = _idle_coeffs(d, None)
    noisy = _idle_coeffs(d, 0.02)
    assert noisy[0] - clean[0] == pytest.approx(qspe.prep_offset(0.02), abs=1e-15)


def test_prep_estimator_rejects_large_alpha():
    with pytest.raises(ValueError):
        qspe.scaled_prep_estimator(synthetic(0.01, 0.0, 3), prep_alpha=0.8)


# ---------------------------------------------------------------- mapping


def test_forward_reference():
    theta, zeta = qspe.forward_mapping(0.01, 0.04)
    assert theta == pytest.approx(THETA_REF, abs=1e-17)
    assert zeta == pytest.approx(ZETA_REF, abs=1e-17)


def test_invert_zero():
    A, B = qspe.invert_mapping(0.0, 0.0)
    assert A == 0 and B == 0


def test_invert_round_trip_reference():
    A, B = qspe.invert_mapping(THETA_REF, ZETA_REF)
    assert A == pytest.approx(0.01, abs=1e-10) and B == pytest.approx(0.04, abs=1e-10)


@settings(max_examples=200)
@given(st.floats(0.0, 0.8), st.floats(-0.8, 0.8))
def test_invert_round_trip(A, B):
    theta, zeta = qspe.forward_mapping(A, B)
    A2, B2 = qspe.invert_mapping(theta, zeta)
    assert A2 == pytest.approx(A, abs=1e-10) and B2 == pytest.approx(B, abs=1e-10)


def test_small_angle_error_order():
    for r in (0.01, 0.02, 0.04, 0.08):
        A, B = r * 0.6, r * 0.8
        theta, zeta = qspe.forward_mapping(A, B)
        a0, b0 = qspe.invert_mapping(theta, zeta, method="small_angle")
        err = max(abs(a0 - A), abs(b0 - B))
        assert err <= 0.5 * r**3
        assert err >= 0.05 * r**3


def test_invert_branch_errors():
    with pytest.raises(BranchError):
        qspe.invert_mapping(-0.1, 0.0)
    with pytest.raises(BranchError):
        qspe.invert_mapping(0.1, 2.0)


# ---------------------------------------------------------------- variances


def test_analytic_variance_example():
    vt, vz = qspe.analytic_variance(10**5, 10, 0.01, "analog")
    assert vz == pytest.approx(3.75e-6, rel=1e-14)
    assert vt == pytest.approx(1 / (8 * 10**5 * 100), rel=1e-14)


@pytest.mark.parametrize("n", [2, 4, 10])
def test_parallel_ratio(n):
    a = qspe.analytic_variance(1000, 8, 0.01, "analog")
    h = qspe.analytic_variance(1000, 8, 0.01, "hybrid", n)
    assert h[0] / a[0] == pytest.approx(2 * n) and h[1] / a[1] == pytest.approx(2 * n)


@pytest.mark.parametrize("mode,n", [("analog", 2), ("hybrid", 3), ("hybrid", 7)])
def test_cr_saturation(mode, n):
    for d in (2, 5, 10):
        assert qspe.cr_bound(1000, d, 0.01, mode, n) == qspe.analytic_variance(1000, d, 0.01, mode, n)


def test_exact_fisher_approaches_closed_form():
    for mode, n in (("analog", 2), ("hybrid", 40)):
        exact = qspe.cr_bound(10**5, 200, 1e-4, mode, n, exact=True)
        closed = qspe.cr_bound(10**5, 200, 1e-4, mode, n)
        assert exact[0] == pytest.approx(closed[0], rel=0.05)
        assert exact[1] == pytest.approx(closed[1], rel=0.05)


def test_variance_errors_and_warnings():
    with pytest.raises(ValueError):
        qspe.analytic_variance(100, 10, 0.0)
    with pytest.warns(RegimeWarning):
        qspe.analytic_variance(100, 10, 0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        qspe.analytic_variance(100, 10, 0.01)
