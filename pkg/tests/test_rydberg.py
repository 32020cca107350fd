import numpy as np
import pytest
from hypothesis import given, strategies as st

from hamlearn.rydberg import (
    C6,
    RydbergCase,
    coupling_from_distance,
    distance_from_coupling,
    load_benchmark,
    run_benchmark,
    variance_convert,
)


def test_coupling_examples():
    assert coupling_from_distance(7.16) == pytest.approx(40.0, rel=0.01)
    assert coupling_from_distance(7.52) == pytest.approx(30.0, rel=0.01)
    assert coupling_from_distance(8.04) == pytest.approx(20.0, rel=0.01)


def test_distance_examples():
    assert distance_from_coupling(0.04, 1e-3) == pytest.approx(7.16, abs=0.01)
    assert distance_from_coupling(0.03, 1e-3) == pytest.approx(7.52, abs=0.01)
    assert distance_from_coupling(0.02, 1e-3) == pytest.approx(8.04, abs=0.01)


@given(st.floats(3.0, 20.0), st.floats(1e-4, 1e-1))
def test_round_trip(R, T):
    b = coupling_from_distance(R) * T
    assert distance_from_coupling(b, T) == pytest.approx(R, rel=1e-10)


def test_inverse_sixth_power():
    R, h = 7.5, 1e-5
    deriv = (coupling_from_distance(R + h) - coupling_from_distance(R - h)) / (2 * h)
    assert deriv == pytest.approx(-6 * C6 / R**7, rel=1e-8)
    assert coupling_from_distance(2 * R) == pytest.approx(coupling_from_distance(R) / 64)


def test_ordering():
    assert coupling_from_distance(7.16) > coupling_from_distance(7.52) > coupling_from_distance(8.04)


def test_variance_conversion():
    assert variance_convert(0.0, 0.04, 7.16) == 0.0
    # delta R / R = delta b / (6 b)
    var_R = variance_convert(1e-8, 0.04, 7.16)
    assert np.sqrt(var_R) / 7.16 == pytest.approx(1e-4 / 0.24)


def test_domain_errors():
    with pytest.raises(ValueError):
        coupling_from_distance(0.0)
    with pytest.raises(ValueError):
        distance_from_coupling(-0.01, 1e-3)
    with pytest.raises(ValueError):
        distance_from_coupling(0.01, 0.0)
    with pytest.raises(ValueError):
        variance_convert(1e-8, 0.0, 7.0)


def test_load_benchmark():
    cases, aT = load_benchmark()
    assert [c.label for c in cases] == ["R12", "R13", "R23"]
    assert [c.R for c in cases] == [7.16, 7.52, 8.04]
    assert aT == 0.01
    for c in cases:
        assert c.V == pytest.approx(c.V_nominal, rel=0.01)
        assert c.b == pytest.approx(c.b_nominal, rel=0.01)


def test_benchmark_exact_recovers_distances():
    for mode in ("pairwise", "insitu"):
        for est in run_benchmark(N=1, n_boot=0, mode=mode, exact=True):
            assert est.rel_error < 1e-3
            assert est.var_R == 0.0


def test_benchmark_small_run():
    out = run_benchmark(d=6, N=10**4, n_boot=100, seed=1)
    assert [e.label for e in out] == ["R12", "R13", "R23"]
    for e in out:
        assert e.R_hat > 0 and e.var_R > 0
        assert e.rel_sigma == pytest.approx(np.sqrt(e.var_R) / e.R_hat)


def test_insitu_needs_common_time():
    cases = [RydbergCase("x", 7.0, 1e-3), RydbergCase("y", 7.5, 2e-3), RydbergCase("z", 8.0, 1e-3)]
    with pytest.raises(ValueError):
        run_benchmark(N=100, n_boot=0, mode="insitu", cases=cases)
