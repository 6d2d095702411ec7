import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlsqueeze.errors import IncompleteMomentError
from nlsqueeze.nlsq import (
    HALF_PI,
    QUARTER_PI,
    MomentSet,
    NlsCurve,
    UnsupportedOrderError,
    assemble_curve,
    classical_threshold,
    exact_mixed_moment,
    exact_moment_set,
    matched_displacement,
    nls_variance,
    resource_condition,
    second_moment,
    squeezing_margin,
)
from nlsqueeze.states import StateSpec, make_state

import oracles


def analytic_set(moments: dict) -> MomentSet:
    m = MomentSet(provenance="exact")
    for key, value in moments.items():
        if key == "mixed":
            m.set_mixed(value)
        else:
            m.set(*key, value)
    return m


def vacuum_set() -> MomentSet:
    return analytic_set(oracles.coherent_moment_dict(0j))


# ------------------------------------------------------------- moment set

def test_moment_set_get_and_keys():
    m = MomentSet()
    m.set(0.0, 2, 0.5, 0.01)
    assert m.has(0.0, 2)
    assert m.get(0.0, 2) == 0.5
    assert m.error(0.0, 2) == 0.01
    # a full turn addresses the same entry
    assert m.has(2.0 * math.pi, 2)


def test_moment_set_missing_entry():
    m = MomentSet()
    with pytest.raises(IncompleteMomentError):
        m.get(0.0, 2)
    with pytest.raises(IncompleteMomentError):
        m.mixed


def test_moment_set_require_lists_missing():
    m = vacuum_set()
    m.require()  # the default key set is exactly what vacuum_set fills
    empty = MomentSet()
    with pytest.raises(IncompleteMomentError):
        empty.require()


def test_moment_set_update_merges():
    a = MomentSet()
    a.set(0.0, 1, 1.0)
    b = MomentSet()
    b.set(HALF_PI, 1, 2.0)
    a.update(b)
    assert a.get(HALF_PI, 1) == 2.0


# ------------------------------------------------------------- curve

def test_vacuum_curve_is_threshold():
    m = vacuum_set()
    for lam in np.linspace(-0.3, 0.3, 101):
        assert nls_variance(m, lam) == pytest.approx(
            classical_threshold(lam), abs=1e-12)


def test_vacuum_minimum_at_zero():
    m = vacuum_set()
    lams = np.linspace(-0.5, 0.5, 2001)
    vals = [nls_variance(m, l) for l in lams]
    assert min(vals) == pytest.approx(0.5, abs=1e-12)
    assert abs(lams[int(np.argmin(vals))]) < 1e-4


def test_cubic_curve_coefficients_frozen():
    st_ = make_state(StateSpec(kind="cubic_phase", gamma=0.1, N=128))
    c = assemble_curve(exact_moment_set(st_))
    assert c.a0 == pytest.approx(0.545, abs=1e-6)
    assert c.a1 == pytest.approx(-0.9, abs=1e-6)
    assert c.a2 == pytest.approx(4.5, abs=1e-6)
    assert c(0.1) == pytest.approx(0.5, abs=1e-6)


def test_curve_and_variance_agree_bitwise():
    st_ = make_state(StateSpec(kind="cubic_phase", gamma=0.15, N=128))
    m = exact_moment_set(st_)
    c = assemble_curve(m)
    for lam in (-0.2, 0.0, 0.1, 0.37):
        assert c(lam) == nls_variance(m, lam)


def test_variance_against_dense_oracle():
    rho = oracles.oracle_cubic(0.12, 128)
    st_ = make_state(StateSpec(kind="cubic_phase", gamma=0.12, N=128))
    m = exact_moment_set(st_)
    for lam in (-0.1, 0.05, 0.25):
        assert nls_variance(m, lam) == pytest.approx(
            oracles.oracle_nls_variance(rho, lam), abs=1e-7)


def test_unsupported_order():
    m = vacuum_set()
    with pytest.raises(UnsupportedOrderError):
        nls_variance(m, 0.1, order=2)
    with pytest.raises(UnsupportedOrderError):
        nls_variance(m, 0.1, order=5)


def test_curve_error_propagation():
    c = NlsCurve(a0=0.5, a1=-0.9, a2=4.5, a0_err=0.01, a1_err=0.1, a2_err=0.5)
    lam = 0.2
    expected = math.sqrt(0.01 ** 2 + (lam * 0.1) ** 2 + (lam * lam * 0.5) ** 2)
    assert c.error(lam) == pytest.approx(expected, rel=1e-12)


# ------------------------------------------------------------- second moment

def test_second_moment_exceeds_variance():
    st_ = make_state(StateSpec(kind="cubic_phase", gamma=0.1, N=128))
    m = exact_moment_set(st_)
    for lam in (-0.1, 0.0, 0.1, 0.3):
        assert second_moment(m, lam) >= nls_variance(m, lam) - 1e-12


def test_matched_displacement_closes_gap():
    # after shifting p by the matched amount, V2 collapses onto V
    gamma, lam = 0.1, 0.2
    base = StateSpec(kind="cubic_phase", gamma=gamma, N=96)
    m = exact_moment_set(make_state(base))
    pbar = matched_displacement(m, lam)
    shifted = StateSpec(kind="displaced", alpha=1j * pbar / math.sqrt(2.0),
                        inner=base, N=96)
    m2 = exact_moment_set(make_state(shifted))
    assert second_moment(m2, lam) == pytest.approx(nls_variance(m, lam), abs=1e-7)


def test_variance_invariant_under_momentum_displacement():
    base = StateSpec(kind="cubic_phase", gamma=0.1, N=96)
    m0 = exact_moment_set(make_state(base))
    for pbar in (-2.0, -0.5, 0.5, 2.0):
        spec = StateSpec(kind="displaced", alpha=1j * pbar / math.sqrt(2.0),
                         inner=base, N=96)
        m = exact_moment_set(make_state(spec))
        for lam in (-0.1, 0.1, 0.3):
            assert nls_variance(m, lam) == pytest.approx(
                nls_variance(m0, lam), abs=1e-8)


def test_coherent_bound_attained():
    lam = 0.1
    beta = 3j * lam / (2.0 * math.sqrt(2.0))
    m = exact_moment_set(make_state(StateSpec(kind="coherent", beta=beta, N=64)))
    assert second_moment(m, lam) == pytest.approx(
        classical_threshold(lam), abs=1e-8)


# ------------------------------------------------------------- thresholds

def test_threshold_values():
    assert classical_threshold(0.0) == 0.5
    assert classical_threshold(0.1) == pytest.approx(0.545, abs=1e-15)
    arr = classical_threshold(np.array([0.0, 0.1]))
    np.testing.assert_allclose(arr, [0.5, 0.545], atol=1e-15)


def test_squeezing_margin_cubic():
    st_ = make_state(StateSpec(kind="cubic_phase", gamma=0.1, N=128))
    margin, verdict = squeezing_margin(exact_moment_set(st_), 0.1)
    assert margin == pytest.approx(0.045, abs=1e-6)
    assert verdict is True


def test_squeezing_margin_vacuum_is_null():
    margin, verdict = squeezing_margin(vacuum_set(), 0.1)
    assert margin == pytest.approx(0.0, abs=1e-12)
    assert verdict is False


def test_resource_condition():
    assert resource_condition(0.1, 0.1) is True
    assert resource_condition(0.25, 0.1) is False
    assert resource_condition(0.19, 0.1) is True
    with pytest.raises(ValueError):
        resource_condition(-0.1, 0.1)
    with pytest.raises(ValueError):
        resource_condition(0.1, 0.0)


# ------------------------------------------------------------- classicality

@settings(max_examples=60, deadline=None)
@given(st.lists(
    st.tuples(st.floats(-1.2, 1.2), st.floats(-1.2, 1.2),
              st.floats(0.05, 1.0)),
    min_size=1, max_size=4))
def test_coherent_mixtures_respect_threshold(components):
    total = sum(w for _, _, w in components)
    mixed = {}
    for re, im, w in components:
        d = oracles.coherent_moment_dict(complex(re, im))
        for key, value in d.items():
            mixed[key] = mixed.get(key, 0.0) + (w / total) * value
    m = analytic_set(mixed)
    lams = np.linspace(-0.3, 0.3, 61)
    worst = min(nls_variance(m, l) - classical_threshold(l) for l in lams)
    assert worst >= -1e-8


# ------------------------------------------------------------- mixed moment

def test_mixed_moment_identity():
    # operator route versus the rotated-cube combination it is estimated by
    st_ = make_state(StateSpec(kind="cubic_phase", gamma=0.1, N=128))
    m = exact_moment_set(st_)
    c = 2.0 * math.sqrt(2.0) / 3.0
    via_rotation = (c * (m.get(QUARTER_PI, 3) - m.get(-QUARTER_PI, 3))
                    - (2.0 / 3.0) * m.get(HALF_PI, 3))
    assert exact_mixed_moment(st_) == pytest.approx(via_rotation, abs=1e-10)
    assert exact_mixed_moment(st_) == pytest.approx(0.45, abs=1e-6)


def test_mixed_moment_oracle():
    rho = oracles.oracle_cubic(0.2, 128)
    st_ = make_state(StateSpec(kind="cubic_phase", gamma=0.2, N=128))
    assert exact_mixed_moment(st_) == pytest.approx(
        oracles.oracle_mixed(rho), abs=1e-7)


def test_incomplete_set_fails_curve():
    m = MomentSet()
    m.set(0.0, 2, 0.5)
    with pytest.raises(IncompleteMomentError):
        assemble_curve(m)
