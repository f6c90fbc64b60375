from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aniso_qft.background import BackgroundModel, Mode, couplings
from aniso_qft.integrator import dopri5
from aniso_qft.kinetics import (BogoliubovState, KineticState, ModeBatch, OscillatorState, bogoliubov_from_oscillator,
                                bogoliubov_rhs, evolve_bogoliubov, evolve_oscillator, evolve_oscillator_batch,
                                evolve_suv, evolve_suv_batch, oscillator_from_bogoliubov, oscillator_rhs,
                                oscillator_to_suv, oscillator_vacuum_initial, suv_from_bogoliubov, suv_rhs,
                                vacuum_initial_state)

TANH = BackgroundModel.tanh_step((2, 2, 2), (0.5, -0.5, 0.0), 1.0)
TANH_ISO = BackgroundModel.tanh_step((2, 2, 2), (0.5, 0.5, 0.5), 1.0)
STATIC = BackgroundModel.static((1, 1, 1))

# oscillator oracle at tol 1e-13 for (k=1, theta=pi/3, phi=pi/4), m=1, eta in [-10, 10]
REGRESSION_S = 9.887562932343789e-05


def geo_at(model=TANH, mode=Mode(1.0, 1.0, 0.5), m=1.0, eta=0.3):
    return couplings(model, mode, m, eta)


def unit_static_geo(k=1.0):
    # alpha = 1 so mu = 1 and omega = K0 = k
    return couplings(STATIC, Mode(k, 0.2, 0.1), 0.0, 0.0)


complexes = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)


# -- right-hand sides -------------------------------------------------------

@pytest.mark.parametrize("eta0", [-10.0, 0.0])
def test_vacuum_initial_state(eta0):
    s = vacuum_initial_state(eta0)
    assert (s.S, s.U, s.V, s.Theta, s.eta) == (0, 0, 0, 0, eta0)
    assert s.constraint_residual == 0


def test_vacuum_is_static_fixed_point():
    geo = unit_static_geo(2.0)
    assert suv_rhs(vacuum_initial_state(0), geo) == (0, 0, 0, 2.0)


def test_kinetic_source_term():
    geo = geo_at()
    dS, dU, dV, _ = suv_rhs(vacuum_initial_state(0), geo)
    assert dS == 0
    assert dU == pytest.approx(geo.W)
    assert dV == pytest.approx(geo.Wt)


def test_isotropic_V_driven_through_U():
    geo = couplings(TANH_ISO, Mode(1.0, 0.3, 0.2), 1.0, 0.4)
    assert geo.Wt == 0
    state = KineticState(0.7, 0.3, -0.2, 0.0, 0.4)
    _, _, dV, _ = suv_rhs(state, geo)
    assert dV == pytest.approx(2 * geo.omega * 0.3)


@given(st.floats(0, 5), st.floats(0, 2 * np.pi))
def test_constraint_derivative_vanishes(S, ang):
    # on the constraint surface d/deta (U^2 + V^2 - 4S(S+1)) = 0 for the corrected signs
    r = 2 * np.sqrt(S * (S + 1))
    state = KineticState(S, r * np.cos(ang), r * np.sin(ang), 0.0, 0.3)
    geo = geo_at()
    dS, dU, dV, _ = suv_rhs(state, geo)
    rate = 2 * state.U * dU + 2 * state.V * dV - 4 * (2 * S + 1) * dS
    assert abs(rate) <= 1e-10 * (1 + S) ** 2


def test_printed_sign_drifts_off_constraint():
    state = KineticState(1.0, 2.0, 2.0, 0.0, 0.3)
    geo = geo_at()
    dS, dU, dV, _ = suv_rhs(state, geo, "printed")
    rate = 2 * state.U * dU + 2 * state.V * dV - 4 * 3 * dS
    assert rate == pytest.approx(-4 * (geo.Wt + 2 * geo.omega) * state.U * state.V)


@settings(max_examples=40)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_linear_part_superposes(s1, u1, v1, s2, u2, v2):
    geo = geo_at()
    base = np.array(suv_rhs(KineticState(0, 0, 0, 0, 0), geo)[:3])

    def lin(s, u, v):
        return np.array(suv_rhs(KineticState(s, u, v, 0, 0), geo)[:3]) - base

    np.testing.assert_allclose(lin(2 * s1, 2 * u1, 2 * v1), 2 * lin(s1, u1, v1), atol=1e-12)
    np.testing.assert_allclose(lin(s1 + s2, u1 + u2, v1 + v2), lin(s1, u1, v1) + lin(s2, u2, v2), atol=1e-12)


def test_homogeneous_evolution_doubles():
    mode = Mode(1.0, 1.0, 0.5)

    def homogeneous(t, y, idx):
        geo = couplings(TANH, mode, 1.0, t)
        zero = KineticState(0, 0, 0, 0, t)
        st_ = KineticState(y[:, 0], y[:, 1], y[:, 2], 0, t)
        full = np.stack(suv_rhs(st_, geo)[:3], axis=1)
        return full - np.stack(suv_rhs(zero, geo)[:3], axis=1)

    y0 = np.array([[0.2, 0.1, -0.3], [0.4, 0.2, -0.6]])
    sol = dopri5(homogeneous, -2.0, y0, [2.0], 1e-12)
    np.testing.assert_allclose(sol.y[-1, 1], 2 * sol.y[-1, 0], rtol=1e-9, atol=1e-12)


def test_bogoliubov_rhs_examples():
    geo = unit_static_geo(1.5)
    da, db, dth = bogoliubov_rhs(BogoliubovState(1.0 + 0j, 0j, 0.0, 0.0), geo)
    assert (da, db, dth) == (0, 0, 1.5)
    geo = geo_at(model=TANH_ISO)
    assert geo.Wt == 0
    _, db, _ = bogoliubov_rhs(BogoliubovState(1.0 + 0j, 0j, 0.0, 0.0), geo)
    assert np.conj(db) == pytest.approx(geo.W / 2)


@given(complexes, complexes, st.floats(0, 6))
def test_pure_anisotropy_keeps_norm(alpha, beta, theta):
    geo = couplings(BackgroundModel.static((1, 1, 1)), Mode(1.0), 0.0, 0.0)
    geo = replace(geo, W=0.0, Wt=0.7)
    da, db, _ = bogoliubov_rhs(BogoliubovState(alpha, beta, theta, 0.0), geo)
    rate = 2 * (np.conj(alpha) * da).real - 2 * (np.conj(beta) * db).real
    assert abs(rate) <= 1e-12 * (1 + abs(alpha) ** 2 + abs(beta) ** 2)


def test_oscillator_rhs_frequency():
    geo = geo_at()
    state = OscillatorState(1.0 + 0j, 0.5j, 0.0, 0.3)
    gd, gdd, dth = oscillator_rhs(state, geo)
    assert gd == 0.5j
    assert gdd == pytest.approx(-(geo.omega**2 + geo.Q))
    assert dth == geo.omega


# -- maps ------------------------------------------------------------------

def test_suv_from_bogoliubov_examples():
    s = suv_from_bogoliubov(BogoliubovState(1.0 + 0j, 0j, 0.0, 0.0))
    assert (s.S, s.U, s.V) == (0, 0, 0)
    s = suv_from_bogoliubov(BogoliubovState(np.sqrt(2) + 0j, 1.0 + 0j, 0.0, 0.0))
    assert (s.S, s.U, s.V) == pytest.approx((1, 2 * np.sqrt(2), 0))
    assert s.U**2 + s.V**2 == pytest.approx(4 * s.S * (s.S + 1))
    s = suv_from_bogoliubov(BogoliubovState(np.sqrt(2) + 0j, 1j, 0.0, 0.0))
    assert (s.S, s.U, s.V) == pytest.approx((1, 0, -2 * np.sqrt(2)))


def test_conventions_differ_only_in_phase_of_beta():
    st_ = BogoliubovState(np.sqrt(2) + 0j, 1.0 + 0j, 0.0, 0.0)
    a, b = suv_from_bogoliubov(st_, "printed"), suv_from_bogoliubov(st_, "consistent")
    assert (a.S, a.U) == pytest.approx((b.S, b.U))
    assert a.V == pytest.approx(-b.V)


@st.composite
def bogoliubov_pairs(draw):
    r = draw(st.floats(0, 3))
    pa, pb, theta = (draw(st.floats(0, 2 * np.pi)) for _ in range(3))
    return BogoliubovState(np.sqrt(1 + r * r) * np.exp(1j * pa), r * np.exp(1j * pb), theta, 0.3)


@given(bogoliubov_pairs())
def test_oscillator_map_round_trip(state):
    geo = geo_at()
    back = bogoliubov_from_oscillator(oscillator_from_bogoliubov(state, geo), geo)
    assert abs(back.alpha - state.alpha) <= 1e-12 * (1 + abs(state.alpha))
    assert abs(back.beta - state.beta) <= 1e-12 * (1 + abs(state.beta))


@given(bogoliubov_pairs())
def test_wronskian_fixed_by_normalisation(state):
    osc = oscillator_from_bogoliubov(state, geo_at())
    assert osc.wronskian == pytest.approx(-1j, abs=1e-10 * (1 + abs(state.beta)) ** 2)


def test_positive_frequency_data_has_no_beta():
    geo = geo_at()
    # A = B means sqrt(2 omega) g = -i sqrt(2/omega) g', i.e. g' = i omega g
    g = 0.3 + 0.1j
    back = bogoliubov_from_oscillator(OscillatorState(g, 1j * geo.omega * g, 0.7, 0.3), geo)
    assert abs(back.beta) <= 1e-15


@pytest.mark.parametrize("omega_target", [1.0, 2.0])
def test_oscillator_vacuum(omega_target):
    geo = unit_static_geo(omega_target)
    osc = oscillator_vacuum_initial(geo)
    assert osc.gt == pytest.approx(1 / np.sqrt(2 * omega_target))
    assert osc.gt_dot == pytest.approx(1j * np.sqrt(omega_target / 2))
    back = bogoliubov_from_oscillator(osc, geo)
    assert back.alpha == pytest.approx(1.0) and abs(back.beta) < 1e-15


# -- evolution -------------------------------------------------------------

def test_static_background_stays_vacuum():
    traj = evolve_suv(BackgroundModel.static((1, 2, 3)), Mode(1.3, 0.5, 0.5), 1.0, -5, 5,
                      output_times=[-5, 0, 5])
    assert np.max(np.abs([traj.S, traj.U, traj.V])) <= 1e-12


def test_static_oscillator_closed_form():
    model = BackgroundModel.static((1.3, 1.3, 1.3))
    mode = Mode(2.0, 0.4, 0.1)
    osc = evolve_oscillator(model, mode, 1.0, 0.0, 10.0, 1e-12)
    w = couplings(model, mode, 1.0, 0.0).omega
    assert osc.gt[-1] == pytest.approx(np.exp(1j * w * 10) / np.sqrt(2 * w), abs=1e-9)


def test_anisotropic_regression_value():
    traj = evolve_suv(TANH, Mode(1.0, np.pi / 3, np.pi / 4), 1.0, -10, 10, 1e-10,
                      output_times=np.linspace(-10, 10, 41))
    assert traj.S[-1] > 0
    assert traj.S[-1] == pytest.approx(REGRESSION_S, rel=1e-6)
    assert traj.constraint_ok(1e-8)


@pytest.mark.parametrize("k", [0.3, 1.0])
def test_isotropic_massless_matches_oscillator(k):
    tol = 1e-10
    mode = Mode(k, 0.4, 0.3)
    S = evolve_suv(TANH_ISO, mode, 0.0, -10, 10, tol).S[-1]
    b = ModeBatch.from_modes([mode])
    osc = evolve_oscillator_batch(TANH_ISO, b, 0.0, -10, [10.0], tol)
    S_ref = oscillator_to_suv(TANH_ISO, b, 0.0, osc, "consistent").S[-1, 0]
    assert abs(S - S_ref) <= 10 * tol * S_ref


def test_three_formulations_agree_on_one_mode():
    mode = Mode(0.8, 1.1, 0.4)
    suv = evolve_suv(TANH, mode, 1.0, -10, 10, 1e-12)
    bog = evolve_bogoliubov(TANH, mode, 1.0, -10, 10, 1e-12)
    osc = evolve_oscillator(TANH, mode, 1.0, -10, 10, 1e-12)
    geo = couplings(TANH, mode, 1.0, 10.0)
    from_osc = suv_from_bogoliubov(bogoliubov_from_oscillator(
        OscillatorState(osc.gt[-1], osc.gt_dot[-1], osc.Theta[-1], 10.0), geo), "consistent")
    from_bog = suv_from_bogoliubov(BogoliubovState(bog.alpha[-1], bog.beta[-1], bog.Theta[-1], 10.0),
                                   "consistent")
    for other in (from_osc, from_bog):
        assert other.S == pytest.approx(suv.S[-1], rel=1e-6)
        assert other.U == pytest.approx(suv.U[-1], abs=1e-6)
        assert other.V == pytest.approx(suv.V[-1], abs=1e-6)
    assert bog.Theta[-1] == pytest.approx(suv.Theta[-1], abs=1e-8)


def test_bogoliubov_norm_preserved():
    bog = evolve_bogoliubov(TANH, Mode(0.5, 0.7, 0.2), 1.0, -10, 10, 1e-10,
                            output_times=np.linspace(-10, 10, 21))
    assert np.max(bog.norm_defect) <= 1e-8


def test_wronskian_conserved():
    osc = evolve_oscillator(TANH, Mode(0.5, 0.7, 0.2), 1.0, -10, 10, 1e-12,
                            output_times=np.linspace(-10, 10, 21))
    np.testing.assert_allclose(osc.wronskian, -1j, atol=1e-8)


def test_printed_sign_breaks_constraint():
    traj = evolve_suv(TANH, Mode(1.0, np.pi / 3, np.pi / 4), 1.0, -10, 10, 1e-10, variant="printed")
    assert not traj.constraint_ok(1e-8)


def test_adiabatic_decay_in_k():
    k = np.geomspace(1, 10, 12)
    st_ = evolve_suv_batch(TANH, ModeBatch.from_angles(k, np.pi / 3, np.pi / 4), 1.0, -10, [10.0], 1e-12)
    assert np.all(np.diff(st_.S[-1]) < 0)


def test_phase_wrapped():
    traj = evolve_suv(TANH, Mode(3.0, 0.4, 0.3), 1.0, -10, 10)
    assert 0 <= traj.Theta[-1] < 2 * np.pi


def test_window_errors():
    with pytest.raises(ValueError):
        evolve_suv(TANH, Mode(1.0), 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        evolve_suv(TANH, Mode(1.0), 1.0, 0.0, 1.0, output_times=[2.0])
    with pytest.raises(ValueError):
        evolve_suv(BackgroundModel.power_law((1, 1, 1)), Mode(1.0), 1.0, -1.0, 1.0)


def test_batch_matches_single_modes():
    modes = [Mode(0.5, 0.3, 0.1), Mode(2.0, 1.2, 2.0)]
    batch = evolve_suv_batch(TANH, ModeBatch.from_modes(modes), 1.0, -5, [0.0, 5.0], 1e-10)
    for j, md in enumerate(modes):
        one = evolve_suv(TANH, md, 1.0, -5, 5, 1e-10, output_times=[0.0, 5.0])
        np.testing.assert_array_equal(batch.S[:, j], one.S)
