import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import scenario
from ringup import leakage as lk
from ringup.model import DriveEnvelope, SystemParams
from ringup.runner import Context, analysis_leakage
from ringup.spectrum import diagonalize

TWO_PI = 2 * np.pi


@pytest.fixture(scope="module")
def basis_eta25():
    return diagonalize(SystemParams(eta=0.25, n_res=80))


@pytest.fixture(scope="module")
def fig3a_leak(fig3a_ctx):
    return analysis_leakage(fig3a_ctx)


def test_steady_state_scaling():
    base = lk.steady_state(0.1, 0.6, 6.0, 6.3)
    assert lk.steady_state(0.2, 0.6, 6.0, 6.3) == pytest.approx(4 * base, rel=1e-14)
    assert lk.steady_state(0.1, 1.2, 6.0, 6.3) == pytest.approx(4 * base, rel=1e-14)
    with pytest.raises(ValueError):
        lk.steady_state(0.1, 0.6, 0.0, 6.3)


def test_prediction_fields(basis_eta25):
    pred = lk.predict_ground(basis_eta25.params, basis_eta25, 10.0, 0.06)
    assert pred.p_max == pytest.approx(4 * lk.predict_ground(basis_eta25.params, basis_eta25, 0.0, 0.06).p_ss)
    delta, omega = lk.ladder_gaps(basis_eta25, 0)
    # Omega = Delta + w_d - w_r with the dressed ladder frequency
    assert omega[10] == pytest.approx(delta[10] - basis_eta25.ladder_frequency(0)[10])
    assert pred.omega_osc == pytest.approx(omega[10])
    assert pred.t_decay > 0 and pred.valid
    # bare-detuning value 4 (0.06 * 0.1 / 1)^2 = 1.44e-4 is within a few percent of the eigen-gap value
    assert pred.p_max == pytest.approx(1.44e-4, rel=0.1)


def test_excited_branch_symmetry(basis_eta25):
    p = basis_eta25.params
    to0, to2 = lk.predict_excited(p, basis_eta25, 5.0, 0.06)
    assert to0 == lk.predict_ground(p, basis_eta25, 5.0, 0.06)
    assert to2.p_ss > 0


def test_excited_large_eta_limit():
    small = []
    for eta in (0.25, 2.0, 20.0):
        p = SystemParams(eta=eta, n_res=30)
        small.append(lk.predict_excited(p, diagonalize(p), 0.0, 0.06)[1].p_ss)
    assert small[0] > small[1] > small[2]
    assert small[2] < 1e-3 * small[0]


def test_validity_flag_warns(basis_eta25):
    with pytest.warns(UserWarning):
        pred = lk.predict_ground(basis_eta25.params, basis_eta25, 0.0, 5.0)
    assert not pred.valid


def test_crude_estimates():
    assert lk.crude_stray_estimate(0.05, 0.1, 1.0) == pytest.approx(3e-5, rel=0.3)
    assert lk.crude_stray_estimate(0.1, 0.1, 0.5) == pytest.approx(2e-3, rel=0.3)


def test_constant_nbar_phasor_solution(basis_eta25):
    t = np.linspace(0, 20, 801)
    env = DriveEnvelope(eps=0.02)
    c = lk.integrate_c(basis_eta25, env, lambda _: 0.0, t)
    delta, omega = lk.ladder_gaps(basis_eta25, 0)
    pss = lk.steady_state(env(1.0), basis_eta25.params.g_ang, omega[0], delta[0])
    assert np.abs(c) ** 2 == pytest.approx(4 * pss * np.sin(omega[0] * t / 2) ** 2, abs=1e-6 * pss)


def test_c_tracks_simulation(fig3a_ctx, fig3a_leak):
    tab = fig3a_leak.tables["leakage"]
    t, sim, model = tab["t_ns"], tab["P_ladder_1"], tab["c_model_1"]
    period = TWO_PI / abs(lk.ladder_gaps(fig3a_ctx.basis, 0)[1][0])
    for start in np.arange(0, t[-1] - period, period):
        m = (t >= start) & (t < start + period)
        assert 0.5 < sim[m].max() / model[m].max() < 2
        assert 0.5 < sim[m].mean() / model[m].mean() < 2


def test_decay_fit_synthetic():
    t = np.linspace(0, 60, 12001)
    tau = 20.0
    trace = 1e-4 + 5e-5 * np.exp(-(t / tau) ** 2) * np.cos(5.0 * t)
    # amplitude reaches 1/3 at tau sqrt(ln 3)
    assert lk.fit_decay_time(t, trace) == pytest.approx(tau * np.sqrt(np.log(3)), rel=0.05)


def test_decay_fit_errors():
    t = np.linspace(0, 60, 6001)
    with pytest.raises(ValueError, match="insufficient decay"):
        lk.fit_decay_time(t, 1 + np.cos(3.0 * t))
    with pytest.raises(ValueError, match="insufficient oscillations"):
        lk.fit_decay_time(t, 1 + np.cos(0.2 * t), period=TWO_PI / 0.2)


@settings(max_examples=20, deadline=None)
@given(st.floats(2.0, 8.0), st.floats(-1.0, 1.0))
def test_oscillation_frequency_synthetic(w, phase):
    t = np.linspace(0, 80, 16001)
    trace = 2e-5 + 1e-5 * np.cos(w * t + phase) + 3e-7 * t
    _, freqs = lk.oscillation_frequency(t, trace)
    assert len(freqs) >= 2
    assert freqs == pytest.approx(np.full(len(freqs), w), rel=0.01)


def test_ramp_follows_steady_state():
    ctx = Context(scenario("fig3b"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tab = analysis_leakage(ctx).tables["leakage"]
    pss = tab["p_ss_1"] * np.array([abs(ctx.cfg.envelope.amplitude(x) / ctx.eps_ghz) ** 2 for x in tab["t_ns"]])
    t = tab["t_ns"]
    m = t > 1.0
    assert np.all(tab["P_ladder_1"][m] < 2 * pss[m])


def test_excited_plateau_within_factor_two():
    ctx = Context(scenario("fig3d"))
    summary = analysis_leakage(ctx).summary
    ratio = summary["plateau_sim"] / summary["p_ss0_model"]
    assert 0.5 < ratio < 2
