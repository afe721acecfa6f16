import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ringup import dressed as dr
from ringup import reduced as rd
from ringup.model import DriveEnvelope, SystemParams, build_drive_op, build_h0
from ringup.propagate import evolve
from ringup.spectrum import LadderProfile, diagonalize, resonant_drive_frequency

TWO_PI = 2 * np.pi


def _invariants(tr):
    S = np.array([dr.squeeze_strength(K, W) for K, W in zip(tr.K, tr.W)])
    theta = np.unwrap([dr.squeeze_angle(b, K, W) for b, K, W in zip(tr.beta, tr.K, tr.W)])
    return S, theta


def test_free_constant_solution():
    prof = LadderProfile.linear(0.2, 0.0, n_max=100)
    s0 = rd.ReducedState(beta=2.0 + 0j, K=0.1, W=0.8)
    tr = rd.evolve_reduced(prof, DriveEnvelope(eps=0.0), state0=s0, t_end=30.0, dt_out=1.0)
    assert np.allclose(tr.K, 0.1) and np.allclose(tr.W, 0.8)
    # beta rotates at omega(|beta|^2)
    assert tr.beta == pytest.approx(2.0 * np.exp(-0.2j * tr.times), abs=1e-10)


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.5, 0.5).filter(lambda d: abs(d) > 1e-3), st.complex_numbers(min_magnitude=1e-3, max_magnitude=0.03))
def test_linear_resonator_solution(delta, eps):
    prof = LadderProfile.linear(delta, 0.0, n_max=5000)
    tr = rd.evolve_reduced(prof, DriveEnvelope(eps=eps), t_end=40.0, dt=0.005, dt_out=2.0)
    e = TWO_PI * eps
    exact = -e * (1 - np.exp(-1j * delta * tr.times)) / delta
    assert np.max(np.abs(tr.beta - exact)) < 1e-8


def test_vacuum_start_short_time():
    slope = -1.0e-4
    prof = LadderProfile.linear(0.0, slope, n_max=500)
    eps = TWO_PI * 0.01
    tr = rd.evolve_reduced(prof, DriveEnvelope(eps=0.01), t_end=20.0, dt_out=1.0)
    assert tr.beta[5] == pytest.approx(-1j * eps * tr.times[5], rel=1e-3)
    assert np.all(np.abs(tr.W - 1) < 1e-3)
    assert tr.K[-1] == pytest.approx(slope * eps**2 * 20.0**3 / 6, rel=2e-2)
    assert rd.to_squeezed(tr.state(0)).r == 0


def test_drive_preserves_S_and_theta():
    s0 = rd.ReducedState(beta=3 + 1j, K=0.3, W=0.7)
    env = DriveEnvelope(eps=0.01 + 0.004j)
    tr = rd.evolve_reduced(LadderProfile.linear(0.0, 0.0, 3000), env, state0=s0, t_end=100.0, dt_out=5.0)
    S, theta = _invariants(tr)
    assert np.ptp(S) < 1e-6 and np.ptp(theta) < 1e-6
    # a constant frame detuning only rotates the ellipse with beta
    w0 = 0.05
    tr = rd.evolve_reduced(LadderProfile.linear(w0, -2e-4, 3000), env, state0=s0, t_end=100.0, dt_out=5.0,
                           slope_scale=0.0)
    S, theta = _invariants(tr)
    assert np.ptp(S) < 1e-6


@pytest.fixture(scope="module")
def tuned_basis():
    p = SystemParams()
    return diagonalize(p.replace(f_d=resonant_drive_frequency(p, 0, 0)))


def test_r_grows_monotonically(tuned_basis):
    tr = rd.evolve_reduced(tuned_basis.profile(0), DriveEnvelope(eps=0.01),
                           rd.drive_modes("analytic", tuned_basis), t_end=150.0, dt_out=1.0)
    r, _ = tr.squeeze()
    assert np.all(np.diff(r[1:]) > 0)
    assert r[-1] > 0.3


def test_step_halving_guard(default_basis):
    rd.evolve_reduced(default_basis.profile(0), DriveEnvelope(eps=0.01), t_end=50.0, dt_out=5.0, check_halving=True)
    with pytest.raises(RuntimeError):
        rd.evolve_reduced(default_basis.profile(0), DriveEnvelope(eps=0.01), t_end=50.0, dt=2.0, dt_out=5.0,
                          check_halving=True, halving_tol=1e-12)


def test_profile_range_guard():
    with pytest.raises(ValueError):
        rd.evolve_reduced(LadderProfile.linear(0.0, 0.0, 20), DriveEnvelope(eps=0.05), t_end=60.0)


def test_drive_modes(tuned_basis):
    p = tuned_basis.params
    f_bare = rd.drive_modes("bare")(10.0)
    f_an = rd.drive_modes("analytic", tuned_basis)(10.0)
    f_mx = rd.drive_modes("matrix", tuned_basis)(10.0)
    small = (p.g / (p.f_r - p.f_q)) ** 2
    assert f_bare == 1.0
    assert abs(f_an - f_bare) == pytest.approx(small / 2)
    assert abs(f_mx - f_an) < small
    with pytest.raises(ValueError):
        rd.drive_modes("matrix")
    with pytest.raises(ValueError):
        rd.drive_modes("exact", tuned_basis)
    runs = {m: rd.evolve_reduced(tuned_basis.profile(0), DriveEnvelope(eps=0.01),
                                 rd.drive_modes(m, tuned_basis), t_end=100.0, dt_out=10.0) for m in rd.DRIVE_MODES}
    b = {m: abs(run.beta[-1]) for m, run in runs.items()}
    assert abs(b["bare"] - b["analytic"]) / b["bare"] < 2 * small
    assert abs(b["matrix"] - b["analytic"]) / b["bare"] < 2 * small


def test_reduced_table_columns(default_basis):
    tr = rd.evolve_reduced(default_basis.profile(0), DriveEnvelope(eps=0.01), t_end=10.0, dt_out=5.0)
    assert list(tr.table()) == ["t_ns", "re_beta", "im_beta", "K", "W", "r", "theta", "nbar"]


def test_matches_full_simulation_small_instance():
    p = SystemParams(n_res=60)
    p = p.replace(f_d=resonant_drive_frequency(p, 0, 0))
    basis = diagonalize(p)
    env = DriveEnvelope(eps=0.01)
    psi0 = basis.eigenvector(0, 0)
    full = evolve(build_h0(p), build_drive_op(p), env, psi0, 60.0, dt_out=60.0)
    c = basis.to_dressed(full.final)[:, 0]
    tr = rd.evolve_reduced(basis.profile(0), env, rd.drive_modes("analytic", basis), t_end=60.0, dt_out=60.0)
    predicted = dr.squeezed_amplitudes(rd.to_squeezed(tr.state(-1)), p.n_res)
    assert dr.fidelity_amplitudes(predicted, c) > 0.999
