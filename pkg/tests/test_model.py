import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ringup.model import (
    N_TRANSMON, BareIndex, DriveEnvelope, SystemParams, bare_energies, build_drive_op, build_h0,
    diagonal_h0, flat_index, lowering_op,
)

TWO_PI = 2 * np.pi


def test_default_parameters():
    p = SystemParams()
    assert (p.f_r, p.f_q, p.eta, p.g, p.n_tr) == (6.0, 5.0, 0.2, 0.1, 7)
    assert p.dim == 300 * 7
    assert p.detuning == pytest.approx(TWO_PI)


@pytest.mark.parametrize("bad", [dict(f_q=-1.0), dict(eta=-0.2), dict(g=0.0), dict(f_r=4.0), dict(n_tr=5)])
def test_invalid_parameters_rejected(bad):
    with pytest.raises(ValueError):
        SystemParams(**bad)
    assert SystemParams.check(**bad)


def test_check_reports_unknown_names():
    assert "unknown" in SystemParams.check(chi=1.0)[0]


def test_transmon_levels():
    e = bare_energies(SystemParams())
    assert e[0] == 0
    assert e[1] == pytest.approx(TWO_PI * 5.0)
    assert e[2] == pytest.approx(TWO_PI * (10.0 - 0.2))
    assert np.diff(e, 2) == pytest.approx(np.full(5, -TWO_PI * 0.2))


def test_h0_diagonal_in_rotating_frame():
    p = SystemParams(n_res=10)
    d = diagonal_h0(p).reshape(10, N_TRANSMON)
    # resonant drive: photon number costs nothing, each transmon level costs (w_q - w_d) minus anharmonicity
    assert d[5, 0] == pytest.approx(0.0)
    assert d[0, 1] == pytest.approx(-TWO_PI)
    assert d[3, 2] == pytest.approx(TWO_PI * (-2.0 - 0.2))


def test_coupling_elements():
    p = SystemParams(n_res=12)
    h = build_h0(p).toarray()
    g = TWO_PI * 0.1
    assert h[flat_index(0, 1), flat_index(1, 0)] == pytest.approx(g)
    assert h[flat_index(3, 2), flat_index(4, 1)] == pytest.approx(g * np.sqrt(4 * 2))
    assert h[flat_index(2, 2), flat_index(2, 1)] == 0


def test_h0_hermitian_and_strip_conserving():
    p = SystemParams(n_res=15)
    h = build_h0(p).toarray()
    assert np.allclose(h, h.conj().T)
    rows, cols = np.nonzero(h)
    exc = lambda i: sum(BareIndex.from_flat(i))  # noqa: E731
    assert all(exc(r) == exc(c) for r, c in zip(rows, cols))


def test_e0_is_a_global_shift():
    a, b = SystemParams(n_res=8), SystemParams(n_res=8, e0=0.3)
    diff = build_h0(b).toarray() - build_h0(a).toarray()
    assert np.allclose(diff, TWO_PI * 0.3 * np.eye(a.dim))


def test_drive_operator():
    p = SystemParams(n_res=10)
    D, Dh = build_drive_op(p)
    assert D[flat_index(4, 3), flat_index(3, 3)] == pytest.approx(2.0)
    assert np.allclose(Dh.toarray(), D.toarray().conj().T)
    assert np.allclose(Dh.toarray(), lowering_op(p).toarray())


@given(st.integers(0, 400), st.integers(0, N_TRANSMON - 1))
def test_index_round_trip(n, k):
    idx = BareIndex(n, k)
    assert BareIndex.from_flat(idx.flat) == idx
    assert flat_index(n, k) == idx.flat


@settings(max_examples=50)
@given(st.floats(0.0, 50.0), st.floats(0.5, 20.0), st.complex_numbers(max_magnitude=0.1))
def test_ramp_envelope_bounded_by_target(t, ramp, eps):
    env = DriveEnvelope("ramp", eps=eps, ramp_ns=ramp)
    assert abs(env.amplitude(t)) <= abs(eps) + 1e-15
    if t >= ramp:
        assert env.amplitude(t) == pytest.approx(eps)


def test_envelope_kinds():
    assert DriveEnvelope("sudden-constant", eps=0.01)(1.0) == pytest.approx(TWO_PI * 0.01)
    assert DriveEnvelope(eps=0.01).amplitude(-1.0) == 0
    tab = DriveEnvelope("table", table=((0, 0, 0), (10, 0.02, -0.01)))
    assert tab.amplitude(5.0) == pytest.approx(0.01 - 0.005j)
    assert tab.peak == pytest.approx(0.02 - 0.01j)
    with pytest.raises(ValueError):
        DriveEnvelope("gaussian")
    with pytest.raises(ValueError):
        DriveEnvelope("table", table=((1, 0), (0, 1)))


def test_conjugate_reversed_envelope():
    env = DriveEnvelope("ramp", eps=0.02 + 0.01j, ramp_ns=5.0)
    rev = env.conjugate_reversed(20.0)
    for t in (0.0, 3.3, 17.5, 20.0):
        assert rev.amplitude(t) == pytest.approx(np.conj(env.amplitude(20.0 - t)), abs=1e-6)
