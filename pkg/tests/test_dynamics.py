import math
import warnings

import numpy as np
import pytest
import scipy.linalg
import scipy.optimize
from hypothesis import given, settings
from hypothesis import strategies as st

from nhcrit.dynamics import (
    DEFAULT_SEED,
    ConvergenceWarning,
    DegenerateSteadyStateWarning,
    convergence_time,
    evolve,
    random_state,
)
from nhcrit.eigensolver import diagonalize, eig
from nhcrit.model import lmg_hamiltonian
from nhcrit.steady import DefectiveStateError, DegenerateSteadyStateError, steady_state


@pytest.fixture(scope="module")
def n2():
    return diagonalize(lmg_hamiltonian(2, 0.6))


def im_gap(spectrum):
    im = np.sort(spectrum.values.imag)[::-1]
    return im[0] - im[1]


def test_random_state_is_seeded_and_normalized():
    a, b = random_state(5), random_state(5, DEFAULT_SEED)
    np.testing.assert_array_equal(a, b)
    assert np.linalg.norm(a) == pytest.approx(1, abs=1e-15)
    assert not np.array_equal(a, random_state(5, seed=1))


def test_t0_returns_normalized_input(n2):
    psi0 = np.array([1.0, 2.0, 3.0j])
    out = evolve(n2, psi0, 0.0)
    np.testing.assert_allclose(out.ket, psi0 / np.linalg.norm(psi0))
    s = steady_state(n2).ket
    assert out.fidelity_to_steady == pytest.approx(abs(np.vdot(s, out.ket)) ** 2)


@pytest.mark.parametrize("t", [0.3, 2.0, 17.0])
def test_matches_matrix_exponential(n2, t):
    h = lmg_hamiltonian(2, 0.6)
    psi0 = random_state(3)
    ref = scipy.linalg.expm(-1j * h * t) @ psi0
    ref /= np.linalg.norm(ref)
    got = evolve(n2, psi0, t).ket
    assert abs(np.vdot(ref, got)) ** 2 == pytest.approx(1, abs=1e-12)


def test_uniform_state_converges(n2):
    psi0 = np.ones(3)
    fids = [evolve(n2, psi0, t).fidelity_to_steady for t in (0, 5, 20, 60)]
    assert np.all(np.diff(fids) > 0)
    assert fids[-1] > 1 - 1e-6


def test_large_times_do_not_overflow():
    sp = diagonalize(lmg_hamiltonian(12, 1.5))
    out = evolve(sp, random_state(13), 1e5)
    assert np.all(np.isfinite(out.ket))
    assert out.fidelity_to_steady == pytest.approx(1, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(t1=st.floats(0, 30), t2=st.floats(0, 30), seed=st.integers(0, 1000))
def test_semigroup(n2, t1, t2, seed):
    psi0 = random_state(3, seed)
    direct = evolve(n2, psi0, t1 + t2)
    step = evolve(n2, evolve(n2, psi0, t1).ket, t2)
    assert abs(direct.fidelity_to_steady - step.fidelity_to_steady) <= 1e-9
    assert np.linalg.norm(direct.ket) == pytest.approx(1, abs=1e-12)
    assert 0 <= direct.fidelity_to_steady <= 1


def test_decay_rate_is_twice_im_gap(n2):
    psi0 = random_state(3)
    ts = np.linspace(15, 60, 30)
    infid = [1 - evolve(n2, psi0, t).fidelity_to_steady for t in ts]
    slope = np.polyfit(ts, np.log(infid), 1)[0]
    assert -slope == pytest.approx(2 * im_gap(n2), rel=0.05)


def test_convergence_time_two_level_formula(n2):
    psi0 = random_state(3)
    st_ = steady_state(n2)
    w = n2.left @ psi0
    # the m=0 level is orthogonal to the steady ket and dominates late times
    m0 = int(np.argmin(np.abs(n2.values - (-0.3j))))
    delta = im_gap(n2)
    t_formula = math.log(99 * abs(w[m0]) ** 2 / abs(w[st_.index]) ** 2) / (2 * delta)
    t = convergence_time(n2, psi0, 0.99)
    # the leading-order ln-ratio ignores the faster level's cross term
    assert t == pytest.approx(t_formula, rel=1e-2)

    h = lmg_hamiltonian(2, 0.6)
    s = st_.ket / np.linalg.norm(st_.ket)

    def fid(t_):
        v = scipy.linalg.expm(-1j * h * t_) @ psi0
        return abs(np.vdot(s, v)) ** 2 / np.vdot(v, v).real - 0.99

    t_expm = scipy.optimize.brentq(fid, 1.0, 60.0, xtol=1e-12)
    assert t == pytest.approx(t_expm, rel=2e-6)
    assert evolve(n2, psi0, t).fidelity_to_steady >= 0.99
    assert evolve(n2, psi0, t * (1 - 1e-4)).fidelity_to_steady < 0.99


def test_convergence_time_target_zero(n2):
    assert convergence_time(n2, random_state(3), 0.0) == 0.0


def test_convergence_time_n40_self_consistent():
    sp = diagonalize(lmg_hamiltonian(40, 0.08))
    assert not sp.defective.any()
    psi0 = random_state(41)
    t = convergence_time(sp, psi0, 0.95)
    assert 0 < t < 1e6
    assert evolve(sp, psi0, t).fidelity_to_steady >= 0.95
    grid = np.linspace(0, t, 200)[:-1]
    assert max(evolve(sp, psi0, s).fidelity_to_steady for s in grid[-20:]) < 0.95


def test_hermitian_control_warns_and_never_converges():
    sp = diagonalize(lmg_hamiltonian(2, 0.0))
    psi0 = random_state(3)
    with pytest.warns(DegenerateSteadyStateWarning):
        fids = [evolve(sp, psi0, t).fidelity_to_steady for t in np.linspace(0, 200, 400)]
    # unitary evolution conserves every eigenbasis weight, so the fidelity stays put
    assert max(fids) < 0.99
    assert np.ptp(fids) <= 1e-12
    with pytest.raises(DegenerateSteadyStateError):
        convergence_time(sp, psi0, 0.99)


def test_zero_steady_weight_warns(n2):
    m0 = int(np.argmin(np.abs(n2.values - (-0.3j))))
    psi0 = n2.right[:, m0]
    with pytest.warns(ConvergenceWarning):
        evolve(n2, psi0, 10.0)
    with pytest.raises(ValueError):
        convergence_time(n2, psi0, 0.9)


def test_error_paths(n2):
    with pytest.raises(ValueError):
        evolve(eig(lmg_hamiltonian(2, 0.6)), np.ones(3), 1.0)  # not biorthonormalized
    with pytest.raises(DefectiveStateError):
        evolve(diagonalize(np.array([[0, 1], [0, 0]])), np.ones(2), 1.0)
    with pytest.raises(ValueError):
        evolve(n2, np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        evolve(n2, np.ones(4), 1.0)
    with pytest.raises(ValueError):
        evolve(n2, np.ones(3), -1.0)
    with pytest.raises(ValueError):
        convergence_time(n2, np.ones(3), 1.0)


def test_unreachable_target_hits_time_cap():
    # steady and next level share Im up to 1e-7: convergence needs t ~ 1e7
    h = np.diag([0.0, 1.0 - 1e-7j])
    sp = diagonalize(h)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(RuntimeError, match="not reached"):
            convergence_time(sp, np.array([1e-3, 1.0]), 0.999, t_cap=1e4)
