from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhcrit.eigensolver import diagonalize
from nhcrit.model import dicke_operators, lmg_hamiltonian, lmg_model
from nhcrit.steady import (
    DefectiveStateError,
    DegenerateSteadyStateError,
    SteadyState,
    SteadyStateError,
    expect_biorth,
    expect_right,
    hf_check,
    pauli_string,
    qfi,
    rdm,
    solve_steady,
    steady_state,
)
from oracles import explicit_rdm, n2_closed_form

GAMMA_C_N40 = 0.035289252292738736


def state_from_ket(ket):
    ket = np.asarray(ket, dtype=complex)
    ket = ket / np.linalg.norm(ket)
    return SteadyState(index=0, energy=0j, ket=ket, bra=ket.conj(), degenerate=False,
                       tied_indices=(0,), defective=False)


# --- closed forms at N=2 ------------------------------------------------------


def test_n2_degenerate_tie_picks_m0():
    spectrum = diagonalize(lmg_hamiltonian(2, 0.3))
    st_ = steady_state(spectrum)
    assert st_.degenerate
    assert len(st_.tied_indices) == 3
    assert st_.energy.real == 0
    ops = dicke_operators(2)
    assert expect_right(st_, ops.jz) / 2 == pytest.approx(0, abs=1e-15)


def test_n2_unique_steady_state_closed_form():
    g = 0.6
    cf = n2_closed_form(g)
    _, st_ = solve_steady(lmg_model(2), g)
    assert not st_.degenerate
    assert st_.energy == pytest.approx(cf["energy"], abs=1e-14)
    assert st_.energy.imag == pytest.approx(-0.13416876048223, abs=1e-12)
    ops = dicke_operators(2)
    assert expect_right(st_, ops.jz) / 2 == pytest.approx(cf["sz"], abs=1e-13)
    assert expect_right(st_, ops.jz) / 2 == pytest.approx(-0.27638539919628313, abs=1e-13)
    assert expect_biorth(st_, ops.jz) == pytest.approx(cf["jz_biorth"], abs=1e-12)
    assert expect_biorth(st_, ops.jz) == pytest.approx(-1.8090680674665833, abs=1e-12)
    assert st_.h1_density == pytest.approx(cf["h1b"], abs=1e-12)
    assert st_.h1_density == pytest.approx(0.40453403373329155, abs=1e-12)


def test_n2_at_coalescence_sz_vanishes():
    _, st_ = solve_steady(lmg_model(2), 0.5)
    assert expect_right(st_, dicke_operators(2).jz) == pytest.approx(0, abs=1e-7)


@pytest.mark.parametrize("gamma", [0.2, 1.0, 3.0])
def test_single_spin_steady_state_is_down(gamma):
    _, st_ = solve_steady(lmg_model(1), gamma)
    assert st_.energy == 0
    assert not st_.degenerate
    assert abs(st_.ket[0]) == pytest.approx(1)
    assert qfi(st_, dicke_operators(1)) == pytest.approx(2 / 3, abs=1e-15)
    np.testing.assert_allclose(rdm(st_, 1, 1).matrix, np.diag([0, 1]), atol=1e-15)


def test_identity_expectations():
    _, st_ = solve_steady(lmg_model(6), 1.1)
    assert expect_right(st_, np.eye(7)) == pytest.approx(1, abs=1e-14)
    assert expect_biorth(st_, np.eye(7)) == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("n", [3, 8])
def test_hermitian_limit_conventions_agree(n):
    spectrum, st_ = solve_steady(lmg_model(n), 0.0)
    ops = dicke_operators(n)
    for o in (ops.jx, ops.jz, ops.jx @ ops.jx + ops.jz):
        assert expect_biorth(st_, o) == pytest.approx(expect_right(st_, o), abs=1e-12)


def test_expect_right_rejects_non_hermitian():
    _, st_ = solve_steady(lmg_model(2), 0.6)
    with pytest.raises(ValueError):
        expect_right(st_, dicke_operators(2).jplus)
    with pytest.raises(ValueError):
        expect_right(st_, np.eye(4))


def test_expect_biorth_defective_state_is_reported():
    spectrum = diagonalize(np.array([[0, 1], [0, 0]]) + np.diag([1j, 0]))
    st_ = steady_state(spectrum)
    bad = SteadyState(index=st_.index, energy=st_.energy, ket=st_.ket, bra=st_.bra,
                      degenerate=False, tied_indices=(0,), defective=True)
    with pytest.raises(DefectiveStateError, match="exceptional point"):
        expect_biorth(bad, np.eye(2))


def test_steady_state_error_paths():
    with pytest.raises(DefectiveStateError):
        steady_state(diagonalize(np.array([[0, 1], [0, 0]])))
    empty = diagonalize(np.eye(1))
    empty = replace(empty, values=np.array([], dtype=complex))
    with pytest.raises(SteadyStateError):
        steady_state(empty)


def test_tie_break_is_deterministic():
    spectrum = diagonalize(lmg_hamiltonian(10, 0.0))
    picks = {steady_state(spectrum).index for _ in range(5)}
    assert len(picks) == 1


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 30), gamma=st.floats(0.0, 3.0))
def test_steady_state_invariants(n, gamma):
    spectrum = diagonalize(lmg_hamiltonian(n, gamma))
    st_ = steady_state(spectrum)
    tol = 1e-9 * np.abs(spectrum.values).max()
    assert np.all(st_.energy.imag >= spectrum.values.imag - tol)
    n_top = np.sum(spectrum.values.imag >= spectrum.values.imag.max() - tol)
    assert st_.degenerate == (n_top > 1)
    assert np.linalg.norm(st_.ket) == pytest.approx(1, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12))
def test_expect_right_within_observable_range(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n + 1, n + 1)) + 1j * rng.normal(size=(n + 1, n + 1))
    o = a + a.conj().T
    st_ = state_from_ket(rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1))
    lo, hi = np.linalg.eigvalsh(o)[[0, -1]]
    val = expect_right(st_, o)
    assert lo - 1e-12 * abs(lo) <= val <= hi + 1e-12 * abs(hi)


# --- Hellmann-Feynman -------------------------------------------------------


def test_hf_n2_converges_quadratically():
    spec = lmg_model(2)
    r1 = hf_check(spec, 0.6, step=1e-3)
    r2 = hf_check(spec, 0.6, step=5e-4)
    assert r1 / r2 == pytest.approx(4, abs=0.1)
    assert hf_check(spec, 0.6) <= 1e-8


def test_hf_n40_richardson():
    spec = lmg_model(40)
    r1 = hf_check(spec, 0.5, step=1e-3)
    r2 = hf_check(spec, 0.5, step=5e-4)
    assert r1 / r2 == pytest.approx(4, abs=0.5)


def test_hf_degenerate_point_errors():
    with pytest.raises(DegenerateSteadyStateError):
        hf_check(lmg_model(4), 0.0)


def test_hf_rejects_bad_step():
    with pytest.raises(ValueError):
        hf_check(lmg_model(2), 0.6, step=0.0)


def test_h1_density_injective_above_critical_point():
    spec = lmg_model(40)
    vals = []
    for g in np.linspace(GAMMA_C_N40 + 0.01, 2.0, 50):
        _, st_ = solve_steady(spec, g)
        assert not st_.degenerate and not st_.defective
        vals.append(st_.h1_density)
    vals = np.array(vals)
    d = np.abs(vals[:, None] - vals[None, :]) + np.eye(50)
    assert d.min() > 1e-8


# --- reduced density matrices -------------------------------------------------


@pytest.mark.parametrize("n", range(2, 9))
def test_rdm_matches_explicit_partial_trace(n):
    _, st_ = solve_steady(lmg_model(n), 0.9)
    for k in (1, 2):
        got = rdm(st_, n, k).matrix
        assert np.abs(got - explicit_rdm(st_.ket, k)).max() <= 1e-12


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_dicke_state_single_spin_marginal(n):
    for u in range(n + 1):
        m = u - n / 2
        st_ = state_from_ket(np.eye(n + 1)[u])
        np.testing.assert_allclose(rdm(st_, n, 1).matrix,
                                   np.diag([0.5 + m / n, 0.5 - m / n]), atol=1e-14)
        np.testing.assert_allclose(explicit_rdm(np.eye(n + 1)[u], 1),
                                   np.diag([0.5 + m / n, 0.5 - m / n]), atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 40))
def test_rdm_invariants(seed, n):
    rng = np.random.default_rng(seed)
    st_ = state_from_ket(rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1))
    r1, r2 = rdm(st_, n, 1), rdm(st_, n, 2)
    for r in (r1, r2):
        assert abs(np.trace(r.matrix) - 1) <= 1e-12
        assert np.abs(r.matrix - r.matrix.conj().T).max() <= 1e-12
        assert np.linalg.eigvalsh(r.matrix).min() >= -1e-10
        assert np.abs(r.from_coeffs() - r.matrix).max() <= 1e-12
    traced = np.einsum("ajbj->ab", r2.matrix.reshape(2, 2, 2, 2))
    assert np.abs(traced - r1.matrix).max() <= 1e-12
    # single-site <sigma_z> equals 2<J_z>/N
    ops = dicke_operators(n)
    sz = np.trace(r1.matrix @ pauli_string("z")).real
    assert sz == pytest.approx(2 * expect_right(st_, ops.jz) / n, abs=1e-12)


def test_rdm_rejects_bad_k():
    _, st_ = solve_steady(lmg_model(3), 1.0)
    for k in (0, 3):
        with pytest.raises(ValueError):
            rdm(st_, 3, k)
    _, st1 = solve_steady(lmg_model(1), 1.0)
    with pytest.raises(ValueError):
        rdm(st1, 1, 2)


# --- quantum Fisher information ------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 7, 40])
def test_qfi_coherent_state(n):
    st_ = state_from_ket(np.eye(n + 1)[0])
    assert qfi(st_, dicke_operators(n)) == pytest.approx(2 / (3 * n), rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 30))
def test_qfi_from_rdm_moments(seed, n):
    rng = np.random.default_rng(seed)
    st_ = state_from_ket(rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1))
    c1 = rdm(st_, n, 1).pauli_coeffs
    c2 = rdm(st_, n, 2).pauli_coeffs
    total = 0.0
    for a in "xyz":
        mean = n / 2 * 2 * c1[a].real
        second = n / 4 + n * (n - 1) / 4 * 4 * c2[a + a].real
        total += second - mean**2
    assert qfi(st_, dicke_operators(n)) == pytest.approx(4 * total / (3 * n * n), abs=1e-12)


def test_qfi_shape_of_n40_sweep():
    spec, ops = lmg_model(40), dicke_operators(40)
    below = [qfi(solve_steady(spec, g)[1], ops) for g in np.linspace(0.002, 0.03, 8)]
    above = [qfi(solve_steady(spec, g)[1], ops) for g in np.linspace(0.05, 2.0, 20)]
    assert np.ptp(below) <= 1e-10
    assert max(above) < below[0]
    assert np.all(np.diff(above) < 0)
