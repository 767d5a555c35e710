"""Steady-state criticality of non-Hermitian Hamiltonians H0 + i*gamma*H1."""

from .criticality import (
    EPResult,
    FitError,
    FitResult,
    NoExceptionalPointError,
    SweepRecord,
    estimate_p,
    fit_exponent,
    locate_ep,
    susceptibility,
    sweep,
)
from .dynamics import EvolvedState, convergence_time, evolve, random_state
from .eigensolver import EigenSolverError, Spectrum, biorthonormalize, diagonalize, eig
from .model import (
    CollectiveOps,
    ModelSpec,
    dicke_operators,
    generic_hamiltonian,
    lmg_hamiltonian,
    lmg_model,
    load_matrix_file,
    save_matrix_file,
)
from .steady import (
    DefectiveStateError,
    DegenerateSteadyStateError,
    ReducedDensityMatrix,
    SteadyState,
    expect_biorth,
    expect_right,
    hf_check,
    qfi,
    rdm,
    steady_state,
)

__version__ = "0.1.0"
