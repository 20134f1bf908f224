"""Low-rank ADI solvers for Lyapunov, Sylvester and Riccati equations.

The unified engine (:mod:`uadi.uadi`) solves up to seventeen matrix
equations simultaneously from two shifted sparse solves per iteration;
:mod:`uadi.classic` provides the standalone reference iterations,
:mod:`uadi.shiftgen` the self-generating shift strategies and
:mod:`uadi.mor` reduced-order model assembly on top of the engine state.
"""

from . import errors
from .classic import LowRankSolution, ResidualFactor, cf_adi, fadi, ldl_residual, radi
from .linalg import (
    FactorizationCache,
    ShiftedFactorization,
    gram_norm2,
    shifted_solve,
    small_eig,
    solve_small_lyapunov,
    solve_small_sylvester,
)
from .mor import ReducedModel, bt_from_factors, bt_square_root, build_rom, interpolation_check
from .realify import ShiftUnit, as_units
from .shiftgen import (
    DominanceRanking,
    PetrovBtShiftOracle,
    ProjectionShiftOracle,
    StaticShiftOracle,
    SubspaceShiftOracle,
    SylvesterAlternatingOracle,
    next_shift_petrov_bt,
    next_shift_subspace,
    next_shifts_projection1,
    next_shifts_projection2,
    rank_dominance,
    sanitize_shift,
)
from .systems import (
    EquationParams,
    StateSpaceSystem,
    illustrative_pair,
    load_system,
    penzl_triple_peak,
    random_stable_system,
    rlc_ladder,
    save_system,
    transfer_eval,
)
from .uadi import (
    ALL_TAGS,
    EquationSelection,
    UadiState,
    extract_solution,
    residual_norm,
    uadi_init,
    uadi_step,
)

__version__ = "0.1.0"
