"""Numerical laboratory for a periodically modulated three-level lambda atom
coupled to two cavity modes: equilibrium and driven ground-state phase
diagrams from the dressed-state block spectrum, drive-renormalized model
parameters, and echo-based verification of the approximation chain."""

from .config import ConfigError, RunConfig, config_hash, parse_config
from .dynamics import (
    ATOMIC_PRESETS,
    EchoResult,
    EvolutionResult,
    HamiltonianSpec,
    HilbertSpace,
    StateVector,
    TermList,
    TruncationError,
    Variant,
    assemble_terms,
    build_space,
    coherent_state,
    evolve,
    loschmidt_echo,
    sector_states,
)
from .effective import (
    EffectiveParams,
    SidebandInfo,
    ValidityReport,
    ZeroCrossing,
    detunings,
    effective_for_drive,
    effective_parameters,
    find_sidebands,
    omega_zero_frequencies,
    validity_report,
)
from .params import DriveParams, SystemParams
from .specfun import bessel_j, bessel_j_any, bessel_j_row, sideband_cutoff
from .spectrum import (
    AxisSpec,
    DressedBlock,
    PhaseCategory,
    PhaseGrid,
    PhasePoint,
    block_ground_energy,
    block_matrix,
    categorize,
    driven_phase_grid,
    driven_phase_point,
    ground_energy_table,
    ground_occupations,
    ground_search,
    label_sequence,
    locate_boundary,
    phase_grid,
    sweep_grid,
)

__version__ = "0.1.0"
