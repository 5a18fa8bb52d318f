"""bospec: spectral solver and analytic oracle for Born-Oppenheimer
Hamiltonians -h^2 Lap_x - Lap_y + V(x, y)."""

from .analytic import (
    AnalyticSpectrum,
    bo_spectrum,
    counting_function,
    dilate_spectrum,
    enumerate_spectrum,
    hermite_function,
    oscillator_frequencies,
)
from .eigensolver import (
    MultiplicityCluster,
    SpectrumResult,
    cluster_multiplicities,
    convergence_study,
    lowest_eigenpairs,
)
from .grid import (
    Grid,
    GridOperator,
    assemble_hamiltonian,
    build_grid,
    export_matrix,
    matvec,
    restrict,
)
from .potential import (
    ConfinementProfile,
    Potential,
    confinement_profile,
    eval_potential,
    expression_potential,
    parse_potential,
    quadratic_potential,
)
from .probe import (
    CutoffFamily,
    ZhislinReport,
    commutator_decay,
    discreteness_certificate,
    essential_spectrum_probe,
    form_inequality_check,
    make_zhislin_vector,
)

__version__ = "0.1.0"
