"""Complex conditional probabilities on finite grids.

Kirkwood-Dirac distributions, weak values, the ergodicity law, wavefunction
reconstruction, free-particle propagator weak values, classical ergodic
densities and a post-selected weak-measurement simulator.
"""

__version__ = "0.1.0"

from .ccp import (  # noqa: E402
    CCPValue,
    ErgodicityReport,
    KDDistribution,
    Reconstruction,
    action_phase_decompose,
    ccp,
    chain_rule_compose,
    coarse_grain_ccp,
    ergodicity_check,
    ergodicity_residuals,
    kd_distribution,
    reconstruct_wavefunction,
    weak_value,
)
from .hilbert import (  # noqa: E402
    BasisKind,
    BasisSet,
    HilbertSpec,
    OperatorMatrix,
    StateVector,
    discretize_hamiltonian,
    eigensystem,
    make_momentum_basis,
    make_position_basis,
    projector,
    random_hermitian,
    random_state,
)
from .weak import (  # noqa: E402
    BiasScan,
    MeasurementRecord,
    WeakSimConfig,
    WeakValueEstimate,
    bias_scan,
    estimate_weak_value,
    simulate,
)
