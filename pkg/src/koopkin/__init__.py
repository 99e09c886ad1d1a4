"""Koopman models of reversible kinetics from short off-equilibrium trajectories."""

from .basis import (
    ConstantAugmentedBasis,
    DecorrelatedBasis,
    DecorrelationTransform,
    GaussianBasis,
    IndicatorBasis,
    LinearBasis,
    apply_decorrelation,
    evaluate,
    fit_decorrelation,
    make_gaussian_basis,
)
from .covariance import (
    CovarianceBundle,
    accumulate,
    direct_covariances,
    symmetrized_covariances,
    weighted_reversible_covariances,
)
from .errors import DataError, NumericalError
from .koopman import (
    KoopmanModel,
    SpectralDecomposition,
    WeightVector,
    bootstrap_timescales,
    equilibrium_expectation,
    estimate,
    estimate_nonreversible,
    estimate_reversible,
    estimate_symmetrized,
    implied_timescales,
    koopman_reweight,
    msm_transition_matrix,
    propagate,
    rayleigh_trace,
    spectral_decomposition,
    variational_eigs,
)
from .simulate import (
    GridChain,
    PotentialSpec,
    build_grid_chain,
    calibrated_chain,
    exact_covariances,
    potential_1d,
    potential_2d,
    reference_spectrum,
    simulate_chain,
)
from .trajectories import LagPairView, TrajectorySet, lag_pairs, load_trajectories, save_trajectories

__version__ = "0.1.0"
