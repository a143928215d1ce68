"""Deterministic simulator and analysis toolkit for compressed gossip consensus."""

from .graph import (
    Graph,
    build_complete,
    build_path,
    build_ring,
    is_connected,
    neighbors,
    parse_edge_list,
    serialize_edge_list,
)
from .mixing import (
    AugmentedMatrix,
    MixingMatrix,
    Spectrum,
    build_augmented,
    deviation_norm,
    lazy_mix,
    metropolis_hastings,
    power_contraction,
    spectrum,
)
from .compression import Compressor, CompressorBank, make_compressor
from .consensus import AlgorithmConfig, ConsensusState, DivergenceError, RunTrace, init
from .metrics import RateFit, fit_linear_rate, psi, scaling_exponent
from .theory import (
    TheoryBundle,
    gap_lower_bound,
    kappa_constants,
    momentum_sigma,
    omega_feasibility_bound,
    rate_lambda,
    rate_lambda_tilde,
    theory_bundle,
)
from .harness import ExperimentConfig, run_experiment, tune_gamma, verify_suite

__version__ = "0.1.0"
