"""Forecasting many-body quantum dynamics with delay-embedded regression.

The classical half evolves small transverse-field Ising chains exactly,
builds delay/monomial features from the state trajectory, and fits a
linear readout by Tikhonov-regularized least squares, either skipping far
ahead in one shot or rolling forward step by step. The quantum half
re-expresses the same pipeline as dense block encodings: oracle-built
feature matrices, singular-value inversion by bounded odd polynomials,
and circuits whose extracted blocks are checked against the classical
weights entry for entry.

Module map: `tfim` (dynamics), `ngrc` (features + regression), `tensorops`
(register plumbing), `blockenc` (encodings and their algebra), `qsvt`
(polynomial inversion), `circuits` (oracle-to-prediction pipeline),
`serialization`/`reporting`/`cli` (experiment driver).
"""

from .blockenc import BlockEncoding, CostEstimate, EncodingError, embed, verify_encoding
from .circuits import (
    CircuitDims,
    DataOracle,
    ancilla_accounting,
    build_u_f,
    build_u_lin,
    error_propagation_bound,
    extract_weight_block,
    feature_block_encoding,
    iterative_circuit,
    oracle_from_series,
    prediction_circuit,
    target_block_encoding,
)
from .ngrc import (
    FeatureConfig,
    FeatureMatrix,
    IllConditionedError,
    WeightModel,
    assemble_training,
    fidelity,
    pauli_expectation,
    predict_iterative,
    predict_skip,
    train_weights,
)
from .qsvt import build_inversion_polynomial, build_weight_encoding, regularized_pseudoinverse
from .tfim import (
    Hamiltonian,
    TimeSeries,
    build_tfim_hamiltonian,
    evolve_series,
    propagator,
    state_at,
)

__version__ = "0.1.0"

__all__ = [
    "BlockEncoding",
    "CircuitDims",
    "CostEstimate",
    "DataOracle",
    "EncodingError",
    "FeatureConfig",
    "FeatureMatrix",
    "Hamiltonian",
    "IllConditionedError",
    "TimeSeries",
    "WeightModel",
    "ancilla_accounting",
    "assemble_training",
    "build_inversion_polynomial",
    "build_tfim_hamiltonian",
    "build_u_f",
    "build_u_lin",
    "build_weight_encoding",
    "embed",
    "error_propagation_bound",
    "evolve_series",
    "extract_weight_block",
    "feature_block_encoding",
    "fidelity",
    "iterative_circuit",
    "oracle_from_series",
    "pauli_expectation",
    "predict_iterative",
    "predict_skip",
    "prediction_circuit",
    "propagator",
    "regularized_pseudoinverse",
    "state_at",
    "target_block_encoding",
    "train_weights",
    "verify_encoding",
    "__version__",
]
