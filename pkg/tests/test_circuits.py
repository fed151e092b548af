"""Circuit constructions: oracles, encoders, weight extraction, forecasting."""

import json

import numpy as np
import pytest

from conftest import random_series, random_state
from statecast.blockenc import BlockEncoding, EncodingError, apply_to_state, embed, verify_encoding
from statecast.circuits import (
    CircuitDims,
    ancilla_accounting,
    build_u_f,
    build_u_lin,
    circuit_description,
    error_propagation_bound,
    extract_weight_block,
    feature_block_encoding,
    feature_encoding_from_series,
    feature_pipeline_unitary,
    iterative_circuit,
    oracle_from_series,
    prediction_circuit,
    target_block_encoding,
    target_pipeline_unitary,
)
from statecast.ngrc import (
    FeatureConfig,
    aligned_targets,
    assemble_training,
    fidelity,
    padded_feature_vector,
    predict_iterative,
    predict_skip,
    train_weights,
)
from statecast.qsvt import build_weight_encoding
from statecast.tfim import TimeSeries


def _basis(dim: int, i: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[i] = 1.0
    return v


def _padded_of(series, k):
    o = np.concatenate([series[k], series[k - 1]])
    return padded_feature_vector(o / np.linalg.norm(o))


TAU = 2
DELTA_W = 1e-2


@pytest.fixture(scope="module")
def toy():
    """d = 1 toy system: 4 training columns, 2 index qubits, tau = 2 targets."""
    dims = CircuitDims(d=1, t=2, T=4)
    series = random_series(np.random.default_rng(7), 1 + dims.T + TAU, 2)
    cfg = FeatureConfig(m=2, p=2, delta=1, tau=TAU, lam=0.1)
    trimmed, targets = aligned_targets(series, cfg)
    X, Y = assemble_training(trimmed, targets, cfg, layout="padded")
    model = train_weights(X, Y, cfg.lam, config=cfg)
    return dims, series, cfg, model


@pytest.fixture(scope="module")
def toy_weights(toy):
    """Quantum-route weight encoding for the toy system."""
    dims, series, cfg, model = toy
    be_X = feature_encoding_from_series(series, dims)
    o_tau = oracle_from_series(series, TAU, dims.T, t=dims.t, k0=1)
    be_Y = target_block_encoding(o_tau, dims, DELTA_W * 1e-4)
    be_W, cost = build_weight_encoding(be_X, be_Y, cfg.lam, DELTA_W, dims)
    return be_X, be_Y, be_W, cost


# ---------------------------------------------------------------------------
# data oracles


def test_oracle_constant_basis_series_is_identity():
    states = np.tile(_basis(2, 0), (5, 1))
    series = TimeSeries(states=states, dt=0.1, burn_in=0)
    oracle = oracle_from_series(series, 0, 4, t=2)
    assert np.array_equal(oracle.unitary, np.eye(8))


def test_oracle_single_column():
    series = random_series(np.random.default_rng(0), 3, 2)
    oracle = oracle_from_series(series, 0, 1)
    assert oracle.n_index == 1
    out = oracle.unitary @ _basis(4, 0)
    assert np.allclose(out, np.kron(series[0], _basis(2, 0)), atol=1e-12)


@pytest.mark.parametrize("seed", [1, 2])
def test_oracle_columns_match_series(seed):
    series = random_series(np.random.default_rng(seed), 6, 4)
    oracle = oracle_from_series(series, 0, 4, t=2)
    for k in range(4):
        out = oracle.unitary @ np.kron(_basis(4, 0), _basis(4, k))
        assert np.allclose(out, np.kron(series[k], _basis(4, k)), atol=1e-12)
    U = oracle.unitary
    assert np.linalg.norm(U.conj().T @ U - np.eye(16), 2) < 1e-10


def test_oracle_identity_beyond_specified_columns():
    series = random_series(np.random.default_rng(3), 6, 2)
    oracle = oracle_from_series(series, 0, 4, t=3)
    for k in range(4, 8):
        v = np.kron(_basis(2, 0), _basis(8, k))
        assert np.allclose(oracle.unitary @ v, v, atol=1e-14)


def test_oracle_offset_window():
    series = random_series(np.random.default_rng(4), 6, 2)
    oracle = oracle_from_series(series, -1, 3, t=2, k0=1)
    for k in range(3):
        assert np.array_equal(oracle.state(k), series[k])


def test_oracle_bounds_and_validation():
    series = random_series(np.random.default_rng(5), 4, 2)
    with pytest.raises(ValueError, match="outside"):
        oracle_from_series(series, -1, 2, k0=0)
    with pytest.raises(ValueError, match="outside"):
        oracle_from_series(series, 3, 2, k0=0)
    with pytest.raises(ValueError, match="capacity"):
        oracle_from_series(series, 0, 4, t=1)
    with pytest.raises(ValueError, match="T >= 1"):
        oracle_from_series(series, 0, 0)
    oracle = oracle_from_series(series, 0, 2)
    with pytest.raises(IndexError):
        oracle.state(2)
    oracle.tick(3)
    assert oracle.call_counter == 3


# ---------------------------------------------------------------------------
# delay encoder


def test_u_lin_single_delay_copies_the_oracle():
    series = random_series(np.random.default_rng(6), 4, 2)
    oracle = oracle_from_series(series, 0, 4, t=2)
    U = build_u_lin([oracle], 1)
    assert np.array_equal(U, oracle.unitary)
    assert oracle.call_counter == 1


def test_u_lin_two_branch_amplitudes(toy):
    dims, series, _, _ = toy
    o0 = oracle_from_series(series, 0, dims.T, t=dims.t, k0=1)
    o1 = oracle_from_series(series, -1, dims.T, t=dims.t, k0=1)
    U = build_u_lin([o0, o1], 2)
    for k in range(dims.T):
        inp = np.kron(_basis(2, 0), np.kron(_basis(2, 0), _basis(4, k)))
        expected = (
            np.kron(_basis(2, 0), np.kron(series[1 + k], _basis(4, k)))
            + np.kron(_basis(2, 1), np.kron(series[k], _basis(4, k)))
        ) / np.sqrt(2.0)
        assert np.allclose(U @ inp, expected, atol=1e-12)


def test_u_lin_validation():
    series = random_series(np.random.default_rng(8), 4, 2)
    o = oracle_from_series(series, 0, 2)
    with pytest.raises(ValueError, match="exactly m oracles"):
        build_u_lin([o], 2)
    with pytest.raises(ValueError, match="power of two"):
        build_u_lin([o, o, o], 3)
    other = oracle_from_series(random_series(np.random.default_rng(8), 4, 4), 0, 2)
    with pytest.raises(ValueError, match="mismatched"):
        build_u_lin([o, other], 2)


# ---------------------------------------------------------------------------
# feature encoder


def test_u_f_degree_one_adds_a_control_in_superposition():
    series = random_series(np.random.default_rng(9), 4, 2)
    oracle = oracle_from_series(series, 0, 4, t=2)
    u_lin = build_u_lin([oracle], 1)
    u_f = build_u_f(u_lin, 1, 2)
    assert u_f.shape == (16, 16)
    for j in (0, 5):
        v = _basis(8, j)
        expected = np.kron(np.array([1.0, 1.0]) / np.sqrt(2.0), u_lin @ v)
        assert np.allclose(u_f @ np.kron(_basis(2, 0), v), expected, atol=1e-12)


def test_u_f_columns_are_padded_feature_states(toy):
    dims, series, _, _ = toy
    o0 = oracle_from_series(series, 0, dims.T, t=dims.t, k0=1)
    o1 = oracle_from_series(series, -1, dims.T, t=dims.t, k0=1)
    u_f = build_u_f(build_u_lin([o0, o1], 2), 2, dims.t, oracles=[o0, o1])
    for k in range(dims.T):
        col = (u_f @ _basis(u_f.shape[0], k)).reshape(dims.feature_dim, 2**dims.t)
        x = _padded_of(series, 1 + k)
        assert np.allclose(col[:, k], x, atol=1e-12)
        # the column factors as |x_k>|k>: no weight on other index values
        assert np.linalg.norm(col) ** 2 - np.linalg.norm(col[:, k]) ** 2 < 1e-12


def test_u_f_oracle_tally_is_m_times_p(toy):
    dims, series, _, _ = toy
    o0 = oracle_from_series(series, 0, dims.T, t=dims.t, k0=1)
    o1 = oracle_from_series(series, -1, dims.T, t=dims.t, k0=1)
    build_u_f(build_u_lin([o0, o1], 2), 2, dims.t, oracles=[o0, o1])
    assert o0.call_counter == 2 and o1.call_counter == 2
    assert o0.call_counter + o1.call_counter == 4  # m * p


def test_u_f_validation():
    series = random_series(np.random.default_rng(10), 4, 2)
    u_lin = build_u_lin([oracle_from_series(series, 0, 4, t=2)], 1)
    with pytest.raises(ValueError, match="p must be"):
        build_u_f(u_lin, 0, 2)
    with pytest.raises(ValueError, match="no delay block"):
        build_u_f(u_lin, 2, 3)
    with pytest.raises(ValueError, match="square"):
        build_u_f(np.ones((4, 8)), 2, 1)
    with pytest.raises(ValueError, match="dense cap"):
        build_u_f(np.eye(16, dtype=complex), 5, 1)


# ---------------------------------------------------------------------------
# feature block encoding


def test_feature_encoding_parameters_and_columns(toy):
    dims, series, _, _ = toy
    o0 = oracle_from_series(series, 0, dims.T, t=dims.t, k0=1)
    o1 = oracle_from_series(series, -1, dims.T, t=dims.t, k0=1)
    u_f = build_u_f(build_u_lin([o0, o1], 2), 2, dims.t, oracles=[o0, o1])
    be = feature_block_encoding(u_f, dims)
    assert be.alpha == pytest.approx(2.0, rel=1e-15)  # sqrt(T)
    assert be.n_ancilla == 5  # max(2d+3, t)
    assert be.epsilon == 0.0
    assert be.block_dims == (32, 4)
    X = np.stack([_padded_of(series, 1 + k) for k in range(dims.T)], axis=1)
    assert np.allclose(be.block, X, atol=1e-12)
    assert verify_encoding(be, X) < 1e-9
    assert be.cost.formula_id == "feature-encoding"
    assert be.cost.scalar_factors["m"] == 2.0
    assert be.cost.scalar_factors["p"] == 2.0


def test_feature_encoding_routes_agree(toy):
    dims, series, _, _ = toy
    o0 = oracle_from_series(series, 0, dims.T, t=dims.t, k0=1)
    o1 = oracle_from_series(series, -1, dims.T, t=dims.t, k0=1)
    u_f = build_u_f(build_u_lin([o0, o1], 2), 2, dims.t, oracles=[o0, o1])
    via_encoder = feature_block_encoding(u_f, dims)
    via_columns = feature_encoding_from_series(series, dims)
    assert np.allclose(via_encoder.corner, via_columns.corner, atol=1e-12)
    assert via_encoder.alpha == via_columns.alpha
    assert via_encoder.n_ancilla == via_columns.n_ancilla


def test_feature_pipeline_corner_matches_encoding(toy):
    dims, series, _, _ = toy
    o0 = oracle_from_series(series, 0, dims.T, t=dims.t, k0=1)
    o1 = oracle_from_series(series, -1, dims.T, t=dims.t, k0=1)
    u_f = build_u_f(build_u_lin([o0, o1], 2), 2, dims.t, oracles=[o0, o1])
    be = feature_block_encoding(u_f, dims)
    pipeline = feature_pipeline_unitary(u_f, dims)
    S = be.s_dim
    assert np.allclose(pipeline[:S, :S], be.corner, atol=1e-12)
    assert np.linalg.norm(pipeline @ pipeline.conj().T - np.eye(S * S), 2) < 1e-10


def test_feature_encoding_constant_series_norm():
    # identical unit feature columns: rank one, ||X|| = sqrt(T) = sqrt(2)
    dims = CircuitDims(d=1, t=1, T=2)
    s = random_state(np.random.default_rng(11), 2)
    series = TimeSeries(states=np.tile(s, (4, 1)), dt=0.1, burn_in=0)
    be = feature_encoding_from_series(series, dims)
    sing = np.linalg.svd(be.block, compute_uv=False)
    assert sing[0] == pytest.approx(np.sqrt(2.0), rel=1e-12)
    assert sing[1] < 1e-12


def test_feature_encoding_requires_full_index_register(toy):
    _, series, _, _ = toy
    dims = CircuitDims(d=1, t=2, T=3)
    with pytest.raises(EncodingError, match="T = 2\\^t"):
        feature_encoding_from_series(series, dims)


def test_feature_encoding_shape_guard(toy):
    dims, _, _, _ = toy
    with pytest.raises(EncodingError, match="does not match"):
        feature_block_encoding(np.eye(64, dtype=complex), dims)


def test_feature_encoding_rejects_entangled_index(toy):
    dims, series, _, _ = toy
    o0 = oracle_from_series(series, 0, dims.T, t=dims.t, k0=1)
    o1 = oracle_from_series(series, -1, dims.T, t=dims.t, k0=1)
    u_f = build_u_f(build_u_lin([o0, o1], 2), 2, dims.t, oracles=[o0, o1])
    tampered = u_f[:, :].copy()
    tampered[:, [0, 1]] = tampered[:, [1, 0]]  # column 0 now carries index 1
    with pytest.raises(EncodingError, match="does not factor"):
        feature_block_encoding(tampered, dims)


def test_feature_encoding_from_series_bounds(toy):
    dims, series, _, _ = toy
    with pytest.raises(ValueError, match="outside"):
        feature_encoding_from_series(series, dims, k0=0)
    with pytest.raises(ValueError, match="outside"):
        feature_encoding_from_series(series, dims, k0=20)
    wide = random_series(np.random.default_rng(12), 8, 4)
    with pytest.raises(EncodingError, match="does not match D"):
        feature_encoding_from_series(wide, dims)


# ---------------------------------------------------------------------------
# target block encoding


def test_target_encoding_parameters(toy):
    dims, series, _, _ = toy
    o_tau = oracle_from_series(series, TAU, dims.T, t=dims.t, k0=1)
    be = target_block_encoding(o_tau, dims, 1e-6)
    Y = np.stack([series[1 + k + TAU] for k in range(dims.T)], axis=1)
    assert be.alpha == pytest.approx(np.sqrt(2.0) * np.linalg.norm(Y, 2), rel=1e-12)
    assert be.n_ancilla == 6  # max(2d+3, t) + 1
    assert be.epsilon == 1e-6
    Ypad = np.zeros((2 * 32, 2 * 32), dtype=complex)
    Ypad[:2, : dims.T] = Y
    assert verify_encoding(be, Ypad) <= be.epsilon + 1e-9


def test_target_pipeline_corner_matches(toy):
    dims, series, _, _ = toy
    o_tau = oracle_from_series(series, TAU, dims.T, t=dims.t, k0=1)
    pipeline = target_pipeline_unitary(o_tau, dims)
    n = pipeline.shape[0]
    assert np.linalg.norm(pipeline @ pipeline.conj().T - np.eye(n), 2) < 1e-10
    S = 2**dims.enc_ancillas
    corner = pipeline[: 2 * S, : 2 * S]
    expected = np.zeros((2 * S, 2 * S), dtype=complex)
    for k in range(dims.T):
        expected[:2, k] = series[1 + k + TAU] / np.sqrt(dims.T)
    assert np.allclose(corner, expected, atol=1e-12)
    # the doubled half of the system contributes nothing
    assert np.all(np.abs(corner[:, S:]) < 1e-14)


def test_target_encoding_validation(toy):
    dims, series, _, _ = toy
    wide = random_series(np.random.default_rng(13), 8, 4)
    wrong_d = oracle_from_series(wide, 0, dims.T, t=dims.t)
    with pytest.raises(EncodingError, match="need d"):
        target_block_encoding(wrong_d, dims, 1e-6)
    short = oracle_from_series(series, TAU, 2, t=dims.t, k0=1)
    with pytest.raises(EncodingError, match="columns"):
        target_block_encoding(short, dims, 1e-6)
    wrong_t = oracle_from_series(series, TAU, dims.T, t=3, k0=1)
    with pytest.raises(EncodingError, match="does not match dims"):
        target_pipeline_unitary(wrong_t, dims)


# ---------------------------------------------------------------------------
# weight-matrix encoding


def test_weight_encoding_parameters(toy, toy_weights):
    dims, _, cfg, model = toy
    _, _, be_W, cost = toy_weights
    assert be_W.n_ancilla == dims.w == 12
    assert be_W.epsilon <= DELTA_W
    sf = cost.scalar_factors
    expected_alpha = (
        2.0 * np.sqrt(2.0) * sf["kappa"] * sf["norm_Y"]
        / (sf["norm_X"] + np.sqrt(sf["lambda"]))
    )
    assert be_W.alpha == pytest.approx(expected_alpha, rel=1e-12)
    assert cost.formula_id == "weight-encoding"
    assert sf["lambda"] == cfg.lam
    assert sf["T"] == float(dims.T)


def test_weight_extraction_matches_classical_regression(toy, toy_weights):
    dims, _, _, model = toy
    _, _, be_W, _ = toy_weights
    W_hat = extract_weight_block(be_W, dims)
    assert W_hat.shape == (2, 32)
    assert np.linalg.norm(W_hat - model.W, 2) <= DELTA_W


def test_weight_encoding_contract_validation(toy, toy_weights):
    dims, series, cfg, _ = toy
    be_X, be_Y, _, _ = toy_weights
    bad_anc = BlockEncoding(be_X.corner, be_X.alpha, 4, 0.0, be_X.block_dims)
    with pytest.raises(EncodingError, match="max\\(2d\\+3, t\\)"):
        build_weight_encoding(bad_anc, be_Y, cfg.lam, DELTA_W, dims)
    lossy = BlockEncoding(be_X.corner, be_X.alpha, 5, 1e-6, be_X.block_dims)
    with pytest.raises(EncodingError, match="exact"):
        build_weight_encoding(lossy, be_Y, cfg.lam, DELTA_W, dims)
    off_scale = BlockEncoding(be_X.corner / 2.0, 2 * be_X.alpha, 5, 0.0, be_X.block_dims)
    with pytest.raises(EncodingError, match="sqrt\\(T\\)"):
        build_weight_encoding(off_scale, be_Y, cfg.lam, DELTA_W, dims)
    bad_y = BlockEncoding(be_Y.corner, be_Y.alpha, 5, be_Y.epsilon, be_Y.block_dims)
    with pytest.raises(EncodingError, match="target encoding"):
        build_weight_encoding(be_X, bad_y, cfg.lam, DELTA_W, dims)
    sloppy_y = BlockEncoding(be_Y.corner, be_Y.alpha, 6, 0.9, be_Y.block_dims)
    with pytest.raises(EncodingError, match="delta_W/\\(4 kappa\\)"):
        build_weight_encoding(be_X, sloppy_y, cfg.lam, DELTA_W, dims)
    with pytest.raises(EncodingError, match="inversion budget"):
        build_weight_encoding(be_X, be_Y, cfg.lam, DELTA_W, dims, delta_X=0.9)


# ---------------------------------------------------------------------------
# prediction circuit


def _forecast_oracles(series, k0=5, K=2):
    cur = oracle_from_series(series, 0, K, t=1, k0=k0)
    prev = oracle_from_series(series, -1, K, t=1, k0=k0)
    return [cur, prev]


def test_prediction_identity_readout(toy):
    dims, series, _, _ = toy
    W0 = np.zeros((2, 32), dtype=complex)
    W0[:, :2] = np.eye(2)
    be = embed(W0, 1.0, pad_to=32)
    oracles = _forecast_oracles(series)
    states, probs, _ = prediction_circuit(be, oracles, dims, 0.5)
    for k in range(2):
        x = _padded_of(series, 5 + k)
        head = x[:2]
        assert np.allclose(states[k], head / np.linalg.norm(head), atol=1e-12)
        assert probs[k] == pytest.approx(np.linalg.norm(head) ** 2, rel=1e-12)


def test_prediction_matches_classical_skip(toy):
    dims, series, _, model = toy
    be = embed(model.W, np.sqrt(2.0) * model.norm_W, pad_to=32)
    states, probs, _ = prediction_circuit(be, _forecast_oracles(series), dims, 1e-6)
    for k in range(2):
        x = _padded_of(series, 5 + k)
        ref = predict_skip(model, x)
        assert fidelity(states[k], ref.state) >= 1.0 - 1e-12
        expected = np.linalg.norm(ref.raw) ** 2 / be.alpha**2
        assert probs[k] == pytest.approx(expected, rel=1e-8)


def test_prediction_through_quantum_weights(toy, toy_weights):
    dims, series, _, model = toy
    _, _, be_W, _ = toy_weights
    delta = 5e-2
    states, probs, cost = prediction_circuit(be_W, _forecast_oracles(series), dims, delta)
    for k in range(2):
        x = _padded_of(series, 5 + k)
        ref = predict_skip(model, x)
        assert fidelity(states[k], ref.state) >= 1.0 - delta
    assert cost.formula_id == "prediction-phase"
    assert np.all(probs > 0.0)


def test_prediction_charges_oracle_calls(toy):
    dims, series, _, model = toy
    be = embed(model.W, np.sqrt(2.0) * model.norm_W, pad_to=32)
    oracles = _forecast_oracles(series)
    prediction_circuit(be, oracles, dims, 1e-6)
    # p = 2 calls per forecast index per oracle
    assert oracles[0].call_counter == 4
    assert oracles[1].call_counter == 4


def test_prediction_cost_composes_from_recorded_factors(toy, toy_weights):
    dims, series, _, _ = toy
    _, _, be_W, w_cost = toy_weights
    delta = 5e-2
    _, _, cost = prediction_circuit(be_W, _forecast_oracles(series), dims, delta)
    sw = np.linalg.svd(be_W.block, compute_uv=False)
    norm_W = float(sw[0])
    kappa_W = float(sw[0] / sw[sw > 1e-12 * sw[0]][-1])
    sf = w_cost.scalar_factors
    lead = (sf["kappa"] * kappa_W / (sf["norm_X"] + np.sqrt(sf["lambda"]))) * (
        sf["norm_Y"] / norm_W
    )
    log_term = max(1.0, np.log(kappa_W / delta))
    assert cost.multiplier == pytest.approx(
        lead * log_term * be_W.cost.multiplier + kappa_W, rel=1e-12
    )
    assert cost.scalar_factors["kappa_W"] == pytest.approx(kappa_W, rel=1e-12)


def test_prediction_validation(toy, toy_weights):
    dims, series, _, model = toy
    _, _, be_W, _ = toy_weights
    be = embed(model.W, np.sqrt(2.0) * model.norm_W, pad_to=32)
    oracles = _forecast_oracles(series)
    with pytest.raises(EncodingError, match="delta"):
        prediction_circuit(be, oracles, dims, 0.0)
    with pytest.raises(EncodingError, match="offsets 0 and -delta"):
        prediction_circuit(be, oracles[:1], dims, 0.5)
    uneven = [oracles[0], oracle_from_series(series, -1, 3, t=2, k0=5)]
    with pytest.raises(EncodingError, match="must agree"):
        prediction_circuit(be, uneven, dims, 0.5)
    narrow = embed(model.W[:, :16], 1.2 * np.linalg.norm(model.W[:, :16], 2), pad_to=16)
    with pytest.raises(EncodingError, match="does not accept"):
        prediction_circuit(narrow, oracles, dims, 0.5)
    sloppy = BlockEncoding(be_W.corner, be_W.alpha, be_W.n_ancilla, 0.5, be_W.block_dims)
    with pytest.raises(EncodingError, match="epsilon_W"):
        prediction_circuit(sloppy, oracles, dims, 1e-3)


# ---------------------------------------------------------------------------
# recursive forecasting


@pytest.fixture(scope="module")
def rollout_model(toy):
    """tau = 1 companion model on the same toy series, for rollouts."""
    _, series, _, _ = toy
    cfg = FeatureConfig(m=2, p=2, delta=1, tau=1, lam=0.1)
    trimmed, targets = aligned_targets(series, cfg)
    X, Y = assemble_training(trimmed, targets, cfg, layout="padded")
    return train_weights(X, Y, cfg.lam, config=cfg)


def test_iterative_single_level_matches_direct_application(toy, rollout_model):
    _, series, _, _ = toy
    model = rollout_model
    be = embed(model.W, np.sqrt(2.0) * model.norm_W, pad_to=32)
    seed = oracle_from_series(series, 0, 2, t=1, k0=0)
    out = iterative_circuit(be, seed, 1)
    x = _padded_of(series, 1)
    direct, _ = apply_to_state(be, x)
    assert np.allclose(out[0], direct, atol=1e-12)
    assert fidelity(out[0], predict_skip(model, x).state) >= 1.0 - 1e-12


def test_iterative_matches_classical_rollout(toy, rollout_model):
    _, series, _, _ = toy
    model = rollout_model
    be = embed(model.W, np.sqrt(2.0) * model.norm_W, pad_to=32)
    seed = oracle_from_series(series, 0, 2, t=1, k0=0)
    out = iterative_circuit(be, seed, 3)
    ref = predict_iterative(model, series.states[:2], 3)
    for j in range(3):
        assert fidelity(out[j], ref[j]) >= 1.0 - 1e-10


def test_iterative_qubit_budget(toy, toy_weights):
    _, series, _, _ = toy
    _, _, be_W, _ = toy_weights
    seed = oracle_from_series(series, 0, 2, t=1, k0=0)
    # w' + d + 1 + k (d+3) = 12 + 1 + 1 + 2*4 = 22 at d = 1, k = 2
    with pytest.raises(EncodingError, match="needs 22 qubits"):
        iterative_circuit(be_W, seed, 2, max_qubits=21)
    out = iterative_circuit(be_W, seed, 2, max_qubits=22)
    assert len(out) == 2


def test_iterative_level_hook_reroutes_predictions(toy, rollout_model):
    _, series, _, _ = toy
    model = rollout_model
    be = embed(model.W, np.sqrt(2.0) * model.norm_W, pad_to=32)
    seed = oracle_from_series(series, 0, 2, t=1, k0=0)
    clean = iterative_circuit(be, seed, 4)
    planted = np.array([0.6, 0.8], dtype=complex) * 2.0  # unnormalized on purpose

    def hook(level, state):
        return planted if level == 2 else None

    bent = iterative_circuit(be, seed, 4, level_hook=hook)
    assert np.allclose(bent[0], clean[0], atol=1e-14)
    assert np.allclose(bent[1], planted / np.linalg.norm(planted), atol=1e-14)
    assert not np.allclose(bent[2], clean[2], atol=1e-6)


def test_iterative_budget_for_odd_ancilla_encoding(toy, rollout_model):
    _, series, _, _ = toy
    model = rollout_model
    be = embed(model.W, np.sqrt(2.0) * model.norm_W, pad_to=32)  # one dilation ancilla
    seed = oracle_from_series(series, 0, 2, t=1, k0=0)
    # odd w skips the overhang inversion: total = 1 + 1 + 1 + 2*4 = 11
    with pytest.raises(EncodingError, match="needs 11 qubits"):
        iterative_circuit(be, seed, 2, max_qubits=10)
    out = iterative_circuit(be, seed, 2, max_qubits=11)
    assert len(out) == 2


def test_iterative_validation(toy, rollout_model):
    _, series, _, _ = toy
    model = rollout_model
    be = embed(model.W, np.sqrt(2.0) * model.norm_W, pad_to=32)
    seed = oracle_from_series(series, 0, 2, t=1, k0=0)
    with pytest.raises(ValueError, match="k_levels"):
        iterative_circuit(be, seed, 0)
    single = oracle_from_series(series, 0, 1, t=1, k0=0)
    with pytest.raises(EncodingError, match="at least 2 columns"):
        iterative_circuit(be, single, 2)
    wide = oracle_from_series(random_series(np.random.default_rng(14), 4, 4), 0, 2)
    with pytest.raises(EncodingError, match="dimension"):
        iterative_circuit(be, wide, 2)


# ---------------------------------------------------------------------------
# error recurrence and register accounting


def test_error_bound_hand_anchor():
    bounds = error_propagation_bound(1e-4, 1.0, 2)
    assert bounds[0] == 1e-4 and bounds[1] == 1e-4
    assert bounds[2] == 3.0 * 1.0 * (1e-4 + 1e-4)
    assert bounds[2] == pytest.approx(6e-4, rel=1e-12)


def test_error_bound_short_sequences():
    assert error_propagation_bound(0.0, 2.0, 5) == [0.0] * 6
    assert error_propagation_bound(1e-3, 1.5, 0) == [1e-3]
    assert error_propagation_bound(1e-3, 1.5, 1) == [1e-3, 1e-3]


def test_error_bound_growth_ratio():
    kappa = 2.0
    bounds = error_propagation_bound(1e-9, kappa, 40)
    ratio = bounds[-1] / bounds[-2]
    fixed_point = (3.0 * kappa + np.sqrt(9.0 * kappa**2 + 12.0 * kappa)) / 2.0
    assert ratio == pytest.approx(fixed_point, abs=1e-9)


def test_error_bound_validation():
    with pytest.raises(ValueError, match="delta_seed"):
        error_propagation_bound(1.5, 1.0, 2)
    with pytest.raises(ValueError, match="kappa_W"):
        error_propagation_bound(0.1, 0.5, 2)
    with pytest.raises(ValueError, match="k >= 0"):
        error_propagation_bound(0.1, 1.0, -1)


def test_ancilla_accounting_anchors():
    wide = ancilla_accounting(4, 15)
    assert (wide.w, wide.w_prime) == (32, 36)
    narrow = ancilla_accounting(4, 3)
    assert (narrow.w, narrow.w_prime) == (24, 24)
    assert wide.T == 2**15


def test_ancilla_boundary_agreement():
    # at t = 2d+3 the overhang vanishes and both formulas coincide
    for d in range(1, 9):
        dims = ancilla_accounting(d, 2 * d + 3)
        assert dims.w_prime == dims.w == 2 * (2 * d + 3) + 2


def test_dims_validation():
    with pytest.raises(ValueError, match="d >= 1"):
        CircuitDims(d=0, t=1, T=1)
    with pytest.raises(ValueError, match="t >= 1"):
        CircuitDims(d=1, t=0, T=1)
    with pytest.raises(ValueError, match="does not fit"):
        CircuitDims(d=1, t=1, T=3)
    with pytest.raises(ValueError, match="does not fit"):
        CircuitDims(d=1, t=1, T=0)


def test_circuit_description_structure():
    dims = ancilla_accounting(2, 3)
    desc = circuit_description(dims)
    encoded = json.dumps(desc, sort_keys=True)
    assert json.loads(encoded) == desc
    names = [r["name"] for r in desc["registers"]]
    assert names == [
        "control",
        "select-0",
        "data-0",
        "select-1",
        "data-1",
        "index",
        "erasure",
        "doubling",
    ]
    stages = {b["stage"]: b for b in desc["blocks"]}
    assert stages["weight-encoding"]["ancillas"] == dims.w
    assert stages["prediction"]["ancillas"] == dims.w_prime
    assert desc["dims"]["w"] == dims.w
