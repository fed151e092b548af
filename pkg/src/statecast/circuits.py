"""Quantum-circuit constructions for the forecasting pipeline at desk scale.

The registers mirror the algorithm's layout: a data register of d qubits
holds one normalized state, an index register of t qubits addresses the
training column, and the delay/monomial encoders stack (select, data)
blocks around a single control qubit. Everything here is an explicit
dense matrix or an explicitly assembled block-encoding corner; nothing
pretends to be a gate-level compiler.

Two construction routes coexist on purpose. The literal route
(`build_u_lin`, `build_u_f`, `feature_pipeline_unitary`) multiplies out
the actual unitaries and is only affordable for a couple of qubits. The
column route (`feature_block_encoding`, `feature_encoding_from_series`,
`target_block_encoding`) writes the encoding corner directly from the
states the oracles are defined to produce, which is the same matrix the
literal pipeline yields (the tests pin this) but scales to the corner
dimension rather than the full circuit dimension.

Oracle call tallies accrue where an oracle is visibly consumed: building
the select stage charges one call per oracle, the degree-p encoder reuses
the delay stage p times, and each forecast index charges p calls per
oracle. Column-route constructions that never see a DataOracle leave the
tallies alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blockenc import (
    BlockEncoding,
    CostEstimate,
    EncodingError,
    apply_to_state,
    preamplify,
)
from .ngrc import RANK_TOL, padded_feature_vector
from .tensorops import check_dense_cap, embed_operator, swap_registers
from .tfim import TimeSeries

_H1 = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)


def _walsh(n: int) -> np.ndarray:
    H = np.eye(1, dtype=complex)
    for _ in range(n):
        H = np.kron(H, _H1)
    return H


@dataclass(frozen=True)
class CircuitDims:
    """Register bookkeeping for the two-delay, degree-two pipeline.

    d data qubits per state, t index qubits, T training columns. The
    derived counts follow the fixed layout: the feature register needs
    2d+3 qubits (control + two select/data blocks), the exact feature
    encoding uses max(2d+3, t) ancillas, the weight encoding doubles
    that plus one per factor, and the prediction phase pads with the
    index qubits that do not fit inside the feature register.
    """

    d: int
    t: int
    T: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"need d >= 1 data qubits, got {self.d}")
        if self.t < 1:
            raise ValueError(f"need t >= 1 index qubits, got {self.t}")
        if not 1 <= self.T <= 2**self.t:
            raise ValueError(
                f"T = {self.T} does not fit the index register (1 <= T <= {2**self.t})"
            )

    @property
    def D(self) -> int:
        return 2**self.d

    @property
    def feature_qubits(self) -> int:
        """Control + p (select, data) blocks for m = p = 2."""
        return 2 * self.d + 3

    @property
    def feature_dim(self) -> int:
        """Padded feature length 8 D^2."""
        return 2**self.feature_qubits

    @property
    def enc_ancillas(self) -> int:
        """Ancilla count of the exact feature encoding, max(2d+3, t)."""
        return max(self.feature_qubits, self.t)

    @property
    def w(self) -> int:
        """Weight-encoding ancillas: 2 max(2d+3, t) + 2."""
        return 2 * self.enc_ancillas + 2

    @property
    def w_prime(self) -> int:
        """Prediction-phase ancillas: w plus the index overhang."""
        return self.w + max(0, self.t - self.feature_qubits)

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "D": self.D,
            "t": self.t,
            "T": self.T,
            "w": self.w,
            "w_prime": self.w_prime,
        }


@dataclass
class DataOracle:
    """Controlled state-preparation unitary |0..0>|k> -> |s_{k+offset}>|k>.

    `columns` keeps the specified payload states (row k is the state the
    oracle deposits for index k), `call_counter` tallies how often the
    oracle is consumed so query costs T_O can be checked symbolically.
    """

    offset: int
    unitary: np.ndarray
    columns: np.ndarray
    n_data: int
    n_index: int
    T: int
    dt: float = 0.0
    call_counter: int = field(default=0, compare=False)

    def state(self, k: int) -> np.ndarray:
        if not 0 <= k < self.T:
            raise IndexError(f"oracle specifies columns 0..{self.T - 1}, got {k}")
        return self.columns[k]

    def tick(self, n: int = 1) -> None:
        self.call_counter += n


def _completion_to(s: np.ndarray) -> np.ndarray:
    """Unitary V with V|0..0> = s, deterministic in s.

    Complex Householder reflection: with phi = arg(s_0), the reflection
    through (e_0 - e^{-i phi} s) maps e_0 to e^{-i phi} s, and the global
    phase e^{i phi} restores the target. No randomness enters, so oracle
    completion is reproducible by construction.
    """
    dim = s.shape[0]
    phi = np.angle(s[0]) if s[0] != 0.0 else 0.0
    b = np.exp(-1j * phi) * s
    u = np.zeros(dim, dtype=complex)
    u[0] = 1.0
    u -= b
    nrm = np.linalg.norm(u)
    if nrm < 1e-14:
        return np.exp(1j * phi) * np.eye(dim, dtype=complex)
    u /= nrm
    return np.exp(1j * phi) * (np.eye(dim, dtype=complex) - 2.0 * np.outer(u, u.conj()))


def oracle_from_series(
    series: TimeSeries,
    offset: int,
    T: int,
    t: int | None = None,
    k0: int = 0,
) -> DataOracle:
    """Build the data oracle whose column k deposits series[k0 + k + offset].

    The index register width defaults to the smallest t with T <= 2^t
    (at least one qubit). Index values k >= T act as the identity; the
    specified columns are completed blockwise to an exact unitary.
    """
    if T < 1:
        raise ValueError(f"need T >= 1 specified columns, got {T}")
    dim = series.dim
    d = int(math.log2(dim))
    if 2**d != dim:
        raise ValueError(f"state dimension {dim} is not a power of two")
    if t is None:
        t = max(1, (T - 1).bit_length())
    if T > 2**t:
        raise ValueError(f"T = {T} exceeds the index register capacity 2^{t}")
    lo = k0 + offset
    hi = k0 + (T - 1) + offset
    if lo < 0 or hi >= len(series):
        raise ValueError(
            f"offset {offset} reaches series indices {lo}..{hi}, outside "
            f"0..{len(series) - 1}"
        )
    full = dim * 2**t
    check_dense_cap(full, "data oracle")

    cols = series.states[lo : hi + 1].copy()
    U = np.eye(full, dtype=complex)
    for k in range(T):
        rows = np.arange(dim) * 2**t + k
        U[np.ix_(rows, rows)] = _completion_to(cols[k])
    if full <= 2**12:
        defect = np.linalg.norm(U.conj().T @ U - np.eye(full), 2)
        if defect > 1e-10:
            raise EncodingError(f"oracle completion lost unitarity ({defect:.3e})")

    return DataOracle(
        offset=offset,
        unitary=U,
        columns=cols,
        n_data=d,
        n_index=t,
        T=T,
        dt=series.dt,
    )


def build_u_lin(oracles: list[DataOracle], m: int) -> np.ndarray:
    """Delay encoder: Hadamards on the select register, then select-apply.

    Maps |0>^{eta}|0>^d|k> to the uniform superposition of the m delayed
    states, sum_j |j>|s_{k - j delta}>|k> / sqrt(m). Charges one call per
    oracle.
    """
    if m < 1 or (m & (m - 1)) != 0:
        raise ValueError(f"m must be a positive power of two, got {m}")
    if len(oracles) != m:
        raise ValueError(f"m = {m} needs exactly m oracles, got {len(oracles)}")
    dims = {o.unitary.shape for o in oracles}
    if len(dims) != 1:
        raise ValueError(f"oracles act on mismatched registers: {sorted(dims)}")
    for o in oracles:
        o.tick(1)
    if m == 1:
        return oracles[0].unitary.copy()

    eta = int(math.log2(m))
    blk = oracles[0].unitary.shape[0]
    check_dense_cap(m * blk, "delay encoder")
    select = np.zeros((m * blk, m * blk), dtype=complex)
    for j, o in enumerate(oracles):
        select[j * blk : (j + 1) * blk, j * blk : (j + 1) * blk] = o.unitary
    return select @ np.kron(_walsh(eta), np.eye(blk, dtype=complex))


def build_u_f(
    u_lin: np.ndarray,
    p: int,
    n_index: int,
    oracles: list[DataOracle] | None = None,
) -> np.ndarray:
    """Feature encoder: control qubit splitting degree p from degree 1.

    U^f = (|0><0| (x) U_lin^{(x) p} + |1><1| (x) I^{(x) p-1} (x) U_lin)
    followed by a Hadamard on the control, with all p delay blocks
    sharing one index register (n_index qubits, the trailing factor of
    u_lin). Pass the oracles backing u_lin to keep their tallies in step
    with the p-fold reuse.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    total = int(math.log2(u_lin.shape[0]))
    if 2**total != u_lin.shape[0] or u_lin.shape[0] != u_lin.shape[1]:
        raise ValueError(f"u_lin must be square power-of-two, got {u_lin.shape}")
    n_block = total - n_index
    if n_block < 1:
        raise ValueError(
            f"u_lin on {total} qubits leaves no delay block beside "
            f"{n_index} index qubits"
        )
    check_dense_cap(2 ** (1 + p * n_block + n_index), "feature encoder")
    if oracles is not None:
        for o in oracles:
            o.tick(p - 1)

    slot_dims = [2**n_block] * p + [2**n_index]
    inner = int(np.prod(slot_dims))
    all_branch = np.eye(inner, dtype=complex)
    for i in range(p):
        all_branch = all_branch @ embed_operator(u_lin, slot_dims, (i, p))
    last_branch = embed_operator(u_lin, slot_dims, (p - 1, p))

    P0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    P1 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    branched = np.kron(P0, all_branch) + np.kron(P1, last_branch)
    return branched @ np.kron(_H1, np.eye(inner, dtype=complex))


def _require_full_index(dims: CircuitDims) -> None:
    # The trailing Hadamard layer erases the index register only when the
    # column superposition is uniform over the whole register.
    if dims.T != 2**dims.t:
        raise EncodingError(
            f"the index-erasing Hadamard layer needs T = 2^t; "
            f"got T = {dims.T} with t = {dims.t}"
        )


def _feature_cost(T: int) -> CostEstimate:
    return CostEstimate(
        formula_id="feature-encoding",
        oracle_calls="m*p * T_O",
        scalar_factors={"m": 2.0, "p": 2.0, "T": float(T)},
        multiplier=4.0,
    )


def feature_block_encoding(u_f: np.ndarray, dims: CircuitDims) -> BlockEncoding:
    """(sqrt(T), max(2d+3, t), 0)-encoding of the feature matrix X.

    The corner is read off column by column from u_f, whose action on
    |0>^{2d+3}|k> is |x_k>|k>; composing with the register swap and the
    index-erasing Hadamard layer scales each column by 1/sqrt(T). The
    explicit composition is available separately as
    feature_pipeline_unitary for cross-checks.
    """
    F = dims.feature_qubits
    expected = 2 ** (F + dims.t)
    if u_f.shape != (expected, expected):
        raise EncodingError(
            f"encoder shape {u_f.shape} does not match 2d+3 = {F} feature "
            f"qubits and t = {dims.t} index qubits"
        )
    _require_full_index(dims)
    S = 2**dims.enc_ancillas
    check_dense_cap(S, "feature-encoding corner")

    corner = np.zeros((S, S), dtype=complex)
    root_T = np.sqrt(float(dims.T))
    for k in range(dims.T):
        col = u_f[:, k].reshape(2**F, 2**dims.t)
        x = col[:, k]
        stray = np.linalg.norm(col) ** 2 - np.linalg.norm(x) ** 2
        # rounding alone moves the difference of two unit norms by a few ulps
        if stray > 1e-12:
            raise EncodingError(
                f"encoder column {k} does not factor as |x_k>|k> "
                f"(stray weight {stray:.3e})"
            )
        corner[: 2**F, k] = x / root_T
    return BlockEncoding(
        corner=corner,
        alpha=root_T,
        n_ancilla=dims.enc_ancillas,
        epsilon=0.0,
        block_dims=(2**F, dims.T),
        cost=_feature_cost(dims.T),
    )


def feature_encoding_from_series(
    series: TimeSeries,
    dims: CircuitDims,
    delta: int = 1,
    k0: int | None = None,
) -> BlockEncoding:
    """Column-route twin of feature_block_encoding (m = p = 2 layout).

    Assembles the corner from padded feature vectors built directly off
    the series, bypassing the 2^(2d+3+t)-dimensional encoder matrix; the
    two routes agree to float rounding on their shared domain. Column k
    uses the states at k0 + k and k0 + k - delta, with k0 defaulting to
    delta.
    """
    if series.dim != dims.D:
        raise EncodingError(
            f"series of dimension {series.dim} does not match D = {dims.D}"
        )
    _require_full_index(dims)
    if k0 is None:
        k0 = delta
    if k0 - delta < 0 or k0 + dims.T > len(series):
        raise ValueError(
            f"columns 0..{dims.T - 1} at base {k0} need series indices "
            f"{k0 - delta}..{k0 + dims.T - 1}, outside 0..{len(series) - 1}"
        )
    S = 2**dims.enc_ancillas
    check_dense_cap(S, "feature-encoding corner")

    corner = np.zeros((S, S), dtype=complex)
    root_T = np.sqrt(float(dims.T))
    for k in range(dims.T):
        o = np.concatenate([series[k0 + k], series[k0 + k - delta]])
        x = padded_feature_vector(o / np.linalg.norm(o))
        corner[: dims.feature_dim, k] = x / root_T
    return BlockEncoding(
        corner=corner,
        alpha=root_T,
        n_ancilla=dims.enc_ancillas,
        epsilon=0.0,
        block_dims=(dims.feature_dim, dims.T),
        cost=_feature_cost(dims.T),
    )


def target_block_encoding(
    oracle_tau: DataOracle, dims: CircuitDims, delta_Y: float
) -> BlockEncoding:
    """(sqrt(2)||Y||, max(2d+3, t)+1, delta_Y)-encoding of the target matrix.

    The raw pipeline deposits Y/sqrt(T) in the top-left of the doubled
    system (the second half, reached when the doubling qubit is set, is
    kept identically zero by making the pipeline conditional on that
    qubit); pre-amplification then tightens the subnormalization to
    sqrt(2)||Y|| at error delta_Y.
    """
    if oracle_tau.n_data != dims.d:
        raise EncodingError(
            f"oracle deposits {oracle_tau.n_data}-qubit states, need d = {dims.d}"
        )
    if oracle_tau.T < dims.T:
        raise EncodingError(
            f"oracle specifies {oracle_tau.T} columns, need T = {dims.T}"
        )
    _require_full_index(dims)
    S = 2**dims.enc_ancillas
    check_dense_cap(2 * S, "target-encoding corner")

    corner = np.zeros((2 * S, 2 * S), dtype=complex)
    root_T = np.sqrt(float(dims.T))
    for k in range(dims.T):
        corner[: dims.D, k] = oracle_tau.state(k) / root_T
    oracle_tau.tick(1)
    raw = BlockEncoding(
        corner=corner,
        alpha=root_T,
        n_ancilla=dims.enc_ancillas,
        epsilon=0.0,
        block_dims=(dims.D, 2 * S),
        cost=CostEstimate(
            formula_id="target-encoding",
            oracle_calls="T_O",
            scalar_factors={"T": float(dims.T)},
            multiplier=1.0,
        ),
    )
    amplified, _ = preamplify(raw, raw.block, delta_Y)
    return amplified


def feature_pipeline_unitary(u_f: np.ndarray, dims: CircuitDims) -> np.ndarray:
    """Explicit (Hadamard layer) o SWAP o U^f on ancilla (x) system.

    Both registers carry max(2d+3, t) qubits; u_f occupies the last
    2d+3 ancilla qubits and the last t system qubits, the swap exchanges
    the registers wholesale, and the Hadamard layer erases the index now
    sitting on the ancilla side. The top-left corner of the result is
    feature_block_encoding's corner; only affordable for tiny d, t.
    """
    F = dims.feature_qubits
    M = dims.enc_ancillas
    S = 2**M
    check_dense_cap(S * S, "feature pipeline")
    slots = [2] * (2 * M)
    active = tuple(range(M - F, M)) + tuple(range(2 * M - dims.t, 2 * M))
    lifted = embed_operator(u_f, slots, active)
    swap = swap_registers(S, S)
    hlayer = np.kron(
        np.kron(np.eye(2 ** (M - dims.t), dtype=complex), _walsh(dims.t)),
        np.eye(S, dtype=complex),
    )
    return hlayer @ swap @ lifted


def target_pipeline_unitary(oracle_tau: DataOracle, dims: CircuitDims) -> np.ndarray:
    """Explicit raw target pipeline on ancilla (x) (doubling qubit, system).

    Same swap-and-erase structure as the feature pipeline with the
    target oracle in place of U^f, run conditionally on the doubling
    qubit being clear; the set branch flips an ancilla instead, which
    zeroes its corner columns. The top-left 2^(M+1) corner matches
    target_block_encoding's raw corner.
    """
    if oracle_tau.n_data != dims.d or oracle_tau.n_index != dims.t:
        raise EncodingError(
            f"oracle on ({oracle_tau.n_data}, {oracle_tau.n_index}) qubits "
            f"does not match dims (d = {dims.d}, t = {dims.t})"
        )
    M = dims.enc_ancillas
    S = 2**M
    n = 2 * M + 1  # ancilla block, doubling qubit, system block
    check_dense_cap(2 * S * S, "target pipeline")
    slots = [2] * n
    active = tuple(range(M - dims.d, M)) + tuple(range(n - dims.t, n))
    lifted = embed_operator(oracle_tau.unitary, slots, active)
    swap = embed_operator(swap_registers(S, S), [S, 2, S], (0, 2))
    hlayer = np.kron(
        np.kron(np.eye(2 ** (M - dims.t), dtype=complex), _walsh(dims.t)),
        np.eye(2 * S, dtype=complex),
    )
    raw = hlayer @ swap @ lifted

    P0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    P1 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    gate0 = embed_operator(P0, slots, (M,))
    gate1 = embed_operator(P1, slots, (M,))
    flip = embed_operator(np.array([[0, 1], [1, 0]], dtype=complex), slots, (0,))
    return raw @ gate0 + flip @ gate1


def extract_weight_block(be_W: BlockEncoding, dims: CircuitDims) -> np.ndarray:
    """Unscaled weight matrix from the composed encoding.

    The declared block is D x 2S with all information in the first
    feature_dim columns (the rest multiply the zero rows of the padded
    feature matrix); this returns the D x 8D^2 slice matching the
    classical regression's shape.
    """
    if be_W.block_dims[0] != dims.D:
        raise EncodingError(
            f"encoding carries {be_W.block_dims[0]} block rows, need D = {dims.D}"
        )
    if be_W.block_dims[1] < dims.feature_dim:
        raise EncodingError(
            f"encoding carries {be_W.block_dims[1]} block columns, need at "
            f"least 8 D^2 = {dims.feature_dim}"
        )
    return be_W.block[:, : dims.feature_dim]


def _weight_conditioning(be_W: BlockEncoding) -> tuple[float, float]:
    s = np.linalg.svd(be_W.block, compute_uv=False)
    norm_W = float(s[0])
    if norm_W <= 0.0:
        raise EncodingError("weight encoding carries an identically zero block")
    keep = s[s > RANK_TOL * s[0]]
    return norm_W, float(s[0] / keep[-1])


def _padded_feature_of(current: np.ndarray, previous: np.ndarray) -> np.ndarray:
    o = np.concatenate([current, previous])
    return padded_feature_vector(o / np.linalg.norm(o))


def prediction_circuit(
    be_W: BlockEncoding,
    oracles_tilde: list[DataOracle],
    dims: CircuitDims,
    delta: float,
) -> tuple[np.ndarray, np.ndarray, CostEstimate]:
    """Forecast every index the prediction oracles cover.

    For each k, the feature state of (s_k, s_{k-1}) is pushed through the
    weight encoding by post-selection; the renormalized output is
    delta-close to W x / ||W x|| provided the encoding error satisfies
    epsilon_W <= delta ||W|| / (4 kappa_W). Returns (states, success
    probabilities, cost); the probabilities are ||W x||^2 / alpha^2.
    """
    if not 0.0 < delta <= 1.0:
        raise EncodingError(f"delta must be in (0, 1], got {delta}")
    if len(oracles_tilde) != 2:
        raise EncodingError(
            f"the two-delay layout needs oracles for offsets 0 and -delta, "
            f"got {len(oracles_tilde)}"
        )
    o_cur, o_prev = oracles_tilde
    if o_cur.T != o_prev.T:
        raise EncodingError(
            f"prediction oracles cover {o_cur.T} and {o_prev.T} columns; "
            "they must agree"
        )
    for o in oracles_tilde:
        if o.n_data != dims.d:
            raise EncodingError(
                f"oracle deposits {o.n_data}-qubit states, need d = {dims.d}"
            )
    if be_W.block_dims[0] != dims.D or be_W.block_dims[1] < dims.feature_dim:
        raise EncodingError(
            f"weight encoding block {be_W.block_dims} does not accept "
            f"{dims.feature_dim}-dimensional features onto {dims.D} amplitudes"
        )
    norm_W, kappa_W = _weight_conditioning(be_W)
    eps_limit = delta * norm_W / (4.0 * kappa_W)
    if be_W.epsilon > eps_limit + 1e-18:
        raise EncodingError(
            f"prediction at accuracy delta requires epsilon_W <= "
            f"delta*||W||/(4*kappa_W) = {eps_limit:.3e}; got {be_W.epsilon:.3e}"
        )

    K = o_cur.T
    cols = be_W.block_dims[1]
    states = np.empty((K, dims.D), dtype=complex)
    probs = np.empty(K)
    for k in range(K):
        x = _padded_feature_of(o_cur.state(k), o_prev.state(k))
        xp = np.zeros(cols, dtype=complex)
        xp[: x.shape[0]] = x
        out, prob = apply_to_state(be_W, xp)
        states[k] = out
        probs[k] = prob
        o_cur.tick(2)
        o_prev.tick(2)

    sf = be_W.cost.scalar_factors
    log_term = max(1.0, np.log(kappa_W / delta))
    if be_W.cost.formula_id == "weight-encoding":
        lead = (sf["kappa"] * kappa_W / (sf["norm_X"] + np.sqrt(sf["lambda"]))) * (
            sf["norm_Y"] / norm_W
        )
        simplified = sf["kappa"] * kappa_W * log_term * be_W.cost.multiplier + kappa_W
    else:
        lead = kappa_W
        simplified = kappa_W * log_term * be_W.cost.multiplier + kappa_W
    cost = CostEstimate(
        formula_id="prediction-phase",
        oracle_calls=(
            "(kappa*kappa_W/(||X||+sqrt(lambda))) * (||Y||/||W||)"
            " * log(kappa_W/delta) * T_W + kappa_W * T_O~"
        ),
        scalar_factors={
            "kappa_W": kappa_W,
            "norm_W": norm_W,
            "delta": float(delta),
            "simplified_calls": float(simplified),
        },
        multiplier=lead * log_term * be_W.cost.multiplier + kappa_W,
    )
    return states, probs, cost


def iterative_circuit(
    be_W: BlockEncoding,
    seed_oracle: DataOracle,
    k_levels: int,
    level_hook=None,
    max_qubits: int | None = None,
) -> TimeSeries:
    """Recursive forecast: each level feeds the previous predictions back in.

    Level 1 reads the two most recent seed states from the oracle; level
    j >= 2 reuses the outputs of levels j-1 and j-2, so the oracle is
    queried once (m p calls). The accounted register total is
    w' + d + 1 + k (d+3): the weight-encoding ancillas with the index
    overhang, the seed data register and its doubling qubit, and one
    (data + select + control + doubling) block per level, the garbage
    halves being reused between levels. level_hook(level, state), when
    given, may return a replacement for a level's prediction and exists
    to study perturbation growth.
    """
    if k_levels < 1:
        raise ValueError(f"need k_levels >= 1, got {k_levels}")
    D = be_W.block_dims[0]
    d = int(math.log2(D))
    if 2**d != D:
        raise EncodingError(f"block rows {D} are not a power of two")
    if seed_oracle.T < 2:
        raise EncodingError(
            "the two-delay window needs a seed oracle with at least 2 columns"
        )
    if seed_oracle.columns.shape[1] != D:
        raise EncodingError(
            f"seed states have dimension {seed_oracle.columns.shape[1]}, "
            f"need D = {D}"
        )

    w = be_W.n_ancilla
    if w >= 2 and w % 2 == 0:
        # invert w = 2 max(2d+3, t) + 2 for the index overhang
        w_prime = w + max(0, (w - 2) // 2 - (2 * d + 3))
    else:
        w_prime = w
    total = w_prime + d + 1 + k_levels * (d + 3)
    if max_qubits is not None and total > max_qubits:
        raise EncodingError(
            f"recursive circuit needs {total} qubits "
            f"(w' + d + 1 + k(d+3) = {w_prime} + {d} + 1 + {k_levels}*{d + 3}), "
            f"over the budget of {max_qubits}"
        )

    cols = be_W.block_dims[1]
    previous = seed_oracle.state(seed_oracle.T - 2).astype(complex)
    current = seed_oracle.state(seed_oracle.T - 1).astype(complex)
    seed_oracle.tick(4)
    out = np.empty((k_levels, D), dtype=complex)
    for level in range(1, k_levels + 1):
        x = _padded_feature_of(current, previous)
        xp = np.zeros(cols, dtype=complex)
        xp[: x.shape[0]] = x
        state, _ = apply_to_state(be_W, xp)
        if level_hook is not None:
            replaced = level_hook(level, state)
            if replaced is not None:
                state = np.asarray(replaced, dtype=complex)
                state = state / np.linalg.norm(state)
        out[level - 1] = state
        previous, current = current, state
    return TimeSeries(
        states=out, dt=seed_oracle.dt, burn_in=0, origin="iterative_circuit"
    )


def error_propagation_bound(
    delta_seed: float, kappa_W: float, k: int
) -> list[float]:
    """Per-level error budget delta_j = 3 kappa_W (delta_{j-1} + delta_{j-2}).

    delta_0 = delta_1 = delta_seed. This is the smallest sequence with
    (3/2)(delta_{j-1} + delta_{j-2}) <= delta_j / (2 kappa_W), the
    condition under which each level's post-selection tolerates the
    errors of the two levels feeding it.
    """
    if not 0.0 <= delta_seed <= 1.0:
        raise ValueError(f"delta_seed must lie in [0, 1], got {delta_seed}")
    if kappa_W < 1.0:
        raise ValueError(f"kappa_W must be >= 1, got {kappa_W}")
    if k < 0:
        raise ValueError(f"need k >= 0 levels, got {k}")
    bounds = [float(delta_seed)] * min(2, k + 1)
    for _ in range(2, k + 1):
        bounds.append(3.0 * kappa_W * (bounds[-1] + bounds[-2]))
    return bounds


def ancilla_accounting(d: int, t: int) -> CircuitDims:
    """Register bookkeeping for given data and index widths (T = 2^t)."""
    return CircuitDims(d=d, t=t, T=2**t)


def circuit_description(dims: CircuitDims, m: int = 2, p: int = 2) -> dict:
    """JSON-ready register map and named-block gate list.

    Block granularity is deliberately coarse (Hadamard layers, oracle
    selects, register swaps, the composed encoders); this is a record of
    the construction, not a compilation target.
    """
    eta = int(math.log2(m))
    registers = [
        {"name": "control", "qubits": 1, "role": "monomial-degree branch"},
    ]
    for i in range(p):
        registers.append(
            {
                "name": f"select-{i}",
                "qubits": eta,
                "role": "delay selector of block %d" % i,
            }
        )
        registers.append(
            {"name": f"data-{i}", "qubits": dims.d, "role": "state payload"}
        )
    registers.append(
        {"name": "index", "qubits": dims.t, "role": "training-column address"}
    )
    registers.append(
        {
            "name": "erasure",
            "qubits": dims.enc_ancillas,
            "role": "swap partner consumed by the index-erasing Hadamards",
        }
    )
    registers.append(
        {"name": "doubling", "qubits": 1, "role": "system doubling for the target"}
    )
    blocks = [
        {"stage": "delay-encoder", "gates": ["hadamard-layer(select)", "select-oracles"]},
        {
            "stage": "feature-encoder",
            "gates": ["hadamard(control)"]
            + [f"delay-encoder(block {i}, shared index)" for i in range(p)]
            + ["controlled degree-1 branch"],
        },
        {
            "stage": "feature-encoding",
            "gates": ["feature-encoder", "swap(erasure, system)", "hadamard-layer(index)"],
        },
        {
            "stage": "target-encoding",
            "gates": [
                "target-oracle (conditional on doubling clear)",
                "swap(erasure, system)",
                "hadamard-layer(index)",
                "pre-amplification",
            ],
        },
        {
            "stage": "weight-encoding",
            "gates": ["target-encoding", "regularized-inverse(feature-encoding)"],
            "ancillas": dims.w,
        },
        {
            "stage": "prediction",
            "gates": ["feature-encoder (forecast oracles)", "weight-encoding", "post-select"],
            "ancillas": dims.w_prime,
        },
    ]
    return {"dims": dims.as_dict(), "registers": registers, "blocks": blocks}
