"""Nonlinear vector autoregression on quantum state trajectories.

The feature map is a delay embedding plus a monomial tensor power,

    o_k = s_k (+) s_{k-Delta} (+) ... (+) s_{k-(m-1)Delta}
    x_k = o_k (+) o_k^{(x) p}

and the readout is ridge (Tikhonov) regression in complex arithmetic,

    W = Y X^dag (X X^dag + lambda I)^{-1},

solved through the SVD of X so that lambda = 0 degrades gracefully to the
rank-tolerant minimum-norm least-squares solution. Two column layouts are
supported: "concatenated" (the raw feature stack above) and "padded" (the
unit-norm 8D^2 layout produced by the state-preparation circuits, with the
quadratic block first and the linear block riding behind it).

Predictions come in two flavors: skipping ahead (one W application maps the
feature at index k to the state tau steps later) and iterative rollout
(tau = 1 model fed back into its own delay window).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .tfim import TimeSeries

__all__ = [
    "FeatureConfig",
    "FeatureMatrix",
    "WeightModel",
    "Prediction",
    "IllConditionedError",
    "delay_vector",
    "feature_vector",
    "padded_feature_vector",
    "padded_layout_blocks",
    "aligned_targets",
    "assemble_training",
    "train_weights",
    "kappa_regularized",
    "predict_skip",
    "predict_iterative",
    "fidelity",
    "pauli_expectation",
]

LAYOUTS = ("concatenated", "padded")

# Hard ceiling on feature length; (m*D)^p grows fast and a runaway p should
# fail loudly instead of exhausting memory.
MAX_FEATURE_ENTRIES = 2**26

RANK_TOL = 1e-12  # singular values below RANK_TOL * sigma_max count as zero


class IllConditionedError(ValueError):
    """Regression system is singular beyond the declared tolerance."""


@dataclass(frozen=True)
class FeatureConfig:
    """Hyperparameters of the delay/monomial feature map."""

    m: int = 2
    p: int = 2
    delta: int = 1
    tau: int = 1
    lam: float = 0.0

    def __post_init__(self) -> None:
        if self.m < 1 or (self.m & (self.m - 1)) != 0:
            raise ValueError(f"m must be a positive power of two, got {self.m}")
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.delta < 1:
            raise ValueError(f"delta must be >= 1, got {self.delta}")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")

    @property
    def history(self) -> int:
        """Number of extra leading states a series needs before index 0."""
        return (self.m - 1) * self.delta


@dataclass(frozen=True)
class FeatureMatrix:
    """Feature vectors as columns, tagged with their layout."""

    columns: np.ndarray  # (L, T) complex
    layout: str

    def __post_init__(self) -> None:
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}, got {self.layout!r}")
        if self.columns.ndim != 2:
            raise ValueError("columns must be a 2-D array")
        if self.layout == "padded" and self.columns.size:
            norms = np.linalg.norm(self.columns, axis=0)
            if np.max(np.abs(norms - 1.0)) > 1e-10:
                raise ValueError("padded feature columns must be unit norm")

    @property
    def T(self) -> int:
        return self.columns.shape[1]


@dataclass(frozen=True)
class WeightModel:
    """Trained readout W plus the conditioning diagnostics of its fit."""

    W: np.ndarray
    lam: float
    layout: str
    kappa_X: float
    kappa: float
    kappa_W: float
    norm_X: float
    norm_Y: float
    norm_W: float
    config: FeatureConfig | None = None


class Prediction(NamedTuple):
    state: np.ndarray  # normalized
    raw: np.ndarray  # W @ x before normalization, for norm-drift diagnostics


# ---------------------------------------------------------------------------
# feature construction


def delay_vector(states: np.ndarray, k: int, m: int, delta: int) -> np.ndarray:
    """o_k: current state stacked with m-1 earlier states at spacing delta."""
    if m < 1 or (m & (m - 1)) != 0:
        raise ValueError(f"m must be a positive power of two, got {m}")
    if delta < 1:
        raise ValueError(f"delta must be >= 1, got {delta}")
    if k - (m - 1) * delta < 0 or k >= len(states):
        raise IndexError(
            f"index {k} lacks delay history (need {k - (m - 1) * delta} >= 0 "
            f"and {k} < {len(states)})"
        )
    return np.concatenate([np.asarray(states[k - j * delta]) for j in range(m)])


def feature_vector(
    o: np.ndarray, p: int, max_entries: int = MAX_FEATURE_ENTRIES
) -> np.ndarray:
    """x = o (+) o^{(x) p}. Length len(o) + len(o)**p."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    n = o.shape[0]
    if n**p + n > max_entries:
        raise ValueError(
            f"feature length {n}^{p} + {n} exceeds the {max_entries}-entry budget"
        )
    mono = o.astype(complex)
    for _ in range(p - 1):
        mono = np.kron(mono, o)
    return np.concatenate([o.astype(complex), mono])


def padded_feature_vector(o: np.ndarray) -> np.ndarray:
    """Unit-norm feature layout matching the two-delay, degree-two circuits.

    For a normalized 2D-dimensional delay state |o>, returns the 8D^2 vector

        x = (|0>|o>|o> + |1>|0...0>|o>) / sqrt(2)

    i.e. the quadratic block (o (x) o)/sqrt(2) occupying entries [0, 4D^2)
    and the linear block o/sqrt(2) at [4D^2, 4D^2 + 2D), zeros elsewhere.
    Requires ||o|| = 1 within 1e-10 and a power-of-two length.
    """
    n = o.shape[0]
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"delay state length must be a power of two >= 2, got {n}")
    nrm = np.linalg.norm(o)
    if abs(nrm - 1.0) > 1e-10:
        raise ValueError(f"delay state must be unit norm, got ||o|| = {nrm}")
    x = np.zeros(2 * n * n, dtype=complex)
    x[: n * n] = np.kron(o, o) / np.sqrt(2.0)
    x[n * n : n * n + n] = o / np.sqrt(2.0)
    return x


def padded_layout_blocks(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse bookkeeping for padded_feature_vector.

    Returns (linear, quadratic) rescaled by sqrt(2), so that
    concatenate([linear, quadratic]) equals feature_vector(o, 2).
    """
    size = x.shape[0]
    n = int(round(np.sqrt(size / 2)))
    if 2 * n * n != size:
        raise ValueError(f"length {size} is not 2*(2D)^2 for any D")
    quad = x[: n * n] * np.sqrt(2.0)
    lin = x[n * n : n * n + n] * np.sqrt(2.0)
    return lin, quad


def aligned_targets(
    series: TimeSeries, cfg: FeatureConfig
) -> tuple[TimeSeries, TimeSeries]:
    """Carve in-series targets s_{k+tau} for every usable index of `series`.

    Returns (trimmed, targets): `trimmed` is the input minus its final tau
    states, and targets[j] = series[history + j + tau] lines up with usable
    index j of `trimmed`. Handy when tau is small enough that the targets
    are already inside the recorded trajectory (the iterative setup).
    """
    n = len(series)
    usable = n - cfg.tau - cfg.history
    if usable < 1:
        raise ValueError(
            f"series of {n} states has no usable index for "
            f"history {cfg.history} and tau {cfg.tau}"
        )
    trimmed = TimeSeries(
        states=series.states[: n - cfg.tau],
        dt=series.dt,
        burn_in=series.burn_in,
        origin=series.origin,
    )
    targets = TimeSeries(
        states=series.states[cfg.history + cfg.tau :],
        dt=series.dt,
        burn_in=series.burn_in,
        origin="aligned_targets",
    )
    return trimmed, targets


def assemble_training(
    series: TimeSeries,
    targets: TimeSeries,
    cfg: FeatureConfig,
    layout: str = "concatenated",
) -> tuple[FeatureMatrix, np.ndarray]:
    """Build the feature/target column pair (X, Y) over all usable indices.

    Usable indices are k = history .. len(series)-1, giving
    T = len(series) - history columns; `targets` must hold exactly one
    state per usable index (targets[j] = s at k_j + tau).
    """
    if layout not in LAYOUTS:
        raise ValueError(f"layout must be one of {LAYOUTS}, got {layout!r}")
    T = len(series) - cfg.history
    if T < 1:
        raise ValueError(
            f"series of {len(series)} states is shorter than the "
            f"delay history {cfg.history}"
        )
    if len(targets) != T:
        raise ValueError(
            f"length mismatch: {T} usable indices but {len(targets)} targets"
        )
    if layout == "padded" and (cfg.m, cfg.p) != (2, 2):
        raise ValueError("padded layout is defined for m = 2, p = 2 only")

    cols = []
    for j in range(T):
        o = delay_vector(series.states, cfg.history + j, cfg.m, cfg.delta)
        if layout == "padded":
            cols.append(padded_feature_vector(o / np.linalg.norm(o)))
        else:
            cols.append(feature_vector(o, cfg.p))
    X = np.stack(cols, axis=1)
    Y = targets.states.T.astype(complex)

    _assert_norm_bounds(X)
    return FeatureMatrix(columns=X, layout=layout), Y


def _assert_norm_bounds(X: np.ndarray) -> None:
    # For unit columns 1/sqrt(T) <= ||X|| <= D' sqrt(T); constant column
    # norms just rescale both sides. Cheap Frobenius bound on the right,
    # max-column bound on the left.
    T = X.shape[1]
    col = np.linalg.norm(X, axis=0)
    frob = np.linalg.norm(X)
    top = float(np.max(col))
    assert top <= frob * (1 + 1e-12), "spectral bounds violated"
    assert col.min() / np.sqrt(T) <= top * (1 + 1e-12), "spectral bounds violated"


# ---------------------------------------------------------------------------
# regression


def kappa_regularized(kappa_X: float, norm_X: float, lam: float) -> float:
    """Condition number of the lambda-augmented system,

    kappa = kappa_X * sqrt((||X||^2 + lambda) / (||X||^2 + lambda kappa_X^2)).
    """
    if kappa_X < 1.0 or norm_X <= 0.0 or lam < 0.0:
        raise ValueError("need kappa_X >= 1, ||X|| > 0, lambda >= 0")
    n2 = norm_X * norm_X
    return kappa_X * np.sqrt((n2 + lam) / (n2 + lam * kappa_X * kappa_X))


def _rank_filter(s: np.ndarray, lam: float) -> tuple[np.ndarray, int]:
    """sigma -> sigma/(sigma^2 + lambda) with rank-tolerant zero handling."""
    cut = RANK_TOL * s[0]
    keep = s > cut
    filt = np.zeros_like(s)
    if lam == 0.0:
        filt[keep] = 1.0 / s[keep]
    else:
        filt[keep] = s[keep] / (s[keep] ** 2 + lam)
    return filt, int(np.count_nonzero(keep))


def train_weights(
    X: FeatureMatrix | np.ndarray,
    Y: np.ndarray,
    lam: float,
    config: FeatureConfig | None = None,
    rank_policy: str = "clip",
) -> WeightModel:
    """Solve W = Y X^dag (X X^dag + lambda I)^{-1} through the SVD of X.

    With lambda = 0 the default rank_policy="clip" returns the minimum-norm
    least-squares solution, discarding singular directions below
    1e-12 * sigma_max; rank_policy="strict" instead refuses rank-deficient
    systems (X X^dag not numerically invertible) with an explicit error.
    """
    Xc = X.columns if isinstance(X, FeatureMatrix) else np.asarray(X)
    layout = X.layout if isinstance(X, FeatureMatrix) else "concatenated"
    if Xc.ndim != 2 or Y.ndim != 2 or Xc.shape[1] != Y.shape[1]:
        raise ValueError(
            f"X and Y must share the column count, got {Xc.shape} vs {Y.shape}"
        )
    if lam < 0.0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if rank_policy not in ("clip", "strict"):
        raise ValueError(f"rank_policy must be 'clip' or 'strict', got {rank_policy!r}")

    U, s, Vh = np.linalg.svd(Xc, full_matrices=False)
    if s[0] == 0.0:
        raise IllConditionedError("X is identically zero")
    filt, rank = _rank_filter(s, lam)
    if lam == 0.0 and rank_policy == "strict" and rank < Xc.shape[0]:
        smallest = s[min(rank, len(s) - 1)] if rank < len(s) else 0.0
        raise IllConditionedError(
            f"X X^dag is singular at lambda = 0: rank {rank} < {Xc.shape[0]} rows "
            f"(smallest singular value {smallest:.3e})"
        )

    W = ((Y @ Vh.conj().T) * filt) @ U.conj().T

    kappa_X = float(s[0] / s[rank - 1])
    sw = np.linalg.svd(W, compute_uv=False)
    if sw[0] > 0.0:
        kw_keep = sw[sw > RANK_TOL * sw[0]]
        kappa_W = float(sw[0] / kw_keep[-1])
    else:
        kappa_W = 1.0
    return WeightModel(
        W=W,
        lam=float(lam),
        layout=layout,
        kappa_X=kappa_X,
        kappa=float(kappa_regularized(kappa_X, float(s[0]), lam)),
        kappa_W=kappa_W,
        norm_X=float(s[0]),
        norm_Y=float(np.linalg.svd(Y, compute_uv=False)[0]),
        norm_W=float(sw[0]),
        config=config,
    )


# ---------------------------------------------------------------------------
# prediction and metrics


def _normalize_or_raise(raw: np.ndarray, scale: float) -> np.ndarray:
    nrm = np.linalg.norm(raw)
    if nrm <= 1e-14 * max(scale, 1.0):
        raise ValueError(
            f"degenerate prediction: ||W x|| = {nrm:.3e} is numerically zero"
        )
    return raw / nrm


def predict_skip(model: WeightModel, feature: np.ndarray) -> Prediction:
    """One-shot forecast: normalize(W x), with the raw vector kept around."""
    if feature.shape[0] != model.W.shape[1]:
        raise ValueError(
            f"feature length {feature.shape[0]} does not match W columns "
            f"{model.W.shape[1]}"
        )
    raw = model.W @ feature
    return Prediction(state=_normalize_or_raise(raw, model.norm_W), raw=raw)


def predict_iterative(
    model: WeightModel,
    seed: TimeSeries | np.ndarray,
    n_steps: int,
) -> TimeSeries:
    """Roll the tau = 1 model forward n_steps, feeding predictions back in.

    The seed must supply the delay window (at least (m-1)*delta + 1 most
    recent states, oldest first). Each output state is renormalized before
    re-entering the feature map.
    """
    if model.config is None:
        raise ValueError("model carries no feature config; cannot roll out")
    cfg = model.config
    if cfg.tau != 1:
        raise ValueError(f"iterative rollout needs a tau = 1 model, got tau = {cfg.tau}")
    states = seed.states if isinstance(seed, TimeSeries) else np.asarray(seed)
    dt = seed.dt if isinstance(seed, TimeSeries) else 0.0
    need = cfg.history + 1
    if states.shape[0] < need:
        raise ValueError(
            f"seed supplies {states.shape[0]} states; the delay window needs {need}"
        )

    history = [states[i].astype(complex) for i in range(states.shape[0])]
    out = np.empty((n_steps, states.shape[1]), dtype=complex)
    for j in range(n_steps):
        k = len(history) - 1
        o = delay_vector(history, k, cfg.m, cfg.delta)
        if model.layout == "padded":
            x = padded_feature_vector(o / np.linalg.norm(o))
        else:
            x = feature_vector(o, cfg.p)
        try:
            nxt = _normalize_or_raise(model.W @ x, model.norm_W)
        except ValueError as exc:
            raise ValueError(f"rollout step {j}: {exc}") from None
        out[j] = nxt
        history.append(nxt)
        # only the delay window matters; keep the buffer short
        if len(history) > need + 1:
            del history[0]
    return TimeSeries(states=out, dt=dt, burn_in=0, origin="predict_iterative")


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 for normalized pure states."""
    if a.shape != b.shape:
        raise ValueError(f"state dims differ: {a.shape} vs {b.shape}")
    for v in (a, b):
        if abs(np.linalg.norm(v) - 1.0) > 1e-6:
            raise ValueError("fidelity expects unit-norm states")
    return float(abs(np.vdot(a, b)) ** 2)


_FLIP = {"X", "Y"}


def pauli_expectation(state: np.ndarray, ops: Sequence[tuple[int, str]]) -> float:
    """<state| P |state> for a Pauli string P given as [(site, 'X'|'Y'|'Z'), ...].

    Site 0 is the leftmost (most significant) qubit. The result of a
    Hermitian string is real; imaginary residue beyond 1e-10 raises.
    """
    dim = state.shape[0]
    n = int(np.log2(dim))
    if 2**n != dim:
        raise ValueError(f"state length {dim} is not a power of two")
    idx = np.arange(dim)
    phase = np.ones(dim, dtype=complex)
    flip = 0
    for site, pauli in ops:
        if not 0 <= site < n:
            raise ValueError(f"site {site} out of range for {n} qubits")
        bit = (idx >> (n - 1 - site)) & 1
        if pauli == "Z":
            phase = phase * (1 - 2 * bit)
        elif pauli == "X":
            flip ^= 1 << (n - 1 - site)
        elif pauli == "Y":
            # Y = i X Z up to ordering: flip the bit, phase i(1-2b)
            flip ^= 1 << (n - 1 - site)
            phase = phase * (1j * (1 - 2 * bit))
        else:
            raise ValueError(f"unknown Pauli axis {pauli!r}")
    applied = np.zeros_like(state, dtype=complex)
    applied[idx ^ flip] = phase * state
    val = np.vdot(state, applied)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"non-real expectation (imag {val.imag:.3e}); string not Hermitian?")
    return float(val.real)
