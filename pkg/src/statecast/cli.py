"""Experiment driver: generate / train / predict / verify-quantum / report.

Configuration is a JSON tree (documented in docs/FORMATS.md) resolved in
layers: the named --profile supplies every default, an optional --config
file overrides individual keys, and --seed overrides the seed. Validation
runs before any compute and reports violations per field. Subcommands
write into --out and are deterministic for a fixed config + seed, so
reruns produce byte-identical artifacts.

On failure a one-line JSON object ({"error": <class>, "message": ...})
goes to stderr and the exit code is nonzero: 2 for configuration or usage
problems, 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .blockenc import verify_encoding
from .circuits import (
    CircuitDims,
    ancilla_accounting,
    build_u_f,
    build_u_lin,
    circuit_description,
    extract_weight_block,
    feature_block_encoding,
    feature_encoding_from_series,
    oracle_from_series,
    prediction_circuit,
    target_block_encoding,
)
from .ngrc import (
    FeatureConfig,
    WeightModel,
    aligned_targets,
    assemble_training,
    delay_vector,
    feature_vector,
    fidelity,
    padded_feature_vector,
    predict_iterative,
    predict_skip,
    train_weights,
)
from .qsvt import build_weight_encoding
from .reporting import metrics_table, render_figures, summarize
from .serialization import (
    load_model,
    load_series,
    read_metrics,
    save_model,
    save_report,
    save_series,
    write_metrics,
)
from .tfim import (
    TimeSeries,
    build_tfim_hamiltonian,
    evolve_series,
    max_eigen_energy,
    propagator,
    state_at,
)

DT_RULE = "1/(200*E_max)"

# Artifact names inside the --out directory.
TRAIN_FILE = "train.qts"
PREDICT_FILE = "predict.qts"
TARGET_TRAIN_FILE = "target_train.qts"
TARGET_PREDICT_FILE = "target_predict.qts"
MODEL_FILE = "model.qwm"
PREDICTED_FILE = "predicted.qts"
METRICS_FILE = "metrics.csv"
VERIFY_FILE = "verify.json"
REPORT_FILE = "report.json"

PROFILES: dict[str, dict] = {
    "paper": {
        "seed": 7,
        "system": {"n_qubits": 4, "J": 0.5, "h": 5.0, "dt_rule": DT_RULE},
        "training": {
            "T": 20_000,
            "tau": 1_000_000,
            "m": 2,
            "p": 2,
            "delta": 1,
            "lam": 0.0,
            "burn_in": 10_000,
            "layout": "concatenated",
        },
        "prediction": {"T_tilde": 40_000, "mode": "skip"},
        "quantum": {
            "enable": True,
            "d": 1,
            "T": 4,
            "t": 2,
            "tau": 2,
            "lam": 0.1,
            "delta_W": 1e-2,
            "delta": 5e-2,
        },
    },
    "ci": {
        "seed": 7,
        "system": {"n_qubits": 4, "J": 0.5, "h": 5.0, "dt_rule": DT_RULE},
        "training": {
            "T": 2_000,
            "tau": 10_000,
            "m": 2,
            "p": 2,
            "delta": 1,
            "lam": 0.0,
            "burn_in": 10_000,
            "layout": "concatenated",
        },
        "prediction": {"T_tilde": 2_000, "mode": "skip"},
        "quantum": {
            "enable": True,
            "d": 1,
            "T": 4,
            "t": 2,
            "tau": 2,
            "lam": 0.1,
            "delta_W": 1e-2,
            "delta": 5e-2,
        },
    },
}


class ConfigError(ValueError):
    """Configuration rejected before any compute, with the offending field."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SystemCfg:
    n_qubits: int
    J: float
    h: float
    dt_rule: str
    dt: float | None  # explicit step overrides the rule when present


@dataclass(frozen=True)
class TrainingCfg:
    T: int
    tau: int
    m: int
    p: int
    delta: int
    lam: float
    burn_in: int
    layout: str

    @property
    def features(self) -> FeatureConfig:
        return FeatureConfig(
            m=self.m, p=self.p, delta=self.delta, tau=self.tau, lam=self.lam
        )


@dataclass(frozen=True)
class PredictionCfg:
    T_tilde: int
    mode: str


@dataclass(frozen=True)
class QuantumCfg:
    enable: bool
    d: int
    T: int
    t: int
    tau: int
    lam: float
    delta_W: float
    delta: float


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    system: SystemCfg
    training: TrainingCfg
    prediction: PredictionCfg
    quantum: QuantumCfg
    out_dir: str | None


def deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], val)
        else:
            out[key] = val
    return out


def _section(tree: dict, name: str, allowed: tuple[str, ...]) -> dict:
    sec = tree.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(name, f"must be an object, got {type(sec).__name__}")
    for key in sec:
        if key not in allowed:
            raise ConfigError(f"{name}.{key}", f"unknown key (allowed: {allowed})")
    return sec


def _int_of(sec: dict, field: str, key: str, lo: int, hi: int | None = None) -> int:
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{field}.{key}", f"must be an integer, got {v!r}")
    if v < lo or (hi is not None and v > hi):
        span = f">= {lo}" if hi is None else f"in [{lo}, {hi}]"
        raise ConfigError(f"{field}.{key}", f"must be {span}, got {v}")
    return v


def _float_of(
    sec: dict, field: str, key: str, lo: float = -np.inf, strict: bool = False
) -> float:
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{field}.{key}", f"must be a number, got {v!r}")
    v = float(v)
    if not np.isfinite(v):
        raise ConfigError(f"{field}.{key}", f"must be finite, got {v}")
    if v <= lo if strict else v < lo:
        op = ">" if strict else ">="
        raise ConfigError(f"{field}.{key}", f"must be {op} {lo}, got {v}")
    return v


def validate_config(tree: dict) -> ExperimentConfig:
    """Check every module precondition that is visible in the config."""
    if not isinstance(tree, dict):
        raise ConfigError("config", "top level must be a JSON object")
    for key in tree:
        if key not in ("seed", "system", "training", "prediction", "quantum", "output"):
            raise ConfigError(key, "unknown top-level key")

    seed = tree.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed", f"must be an integer in [0, 2^64), got {seed!r}")

    sys_sec = _section(tree, "system", ("n_qubits", "J", "h", "dt_rule", "dt"))
    n_qubits = _int_of(sys_sec, "system", "n_qubits", 2)
    J = _float_of(sys_sec, "system", "J")
    h = _float_of(sys_sec, "system", "h")
    dt = None
    if "dt" in sys_sec:
        dt = _float_of(sys_sec, "system", "dt", 0.0, strict=True)
    dt_rule = sys_sec.get("dt_rule", DT_RULE)
    if dt is None and dt_rule != DT_RULE:
        raise ConfigError(
            "system.dt_rule", f"unknown rule {dt_rule!r}; use {DT_RULE!r} or give dt"
        )
    system = SystemCfg(n_qubits=n_qubits, J=J, h=h, dt_rule=dt_rule, dt=dt)

    tr_sec = _section(
        tree, "training", ("T", "tau", "m", "p", "delta", "lam", "burn_in", "layout")
    )
    layout = tr_sec.get("layout", "concatenated")
    if layout not in ("concatenated", "padded"):
        raise ConfigError(
            "training.layout", f"must be 'concatenated' or 'padded', got {layout!r}"
        )
    training = TrainingCfg(
        T=_int_of(tr_sec, "training", "T", 1),
        tau=_int_of(tr_sec, "training", "tau", 0),
        m=_int_of(tr_sec, "training", "m", 1),
        p=_int_of(tr_sec, "training", "p", 1),
        delta=_int_of(tr_sec, "training", "delta", 1),
        lam=_float_of(tr_sec, "training", "lam", 0.0),
        burn_in=_int_of(tr_sec, "training", "burn_in", 0),
        layout=layout,
    )
    if training.m & (training.m - 1):
        raise ConfigError(
            "training.m", f"must be a positive power of two, got {training.m}"
        )
    if layout == "padded" and (training.m, training.p) != (2, 2):
        raise ConfigError(
            "training.layout", "padded layout is defined for m = 2, p = 2 only"
        )

    pr_sec = _section(tree, "prediction", ("T_tilde", "mode"))
    mode = pr_sec.get("mode", "skip")
    if mode not in ("skip", "iterative"):
        raise ConfigError(
            "prediction.mode", f"must be 'skip' or 'iterative', got {mode!r}"
        )
    prediction = PredictionCfg(
        T_tilde=_int_of(pr_sec, "prediction", "T_tilde", 1), mode=mode
    )

    q_sec = _section(
        tree, "quantum", ("enable", "d", "T", "t", "tau", "lam", "delta_W", "delta")
    )
    enable = q_sec.get("enable", False)
    if not isinstance(enable, bool):
        raise ConfigError("quantum.enable", f"must be a boolean, got {enable!r}")
    q_T = _int_of(q_sec, "quantum", "T", 1)
    q_t = (
        _int_of(q_sec, "quantum", "t", 1)
        if q_sec.get("t") is not None
        else max(1, (q_T - 1).bit_length())
    )
    if q_T > 2**q_t:
        raise ConfigError("quantum.t", f"2^t = {2**q_t} cannot index T = {q_T} columns")
    quantum = QuantumCfg(
        enable=enable,
        d=_int_of(q_sec, "quantum", "d", 1),
        T=q_T,
        t=q_t,
        tau=_int_of(q_sec, "quantum", "tau", 0),
        lam=_float_of(q_sec, "quantum", "lam", 0.0),
        delta_W=_float_of(q_sec, "quantum", "delta_W", 0.0, strict=True),
        delta=_float_of(q_sec, "quantum", "delta", 0.0, strict=True),
    )
    for key in ("delta_W", "delta"):
        if getattr(quantum, key) > 1.0:
            raise ConfigError(f"quantum.{key}", "must lie in (0, 1]")

    out_sec = _section(tree, "output", ("dir",))
    out_dir = out_sec.get("dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("output.dir", f"must be a string path, got {out_dir!r}")

    return ExperimentConfig(
        seed=seed,
        system=system,
        training=training,
        prediction=prediction,
        quantum=quantum,
        out_dir=out_dir,
    )


def resolve_config(profile: str, config_path: Path | None, seed: int | None) -> ExperimentConfig:
    tree = copy.deepcopy(PROFILES[profile])
    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except OSError as exc:
            raise ConfigError("config", f"cannot read {config_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{config_path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config", "top level must be a JSON object")
        tree = deep_merge(tree, loaded)
    if seed is not None:
        tree["seed"] = seed
    return validate_config(tree)


# ---------------------------------------------------------------------------
# subcommands


def _resolve_dt(cfg: ExperimentConfig, e_max: float) -> float:
    if cfg.system.dt is not None:
        return cfg.system.dt
    if e_max <= 0.0:
        raise ValueError(f"dt rule {DT_RULE} needs E_max > 0, got {e_max}")
    return 1.0 / (200.0 * e_max)


def cmd_generate(cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> int:
    """Evolve the chain and write training, prediction, and target series."""
    tr, pr = cfg.training, cfg.prediction
    H = build_tfim_hamiltonian(cfg.system.n_qubits, cfg.system.J, cfg.system.h)
    dt = _resolve_dt(cfg, max_eigen_energy(H))
    history = tr.features.history
    # deterministic start: |0...0> then burn-in; the seed only feeds
    # verification fixtures, never the physics
    s0 = np.zeros(2**cfg.system.n_qubits, dtype=complex)
    s0[0] = 1.0

    # One contiguous trajectory covers both phases: training inputs live at
    # raw indices [0, history + T), prediction inputs follow immediately.
    n_states = history + tr.T + pr.T_tilde + 1
    series = evolve_series(propagator(H, dt), s0, n_states, burn_in=tr.burn_in)
    train = TimeSeries(
        states=series.states[: history + tr.T],
        dt=dt,
        burn_in=tr.burn_in,
        origin="evolve_series",
    )
    predict = TimeSeries(
        states=series.states[tr.T :],
        dt=dt,
        burn_in=tr.burn_in + tr.T,
        origin="evolve_series",
    )

    skip = tr.tau * dt
    t_train = np.stack(
        [state_at(H, train.states[history + j], skip) for j in range(tr.T)]
    )
    t_pred = np.stack(
        [state_at(H, predict.states[history + k], skip) for k in range(pr.T_tilde)]
    )
    target_train = TimeSeries(states=t_train, dt=dt, burn_in=tr.burn_in, origin="state_at")
    target_predict = TimeSeries(
        states=t_pred, dt=dt, burn_in=tr.burn_in + tr.T, origin="state_at"
    )

    system = {"n_qubits": cfg.system.n_qubits, "J": cfg.system.J, "h": cfg.system.h}
    for name, data in (
        (TRAIN_FILE, train),
        (PREDICT_FILE, predict),
        (TARGET_TRAIN_FILE, target_train),
        (TARGET_PREDICT_FILE, target_predict),
    ):
        save_series(out / name, data, system=system)
        print(f"wrote {out / name} ({len(data)} states, dt = {dt:.6g})")
    return 0


def cmd_train(cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> int:
    """Fit the readout on the generated series and write the model file."""
    tr = cfg.training
    series = load_series(out / TRAIN_FILE)
    targets = load_series(out / TARGET_TRAIN_FILE)
    fc = tr.features
    if len(series) - fc.history != tr.T:
        raise ValueError(
            f"{out / TRAIN_FILE} holds {len(series)} states; training.T = {tr.T} "
            f"with history {fc.history} expected {fc.history + tr.T}"
        )
    X, Y = assemble_training(series, targets, fc, layout=tr.layout)
    model = train_weights(X, Y, tr.lam, config=fc)
    save_model(out / MODEL_FILE, model)
    print(
        f"wrote {out / MODEL_FILE} (W {model.W.shape[0]}x{model.W.shape[1]}, "
        f"layout {model.layout}, lambda = {model.lam:g})"
    )
    print(
        f"conditioning: kappa_X = {model.kappa_X:.6g}, kappa = {model.kappa:.6g}, "
        f"kappa_W = {model.kappa_W:.6g}, ||X|| = {model.norm_X:.6g}, "
        f"||Y|| = {model.norm_Y:.6g}, ||W|| = {model.norm_W:.6g}"
    )
    return 0


def _feature_at(
    states: np.ndarray | Sequence[np.ndarray],
    k: int,
    fc: FeatureConfig,
    layout: str,
) -> np.ndarray:
    o = delay_vector(states, k, fc.m, fc.delta)
    if layout == "padded":
        return padded_feature_vector(o / np.linalg.norm(o))
    return feature_vector(o, fc.p)


def _predict_skip_run(
    model: WeightModel, series: TimeSeries, T_tilde: int, chunk: int = 2048
) -> tuple[np.ndarray, np.ndarray]:
    """Raw readouts W x for inputs at indices history .. history + T_tilde - 1."""
    fc = model.config
    raw = np.empty((T_tilde, model.W.shape[0]), dtype=complex)
    for lo in range(0, T_tilde, chunk):
        hi = min(lo + chunk, T_tilde)
        cols = np.stack(
            [
                _feature_at(series.states, fc.history + k, fc, model.layout)
                for k in range(lo, hi)
            ],
            axis=1,
        )
        raw[lo:hi] = (model.W @ cols).T
    norms = np.linalg.norm(raw, axis=1)
    bad = norms <= 1e-14 * max(model.norm_W, 1.0)
    if bad.any():
        k = int(np.argmax(bad))
        raise ValueError(
            f"degenerate prediction: ||W x|| = {norms[k]:.3e} is numerically "
            f"zero at step {k}"
        )
    return raw, raw / norms[:, None]


def _predict_iterative_run(
    model: WeightModel, series: TimeSeries, T_tilde: int
) -> tuple[np.ndarray, np.ndarray]:
    """Rollout plus the raw readout behind each emitted state.

    The raw vectors are rebuilt from the rollout's own window, which
    repeats the exact float operations of the rollout itself, so
    raw / ||raw|| reproduces the emitted states bit for bit.
    """
    fc = model.config
    seed = series.states[: fc.history + 1]
    roll = predict_iterative(model, seed, T_tilde)
    buffer = np.concatenate([seed, roll.states], axis=0)
    raw = np.empty((T_tilde, model.W.shape[0]), dtype=complex)
    for j in range(T_tilde):
        x = _feature_at(buffer, fc.history + j, fc, model.layout)
        raw[j] = model.W @ x
    return raw, roll.states


def cmd_predict(cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> int:
    """Forecast, then write the predicted states and the per-step metrics."""
    pr = cfg.prediction
    model = load_model(out / MODEL_FILE)
    if model.config is None:
        raise ValueError(f"{out / MODEL_FILE} carries no feature config")
    fc = model.config
    series = load_series(out / PREDICT_FILE)
    if series.dim != model.W.shape[0]:
        raise ValueError(
            f"state dimension {series.dim} does not match the model's "
            f"{model.W.shape[0]}"
        )

    if pr.mode == "iterative":
        if fc.tau != 1:
            raise ConfigError(
                "prediction.mode",
                f"iterative rollout needs a tau = 1 model, got tau = {fc.tau}",
            )
        need = fc.history + 1 + pr.T_tilde
        if len(series) < need:
            raise ValueError(
                f"{out / PREDICT_FILE} holds {len(series)} states; iterative mode "
                f"needs {need} (seed window + T_tilde in-series targets)"
            )
        raw, predicted = _predict_iterative_run(model, series, pr.T_tilde)
        targets = series.states[fc.history + 1 : fc.history + 1 + pr.T_tilde]
    else:
        need = fc.history + pr.T_tilde
        if len(series) < need:
            raise ValueError(
                f"{out / PREDICT_FILE} holds {len(series)} states; skip mode "
                f"needs {need} (delay history + T_tilde inputs)"
            )
        target_series = load_series(out / TARGET_PREDICT_FILE)
        if len(target_series) < pr.T_tilde:
            raise ValueError(
                f"{out / TARGET_PREDICT_FILE} holds {len(target_series)} states, "
                f"need {pr.T_tilde}"
            )
        raw, predicted = _predict_skip_run(model, series, pr.T_tilde)
        targets = target_series.states[: pr.T_tilde]

    table = metrics_table(predicted, raw, targets)
    save_series(
        out / PREDICTED_FILE,
        TimeSeries(states=predicted, dt=series.dt, burn_in=0, origin=f"predict_{pr.mode}"),
    )
    write_metrics(out / METRICS_FILE, table)
    fid = table["fidelity"]
    print(f"wrote {out / PREDICTED_FILE} ({pr.T_tilde} states, mode {pr.mode})")
    print(f"wrote {out / METRICS_FILE}")
    print(
        f"fidelity: min = {fid.min():.6f}, mean = {fid.mean():.6f}, "
        f"final = {fid[-1]:.6f}"
    )
    return 0


def _be_params(be) -> dict:
    return {
        "alpha": float(be.alpha),
        "ancillas": int(be.n_ancilla),
        "epsilon": float(be.epsilon),
    }


def cmd_verify_quantum(cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> int:
    """Run the dense circuit pipeline on a toy series and report residuals.

    Every stage is checked against its classical counterpart: feature and
    target encodings against the assembled (X, Y), the weight encoding
    against the regularized least-squares W, the prediction circuit against
    the one-shot classical forecast. Writes verify.json and prints it.
    """
    q = cfg.quantum
    if not q.enable:
        raise ConfigError("quantum.enable", "quantum verification is disabled")
    if q.d > 2 or q.T > 8:
        raise ConfigError(
            "quantum",
            f"dense verification is limited to d <= 2 and T <= 8, got "
            f"d = {q.d}, T = {q.T}",
        )
    if q.T != 2**q.t:
        raise ConfigError(
            "quantum.T",
            f"the index-erasing Hadamard layer needs T = 2^t; got T = {q.T} "
            f"with t = {q.t}",
        )

    dims = CircuitDims(d=q.d, t=q.t, T=q.T)
    fc = FeatureConfig(m=2, p=2, delta=1, tau=q.tau, lam=q.lam)
    rng = np.random.default_rng(cfg.seed)
    states = rng.normal(size=(fc.history + q.T + q.tau, 2**q.d)) + 1j * rng.normal(
        size=(fc.history + q.T + q.tau, 2**q.d)
    )
    states /= np.linalg.norm(states, axis=1, keepdims=True)
    series = TimeSeries(states=states, dt=1.0, burn_in=0, origin="verification-fixture")
    k0 = fc.history

    # classical reference
    trimmed, targets = aligned_targets(series, fc)
    X, Y = assemble_training(trimmed, targets, fc, layout="padded")
    model = train_weights(X, Y, q.lam, config=fc)

    # stage 1: delay oracles -> feature encoding (explicit unitary route,
    # cross-checked against the column-assembled route)
    O0 = oracle_from_series(series, 0, q.T, t=q.t, k0=k0)
    O1 = oracle_from_series(series, -fc.delta, q.T, t=q.t, k0=k0)
    u_f = build_u_f(build_u_lin([O0, O1], fc.m), fc.p, q.t, oracles=[O0, O1])
    be_X = feature_block_encoding(u_f, dims)
    be_X_cols = feature_encoding_from_series(series, dims, delta=fc.delta, k0=k0)
    route_gap = float(np.linalg.norm(be_X.corner - be_X_cols.corner))
    res_X = verify_encoding(be_X, X.columns)

    # stage 2: target encoding (amplified to alpha = sqrt(2) ||Y||)
    O_tau = oracle_from_series(series, q.tau, q.T, t=q.t, k0=k0)
    delta_Y = q.delta_W * 1e-4
    be_Y = target_block_encoding(O_tau, dims, delta_Y)
    pad = np.zeros((dims.D, 2 * 2**dims.enc_ancillas), dtype=complex)
    pad[:, : q.T] = Y
    res_Y = verify_encoding(be_Y, pad)

    # stage 3: weight encoding and extraction
    be_W, cost_W = build_weight_encoding(be_X, be_Y, q.lam, q.delta_W, dims)
    W_q = extract_weight_block(be_W, dims)
    weight_err = float(np.linalg.norm(W_q - model.W, 2))

    # stage 4: prediction circuit vs the classical one-shot forecast
    P0 = oracle_from_series(series, 0, q.T, t=q.t, k0=k0)
    P1 = oracle_from_series(series, -fc.delta, q.T, t=q.t, k0=k0)
    pred_states, probs, cost_P = prediction_circuit(be_W, [P0, P1], dims, q.delta)
    fids = [
        fidelity(pred_states[k], predict_skip(model, X.columns[:, k]).state)
        for k in range(q.T)
    ]

    acc = ancilla_accounting(q.d, q.t)
    checks = {
        "feature_residual": res_X <= 1e-9,
        "target_residual": res_Y <= delta_Y,
        "weight_error": weight_err <= q.delta_W,
        "prediction_fidelity": min(fids) >= 1.0 - q.delta,
        "ancilla_match": be_W.n_ancilla == acc.w,
    }
    report = {
        "dims": dims.as_dict(),
        "config": {
            "d": q.d,
            "T": q.T,
            "t": q.t,
            "tau": q.tau,
            "lam": q.lam,
            "delta_W": q.delta_W,
            "delta": q.delta,
            "seed": cfg.seed,
        },
        "residuals": {
            "features": res_X,
            "feature_route_gap": route_gap,
            "target": res_Y,
            "weights": weight_err,
        },
        "weight_error": {"spectral": weight_err, "bound": q.delta_W},
        "prediction": {
            "fidelities": [float(f) for f in fids],
            "min_fidelity": float(min(fids)),
            "bound": 1.0 - q.delta,
            "success_probabilities": [float(p) for p in probs],
        },
        "parameters": {
            "features": _be_params(be_X),
            "target": _be_params(be_Y),
            "weights": _be_params(be_W),
        },
        "conditioning": {
            "kappa_X": model.kappa_X,
            "kappa": model.kappa,
            "kappa_W": model.kappa_W,
            "norm_X": model.norm_X,
            "norm_Y": model.norm_Y,
            "norm_W": model.norm_W,
        },
        "costs": {"weights": cost_W.as_dict(), "prediction": cost_P.as_dict()},
        "ancillas": {"w": acc.w, "w_prime": acc.w_prime, "encoding_w": be_W.n_ancilla},
        "oracle_calls": {
            "training": int(O0.call_counter + O1.call_counter + O_tau.call_counter),
            "prediction": int(P0.call_counter + P1.call_counter),
        },
        "circuit": circuit_description(dims, m=fc.m, p=fc.p),
        "checks": checks,
    }
    save_report(out / VERIFY_FILE, report)
    print(json.dumps(report, indent=2, sort_keys=True))
    if not all(checks.values()):
        failed = sorted(name for name, ok in checks.items() if not ok)
        raise ValueError(f"verification failed: {', '.join(failed)}")
    return 0


def cmd_report(cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> int:
    """Aggregate metric files into a summary JSON plus rendered figures."""
    paths = [Path(p) for p in args.metrics] or [out / METRICS_FILE]
    tables: dict[str, dict[str, np.ndarray]] = {}
    for path in paths:
        label = path.stem
        if label in tables:
            label = str(path)
        tables[label] = read_metrics(path)

    report = summarize(tables)
    report["sources"] = {label: str(path) for label, path in zip(tables, paths)}
    figures = render_figures(out, tables)
    report["figures"] = [str(p) for p in figures]
    save_report(out / REPORT_FILE, report)

    header = f"{'label':<20} {'steps':>7} {'min fid':>10} {'mean fid':>10} {'final fid':>10} {'rms X0':>10} {'rms X0X1':>10}"
    print(header)
    for row in report["comparison"]:
        print(
            f"{row['label']:<20} {row['steps']:>7d} {row['min_fidelity']:>10.6f} "
            f"{row['mean_fidelity']:>10.6f} {row['final_fidelity']:>10.6f} "
            f"{row['rms_X0']:>10.6f} {row['rms_X0X1']:>10.6f}"
        )
    for path in [out / REPORT_FILE, *figures]:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# entry point


def _emit_error(kind: str, message: str, field: str | None = None) -> None:
    payload: dict = {"error": kind, "message": message}
    if field is not None:
        payload["field"] = field
    print(json.dumps(payload), file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    # usage failures follow the same machine-readable stderr contract
    def error(self, message: str) -> None:  # type: ignore[override]
        _emit_error("UsageError", message)
        raise SystemExit(2)


_COMMANDS: dict[str, Callable[[ExperimentConfig, Path, argparse.Namespace], int]] = {
    "generate": cmd_generate,
    "train": cmd_train,
    "predict": cmd_predict,
    "verify-quantum": cmd_verify_quantum,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON overrides")
    common.add_argument("--out", type=Path, default=None, help="artifact directory")
    common.add_argument(
        "--profile", choices=sorted(PROFILES), default="ci", help="base configuration"
    )
    common.add_argument("--seed", type=int, default=None, help="overrides config seed")

    parser = _Parser(prog="statecast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "generate": "evolve the chain and write training/prediction/target series",
        "train": "fit the readout and write the model file",
        "predict": "forecast and write predicted states + per-step metrics",
        "verify-quantum": "run the dense circuit pipeline against the classical fit",
        "report": "aggregate metric files into summary JSON and figures",
    }
    for name in _COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "report":
            sp.add_argument(
                "metrics", nargs="*", type=Path, help="metric CSVs (default: --out's)"
            )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already wrote the message
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args.profile, args.config, args.seed)
        out = args.out if args.out is not None else Path(cfg.out_dir or "runs")
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        _emit_error("ConfigError", exc.message, field=exc.field)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
