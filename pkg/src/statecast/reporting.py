"""Forecast quality metrics: per-step tables, aggregates, figures.

The per-step table is the unit of exchange (see serialization.METRIC_COLUMNS
for the column set); everything else here reduces tables to summary numbers
or renders them to PNG. Figures use the Agg backend so the report path works
on headless machines.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .ngrc import fidelity, pauli_expectation

X0 = ((0, "X"),)
X0X1 = ((0, "X"), (1, "X"))


def metrics_table(
    predicted: np.ndarray,
    raw: np.ndarray,
    targets: np.ndarray,
    steps: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """Per-step forecast metrics against the exact states.

    `predicted` rows must be unit norm, `raw` holds the unnormalized
    readout vectors (for norm-drift tracking), `targets` the exact
    states. The aligned amplitude error is min_phi ||e^{i phi} s_hat - s||,
    i.e. sqrt(2 - 2 |<s_hat|s>|) for unit vectors.
    """
    K = predicted.shape[0]
    if raw.shape != predicted.shape or targets.shape != predicted.shape:
        raise ValueError(
            f"shape mismatch: predicted {predicted.shape}, raw {raw.shape}, "
            f"targets {targets.shape}"
        )
    if steps is None:
        steps = np.arange(K)
    fid = np.empty(K)
    x0 = np.empty(K)
    x0x1 = np.empty(K)
    x0_t = np.empty(K)
    x0x1_t = np.empty(K)
    for i in range(K):
        fid[i] = fidelity(predicted[i], targets[i])
        x0[i] = pauli_expectation(predicted[i], X0)
        x0x1[i] = pauli_expectation(predicted[i], X0X1)
        x0_t[i] = pauli_expectation(targets[i], X0)
        x0x1_t[i] = pauli_expectation(targets[i], X0X1)
    overlap = np.abs(np.einsum("ij,ij->i", predicted.conj(), targets))
    return {
        "step": np.asarray(steps, dtype=int),
        "fidelity": fid,
        "exp_X0": x0,
        "exp_X0X1": x0x1,
        "raw_norm": np.linalg.norm(raw, axis=1),
        "exp_X0_target": x0_t,
        "exp_X0X1_target": x0x1_t,
        "amp_err_raw": np.linalg.norm(raw - targets, axis=1),
        "amp_err_aligned": np.sqrt(np.maximum(0.0, 2.0 - 2.0 * overlap)),
    }


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered-weight running mean, length len(values) - window + 1."""
    v = np.asarray(values, dtype=float)
    if window < 1 or window > v.shape[0]:
        raise ValueError(
            f"window must lie in [1, {v.shape[0]}], got {window}"
        )
    return np.convolve(v, np.full(window, 1.0 / window), mode="valid")


def aggregate(table: dict[str, np.ndarray]) -> dict:
    """Reduce one metrics table to its headline numbers."""
    fid = table["fidelity"]
    d_x0 = table["exp_X0"] - table["exp_X0_target"]
    d_x0x1 = table["exp_X0X1"] - table["exp_X0X1_target"]
    return {
        "steps": int(len(fid)),
        "fidelity": {
            "min": float(fid.min()),
            "mean": float(fid.mean()),
            "final": float(fid[-1]),
        },
        "rms_X0": float(np.sqrt(np.mean(d_x0**2))),
        "rms_X0X1": float(np.sqrt(np.mean(d_x0x1**2))),
        "raw_norm": {
            "min": float(table["raw_norm"].min()),
            "max": float(table["raw_norm"].max()),
            "mean": float(table["raw_norm"].mean()),
        },
        "amp_err_aligned_max": float(table["amp_err_aligned"].max()),
    }


def comparison_table(tables: dict[str, dict[str, np.ndarray]]) -> list[dict]:
    """One row of headline numbers per labeled run, sorted by label."""
    rows = []
    for label in sorted(tables):
        agg = aggregate(tables[label])
        rows.append(
            {
                "label": label,
                "steps": agg["steps"],
                "min_fidelity": agg["fidelity"]["min"],
                "mean_fidelity": agg["fidelity"]["mean"],
                "final_fidelity": agg["fidelity"]["final"],
                "rms_X0": agg["rms_X0"],
                "rms_X0X1": agg["rms_X0X1"],
            }
        )
    return rows


def summarize(tables: dict[str, dict[str, np.ndarray]]) -> dict:
    return {
        "aggregates": {label: aggregate(t) for label, t in sorted(tables.items())},
        "comparison": comparison_table(tables),
    }


def render_figures(
    out_dir: str | Path, tables: dict[str, dict[str, np.ndarray]]
) -> list[Path]:
    """Render fidelity, observable, and norm-drift figures to PNG files.

    Returns the written paths (fidelity.png, observables.png,
    norm_drift.png) inside out_dir.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = sorted(tables)
    written = []

    fig, ax = plt.subplots(figsize=(7.0, 4.0), dpi=120)
    for label in labels:
        t = tables[label]
        ax.plot(t["step"], t["fidelity"], lw=0.9, label=label)
        if len(t["fidelity"]) >= 300:
            ma = moving_average(t["fidelity"], 100)
            ax.plot(t["step"][99:], ma, lw=1.6, ls="--", alpha=0.8)
    ax.set_xlabel("prediction step")
    ax.set_ylabel(r"$|\langle \hat s | s \rangle|^2$")
    ax.set_title("forecast fidelity")
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    path = out / "fidelity.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, axes = plt.subplots(2, 1, figsize=(7.0, 5.6), dpi=120, sharex=True)
    for label in labels:
        t = tables[label]
        axes[0].plot(t["step"], t["exp_X0"], lw=0.9, label=f"{label} forecast")
        axes[0].plot(
            t["step"], t["exp_X0_target"], lw=0.9, ls=":", label=f"{label} exact"
        )
        axes[1].plot(t["step"], t["exp_X0X1"], lw=0.9, label=f"{label} forecast")
        axes[1].plot(
            t["step"], t["exp_X0X1_target"], lw=0.9, ls=":", label=f"{label} exact"
        )
    axes[0].set_ylabel(r"$\langle X_0 \rangle$")
    axes[1].set_ylabel(r"$\langle X_0 X_1 \rangle$")
    axes[1].set_xlabel("prediction step")
    axes[0].set_title("single- and two-site observables")
    axes[0].legend(loc="upper right", fontsize=7, ncol=2)
    fig.tight_layout()
    path = out / "observables.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7.0, 4.0), dpi=120)
    for label in labels:
        t = tables[label]
        ax.plot(t["step"], t["raw_norm"], lw=0.9, label=label)
    ax.set_xlabel("prediction step")
    ax.set_ylabel(r"$\| W \tilde x \|$")
    ax.set_title("readout norm drift")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = out / "norm_drift.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    return written
