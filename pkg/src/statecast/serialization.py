"""On-disk formats: binary state series, weight models, metrics tables.

Binary files share one frame: a 5-byte magic, an 8-byte little-endian
header length, a UTF-8 JSON header, then the raw payload as
little-endian complex128 (interleaved float64 re/im pairs). Complex
payloads round-trip bit-exactly; the JSON header carries the scalars,
which Python's repr-based JSON floats also round-trip exactly.

The metrics table is a plain CSV with a fixed column set so external
tools can recompute every aggregate; values are printed with %.17g,
which is lossless for float64. docs/FORMATS.md is the reference text
for all three formats.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .ngrc import FeatureConfig, WeightModel
from .tfim import TimeSeries

MAGIC_SERIES = b"QTS1\n"
MAGIC_MODEL = b"QWM1\n"

METRIC_COLUMNS = (
    "step",
    "fidelity",
    "exp_X0",
    "exp_X0X1",
    "raw_norm",
    "exp_X0_target",
    "exp_X0X1_target",
    "amp_err_raw",
    "amp_err_aligned",
)


def _write_framed(path: Path, magic: bytes, header: dict, payload: bytes) -> None:
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(payload)


def _read_framed(path: Path, magic: bytes, kind: str) -> tuple[dict, bytes]:
    raw = Path(path).read_bytes()
    if raw[: len(magic)] != magic:
        raise ValueError(f"{path} is not a {kind} file (magic {raw[:5]!r})")
    (hlen,) = struct.unpack("<Q", raw[len(magic) : len(magic) + 8])
    start = len(magic) + 8
    if start + hlen > len(raw):
        raise ValueError(f"{path} is truncated inside the header")
    header = json.loads(raw[start : start + hlen].decode("utf-8"))
    return header, raw[start + hlen :]


def _series_header(series: TimeSeries, system: dict | None) -> dict:
    header = {
        "count": int(series.states.shape[0]),
        "dim": int(series.states.shape[1]),
        "dt": float(series.dt),
        "burn_in": int(series.burn_in),
        "origin": series.origin,
    }
    if system is not None:
        header["system"] = {
            "n_qubits": int(system["n_qubits"]),
            "J": float(system["J"]),
            "h": float(system["h"]),
        }
    return header


def save_series(
    path: str | Path, series: TimeSeries, system: dict | None = None
) -> None:
    """Binary series file; `system` optionally records (n_qubits, J, h)."""
    payload = np.ascontiguousarray(series.states, dtype="<c16").tobytes()
    _write_framed(Path(path), MAGIC_SERIES, _series_header(series, system), payload)


def load_series(path: str | Path) -> TimeSeries:
    header, payload = _read_framed(Path(path), MAGIC_SERIES, "state-series")
    count, dim = header["count"], header["dim"]
    want = count * dim * 16
    if len(payload) != want:
        raise ValueError(
            f"{path} carries {len(payload)} payload bytes, expected {want}"
        )
    states = np.frombuffer(payload, dtype="<c16").astype(np.complex128)
    return TimeSeries(
        states=states.reshape(count, dim),
        dt=header["dt"],
        burn_in=header["burn_in"],
        origin=header.get("origin", ""),
    )


def load_series_header(path: str | Path) -> dict:
    """Just the JSON header of a binary series file (metadata inspection)."""
    header, _ = _read_framed(Path(path), MAGIC_SERIES, "state-series")
    return header


def save_series_json(
    path: str | Path, series: TimeSeries, system: dict | None = None
) -> None:
    """JSON twin of the binary format, for small series.

    States are nested [re, im] pairs; Python's repr-based JSON floats make
    the round trip exact at float64, but the file grows ~4x over binary,
    so keep it to short fixtures.
    """
    doc = _series_header(series, system)
    doc["states"] = [
        [[float(z.real), float(z.imag)] for z in row] for row in series.states
    ]
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_series_json(path: str | Path) -> TimeSeries:
    with open(path) as fh:
        doc = json.load(fh)
    states = np.array(
        [[complex(re, im) for re, im in row] for row in doc["states"]],
        dtype=complex,
    ).reshape(doc["count"], doc["dim"])
    return TimeSeries(
        states=states,
        dt=doc["dt"],
        burn_in=doc["burn_in"],
        origin=doc.get("origin", ""),
    )


def save_model(path: str | Path, model: WeightModel) -> None:
    header = {
        "rows": int(model.W.shape[0]),
        "cols": int(model.W.shape[1]),
        "lam": model.lam,
        "layout": model.layout,
        "kappa_X": model.kappa_X,
        "kappa": model.kappa,
        "kappa_W": model.kappa_W,
        "norm_X": model.norm_X,
        "norm_Y": model.norm_Y,
        "norm_W": model.norm_W,
        "config": None
        if model.config is None
        else {
            "m": model.config.m,
            "p": model.config.p,
            "delta": model.config.delta,
            "tau": model.config.tau,
            "lam": model.config.lam,
        },
    }
    payload = np.ascontiguousarray(model.W, dtype="<c16").tobytes()
    _write_framed(Path(path), MAGIC_MODEL, header, payload)


def load_model(path: str | Path) -> WeightModel:
    header, payload = _read_framed(Path(path), MAGIC_MODEL, "weight-model")
    rows, cols = header["rows"], header["cols"]
    want = rows * cols * 16
    if len(payload) != want:
        raise ValueError(
            f"{path} carries {len(payload)} payload bytes, expected {want}"
        )
    W = np.frombuffer(payload, dtype="<c16").astype(np.complex128).reshape(rows, cols)
    cfg = header["config"]
    return WeightModel(
        W=W,
        lam=header["lam"],
        layout=header["layout"],
        kappa_X=header["kappa_X"],
        kappa=header["kappa"],
        kappa_W=header["kappa_W"],
        norm_X=header["norm_X"],
        norm_Y=header["norm_Y"],
        norm_W=header["norm_W"],
        config=None if cfg is None else FeatureConfig(**cfg),
    )


def write_metrics(path: str | Path, table: dict[str, np.ndarray]) -> None:
    """Write the per-step metrics CSV (fixed METRIC_COLUMNS order)."""
    missing = [c for c in METRIC_COLUMNS if c not in table]
    if missing:
        raise ValueError(f"metrics table lacks columns {missing}")
    n = len(table[METRIC_COLUMNS[0]])
    for c in METRIC_COLUMNS:
        if len(table[c]) != n:
            raise ValueError(f"column {c} has {len(table[c])} rows, expected {n}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        for i in range(n):
            row = [int(table["step"][i])]
            row += [
                "%.17g" % float(table[c][i]) for c in METRIC_COLUMNS if c != "step"
            ]
            writer.writerow(row)


def read_metrics(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != METRIC_COLUMNS:
            raise ValueError(
                f"{path} does not carry the metrics column set {METRIC_COLUMNS}"
            )
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path} contains no metric rows")
    cols = {}
    data = np.array(rows, dtype=float)
    for j, name in enumerate(METRIC_COLUMNS):
        cols[name] = data[:, j].astype(int) if name == "step" else data[:, j]
    return cols


def save_report(path: str | Path, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)
