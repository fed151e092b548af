"""Transverse-field Ising dynamics for small spin chains.

Builds the dense Hamiltonian

    H = -J * sum_i Z_i Z_{i+1} + h * sum_i X_i        (periodic boundary)

and exposes exact time evolution through a cached eigendecomposition: a
fixed-step propagator for generating long trajectories, and direct
evaluation of exp(-iHt)|s0> for arbitrary t (used to fetch far-future
target states without stepping through millions of intermediate states).

States are dense complex vectors with qubit 0 as the leftmost (most
significant) tensor factor. Everything here is pure; instances can be
shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Hamiltonian",
    "Propagator",
    "TimeSeries",
    "build_tfim_hamiltonian",
    "max_eigen_energy",
    "propagator",
    "evolve_series",
    "state_at",
]

# Pauli matrices, qubit 0 outermost in Kronecker products.
_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

_NORM_TOL = 1e-8


def _local(op: np.ndarray, site: int, n: int) -> np.ndarray:
    """op acting on `site` of an n-qubit register, identity elsewhere."""
    out = np.array([[1.0 + 0.0j]])
    for i in range(n):
        out = np.kron(out, op if i == site else np.eye(2, dtype=complex))
    return out


@dataclass
class Hamiltonian:
    """Dense Hermitian Hamiltonian with its couplings kept as metadata.

    The eigendecomposition is computed once, on first use, and cached;
    propagator() and state_at() both read from the cache.
    """

    n_qubits: int
    J: float
    h: float
    matrix: np.ndarray
    _eig: tuple[np.ndarray, np.ndarray] | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        dim = 2**self.n_qubits
        if self.matrix.shape != (dim, dim):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match "
                f"{self.n_qubits} qubits (expected {(dim, dim)})"
            )
        if np.linalg.norm(self.matrix - self.matrix.conj().T) > 1e-10:
            raise ValueError("Hamiltonian matrix must be Hermitian")

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """(eigenvalues, eigenvectors), cached. matrix = V diag(E) V^dag."""
        if self._eig is None:
            evals, evecs = np.linalg.eigh(self.matrix)
            self._eig = (evals, evecs)
        return self._eig


@dataclass(frozen=True)
class Propagator:
    """Unitary single-step evolution operator exp(-iH dt)."""

    matrix: np.ndarray
    dt: float

    def __post_init__(self) -> None:
        u = self.matrix
        if np.linalg.norm(u @ u.conj().T - np.eye(u.shape[0])) > 1e-10:
            raise ValueError("propagator is not unitary within 1e-10")


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled trajectory of normalized states (rows of `states`)."""

    states: np.ndarray  # (count, dim) complex
    dt: float
    burn_in: int
    origin: str = ""

    def __post_init__(self) -> None:
        if self.states.ndim != 2:
            raise ValueError("states must be a (count, dim) array")
        norms = np.linalg.norm(self.states, axis=1)
        if self.states.shape[0] and np.max(np.abs(norms - 1.0)) > 1e-8:
            worst = float(np.max(np.abs(norms - 1.0)))
            raise ValueError(f"states must be unit norm (worst deviation {worst:.3e})")

    def __len__(self) -> int:
        return self.states.shape[0]

    def __getitem__(self, k: int) -> np.ndarray:
        return self.states[k]

    @property
    def dim(self) -> int:
        return self.states.shape[1]


def build_tfim_hamiltonian(n_qubits: int, J: float, h: float) -> Hamiltonian:
    """Dense transverse-field Ising Hamiltonian on a periodic chain.

    H = -J * sum_{i} Z_i Z_{i+1 mod n} + h * sum_i X_i. Requires n >= 2
    (the periodic ZZ sum needs at least two sites).
    """
    if n_qubits < 2:
        raise ValueError(f"need at least 2 qubits for a periodic chain, got {n_qubits}")
    dim = 2**n_qubits
    H = np.zeros((dim, dim), dtype=complex)
    for i in range(n_qubits):
        zz = _local(_SZ, i, n_qubits) @ _local(_SZ, (i + 1) % n_qubits, n_qubits)
        H -= J * zz
        H += h * _local(_SX, i, n_qubits)
    return Hamiltonian(n_qubits=n_qubits, J=J, h=h, matrix=H)


def max_eigen_energy(H: Hamiltonian) -> float:
    """Largest eigenvalue of H (sets the time step through dt = 1/(200 E_max))."""
    evals, _ = H.eig()
    return float(evals[-1])


def propagator(H: Hamiltonian, dt: float) -> Propagator:
    """exp(-iH dt) from the cached eigendecomposition."""
    if not np.isfinite(dt):
        raise ValueError(f"dt must be finite, got {dt}")
    evals, evecs = H.eig()
    phases = np.exp(-1j * evals * dt)
    U = (evecs * phases) @ evecs.conj().T
    return Propagator(matrix=U, dt=dt)


def evolve_series(
    P: Propagator, s0: np.ndarray, n_steps: int, burn_in: int = 0
) -> TimeSeries:
    """Iterate s_{k+1} = P s_k and keep the n_steps states after burn_in.

    The returned series starts at index `burn_in` of the raw iteration
    (state 0 of the output is P^burn_in s0).
    """
    if n_steps < 0 or burn_in < 0:
        raise ValueError("n_steps and burn_in must be nonnegative")
    nrm = np.linalg.norm(s0)
    if abs(nrm - 1.0) > _NORM_TOL:
        raise ValueError(f"initial state norm {nrm} deviates from 1 beyond {_NORM_TOL}")
    dim = P.matrix.shape[0]
    if s0.shape != (dim,):
        raise ValueError(f"state dim {s0.shape} does not match propagator dim {dim}")

    s = s0.astype(complex)
    for _ in range(burn_in):
        s = P.matrix @ s
    out = np.empty((n_steps, dim), dtype=complex)
    for k in range(n_steps):
        out[k] = s
        s = P.matrix @ s
    return TimeSeries(states=out, dt=P.dt, burn_in=burn_in, origin="evolve_series")


def state_at(H: Hamiltonian, s0: np.ndarray, t: float) -> np.ndarray:
    """exp(-iHt) s0 evaluated directly in the eigenbasis.

    One matrix-vector round trip per call regardless of t, which is what
    makes distant-target generation (t of order 1e6 steps) affordable.
    """
    nrm = np.linalg.norm(s0)
    if abs(nrm - 1.0) > _NORM_TOL:
        raise ValueError(f"initial state norm {nrm} deviates from 1 beyond {_NORM_TOL}")
    evals, evecs = H.eig()
    if s0.shape != (evals.shape[0],):
        raise ValueError("state dimension does not match the Hamiltonian")
    coeffs = evecs.conj().T @ s0.astype(complex)
    return evecs @ (np.exp(-1j * evals * t) * coeffs)
