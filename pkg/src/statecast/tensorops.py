"""Dense tensor-register plumbing shared by the encoding and circuit layers.

All operators here are explicit matrices on tensor products of registers.
To keep memory honest, anything that would materialize a matrix above
DENSE_DIM_CAP x DENSE_DIM_CAP refuses with guidance instead of thrashing.
"""

from __future__ import annotations

import numpy as np

DENSE_DIM_CAP = 2**14


def check_dense_cap(dim: int, what: str = "operator") -> None:
    if dim > DENSE_DIM_CAP:
        raise ValueError(
            f"{what} dimension {dim} exceeds the dense cap {DENSE_DIM_CAP}; "
            "shrink d, T, or the ancilla budget"
        )


def embed_operator(
    U: np.ndarray, slot_dims: list[int], active: tuple[int, ...]
) -> np.ndarray:
    """Embed U, acting on the `active` slots (in that order), into the full
    tensor product of registers with dimensions slot_dims.

    Equivalent to tensoring with identities and permuting, done with a
    reshape/transpose so non-contiguous register layouts work too.
    """
    n = len(slot_dims)
    active = tuple(active)
    if sorted(active) != sorted(set(active)) or any(a >= n for a in active):
        raise ValueError(f"bad active slots {active} for {n} registers")
    dim_active = int(np.prod([slot_dims[a] for a in active]))
    if U.shape != (dim_active, dim_active):
        raise ValueError(
            f"operator shape {U.shape} does not match active slots {active} "
            f"of dims {[slot_dims[a] for a in active]}"
        )
    full = int(np.prod(slot_dims))
    check_dense_cap(full, "embedded operator")

    passive = [i for i in range(n) if i not in active]
    dim_passive = int(np.prod([slot_dims[i] for i in passive])) if passive else 1
    big = np.kron(U, np.eye(dim_passive, dtype=complex))

    # big lives on the register order active + passive; permute back.
    order = list(active) + passive
    dims_perm = [slot_dims[i] for i in order]
    # position of original slot i inside the permuted order
    inv = [order.index(i) for i in range(n)]
    big = big.reshape(dims_perm + dims_perm)
    big = big.transpose([inv[i] for i in range(n)] + [n + inv[i] for i in range(n)])
    return np.ascontiguousarray(big.reshape(full, full))


def swap_registers(dim_a: int, dim_b: int) -> np.ndarray:
    """Permutation sending |a>|b> -> |b>|a>."""
    check_dense_cap(dim_a * dim_b, "swap")
    P = np.zeros((dim_a * dim_b, dim_a * dim_b), dtype=complex)
    for a in range(dim_a):
        for b in range(dim_b):
            P[b * dim_a + a, a * dim_b + b] = 1.0
    return P


def next_power_of_two(n: int) -> int:
    if n < 1:
        raise ValueError(f"need a positive size, got {n}")
    return 1 << (n - 1).bit_length()
