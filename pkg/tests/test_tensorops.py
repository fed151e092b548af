"""Register plumbing: operator embedding, swaps, size guards."""

import numpy as np
import pytest

from statecast.tensorops import (
    DENSE_DIM_CAP,
    check_dense_cap,
    embed_operator,
    next_power_of_two,
    swap_registers,
)

_X = np.array([[0, 1], [1, 0]], dtype=complex)


def test_embed_single_slot_matches_kron():
    out = embed_operator(_X, [2, 2, 2], (1,))
    assert np.array_equal(out, np.kron(np.kron(np.eye(2), _X), np.eye(2)))


def test_embed_contiguous_pair_matches_kron():
    rng = np.random.default_rng(0)
    U = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    out = embed_operator(U, [2, 2, 3], (0, 1))
    assert np.allclose(out, np.kron(U, np.eye(3)), atol=1e-14)


def test_embed_split_slots_basis_action():
    # U on slots (0, 2) of a (2, 3, 2) stack: check every basis vector
    rng = np.random.default_rng(1)
    U = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    out = embed_operator(U, [2, 3, 2], (0, 2))
    for a in range(2):
        for j in range(3):
            for b in range(2):
                v = np.zeros(12, dtype=complex)
                v[(a * 3 + j) * 2 + b] = 1.0
                got = out @ v
                expected = np.zeros(12, dtype=complex)
                for ap in range(2):
                    for bp in range(2):
                        expected[(ap * 3 + j) * 2 + bp] = U[ap * 2 + bp, a * 2 + b]
                assert np.allclose(got, expected, atol=1e-14)


def test_embed_reversed_slot_order():
    # active slots listed in reverse: U sees (slot1, slot0)
    rng = np.random.default_rng(2)
    U = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    out = embed_operator(U, [2, 2], (1, 0))
    S = swap_registers(2, 2)
    assert np.allclose(out, S @ U @ S, atol=1e-14)


def test_embed_validates_slots_and_shape():
    with pytest.raises(ValueError, match="bad active slots"):
        embed_operator(_X, [2, 2], (0, 0))
    with pytest.raises(ValueError, match="bad active slots"):
        embed_operator(_X, [2, 2], (3,))
    with pytest.raises(ValueError, match="does not match"):
        embed_operator(_X, [2, 4], (1,))


def test_swap_exchanges_registers():
    rng = np.random.default_rng(3)
    a = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    b = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    S = swap_registers(2, 4)
    assert np.allclose(S @ np.kron(a, b), np.kron(b, a), atol=1e-14)
    # permutation matrices are orthogonal
    assert np.array_equal(S @ S.T, np.eye(8))


def test_next_power_of_two_anchors():
    assert next_power_of_two(1) == 1
    assert next_power_of_two(5) == 8
    assert next_power_of_two(8) == 8
    with pytest.raises(ValueError):
        next_power_of_two(0)


def test_dense_cap_guard():
    check_dense_cap(DENSE_DIM_CAP)  # at the cap is fine
    with pytest.raises(ValueError, match="shrink"):
        check_dense_cap(DENSE_DIM_CAP + 1, "test operator")
