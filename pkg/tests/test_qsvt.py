"""Polynomial singular-value inversion and the regularized pseudoinverse."""

import numpy as np
import pytest

from statecast.blockenc import (
    BlockEncoding,
    EncodingError,
    embed,
    multiply,
    verify_encoding,
)
from statecast.ngrc import kappa_regularized
from statecast.qsvt import (
    DEGREE_CONSTANT,
    build_inversion_polynomial,
    pseudoinverse,
    regularized_pseudoinverse,
    transform_singular_values,
)


def _random_matrix(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


# ---------------------------------------------------------------------------
# the inversion polynomial


def test_polynomial_endpoint_values():
    kappa, eps = 4.0, 1e-2
    poly = build_inversion_polynomial(kappa, eps)
    bound = eps / (2.0 * kappa)
    assert abs(poly(1.0 / kappa) - 0.5) <= bound
    assert abs(poly(1.0) - 1.0 / (2.0 * kappa)) <= bound


def test_polynomial_grid_bound():
    poly = build_inversion_polynomial(5.0, 1e-3)
    grid = np.linspace(0.2, 1.0, 10_000)
    err = np.abs(poly(grid) - 1.0 / (10.0 * grid))
    assert err.max() <= 1e-4  # eps/(2 kappa)
    assert np.abs(poly(grid)).max() <= 1.0


def test_polynomial_is_odd():
    poly = build_inversion_polynomial(3.0, 1e-2)
    assert np.all(poly.coefficients[0::2] == 0.0)
    xs = np.linspace(0.1, 1.0, 64)
    assert np.allclose(poly(-xs), -poly(xs), atol=1e-14)


@pytest.mark.parametrize("kappa", [2.0, 5.0, 10.0])
@pytest.mark.parametrize("eps", [1e-2, 1e-3])
def test_polynomial_degree_within_cap(kappa, eps):
    poly = build_inversion_polynomial(kappa, eps)
    assert poly.degree <= DEGREE_CONSTANT * kappa * np.log(kappa / eps)
    assert poly.degree % 2 == 1
    report = poly.certify()
    assert report["passed"]


def test_polynomial_certify_reports_bounds():
    poly = build_inversion_polynomial(2.0, 1e-2)
    report = poly.certify(grid_points=5000)
    assert report["sup_error"] <= report["error_bound"]
    assert report["max_abs"] <= 1.0
    assert report["degree"] == poly.degree


def test_polynomial_validates_inputs():
    with pytest.raises(ValueError, match="kappa"):
        build_inversion_polynomial(0.5, 1e-2)
    with pytest.raises(ValueError, match="eps"):
        build_inversion_polynomial(2.0, 2.0)
    with pytest.raises(ValueError, match="eps"):
        build_inversion_polynomial(2.0, 0.0)


def test_polynomial_degree_cap_failure_reports_achieved_error():
    with pytest.raises(ValueError, match="no polynomial of degree <= 3"):
        build_inversion_polynomial(10.0, 1e-3, degree_cap=3)


def test_polynomial_cost_grows_with_conditioning():
    # degree is the query count per oracle call; it must not shrink when
    # kappa grows or the error budget tightens
    degrees_kappa = [
        build_inversion_polynomial(k, 1e-2).degree for k in (2.0, 4.0, 8.0, 16.0)
    ]
    assert all(a <= b for a, b in zip(degrees_kappa, degrees_kappa[1:]))
    degrees_eps = [
        build_inversion_polynomial(4.0, e).degree for e in (1e-1, 1e-2, 1e-3, 1e-4)
    ]
    assert all(a <= b for a, b in zip(degrees_eps, degrees_eps[1:]))


# ---------------------------------------------------------------------------
# singular-value transformation


def test_transform_unitary_block():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(_random_matrix(rng, 4, 4))
    be = embed(Q, 1.0)
    poly = build_inversion_polynomial(1.5, 1e-3)
    out = transform_singular_values(be, poly)
    # all singular values sit at 1; the corner is P(1) Q^dag
    assert np.allclose(out.corner, poly(1.0) * Q.conj().T, atol=1e-10)
    assert out.n_ancilla == be.n_ancilla + 1
    assert out.block_dims == (4, 4)
    # the block approximates the inverse Q^dag under the declared alpha
    assert verify_encoding(out, Q.conj().T) <= out.epsilon + 1e-9


def test_transform_diagonal_per_singular_value():
    A = np.diag([1.0, 0.5]).astype(complex)
    be = embed(A, 1.0)
    poly = build_inversion_polynomial(2.0, 1e-3)
    out = transform_singular_values(be, poly)
    assert np.allclose(out.corner, np.diag([poly(1.0), poly(0.5)]), atol=1e-10)


def test_transform_rank_restriction():
    A = np.diag([1.0, 0.5]).astype(complex)
    be = embed(A, 1.0)
    poly = build_inversion_polynomial(2.0, 1e-3)
    out = transform_singular_values(be, poly, rank=1)
    assert np.allclose(out.corner, np.diag([poly(1.0), 0.0]), atol=1e-12)
    with pytest.raises(EncodingError, match="rank"):
        transform_singular_values(be, poly, rank=7)


def test_transform_rejects_out_of_domain_spectrum():
    A = np.diag([1.0, 0.1]).astype(complex)
    be = embed(A, 1.0)
    poly = build_inversion_polynomial(2.0, 1e-3)
    with pytest.raises(EncodingError, match="outside the polynomial domain"):
        transform_singular_values(be, poly)


def test_transform_cost_counts_polynomial_degree():
    rng = np.random.default_rng(1)
    Q, _ = np.linalg.qr(_random_matrix(rng, 2, 2))
    be = embed(Q, 1.0)
    poly = build_inversion_polynomial(1.5, 1e-2)
    out = transform_singular_values(be, poly)
    assert out.cost.formula_id == "singular-value-transform"
    assert out.cost.multiplier == poly.degree * be.cost.multiplier
    assert out.cost.scalar_factors["degree"] == float(poly.degree)


# ---------------------------------------------------------------------------
# pseudoinversion


def test_pseudoinverse_identity():
    be = embed(np.eye(2, dtype=complex), 1.0)
    out, _ = pseudoinverse(be, 1.0, 1e-3)
    assert out.alpha == 2.0  # 2 kappa_A / ||A||
    assert out.n_ancilla == be.n_ancilla + 1
    assert out.epsilon == 1e-3
    assert np.linalg.norm(out.block - np.eye(2), 2) <= 1e-3


def test_pseudoinverse_matches_dense_pinv():
    rng = np.random.default_rng(2)
    A = _random_matrix(rng, 4, 4)
    s = np.linalg.svd(A, compute_uv=False)
    kappa_A = s[0] / s[-1]
    be = embed(A, 1.3 * s[0])
    delta = 1e-3
    out, cost = pseudoinverse(be, kappa_A, delta)
    assert np.linalg.norm(out.block - np.linalg.pinv(A), 2) <= delta
    assert out.alpha == pytest.approx(2.0 * kappa_A / s[0], rel=1e-12)
    assert cost.formula_id == "qsvt-inversion"


def test_pseudoinverse_annihilates_the_cokernel():
    rng = np.random.default_rng(3)
    # rank-2 matrix, 4x4: vectors orthogonal to the range must map to zero
    A = _random_matrix(rng, 4, 2) @ _random_matrix(rng, 2, 4)
    s = np.linalg.svd(A, compute_uv=False)
    be = embed(A, 1.2 * s[0])
    out, _ = pseudoinverse(be, s[0] / s[1], 1e-2)
    U, _, _ = np.linalg.svd(A)
    for i in (2, 3):  # basis of the cokernel
        assert np.linalg.norm(out.block @ U[:, i]) < 1e-9


def test_pseudoinverse_error_budget_precondition():
    rng = np.random.default_rng(4)
    A = _random_matrix(rng, 2, 2)
    A /= np.linalg.norm(A, 2)
    be = BlockEncoding(A / 2.0, 2.0, 1, 0.05, (2, 2))
    with pytest.raises(EncodingError, match="delta\\*\\|\\|A\\|\\|/\\(2\\*kappa_A\\^2\\)"):
        pseudoinverse(be, 10.0, 1e-2)


def test_pseudoinverse_validates():
    be = embed(np.eye(2, dtype=complex), 1.0)
    with pytest.raises(EncodingError, match="delta"):
        pseudoinverse(be, 1.0, 2.0)
    with pytest.raises(EncodingError, match="kappa_A"):
        pseudoinverse(be, 0.5, 1e-2)
    zero = embed(np.zeros((2, 2), dtype=complex), 1.0)
    with pytest.raises(EncodingError, match="zero block"):
        pseudoinverse(zero, 1.0, 1e-2)


def test_product_with_own_pseudoinverse_is_identity():
    rng = np.random.default_rng(5)
    A = _random_matrix(rng, 4, 4)
    s = np.linalg.svd(A, compute_uv=False)
    be = embed(A, 1.1 * s[0])
    delta = 1e-4
    inv, _ = pseudoinverse(be, s[0] / s[-1], delta)
    prod = multiply(be, inv)
    # A A^+ = I for invertible A; the product inherits alpha_A * delta error
    assert np.linalg.norm(prod.block - np.eye(4), 2) <= be.alpha * delta + 1e-9


# ---------------------------------------------------------------------------
# regularized pseudoinversion


def test_regularized_identity_with_unit_penalty():
    # X = I, lambda = 1: X^dag (X X^dag + I)^{-1} = I/2
    be = embed(np.eye(2, dtype=complex), 1.0)
    delta = 1e-2
    out, _ = regularized_pseudoinverse(be, 1.0, delta)
    assert out.block_dims == (4, 4)
    quarter = out.block[:2, :2]
    assert np.linalg.norm(quarter - 0.5 * np.eye(2), 2) <= delta
    # kappa = 1, so alpha = 2/(1 + 1)
    assert out.alpha == pytest.approx(1.0, rel=1e-12)


def test_regularized_matches_dense_formula():
    rng = np.random.default_rng(6)
    X = _random_matrix(rng, 4, 6)
    lam = 0.3
    be = embed(X, 1.2 * np.linalg.norm(X, 2))  # s_dim 8
    delta = 1e-3
    out, cost = regularized_pseudoinverse(be, lam, delta)
    dense = X.conj().T @ np.linalg.inv(X @ X.conj().T + lam * np.eye(4))
    quarter = out.block[: out.block_dims[0] // 2, : out.block_dims[1] // 2]
    assert np.linalg.norm(quarter[:6, :4] - dense, 2) <= delta
    assert cost.formula_id == "tikhonov-pseudoinverse"


def test_regularized_reduces_to_plain_pinv():
    rng = np.random.default_rng(7)
    X = _random_matrix(rng, 4, 4)
    be = embed(X, 1.2 * np.linalg.norm(X, 2))
    delta = 1e-3
    out, _ = regularized_pseudoinverse(be, 0.0, delta)
    quarter = out.block[:4, :4]
    assert np.linalg.norm(quarter - np.linalg.pinv(X), 2) <= delta


def test_regularized_parameters_compose_from_recorded_factors():
    rng = np.random.default_rng(8)
    X = _random_matrix(rng, 3, 5)
    be = embed(X, 1.5 * np.linalg.norm(X, 2))
    delta = 1e-2
    lam = 0.7
    out, cost = regularized_pseudoinverse(be, lam, delta)
    sf = cost.scalar_factors
    # closed forms evaluated on the recorded factors reproduce the fields
    assert out.alpha == 2.0 * sf["kappa"] / (sf["norm_X"] + np.sqrt(sf["lambda"]))
    assert out.epsilon == delta
    assert out.n_ancilla == be.n_ancilla + 1
    s = np.linalg.svd(be.block, compute_uv=False)
    assert sf["kappa"] == pytest.approx(
        kappa_regularized(s[0] / s[-1], s[0], lam), rel=1e-12
    )


def test_regularized_error_budget_precondition():
    rng = np.random.default_rng(9)
    X = _random_matrix(rng, 3, 3)
    alpha = 1.2 * np.linalg.norm(X, 2)
    be = BlockEncoding(
        np.pad(X / alpha, ((0, 1), (0, 1))), alpha, 1, 0.05, (3, 3)
    )
    with pytest.raises(EncodingError, match="epsilon_X <="):
        regularized_pseudoinverse(be, 0.5, 1e-3)


def test_regularized_validates():
    be = embed(np.eye(2, dtype=complex), 1.0)
    with pytest.raises(EncodingError, match="lambda"):
        regularized_pseudoinverse(be, -0.1, 1e-2)
    with pytest.raises(EncodingError, match="delta"):
        regularized_pseudoinverse(be, 0.1, 0.0)


def test_regularized_cost_monotone_in_conditioning():
    # fix the matrix, shrink lambda: kappa grows, and so must the query count
    rng = np.random.default_rng(10)
    X = _random_matrix(rng, 4, 4)
    X = X @ X.conj().T + 0.05 * np.eye(4)  # well-spread spectrum
    be = embed(X, 1.2 * np.linalg.norm(X, 2))
    mults = []
    for lam in (10.0, 1.0, 0.1, 0.01):
        _, cost = regularized_pseudoinverse(be, lam, 1e-2)
        mults.append(cost.multiplier)
    assert all(a <= b for a, b in zip(mults, mults[1:]))
