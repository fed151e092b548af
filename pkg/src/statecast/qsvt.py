"""Singular-value transformation: matrix inversion on block encodings.

The inversion pipeline applies a polynomial approximation of 1/(2 kappa x)
to the singular values of an encoded block. The polynomial is the classic
smoothed inverse

    P(x) ~ (1 - (1 - x^2)^b) / (2 kappa x),

which is odd, bounded on [-1, 1], and within eps/(2 kappa) of 1/(2 kappa x)
on [1/kappa, 1] once b = ceil(kappa^2 ln(2 kappa / eps)); Chebyshev
truncation then brings the degree down to O(kappa log(kappa/eps)). Transforms
are applied through the SVD of the corner (map the singular values, keep the
singular vectors) rather than by synthesizing phase sequences; the query
complexity a circuit implementation would pay is tracked in CostEstimate.

The inverting transform is orientation-reversing: the output block is
sum_i P(sigma_i/alpha) v_i u_i^dag, so a subnormalized A becomes a
subnormalized A^+, not (A^+)^dag.

Tikhonov regularization rides on the augmented matrix X_I = [[X, sqrt(lam) I],
[0, 0]]: the pseudoinverse of X_I carries X^dag (X X^dag + lam I)^{-1} in its
top-left quarter. The sqrt(lam) singular values contributed by X's null space
are excluded from the inversion (they sit outside the polynomial's domain and
only feed the quarters that the weight-matrix product annihilates); the
effective condition number of the retained spectrum is exactly

    kappa = kappa_X sqrt((||X||^2 + lam) / (||X||^2 + lam kappa_X^2)).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np
from numpy.polynomial import chebyshev

from .blockenc import BlockEncoding, CostEstimate, EncodingError, augment_tikhonov, multiply
from .ngrc import RANK_TOL, kappa_regularized
from .tensorops import next_power_of_two

if TYPE_CHECKING:
    from .circuits import CircuitDims

__all__ = [
    "DEGREE_CONSTANT",
    "InversionPolynomial",
    "build_inversion_polynomial",
    "transform_singular_values",
    "pseudoinverse",
    "regularized_pseudoinverse",
    "build_weight_encoding",
]

# Degree cap: degree <= DEGREE_CONSTANT * kappa * ln(kappa/eps). Generous;
# the measured constant across kappa in [2, 50] is below 2 (see tests).
DEGREE_CONSTANT = 6.0


@dataclass(frozen=True)
class InversionPolynomial:
    """Odd Chebyshev-basis polynomial approximating 1/(2 kappa x) on [1/kappa, 1].

    sup_error is the measured grid sup-deviation from the target at build
    time; smoothing_power is the exponent b of the underlying smoothing.
    """

    kappa: float
    eps: float
    coefficients: np.ndarray
    degree: int
    sup_error: float
    smoothing_power: int

    def __call__(self, x):
        return chebyshev.chebval(x, self.coefficients)

    def certify(self, grid_points: int = 10_000) -> dict:
        """Re-measure the defining bounds on a fresh uniform grid."""
        grid = np.linspace(1.0 / self.kappa, 1.0, grid_points)
        values = self(grid)
        sup_error = float(np.max(np.abs(values - 1.0 / (2.0 * self.kappa * grid))))
        bound = self.eps / (2.0 * self.kappa)
        cap = DEGREE_CONSTANT * self.kappa * np.log(self.kappa / self.eps)
        return {
            "kappa": self.kappa,
            "eps": self.eps,
            "degree": self.degree,
            "degree_cap": cap,
            "sup_error": sup_error,
            "error_bound": bound,
            "max_abs": float(np.max(np.abs(values))),
            "passed": bool(sup_error <= bound and np.max(np.abs(values)) <= 1.0),
        }


def _smoothed_inverse(x: np.ndarray, kappa: float, b: int) -> np.ndarray:
    """(1 - (1 - x^2)^b) / (2 kappa x), evaluated stably; 0 at x = 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        numerator = -np.expm1(b * np.log1p(-x * x))
        out = numerator / (2.0 * kappa * x)
    return np.where(x == 0.0, 0.0, out)


def _chebyshev_coefficients(values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of the interpolant through values at
    the second-kind points x_j = cos(pi j / N), j = 0..N (FFT route)."""
    N = values.size - 1
    extended = np.concatenate([values, values[-2:0:-1]])
    folded = np.real(np.fft.fft(extended))[: N + 1] / N
    folded[0] *= 0.5
    folded[N] *= 0.5
    return folded


def build_inversion_polynomial(
    kappa: float,
    eps: float,
    grid_points: int = 10_000,
    degree_cap: int | None = None,
) -> InversionPolynomial:
    """Adaptive-degree odd polynomial with |P - 1/(2 kappa x)| <= eps/(2 kappa)
    on a uniform grid over [1/kappa, 1].

    The smoothing exponent guarantees the bound is attainable; the degree is
    then the smallest odd truncation of the exact Chebyshev expansion that
    still meets it on the grid. Exceeding the degree cap raises, reporting
    the sup-error the cap achieves.
    """
    if kappa < 1.0:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must be in (0, 1], got {eps}")
    b = int(np.ceil(kappa * kappa * np.log(2.0 * kappa / eps)))
    full_degree = 2 * b - 1
    if degree_cap is None:
        degree_cap = max(1, int(np.ceil(DEGREE_CONSTANT * kappa * np.log(kappa / eps))))

    N = next_power_of_two(max(full_degree, 2))
    nodes = np.cos(np.pi * np.arange(N + 1) / N)
    coeffs = _chebyshev_coefficients(_smoothed_inverse(nodes, kappa, b))
    coeffs[0::2] = 0.0

    grid = np.linspace(1.0 / kappa, 1.0, grid_points)
    target = 1.0 / (2.0 * kappa * grid)
    bound = eps / (2.0 * kappa)

    def sup_error(degree: int) -> float:
        return float(np.max(np.abs(chebyshev.chebval(grid, coeffs[: degree + 1]) - target)))

    hi = min(degree_cap, full_degree)
    hi -= 1 - hi % 2
    achieved = sup_error(hi)
    if achieved > bound:
        raise ValueError(
            f"no polynomial of degree <= {hi} meets the {bound:.3e} sup-error "
            f"bound on [1/{kappa:g}, 1]; achieved {achieved:.3e}"
        )
    # bisect over odd degrees 2k-1; the upper end always satisfies the bound
    k_lo, k_hi = 1, (hi + 1) // 2
    while k_lo < k_hi:
        k_mid = (k_lo + k_hi) // 2
        if sup_error(2 * k_mid - 1) <= bound:
            k_hi = k_mid
        else:
            k_lo = k_mid + 1
    degree = 2 * k_hi - 1
    final = chebyshev.chebval(grid, coeffs[: degree + 1])
    max_abs = float(np.max(np.abs(final)))
    if max_abs > 1.0:
        raise ValueError(f"truncated polynomial exceeds 1 on the domain ({max_abs:.6f})")
    return InversionPolynomial(
        kappa=float(kappa),
        eps=float(eps),
        coefficients=coeffs[: degree + 1].copy(),
        degree=degree,
        sup_error=float(np.max(np.abs(final - target))),
        smoothing_power=b,
    )


def transform_singular_values(
    be_A: BlockEncoding,
    poly: InversionPolynomial,
    *,
    delta: float | None = None,
    rank: int | None = None,
    kappa_A: float | None = None,
    norm_A: float | None = None,
) -> BlockEncoding:
    """Singular-value transform of the corner through the inversion polynomial.

    Maps each retained singular value sigma/alpha of the corner through P and
    reassembles sum_i P(sigma_i/alpha) v_i u_i^dag, i.e. the inverting
    orientation. Retained means nonzero (above the rank tolerance), or the
    top `rank` values when rank is given; everything else maps to zero.
    Retained values must lie in the polynomial's domain [1/kappa, 1] up to
    the encoding's own error, otherwise the offenders are reported.

    The output carries the inversion contract (2 kappa_A/||A||, a+1, delta);
    kappa_A and norm_A default to the values implied by poly and the corner,
    delta to the first-order error bound for this transform.
    """
    U, s, Vh = np.linalg.svd(be_A.corner)
    if norm_A is None:
        norm_A = float(np.linalg.norm(be_A.block, 2))
    if norm_A <= 0.0:
        raise EncodingError("cannot invert an identically zero block")
    if rank is None:
        keep = s > RANK_TOL * s[0]
    else:
        if not 1 <= rank <= s.size:
            raise EncodingError(f"rank {rank} out of range for {s.size} singular values")
        keep = np.arange(s.size) < rank
        keep &= s > 0.0
    kept = s[keep]
    slack = be_A.epsilon / be_A.alpha + 1e-9
    offenders = kept[(kept < 1.0 / poly.kappa - slack) | (kept > 1.0 + slack)]
    if offenders.size:
        raise EncodingError(
            "singular values outside the polynomial domain "
            f"[1/{poly.kappa:g}, 1]: {np.sort(offenders)[::-1]}"
        )
    if kappa_A is None:
        kappa_A = poly.kappa * norm_A / be_A.alpha
    if delta is None:
        delta = poly.eps / be_A.alpha + 2.0 * (kappa_A / norm_A) ** 2 * be_A.epsilon

    transformed = poly(kept)
    V = Vh.conj().T
    corner = (V[:, keep] * transformed) @ U[:, keep].conj().T
    cost = CostEstimate(
        formula_id="singular-value-transform",
        oracle_calls="deg(P) * T_A",
        scalar_factors={"degree": float(poly.degree), "kappa": poly.kappa},
        multiplier=poly.degree * be_A.cost.multiplier,
    )
    return BlockEncoding(
        corner=corner,
        alpha=2.0 * kappa_A / norm_A,
        n_ancilla=be_A.n_ancilla + 1,
        epsilon=float(delta),
        block_dims=(be_A.block_dims[1], be_A.block_dims[0]),
        cost=cost,
    )


def pseudoinverse(
    be_A: BlockEncoding,
    kappa_A: float,
    delta: float,
    *,
    rank: int | None = None,
) -> tuple[BlockEncoding, CostEstimate]:
    """(2 kappa_A/||A||, a+1, delta)-encoding of the Moore-Penrose inverse.

    kappa_A must cover the retained spectrum (singular values of the block in
    [||A||/kappa_A, ||A||]). Requires epsilon <= delta ||A|| / (2 kappa_A^2).
    """
    if not 0.0 < delta <= 1.0:
        raise EncodingError(f"delta must be in (0, 1], got {delta}")
    if kappa_A < 1.0:
        raise EncodingError(f"kappa_A must be >= 1, got {kappa_A}")
    norm_A = float(np.linalg.norm(be_A.block, 2))
    if norm_A <= 0.0:
        raise EncodingError("cannot invert an identically zero block")
    bound = delta * norm_A / (2.0 * kappa_A * kappa_A)
    if be_A.epsilon > bound + 1e-18:
        raise EncodingError(
            "matrix inversion requires epsilon <= delta*||A||/(2*kappa_A^2) "
            f"= {bound:.3e}; got epsilon = {be_A.epsilon:.3e}"
        )
    kappa_poly = kappa_A * be_A.alpha / norm_A
    eps_poly = min(1.0, be_A.alpha * delta / 2.0)
    poly = build_inversion_polynomial(kappa_poly, eps_poly)
    out = transform_singular_values(
        be_A, poly, delta=delta, rank=rank, kappa_A=kappa_A, norm_A=norm_A
    )
    cost = CostEstimate(
        formula_id="qsvt-inversion",
        oracle_calls="(kappa_A*alpha/||A||) * log(kappa_A/(delta*||A||)) * T_A",
        scalar_factors={
            "kappa_A": float(kappa_A),
            "alpha": be_A.alpha,
            "norm_A": norm_A,
            "delta": float(delta),
        },
        multiplier=kappa_poly
        * max(1.0, np.log(kappa_A / (delta * norm_A)))
        * be_A.cost.multiplier,
    )
    return replace(out, cost=cost), cost


def regularized_pseudoinverse(
    be_X: BlockEncoding, lam: float, delta: float
) -> tuple[BlockEncoding, CostEstimate]:
    """(2 kappa/(||X||+sqrt(lam)), a_X+1, delta)-encoding of the augmented
    pseudoinverse X_I^+, whose top-left quarter is X^dag (X X^dag + lam I)^{-1}.

    kappa is the regularized condition number of the retained spectrum. The
    input error must satisfy
    epsilon_X <= delta ||X X^dag + lam I|| / (32 (alpha+sqrt(lam)) kappa^3 ln^3(kappa/delta)).
    """
    if lam < 0.0:
        raise EncodingError(f"lambda must be >= 0, got {lam}")
    if not 0.0 < delta <= 1.0:
        raise EncodingError(f"delta must be in (0, 1], got {delta}")
    s = np.linalg.svd(be_X.block, compute_uv=False)
    norm_X = float(s[0])
    if norm_X <= 0.0:
        raise EncodingError("cannot invert an identically zero block")
    rank = int(np.count_nonzero(s > RANK_TOL * s[0]))
    kappa_X = float(s[0] / s[rank - 1])
    kappa = kappa_regularized(kappa_X, norm_X, lam)
    log_term = np.log(kappa / delta)
    if log_term > 0.0:
        eps_bound = (
            delta
            * (norm_X * norm_X + lam)
            / (32.0 * (be_X.alpha + np.sqrt(lam)) * kappa**3 * log_term**3)
        )
        if be_X.epsilon > eps_bound + 1e-18:
            raise EncodingError(
                "regularized inversion requires epsilon_X <= "
                "delta*||XX^dag+lam*I||/(32*(alpha+sqrt(lam))*kappa^3*ln^3(kappa/delta)) "
                f"= {eps_bound:.3e}; got epsilon_X = {be_X.epsilon:.3e}"
            )
    be_XI = augment_tikhonov(be_X, lam)
    inverted, _ = pseudoinverse(be_XI, kappa, delta, rank=rank)
    # Exact rescale from the augmented contract 2 kappa/||X_I|| to the
    # declared 2 kappa/(||X|| + sqrt(lam)); the scale-up stays a contraction
    # because ||X_I|| <= ||X|| + sqrt(lam) <= sqrt(2) ||X_I||.
    alpha = 2.0 * kappa / (norm_X + np.sqrt(lam))
    cost = CostEstimate(
        formula_id="tikhonov-pseudoinverse",
        oracle_calls="(kappa*alpha_X/(||X||+sqrt(lambda))) * log(kappa/delta) * T_X",
        scalar_factors={
            "kappa": float(kappa),
            "alpha_X": be_X.alpha,
            "norm_X": norm_X,
            "lambda": float(lam),
            "delta": float(delta),
        },
        multiplier=(kappa * be_X.alpha / (norm_X + np.sqrt(lam)))
        * max(1.0, log_term)
        * be_X.cost.multiplier,
    )
    rescaled = BlockEncoding(
        corner=inverted.corner * (inverted.alpha / alpha),
        alpha=float(alpha),
        n_ancilla=inverted.n_ancilla,
        epsilon=float(delta),
        block_dims=inverted.block_dims,
        cost=cost,
    )
    return rescaled, cost


def build_weight_encoding(
    be_X: BlockEncoding,
    be_Y: BlockEncoding,
    lam: float,
    delta_W: float,
    dims: "CircuitDims",
    delta_X: float | None = None,
) -> tuple[BlockEncoding, CostEstimate]:
    """Weight-matrix encoding W = Y X^dag (X X^dag + lam I)^{-1} from the
    exact feature encoding and the amplified target encoding.

    Expects be_X at (sqrt(T), max(2d+3, t), 0) and be_Y at
    (sqrt(2)||Y||, max(2d+3, t)+1, delta_Y) on the doubled system, with
    delta_Y <= delta_W/(4 kappa). delta_X is the error budget handed to the
    regularized inversion, by default delta_W/(2 sqrt(2) ||Y||). The result
    carries (2 sqrt(2) kappa ||Y||/(||X||+sqrt(lam)), 2 max(2d+3, t)+2, ...)
    with the error field composed per the multiplication rule.
    """
    if not 0.0 < delta_W <= 1.0:
        raise EncodingError(f"delta_W must be in (0, 1], got {delta_W}")
    M = max(2 * dims.d + 3, dims.t)
    if be_X.n_ancilla != M:
        raise EncodingError(
            f"feature encoding must use max(2d+3, t) = {M} ancillas, has {be_X.n_ancilla}"
        )
    if be_X.epsilon != 0.0:
        raise EncodingError("feature encoding must be exact (epsilon = 0)")
    sqrt_T = np.sqrt(dims.T)
    if abs(be_X.alpha - sqrt_T) > 1e-9 * sqrt_T:
        raise EncodingError(
            f"feature encoding must have alpha = sqrt(T) = {sqrt_T:g}, has {be_X.alpha:g}"
        )
    if be_Y.n_ancilla != M + 1:
        raise EncodingError(
            f"target encoding must use max(2d+3, t)+1 = {M + 1} ancillas, has {be_Y.n_ancilla}"
        )

    s = np.linalg.svd(be_X.block, compute_uv=False)
    norm_X = float(s[0])
    rank = int(np.count_nonzero(s > RANK_TOL * s[0]))
    kappa_X = float(s[0] / s[rank - 1])
    kappa = kappa_regularized(kappa_X, norm_X, lam)

    delta_Y = be_Y.epsilon
    delta_Y_limit = delta_W / (4.0 * kappa)
    if delta_Y > delta_Y_limit + 1e-18:
        raise EncodingError(
            f"target-encoding error delta_Y = {delta_Y:.3e} exceeds "
            f"delta_W/(4 kappa) = {delta_Y_limit:.3e}"
        )
    norm_Y = be_Y.alpha / np.sqrt(2.0)
    delta_X_limit = delta_W / (2.0 * np.sqrt(2.0) * norm_Y)
    if delta_X is None:
        delta_X = min(1.0, delta_X_limit)
    elif delta_X > delta_X_limit + 1e-18:
        raise EncodingError(
            f"inversion budget delta_X = {delta_X:.3e} exceeds "
            f"delta_W/(2 sqrt(2) ||Y||) = {delta_X_limit:.3e}"
        )

    be_pinv, _ = regularized_pseudoinverse(be_X, lam, delta_X)
    be_W = multiply(be_Y, be_pinv)
    if be_W.n_ancilla != dims.w:
        raise EncodingError(
            f"composed encoding uses {be_W.n_ancilla} ancillas, expected w = {dims.w}"
        )
    simplified = kappa * dims.T * max(1.0, np.log(kappa * dims.D * dims.T / delta_W))
    cost = CostEstimate(
        formula_id="weight-encoding",
        oracle_calls=(
            "(kappa/(||X||+sqrt(lambda)) + 1/||Y||) * log(kappa*||Y||/delta_W)"
            " * sqrt(T) * T_O"
        ),
        scalar_factors={
            "kappa": float(kappa),
            "norm_X": norm_X,
            "norm_Y": norm_Y,
            "lambda": float(lam),
            "delta_W": float(delta_W),
            "T": float(dims.T),
            "D": float(dims.D),
            "simplified_calls": float(simplified),
            "composed_calls": be_W.cost.multiplier,
        },
        multiplier=(kappa / (norm_X + np.sqrt(lam)) + 1.0 / norm_Y)
        * max(1.0, np.log(kappa * norm_Y / delta_W))
        * sqrt_T,
    )
    return replace(be_W, cost=cost), cost
