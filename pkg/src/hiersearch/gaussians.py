"""Per-class multivariate Gaussians and the distances defined on them.

The overlap between two classes a and b with moments (mu_a, S_a), (mu_b, S_b)
is measured through the Bhattacharyya distance

    D = (1/8) (mu_a - mu_b)^T Sbar^-1 (mu_a - mu_b)
        + (1/2) ln( det Sbar / sqrt(det S_a det S_b) ),   Sbar = (S_a + S_b) / 2

and the overlap coefficient exp(-D) in [0, 1], 1 meaning full overlap. All
determinant work happens in log-space through Cholesky factors; explicit
inverses and raw determinants are never formed, so dimensions above 100 stay
stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionError, NumericalError, ValidationError

COVARIANCE_ABS_FLOOR = 1e-8
UNDERFLOW_DISTANCE = 700.0  # exp(-d) underflows float64 past this point


@dataclass
class ClassGaussian:
    """Moments of one class plus cached Cholesky factor and log-determinant."""

    class_id: int
    mu: np.ndarray        # (r,)
    sigma: np.ndarray     # (r, r) symmetric positive-definite
    chol: np.ndarray      # (r, r) lower triangular, chol @ chol.T == sigma
    log_det: float
    count: int

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def fit_gaussian(
    vectors: np.ndarray,
    reg_epsilon: float = 1e-3,
    class_id: int = -1,
) -> ClassGaussian:
    """Fit mean and regularized covariance to the given sample vectors.

    The covariance uses divisor n (population form); a single sample yields
    the zero matrix. A trace-scaled ridge with a small absolute floor,

        sigma += reg_epsilon * (trace(sigma)/r + 1e-8) * I,

    keeps the result positive-definite even for tiny classes.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValidationError(
            f"class {class_id}: need a non-empty (n, r) sample matrix"
        )
    if reg_epsilon < 0:
        raise ValidationError(f"reg_epsilon must be non-negative, got {reg_epsilon}")
    n, r = x.shape
    mu = x.mean(axis=0)
    if n == 1:
        sigma = np.zeros((r, r))
    else:
        xc = x - mu
        sigma = (xc.T @ xc) / n
        sigma = (sigma + sigma.T) / 2.0
    ridge = reg_epsilon * (np.trace(sigma) / r + COVARIANCE_ABS_FLOOR)
    sigma = sigma + ridge * np.eye(r)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise NumericalError(
            f"class {class_id}: covariance not positive-definite after regularization"
        ) from None
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return ClassGaussian(
        class_id=class_id, mu=mu, sigma=sigma, chol=chol, log_det=log_det, count=n
    )


def bhattacharyya_distance(a: ClassGaussian, b: ClassGaussian) -> float:
    """Distance between two fitted Gaussians; 0 for identical distributions.

    Tiny negative round-off is clamped to 0 so the value is always usable as
    a non-negative distance.
    """
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    sbar = (a.sigma + b.sigma) / 2.0
    try:
        chol = np.linalg.cholesky(sbar)
    except np.linalg.LinAlgError:
        raise NumericalError(
            f"averaged covariance of classes {a.class_id} and {b.class_id} "
            "is not positive-definite"
        ) from None
    z = solve_triangular(chol, a.mu - b.mu, lower=True, check_finite=False)
    mean_term = float(z @ z) / 8.0
    log_det_bar = 2.0 * float(np.sum(np.log(np.diag(chol))))
    cov_term = 0.5 * (log_det_bar - 0.5 * (a.log_det + b.log_det))
    return max(mean_term + cov_term, 0.0)


def bhattacharyya_coefficient(a: ClassGaussian, b: ClassGaussian) -> float:
    """Overlap in [0, 1]: exp of the negated distance, exact 0 past underflow."""
    d = bhattacharyya_distance(a, b)
    if d > UNDERFLOW_DISTANCE:
        return 0.0
    return math.exp(-d)


def mahalanobis(g: ClassGaussian, x: np.ndarray) -> float | np.ndarray:
    """Covariance-scaled distance from x (or each row of x) to the mean.

    Computed by a triangular solve against the cached Cholesky factor, so the
    whitening identity mahalanobis(g, mu + chol @ z) == |z| holds.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != g.dim:
        raise DimensionError(
            f"vector has dimension {x.shape[-1]}, Gaussian expects {g.dim}"
        )
    delta = (x - g.mu).T  # (r,) or (r, n)
    z = solve_triangular(g.chol, delta, lower=True, check_finite=False)
    if z.ndim == 1:
        return float(np.linalg.norm(z))
    return np.linalg.norm(z, axis=0)
