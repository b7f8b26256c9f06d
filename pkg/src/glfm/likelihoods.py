"""Per-type mapping functions and observation likelihoods.

Each attribute observation x is a deterministic transform of a Gaussian
pseudo-observation y whose mean is the latent linear predictor m = z_n B^d:
identity/affine (real), softplus (positive real), floor-of-softplus (count),
threshold partition (ordinal), argmax over per-category pseudo-observations
(categorical). This module evaluates the transforms, their inverses, and the
induced probability of x given m.

All operations are pure functions; `params` is any object carrying scale `w`
and shift `mu` attributes (TransformParams or an attribute spec).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import log_ndtr, ndtr

from glfm.data import AttributeKind

__all__ = [
    "TransformParams",
    "check_theta",
    "count_support_limit",
    "log_phi_interval",
    "log_prob_count",
    "log_prob_ordinal",
    "loglik_continuous",
    "map_forward",
    "map_inverse",
    "prob_categorical",
    "prob_count",
    "prob_ordinal",
    "softplus",
    "softplus_inv",
]

_LOG_2PI = math.log(2.0 * math.pi)
_GH_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


@dataclass(frozen=True)
class TransformParams:
    """Affine scale/shift applied to the pseudo-observation before mapping."""

    w: float
    mu: float

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError(f"transform scale w must be > 0, got {self.w}")


def check_theta(theta) -> np.ndarray:
    """Validate an ordinal threshold vector: theta_1 = 0, strictly increasing."""
    theta = np.asarray(theta, dtype=float)
    if theta.size == 0 or theta[0] != 0.0:
        raise ValueError("theta_1 must be fixed at 0")
    if np.any(np.diff(theta) <= 0):
        raise ValueError("thresholds must be strictly increasing")
    return theta


def softplus(t):
    """log(exp(t) + 1), overflow-safe."""
    return np.logaddexp(0.0, t)


def softplus_inv(x):
    """log(exp(x) - 1) for x >= 0; x = 0 maps to -inf. Accurate in both tails."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        small = np.log(np.expm1(np.minimum(x, 30.0)))
    large = x + np.log1p(-np.exp(-np.maximum(x, 1.0)))
    out = np.where(x > 30.0, large, small)
    if out.ndim == 0:
        return float(out)
    return out


def count_support_limit(max_observed: int) -> int:
    """Support cap used when a count pmf must be enumerated (pdf tables, tests)."""
    return int(max_observed) * 4 + 100


def map_forward(y, params, kind: AttributeKind, theta=None):
    """Transform a pseudo-observation y into the observation space of `kind`.

    Real -> w*y + mu; PositiveReal -> softplus(w*y + mu); Count -> floor of the
    PositiveReal map; Ordinal -> smallest r with y <= theta_r (theta_0 = -inf,
    theta_{R_d} = +inf). Categorical is an argmax over R_d pseudo-observations
    and is not a scalar map (see tasks.compute_map).
    """
    if kind is AttributeKind.REAL:
        return params.w * y + params.mu
    if kind is AttributeKind.POSITIVE_REAL:
        return softplus(params.w * y + params.mu)
    if kind is AttributeKind.COUNT:
        return np.floor(softplus(params.w * y + params.mu))
    if kind is AttributeKind.ORDINAL:
        if theta is None:
            raise ValueError("ordinal map requires theta")
        theta = np.asarray(theta, dtype=float)
        # r - 1 thresholds lie strictly below y exactly when y falls in
        # (theta_{r-1}, theta_r]
        r = np.searchsorted(theta, y, side="left") + 1
        return int(r) if np.ndim(y) == 0 else r
    raise ValueError(f"map_forward does not handle {kind}")


def map_inverse(x, params, kind: AttributeKind):
    """Inverse transform back to the pseudo-observation scale.

    Count x returns the lower edge of its pre-image interval; x = 0 gives -inf,
    which downstream treats as an unbounded truncation limit.
    """
    if kind is AttributeKind.REAL:
        return (x - params.mu) / params.w
    if kind is AttributeKind.POSITIVE_REAL:
        if np.any(np.asarray(x) <= 0):
            raise ValueError("positive-real values must be > 0")
        return (softplus_inv(x) - params.mu) / params.w
    if kind is AttributeKind.COUNT:
        if np.any(np.asarray(x) < 0):
            raise ValueError("count values must be >= 0")
        return (softplus_inv(x) - params.mu) / params.w
    raise ValueError(f"map_inverse does not handle {kind}")


def loglik_continuous(x, m, total_var, params, kind: AttributeKind):
    """Log density of a Real/PositiveReal observation x at linear predictor m.

    log N(f^{-1}(x) | m, total_var) + log |d f^{-1}/dx| with total_var the sum
    of pseudo-observation and observation-noise variances.
    """
    if total_var <= 0:
        raise ValueError("total_var must be > 0")
    y = map_inverse(x, params, kind)
    base = -0.5 * (_LOG_2PI + np.log(total_var) + (y - m) ** 2 / total_var)
    if kind is AttributeKind.REAL:
        return base - math.log(params.w)
    # d/dx of softplus_inv is e^x / (e^x - 1) = 1 / (1 - e^{-x})
    return base - math.log(params.w) - np.log1p(-np.exp(-x))


def log_phi_interval(a, b):
    """log(Phi(b) - Phi(a)) for a < b, stable in both tails; a, b may be +-inf."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scalar = a.ndim == 0 and b.ndim == 0
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    a, b = np.broadcast_arrays(a, b)

    # pick the side whose CDF values stay away from 1 so the difference survives
    left = (a + np.where(np.isfinite(b), b, 0.0)) < 0
    la = np.where(np.isfinite(a), a, -1.0)
    lb = np.where(np.isfinite(b), b, 1.0)

    with np.errstate(divide="ignore", invalid="ignore"):
        hi = log_ndtr(np.where(left, lb, -la))
        lo = log_ndtr(np.where(left, la, -lb))
        out = hi + np.log1p(-np.minimum(np.exp(lo - hi), 1.0))

    # infinite endpoints collapse to single CDF evaluations
    lo_inf = np.isinf(a) & (a < 0)
    hi_inf = np.isinf(b) & (b > 0)
    out[lo_inf & ~hi_inf] = log_ndtr(b[lo_inf & ~hi_inf])
    out[~lo_inf & hi_inf] = log_ndtr(-a[~lo_inf & hi_inf])
    out[lo_inf & hi_inf] = 0.0

    if scalar:
        return float(out[0])
    return out


def _gh_nodes(n):
    if n not in _GH_CACHE:
        _GH_CACHE[n] = hermgauss(n)
    return _GH_CACHE[n]


def prob_categorical(r: int, z, B, sigma_y: float, n_nodes: int = 32) -> float:
    """Probability that the argmax of the R_d pseudo-observations is category r.

    With y_j ~ N(z b_j, sigma_y^2) independent, P(y_r is the max) equals
    E over u ~ N(0, sigma_y^2) of prod_{j != r} Phi((u + z(b_r - b_j))/sigma_y),
    computed by Gauss-Hermite quadrature. The last weight column is expected
    to be zero (identifiability).
    """
    B = np.asarray(B, dtype=float)
    R = B.shape[1]
    if not 1 <= r <= R:
        raise ValueError(f"category index {r} out of range 1..{R}")
    if not sigma_y > 0:
        raise ValueError("sigma_y must be > 0")
    m = np.asarray(z, dtype=float) @ B
    diffs = m[r - 1] - np.delete(m, r - 1)
    nodes, weights = _gh_nodes(n_nodes)
    u = math.sqrt(2.0) * sigma_y * nodes
    vals = np.prod(ndtr((u[:, None] + diffs[None, :]) / sigma_y), axis=1)
    return float(weights @ vals / math.sqrt(math.pi))


def prob_ordinal(r: int, m: float, theta, sigma_y: float) -> float:
    """Phi((theta_r - m)/sigma) - Phi((theta_{r-1} - m)/sigma), theta_0 = -inf."""
    return math.exp(log_prob_ordinal(r, m, theta, sigma_y))


def log_prob_ordinal(r: int, m: float, theta, sigma_y: float) -> float:
    theta = np.asarray(theta, dtype=float)
    R = theta.size + 1
    if not 1 <= r <= R:
        raise ValueError(f"ordinal index {r} out of range 1..{R}")
    lo = -np.inf if r == 1 else (theta[r - 2] - m) / sigma_y
    hi = np.inf if r == R else (theta[r - 1] - m) / sigma_y
    return log_phi_interval(lo, hi)


def prob_count(x: int, m: float, params, sigma_y: float) -> float:
    """Phi((f^{-1}(x+1) - m)/sigma) - Phi((f^{-1}(x) - m)/sigma), x >= 0."""
    return math.exp(log_prob_count(x, m, params, sigma_y))


def log_prob_count(x: int, m: float, params, sigma_y: float) -> float:
    if x < 0:
        raise ValueError("count observations are >= 0")
    lo = map_inverse(x, params, AttributeKind.COUNT)
    hi = map_inverse(x + 1, params, AttributeKind.COUNT)
    return log_phi_interval((lo - m) / sigma_y, (hi - m) / sigma_y)
