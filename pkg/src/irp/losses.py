"""Loss transforms that reduce non-L2 isotonic problems to the weighted L2 engine.

For a large family of separable convex losses the isotonic maximum-likelihood
solution shares its block structure with a weighted least-squares problem, so
the L2 path solver does all the work: 0/1 responses give the isotonic logistic
fit directly, counts give the Poisson fit directly, and the reorder-interval
objective sum(c_i/v_i + b_i v_i) maps to a weighted problem on z = -b/c.
"""

from __future__ import annotations

import numpy as np

from .dataset import DominanceDag, WeightedDataset
from .engine import FitConfig, IrpPath, fit_path, fit_path_arrays
from .errors import ValidationError

__all__ = [
    "fit_binary",
    "binary_log_likelihood",
    "fit_poisson",
    "fit_maxwell_muckstadt",
]


def fit_binary(
    dataset: WeightedDataset,
    dag: DominanceDag,
    config: FitConfig | None = None,
) -> IrpPath:
    """Isotonic fit maximizing the logistic log-likelihood of 0/1 responses.

    Identical to the squared-loss fit on the raw responses, so this simply
    delegates; merged duplicates may carry fractional responses in [0, 1].
    """
    if np.any((dataset.y < 0) | (dataset.y > 1)):
        raise ValidationError("binary loss requires responses in {0, 1}")
    return fit_path(dataset, dag, config)


def binary_log_likelihood(fits: np.ndarray, dataset: WeightedDataset) -> float:
    """Weighted Bernoulli log-likelihood of probability fits, with 0*log(0) = 0."""
    p = np.asarray(fits, dtype=np.float64)
    if np.any((p < 0) | (p > 1)):
        raise ValidationError("fits must lie in [0, 1]")
    y, w = dataset.y, dataset.w
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.where(y > 0, y * np.log(p), 0.0)
        neg = np.where(y < 1, (1 - y) * np.log(1 - p), 0.0)
    return float(w @ (pos + neg))


def fit_poisson(
    dataset: WeightedDataset,
    dag: DominanceDag,
    config: FitConfig | None = None,
) -> IrpPath:
    """Isotonic fit maximizing the Poisson log-likelihood of count responses.

    The block maximum-likelihood rate is the block mean, and the block
    structure matches the squared-loss problem, so this delegates as well.
    All-zero blocks fit a zero rate.
    """
    if np.any(dataset.y < 0):
        raise ValidationError("poisson loss requires nonnegative counts")
    return fit_path(dataset, dag, config)


def poisson_log_likelihood(fits: np.ndarray, dataset: WeightedDataset) -> float:
    """Weighted Poisson log-likelihood (up to the y! term), with 0*log(0) = 0."""
    mu = np.asarray(fits, dtype=np.float64)
    if np.any(mu < 0):
        raise ValidationError("rate fits must be nonnegative")
    y, w = dataset.y, dataset.w
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(mu), 0.0)
    return float(w @ (term - mu))


def fit_maxwell_muckstadt(
    c: np.ndarray,
    b: np.ndarray,
    dag: DominanceDag,
    config: FitConfig | None = None,
) -> np.ndarray:
    """Minimize sum(c_i/v_i + b_i v_i) over isotonic positive v.

    Solved as weighted isotonic regression of z_i = -b_i/c_i with weights c_i.
    A fitted block takes the weighted mean z* = -sum(b)/sum(c), and the block
    value recovered as (-z*)^(-1/2) = sqrt(sum(c)/sum(b)) is the block's
    stationary point.  (Recovering sqrt(-z*) instead would not reproduce the
    per-block stationary value; the inverse-square-root form is the one the
    brute-force oracle confirms.)
    """
    c = np.asarray(c, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.any(c <= 0) or np.any(b <= 0):
        raise ValidationError("reorder-interval constants must be positive")
    z = -b / c
    path = fit_path_arrays(z, c, dag, config)
    zstar = path.fits_at(path.length)
    return (-zstar) ** -0.5
