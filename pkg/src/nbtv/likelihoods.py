"""Negative binomial and Poisson data-fit terms.

For counts ``y``, blur ``A``, and dispersion ``r`` the negative binomial
negative log-likelihood (up to a constant independent of ``f``) is

    F(f) = sum_i (r + y_i) * log(r + (Af)_i) - y_i * log((Af)_i)

with exact derivatives

    grad F(f) = A^T d,   d_i = (r + y_i) / (r + (Af)_i) - y_i / (Af)_i
    hess F(f) = A^T diag(y_i/(Af)_i^2 - (r + y_i)/(r + (Af)_i)^2) A.

The Poisson comparator uses ``sum_i (Af)_i - y_i log((Af)_i)`` with gradient
``A^T (1 - y_i/(Af)_i)``; it is the ``r -> inf`` limit of the negative
binomial term.

The blurred intensity is floored at ``floor_eps`` inside logs and ratios so
the objective stays total on the boundary of the nonnegative orthant; the
count of floored pixels is available through :func:`floor_mask` for
diagnostics.  The dense Hessian exists only as a test-scale oracle
(``m * n <= HESSIAN_SIZE_CAP``); the solver never forms it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blur import BlurSpec, blur_apply, blur_adjoint, blur_dense_matrix
from .errors import CapacityError, DomainError, ShapeError
from .image import as_counts, as_signal
from .noise import NoiseModel

HESSIAN_SIZE_CAP = 256


@dataclass(frozen=True)
class DataFit:
    """A noise model, observed counts, and the sensing operator."""

    model: NoiseModel
    counts: np.ndarray
    operator: BlurSpec
    floor_eps: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "counts", as_counts(self.counts))
        if not self.floor_eps > 0:
            raise DomainError(f"floor_eps must be > 0, got {self.floor_eps}")

    def _intensity(self, f) -> np.ndarray:
        """Floored blurred intensity a = max(Af, floor_eps)."""
        arr = as_signal(f, name="f")
        if arr.shape != self.counts.shape:
            raise ShapeError(
                f"f has shape {arr.shape}, counts have shape {self.counts.shape}"
            )
        return np.maximum(blur_apply(self.operator, arr), self.floor_eps)

    def floor_mask(self, f) -> np.ndarray:
        """Boolean mask of pixels whose blurred intensity sits at the floor."""
        arr = as_signal(f, name="f")
        return blur_apply(self.operator, arr) < self.floor_eps

    def objective(self, f) -> float:
        if self.model.is_nb:
            return nb_objective(self, f)
        return poisson_objective(self, f)

    def gradient(self, f) -> np.ndarray:
        if self.model.is_nb:
            return nb_gradient(self, f)
        return poisson_gradient(self, f)


def _require_nb(fit: DataFit) -> float:
    if not fit.model.is_nb:
        raise DomainError("fit.model must be negative binomial")
    return float(fit.model.r)


def nb_objective(fit: DataFit, f) -> float:
    """Negative binomial data-fit value at ``f`` (constant term dropped)."""
    r = _require_nb(fit)
    a = fit._intensity(f)
    y = fit.counts
    return float(np.sum((r + y) * np.log(r + a) - y * np.log(a)))


def nb_gradient(fit: DataFit, f) -> np.ndarray:
    """Exact gradient A^T d with d = (r+y)/(r+a) - y/a, a floored."""
    r = _require_nb(fit)
    a = fit._intensity(f)
    y = fit.counts
    d = (r + y) / (r + a) - y / a
    return blur_adjoint(fit.operator, d)


def nb_hessian_dense(fit: DataFit, f) -> np.ndarray:
    """Exact dense Hessian A^T diag(w) A with w = y/a^2 - (r+y)/(r+a)^2;
    test-scale only.

    Raises :class:`CapacityError` above ``HESSIAN_SIZE_CAP`` unknowns.  The
    result is exactly symmetric (indefinite in general: pixels with zero
    counts contribute strictly negative curvature).
    """
    r = _require_nb(fit)
    m, n = fit.counts.shape
    if m * n > HESSIAN_SIZE_CAP:
        raise CapacityError(
            f"dense Hessian capped at {HESSIAN_SIZE_CAP} unknowns, got {m * n}"
        )
    a = fit._intensity(f).ravel()
    y = fit.counts.ravel()
    w = y / a**2 - (r + y) / (r + a) ** 2
    mat = blur_dense_matrix(fit.operator, (m, n))
    hess = (mat.T * w) @ mat
    return (hess + hess.T) / 2.0


def poisson_objective(fit: DataFit, f) -> float:
    """Poisson data-fit value sum(a - y log a) with floored a."""
    a = fit._intensity(f)
    y = fit.counts
    return float(np.sum(a - y * np.log(a)))


def poisson_gradient(fit: DataFit, f) -> np.ndarray:
    """Poisson gradient A^T (1 - y/a) with floored a."""
    a = fit._intensity(f)
    d = 1.0 - fit.counts / a
    return blur_adjoint(fit.operator, d)
