"""Seeded count samplers: negative binomial (Gamma-Poisson) and Poisson.

A pixel with expected value ``mu`` is observed as

* ``Poisson(mu)`` under the Poisson model, or
* ``NB(r, r / (r + mu))`` under the negative binomial model with dispersion
  ``r``, realized as the Gamma-Poisson mixture ``lam ~ Gamma(shape=r,
  scale=mu/r)``, ``y ~ Poisson(lam)``.

The mixture is exact for real-valued ``r`` and reproduces the moments
``mean = mu`` and ``variance = mu + mu**2 / r``; as ``r -> inf`` the
variance approaches the mean and the Poisson model is recovered.

Randomness comes from a ``numpy.random.Generator``; identical seeds and
call sequences produce identical count images.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .image import as_signal


@dataclass(frozen=True)
class NoiseModel:
    """Count distribution of the detector: ``poisson`` or ``nb``.

    ``r`` is the negative binomial dispersion (variance ``mu + mu**2/r``);
    it must be positive for the ``nb`` kind and is ignored for ``poisson``.
    """

    kind: str
    r: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("nb", "poisson"):
            raise DomainError(f"unknown noise model kind {self.kind!r}")
        if self.kind == "nb":
            if self.r is None or not self.r > 0:
                raise DomainError(f"nb model needs dispersion r > 0, got {self.r}")

    @staticmethod
    def negative_binomial(r: float) -> "NoiseModel":
        return NoiseModel(kind="nb", r=float(r))

    @staticmethod
    def poisson() -> "NoiseModel":
        return NoiseModel(kind="poisson")

    @property
    def is_nb(self) -> bool:
        return self.kind == "nb"

    def variance(self, mu):
        """Per-pixel variance of the observed count at mean ``mu``."""
        mu = np.asarray(mu, dtype=np.float64)
        if self.is_nb:
            return mu + mu**2 / self.r
        return mu


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator for a 64-bit seed (PCG64)."""
    return np.random.default_rng(int(seed))


def sample_counts(
    model: NoiseModel, mean_image, rng: np.random.Generator
) -> np.ndarray:
    """Draw one count per pixel, independently, from ``model``.

    Pixels with zero mean yield a zero count surely.  The result is a
    float64 array of nonnegative integers with the shape of ``mean_image``.
    """
    mu = as_signal(mean_image, name="mean image")
    if model.is_nb:
        # Gamma(shape=r, scale=mu/r) has mean mu; scale 0 collapses to 0.
        lam = rng.gamma(shape=model.r, scale=mu / model.r)
        counts = rng.poisson(lam=lam)
    else:
        counts = rng.poisson(lam=mu)
    return counts.astype(np.float64)
