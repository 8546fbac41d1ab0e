"""Closed-form design calculus for prognostic score adjustment.

All quantities are functions of ``r2`` (variance explained by the true
score among controls) and ``rho`` (correlation between the estimated and
the true score).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .stats import ols_fit


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def variance_fraction(r2: float, rho: float) -> float:
    """Adjusted over unadjusted residual variance, ``1 - r2 * rho**2``.

    This is also the factor by which the required sample size shrinks.
    """
    _check_unit("r2", r2)
    _check_unit("rho", rho)
    return 1.0 - r2 * rho * rho


def r2_oos(r2: float, rho: float) -> float:
    """Out-of-sample R^2 of the raw estimated score, ``(2*rho - 1) * r2``.

    Negative for ``rho < 0.5``: a poor score inflates the prediction error.
    """
    _check_unit("r2", r2)
    _check_unit("rho", rho)
    return (2.0 * rho - 1.0) * r2


def design_factor(r2_oos_value: float) -> float:
    """The conventional predicted variance multiplier ``1 - R2_oos``."""
    if r2_oos_value > 1.0:
        raise ValueError(f"an R^2 cannot exceed 1, got {r2_oos_value}")
    return 1.0 - r2_oos_value


def design_factor_gap(r2: float, rho: float) -> float:
    """How far the design factor overstates the variance fraction, ``r2*(1-rho)**2``."""
    return design_factor(r2_oos(r2, rho)) - variance_fraction(r2, rho)


def score_mse(pi: float, rho: float) -> float:
    """Mean squared error of the estimated score, ``2 * pi**2 * (1 - rho)``."""
    if pi < 0:
        raise ValueError(f"pi must be non-negative, got {pi}")
    _check_unit("rho", rho)
    return 2.0 * pi * pi * (1.0 - rho)


@dataclass(frozen=True)
class DesignQuery:
    r2: float
    rho: float
    delta: float
    sigma2: float = 1.0
    alpha_level: float = 0.05
    power: float = 0.8

    def __post_init__(self):
        _check_unit("r2", self.r2)
        _check_unit("rho", self.rho)
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        for name in ("alpha_level", "power"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


def _ceil(value: float) -> int:
    # guard against products like 0.68 * 1100 landing a hair above an integer
    return math.ceil(value - 1e-9)


def sample_size_two_arm(query: DesignQuery) -> tuple[int, int]:
    """Per-arm sample sizes without and with score adjustment.

    Unadjusted: ``2 * (z_{1-alpha/2} + z_{power})**2 * sigma2 / delta**2``
    rounded up (two-sided normal approximation).  Adjusted: the unadjusted
    size scaled by :func:`variance_fraction`, rounded up.
    """
    if query.delta == 0:
        raise ValueError("delta must be non-zero")
    za = norm.ppf(1.0 - query.alpha_level / 2.0)
    zb = norm.ppf(query.power)
    unadjusted = _ceil(2.0 * (za + zb) ** 2 * query.sigma2 / query.delta ** 2)
    adjusted = _ceil(unadjusted * variance_fraction(query.r2, query.rho))
    return unadjusted, adjusted


def interim_pi_rho(y_controls, s_hat_controls) -> tuple[float, float]:
    """Estimate ``pi*rho`` and the variance fraction from trial controls.

    The score is rescaled to unit sample variance, ``y`` is regressed on it,
    and the slope is plugged into ``1 - slope**2 / var(y)``.  The fraction is
    clamped to [0, 1].
    """
    y = np.asarray(y_controls, dtype=np.float64)
    s = np.asarray(s_hat_controls, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError("y and s_hat must be vectors of equal length")
    if y.size < 10:
        raise ValueError("need at least 10 control subjects")
    sd = s.std(ddof=1)
    if not sd > 0:
        raise ValueError("s_hat has zero variance")
    s_std = (s - s.mean()) / sd
    fit = ols_fit(np.column_stack([np.ones_like(s_std), s_std]), y)
    pi_rho = float(fit.coefficients[1])
    sigma2_hat = float(y.var(ddof=1))
    fraction = min(max(1.0 - pi_rho ** 2 / sigma2_hat, 0.0), 1.0)
    return pi_rho, fraction


@dataclass(frozen=True)
class FractionGrid:
    r2_values: np.ndarray
    rho_values: np.ndarray
    fractions: np.ndarray  # rows follow rho, columns follow r2

    def rows(self):
        """(r2, rho, fraction) triples, rho-major."""
        for i, rho in enumerate(self.rho_values):
            for j, r2 in enumerate(self.r2_values):
                yield float(r2), float(rho), float(self.fractions[i, j])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("r2,rho,fraction\n")
            for r2, rho, f in self.rows():
                fh.write(f"{r2!r},{rho!r},{f!r}\n")


def fraction_grid(r2_values, rho_values) -> FractionGrid:
    r2s = np.asarray(r2_values, dtype=np.float64)
    rhos = np.asarray(rho_values, dtype=np.float64)
    for name, arr in (("r2", r2s), ("rho", rhos)):
        if ((arr < 0) | (arr > 1)).any():
            raise ValueError(f"{name} values must lie in [0, 1]")
    fr = 1.0 - np.outer(rhos * rhos, r2s)
    return FractionGrid(r2s, rhos, fr)


def grid_axis(step: float) -> np.ndarray:
    """Interior points ``step, 2*step, ...`` strictly inside (0, 1)."""
    if not 0.0 < step < 1.0:
        raise ValueError("grid step must lie in (0, 1)")
    count = int(round(1.0 / step)) - 1
    return np.round(step * np.arange(1, count + 1), 12)
