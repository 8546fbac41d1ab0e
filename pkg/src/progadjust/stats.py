"""Least squares and sample summaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SingularDesignError(np.linalg.LinAlgError):
    """Raised when a design matrix is not of full column rank."""


@dataclass(frozen=True)
class FitResult:
    coefficients: np.ndarray
    standard_errors: np.ndarray
    residual_variance: float
    df_residual: int
    n: int
    p: int
    residuals: np.ndarray = field(repr=False)

    @property
    def t_values(self) -> np.ndarray:
        return self.coefficients / self.standard_errors


def ols_fit(design, y, rank_tol: float = 1e-10) -> FitResult:
    """Ordinary least squares via a QR decomposition of the design.

    The standard errors are ``sqrt(diag((X'X)^-1) * s^2)`` with
    ``s^2 = RSS / (n - p)``.  A design whose R factor has a diagonal entry
    below ``rank_tol`` times the largest one is rejected.
    """
    X = np.asarray(design, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    if n <= p:
        raise ValueError(f"need more rows than columns (n={n}, p={p})")

    q, r = np.linalg.qr(X, mode="reduced")
    diag = np.abs(np.diag(r))
    if diag.max() == 0 or diag.min() <= rank_tol * diag.max():
        raise SingularDesignError("design matrix is rank deficient")

    coef = np.linalg.solve(r, q.T @ y)
    resid = y - X @ coef
    df = n - p
    s2 = float(resid @ resid) / df
    r_inv = np.linalg.solve(r, np.eye(p))
    unscaled = np.sum(r_inv * r_inv, axis=1)
    se = np.sqrt(unscaled * s2)
    return FitResult(coef, se, s2, df, n, p, resid)


def treatment_design(z, score=None) -> np.ndarray:
    """Columns (1, z) or (1, z, score)."""
    z = np.asarray(z, dtype=np.float64)
    cols = [np.ones_like(z), z]
    if score is not None:
        cols.append(np.asarray(score, dtype=np.float64))
    return np.column_stack(cols)


@dataclass(frozen=True)
class SampleStats:
    n: int
    mean: float
    variance: float
    quantiles: dict

    @property
    def sd(self) -> float:
        return float(np.sqrt(self.variance))

    @property
    def median(self) -> float:
        return self.quantiles[0.5]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "variance": self.variance,
            "quantiles": {str(p): v for p, v in self.quantiles.items()},
        }


DEFAULT_PROBS = (0.05, 0.25, 0.5, 0.75, 0.95)


def summarize(values, probs=DEFAULT_PROBS) -> SampleStats:
    """Mean, unbiased variance and type-7 (linear interpolation) quantiles."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("cannot summarize an empty sample")
    probs = tuple(float(p) for p in probs)
    if any(not 0.0 <= p <= 1.0 for p in probs):
        raise ValueError("probabilities must lie in [0, 1]")
    var = float(v.var(ddof=1)) if v.size > 1 else 0.0
    qs = np.quantile(v, probs, method="linear") if probs else []
    return SampleStats(int(v.size), float(v.mean()), var, dict(zip(probs, map(float, qs))))
