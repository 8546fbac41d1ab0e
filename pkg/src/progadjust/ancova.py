"""Fitting one prognostic score versus its k covariates in an ANCOVA.

Three effects decide the choice: the mean square error effect
``sigma1_sq / sigmak_sq``, the expected imbalance effect of spending k
rather than one covariate on the treatment-variance multiplier, and the
second order precision of the t-distribution with fewer error degrees of
freedom.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .rng import RngStream

SECOND_ORDER_NOTE = ("second order precision always favours the score "
                     "over the k individual covariates")
FIT_SCORE = "fit score"
INSUFFICIENT = "insufficient evidence to prefer score"


def expected_qk(n: int, k: int) -> float:
    """Expected treatment-variance multiplier with k normal covariates fitted.

    Balanced two-arm design, intercept and treatment columns plus k
    covariates: ``E(q_k) = (4/n) * (n-3) / (n-3-k)``.
    """
    if n < 6 or n % 2:
        raise ValueError(f"n must be even and at least 6, got {n}")
    if k < 0:
        raise ValueError("k must be non-negative")
    if k >= n - 3:
        raise ValueError(f"E(q_k) is undefined for k >= n - 3 (n={n}, k={k})")
    return 4.0 / n * (n - 3) / (n - 3 - k)


def imbalance_ratio(n: int, k: int, baseline: int = 1) -> float:
    """``E(q_k) / E(q_baseline)`` for baseline 0 (no covariate) or 1 (one score)."""
    if baseline not in (0, 1):
        raise ValueError("baseline must be 0 or 1")
    expected_qk(n, k)
    return (n - 3 - baseline) / (n - 3 - k)


def second_order_precision(n: int, k: int) -> float:
    """Variance of a t-distribution on ``nu = n-2-k`` df, ``nu / (nu - 2)``."""
    nu = n - 2 - k
    if nu <= 2:
        raise ValueError(f"t variance undefined for nu = {nu} <= 2")
    return nu / (nu - 2)


def binary_covariate_multiplier(N: int, f: int) -> tuple[float, float]:
    """Treatment-contrast variance multipliers (in units of sigma_1^2).

    A binary stratifier with ``f`` and ``2N - f`` subjects in the control
    arm's strata gives ``N / (f (2N - f))``; perfect balance gives ``1/N``.
    """
    if N < 1:
        raise ValueError("N must be positive")
    if not 0 < f < 2 * N:
        raise ValueError(f"f must lie strictly between 0 and 2N={2 * N}, got {f}")
    return N / (f * (2 * N - f)), 1.0 / N


@dataclass(frozen=True)
class AncovaInputs:
    n: int
    k: int
    sigma1_sq: float
    sigmak_sq: float

    def __post_init__(self):
        if not (self.sigma1_sq > 0 and self.sigmak_sq > 0):
            raise ValueError("mean square errors must be positive")


@dataclass(frozen=True)
class DecisionReport:
    n: int
    k: int
    mse_effect: float
    imbalance_effect: float
    margin: float
    fit_score: bool
    verdict: str
    second_order_unadjusted: float | None
    second_order_score: float | None
    second_order_full: float | None
    note: str = SECOND_ORDER_NOTE

    def to_dict(self) -> dict:
        return asdict(self)


def score_vs_covariates(inputs: AncovaInputs) -> DecisionReport:
    """Sufficient condition for fitting the score:
    ``sigma1_sq / sigmak_sq <= (n-4) / (n-3-k)`` for ``2 <= k <= n-4``.

    A failed condition is not evidence for the covariates; the verdict then
    says so.
    """
    n, k = inputs.n, inputs.k
    if k < 2:
        raise ValueError("k must be at least 2: with k = 1 the score and its covariate "
                         "are interchangeable")
    if k > n - 4:
        raise ValueError(f"k must not exceed n - 4 = {n - 4}")
    mse = inputs.sigma1_sq / inputs.sigmak_sq
    imbalance = imbalance_ratio(n, k, baseline=1)
    fit = mse <= imbalance

    def so(kk):
        return second_order_precision(n, kk) if n - 4 - kk > 0 else None

    return DecisionReport(
        n=n, k=k, mse_effect=mse, imbalance_effect=imbalance, margin=imbalance - mse,
        fit_score=fit, verdict=FIT_SCORE if fit else INSUFFICIENT,
        second_order_unadjusted=so(0), second_order_score=so(1), second_order_full=so(k),
    )


def simulate_qk(n: int, k: int, draws: int, stream: RngStream) -> np.ndarray:
    """Brute-force treatment multipliers ``[(X'X)^-1]_{22}``.

    Each draw is a balanced design (intercept, randomized treatment, k
    independent standard normal covariates).
    """
    if n % 2:
        raise ValueError("n must be even")
    gen = stream.generator()
    base = np.repeat([0.0, 1.0], n // 2)
    out = np.empty(draws)
    for d in range(draws):
        X = np.empty((n, 2 + k))
        X[:, 0] = 1.0
        X[:, 1] = gen.permutation(base)
        X[:, 2:] = gen.standard_normal((n, k))
        out[d] = np.linalg.inv(X.T @ X)[1, 1]
    return out
