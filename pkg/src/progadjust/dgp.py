"""Samplers for the idealized normal trial model and the Friedman variant.

Outcomes follow ``y = alpha + beta*z + pi*s(X) + sqrt(sigma2 - pi**2)*eps``
with a standard-normal prognostic score ``s``.  In the idealized model the
estimated score is drawn jointly with ``pi*s`` (correlation ``rho``, common
SD ``pi``); in the Friedman model ``s`` is a standardized nonlinear function
of ten uniform covariates and the estimate is learned later.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .rng import RngStream, draw_bivariate_normal, draw_standard_normal, draw_uniform

_PI_TOL = 1e-12


@dataclass(frozen=True)
class DgpParams:
    """Intercept, treatment effect, total variance, score scale and score quality."""

    alpha: float = 0.0
    beta: float = 0.0
    sigma2: float = 1.0
    pi: float = 0.0
    rho: float = 1.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        sigma = math.sqrt(self.sigma2)
        if not 0.0 <= self.pi <= sigma * (1 + _PI_TOL):
            raise ValueError(f"pi must lie in [0, sigma={sigma:g}], got {self.pi}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")

    @classmethod
    def from_r2(cls, r2: float, *, alpha=0.0, beta=0.0, sigma2=1.0, rho=1.0) -> "DgpParams":
        if not 0.0 <= r2 <= 1.0:
            raise ValueError(f"r2 must lie in [0, 1], got {r2}")
        return cls(alpha=alpha, beta=beta, sigma2=sigma2, pi=math.sqrt(sigma2 * r2), rho=rho)

    @property
    def r2(self) -> float:
        return min(self.pi ** 2 / self.sigma2, 1.0)

    @property
    def residual_sd(self) -> float:
        return math.sqrt(max(self.sigma2 - self.pi ** 2, 0.0))


@dataclass(frozen=True)
class TrialData:
    """Per-subject columns.  ``s_true`` is the unit-variance score s(X);
    the outcome carries ``pi * s_true``.  ``s_hat`` is on the outcome scale."""

    y: np.ndarray
    z: np.ndarray
    x: np.ndarray | None = None
    s_true: np.ndarray | None = None
    s_hat: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.y)
        if len(self.z) != n:
            raise ValueError("z and y lengths differ")
        if not np.isin(self.z, (0, 1)).all():
            raise ValueError("z must be binary")
        if self.x is not None and (self.x.ndim != 2 or self.x.shape[0] != n):
            raise ValueError("x must be an n x k matrix")
        for name in ("s_true", "s_hat"):
            col = getattr(self, name)
            if col is not None and len(col) != n:
                raise ValueError(f"{name} and y lengths differ")

    @property
    def n(self) -> int:
        return len(self.y)

    def with_s_hat(self, s_hat) -> "TrialData":
        return replace(self, s_hat=np.asarray(s_hat, dtype=np.float64))

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"y": self.y, "z": self.z}
        if self.x is not None:
            for j in range(self.x.shape[1]):
                cols[f"x{j + 1}"] = self.x[:, j]
        if self.s_true is not None:
            cols["s_true"] = self.s_true
        if self.s_hat is not None:
            cols["s_hat"] = self.s_hat
        return cols

    def to_csv(self, path) -> None:
        cols = self.columns()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for i in range(self.n):
                w.writerow([int(cols["z"][i]) if k == "z" else repr(float(v[i]))
                            for k, v in cols.items()])

    @classmethod
    def from_csv(cls, path) -> "TrialData":
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty file")
        missing = {"y", "z"} - set(rows[0])
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(sorted(missing))}")
        header, body = rows[0], np.array(rows[1:], dtype=np.float64).reshape(-1, len(rows[0]))
        cols = {name: body[:, j] for j, name in enumerate(header)}
        xcols = sorted((c for c in header if c.startswith("x") and c[1:].isdigit()),
                       key=lambda c: int(c[1:]))
        return cls(
            y=cols["y"],
            z=cols["z"].astype(np.int8),
            x=np.column_stack([cols[c] for c in xcols]) if xcols else None,
            s_true=cols.get("s_true"),
            s_hat=cols.get("s_hat"),
        )


def balanced_allocation(n: int, stream: RngStream) -> np.ndarray:
    """Random 1:1 allocation with exactly n/2 subjects per arm."""
    if n % 2:
        raise ValueError(f"1:1 allocation needs an even sample size, got {n}")
    z = np.repeat(np.array([0, 1], dtype=np.int8), n // 2)
    return stream.generator().permutation(z)


def sample_idealized_trial(params: DgpParams, n: int, stream: RngStream) -> TrialData:
    """Trial data whose estimated score correlates ``rho`` with ``pi*s``.

    With ``pi = 0`` the score carries no signal; ``s_hat`` is then drawn on
    unit scale so that it stays a usable (null) covariate.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    z = balanced_allocation(n, stream.child("z"))
    pair = draw_bivariate_normal(stream.child("score"), params.rho, 1.0, n)
    s_true, s_std = pair[:, 0], pair[:, 1]
    s_hat = s_std * (params.pi if params.pi > 0 else 1.0)
    eps = draw_standard_normal(stream.child("eps"), n)
    y = params.alpha + params.beta * z + params.pi * s_true + params.residual_sd * eps
    return TrialData(y=y, z=z, s_true=s_true, s_hat=s_hat)


# -- Friedman #1 prognostic score ---------------------------------------------

def friedman_mean(x) -> np.ndarray:
    """Vectorized mean function of Friedman's first regression problem."""
    x = np.asarray(x, dtype=np.float64)
    return (10.0 * np.sin(np.pi * x[..., 0] * x[..., 1]) + 20.0 * (x[..., 2] - 0.5) ** 2
            + 10.0 * x[..., 3] + 5.0 * x[..., 4])


def friedman_raw_score(x) -> float:
    """Deterministic Friedman #1 value for one covariate vector in [0, 1]^10."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (10,):
        raise ValueError(f"expected a 10-vector, got shape {x.shape}")
    if (x < 0).any() or (x > 1).any():
        raise ValueError("covariates must lie in [0, 1]")
    return float(friedman_mean(x))


@dataclass(frozen=True)
class FriedmanConfig:
    center: float
    scale: float
    k_covariates: int = 10
    noise_sd: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.k_covariates < 5:
            raise ValueError("the Friedman score uses the first five covariates")

    def standardize(self, raw) -> np.ndarray:
        return (np.asarray(raw) - self.center) / self.scale


CALIBRATION_SEED = 20210503
CALIBRATION_DRAWS = 10 ** 6
MIN_CALIBRATION_DRAWS = 10 ** 5


def _raw_scores(config_k: int, noise_sd: float, m: int, stream: RngStream):
    x = draw_uniform(stream.child("x"), (m, config_k))
    raw = friedman_mean(x) + noise_sd * draw_standard_normal(stream.child("noise"), m)
    return x, raw


def calibrate_friedman(stream: RngStream, m: int, k_covariates: int = 10,
                       noise_sd: float = 1.0) -> FriedmanConfig:
    """Empirical center and scale of the noisy Friedman score over ``m`` draws."""
    if m < MIN_CALIBRATION_DRAWS:
        raise ValueError(f"calibration needs at least {MIN_CALIBRATION_DRAWS} draws, got {m}")
    _, raw = _raw_scores(k_covariates, noise_sd, m, stream)
    return FriedmanConfig(center=float(raw.mean()), scale=float(raw.std(ddof=1)),
                          k_covariates=k_covariates, noise_sd=noise_sd)


# calibrate_friedman(RngStream(CALIBRATION_SEED), CALIBRATION_DRAWS), frozen
DEFAULT_FRIEDMAN = FriedmanConfig(center=14.414656314284043, scale=4.985328803621525)


def _friedman_covariates(config: FriedmanConfig, n: int, stream: RngStream):
    x, raw = _raw_scores(config.k_covariates, config.noise_sd, n, stream)
    return x, config.standardize(raw)


def sample_friedman_historical(params: DgpParams, config: FriedmanConfig, n_hist: int,
                               stream: RngStream) -> TrialData:
    """Historical controls (z = 0) with covariates and the true score."""
    if n_hist < 10:
        raise ValueError("n_hist must be at least 10")
    x, s = _friedman_covariates(config, n_hist, stream.child("covariates"))
    eps = draw_standard_normal(stream.child("eps"), n_hist)
    y = params.alpha + params.pi * s + params.residual_sd * eps
    return TrialData(y=y, z=np.zeros(n_hist, dtype=np.int8), x=x, s_true=s)


def sample_friedman_trial(params: DgpParams, config: FriedmanConfig, n: int,
                          stream: RngStream) -> TrialData:
    """1:1 randomized trial under the Friedman score; ``s_hat`` left empty."""
    if n < 10:
        raise ValueError("n must be at least 10")
    z = balanced_allocation(n, stream.child("z"))
    x, s = _friedman_covariates(config, n, stream.child("covariates"))
    eps = draw_standard_normal(stream.child("eps"), n)
    y = params.alpha + params.beta * z + params.pi * s + params.residual_sd * eps
    return TrialData(y=y, z=z, x=x, s_true=s)
