"""Replicated score-adjustment experiments over an (R^2, n_hist) grid.

Every replication is a pure function of the configuration and its grid
coordinates: historical controls -> random forest -> trial -> unadjusted
and score-adjusted linear models.  Streams are derived from the master seed
and the coordinates, so results do not depend on scheduling or worker count.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .dgp import DEFAULT_FRIEDMAN, DgpParams, FriedmanConfig, sample_friedman_historical, \
    sample_friedman_trial
from .learn import ForestConfig, evaluate_score, fit_forest, predict_score
from .rng import RngStream
from .stats import DEFAULT_PROBS, ols_fit, summarize, treatment_design

log = logging.getLogger(__name__)

RECORDS_FILE = "records.csv"
SUMMARY_FILE = "summary.json"
CONFIG_FILE = "config.json"


@dataclass(frozen=True)
class ExperimentConfig:
    r2_values: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    n_hist_values: tuple = (50, 100, 10000)
    n_trial: int = 1000
    replications: int = 1000
    beta: float = 0.12
    sigma2: float = 1.0
    alpha: float = 0.0
    eval_size: int = 100_000
    forest: ForestConfig = field(default_factory=ForestConfig)
    friedman: FriedmanConfig = DEFAULT_FRIEDMAN
    master_seed: int = 1
    output_dir: str = "results"

    def __post_init__(self):
        object.__setattr__(self, "r2_values", tuple(float(v) for v in self.r2_values))
        object.__setattr__(self, "n_hist_values", tuple(int(v) for v in self.n_hist_values))
        if not self.r2_values or not self.n_hist_values:
            raise ValueError("the grid needs at least one R^2 and one n_hist value")
        if any(not 0.0 <= v < 1.0 for v in self.r2_values):
            raise ValueError("r2_values must lie in [0, 1)")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.n_trial < 10 or self.n_trial % 2:
            raise ValueError("n_trial must be even and at least 10")
        if self.eval_size < 1000:
            raise ValueError("eval_size must be at least 1000")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")

    @property
    def cells(self):
        """(r2 index, n_hist index) pairs in canonical order."""
        return [(i, j) for i in range(len(self.r2_values)) for j in range(len(self.n_hist_values))]

    def params(self, r2: float) -> DgpParams:
        return DgpParams.from_r2(r2, alpha=self.alpha, beta=self.beta, sigma2=self.sigma2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["r2_values"] = list(self.r2_values)
        d["n_hist_values"] = list(self.n_hist_values)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "forest" in d and isinstance(d["forest"], dict):
            d["forest"] = ForestConfig(**d["forest"])
        if "friedman" in d and isinstance(d["friedman"], dict):
            d["friedman"] = FriedmanConfig(**d["friedman"])
        return cls(**d)


FAST_OVERRIDES = dict(
    r2_values=(0.2, 0.5, 0.8),
    n_hist_values=(50, 100, 2000),
    replications=200,
    eval_size=10_000,
)
FAST_FOREST = ForestConfig(n_trees=100)


def fast_config(**overrides) -> ExperimentConfig:
    """Reduced grid for CI: 200 replications, n_hist <= 2000, 100 trees."""
    kw = dict(FAST_OVERRIDES, forest=FAST_FOREST)
    kw.update(overrides)
    return ExperimentConfig(**kw)


@dataclass(frozen=True)
class ReplicationRecord:
    r2: float
    n_hist: int
    rep: int
    var_unadj: float
    var_adj: float
    beta_unadj: float
    beta_adj: float
    se_unadj: float
    se_adj: float
    rho_hat: float
    r2_oos_hat: float


RECORD_FIELDS = [f.name for f in fields(ReplicationRecord)]


class ReplicationError(RuntimeError):
    pass


def _cell_index(config: ExperimentConfig, r2: float, n_hist: int) -> tuple[int, int]:
    try:
        return config.r2_values.index(float(r2)), config.n_hist_values.index(int(n_hist))
    except ValueError:
        raise ValueError(f"({r2}, {n_hist}) is not a cell of this configuration") from None


def _cell_stream(config: ExperimentConfig, i: int, j: int) -> RngStream:
    return RngStream(config.master_seed).child("cell", i, j)


@functools.lru_cache(maxsize=4)
def _evaluation_set(config: ExperimentConfig, i: int, j: int):
    """Large control-arm sample shared by all replications of one cell."""
    params = config.params(config.r2_values[i])
    return sample_friedman_historical(params, config.friedman, config.eval_size,
                                      _cell_stream(config, i, j).child("eval"))


def run_replication(config: ExperimentConfig, r2: float, n_hist: int,
                    rep_index: int) -> ReplicationRecord:
    i, j = _cell_index(config, r2, n_hist)
    stream = _cell_stream(config, i, j).child("rep", rep_index)
    params = config.params(config.r2_values[i])
    try:
        hist = sample_friedman_historical(params, config.friedman, n_hist, stream.child("hist"))
        model = fit_forest(hist, config.forest, stream.child("forest"))
        trial = sample_friedman_trial(params, config.friedman, config.n_trial,
                                      stream.child("trial"))
        s_hat = predict_score(model, trial.x)
        unadj = ols_fit(treatment_design(trial.z), trial.y)
        if s_hat.std() > 0:
            adj = ols_fit(treatment_design(trial.z, s_hat), trial.y)
        else:
            # a constant score adds nothing; the adjusted model is the unadjusted one
            adj = unadj
        evaluation = _evaluation_set(config, i, j)
        rho_hat, r2_oos_hat = evaluate_score(model, evaluation)
    except Exception as exc:
        raise ReplicationError(f"cell (r2={r2}, n_hist={n_hist}, rep={rep_index}): {exc}") from exc
    return ReplicationRecord(
        r2=config.r2_values[i], n_hist=config.n_hist_values[j], rep=rep_index,
        var_unadj=unadj.residual_variance, var_adj=adj.residual_variance,
        beta_unadj=float(unadj.coefficients[1]), beta_adj=float(adj.coefficients[1]),
        se_unadj=float(unadj.standard_errors[1]), se_adj=float(adj.standard_errors[1]),
        rho_hat=rho_hat, r2_oos_hat=r2_oos_hat,
    )


def _run_chunk(config: ExperimentConfig, i: int, j: int, reps: range):
    r2, n_hist = config.r2_values[i], config.n_hist_values[j]
    out, failures = [], []
    for rep in reps:
        try:
            out.append(run_replication(config, r2, n_hist, rep))
        except ReplicationError as exc:
            failures.append(str(exc))
    return out, failures


@dataclass
class CellSummary:
    r2: float
    n_hist: int
    count: int
    fraction: object  # SampleStats of var_adj / sigma2
    fraction_unadj: object
    beta_adj: object
    beta_unadj: object
    se_adj: object
    se_unadj: object
    rho_hat: object
    r2_oos_hat: object
    overlay_theory: float  # 1 - R^2 * rho_hat^2 at the median rho_hat
    overlay_design: float  # 1 - R2_oos_hat at the median R2_oos_hat

    def to_dict(self) -> dict:
        return {k: (v.to_dict() if hasattr(v, "to_dict") else v) for k, v in vars(self).items()}


@dataclass
class ExperimentResults:
    config: ExperimentConfig
    records: list
    failures: list = field(default_factory=list)

    @functools.cached_property
    def summaries(self) -> list:
        return summarize_experiment(self)

    def cell(self, r2: float, n_hist: int) -> CellSummary:
        for s in self.summaries:
            if s.r2 == r2 and s.n_hist == n_hist:
                return s
        raise KeyError((r2, n_hist))

    def column(self, name: str, r2: float | None = None, n_hist: int | None = None) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records
                         if (r2 is None or r.r2 == r2) and (n_hist is None or r.n_hist == n_hist)])

    def save(self, output_dir=None) -> Path:
        out = Path(output_dir or self.config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_records(self.records, out / RECORDS_FILE)
        with open(out / SUMMARY_FILE, "w") as fh:
            json.dump({"cells": [s.to_dict() for s in self.summaries],
                       "failures": self.failures}, fh, indent=2)
        with open(out / CONFIG_FILE, "w") as fh:
            json.dump(self.config.to_dict(), fh, indent=2)
        return out

    @classmethod
    def load(cls, output_dir) -> "ExperimentResults":
        out = Path(output_dir)
        records_path = out / RECORDS_FILE
        if not records_path.exists():
            raise FileNotFoundError(f"no {RECORDS_FILE} in {out}")
        config_path = out / CONFIG_FILE
        config = ExperimentConfig()
        if config_path.exists():
            with open(config_path) as fh:
                config = ExperimentConfig.from_dict(json.load(fh))
        return cls(config, read_records(records_path))


def write_records(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow([repr(getattr(r, name)) for name in RECORD_FIELDS])


def read_records(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RECORD_FIELDS:
            raise ValueError(f"unexpected record header {reader.fieldnames}")
        return [ReplicationRecord(**{k: (int(v) if k in ("n_hist", "rep") else float(v))
                                     for k, v in row.items()}) for row in reader]


def records_checksum(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_experiment(config: ExperimentConfig, workers: int = 1,
                   chunk_size: int = 25, progress=None) -> ExperimentResults:
    """Run every cell and replication; failed replications are logged and skipped."""
    tasks = [(i, j, range(lo, min(lo + chunk_size, config.replications)))
             for i, j in config.cells
             for lo in range(0, config.replications, chunk_size)]
    records, failures = [], []
    if workers <= 1:
        results = (_run_chunk(config, i, j, reps) for i, j, reps in tasks)
        for done, (recs, fails) in enumerate(results, 1):
            records.extend(recs)
            failures.extend(fails)
            if progress:
                progress(done, len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, config, i, j, reps) for i, j, reps in tasks]
            for done, fut in enumerate(futures, 1):
                recs, fails = fut.result()
                records.extend(recs)
                failures.extend(fails)
                if progress:
                    progress(done, len(tasks))
    for msg in failures:
        log.warning("replication failed: %s", msg)
    return ExperimentResults(config, records, failures)


def summarize_experiment(results: ExperimentResults, probs=DEFAULT_PROBS) -> list:
    """Per-cell quantiles, means and SDs plus both overlay fractions."""
    if not results.records:
        raise ValueError("no records to summarize")
    sigma2 = results.config.sigma2
    cells = {}
    for r in results.records:
        cells.setdefault((r.r2, r.n_hist), []).append(r)
    out = []
    for (r2, n_hist), recs in sorted(cells.items()):
        col = {name: np.array([getattr(r, name) for r in recs]) for name in RECORD_FIELDS}
        rho_stats = summarize(col["rho_hat"], probs)
        r2oos_stats = summarize(col["r2_oos_hat"], probs)
        out.append(CellSummary(
            r2=r2, n_hist=n_hist, count=len(recs),
            fraction=summarize(col["var_adj"] / sigma2, probs),
            fraction_unadj=summarize(col["var_unadj"] / sigma2, probs),
            beta_adj=summarize(col["beta_adj"], probs),
            beta_unadj=summarize(col["beta_unadj"], probs),
            se_adj=summarize(col["se_adj"], probs),
            se_unadj=summarize(col["se_unadj"], probs),
            rho_hat=rho_stats, r2_oos_hat=r2oos_stats,
            overlay_theory=1.0 - r2 * rho_stats.median ** 2,
            overlay_design=1.0 - r2oos_stats.median,
        ))
    return out
