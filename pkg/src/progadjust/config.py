"""Experiment configuration files.

Flat ``key = value`` pairs grouped in sections::

    [simulate]
    r2_values = 0.2, 0.5, 0.8
    n_hist_values = 50, 100, 2000
    replications = 200
    master_seed = 7

    [forest]
    n_trees = 100

Unknown sections or keys are errors.  ``PROGADJUST_SEED`` in the
environment overrides ``master_seed``.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import fields, replace

from .dgp import FriedmanConfig
from .learn import ForestConfig
from .simulate import ExperimentConfig

SEED_ENV = "PROGADJUST_SEED"


class ConfigError(ValueError):
    pass


def _parse_tuple(kind):
    def parse(text):
        return tuple(kind(v) for v in text.replace(",", " ").split())
    return parse


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_int(text):
    return None if text.strip().lower() in ("", "none") else int(text)


SIMULATE_KEYS = {
    "r2_values": _parse_tuple(float),
    "n_hist_values": _parse_tuple(int),
    "n_trial": int,
    "replications": int,
    "beta": float,
    "sigma2": float,
    "alpha": float,
    "eval_size": int,
    "master_seed": int,
    "output_dir": str,
}
FOREST_KEYS = {
    "n_trees": int,
    "mtry": _parse_optional_int,
    "min_node_size": int,
    "max_depth": _parse_optional_int,
    "bootstrap": _parse_bool,
}
FRIEDMAN_KEYS = {"center": float, "scale": float}
RUN_KEYS = {"workers": int}

SECTIONS = {"simulate": SIMULATE_KEYS, "forest": FOREST_KEYS, "friedman": FRIEDMAN_KEYS,
            "run": RUN_KEYS}


def read_config_file(path) -> dict:
    """Parse a config file into ``{section: {key: typed value}}``."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    with open(path) as fh:
        try:
            parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    out = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        keys = SECTIONS[section]
        out[section] = {}
        for key, raw in parser.items(section):
            if key not in keys:
                raise ConfigError(f"unknown config key '{key}' in [{section}]")
            try:
                out[section][key] = keys[key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for '{key}' in [{section}]: {exc}") from exc
    return out


def apply_overrides(base: ExperimentConfig, sections: dict) -> ExperimentConfig:
    sim = dict(sections.get("simulate", {}))
    forest = sections.get("forest", {})
    friedman = sections.get("friedman", {})
    try:
        if forest:
            sim["forest"] = replace(base.forest, **forest)
        if friedman:
            sim["friedman"] = FriedmanConfig(**{**_asdict(base.friedman), **friedman})
        return replace(base, **sim)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _asdict(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


def seed_from_env(environ=None) -> int | None:
    environ = os.environ if environ is None else environ
    raw = environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None
