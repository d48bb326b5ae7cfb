"""Strict parsing of JSON run-configuration documents.

A document mirrors the field names of :class:`ExperimentConfig`::

    {
      "params": {"p": 1, "a": [1.0, 0.5], "b": [2.0, 0.3]},
      "spec": {"family": "gaussian-pair", "sigma2": 1.0, "rho": 0.5},
      "init": {"mode": "iid-normal", "init_mean": null, "init_var": 1.0},
      "n_generations": 12,
      "replicates": 500,
      "master_seed": 42,
      "checks": ["clt_theta", "clt_sigma"],
      "tolerances": {"ks_max": 0.08},
      "max_depth": 8,
      "burn_in": null
    }

Unknown or duplicated keys are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ValidationError
from .model import BarParams
from .montecarlo import CHECKS, ExperimentConfig
from .noise import NoiseSpec
from .simulate import InitSpec

TOP_KEYS = {
    "params", "spec", "init", "n_generations", "replicates", "master_seed",
    "checks", "tolerances", "max_depth", "burn_in",
}
PARAMS_KEYS = {"p", "a", "b"}
SPEC_KEYS = {"family", "sigma2", "rho"}
INIT_KEYS = {"mode", "explicit_values", "init_mean", "init_var"}


class ConfigParseError(Exception):
    """The document is not valid JSON; carries line and column."""

    def __init__(self, path, lineno: int, colno: int, msg: str):
        super().__init__(f"{path}:{lineno}:{colno}: {msg}")
        self.lineno = lineno
        self.colno = colno


def _no_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ValidationError(f"duplicate key {key!r}")
        out[key] = value
    return out


def load_document(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(path, exc.lineno, exc.colno, exc.msg) from None
    if not isinstance(doc, dict):
        raise ValidationError("configuration document must be a JSON object")
    return doc


def _section(doc: dict, name: str, allowed: set, required: bool = True) -> dict | None:
    if name not in doc:
        if required:
            raise ValidationError(f"missing required section {name!r}")
        return None
    section = doc[name]
    if not isinstance(section, dict):
        raise ValidationError(f"section {name!r} must be an object")
    unknown = set(section) - allowed
    if unknown:
        raise ValidationError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return section


def _int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    return value


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{name} must be a number, got {value!r}")
    return float(value)


def _numbers(value, name: str) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise ValidationError(f"{name} must be a list of numbers")
    return tuple(_number(v, f"{name}[{i}]") for i, v in enumerate(value))


def check_top_level(doc: dict) -> None:
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown top-level keys: {sorted(unknown)}")


def parse_params(doc: dict) -> BarParams:
    sec = _section(doc, "params", PARAMS_KEYS)
    missing = PARAMS_KEYS - set(sec)
    if missing:
        raise ValidationError(f"params is missing {sorted(missing)}")
    return BarParams(_int(sec["p"], "params.p"), _numbers(sec["a"], "params.a"), _numbers(sec["b"], "params.b"))


def parse_spec(doc: dict) -> NoiseSpec:
    sec = _section(doc, "spec", SPEC_KEYS)
    if "family" not in sec or "sigma2" not in sec:
        raise ValidationError("spec needs 'family' and 'sigma2'")
    return NoiseSpec(sec["family"], _number(sec["sigma2"], "spec.sigma2"), _number(sec.get("rho", 0.0), "spec.rho"))


def parse_init(doc: dict) -> InitSpec:
    sec = _section(doc, "init", INIT_KEYS, required=False)
    if sec is None:
        return InitSpec()
    mode = sec.get("mode", "iid-normal")
    if mode == "explicit":
        extra = set(sec) - {"mode", "explicit_values"}
        if extra:
            raise ValidationError(f"explicit init does not accept {sorted(extra)}")
        if "explicit_values" not in sec:
            raise ValidationError("explicit init requires explicit_values")
        return InitSpec.explicit(_numbers(sec["explicit_values"], "init.explicit_values"))
    if "explicit_values" in sec:
        raise ValidationError("explicit_values is only valid with mode 'explicit'")
    mean = sec.get("init_mean")
    return InitSpec(
        mode=mode,
        init_mean=None if mean is None else _number(mean, "init.init_mean"),
        init_var=_number(sec.get("init_var", 1.0), "init.init_var"),
    )


def master_seed(doc: dict) -> int:
    if "master_seed" not in doc:
        raise ValidationError("master_seed is mandatory for stochastic commands")
    seed = _int(doc["master_seed"], "master_seed")
    if not 0 <= seed < 2**64:
        raise ValidationError("master_seed must fit in 64 unsigned bits")
    return seed


def n_generations(doc: dict) -> int:
    if "n_generations" not in doc:
        raise ValidationError("n_generations is required")
    return _int(doc["n_generations"], "n_generations")


def parse_experiment(doc: dict) -> ExperimentConfig:
    check_top_level(doc)
    checks = doc.get("checks", list(CHECKS))
    if not isinstance(checks, list) or not all(isinstance(c, str) for c in checks):
        raise ValidationError("checks must be a list of names")
    tolerances = doc.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise ValidationError("tolerances must be an object")
    burn_in = doc.get("burn_in")
    return ExperimentConfig(
        params=parse_params(doc),
        spec=parse_spec(doc),
        init=parse_init(doc),
        n_generations=n_generations(doc),
        replicates=_int(doc.get("replicates", 1), "replicates"),
        master_seed=master_seed(doc),
        checks=tuple(checks),
        tolerances={k: _number(v, f"tolerances.{k}") for k, v in tolerances.items()},
        max_depth=_int(doc.get("max_depth", 8), "max_depth"),
        burn_in=None if burn_in is None else _int(burn_in, "burn_in"),
    )
