"""Experiment configuration: flat JSON files with preset inheritance.

A config is one flat JSON object.  An `extends` key names either a built-in
preset or another JSON file whose fields serve as defaults.  Command-line
`--set key=value` overrides are applied last; values are parsed as JSON
when possible and kept as strings otherwise.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import ConfigError, UnknownPreset

MODES = ("chains", "curves", "scaling")

_MAX_EXTENDS_DEPTH = 8


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description.

    mode "chains" runs kernel/seed grids of finite-d chains; mode "curves"
    evaluates limit-functional acceptance/ESJD curves; mode "scaling" runs
    step-size optimization sweeps.  Fields irrelevant to a mode are ignored
    by it.
    """

    name: str
    mode: str = "chains"
    # chains mode
    target: str = "gaussian(0,1)^10"
    kernels: tuple = ()
    radius: float | None = None
    x0: object = "stationary"  # "stationary" | scalar | list of floats
    seed0: int = 1
    n_seeds: int = 10
    iterations: int = 5000
    burn_in: int = 0
    thinning: int = 1
    retention: str = "full"
    reference: str = "mean"  # burn-in curve reference: "mean" | "zero"
    # curves mode (limit functionals)
    weight: str = "lb"
    centers: tuple = ()  # component means m, with var 1 - m^2
    lams: tuple = ()  # radius ratios
    n_values: tuple = ()  # candidate counts
    center: float = 0.5
    lam: float | None = 1.0
    n_candidates: int = 3
    ell: float = 1.2  # fixed step scale for candidate-count curves
    samples: int = 200000
    ell_grid: tuple = (0.2, 6.0, 30)
    # scaling mode arms are fixed; shares center/samples/ell_grid above

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_seeds < 1:
            raise ConfigError(f"need at least one seed, got n_seeds={self.n_seeds!r}")
        if self.mode == "chains":
            if self.iterations <= self.burn_in:
                raise ConfigError(
                    f"iterations={self.iterations!r} must exceed burn_in={self.burn_in!r}"
                )
            if not self.kernels:
                raise ConfigError("chains mode needs a nonempty kernels list")
            labels = [k.get("label") for k in self.kernels]
            if None in labels or len(set(labels)) != len(labels):
                raise ConfigError("every kernel needs a unique 'label'")
        if self.mode == "curves":
            axes = [bool(self.centers), bool(self.lams), bool(self.n_values)]
            if sum(axes) != 1:
                raise ConfigError(
                    "curves mode needs exactly one of centers/lams/n_values nonempty"
                )
        g = self.ell_grid
        if len(g) != 3 or not g[0] > 0 or not g[1] > g[0] or int(g[2]) < 2:
            raise ConfigError(f"ell_grid must be (lo, hi, num) with 0<lo<hi, num>=2, got {g!r}")
        if not self.ell > 0:
            raise ConfigError(f"ell must be positive, got {self.ell!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    if isinstance(value, dict):
        return {k: _tupled(v) for k, v in value.items()}
    return value


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    out.update(override)
    return out


def _load_raw(source: str, depth: int = 0) -> dict:
    """Resolve a preset name or JSON path into a flat dict, following extends."""
    from .presets import PRESETS  # deferred; presets are data built on this module

    if depth > _MAX_EXTENDS_DEPTH:
        raise ConfigError(f"extends chain deeper than {_MAX_EXTENDS_DEPTH}")
    if source in PRESETS:
        raw = dict(PRESETS[source])
    else:
        path = Path(source)
        if not path.exists():
            raise UnknownPreset(
                f"{source!r} is neither a preset ({', '.join(sorted(PRESETS))}) "
                "nor a config file"
            )
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {source!r}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {source!r} must be a JSON object")
    parent = raw.pop("extends", None)
    if parent is not None:
        raw = _merge(_load_raw(str(parent), depth + 1), raw)
    return raw


def parse_set_overrides(pairs) -> dict:
    """Parse --set key=value strings; values are JSON when parseable."""
    out = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def load_config(source: str, overrides: dict | None = None) -> ExperimentConfig:
    """Resolve a preset name or config path, apply overrides, and validate."""
    raw = _load_raw(source)
    if overrides:
        raw = _merge(raw, overrides)
    raw.setdefault("name", source)
    raw = {k: _tupled(v) for k, v in raw.items()}
    try:
        return ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad config field: {exc}") from exc
