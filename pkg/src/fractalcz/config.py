"""Run configuration: one sectioned key-value file, then environment, then flags.

Example file::

    [run]
    model = gasket
    levels = 3, 4, 5, 6
    top_level = 7
    seed = 0

    [operators]
    riesz = 0.5, 1, 2
    bessel_imaginary = 1, 2

    [estimates]
    select = size, laplacian_smooth, holder
    rel_tol = 0.15
    drift_cap = 3

    [holder]
    c = 22

    [output]
    dir = out
    formats = json, csv, plot
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .fractal_model import DEFAULT_VERTEX_CAP, ModelError, build_model, expected_counts

ENV_OUT = "FRACTALCZ_OUT"
ENV_THREADS = "FRACTALCZ_THREADS"

FORMATS = ("json", "csv", "plot")

# default pooled levels, top level, operators per model
MODEL_DEFAULTS = {
    "gasket": {
        "levels": (3, 4, 5, 6),
        "top_level": 7,
        "operators": {"riesz": (0.5, 1.0, 2.0), "bessel_imaginary": (1.0, 2.0)},
    },
    "interval": {
        "levels": (7, 8, 9, 10),
        "top_level": 10,
        "operators": {"riesz": (1.0,)},
    },
}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in _items(text))


def _items(text: str) -> list[str]:
    return [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]


def parse_levels(text: str) -> tuple[int, ...]:
    out: list[int] = []
    for item in _items(text):
        if "-" in item[1:]:
            lo, hi = item.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(item))
    return tuple(out)


def _complexes(text: str) -> tuple[complex | float, ...]:
    out = []
    for item in _items(text):
        z = complex(item.replace(" ", ""))
        out.append(z.real if z.imag == 0 else z)
    return tuple(out)


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on.

    ``levels`` are pooled by the scale estimates; ``top_level`` is the finest
    graph, used by the heat fit, the Hoelder test and the calibration gates.
    ``threads`` and ``output_dir`` do not influence any number in the report.
    """

    model: str = "gasket"
    levels: tuple[int, ...] = ()
    top_level: int = 0
    operators: Mapping[str, tuple] = field(default_factory=dict)
    estimates: tuple[str, ...] = ()
    rel_tol: float = 0.15
    drift_cap: float = 3.0
    holder_c: float | None = None
    holder_budget: int = 500
    lp_exponents: tuple[float, ...] = (1.5, 3.0)
    product_family: str = "riesz"
    product_alpha: float = 1.0
    product_gamma: float | None = None
    product_samples: int = 20000
    seed: int = 0
    output_dir: str = "fractalcz_out"
    threads: int = 0
    formats: tuple[str, ...] = FORMATS
    vertex_cap: int = DEFAULT_VERTEX_CAP

    def __post_init__(self):
        try:
            model = build_model(self.model)
        except ModelError as exc:
            raise ConfigError(str(exc)) from exc
        defaults = MODEL_DEFAULTS[self.model]
        if not self.levels:
            object.__setattr__(self, "levels", defaults["levels"])
        if not self.top_level:
            object.__setattr__(self, "top_level", max(defaults["top_level"], max(self.levels)))
        if not self.operators:
            object.__setattr__(self, "operators", dict(defaults["operators"]))
        for lev in (*self.levels, self.top_level):
            if lev < 1:
                raise ConfigError(f"level {lev} must be at least 1")
            if expected_counts(model, lev)[0] > self.vertex_cap:
                raise ConfigError(f"level {lev} exceeds the vertex cap {self.vertex_cap}")
        if list(self.levels) != sorted(set(self.levels)):
            raise ConfigError("levels must be strictly increasing")
        for fam, params in self.operators.items():
            if fam not in ("riesz", "bessel", "bessel_imaginary"):
                raise ConfigError(f"unknown operator family {fam!r}")
            for a in params:
                if fam == "bessel" and not complex(a).real < 0:
                    raise ConfigError("bessel kernels need Re alpha < 0")
                if fam != "bessel" and complex(a).imag != 0:
                    raise ConfigError(f"{fam} takes a real alpha")
        if not self.rel_tol > 0 or not self.drift_cap >= 1:
            raise ConfigError("rel_tol must be positive and drift_cap at least 1")
        if self.product_family not in ("riesz", "bessel_imaginary"):
            raise ConfigError("product family must be riesz or bessel_imaginary")
        if self.holder_c is not None and not self.holder_c > 0:
            raise ConfigError("Hoelder constant c must be positive")
        if self.holder_budget < 1 or self.product_samples < 1:
            raise ConfigError("sample budgets must be positive")
        if any(not 1 < p < float("inf") for p in self.lp_exponents):
            raise ConfigError("L^p exponents must lie in (1, inf)")
        if self.threads < 0:
            raise ConfigError("threads must be nonnegative")
        bad = set(self.formats) - set(FORMATS)
        if bad:
            raise ConfigError(f"unknown output formats {sorted(bad)}")

    @property
    def thread_count(self) -> int:
        return self.threads or os.cpu_count() or 1

    def to_dict(self) -> dict:
        """Fields that determine the numbers; ``threads`` and ``output_dir`` are left out."""
        out = {}
        for f in dataclasses.fields(self):
            if f.name in ("threads", "output_dir", "formats"):
                continue
            v = getattr(self, f.name)
            if f.name == "operators":
                v = {k: [str(a) if isinstance(a, complex) else float(a) for a in vals] for k, vals in sorted(v.items())}
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


_KEYS = {
    ("run", "model"): ("model", str),
    ("run", "levels"): ("levels", parse_levels),
    ("run", "top_level"): ("top_level", int),
    ("run", "seed"): ("seed", int),
    ("run", "threads"): ("threads", int),
    ("run", "vertex_cap"): ("vertex_cap", int),
    ("estimates", "select"): ("estimates", lambda s: tuple(_items(s))),
    ("estimates", "rel_tol"): ("rel_tol", float),
    ("estimates", "drift_cap"): ("drift_cap", float),
    ("estimates", "lp_exponents"): ("lp_exponents", _floats),
    ("holder", "c"): ("holder_c", float),
    ("holder", "budget"): ("holder_budget", int),
    ("product", "family"): ("product_family", str),
    ("product", "alpha"): ("product_alpha", float),
    ("product", "gamma"): ("product_gamma", float),
    ("product", "samples"): ("product_samples", int),
    ("output", "dir"): ("output_dir", str),
    ("output", "formats"): ("formats", lambda s: tuple(_items(s))),
}


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Parse a config file into RunConfig keyword arguments."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    out: dict[str, Any] = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if section == "operators":
                try:
                    out.setdefault("operators", {})[key] = _complexes(raw)
                except ValueError as exc:
                    raise ConfigError(f"[operators] {key}: {exc}") from exc
                continue
            if (section, key) not in _KEYS:
                raise ConfigError(f"unknown config key [{section}] {key}")
            name, conv = _KEYS[(section, key)]
            try:
                out[name] = conv(raw) if raw.strip() else None
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
    return {k: v for k, v in out.items() if v is not None}


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, Any]:
    environ = os.environ if environ is None else environ
    out: dict[str, Any] = {}
    if environ.get(ENV_OUT):
        out["output_dir"] = environ[ENV_OUT]
    if environ.get(ENV_THREADS):
        try:
            out["threads"] = int(environ[ENV_THREADS])
        except ValueError as exc:
            raise ConfigError(f"{ENV_THREADS} must be an integer") from exc
    return out


def load_config(
    path: str | Path | None = None,
    flags: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> RunConfig:
    """Merge file, environment and flags (later wins) into a validated RunConfig."""
    kwargs: dict[str, Any] = {}
    if path is not None:
        kwargs.update(read_config_file(path))
    kwargs.update(env_overrides(environ))
    kwargs.update({k: v for k, v in (flags or {}).items() if v is not None})
    model = kwargs.get("model", "gasket")
    if "levels" not in kwargs and "top_level" in kwargs and model in MODEL_DEFAULTS:
        # a lone top level trims the default pooled levels to those below it
        top = kwargs["top_level"]
        levels = tuple(lv for lv in MODEL_DEFAULTS[model]["levels"] if lv <= top)
        if len(levels) < 3:
            levels = tuple(lv for lv in range(top - 3, top + 1) if lv >= 1)
        kwargs["levels"] = levels
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
