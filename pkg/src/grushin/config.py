"""Experiment configuration: a versioned ``key = value`` text format.

Blank lines and ``#`` comments are ignored. Lists are comma separated.
Every key is optional and unknown keys are rejected. See :data:`KEYS` for the
table of keys, types and defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from .geometry import GaugeAnnulus, GrushinParams

FORMAT_VERSION = 1


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters shared by all commands.

    ``m, k, alpha, kappa, t_min, t_max, nt, nphi, grading`` describe the
    solved Helmholtz field (Dirichlet data 1 inside, 0 outside); ``nt, nphi``
    is the reference resolution and refinement studies use the half and
    double resolutions around it.
    """

    version: int = FORMAT_VERSION
    seed: int = 20240611
    m: int = 2
    k: int = 1
    alpha: float = 1.0
    kappa: float = 1.0
    t_min: float = 1.0
    t_max: float = 7.25
    nt: int = 200
    nphi: int = 48
    grading: Optional[float] = None
    ell: tuple = ()
    p: tuple = (3.0, 3.5)
    s_exponent: tuple = (0.25, 0.5, 0.75)
    field: str = "solve"
    field_file: str = ""
    n_points: int = 10000
    out: str = "results"

    def __post_init__(self):
        if self.version != FORMAT_VERSION:
            raise ConfigError(f"unsupported config version {self.version}; expected {FORMAT_VERSION}")
        try:
            self.params
            GaugeAnnulus(self.t_min, self.t_max)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.nt < 8 or self.nphi < 8 or self.nt % 2 or self.nphi % 2:
            raise ConfigError("nt and nphi must be even and at least 8")
        if self.kappa <= 0:
            raise ConfigError("kappa must be positive")
        if self.n_points < 1:
            raise ConfigError("n_points must be positive")
        if any(not 0 < s < 1 for s in self.s_exponent):
            raise ConfigError("s_exponent values must lie in (0, 1)")

    @property
    def params(self) -> GrushinParams:
        return GrushinParams(int(self.m), int(self.k), float(self.alpha))

    @property
    def annulus(self) -> GaugeAnnulus:
        return GaugeAnnulus(self.t_min, self.t_max)

    @property
    def phi_grading(self) -> float:
        return self.params.a if self.grading is None else self.grading

    def resolutions(self):
        """Half, reference and double resolution."""
        return [(self.nt // 2, self.nphi // 2), (self.nt, self.nphi), (2 * self.nt, 2 * self.nphi)]

    def as_dict(self):
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


_PARSERS = {
    "version": int, "seed": int, "m": int, "k": int, "nt": int, "nphi": int, "n_points": int,
    "alpha": float, "kappa": float, "t_min": float, "t_max": float,
    "grading": lambda v: None if v.strip().lower() in ("", "auto") else float(v),
    "ell": _floats, "p": _floats, "s_exponent": _floats,
    "field": str, "field_file": str, "out": str,
}

KEYS = {
    name: (f.default if f.default is not dataclasses.MISSING else None)
    for name, f in ExperimentConfig.__dataclass_fields__.items()
}


def parse_config(text: str, source="<config>") -> dict:
    """Parse ``key = value`` lines into typed values (no validation of ranges)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            out[key] = _PARSERS[key](value)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad value {value!r} for {key!r}") from None
    return out


def build_config(file_values: dict, overrides: dict) -> ExperimentConfig:
    values = {**file_values, **{k: v for k, v in overrides.items() if v is not None}}
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def render_config(cfg: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config` for a full config."""
    lines = []
    for k, v in cfg.as_dict().items():
        if isinstance(v, list):
            v = ", ".join(repr(float(x)) for x in v)
        elif v is None:
            v = "auto"
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
