"""Run configuration: domains, degrees, tolerances, precision."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class Domains1D:
    """Disks Z (for eta) and W (for xi), given by center and radius."""

    z_center: complex = 0.47 - 0.43j
    z_radius: float = 0.716
    w_center: complex = 0.08 - 0.517j
    w_radius: float = 0.613


@dataclass(frozen=True)
class Domains2D:
    """Vertical disks U (for A) and V (for B); the horizontal disks are Z and W."""

    u_center: complex = -0.05 - 0.6j
    u_radius: float = 0.75
    v_center: complex = -0.15 - 0.75j
    v_radius: float = 0.85


_COMPLEX_KEYS = {"domains": ("z_center", "w_center"), "domains2d": ("u_center", "v_center")}


@dataclass(frozen=True)
class Config:
    degree: int = 60
    degree_x: int = 60
    degree_y: int = 12
    domains: Domains1D = field(default_factory=Domains1D)
    domains2d: Domains2D = field(default_factory=Domains2D)
    slack: float = 0.3
    tol: float = 1e-11
    max_iters: int = 50
    fd_step: float = 1e-7
    deriv_tol: float = 1e-10
    defect_tol: float = 1e-8
    crit_radius: float = 0.6
    fit_tol: float = 1e-10
    precision: str = "double"
    extended_bits: int = 128
    threads: int = 1

    def __post_init__(self):
        if self.degree < 4 or self.degree_x < 4 or self.degree_y < 1:
            raise ConfigError("degrees too small")
        if self.precision not in ("double", "extended"):
            raise ConfigError(f"unknown precision {self.precision!r}")
        if self.tol <= 0 or self.fd_step <= 0 or self.slack < 0 or self.crit_radius <= 0:
            raise ConfigError("tolerances must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

    @property
    def extended(self) -> bool:
        return self.precision == "extended"

    def with_(self, **kw) -> "Config":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        for group, keys in _COMPLEX_KEYS.items():
            for k in keys:
                d[group][k] = [d[group][k].real, d[group][k].imag]
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for group, kind in (("domains", Domains1D), ("domains2d", Domains2D)):
            if group not in data:
                continue
            dom = dict(data[group])
            for k in _COMPLEX_KEYS[group]:
                if k in dom and isinstance(dom[k], (list, tuple)):
                    dom[k] = complex(*dom[k])
            try:
                data[group] = kind(**dom)
            except TypeError as exc:
                raise ConfigError(str(exc)) from exc
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "Config":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)
