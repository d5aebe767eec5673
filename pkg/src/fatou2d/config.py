"""Flat ``key = value`` run configuration.

One setting per line, ``#`` starts a comment, blank lines are ignored.
Complex values use Python literal syntax (``3+0.5j``).  Unknown keys and
malformed values are errors carrying the offending line number.  Sector
overrides (``R``, ``delta``, ``theta``) are validated as a SectorParams
before any dynamics runs; when none is given the region is certified
automatically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Optional

from .coords import SectorParams
from .errors import ConfigError
from .expansion import Limits
from .fatou import OrbitPolicy

__all__ = ["Config", "parse_config", "load_config", "format_config"]


@dataclass(frozen=True)
class Config:
    germ: Optional[str] = None
    # sector overrides; None means "certify the default ladder"
    R: Optional[float] = None
    delta: Optional[float] = None
    theta: Optional[float] = None
    # series truncation
    trunc_n: Optional[int] = None
    trunc_m: Optional[int] = None
    # orbit policy
    n_min: int = 64
    n_max: int = 2**20
    eps_tail: float = 1e-9
    n_entry: int = 10_000
    precision: str = "double"
    workers: int = 1
    seed: int = 0
    out: str = "out"
    # verify sample counts
    samples_invariance: int = 10_000
    samples_bounds: int = 100
    bounds_steps: int = 10_000
    samples_abel: int = 100
    samples_tau: int = 100
    samples_f3: int = 10_000
    samples_envelope: int = 200
    samples_injectivity: int = 1000
    # orbit / fatou start point in the (u, v) chart
    start_u: complex = 40 + 0j
    start_v: complex = 20000 + 0j
    orbit_steps: int = 1000
    # basin slice: base + s1 dir1 + s2 dir2
    slice_base_x: complex = 0j
    slice_base_y: complex = 0j
    slice_dir1_x: complex = -1j
    slice_dir1_y: complex = 0j
    slice_dir2_x: complex = 0j
    slice_dir2_y: complex = -1 + 0j
    slice_s1_min: float = 0.0
    slice_s1_max: float = 0.02
    slice_s2_min: float = 0.0
    slice_s2_max: float = 0.2
    width: int = 128
    height: int = 128
    render_n_max: int = 4096

    def __post_init__(self):
        if self.precision not in ("double", "high"):
            raise ConfigError(f"precision must be 'double' or 'high', got {self.precision!r}")
        for name in ("n_min", "n_max", "workers", "width", "height", "render_n_max"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.n_max < self.n_min:
            raise ConfigError("n_max must not be below n_min")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.has_sector_override():
            self.sector_params(2)  # validates the ranges independently of k

    def has_sector_override(self):
        return any(v is not None for v in (self.R, self.delta, self.theta))

    def sector_params(self, k) -> Optional[SectorParams]:
        """Validated SectorParams from the overrides (missing ones take the defaults)."""
        if not self.has_sector_override():
            return None
        return SectorParams(
            k,
            32.0 if self.R is None else self.R,
            0.05 if self.delta is None else self.delta,
            math.pi / 8 if self.theta is None else self.theta,
        )

    def orbit_policy(self) -> OrbitPolicy:
        return OrbitPolicy(n_min=self.n_min, n_max=self.n_max, eps_tail=self.eps_tail,
                           n_entry=self.n_entry)

    def limits(self) -> Limits:
        return Limits(self.trunc_n, self.trunc_m)

    @property
    def oracle_dps(self):
        return 30 if self.precision == "high" else 20

    def with_overrides(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


_KINDS = {
    "germ": str, "precision": str, "out": str,
    "R": float, "delta": float, "theta": float, "eps_tail": float,
    "slice_s1_min": float, "slice_s1_max": float, "slice_s2_min": float, "slice_s2_max": float,
    "start_u": complex, "start_v": complex,
    "slice_base_x": complex, "slice_base_y": complex, "slice_dir1_x": complex,
    "slice_dir1_y": complex, "slice_dir2_x": complex, "slice_dir2_y": complex,
}


def _convert(key, raw):
    kind = _KINDS.get(key, int)
    if kind is str:
        return raw
    if kind is int:
        return int(raw.replace("_", ""))
    return kind(raw.replace(" ", ""))


def parse_config(text: str) -> Config:
    known = {f.name for f in fields(Config)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _convert(key, val)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {val!r} for {key}") from None
    return Config(**values)


def load_config(path) -> Config:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(cfg: Config) -> str:
    """Round-trippable text form (None values are omitted)."""
    lines = []
    for f in fields(Config):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        lines.append(f"{f.name} = {v!r}" if isinstance(v, complex) else f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
