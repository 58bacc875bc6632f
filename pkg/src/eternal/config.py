"""Run configuration read from a flat ``section.key = value`` text file.

Blank lines and ``#`` comments are ignored.  ``output_dir`` and ``seed`` have no
section.  Lists are comma separated.  Unknown keys are rejected, and every
numeric field is checked against its documented range.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .evolve import DT_GUARD, SchemeConfig
from .forcing import ForcingParams
from .grid import SpatialGrid


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSection:
    L: float = 30.0
    N: int = 1201


@dataclass(frozen=True)
class ForcingSection:
    offset: float = 0.4
    width: float = 1.0


@dataclass(frozen=True)
class SchemeSection:
    dt: float = 1e-3
    theta: float = 0.5
    t_max: float = 50.0
    store_stride: int = 100
    steady_tol: float = 1e-7
    blowup_threshold: float = 1e6


@dataclass(frozen=True)
class FamilySection:
    c_list: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    margin: float = 1.0
    fold_at: float = 1.5


@dataclass(frozen=True)
class HeteroclinicSection:
    k_max: int = 8
    window: tuple[float, ...] = (-5.0, 5.0, -10.0, 10.0)


@dataclass(frozen=True)
class TolerancesSection:
    newton_tol: float = 1e-10
    anchor_tol: float = 1e-6
    tail_tol: float = 0.1
    funnel_slack: float = 1e-10


@dataclass(frozen=True)
class InvariantsSection:
    samples: int = 50
    t_max: float = 50.0
    duhamel_t: float = 1.0
    duhamel_stride: int = 10


@dataclass(frozen=True)
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    forcing: ForcingSection = field(default_factory=ForcingSection)
    scheme: SchemeSection = field(default_factory=SchemeSection)
    family: FamilySection = field(default_factory=FamilySection)
    heteroclinic: HeteroclinicSection = field(default_factory=HeteroclinicSection)
    tolerances: TolerancesSection = field(default_factory=TolerancesSection)
    invariants: InvariantsSection = field(default_factory=InvariantsSection)
    output_dir: str = "out"
    seed: int = 12345

    def __post_init__(self) -> None:
        validate(self)

    def spatial_grid(self) -> SpatialGrid:
        return SpatialGrid(self.grid.L, self.grid.N)

    def forcing_params(self) -> ForcingParams:
        return ForcingParams(self.forcing.offset, self.forcing.width)

    def scheme_config(self, **overrides) -> SchemeConfig:
        return SchemeConfig(**{**asdict(self.scheme), **overrides})

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        lines = []
        for name, value in self.to_dict().items():
            if isinstance(value, dict):
                for key, v in value.items():
                    lines.append(f"{name}.{key} = {_format(v)}")
            else:
                lines.append(f"{name} = {_format(value)}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_SECTION_TYPES = {
    "grid": GridSection,
    "forcing": ForcingSection,
    "scheme": SchemeSection,
    "family": FamilySection,
    "heteroclinic": HeteroclinicSection,
    "tolerances": TolerancesSection,
    "invariants": InvariantsSection,
}


def _format(v) -> str:
    if isinstance(v, (tuple, list)):
        return ", ".join(_format(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def _convert(raw: str, default, key: str):
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false"):
                raise ValueError(raw)
            return raw.lower() == "true"
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(p) for p in raw.split(",") if p.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from exc


def parse_text(text: str) -> RunConfig:
    sections: dict[str, dict] = {name: {} for name in _SECTION_TYPES}
    top: dict = {}
    base = RunConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        if "." in key:
            sec, name = key.split(".", 1)
            if sec not in _SECTION_TYPES:
                raise ConfigError(f"line {lineno}: unknown section {sec!r}")
            default_sec = getattr(base, sec)
            if name not in {f.name for f in fields(default_sec)}:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if name in sections[sec]:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            sections[sec][name] = _convert(raw, getattr(default_sec, name), key)
        else:
            if key not in ("output_dir", "seed"):
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in top:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            top[key] = _convert(raw, getattr(base, key), key)
    kwargs = {sec: replace(getattr(base, sec), **vals) for sec, vals in sections.items()}
    return RunConfig(**kwargs, **top)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_text(path.read_text())


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def validate(cfg: RunConfig) -> None:
    g, s, fam, het, tol, inv = cfg.grid, cfg.scheme, cfg.family, cfg.heteroclinic, cfg.tolerances, cfg.invariants
    _check(g.L > 0 and math.isfinite(g.L), f"grid.L must be positive, got {g.L}")
    _check(g.N >= 3 and g.N % 2 == 1, f"grid.N must be odd and >= 3, got {g.N}")
    _check(cfg.forcing.width > 0, f"forcing.width must be positive, got {cfg.forcing.width}")
    _check(cfg.forcing.offset > 0, f"forcing.offset must be positive, got {cfg.forcing.offset}")
    _check(0 < s.dt <= DT_GUARD, f"scheme.dt must lie in (0, {DT_GUARD}], got {s.dt}")
    _check(0.5 <= s.theta <= 1.0, f"scheme.theta must lie in [0.5, 1], got {s.theta}")
    _check(s.t_max > 0, f"scheme.t_max must be positive, got {s.t_max}")
    _check(s.store_stride >= 1, f"scheme.store_stride must be >= 1, got {s.store_stride}")
    _check(s.steady_tol > 0, f"scheme.steady_tol must be positive, got {s.steady_tol}")
    _check(s.blowup_threshold > 0, f"scheme.blowup_threshold must be positive, got {s.blowup_threshold}")
    _check(len(fam.c_list) > 0, "family.c_list must not be empty")
    _check(all(0.0 <= c < 1.0 for c in fam.c_list), f"family.c_list entries must lie in [0, 1), got {fam.c_list}")
    _check(fam.margin > 0, f"family.margin must be positive, got {fam.margin}")
    _check(fam.fold_at >= 1.0, f"family.fold_at must be >= 1, got {fam.fold_at}")
    _check(0 <= het.k_max <= 30, f"heteroclinic.k_max must lie in [0, 30], got {het.k_max}")
    _check(len(het.window) == 4, f"heteroclinic.window needs four values t_lo, t_hi, x_lo, x_hi, got {het.window}")
    t_lo, t_hi, x_lo, x_hi = het.window
    _check(t_lo < t_hi and x_lo < x_hi, f"heteroclinic.window is empty: {het.window}")
    _check(-g.L <= x_lo and x_hi <= g.L, f"heteroclinic.window x-range exceeds [-L, L]: {het.window}")
    for name in ("newton_tol", "anchor_tol", "tail_tol", "funnel_slack"):
        _check(getattr(tol, name) > 0, f"tolerances.{name} must be positive")
    _check(inv.samples >= 1, f"invariants.samples must be >= 1, got {inv.samples}")
    _check(inv.t_max > 0 and inv.duhamel_t > 0, "invariants times must be positive")
    _check(inv.duhamel_stride >= 1, f"invariants.duhamel_stride must be >= 1, got {inv.duhamel_stride}")
    _check(isinstance(cfg.seed, int) and cfg.seed >= 0, f"seed must be a nonnegative integer, got {cfg.seed}")
