"""Plain-text run configuration: ``key = value`` lines with ``#`` comments."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import MODES
from .errors import ConfigError, DiscretizationError
from .grid import PROFILES, Grid, Potential, RadialProfile, make_grid, make_potential

INITIAL_PROFILES = ("gaussian", "cosine")
U64_MAX = 2**64 - 1


@dataclass
class SimulationConfig:
    dim: int = 1
    grid_points: int = 32
    box_length: float = 2 * math.pi
    N: float = 100.0
    beta: float = 0.0
    potential: str = "gaussian"
    potential_width: float = 0.75
    potential_amplitude: float = 1.0
    initial_profile: str = "gaussian"
    initial_width: float = 1.0
    initial_momentum: int = 0
    mode: str = "coupled"
    dt: float = 1e-3
    t_final: float = 1.0
    output_interval: float = 0.1
    oracle_sites: int = 4
    oracle_n_max: int = 0
    sweep_N: tuple[float, ...] = (2.0, 4.0, 8.0)
    sweep_beta: tuple[float, ...] = (0.0,)
    seed: int = 0
    output_dir: str = "pairex-out"


FIELDS = {f.name: f for f in dataclasses.fields(SimulationConfig)}


def _convert(key: str, raw: str, line: int | None):
    kind = FIELDS[key].type
    try:
        if kind == "int":
            if not raw.lstrip("+-").isdigit():
                raise ValueError
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "tuple[float, ...]":
            items = [p.strip() for p in raw.split(",")]
            if not items or any(not p for p in items):
                raise ValueError
            return tuple(float(p) for p in items)
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse '{raw}' as {kind}", key, line) from None


def validate(cfg: SimulationConfig, lines: dict[str, int] | None = None) -> SimulationConfig:
    lines = lines or {}

    def fail(key, msg):
        raise ConfigError(msg, key, lines.get(key))

    for key, f in FIELDS.items():
        value = getattr(cfg, key)
        if f.type == "float" and not math.isfinite(value):
            fail(key, "must be finite")
        if f.type == "tuple[float, ...]" and not all(math.isfinite(x) for x in value):
            fail(key, "entries must be finite")
    if cfg.dim not in (1, 2, 3):
        fail("dim", "must be 1, 2 or 3")
    if cfg.grid_points < 2 or cfg.grid_points % 2:
        fail("grid_points", "must be even and at least 2")
    if cfg.box_length <= 0:
        fail("box_length", "must be positive")
    if cfg.N < 1:
        fail("N", "must be at least 1")
    if not 0 <= cfg.beta <= 1:
        fail("beta", "must lie in [0, 1]")
    if cfg.potential not in PROFILES:
        fail("potential", f"must be one of {', '.join(PROFILES)}")
    if cfg.potential_width <= 0:
        fail("potential_width", "must be positive")
    if cfg.potential_amplitude < 0:
        fail("potential_amplitude", "must be nonnegative")
    if cfg.initial_profile not in INITIAL_PROFILES:
        fail("initial_profile", f"must be one of {', '.join(INITIAL_PROFILES)}")
    if cfg.initial_width <= 0:
        fail("initial_width", "must be positive")
    if abs(cfg.initial_momentum) >= cfg.grid_points // 2:
        fail("initial_momentum", "must be below the Nyquist mode")
    if cfg.mode not in MODES:
        fail("mode", f"must be one of {', '.join(MODES)}")
    if cfg.dt <= 0:
        fail("dt", "must be positive")
    if cfg.t_final < 0:
        fail("t_final", "must be nonnegative")
    steps = round(cfg.t_final / cfg.dt)
    if not math.isclose(steps * cfg.dt, cfg.t_final, rel_tol=1e-9, abs_tol=1e-12):
        fail("t_final", f"must be a whole number of steps dt = {cfg.dt!r}")
    if cfg.output_interval <= 0:
        fail("output_interval", "must be positive")
    if cfg.oracle_sites < 2 or cfg.oracle_sites % 2:
        fail("oracle_sites", "must be even and at least 2")
    if cfg.oracle_n_max < 0:
        fail("oracle_n_max", "must be nonnegative (0 selects the default rule)")
    if not cfg.sweep_N or any(n < 1 for n in cfg.sweep_N):
        fail("sweep_N", "entries must be at least 1")
    if not cfg.sweep_beta or any(not 0 <= b <= 1 for b in cfg.sweep_beta):
        fail("sweep_beta", "entries must lie in [0, 1]")
    if not 0 <= cfg.seed <= U64_MAX:
        fail("seed", "must be an unsigned 64-bit integer")
    if not cfg.output_dir or any(c in cfg.output_dir for c in "#\n"):
        fail("output_dir", "must be a nonempty path without '#'")
    for key in ("potential", "initial_profile", "mode"):
        if any(c in getattr(cfg, key) for c in "#\n"):
            fail(key, "must not contain '#'")
    return cfg


def parse_config(text: str) -> SimulationConfig:
    """Parse configuration text. Unknown or repeated keys are errors."""
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"expected 'key = value', got '{content}'", line=number)
        key, raw = (p.strip() for p in content.split("=", 1))
        if key not in FIELDS:
            raise ConfigError("unknown key", key, number)
        if key in values:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", key, number)
        if not raw:
            raise ConfigError("missing value", key, number)
        values[key] = _convert(key, raw, number)
        lines[key] = number
    return validate(SimulationConfig(**values), lines)


def load_config(path: str | Path) -> SimulationConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def _format(value) -> str:
    if isinstance(value, bool):
        raise TypeError("booleans are not config values")
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(x)) for x in value)
    return str(value)


def serialize_config(cfg: SimulationConfig) -> str:
    """Canonical text form: every key, in declaration order."""
    return "".join(f"{key} = {_format(getattr(cfg, key))}\n" for key in FIELDS)


def default_n_max(N: float) -> int:
    """Fock truncation rule ceil(N + 6 sqrt(N)) + 4."""
    return math.ceil(N + 6 * math.sqrt(N)) + 4


@dataclass
class Setup:
    grid: Grid
    potential: Potential
    phi0: np.ndarray
    zeta0: np.ndarray


def initial_phi(cfg: SimulationConfig, grid: Grid) -> np.ndarray:
    """Normalized initial condensate wave function."""
    x = grid.coordinates
    center = grid.box_length / 2
    if cfg.initial_profile == "gaussian":
        r2 = np.sum((x - center) ** 2, axis=-1)
        phi = np.exp(-0.5 * r2 / cfg.initial_width**2).astype(complex)
    else:
        # 1 + 0.8 cos(k0 x) + 0.3 sin(2 k0 x) along every axis
        k0 = 2 * np.pi / grid.box_length
        phi = np.prod(1 + 0.8 * np.cos(k0 * x) + 0.3 * np.sin(2 * k0 * x), axis=-1).astype(complex)
    if cfg.initial_momentum:
        phi = phi * np.exp(1j * cfg.initial_momentum * 2 * np.pi / grid.box_length * np.sum(x, axis=-1))
    return phi / math.sqrt(grid.cell_volume * np.vdot(phi, phi).real)


def build_setup(cfg: SimulationConfig, N: float | None = None, beta: float | None = None, points: int | None = None) -> Setup:
    """Grid, scaled potential and initial state (zeta = 0) for a configuration."""
    N = cfg.N if N is None else N
    beta = cfg.beta if beta is None else beta
    try:
        grid = make_grid(cfg.dim, points or cfg.grid_points, cfg.box_length)
        profile = RadialProfile(cfg.potential, cfg.potential_width, cfg.potential_amplitude)
        potential = make_potential(profile, N, beta, grid)
    except DiscretizationError as exc:
        raise ConfigError(str(exc)) from exc
    n = grid.total_points
    return Setup(grid, potential, initial_phi(cfg, grid), np.zeros((n, n), dtype=complex))
