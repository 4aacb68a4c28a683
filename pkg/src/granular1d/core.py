"""Shared value types for the 1D particle solvers.

Weighted particle ensembles play the role of empirical phase-space
measures; hydrodynamic fields hold their first velocity moments on a
uniform cell grid.  Everything here is an immutable snapshot: solver
steps return new values instead of mutating old ones, which keeps the
types safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "ConfigError",
    "FunctionalParams",
    "Grid",
    "HydroField",
    "InitSpec",
    "ParticleEnsemble",
    "SimConfig",
    "deposit_fields",
    "load_config",
    "load_raw_config",
    "msum",
    "parse_config_text",
    "read_fields_csv",
    "sample_initial",
    "substream",
    "write_fields_csv",
]

_MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Raised for malformed configuration input (bad key, value or file)."""


def msum(values) -> float:
    """Sum with a fixed-order pairwise (tree) reduction.

    ``np.sum`` over a contiguous float64 buffer reduces pairwise in a
    fixed blocking order, so the result depends only on the element
    order, never on scheduling or thread count.  All mass and moment
    bookkeeping goes through here.
    """
    return float(np.sum(np.ascontiguousarray(values, dtype=np.float64)))


def _mix64(h: int, value: int) -> int:
    # splitmix64 finalizer; cheap way to fold path components into a key
    h = (h + 0x9E3779B97F4A7C15 + (value & _MASK64)) & _MASK64
    z = h
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def substream(root: int, *path: int) -> np.random.Generator:
    """Counter-based RNG stream keyed by ``root`` and a fixed id path.

    Streams for distinct paths are statistically independent, so work
    units (one per simulation step and cell, say) can be processed in
    any order, or in parallel, and still draw identical numbers.
    """
    h = root & _MASK64
    for value in path:
        h = _mix64(h, value)
    key = np.array([root & _MASK64, h], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class Grid:
    """Uniform cell grid on the line: left edge, cell width, cell count."""

    x_min: float
    dx: float
    n_cells: int

    def __post_init__(self) -> None:
        if not (self.dx > 0 and math.isfinite(self.dx)):
            raise ValueError("dx must be positive and finite")
        if self.n_cells < 1:
            raise ValueError("n_cells must be >= 1")

    @classmethod
    def from_domain(cls, x_min: float, x_max: float, n_cells: int) -> "Grid":
        if not x_max > x_min:
            raise ValueError("domain requires x_max > x_min")
        return cls(x_min=float(x_min), dx=(float(x_max) - float(x_min)) / n_cells, n_cells=int(n_cells))

    @property
    def x_max(self) -> float:
        return self.x_min + self.dx * self.n_cells

    @property
    def length(self) -> float:
        return self.dx * self.n_cells

    @property
    def edges(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_cells + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + self.dx * (np.arange(self.n_cells) + 0.5)

    def covers(self, x: np.ndarray) -> bool:
        if len(x) == 0:
            return True
        return bool(x.min() >= self.x_min and x.max() <= self.x_max)

    def cover(self, lo: float, hi: float) -> "Grid":
        """Expanded grid whose cells stay aligned with this one."""
        k_lo = 0
        if lo < self.x_min:
            k_lo = int(math.ceil((self.x_min - lo) / self.dx))
            while self.x_min - k_lo * self.dx > lo:  # guard fp rounding
                k_lo += 1
        k_hi = 0
        if hi > self.x_max:
            k_hi = int(math.ceil((hi - self.x_max) / self.dx))
            while self.x_max + k_hi * self.dx < hi:
                k_hi += 1
        if k_lo == 0 and k_hi == 0:
            return self
        return Grid(self.x_min - k_lo * self.dx, self.dx, self.n_cells + k_lo + k_hi)

    def locate(self, x: np.ndarray, periodic: bool = False) -> np.ndarray:
        """Cell index per position; the right edge folds into the last cell."""
        x = np.asarray(x, dtype=np.float64)
        if periodic:
            y = np.mod(x - self.x_min, self.length)
        else:
            if not self.covers(x):
                raise ValueError("positions outside grid; expand with Grid.cover first")
            y = x - self.x_min
        idx = np.floor(y / self.dx).astype(np.int64)
        return np.clip(idx, 0, self.n_cells - 1)


# ---------------------------------------------------------------------------
# particle ensemble and hydrodynamic field


@dataclass(frozen=True)
class ParticleEnsemble:
    """Weighted particles (x_i, v_i, w_i) at a common time.

    The weights are masses, so the ensemble is the empirical measure
    sum_i w_i delta(x - x_i) delta(v - v_i).  Arrays are read-only.
    """

    x: np.ndarray
    v: np.ndarray
    w: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _frozen_array(self.x, "x"))
        object.__setattr__(self, "v", _frozen_array(self.v, "v"))
        object.__setattr__(self, "w", _frozen_array(self.w, "w"))
        if not (len(self.x) == len(self.v) == len(self.w)):
            raise ValueError("x, v, w must have equal length")
        if len(self.w) and not np.all(self.w > 0):
            raise ValueError("weights must be strictly positive")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def total_mass(self) -> float:
        return msum(self.w)

    @property
    def momentum(self) -> float:
        return msum(self.w * self.v)

    @property
    def energy(self) -> float:
        """Second velocity moment sum_i w_i v_i^2 (no 1/2 convention)."""
        return msum(self.w * self.v * self.v)

    @property
    def mean_velocity(self) -> float:
        m = self.total_mass
        return self.momentum / m if m > 0 else 0.0

    def with_phase(self, x: np.ndarray, v: np.ndarray, time: float) -> "ParticleEnsemble":
        return ParticleEnsemble(x=x, v=v, w=self.w, time=time)


@dataclass(frozen=True)
class HydroField:
    """Cell densities of mass, bulk velocity and granular temperature.

    rho and theta are per-unit-length densities, so cell sums times dx
    recover the ensemble totals.  Empty cells carry (0, 0, 0).
    """

    grid: Grid
    rho: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "rho", _frozen_array(self.rho, "rho"))
        object.__setattr__(self, "u", _frozen_array(self.u, "u"))
        object.__setattr__(self, "theta", _frozen_array(self.theta, "theta"))
        n = self.grid.n_cells
        if not (len(self.rho) == len(self.u) == len(self.theta) == n):
            raise ValueError("field arrays must match grid.n_cells")
        if np.any(self.rho < 0):
            raise ValueError("rho must be non-negative")
        if np.any(self.theta < 0):
            raise ValueError("theta must be non-negative")

    @property
    def mass(self) -> float:
        return msum(self.rho) * self.grid.dx

    @property
    def momentum(self) -> float:
        return msum(self.rho * self.u) * self.grid.dx

    @property
    def theta_integral(self) -> float:
        return msum(self.theta) * self.grid.dx


def deposit_fields(ensemble: ParticleEnsemble, grid: Grid, boundary: str = "free") -> HydroField:
    """First velocity moments of the ensemble on the cell grid.

    Per cell c: rho_c = sum w_i / dx, u_c the mass-weighted mean
    velocity (0 when empty) and theta_c = sum w_i (v_i - u_c)^2 / dx.
    With the free boundary the grid expands (aligned) to cover all
    particles, so no mass is ever dropped.
    """
    if boundary not in ("free", "periodic"):
        raise ConfigError(f"unknown boundary '{boundary}'")
    periodic = boundary == "periodic"
    if not periodic and ensemble.n and not grid.covers(ensemble.x):
        grid = grid.cover(float(ensemble.x.min()), float(ensemble.x.max()))
    n = grid.n_cells
    if ensemble.n == 0:
        z = np.zeros(n)
        return HydroField(grid=grid, rho=z, u=z, theta=z, time=ensemble.time)
    idx = grid.locate(ensemble.x, periodic=periodic)
    cell_mass = np.bincount(idx, weights=ensemble.w, minlength=n)
    cell_mom = np.bincount(idx, weights=ensemble.w * ensemble.v, minlength=n)
    u = np.zeros(n)
    np.divide(cell_mom, cell_mass, out=u, where=cell_mass > 0)
    # single-velocity cells take that value exactly, so theta is exactly 0
    vmin = np.full(n, np.inf)
    vmax = np.full(n, -np.inf)
    np.minimum.at(vmin, idx, ensemble.v)
    np.maximum.at(vmax, idx, ensemble.v)
    uniform = (cell_mass > 0) & (vmin == vmax)
    u[uniform] = vmin[uniform]
    dev = ensemble.v - u[idx]
    cell_theta = np.bincount(idx, weights=ensemble.w * dev * dev, minlength=n)
    return HydroField(
        grid=grid,
        rho=cell_mass / grid.dx,
        u=u,
        theta=cell_theta / grid.dx,
        time=ensemble.time,
    )


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class FunctionalParams:
    """Parameters of the pair functionals: kernel offset eta, mollifier
    width mu, moment order k and trace shell width delta."""

    eta: float = 0.1
    mu: float = 0.01
    k: int = 2
    delta: float = 0.01
    k_list: tuple[int, ...] = (1, 2, 3)

    def __post_init__(self) -> None:
        if not (self.eta > 0 and self.mu > 0 and self.delta > 0):
            raise ConfigError("eta, mu, delta must be strictly positive")
        if self.k < 0:
            raise ConfigError("k must be >= 0")
        if any(k < 0 for k in self.k_list):
            raise ConfigError("k_list entries must be >= 0")


_INIT_KINDS = (
    "two_state_riemann",
    "double_peak",
    "homogeneous_maxwellianlike",
    "well_prepared_monokinetic",
)


@dataclass(frozen=True)
class InitSpec:
    """Initial data preset.

    All presets draw positions uniformly on the configured domain, so
    the initial density is bounded by construction.  Velocities are
    bounded or Gaussian, so every velocity moment exists.

    kind-specific parameters:
      two_state_riemann          u_left / u_right across `split`
                                 (domain midpoint when split is None)
      double_peak                velocities v1 or v2 with equal chance
      homogeneous_maxwellianlike Gaussian velocities u0 + sigma_v * N(0,1)
      well_prepared_monokinetic  u(x) = u0 + u_slope * (x - domain centre)
    sigma_v adds Gaussian jitter for the first two kinds as well.
    """

    kind: str = "double_peak"
    u_left: float = 1.0
    u_right: float = -1.0
    split: float | None = None
    v1: float = -1.0
    v2: float = 1.0
    u0: float = 0.0
    u_slope: float = 0.0
    sigma_v: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _INIT_KINDS:
            raise ConfigError(f"unknown init kind '{self.kind}'")
        if self.sigma_v < 0:
            raise ConfigError("sigma_v must be >= 0")


def sample_initial(
    spec: InitSpec, n: int, seed: int, domain: tuple[float, float] = (0.0, 1.0)
) -> ParticleEnsemble:
    """Draw n particles of equal weight 1/n from the preset.

    Bitwise deterministic for a fixed (spec, n, seed): the draws come
    from a counter-based stream keyed by the seed alone.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    x_min, x_max = float(domain[0]), float(domain[1])
    if not x_max > x_min:
        raise ConfigError("domain requires x_max > x_min")
    rng = substream(seed, 0x1817)
    x = x_min + (x_max - x_min) * rng.random(n)
    if spec.kind == "two_state_riemann":
        split = 0.5 * (x_min + x_max) if spec.split is None else spec.split
        v = np.where(x < split, spec.u_left, spec.u_right)
    elif spec.kind == "double_peak":
        pick = rng.random(n) < 0.5
        v = np.where(pick, spec.v1, spec.v2).astype(np.float64)
    elif spec.kind == "homogeneous_maxwellianlike":
        v = np.full(n, spec.u0)
    else:  # well_prepared_monokinetic
        mid = 0.5 * (x_min + x_max)
        v = spec.u0 + spec.u_slope * (x - mid)
    if spec.sigma_v > 0 or spec.kind == "homogeneous_maxwellianlike":
        v = v + spec.sigma_v * rng.standard_normal(n)
    w = np.full(n, 1.0 / n)
    return ParticleEnsemble(x=x, v=v, w=w, time=0.0)


@dataclass(frozen=True)
class SimConfig:
    """Full experiment description for a single solver run."""

    epsilon: float = 1.0
    alpha_model: str = "constant"
    alpha: float = 0.9
    gamma: float = 0.5
    n_particles: int = 1000
    n_cells: int = 50
    domain: tuple[float, float] = (0.0, 1.0)
    boundary: str = "free"
    t_end: float = 1.0
    dt: float = 0.01
    seed: int = 12345
    functional: FunctionalParams = FunctionalParams()
    init: InitSpec = InitSpec()
    output_dir: str = "out"

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0")
        if self.alpha_model not in ("constant", "velocity_dependent"):
            raise ConfigError(f"unknown alpha_model '{self.alpha_model}'")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (0, 1)")
        if self.n_particles < 1:
            raise ConfigError("n_particles must be >= 1")
        if self.n_cells < 1:
            raise ConfigError("n_cells must be >= 1")
        if not self.domain[1] > self.domain[0]:
            raise ConfigError("domain requires x_max > x_min")
        if self.boundary not in ("free", "periodic"):
            raise ConfigError(f"unknown boundary '{self.boundary}'")
        if self.t_end < 0:
            raise ConfigError("t_end must be >= 0")
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")

    def grid(self) -> Grid:
        return Grid.from_domain(self.domain[0], self.domain[1], self.n_cells)

    def initial_ensemble(self) -> ParticleEnsemble:
        return sample_initial(self.init, self.n_particles, self.seed, self.domain)


# ---------------------------------------------------------------------------
# flat key=value configuration files


def parse_config_text(text: str) -> dict[str, str]:
    """Parse `key = value` lines; '#' starts a comment."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got '{line.strip()}'")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        raw[key] = value.strip()
    return raw


def _parse_bool(value: str, key: str) -> bool:
    low = value.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got '{value}'")


def _coerce(key: str, value: str, kind: str):
    try:
        if kind == "float":
            return float(value)
        if kind == "int":
            return int(value)
        if kind == "str":
            return value
        if kind == "bool":
            return _parse_bool(value, key)
        if kind == "int_list":
            return tuple(int(part) for part in value.split(",") if part.strip())
        if kind == "float_list":
            return tuple(float(part) for part in value.split(",") if part.strip())
    except ValueError as err:
        raise ConfigError(f"{key}: {err}") from None
    raise AssertionError(kind)


_TOP_KEYS = {
    "epsilon": "float",
    "alpha_model": "str",
    "alpha": "float",
    "gamma": "float",
    "n_particles": "int",
    "n_cells": "int",
    "boundary": "str",
    "t_end": "float",
    "dt": "float",
    "seed": "int",
    "output_dir": "str",
}
_DOMAIN_KEYS = {"x_min": "float", "x_max": "float"}
_FUNCTIONAL_KEYS = {"eta": "float", "mu": "float", "k": "int", "delta": "float", "k_list": "int_list"}
_INIT_KEYS = {
    "kind": "str",
    "u_left": "float",
    "u_right": "float",
    "split": "float",
    "v1": "float",
    "v2": "float",
    "u0": "float",
    "u_slope": "float",
    "sigma_v": "float",
}
_SWEEP_KEYS = {"epsilons": "float_list", "seeds": "int_list", "compare_to_sticky": "bool", "manifest": "str"}


def build_config(raw: dict[str, str]) -> SimConfig:
    """Assemble a SimConfig from flat key=value pairs.

    Keys under the 'sweep.' prefix are tolerated here and picked up by
    the sweep harness; any other unknown key is an error.
    """
    top: dict = {}
    domain = {"x_min": 0.0, "x_max": 1.0}
    functional: dict = {}
    init: dict = {}
    for key, value in raw.items():
        if key.startswith("sweep."):
            sub = key.split(".", 1)[1]
            if sub not in _SWEEP_KEYS:
                raise ConfigError(f"unknown config key '{key}'")
            continue
        if key in _TOP_KEYS:
            top[key] = _coerce(key, value, _TOP_KEYS[key])
        elif key.startswith("domain."):
            sub = key.split(".", 1)[1]
            if sub not in _DOMAIN_KEYS:
                raise ConfigError(f"unknown config key '{key}'")
            domain[sub] = _coerce(key, value, _DOMAIN_KEYS[sub])
        elif key.startswith("functional."):
            sub = key.split(".", 1)[1]
            if sub not in _FUNCTIONAL_KEYS:
                raise ConfigError(f"unknown config key '{key}'")
            functional[sub] = _coerce(key, value, _FUNCTIONAL_KEYS[sub])
        elif key.startswith("init."):
            sub = key.split(".", 1)[1]
            if sub not in _INIT_KEYS:
                raise ConfigError(f"unknown config key '{key}'")
            init[sub] = _coerce(key, value, _INIT_KEYS[sub])
        else:
            raise ConfigError(f"unknown config key '{key}'")
    return SimConfig(
        domain=(domain["x_min"], domain["x_max"]),
        functional=FunctionalParams(**functional),
        init=InitSpec(**init),
        **top,
    )


def load_raw_config(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"))


def load_config(path: str | Path) -> SimConfig:
    return build_config(load_raw_config(path))


def config_to_dict(config: SimConfig) -> dict:
    """Flat, JSON-friendly echo of a SimConfig (manifest plumbing)."""
    out: dict = {}
    for f in dc_fields(config):
        value = getattr(config, f.name)
        if f.name == "domain":
            out["domain.x_min"], out["domain.x_max"] = value
        elif f.name == "functional":
            for sub in dc_fields(value):
                item = getattr(value, sub.name)
                out[f"functional.{sub.name}"] = list(item) if isinstance(item, tuple) else item
        elif f.name == "init":
            for sub in dc_fields(value):
                out[f"init.{sub.name}"] = getattr(value, sub.name)
        else:
            out[f.name] = value
    return out


# ---------------------------------------------------------------------------
# field CSV persistence

_FIELDS_HEADER = "t,x_center,rho,u,theta"


def write_fields_csv(path: str | Path, fields: Sequence[HydroField]) -> None:
    """Time series of fields, one row per cell per snapshot, %.12e."""
    lines = [_FIELDS_HEADER]
    for field in fields:
        centers = field.grid.centers
        for c in range(field.grid.n_cells):
            lines.append(
                "%.12e,%.12e,%.12e,%.12e,%.12e"
                % (field.time, centers[c], field.rho[c], field.u[c], field.theta[c])
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_fields_csv(path: str | Path) -> list[dict]:
    """Inverse of write_fields_csv: a list of per-snapshot dicts."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"fields file not found: {path}")
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    if not lines or lines[0] != _FIELDS_HEADER:
        raise ConfigError(f"bad fields CSV header in {path}")
    data = np.array(
        [[float(cell) for cell in line.split(",")] for line in lines[1:]], dtype=np.float64
    ).reshape(-1, 5)
    snapshots = []
    for t in np.unique(data[:, 0]):
        block = data[data[:, 0] == t]
        snapshots.append(
            {
                "t": float(t),
                "x_center": block[:, 1].copy(),
                "rho": block[:, 2].copy(),
                "u": block[:, 3].copy(),
                "theta": block[:, 4].copy(),
            }
        )
    return snapshots
