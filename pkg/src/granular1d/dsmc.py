"""Stochastic particle solver for the scaled inelastic kinetic equation.

Free transport alternates with per-cell stochastic collisions whose
rate kernel is the relative speed divided by the Knudsen number.  Pair
candidates come from a majorant (no-time-counter style) scheme: each
cell draws

    N_cand = ceil( n(n-1)/2 * w_mean * V_max * dt / (eps * dx) )

uniform pairs and accepts pair (i, j) with probability
|v_i - v_j| / V_max, rescaled by the ceil ratio so the expected number
of collisions is unbiased.  V_max = 2 max|v| over the cell is a valid
majorant of every relative speed and can only shrink within a step.

Randomness comes from counter-based streams keyed by (root, step,
cell), so the result is independent of cell processing order and
thread scheduling: identical configurations replay bitwise.
"""

from __future__ import annotations

import math
import sys
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .collision import RestitutionModel, collide, restitution
from .core import (
    ConfigError,
    Grid,
    HydroField,
    ParticleEnsemble,
    SimConfig,
    deposit_fields,
    msum,
    substream,
)

__all__ = [
    "CollisionLog",
    "DsmcState",
    "DsmcTrajectory",
    "StepReport",
    "TimestepError",
    "collision_step",
    "run_dsmc",
    "transport_step",
    "weak_form_audit",
    "weak_form_rate_estimate",
]


class TimestepError(RuntimeError):
    """Majorant collision probability exceeded 1; reduce dt (or coarsen

    the rate by increasing epsilon / the cell width)."""


@dataclass(frozen=True)
class CollisionLog:
    """Per-event record of applied collisions (audit instrumentation)."""

    v: np.ndarray
    v_star: np.ndarray
    v_prime: np.ndarray
    v_star_prime: np.ndarray
    alpha: np.ndarray
    w: np.ndarray

    def __len__(self) -> int:
        return len(self.v)

    @staticmethod
    def empty() -> "CollisionLog":
        z = np.zeros(0)
        return CollisionLog(z, z, z, z, z, z)

    @staticmethod
    def concat(logs: Sequence["CollisionLog"]) -> "CollisionLog":
        if not logs:
            return CollisionLog.empty()
        return CollisionLog(
            v=np.concatenate([lg.v for lg in logs]),
            v_star=np.concatenate([lg.v_star for lg in logs]),
            v_prime=np.concatenate([lg.v_prime for lg in logs]),
            v_star_prime=np.concatenate([lg.v_star_prime for lg in logs]),
            alpha=np.concatenate([lg.alpha for lg in logs]),
            w=np.concatenate([lg.w for lg in logs]),
        )


@dataclass(frozen=True)
class StepReport:
    """Collision-step instrumentation.

    ``dissipated_energy`` tracks the drop of the second velocity moment
    sum w v^2: each event contributes w (1 - alpha^2)/2 (v - v*)^2.
    ``max_collision_probability`` is the per-pair majorant probability
    w_mean V_max dt / (eps dx), the quantity that must stay below 1.
    """

    n_candidates: int = 0
    n_collision_events: int = 0
    dissipated_energy: float = 0.0
    max_collision_probability: float = 0.0
    events: CollisionLog | None = None

    @staticmethod
    def combine(reports: Sequence["StepReport"]) -> "StepReport":
        logs = [r.events for r in reports if r.events is not None]
        return StepReport(
            n_candidates=sum(r.n_candidates for r in reports),
            n_collision_events=sum(r.n_collision_events for r in reports),
            dissipated_energy=float(sum(r.dissipated_energy for r in reports)),
            max_collision_probability=max(
                (r.max_collision_probability for r in reports), default=0.0
            ),
            events=CollisionLog.concat(logs) if logs else None,
        )


@dataclass(frozen=True)
class DsmcState:
    """Solver state: ensemble, collision grid, scaling and RNG root."""

    ensemble: ParticleEnsemble
    grid: Grid
    epsilon: float
    model: RestitutionModel
    rng_root: int
    boundary: str = "free"
    step_index: int = 0

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0")
        if self.boundary not in ("free", "periodic"):
            raise ConfigError(f"unknown boundary '{self.boundary}'")
        w = self.ensemble.w
        if len(w) and float(w.max()) != float(w.min()):
            raise ConfigError("DSMC requires equal particle weights")

    @classmethod
    def from_config(cls, config: SimConfig) -> "DsmcState":
        model = RestitutionModel(
            kind=config.alpha_model, alpha=config.alpha, gamma=config.gamma
        )
        return cls(
            ensemble=config.initial_ensemble(),
            grid=config.grid(),
            epsilon=config.epsilon,
            model=model,
            rng_root=config.seed,
            boundary=config.boundary,
        )


def transport_step(state: DsmcState, dt: float) -> DsmcState:
    """Free streaming x <- x + v dt, with periodic wrap or aligned grid
    growth under the free boundary."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    ens = state.ensemble
    x = ens.x + ens.v * dt
    grid = state.grid
    if state.boundary == "periodic":
        x = grid.x_min + np.mod(x - grid.x_min, grid.length)
    elif ens.n and not grid.covers(x):
        grid = grid.cover(float(x.min()), float(x.max()))
    moved = ens.with_phase(x, ens.v, ens.time + dt)
    return replace(state, ensemble=moved, grid=grid)


def _cell_members(idx: np.ndarray) -> list[tuple[int, np.ndarray]]:
    order = np.argsort(idx, kind="stable")
    sorted_idx = idx[order]
    boundaries = np.flatnonzero(np.diff(sorted_idx)) + 1
    return [(int(idx[grp[0]]), grp) for grp in np.split(order, boundaries) if len(grp)]


def collision_step(
    state: DsmcState, dt: float, record_events: bool = False
) -> tuple[DsmcState, StepReport]:
    """One stochastic collision sweep over all cells.

    Candidates and their acceptance draws come from the (step, cell)
    stream.  Accepted pairs are applied in draw order; pairs touching a
    particle already updated in this step are deferred to a later chunk
    so every collision uses current velocities and conserves momentum
    exactly.  Acceptance tests use the velocities current at the start
    of the pair's chunk.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    ens = state.ensemble
    report_fields = {
        "n_candidates": 0,
        "n_collision_events": 0,
        "dissipated_energy": 0.0,
        "max_collision_probability": 0.0,
    }
    if ens.n < 2:
        return state, StepReport(**report_fields)
    idx = state.grid.locate(ens.x, periodic=state.boundary == "periodic")
    v = np.array(ens.v)
    w = ens.w
    dx = state.grid.dx
    log_parts: list[CollisionLog] = []

    for cell_index, members in _cell_members(idx):
        n_c = len(members)
        if n_c < 2:
            continue
        v_cell = v[members]
        vmax = 2.0 * float(np.max(np.abs(v_cell)))
        if vmax == 0.0:
            continue
        w_mean = msum(w[members]) / n_c
        p_pair = w_mean * vmax * dt / (state.epsilon * dx)
        report_fields["max_collision_probability"] = max(
            report_fields["max_collision_probability"], p_pair
        )
        if p_pair > 1.0:
            raise TimestepError(
                "per-pair collision probability %.3g > 1 in cell %d at step %d; "
                "reduce dt below %.3g" % (p_pair, cell_index, state.step_index, dt / p_pair)
            )
        n_real = 0.5 * n_c * (n_c - 1) * p_pair
        n_cand = int(math.ceil(n_real - 1e-12))
        if n_cand <= 0:
            continue
        rng = substream(state.rng_root, state.step_index, cell_index)
        ii = rng.integers(0, n_c, n_cand)
        jj = rng.integers(0, n_c - 1, n_cand)
        jj = jj + (jj >= ii)
        draws = rng.random(n_cand)
        report_fields["n_candidates"] += n_cand
        threshold = vmax * n_cand / n_real  # accept when |dv| > draw * threshold

        i_list, j_list, u_list = ii.tolist(), jj.tolist(), draws.tolist()
        pos = 0
        while pos < n_cand:
            end = pos
            seen: set[int] = set()
            while end < n_cand:
                a, b = i_list[end], j_list[end]
                if a in seen or b in seen:
                    break
                seen.add(a)
                seen.add(b)
                end += 1
            blk_i = ii[pos:end]
            blk_j = jj[pos:end]
            dv = v_cell[blk_i] - v_cell[blk_j]
            rel = np.abs(dv)
            accept = rel > np.asarray(u_list[pos:end]) * threshold
            if np.any(accept):
                ai = blk_i[accept]
                aj = blk_j[accept]
                adv = dv[accept]
                alpha = np.asarray(restitution(state.model, np.abs(adv)))
                vi, vj = collide(v_cell[ai], v_cell[aj], alpha)
                pair_w = w[members[ai]]
                report_fields["n_collision_events"] += int(accept.sum())
                report_fields["dissipated_energy"] += msum(
                    pair_w * 0.5 * (1.0 - alpha**2) * adv**2
                )
                if record_events:
                    log_parts.append(
                        CollisionLog(
                            v=v_cell[ai].copy(),
                            v_star=v_cell[aj].copy(),
                            v_prime=np.asarray(vi, dtype=np.float64).copy(),
                            v_star_prime=np.asarray(vj, dtype=np.float64).copy(),
                            alpha=alpha.astype(np.float64).copy(),
                            w=pair_w.copy(),
                        )
                    )
                v_cell[ai] = vi
                v_cell[aj] = vj
            pos = end
        v[members] = v_cell

    new_ens = ParticleEnsemble(x=ens.x, v=v, w=ens.w, time=ens.time)
    new_state = replace(state, ensemble=new_ens, step_index=state.step_index + 1)
    events = CollisionLog.concat(log_parts) if record_events else None
    return new_state, StepReport(events=events, **report_fields)


# ---------------------------------------------------------------------------
# weak-form audit

_PSI_TAGS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "1": lambda v: np.ones_like(v),
    "v": lambda v: v,
    "v2": lambda v: v * v,
    "abs_v3": lambda v: np.abs(v) ** 3,
    "v4": lambda v: v**4,
}


def _resolve_psi(psi) -> Callable[[np.ndarray], np.ndarray]:
    if callable(psi):
        return psi
    try:
        return _PSI_TAGS[psi]
    except KeyError:
        raise ValueError(f"unknown test-function tag '{psi}'") from None


def weak_form_audit(log: CollisionLog, psi) -> float:
    """Mass-weighted test-function increment accumulated over events.

    Returns sum_events w [psi(v') + psi(v*') - psi(v) - psi(v*)]; this
    is 0 for psi = 1 identically and for psi = v up to rounding, and
    equals minus the dissipated second moment for psi = v^2.
    """
    if len(log) == 0:
        return 0.0
    f = _resolve_psi(psi)
    return msum(
        log.w * (f(log.v_prime) + f(log.v_star_prime) - f(log.v) - f(log.v_star))
    )


def weak_form_rate_estimate(
    state: DsmcState, psi, n_samples: int = 20000, sample_seed: int = 0
) -> tuple[float, float]:
    """Monte Carlo estimate of the expected audit accumulation rate.

    Independent uniform pair sampling per cell estimates
    (1/(2 eps dx)) sum_{i != j} w_i w_j |v_i - v_j| defect_psi(i, j),
    the collision-kernel average of the test-function defect.  Returns
    (rate, standard error); multiply by dt for one step's expectation.
    """
    f = _resolve_psi(psi)
    ens = state.ensemble
    idx = state.grid.locate(ens.x, periodic=state.boundary == "periodic")
    total = 0.0
    var = 0.0
    for cell_index, members in _cell_members(idx):
        n_c = len(members)
        if n_c < 2:
            continue
        rng = substream(state.rng_root, 0x5A17, cell_index, sample_seed)
        ii = rng.integers(0, n_c, n_samples)
        jj = rng.integers(0, n_c - 1, n_samples)
        jj = jj + (jj >= ii)
        vi = ens.v[members[ii]]
        vj = ens.v[members[jj]]
        alpha = np.asarray(restitution(state.model, np.abs(vi - vj)))
        vpi, vpj = collide(vi, vj, alpha)
        defect = f(vpi) + f(vpj) - f(vi) - f(vj)
        sample = ens.w[members[ii]] * ens.w[members[jj]] * np.abs(vi - vj) * defect
        scale = n_c * (n_c - 1) / (2.0 * state.epsilon * state.grid.dx)
        total += scale * float(sample.mean())
        var += (scale * float(sample.std(ddof=1)) / math.sqrt(n_samples)) ** 2
    return total, math.sqrt(var)


# ---------------------------------------------------------------------------
# time integration


@dataclass(frozen=True)
class DsmcTrajectory:
    """Snapshots of a DSMC run plus per-interval collision reports."""

    times: tuple[float, ...]
    ensembles: tuple[ParticleEnsemble, ...]
    fields: tuple[HydroField, ...]
    reports: tuple[StepReport, ...]
    total_report: StepReport
    final_state: DsmcState

    def series(self, quantity: str) -> np.ndarray:
        if quantity == "mass":
            return np.array([e.total_mass for e in self.ensembles])
        if quantity == "momentum":
            return np.array([e.momentum for e in self.ensembles])
        if quantity == "energy":
            return np.array([e.energy for e in self.ensembles])
        if quantity == "theta_integral":
            return np.array([f.theta_integral for f in self.fields])
        raise ValueError(f"unknown series '{quantity}'")


def run_dsmc(
    config: SimConfig,
    n_snapshots: int = 21,
    record_events: bool = False,
    progress: bool = False,
) -> DsmcTrajectory:
    """First-order splitting (transport, then collisions) up to t_end.

    t_end is rounded to a whole number of steps.  Snapshots (ensemble
    plus deposited fields) are stored at about ``n_snapshots`` evenly
    spaced times including start and end.  Deterministic for a fixed
    (config, seed) regardless of scheduling.
    """
    state = DsmcState.from_config(config)
    n_steps = max(1, int(round(config.t_end / config.dt))) if config.t_end > 0 else 0
    snap_every = max(1, n_steps // max(1, n_snapshots - 1)) if n_steps else 1
    if state.ensemble.n:
        v_scale = float(np.max(np.abs(state.ensemble.v)))
        if v_scale * config.dt >= state.grid.dx:
            warnings.warn(
                "dt * max|v| = %.3g exceeds the cell width %.3g; transport"
                " outruns the collision cells" % (v_scale * config.dt, state.grid.dx),
                RuntimeWarning,
                stacklevel=2,
            )

    times = [state.ensemble.time]
    ensembles = [state.ensemble]
    fields = [deposit_fields(state.ensemble, state.grid, boundary=state.boundary)]
    reports: list[StepReport] = []
    pending: list[StepReport] = []
    for step in range(n_steps):
        state = transport_step(state, config.dt)
        state, report = collision_step(state, config.dt, record_events=record_events)
        pending.append(report)
        if (step + 1) % snap_every == 0 or step + 1 == n_steps:
            times.append(state.ensemble.time)
            ensembles.append(state.ensemble)
            fields.append(deposit_fields(state.ensemble, state.grid, boundary=state.boundary))
            reports.append(StepReport.combine(pending))
            pending = []
            if progress:
                print(
                    "step %d/%d t=%.6g events=%d"
                    % (step + 1, n_steps, state.ensemble.time, reports[-1].n_collision_events),
                    file=sys.stderr,
                )
    total = StepReport.combine(reports) if reports else StepReport()
    return DsmcTrajectory(
        times=tuple(times),
        ensembles=tuple(ensembles),
        fields=tuple(fields),
        reports=tuple(reports),
        total_report=total,
        final_state=state,
    )
