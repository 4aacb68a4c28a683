"""Exact event-driven solver for sticky-particle dynamics.

Clusters move ballistically between collisions; when adjacent clusters
meet they merge into one cluster carrying the total mass and the
momentum-conserving mean velocity.  The dynamics is piecewise linear,
so events are solved exactly and snapshots at arbitrary times follow by
free flight.  This is the discrete reference solution of pressureless
gas dynamics used by the comparison harness.
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ParticleEnsemble, _frozen_array, msum

__all__ = [
    "ClusterState",
    "CollisionEvent",
    "ConsistencyError",
    "StickyTrajectory",
    "merge",
    "next_event",
    "run_sticky",
    "to_ensemble",
    "write_clusters_csv",
]

#: events closer than this are treated as one simultaneous pile-up
TIME_ATOL = 1e-12
#: collision-point coincidence tolerance, scaled by the data extent
POSITION_RTOL = 1e-9


class ConsistencyError(RuntimeError):
    """Internal state failed an exactness check (positions should

    coincide at a collision instant up to rounding)."""


@dataclass(frozen=True)
class ClusterState:
    """Ordered sticky clusters with masses.

    Positions are strictly increasing between collisions; they may tie
    exactly at a collision instant (the pre-merge side of an event
    snapshot), so ordering is validated up to rounding and microscopic
    inversions from advecting both partners to the meeting time are
    snapped to exact ties.
    """

    x: np.ndarray
    v: np.ndarray
    m: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        xa = np.array(self.x, dtype=np.float64, copy=True).reshape(-1)
        if len(xa) > 1:
            diffs = np.diff(xa)
            tol = 1e-12 * max(1.0, float(np.max(np.abs(xa))))
            if np.any(diffs < -tol):
                raise ValueError("cluster positions must be non-decreasing")
            if np.any(diffs < 0):
                xa = np.maximum.accumulate(xa)
        object.__setattr__(self, "x", _frozen_array(xa, "x"))
        object.__setattr__(self, "v", _frozen_array(self.v, "v"))
        object.__setattr__(self, "m", _frozen_array(self.m, "m"))
        if not (len(self.x) == len(self.v) == len(self.m)):
            raise ValueError("x, v, m must have equal length")
        if len(self.m) and not np.all(self.m > 0):
            raise ValueError("cluster masses must be positive")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def total_mass(self) -> float:
        return msum(self.m)

    @property
    def momentum(self) -> float:
        return msum(self.m * self.v)

    @property
    def energy(self) -> float:
        """Second velocity moment sum m_i v_i^2 (no 1/2 convention)."""
        return msum(self.m * self.v * self.v)

    def advected(self, t: float) -> "ClusterState":
        """Free flight to time t; exact while no event lies in between."""
        if t == self.time:
            return self
        return ClusterState(x=self.x + self.v * (t - self.time), v=self.v, m=self.m, time=t)

    def position_tolerance(self) -> float:
        extent = float(self.x.max() - self.x.min()) if self.n > 1 else 0.0
        return POSITION_RTOL * max(1.0, extent)


@dataclass(frozen=True)
class CollisionEvent:
    """Adjacent-pair collision at t_event (right_index = left_index + 1)."""

    t_event: float
    left_index: int
    right_index: int

    def __post_init__(self) -> None:
        if self.right_index != self.left_index + 1:
            raise ValueError("event must involve adjacent clusters")


def next_event(state: ClusterState) -> CollisionEvent | None:
    """Earliest adjacent-pair collision, or None if every gap opens.

    A pair (i, i+1) with v_i > v_{i+1} closes its gap at rate
    v_i - v_{i+1} and meets at time + gap / rate.
    """
    if state.n < 2:
        return None
    closing = state.v[:-1] - state.v[1:]
    gaps = state.x[1:] - state.x[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hit = np.where(closing > 0, state.time + gaps / closing, np.inf)
    i = int(np.argmin(t_hit))
    if not math.isfinite(t_hit[i]):
        return None
    return CollisionEvent(t_event=float(t_hit[i]), left_index=i, right_index=i + 1)


def _merge_group(x: np.ndarray, v: np.ndarray, m: np.ndarray) -> tuple[float, float, float]:
    mass = msum(m)
    return float(msum(m * x) / mass), float(msum(m * v) / mass), float(mass)


def merge(state: ClusterState, event: CollisionEvent) -> ClusterState:
    """Advect to the event time and collapse the colliding group.

    All clusters whose advected positions coincide with the collision
    point (within the position tolerance) merge as one pile-up; the new
    cluster carries the total mass and the mass-weighted mean velocity.
    """
    moved = state.advected(event.t_event)
    tol = state.position_tolerance()
    l, r = event.left_index, event.right_index
    point = moved.x[l]
    if abs(moved.x[r] - point) > tol:
        raise ConsistencyError(
            "collision positions mismatch at t=%.17g: |%.17g - %.17g| > %.3g"
            % (event.t_event, moved.x[l], moved.x[r], tol)
        )
    lo = l
    while lo > 0 and abs(moved.x[lo - 1] - point) <= tol:
        lo -= 1
    hi = r
    while hi + 1 < moved.n and abs(moved.x[hi + 1] - point) <= tol:
        hi += 1
    gx, gv, gm = _merge_group(moved.x[lo : hi + 1], moved.v[lo : hi + 1], moved.m[lo : hi + 1])
    new_x = np.concatenate([moved.x[:lo], [gx], moved.x[hi + 1 :]])
    new_v = np.concatenate([moved.v[:lo], [gv], moved.v[hi + 1 :]])
    new_m = np.concatenate([moved.m[:lo], [gm], moved.m[hi + 1 :]])
    return ClusterState(x=new_x, v=new_v, m=new_m, time=event.t_event)


def to_ensemble(state: ClusterState) -> ParticleEnsemble:
    """One weighted particle per cluster (weight = mass)."""
    return ParticleEnsemble(x=state.x, v=state.v, w=state.m, time=state.time)


@dataclass(frozen=True)
class StickyTrajectory:
    """Snapshots at events (both sides) and requested output times."""

    times: tuple[float, ...]
    states: tuple[ClusterState, ...]
    kinds: tuple[str, ...]
    event_times: tuple[float, ...]
    end_time: float
    quiescent: bool

    @property
    def initial(self) -> ClusterState:
        return self.states[0]

    @property
    def final(self) -> ClusterState:
        return self.states[-1]

    def state_at(self, t: float, side: str = "+") -> ClusterState:
        """State at time t; side '-' gives the left limit at event times."""
        times = self.times
        if t < times[0]:
            raise ValueError(f"t={t} precedes the trajectory start {times[0]}")
        if t > self.end_time and not self.quiescent:
            raise ValueError(f"t={t} beyond trajectory end {self.end_time}")
        if side == "+":
            idx = bisect_right(times, t) - 1
        elif side == "-":
            idx = bisect_left(times, t) - 1
            if idx < 0:
                idx = 0
        else:
            raise ValueError("side must be '+' or '-'")
        return self.states[idx].advected(t)

    def snapshots(self) -> list[tuple[float, ClusterState, str]]:
        return list(zip(self.times, self.states, self.kinds))


def run_sticky(
    initial: ClusterState,
    t_end: float | None = None,
    output_times: Sequence[float] = (),
) -> StickyTrajectory:
    """Event loop from initial.time to t_end (None: run to quiescence).

    The event queue holds one tentative collision per adjacent pair and
    is updated locally after each merge, since a merge only changes the
    two gaps next to it.  Entries referring to replaced clusters are
    discarded lazily on pop.  Each merge removes at least one cluster,
    so at most n - 1 events occur.  Snapshots record the state on both
    sides of every merge instant plus every requested output time.
    """
    if t_end is not None and t_end < initial.time:
        raise ValueError("t_end must not precede the initial time")
    outputs = sorted(float(t) for t in output_times)
    if outputs and outputs[0] < initial.time:
        raise ValueError("output times must not precede the initial time")
    if outputs and t_end is not None and outputs[-1] > t_end:
        raise ValueError("output times must not exceed t_end")

    # linked cluster records: free-flight line pos(t) = a + v t
    a: dict[int, float] = {}
    vel: dict[int, float] = {}
    mass: dict[int, float] = {}
    nxt: dict[int, int | None] = {}
    prv: dict[int, int | None] = {}
    for i in range(initial.n):
        a[i] = float(initial.x[i] - initial.v[i] * initial.time)
        vel[i] = float(initial.v[i])
        mass[i] = float(initial.m[i])
        prv[i] = i - 1 if i > 0 else None
        nxt[i] = i + 1 if i + 1 < initial.n else None
    next_id = initial.n
    head: int | None = 0 if initial.n else None
    tol = initial.position_tolerance()

    heap: list[tuple[float, int, int, int]] = []
    counter = 0

    def pair_time(left: int, right: int) -> float | None:
        dv = vel[left] - vel[right]
        if dv <= 0:
            return None
        return (a[right] - a[left]) / dv

    def push(left: int | None, right: int | None, now: float) -> None:
        nonlocal counter
        if left is None or right is None:
            return
        t = pair_time(left, right)
        if t is None:
            return
        heapq.heappush(heap, (max(t, now), counter, left, right))
        counter += 1

    for i in range(initial.n - 1):
        push(i, i + 1, initial.time)

    def snapshot(t: float) -> ClusterState:
        ids = []
        node = head
        while node is not None:
            ids.append(node)
            node = nxt[node]
        xs = np.array([a[i] + vel[i] * t for i in ids])
        vs = np.array([vel[i] for i in ids])
        ms = np.array([mass[i] for i in ids])
        return ClusterState(x=xs, v=vs, m=ms, time=t)

    times: list[float] = [initial.time]
    states: list[ClusterState] = [initial]
    kinds: list[str] = ["init"]
    event_times: list[float] = []
    out_i = 0
    now = initial.time

    def pop_valid(bound: float) -> tuple[float, int, int] | None:
        while heap:
            t, _, left, right = heap[0]
            if t > bound:
                return None
            heapq.heappop(heap)
            if left in nxt and right in nxt and nxt[left] == right:
                return t, left, right
        return None

    horizon = math.inf if t_end is None else t_end
    while True:
        entry = pop_valid(horizon)
        if entry is None:
            break
        t_star, first_l, first_r = entry
        # flush output snapshots strictly before this event
        while out_i < len(outputs) and outputs[out_i] < t_star - TIME_ATOL:
            times.append(outputs[out_i])
            states.append(snapshot(outputs[out_i]))
            kinds.append("output")
            out_i += 1
        while out_i < len(outputs) and outputs[out_i] <= t_star + TIME_ATOL:
            out_i += 1  # event snapshots cover coincident output times

        times.append(t_star)
        states.append(snapshot(t_star))
        kinds.append("pre")

        batch = [(first_l, first_r)]
        while True:
            more = pop_valid(t_star + TIME_ATOL)
            if more is None:
                break
            batch.append((more[1], more[2]))
        for left, right in batch:
            if not (left in nxt and right in nxt and nxt[left] == right):
                continue  # swallowed by an earlier group of this batch
            point = a[left] + vel[left] * t_star
            if abs(a[right] + vel[right] * t_star - point) > tol:
                raise ConsistencyError(
                    "collision positions mismatch at t=%.17g for pair (%d, %d)"
                    % (t_star, left, right)
                )
            group = [left, right]
            node = prv[left]
            while node is not None and abs(a[node] + vel[node] * t_star - point) <= tol:
                group.insert(0, node)
                node = prv[node]
            node = nxt[right]
            while node is not None and abs(a[node] + vel[node] * t_star - point) <= tol:
                group.append(node)
                node = nxt[node]
            gx = np.array([a[i] + vel[i] * t_star for i in group])
            gv = np.array([vel[i] for i in group])
            gm = np.array([mass[i] for i in group])
            mx, mv, mm = _merge_group(gx, gv, gm)
            new = next_id
            next_id += 1
            left_nb = prv[group[0]]
            right_nb = nxt[group[-1]]
            for i in group:
                del a[i], vel[i], mass[i], nxt[i], prv[i]
            a[new] = mx - mv * t_star
            vel[new] = mv
            mass[new] = mm
            prv[new] = left_nb
            nxt[new] = right_nb
            if left_nb is not None:
                nxt[left_nb] = new
            else:
                head = new
            if right_nb is not None:
                prv[right_nb] = new
            push(left_nb, new, t_star)
            push(new, right_nb, t_star)
        event_times.append(t_star)
        now = t_star
        times.append(t_star)
        states.append(snapshot(t_star))
        kinds.append("post")

    quiescent = not any(
        left in nxt and right in nxt and nxt[left] == right for _, _, left, right in heap
    )
    end = t_end if t_end is not None else now
    while out_i < len(outputs):
        t_out = outputs[out_i]
        times.append(t_out)
        states.append(snapshot(t_out))
        kinds.append("output")
        end = max(end, t_out)
        out_i += 1
    if times[-1] != end:
        times.append(end)
        states.append(snapshot(end))
        kinds.append("final")
    else:
        kinds[-1] = "final"
    return StickyTrajectory(
        times=tuple(times),
        states=tuple(states),
        kinds=tuple(kinds),
        event_times=tuple(event_times),
        end_time=end,
        quiescent=quiescent,
    )


def write_clusters_csv(path: str | Path, trajectory: StickyTrajectory) -> None:
    """Trajectory rows `t,cluster_id,x,v,m` at every snapshot, %.12e."""
    lines = ["t,cluster_id,x,v,m"]
    for t, state, _ in trajectory.snapshots():
        for i in range(state.n):
            lines.append(
                "%.12e,%d,%.12e,%.12e,%.12e" % (t, i, state.x[i], state.v[i], state.m[i])
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
