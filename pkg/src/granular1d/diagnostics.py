"""Dissipation functionals and comparison metrics for particle data.

The central objects are pairwise functionals of the empirical measure:

* ``oleinik_functional`` weighs ordered pairs whose right member moves
  faster than the left one, i.e. exactly the pairs constrained by the
  one-sided Lipschitz (Oleinik) condition, by a mollified inverse-gap
  kernel:  sum w_i w_j (v_i - v_j)_+^{k+2} chi_mu(g) / (g + eta)^k over
  pairs with gap g = x_i - x_j > 0 (k = 0 uses the negative-log kernel).
* ``shell_trace`` measures positive relative-velocity moments of pairs
  whose positions almost coincide (a finite-width stand-in for the
  same-point trace), the quantity that vanishes for sticky dynamics and
  shrinks with the collision rate for the stochastic solver.
* ``decay_residual`` checks the time-integrated decay inequality that
  links the two along a trajectory.

Pair sums run over sorted positions in fixed-order blocks, so results
are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import (
    FunctionalParams,
    Grid,
    HydroField,
    ParticleEnsemble,
    deposit_fields,
    msum,
)
from .sticky import ClusterState, StickyTrajectory, to_ensemble

__all__ = [
    "DecayResidual",
    "FunctionalParams",
    "HaffFit",
    "Mollifier",
    "ShellTraceScan",
    "chi",
    "decay_residual",
    "diagnostics_row",
    "haff_fit",
    "monokineticity",
    "oleinik_functional",
    "oleinik_functional_mu_table",
    "oleinik_sup",
    "shell_trace",
    "shell_trace_scan",
    "wasserstein1",
    "write_diagnostics_csv",
]

_PAIR_CHUNK = 2 ** 21  # pair-block size for the windowed sweeps


@dataclass(frozen=True)
class Mollifier:
    """Smooth one-sided ramp approximating the Heaviside function.

    chi_mu(x) = 0 for x <= 0, 1 for x >= mu and the smoothstep cubic
    3 s^2 - 2 s^3 with s = x / mu in between.  The slope never exceeds
    3 / (2 mu), within the required 2 / mu bound, and chi is pointwise
    non-increasing in mu.
    """

    mu: float

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise ValueError("mu must be > 0")

    def __call__(self, x):
        s = np.clip(np.asarray(x, dtype=np.float64) / self.mu, 0.0, 1.0)
        out = s * s * (3.0 - 2.0 * s)
        return out if out.ndim else float(out)

    def derivative(self, x):
        xa = np.asarray(x, dtype=np.float64)
        s = np.clip(xa / self.mu, 0.0, 1.0)
        out = np.where((xa > 0) & (xa < self.mu), 6.0 * s * (1.0 - s) / self.mu, 0.0)
        return out if out.ndim else float(out)


def chi(mollifier: Mollifier, x):
    """Evaluate the mollified Heaviside ramp at x."""
    return mollifier(x)


def _as_xvw(obj) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(obj, ParticleEnsemble):
        return obj.x, obj.v, obj.w
    if isinstance(obj, ClusterState):
        return obj.x, obj.v, obj.m
    raise TypeError(f"expected ParticleEnsemble or ClusterState, got {type(obj)!r}")


def _pair_functional(
    x: np.ndarray,
    v: np.ndarray,
    w: np.ndarray,
    eta: float,
    mu: float,
    k: int,
    log_truncated: bool = False,
    block: int = 512,
) -> float:
    """Pair sum over ordered pairs (right index i, left index j).

    k >= 1 uses the inverse-gap kernel, k = 0 the clamped negative-log
    kernel; ``log_truncated`` restricts a k >= 1 sum to gaps inside the
    log-kernel support (gap + eta < 1), the combination the k = 1 decay
    inequality pairs with the k = 0 endpoint.
    """
    n = len(x)
    if n < 2:
        return 0.0
    order = np.argsort(x, kind="stable")
    xs, vs, ws = x[order], v[order], w[order]
    moll = Mollifier(mu)
    total = 0.0
    for start in range(1, n, block):
        stop = min(start + block, n)
        rows = np.arange(start, stop)
        gap = xs[rows, None] - xs[None, :stop]
        dvp = np.maximum(vs[rows, None] - vs[None, :stop], 0.0)
        causal = np.arange(stop)[None, :] < rows[:, None]
        ww = ws[rows, None] * ws[None, :stop]
        ramp = moll(gap)
        if k >= 1:
            kernel = ramp / (gap + eta) ** k
            if log_truncated:
                kernel = kernel * (gap + eta < 1.0)
        else:
            kernel = ramp * np.maximum(-np.log(np.maximum(gap + eta, 1e-300)), 0.0)
        total += msum(np.where(causal, ww * dvp ** (k + 2) * kernel, 0.0))
    return total


def oleinik_functional(
    ensemble,
    params: FunctionalParams,
    k: int | None = None,
    subsample: int | None = None,
) -> float:
    """Mollified inverse-gap pair functional of the empirical measure.

    Zero when no pair has its right member faster than its left one;
    non-decreasing as mu shrinks and, for k >= 1, non-increasing as eta
    grows.  ``subsample`` caps the particle count (systematic thinning
    over sorted positions with mass rescaling) to keep O(N^2) sums
    tractable on large ensembles; the result is then an estimate.
    """
    x, v, w = _as_xvw(ensemble)
    kk = params.k if k is None else int(k)
    if kk < 0:
        raise ValueError("k must be >= 0")
    if subsample is not None and len(x) > subsample:
        order = np.argsort(x, kind="stable")
        stride = math.ceil(len(x) / subsample)
        keep = order[::stride]
        scale = msum(w) / msum(w[keep])
        x, v, w = x[keep], v[keep], w[keep] * scale
    return _pair_functional(x, v, w, params.eta, params.mu, kk)


def oleinik_functional_mu_table(
    ensemble,
    params: FunctionalParams,
    mus: Sequence[float] | None = None,
    k: int | None = None,
) -> list[tuple[float, float]]:
    """(mu, value) rows for decreasing mu, down to the configured one.

    The small-mu limit is a supremum that finite data never attains, so
    it is reported as the value at the smallest mu together with this
    convergence table; the values are non-decreasing as mu shrinks.
    """
    if mus is None:
        mus = (8.0 * params.mu, 4.0 * params.mu, 2.0 * params.mu, params.mu)
    table = []
    for mu in mus:
        p = FunctionalParams(eta=params.eta, mu=mu, k=params.k, delta=params.delta)
        table.append((float(mu), oleinik_functional(ensemble, p, k=k)))
    return table


def _shell_pairs(xs: np.ndarray, delta: float) -> Iterable[tuple[np.ndarray, np.ndarray]]:
    """Index pairs (i, j) with xs[i] < xs[j] < xs[i] + delta, in blocks."""
    n = len(xs)
    lo = np.searchsorted(xs, xs, side="right")
    hi = np.searchsorted(xs, xs + delta, side="left")
    counts = np.maximum(hi - lo, 0)
    start = 0
    while start < n:
        stop = start
        budget = 0
        while stop < n and (budget == 0 or budget + counts[stop] <= _PAIR_CHUNK):
            budget += counts[stop]
            stop += 1
        blk = np.arange(start, stop)
        cnt = counts[blk]
        if budget:
            ii = np.repeat(blk, cnt)
            offsets = np.concatenate([[0], np.cumsum(cnt)])[:-1]
            jj = np.repeat(lo[blk], cnt) + (np.arange(budget) - np.repeat(offsets, cnt))
            yield ii, jj
        start = stop


def shell_trace(
    ensemble,
    k: int,
    delta: float,
    orientation: str = "converging",
    subsample: int | None = None,
) -> float:
    """Finite-shell trace: (1/delta) sum over pairs with
    x_i < x_j < x_i + delta of w_i w_j (v_i - v_j)_+^k.

    Pairs at exactly coincident positions are excluded (strict
    inequality).  The default orientation takes the positive part of
    left-minus-right velocity (approaching pairs); 'diverging' flips it,
    which is the combination the decay inequality needs.  Concentrated
    states put almost every pair inside the shell, so ``subsample``
    caps the particle count (systematic thinning with mass rescaling)
    for large ensembles, making the result an estimate.
    """
    if not delta > 0:
        raise ValueError("delta must be > 0")
    if orientation not in ("converging", "diverging"):
        raise ValueError("orientation must be 'converging' or 'diverging'")
    x, v, w = _as_xvw(ensemble)
    if len(x) < 2:
        return 0.0
    order = np.argsort(x, kind="stable")
    xs, vs, ws = x[order], v[order], w[order]
    if subsample is not None and len(xs) > subsample:
        stride = math.ceil(len(xs) / subsample)
        keep = slice(None, None, stride)
        scale = msum(w) / msum(ws[keep])
        xs, vs, ws = xs[keep], vs[keep], ws[keep] * scale
    total = 0.0
    for ii, jj in _shell_pairs(xs, delta):
        dv = vs[ii] - vs[jj] if orientation == "converging" else vs[jj] - vs[ii]
        total += msum(ws[ii] * ws[jj] * np.maximum(dv, 0.0) ** k)
    return total / delta


@dataclass(frozen=True)
class ShellTraceScan:
    """shell_trace at three nested widths with a crude stability flag."""

    deltas: tuple[float, float, float]
    values: tuple[float, float, float]
    stable: bool


def shell_trace_scan(ensemble, k: int, delta: float, orientation: str = "converging") -> ShellTraceScan:
    """Report the trace at delta, delta/2, delta/4.

    Finite ensembles have no true shrinking-shell limit, so instead of
    extrapolating we flag whether the three values agree to 25%.
    """
    deltas = (delta, delta / 2.0, delta / 4.0)
    values = tuple(shell_trace(ensemble, k, d, orientation) for d in deltas)
    scale = max(abs(val) for val in values)
    stable = scale == 0.0 or (max(values) - min(values)) <= 0.25 * scale
    return ShellTraceScan(deltas=deltas, values=values, stable=stable)


def oleinik_sup(obj) -> float:
    """max over pairs x_i > x_j of (v_i - v_j)_+ / (x_i - x_j).

    The maximum two-point slope is attained between adjacent distinct
    positions (any farther slope is a weighted mean of intermediate
    ones), so after sorting this is a linear scan.  Fields use cell
    centers and u on non-empty cells.
    """
    if isinstance(obj, HydroField):
        mask = obj.rho > 0
        x, v = obj.grid.centers[mask], obj.u[mask]
    else:
        x, v, _ = _as_xvw(obj)
    if len(x) < 2:
        return 0.0
    order = np.argsort(x, kind="stable")
    xs, vs = x[order], v[order]
    starts = np.flatnonzero(np.concatenate([[True], np.diff(xs) > 0]))
    if len(starts) < 2:
        return 0.0
    ux = xs[starts]
    gmax = np.maximum.reduceat(vs, starts)
    gmin = np.minimum.reduceat(vs, starts)
    slopes = (gmax[1:] - gmin[:-1]) / (ux[1:] - ux[:-1])
    return float(max(slopes.max(), 0.0))


def monokineticity(obj, grid: Grid | None = None, boundary: str = "free") -> float:
    """Mass-weighted squared velocity spread within cells.

    Equals the integral of the granular temperature over the line and
    vanishes exactly when the velocity is constant within every cell,
    which makes it the numerical single-velocity concentration metric.
    """
    if isinstance(obj, HydroField):
        return obj.theta_integral
    if grid is None:
        raise ValueError("monokineticity of an ensemble needs a grid")
    if isinstance(obj, ClusterState):
        obj = to_ensemble(obj)
    return deposit_fields(obj, grid, boundary=boundary).theta_integral


# ---------------------------------------------------------------------------
# Wasserstein-1 distance of mass profiles


def _cdf_of(obj) -> tuple[np.ndarray, np.ndarray, bool]:
    """(breakpoints, cumulative mass, is_continuous) for a mass profile."""
    if isinstance(obj, HydroField):
        masses = obj.rho * obj.grid.dx
        return obj.grid.edges, np.concatenate([[0.0], np.cumsum(masses)]), True
    if isinstance(obj, (ParticleEnsemble, ClusterState)):
        x, _, w = _as_xvw(obj)
    else:
        x, w = np.asarray(obj[0], dtype=np.float64), np.asarray(obj[1], dtype=np.float64)
    order = np.argsort(x, kind="stable")
    return x[order], np.cumsum(w[order]), False


def _cdf_eval(breaks, cum, continuous, points, side) -> np.ndarray:
    if continuous:
        return np.interp(points, breaks, cum)
    idx = np.searchsorted(breaks, points, side=side)
    padded = np.concatenate([[0.0], cum])
    return padded[idx]


def wasserstein1(a, b) -> float:
    """Exact W1 distance between two one-dimensional mass profiles.

    Accepts fields (piecewise-constant densities), particle or cluster
    atoms, or (positions, masses) pairs.  Total masses are normalised
    internally; the distance is the area between the two CDFs, computed
    on the merged breakpoint grid where both CDFs are piecewise linear,
    with sign crossings handled exactly.
    """
    xa, ca, lin_a = _cdf_of(a)
    xb, cb, lin_b = _cdf_of(b)
    ma, mb = (ca[-1] if len(ca) else 0.0), (cb[-1] if len(cb) else 0.0)
    if not (ma > 0 and mb > 0):
        raise ValueError("wasserstein1 needs positive total mass on both sides")
    ca, cb = ca / ma, cb / mb
    breaks = np.unique(np.concatenate([xa, xb]))
    if len(breaks) < 2:
        return 0.0
    lo, hi = breaks[:-1], breaks[1:]
    d0 = _cdf_eval(xa, ca, lin_a, lo, "right") - _cdf_eval(xb, cb, lin_b, lo, "right")
    d1 = _cdf_eval(xa, ca, lin_a, hi, "left") - _cdf_eval(xb, cb, lin_b, hi, "left")
    h = hi - lo
    same = d0 * d1 >= 0
    area_same = 0.5 * (np.abs(d0) + np.abs(d1)) * h
    denom = np.abs(d0) + np.abs(d1)
    area_cross = np.where(denom > 0, 0.5 * (d0 * d0 + d1 * d1) / np.maximum(denom, 1e-300) * h, 0.0)
    return msum(np.where(same, area_same, area_cross))


# ---------------------------------------------------------------------------
# cooling-law fit


@dataclass(frozen=True)
class HaffFit:
    """Least-squares slope of log(theta) against log(1 + t)."""

    slope: float
    intercept: float
    slope_stderr: float
    n_samples: int


def haff_fit(times, values, window: tuple[float, float]) -> HaffFit:
    """Fit the algebraic cooling exponent on a time window.

    Requires at least 10 strictly positive samples inside the window.
    """
    t = np.asarray(times, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    mask = (t >= window[0]) & (t <= window[1])
    if int(mask.sum()) < 10:
        raise ValueError("haff_fit needs >= 10 samples inside the window")
    if np.any(y[mask] <= 0):
        raise ValueError("theta must be strictly positive inside the window")
    xs = np.log1p(t[mask])
    ys = np.log(y[mask])
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    n = len(xs)
    sxx = float(np.sum((xs - xs.mean()) ** 2))
    stderr = math.sqrt(float(np.sum(resid**2)) / max(n - 2, 1) / sxx) if sxx > 0 else math.inf
    return HaffFit(slope=float(slope), intercept=float(intercept), slope_stderr=stderr, n_samples=n)


# ---------------------------------------------------------------------------
# time-integrated decay inequality


@dataclass(frozen=True)
class DecayResidual:
    """LHS - RHS of the integrated decay inequality on [s, t].

    For k >= 2 the inequality reads

        (k-1) I[L_k] + L_{k-1}(t-)  <=  L_{k-1}(s+) + (2/eta^{k-1}) I[S]

    and for k = 1, with the log-kernel endpoint L_0 and the integrand of
    L_1 restricted to the log-kernel support,

        I[L_1^trunc] + L_0(t-)  <=  L_0(s+) + 2 |log eta| I[S],

    where S is the mollifier-width shell trace of order k + 2 in the
    diverging orientation (the term the mollifier derivative produces).
    Negative or tiny residuals mean the inequality holds; `quad_tol` is
    a conservative trapezoid-error estimate from grid coarsening.
    """

    k: int
    eta: float
    mu: float
    s: float
    t: float
    integral_L: float
    endpoint_start: float
    endpoint_end: float
    shell_integral: float
    coefficient_L: float
    coefficient_shell: float
    residual: float
    quad_tol: float


def _trapezoid(times: np.ndarray, values: np.ndarray) -> float:
    return float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(times)))


def decay_residual(
    trajectory: StickyTrajectory,
    params: FunctionalParams,
    s: float,
    t: float,
    k: int | None = None,
) -> DecayResidual:
    """Evaluate the decay inequality along a trajectory between s and t.

    Time integrals use the trapezoid rule on the stored snapshots (both
    sides of each merge are present, so jumps cost no width); a
    resolution estimate from comparing with the half-density grid is
    reported, and too few snapshots raise a resolution error.
    """
    kk = params.k if k is None else int(k)
    if kk < 1:
        raise ValueError("the decay inequality needs k >= 1")
    if not trajectory.times[0] <= s < t:
        raise ValueError("need trajectory start <= s < t")
    interior = [
        (u, state)
        for u, state in zip(trajectory.times, trajectory.states)
        if s < u < t
    ]
    if len(interior) < 8:
        raise ValueError("insufficient snapshots between s and t for quadrature")
    chain: list[tuple[float, ClusterState]] = [(s, trajectory.state_at(s, side="+"))]
    chain.extend(interior)
    chain.append((t, trajectory.state_at(t, side="-")))

    eta, mu = params.eta, params.mu
    times = np.array([u for u, _ in chain])
    ens = [to_ensemble(state) for _, state in chain]
    truncated = kk == 1
    l_hi = np.array(
        [_pair_functional(e.x, e.v, e.w, eta, mu, kk, log_truncated=truncated) for e in ens]
    )
    shell = np.array([shell_trace(e, kk + 2, mu, orientation="diverging") for e in ens])
    end_lo = _pair_functional(ens[0].x, ens[0].v, ens[0].w, eta, mu, kk - 1)
    end_hi = _pair_functional(ens[-1].x, ens[-1].v, ens[-1].w, eta, mu, kk - 1)

    coef_l = 1.0 if kk == 1 else float(kk - 1)
    coef_shell = 2.0 * abs(math.log(eta)) if kk == 1 else 2.0 / eta ** (kk - 1)

    int_l = _trapezoid(times, l_hi)
    int_shell = _trapezoid(times, shell)
    keep = np.zeros(len(times), dtype=bool)
    keep[::2] = True
    keep[0] = keep[-1] = True
    int_l2 = _trapezoid(times[keep], l_hi[keep])
    int_shell2 = _trapezoid(times[keep], shell[keep])
    quad_tol = 3.0 * (
        coef_l * abs(int_l - int_l2) + coef_shell * abs(int_shell - int_shell2)
    ) + 1e-9

    residual = coef_l * int_l + end_hi - end_lo - coef_shell * int_shell
    return DecayResidual(
        k=kk,
        eta=eta,
        mu=mu,
        s=s,
        t=t,
        integral_L=int_l,
        endpoint_start=end_lo,
        endpoint_end=end_hi,
        shell_integral=int_shell,
        coefficient_L=coef_l,
        coefficient_shell=coef_shell,
        residual=residual,
        quad_tol=quad_tol,
    )


# ---------------------------------------------------------------------------
# per-snapshot diagnostics rows

_DIAG_HEADER = "t,k,eta,mu,L,lambda,oleinik_sup,monokineticity,energy,momentum,mass"


def diagnostics_row(
    ensemble: ParticleEnsemble,
    grid: Grid,
    params: FunctionalParams,
    boundary: str = "free",
    subsample: int = 4000,
) -> dict:
    """One diagnostics record for a snapshot (field-level Oleinik sup)."""
    field = deposit_fields(ensemble, grid, boundary=boundary)
    return {
        "t": ensemble.time,
        "k": params.k,
        "eta": params.eta,
        "mu": params.mu,
        "L": oleinik_functional(ensemble, params, subsample=subsample),
        "lambda": shell_trace(ensemble, params.k, params.delta, subsample=subsample),
        "oleinik_sup": oleinik_sup(field),
        "monokineticity": field.theta_integral,
        "energy": ensemble.energy,
        "momentum": ensemble.momentum,
        "mass": ensemble.total_mass,
    }


def write_diagnostics_csv(path: str | Path, rows: Sequence[dict]) -> None:
    lines = [_DIAG_HEADER]
    for row in rows:
        lines.append(
            "%.12e,%d,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e"
            % (
                row["t"],
                row["k"],
                row["eta"],
                row["mu"],
                row["L"],
                row["lambda"],
                row["oleinik_sup"],
                row["monokineticity"],
                row["energy"],
                row["momentum"],
                row["mass"],
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
