"""Experiment orchestration: single runs, epsilon sweeps, invariant
checks and field comparison, exposed as the ``granular1d`` command."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import diagnostics as diag
from .collision import RestitutionModel, collide, energy_dissipation
from .core import (
    ConfigError,
    FunctionalParams,
    Grid,
    HydroField,
    InitSpec,
    ParticleEnsemble,
    SimConfig,
    build_config,
    config_to_dict,
    deposit_fields,
    load_raw_config,
    msum,
    read_fields_csv,
    sample_initial,
    substream,
    write_fields_csv,
    _SWEEP_KEYS,
    _coerce,
)
from .dsmc import DsmcState, TimestepError, collision_step, run_dsmc
from .sticky import (
    ClusterState,
    ConsistencyError,
    StickyTrajectory,
    run_sticky,
    to_ensemble,
    write_clusters_csv,
)

__all__ = [
    "SweepReport",
    "SweepSpec",
    "check_suite",
    "cli_main",
    "load_sweep",
    "main",
    "run_sweep",
    "sticky_reference",
]


@dataclass(frozen=True)
class SweepSpec:
    """An epsilon sweep over a base configuration."""

    base: SimConfig
    epsilons: tuple[float, ...]
    seeds: tuple[int, ...]
    compare_to_sticky: bool = True
    manifest: str = "manifest.json"

    def __post_init__(self) -> None:
        if not self.epsilons:
            raise ConfigError("sweep.epsilons must not be empty")
        if any(e <= 0 for e in self.epsilons):
            raise ConfigError("sweep.epsilons must be positive")
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigError("sweep.epsilons must be strictly decreasing")
        if not self.seeds:
            raise ConfigError("sweep.seeds must not be empty")


def load_sweep(path: str | Path) -> SweepSpec:
    raw = load_raw_config(path)
    base = build_config(raw)
    fields: dict = {}
    for key, kind in _SWEEP_KEYS.items():
        full = f"sweep.{key}"
        if full in raw:
            fields[key] = _coerce(full, raw[full], kind)
    if "epsilons" not in fields:
        raise ConfigError("sweep config needs sweep.epsilons")
    if "seeds" not in fields:
        fields["seeds"] = (base.seed,)
    return SweepSpec(base=base, **fields)


def sticky_reference(
    initial: ParticleEnsemble | InitSpec,
    grid: Grid,
    t_end: float,
    output_times: Sequence[float] = (),
    boundary: str = "free",
    n_particles: int = 10_000,
    seed: int = 0,
) -> tuple[StickyTrajectory, list[HydroField]]:
    """Pressureless reference: sticky run of the per-cell monokinetic
    projection of the ensemble (one cluster per non-empty cell at its
    mass centroid, carrying the cell mass and mean velocity), deposited
    back onto the grid at the requested times.

    An InitSpec is sampled over the grid's domain with (n_particles,
    seed) first; an ensemble is projected as given.
    """
    if isinstance(initial, InitSpec):
        ensemble = sample_initial(initial, n_particles, seed, (grid.x_min, grid.x_max))
    else:
        ensemble = initial
    if ensemble.n == 0:
        raise ValueError("cannot project an empty ensemble")
    field_grid = grid
    if boundary == "free" and not grid.covers(ensemble.x):
        field_grid = grid.cover(float(ensemble.x.min()), float(ensemble.x.max()))
    idx = field_grid.locate(ensemble.x, periodic=boundary == "periodic")
    n = field_grid.n_cells
    cell_mass = np.bincount(idx, weights=ensemble.w, minlength=n)
    cell_mom = np.bincount(idx, weights=ensemble.w * ensemble.v, minlength=n)
    cell_cen = np.bincount(idx, weights=ensemble.w * ensemble.x, minlength=n)
    occupied = cell_mass > 0
    initial = ClusterState(
        x=cell_cen[occupied] / cell_mass[occupied],
        v=cell_mom[occupied] / cell_mass[occupied],
        m=cell_mass[occupied],
        time=ensemble.time,
    )
    times = sorted(set(float(t) for t in output_times) | {float(t_end)})
    trajectory = run_sticky(initial, t_end=float(t_end), output_times=times)
    fields = [
        deposit_fields(to_ensemble(trajectory.state_at(t)), field_grid, boundary=boundary)
        for t in times
    ]
    return trajectory, fields


@dataclass(frozen=True)
class SweepReport:
    rows: tuple[dict, ...]
    medians: tuple[dict, ...]
    file_list: tuple[str, ...]
    manifest_path: str


_SUMMARY_HEADER = "epsilon,seed,monokineticity,w1_sticky,lambda_int,oleinik_t,energy,n_events"


def _sweep_point(
    base: SimConfig,
    eps: float,
    seed: int,
    out_dir: Path,
    sticky_final: HydroField | None,
    n_snapshots: int,
) -> tuple[dict, list[str]]:
    config = replace(base, epsilon=eps, seed=seed)
    traj = run_dsmc(config, n_snapshots=n_snapshots)
    sub = out_dir / ("eps_%g_seed_%d" % (eps, seed))
    sub.mkdir(parents=True, exist_ok=True)
    write_fields_csv(sub / "fields.csv", traj.fields)
    rows = [
        diag.diagnostics_row(ens, config.grid(), config.functional, boundary=config.boundary)
        for ens in traj.ensembles
    ]
    diag.write_diagnostics_csv(sub / "diagnostics.csv", rows)
    dx = config.grid().dx
    lam = np.array(
        [diag.shell_trace(ens, 2, dx, subsample=4000) for ens in traj.ensembles]
    )
    times = np.array(traj.times)
    lam_int = float(np.sum(0.5 * (lam[1:] + lam[:-1]) * np.diff(times)))
    final_field = traj.fields[-1]
    w1 = (
        diag.wasserstein1(final_field, sticky_final)
        if sticky_final is not None
        else math.nan
    )
    row = {
        "epsilon": eps,
        "seed": seed,
        "monokineticity": final_field.theta_integral,
        "w1_sticky": w1,
        "lambda_int": lam_int,
        "oleinik_t": diag.oleinik_sup(final_field) * traj.times[-1],
        "energy": traj.ensembles[-1].energy,
        "n_events": traj.total_report.n_collision_events,
    }
    rel = [str(Path(sub.name) / "fields.csv"), str(Path(sub.name) / "diagnostics.csv")]
    return row, rel


def run_sweep(
    spec: SweepSpec,
    out_dir: str | Path,
    threads: int = 1,
    quiet: bool = True,
    n_snapshots: int = 21,
) -> SweepReport:
    """Run every (epsilon, seed) point, plus one sticky reference per
    seed, and write CSV payloads and a JSON manifest.

    Points run concurrently when threads > 1; each owns its output
    subdirectory and its own RNG streams, so the artifacts are bitwise
    identical for any thread count.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = spec.base
    files: list[str] = []

    sticky_finals: dict[int, HydroField | None] = {}
    if spec.compare_to_sticky:
        def sticky_job(seed: int) -> tuple[int, HydroField, StickyTrajectory]:
            ens = sample_initial(base.init, base.n_particles, seed, base.domain)
            traj, fields = sticky_reference(
                ens, base.grid(), base.t_end, boundary=base.boundary
            )
            return seed, fields[-1], traj

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            for seed, final, traj in pool.map(sticky_job, spec.seeds):
                sticky_finals[seed] = final
                sub = out / ("sticky_seed_%d" % seed)
                sub.mkdir(parents=True, exist_ok=True)
                write_clusters_csv(sub / "clusters.csv", traj)
                files.append(str(Path(sub.name) / "clusters.csv"))
    else:
        sticky_finals = {seed: None for seed in spec.seeds}

    points = [(eps, seed) for eps in spec.epsilons for seed in spec.seeds]

    def point_job(point: tuple[float, int]) -> tuple[dict, list[str]]:
        eps, seed = point
        return _sweep_point(base, eps, seed, out, sticky_finals[seed], n_snapshots)

    rows: list[dict] = []
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for row, rel in pool.map(point_job, points):
            rows.append(row)
            files.extend(rel)
            if not quiet:
                print(
                    "eps=%g seed=%d monokineticity=%.6g w1=%.6g"
                    % (row["epsilon"], row["seed"], row["monokineticity"], row["w1_sticky"]),
                    file=sys.stderr,
                )

    medians = []
    for eps in spec.epsilons:
        sel = [r for r in rows if r["epsilon"] == eps]
        medians.append(
            {
                "epsilon": eps,
                "monokineticity": float(np.median([r["monokineticity"] for r in sel])),
                "w1_sticky": float(np.median([r["w1_sticky"] for r in sel])),
                "lambda_int": float(np.median([r["lambda_int"] for r in sel])),
                "oleinik_t": float(np.median([r["oleinik_t"] for r in sel])),
            }
        )

    summary_lines = [_SUMMARY_HEADER]
    for row in rows:
        summary_lines.append(
            "%.12e,%d,%.12e,%.12e,%.12e,%.12e,%.12e,%d"
            % (
                row["epsilon"],
                row["seed"],
                row["monokineticity"],
                row["w1_sticky"],
                row["lambda_int"],
                row["oleinik_t"],
                row["energy"],
                row["n_events"],
            )
        )
    (out / "summary.csv").write_text("\n".join(summary_lines) + "\n", encoding="utf-8")
    files.append("summary.csv")

    manifest = {
        "spec_echo": {
            "base": config_to_dict(base),
            "epsilons": list(spec.epsilons),
            "seeds": list(spec.seeds),
            "compare_to_sticky": spec.compare_to_sticky,
        },
        "rows": rows,
        "medians": medians,
        "file_list": sorted(files),
    }
    manifest_path = out / spec.manifest
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return SweepReport(
        rows=tuple(rows),
        medians=tuple(medians),
        file_list=tuple(sorted(files)),
        manifest_path=str(manifest_path),
    )


# ---------------------------------------------------------------------------
# invariant suite


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check_collision_identities() -> list[CheckResult]:
    rng = substream(20240501, 1)
    n = 200_000
    v = rng.uniform(-2.0, 2.0, n)
    vs = rng.uniform(-2.0, 2.0, n)
    alpha = rng.random(n)
    vp, vsp = collide(v, vs, alpha)
    scale = np.abs(v) + np.abs(vs) + 1.0
    mom = np.max(np.abs(vp + vsp - v - vs) / scale)
    de = vp**2 + vsp**2 - v**2 - vs**2
    ref = -0.5 * (1.0 - alpha**2) * (v - vs) ** 2
    den = v**2 + vs**2 + 1.0
    energy = np.max(np.abs(de - ref) / den)
    results = [
        CheckResult("collision_momentum", bool(mom <= 1e-12), f"max rel err {mom:.3e}"),
        CheckResult("collision_energy_identity", bool(energy <= 1e-12), f"max rel err {energy:.3e}"),
    ]
    for name, psi in (("v2", lambda u: u * u), ("abs_v3", lambda u: np.abs(u) ** 3), ("v4", lambda u: u**4), ("exp_clamped", lambda u: np.exp(np.clip(u, -50.0, 50.0)))):
        defect = psi(vp) + psi(vsp) - psi(v) - psi(vs)
        worst = float(defect.max())
        results.append(
            CheckResult(f"convex_dissipation_{name}", worst <= 1e-12, f"max defect {worst:.3e}")
        )
    return results


def _check_dissipation_bound() -> CheckResult:
    rng = substream(20240501, 2)
    worst = math.inf
    for _ in range(1500):
        n = int(rng.integers(2, 61))
        v = rng.uniform(-3.0, 3.0, n)
        w = rng.random(n) + 0.05
        w = w / msum(w)
        ens = ParticleEnsemble(x=rng.random(n), v=v, w=w)
        d = energy_dissipation(ens)
        u = ens.mean_velocity
        theta = msum(w * (v - u) ** 2)
        worst = min(worst, d - theta**1.5)
    return CheckResult("dissipation_lower_bound", worst >= -1e-10, f"min margin {worst:.3e}")


def _check_mollifier() -> CheckResult:
    ok = True
    detail = "bounds hold"
    for mu in (0.001, 0.05, 1.0):
        m = diag.Mollifier(mu)
        x = np.linspace(-2 * mu, 3 * mu, 2001)
        val = m(x)
        der = m.derivative(x)
        if np.any(val < 0) or np.any(val > 1) or np.any(val[x <= 0] != 0):
            ok, detail = False, f"value bounds broken at mu={mu}"
            break
        if np.any(der < 0) or np.any(der > 2.0 / mu + 1e-12):
            ok, detail = False, f"slope bound broken at mu={mu}"
            break
        wider = diag.Mollifier(2 * mu)
        if np.any(wider(x) > val + 1e-12):
            ok, detail = False, f"mu-monotonicity broken at mu={mu}"
            break
    return CheckResult("mollifier_bounds", ok, detail)


def _random_sticky_instance(rng: np.random.Generator, n: int) -> ClusterState:
    x = np.sort(rng.random(n))
    while np.any(np.diff(x) <= 0):
        x = np.sort(rng.random(n))
    v = rng.uniform(-1.0, 1.0, n)
    return ClusterState(x=x, v=v, m=np.full(n, 1.0 / n), time=0.0)


def _check_sticky() -> list[CheckResult]:
    rng = substream(20240501, 3)
    results = []
    ok_cons = ok_oleinik = ok_bound = True
    detail_cons = detail_oleinik = detail_bound = "holds"
    for _ in range(12):
        initial = _random_sticky_instance(rng, 14)
        traj = run_sticky(initial, t_end=2.0, output_times=np.linspace(0.05, 2.0, 30))
        m0, p0 = initial.total_mass, initial.momentum
        energy_prev = math.inf
        for t, state, _kind in traj.snapshots():
            if abs(state.total_mass - m0) > 1e-12 * max(1.0, abs(m0)):
                ok_cons, detail_cons = False, f"mass drift at t={t}"
            if abs(state.momentum - p0) > 1e-12 * max(1.0, abs(p0)):
                ok_cons, detail_cons = False, f"momentum drift at t={t}"
            if state.energy > energy_prev * (1 + 1e-12) + 1e-15:
                ok_cons, detail_cons = False, f"energy grew at t={t}"
            energy_prev = state.energy
            if t > 0.01:
                ratio = diag.oleinik_sup(state) * t
                if ratio > 1 + 1e-9:
                    ok_oleinik, detail_oleinik = False, f"ratio*t={ratio:.3e} at t={t}"
                vmax2 = float(np.max(np.abs(state.v))) ** 2
                sup = diag.oleinik_sup(state)
                for k in (1, 2):
                    for eta in (1.0, 0.1):
                        for mu in (0.1, 0.01):
                            val = diag.oleinik_functional(
                                to_ensemble(state), FunctionalParams(eta=eta, mu=mu, k=k)
                            )
                            if val > vmax2 * sup**k + 1e-9:
                                ok_bound = False
                                detail_bound = f"L={val:.3e} > bound at t={t}"
        if len(traj.event_times) > initial.n - 1:
            ok_cons, detail_cons = False, "more than n-1 merges"
    results.append(CheckResult("sticky_conservation", ok_cons, detail_cons))
    results.append(CheckResult("sticky_oleinik", ok_oleinik, detail_oleinik))
    results.append(CheckResult("sticky_functional_bound", ok_bound, detail_bound))
    return results


def _check_decay_inequality() -> CheckResult:
    rng = substream(20240501, 4)
    params = FunctionalParams(eta=0.1, mu=0.01, k=2, delta=0.01)
    worst = -math.inf
    for _ in range(5):
        initial = _random_sticky_instance(rng, 12)
        traj = run_sticky(initial, t_end=1.5, output_times=np.arange(0.0, 1.5, 1e-3))
        for k in (1, 2):
            res = diag.decay_residual(traj, params, s=0.1, t=1.4, k=k)
            worst = max(worst, res.residual - res.quad_tol)
    return CheckResult("decay_inequality", worst <= 1e-6, f"max excess {worst:.3e}")


def _check_dsmc() -> list[CheckResult]:
    config = SimConfig(
        epsilon=0.5,
        alpha=0.8,
        n_particles=400,
        n_cells=8,
        boundary="periodic",
        t_end=0.75,
        dt=0.005,
        seed=424242,
        init=InitSpec(kind="double_peak", v1=-1.0, v2=1.0),
    )
    traj = run_dsmc(config, n_snapshots=11)
    mass = traj.series("mass")
    mom = traj.series("momentum")
    energy = traj.series("energy")
    ok_mass = bool(np.max(np.abs(mass - mass[0])) <= 1e-12 * max(1.0, abs(mass[0])))
    ok_mom = bool(np.max(np.abs(mom - mom[0])) <= 1e-12)
    ok_energy = bool(np.all(np.diff(energy) <= 1e-12))
    traj2 = run_dsmc(config, n_snapshots=11)
    ok_replay = all(
        np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v)
        for a, b in zip(traj.ensembles, traj2.ensembles)
    )
    return [
        CheckResult("dsmc_mass", ok_mass, "constant" if ok_mass else "drifted"),
        CheckResult("dsmc_momentum", ok_mom, f"max drift {np.max(np.abs(mom - mom[0])):.3e}"),
        CheckResult("dsmc_energy_monotone", ok_energy, "non-increasing" if ok_energy else "grew"),
        CheckResult("dsmc_replay", ok_replay, "bitwise equal" if ok_replay else "mismatch"),
    ]


def _check_alpha_zero_merge() -> CheckResult:
    # a forced two-particle collision with alpha = 0 must reproduce the
    # sticky merge velocity (the mass-weighted mean)
    ens = ParticleEnsemble(x=np.array([0.4, 0.6]), v=np.array([1.0, -1.0]), w=np.array([0.5, 0.5]))
    state = DsmcState(
        ensemble=ens,
        grid=Grid.from_domain(0.0, 1.0, 1),
        epsilon=1.0,
        model=RestitutionModel(kind="constant", alpha=0.0),
        rng_root=7,
    )
    new_state, report = collision_step(state, dt=1.0)
    merged = np.allclose(new_state.ensemble.v, 0.0, atol=1e-15) and report.n_collision_events == 1
    return CheckResult("alpha_zero_matches_sticky_merge", bool(merged), f"v={new_state.ensemble.v}")


def _check_wasserstein() -> CheckResult:
    a = (np.array([0.0]), np.array([1.0]))
    b = (np.array([1.0]), np.array([1.0]))
    c = (np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
    ok = abs(diag.wasserstein1(a, b) - 1.0) <= 1e-12 and abs(diag.wasserstein1(a, c) - 1.0) <= 1e-12
    rng = substream(20240501, 5)
    for _ in range(20):
        xs = [rng.uniform(-2, 2, int(rng.integers(1, 8))) for _ in range(3)]
        ws = [rng.random(len(x)) + 0.1 for x in xs]
        d_ab = diag.wasserstein1((xs[0], ws[0]), (xs[1], ws[1]))
        d_ba = diag.wasserstein1((xs[1], ws[1]), (xs[0], ws[0]))
        d_ac = diag.wasserstein1((xs[0], ws[0]), (xs[2], ws[2]))
        d_cb = diag.wasserstein1((xs[2], ws[2]), (xs[1], ws[1]))
        if abs(d_ab - d_ba) > 1e-12 or d_ab > d_ac + d_cb + 1e-12:
            ok = False
    return CheckResult("wasserstein_metric", ok, "symmetry and triangle hold" if ok else "violated")


def check_suite() -> list[CheckResult]:
    """Run the numerical invariant suite (used by `granular1d check`)."""
    results: list[CheckResult] = []
    results.extend(_check_collision_identities())
    results.append(_check_dissipation_bound())
    results.append(_check_mollifier())
    results.extend(_check_sticky())
    results.append(_check_decay_inequality())
    results.extend(_check_dsmc())
    results.append(_check_alpha_zero_merge())
    results.append(_check_wasserstein())
    return results


# ---------------------------------------------------------------------------
# command line


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 with usage, not argparse's 2
        raise ConfigError(f"{message}\n{self.format_usage()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="granular1d", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("config", nargs="?", help="key=value configuration file")
        p.add_argument("--config", dest="config_flag", help="alternative to the positional")
        p.add_argument("--out", help="output directory (default: config output_dir)")
        p.add_argument("--quiet", action="store_true")
        p.add_argument("--threads", type=int, default=1, help="worker threads (scheduling only)")

    dsmc_p = sub.add_parser("dsmc", help="stochastic solver commands")
    dsmc_sub = dsmc_p.add_subparsers(dest="action")
    dsmc_run = dsmc_sub.add_parser("run", help="run one DSMC experiment")
    common(dsmc_run)
    dsmc_run.add_argument("--snapshots", type=int, default=21)
    dsmc_run.add_argument("--progress", action="store_true", help="stderr ticker")
    dsmc_run.add_argument("--event-log", action="store_true", help="write events.npz")

    sticky_p = sub.add_parser("sticky", help="sticky reference commands")
    sticky_sub = sticky_p.add_subparsers(dest="action")
    sticky_run = sticky_sub.add_parser("run", help="run the sticky reference")
    common(sticky_run)
    sticky_run.add_argument("--snapshots", type=int, default=21)

    sweep_p = sub.add_parser("sweep", help="epsilon sweep with manifest")
    common(sweep_p)
    sweep_p.add_argument("--seeds", help="comma list overriding sweep.seeds")
    sweep_p.add_argument("--snapshots", type=int, default=21)

    check_p = sub.add_parser("check", help="run the invariant suite")
    check_p.add_argument("--quiet", action="store_true")

    cmp_p = sub.add_parser("compare", help="W1 distance of two field CSVs")
    cmp_p.add_argument("fields_a")
    cmp_p.add_argument("fields_b")
    return parser


def _config_path(args) -> str:
    path = args.config or getattr(args, "config_flag", None)
    if not path:
        raise ConfigError("a configuration file is required (positional or --config)")
    return path


def _resolve_out(arg_out: str | None, config: SimConfig | None) -> Path:
    if arg_out:
        return Path(arg_out)
    name = config.output_dir if config is not None else "out"
    root = os.environ.get("GRANULAR_OUT")
    if root and not os.path.isabs(name):
        return Path(root) / name
    return Path(name)


def _fields_to_atoms(path: str) -> tuple[np.ndarray, np.ndarray]:
    snapshots = read_fields_csv(path)
    last = snapshots[-1]
    centers = last["x_center"]
    dx = float(np.median(np.diff(centers))) if len(centers) > 1 else 1.0
    masses = last["rho"] * dx
    keep = masses > 0
    if not np.any(keep):
        raise ConfigError(f"no mass in {path}")
    return centers[keep], masses[keep]


def cli_main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage()
            return 1
        if args.command in ("dsmc", "sticky") and args.action is None:
            parser.print_usage()
            return 1

        if args.command == "dsmc":
            config = build_config(load_raw_config(_config_path(args)))
            out = _resolve_out(args.out, config)
            out.mkdir(parents=True, exist_ok=True)
            traj = run_dsmc(config, n_snapshots=args.snapshots, record_events=args.event_log,
                            progress=args.progress)
            write_fields_csv(out / "fields.csv", traj.fields)
            rows = [
                diag.diagnostics_row(ens, config.grid(), config.functional, boundary=config.boundary)
                for ens in traj.ensembles
            ]
            diag.write_diagnostics_csv(out / "diagnostics.csv", rows)
            if args.event_log and traj.total_report.events is not None:
                ev = traj.total_report.events
                np.savez(
                    out / "events.npz",
                    v=ev.v, v_star=ev.v_star, v_prime=ev.v_prime,
                    v_star_prime=ev.v_star_prime, alpha=ev.alpha, w=ev.w,
                )
            if not args.quiet:
                print(
                    "dsmc run done: %d snapshots, %d collision events -> %s"
                    % (len(traj.times), traj.total_report.n_collision_events, out)
                )
            return 0

        if args.command == "sticky":
            config = build_config(load_raw_config(_config_path(args)))
            out = _resolve_out(args.out, config)
            out.mkdir(parents=True, exist_ok=True)
            ens = config.initial_ensemble()
            times = np.linspace(0.0, config.t_end, args.snapshots)
            trajectory, fields = sticky_reference(
                ens, config.grid(), config.t_end, output_times=times, boundary=config.boundary
            )
            write_clusters_csv(out / "clusters.csv", trajectory)
            write_fields_csv(out / "fields.csv", fields)
            if not args.quiet:
                print(
                    "sticky run done: %d merges, %d clusters left -> %s"
                    % (len(trajectory.event_times), trajectory.final.n, out)
                )
            return 0

        if args.command == "sweep":
            spec = load_sweep(_config_path(args))
            if args.seeds:
                spec = replace(spec, seeds=tuple(int(s) for s in args.seeds.split(",")))
            out = _resolve_out(args.out, spec.base)
            report = run_sweep(
                spec, out, threads=args.threads, quiet=args.quiet, n_snapshots=args.snapshots
            )
            if not args.quiet:
                for med in report.medians:
                    print(
                        "eps=%g median monokineticity=%.6g median w1=%.6g"
                        % (med["epsilon"], med["monokineticity"], med["w1_sticky"])
                    )
                print(f"manifest: {report.manifest_path}")
            return 0

        if args.command == "check":
            results = check_suite()
            failed = [r for r in results if not r.passed]
            for r in results:
                line = "%s %s: %s" % ("PASS" if r.passed else "FAIL", r.name, r.detail)
                if not args.quiet or not r.passed:
                    print(line)
            return 2 if failed else 0

        if args.command == "compare":
            atoms_a = _fields_to_atoms(args.fields_a)
            atoms_b = _fields_to_atoms(args.fields_b)
            dist = diag.wasserstein1(atoms_a, atoms_b)
            print("W1 = %.12e" % dist)
            return 0

        parser.print_usage()
        return 1
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except (TimestepError, ConsistencyError) as err:
        print(f"numerical invariant failure: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
