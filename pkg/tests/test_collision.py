"""Collision map identities and the dissipation functional."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from granular1d import (
    ParticleEnsemble,
    RestitutionModel,
    collide,
    energy_dissipation,
    msum,
    restitution,
)
from granular1d.collision import energy_dissipation_per_cell
from granular1d.core import Grid

finite_v = st.floats(-10.0, 10.0)
alphas = st.floats(0.0, 1.0)


def test_restitution_constant():
    model = RestitutionModel(kind="constant", alpha=0.5)
    assert restitution(model, 7.0) == 0.5


def test_restitution_velocity_dependent_formula():
    model = RestitutionModel(kind="velocity_dependent", gamma=0.5)
    assert restitution(model, 4.0) == pytest.approx(1.0 / 3.0, rel=1e-15)
    assert restitution(model, 0.0) == 1.0  # elastic limit


def test_restitution_domain_errors():
    model = RestitutionModel(kind="constant", alpha=0.5)
    with pytest.raises(ValueError):
        restitution(model, -1.0)
    with pytest.raises(ValueError):
        restitution(model, float("nan"))


def test_collide_symmetric_head_on():
    assert collide(1.0, -1.0, 0.5) == (0.5, -0.5)


def test_collide_energy_change_matches_identity():
    vp, vsp = collide(2.0, 0.0, 0.5)
    assert (vp, vsp) == (1.5, 0.5)
    de = vp**2 + vsp**2 - 4.0
    assert de == pytest.approx(-1.5, rel=1e-15)
    assert de == pytest.approx(-(1 - 0.25) / 2 * 4.0, rel=1e-15)


def test_collide_elastic_is_identity_in_1d():
    vp, vsp = collide(1.7, -2.3, 1.0)
    assert vp == pytest.approx(1.7, rel=1e-15)
    assert vsp == pytest.approx(-2.3, rel=1e-15)


@given(finite_v, finite_v, alphas)
def test_momentum_conserved(v, vs, alpha):
    vp, vsp = collide(v, vs, alpha)
    assert vp + vsp == pytest.approx(v + vs, rel=1e-12, abs=1e-12)


@given(finite_v, finite_v, alphas)
def test_energy_dissipation_identity(v, vs, alpha):
    vp, vsp = collide(v, vs, alpha)
    de = vp**2 + vsp**2 - v**2 - vs**2
    expected = -(1 - alpha**2) / 2 * (v - vs) ** 2
    assert de == pytest.approx(expected, rel=1e-12, abs=1e-10)


@pytest.mark.parametrize(
    "psi",
    [lambda u: u * u, lambda u: np.abs(u) ** 3, lambda u: u**4,
     lambda u: np.exp(np.clip(u, -50.0, 50.0))],
    ids=["v2", "abs_v3", "v4", "exp_clamped"],
)
@given(v=finite_v, vs=finite_v, alpha=alphas)
def test_convex_test_functions_never_increase(psi, v, vs, alpha):
    vp, vsp = collide(v, vs, alpha)
    defect = psi(vp) + psi(vsp) - psi(v) - psi(vs)
    assert defect <= 1e-9  # exp of |v|<=10 reaches 2e4, so rounding scales up


@given(finite_v, finite_v, alphas, st.sampled_from([2, 3, 4, 6]))
def test_moment_monotonicity(v, vs, alpha, k):
    vp, vsp = collide(v, vs, alpha)
    assert abs(vp) ** k + abs(vsp) ** k <= abs(v) ** k + abs(vs) ** k + 1e-8


def test_dissipation_single_particle_is_zero():
    assert energy_dissipation(ParticleEnsemble(x=[0.0], v=[1.0], w=[1.0])) == 0.0


def test_dissipation_two_particle_value():
    ens = ParticleEnsemble(x=[0.0, 1.0], v=[1.0, -1.0], w=[0.5, 0.5])
    assert energy_dissipation(ens) == pytest.approx(4.0, rel=1e-14)


def test_dissipation_equal_velocities_zero():
    ens = ParticleEnsemble(x=[0.0, 0.5, 1.0], v=[2.0, 2.0, 2.0], w=[1.0, 1.0, 1.0])
    assert energy_dissipation(ens) == 0.0


@settings(deadline=None, max_examples=150)
@given(st.integers(0, 2**32 - 1))
def test_dissipation_jensen_hoelder_bound(seed):
    # unit total mass: the chained Jensen/Hoelder estimate requires it
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 101))
    w = rng.random(n) + 0.02
    w = w / w.sum()
    v = rng.uniform(-4.0, 4.0, n)
    ens = ParticleEnsemble(x=rng.random(n), v=v, w=w)
    rho = ens.total_mass
    u = ens.mean_velocity
    theta_total = msum(w * (v - u) ** 2)
    assert energy_dissipation(ens) >= rho**2.5 * theta_total**1.5 - 1e-10


def test_dissipation_per_cell_sums_against_restriction():
    rng = np.random.default_rng(1)
    ens = ParticleEnsemble(x=rng.random(40), v=rng.standard_normal(40), w=np.full(40, 0.025))
    grid = Grid.from_domain(0.0, 1.0, 4)
    per_cell = energy_dissipation_per_cell(ens, grid)
    idx = grid.locate(ens.x)
    for c in range(4):
        sub = idx == c
        if sub.sum() >= 2:
            restricted = ParticleEnsemble(x=ens.x[sub], v=ens.v[sub], w=ens.w[sub])
            assert per_cell[c] == pytest.approx(energy_dissipation(restricted), rel=1e-12)
        else:
            assert per_cell[c] == 0.0
