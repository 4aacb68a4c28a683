"""Event-driven sticky dynamics against hand traces and invariants."""

import numpy as np
import pytest

from granular1d import ClusterState, CollisionEvent, merge, next_event, run_sticky, to_ensemble
from granular1d.diagnostics import oleinik_sup
from granular1d.sticky import ConsistencyError

from helpers import random_sticky_instance


def _state(x, v, m):
    return ClusterState(x=np.asarray(x, float), v=np.asarray(v, float), m=np.asarray(m, float))


def test_next_event_symmetric_pair():
    ev = next_event(_state([0.0, 1.0], [1.0, -1.0], [1.0, 1.0]))
    assert ev.t_event == pytest.approx(0.5, rel=1e-15)
    assert (ev.left_index, ev.right_index) == (0, 1)


def test_next_event_diverging_pair_none():
    assert next_event(_state([0.0, 1.0], [1.0, 2.0], [1.0, 1.0])) is None


def test_next_event_picks_earliest_pair():
    ev = next_event(_state([0.0, 1.0, 3.0], [2.0, 0.0, -1.0], [1.0, 1.0, 1.0]))
    assert ev.t_event == pytest.approx(0.5, rel=1e-15)
    assert ev.left_index == 0


def test_merge_mass_weighted_velocity():
    state = _state([0.0, 1.0], [1.0, -1.0], [2.0, 1.0])
    ev = next_event(state)
    merged = merge(state, ev)
    assert merged.n == 1
    assert merged.v[0] == pytest.approx(1.0 / 3.0, rel=1e-15)
    assert merged.total_mass == pytest.approx(3.0, rel=1e-15)


def test_merge_symmetric_pair_at_midpoint():
    state = _state([0.0, 1.0], [1.0, -1.0], [1.0, 1.0])
    merged = merge(state, next_event(state))
    assert merged.time == pytest.approx(0.5)
    assert merged.x[0] == pytest.approx(0.5, rel=1e-15)
    assert merged.v[0] == 0.0


def test_three_particle_chain_hand_trace():
    state = _state([0.0, 1.0, 3.0], [2.0, 0.0, -1.0], [1.0, 1.0, 1.0])
    first = next_event(state)
    assert first.t_event == pytest.approx(0.5)
    state = merge(state, first)
    assert state.n == 2
    assert state.x[0] == pytest.approx(1.0) and state.v[0] == pytest.approx(1.0)
    second = next_event(state)
    assert second.t_event == pytest.approx(1.25)
    state = merge(state, second)
    assert state.n == 1
    assert state.x[0] == pytest.approx(1.75, rel=1e-14)
    assert state.v[0] == pytest.approx(1.0 / 3.0, rel=1e-14)


def test_merge_rejects_inconsistent_event_time():
    state = _state([0.0, 1.0], [1.0, -1.0], [1.0, 1.0])
    with pytest.raises(ConsistencyError):
        merge(state, CollisionEvent(t_event=0.1, left_index=0, right_index=1))


def test_run_single_cluster_free_flight():
    traj = run_sticky(_state([0.3], [2.0], [1.0]), t_end=1.5)
    assert traj.event_times == ()
    assert traj.final.x[0] == pytest.approx(0.3 + 2.0 * 1.5, rel=1e-15)


def test_run_matches_stepwise_next_event_merge_loop():
    rng = np.random.default_rng(11)
    for _ in range(25):
        initial = random_sticky_instance(rng, 9)
        traj = run_sticky(initial, t_end=3.0)
        state = initial
        while True:
            ev = next_event(state)
            if ev is None or ev.t_event > 3.0:
                break
            state = merge(state, ev)
        state = state.advected(3.0)
        assert traj.final.n == state.n
        np.testing.assert_allclose(traj.final.x, state.x, rtol=0, atol=1e-10)
        np.testing.assert_allclose(traj.final.v, state.v, rtol=0, atol=1e-12)
        np.testing.assert_allclose(traj.final.m, state.m, rtol=1e-12)
        assert len(traj.event_times) <= initial.n - 1


def test_simultaneous_symmetric_pileup_merges_as_group():
    state = _state([-1.0, 0.0, 1.0], [1.0, 0.0, -1.0], [1.0, 2.0, 1.0])
    traj = run_sticky(state, t_end=2.0)
    assert traj.final.n == 1
    assert traj.final.v[0] == 0.0
    assert traj.final.x[0] == pytest.approx(0.0, abs=1e-14)
    assert traj.final.m[0] == pytest.approx(4.0)


def test_conservation_and_energy_decay_along_trajectory():
    rng = np.random.default_rng(5)
    for _ in range(10):
        initial = random_sticky_instance(rng, 12)
        traj = run_sticky(initial, t_end=2.0, output_times=np.linspace(0.0, 2.0, 9))
        energy = None
        for t, state, kind in traj.snapshots():
            assert state.total_mass == pytest.approx(initial.total_mass, rel=1e-12)
            assert state.momentum == pytest.approx(initial.momentum, rel=1e-12, abs=1e-12)
            if energy is not None:
                assert state.energy <= energy + 1e-12
            energy = state.energy


def test_merge_energy_drop_equals_quadratic_defect():
    state = _state([0.0, 1.0], [1.0, -2.0], [2.0, 3.0])
    ev = next_event(state)
    merged = merge(state, ev)
    drop = state.energy - merged.energy
    m1, m2 = 2.0, 3.0
    expected = m1 * m2 / (m1 + m2) * (1.0 - (-2.0)) ** 2
    assert drop == pytest.approx(expected, rel=1e-13)


def test_discrete_oleinik_bound_at_snapshots():
    rng = np.random.default_rng(17)
    for _ in range(15):
        initial = random_sticky_instance(rng, 15)
        traj = run_sticky(initial, t_end=2.5, output_times=np.linspace(0.02, 2.5, 40))
        for t, state, _ in traj.snapshots():
            if t > 0.01:
                assert oleinik_sup(state) * t <= 1.0 + 1e-9


def test_state_at_sides_around_event():
    state = _state([0.0, 1.0], [1.0, -1.0], [1.0, 1.0])
    traj = run_sticky(state, t_end=1.0)
    pre = traj.state_at(0.5, side="-")
    post = traj.state_at(0.5, side="+")
    assert pre.n == 2 and post.n == 1
    assert pre.x[0] == pytest.approx(0.5) and pre.x[1] == pytest.approx(0.5)
    assert traj.state_at(0.2).n == 2
    assert traj.state_at(0.9).n == 1


def test_to_ensemble_round_trip():
    state = _state([1.0], [2.0], [3.0])
    ens = to_ensemble(state)
    assert (ens.x[0], ens.v[0], ens.w[0]) == (1.0, 2.0, 3.0)
    two = _state([0.0, 1.0], [1.0, 2.0], [0.5, 0.5])
    ens2 = to_ensemble(two)
    assert np.array_equal(ens2.x, two.x)
    assert ens2.momentum == pytest.approx(two.momentum, rel=1e-15)


def test_final_velocities_ordered_after_quiescence():
    rng = np.random.default_rng(23)
    for _ in range(10):
        traj = run_sticky(random_sticky_instance(rng, 10), t_end=None)
        assert traj.quiescent
        assert np.all(np.diff(traj.final.v) >= -1e-15)
