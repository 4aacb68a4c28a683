"""Shared construction helpers for the test suite."""

from __future__ import annotations

import numpy as np

from granular1d import ClusterState, ParticleEnsemble


def random_unit_mass_ensemble(rng: np.random.Generator, n_max: int = 100) -> ParticleEnsemble:
    """Random weighted ensemble normalised to total mass one."""
    n = int(rng.integers(2, n_max + 1))
    w = rng.random(n) + 0.05
    w = w / w.sum()
    return ParticleEnsemble(x=rng.random(n), v=rng.uniform(-3.0, 3.0, n), w=w)


def random_sticky_instance(rng: np.random.Generator, n: int) -> ClusterState:
    """Unit-total-mass clusters with sorted distinct positions in [0, 1]."""
    x = np.sort(rng.random(n))
    while np.any(np.diff(x) <= 0):
        x = np.sort(rng.random(n))
    v = rng.uniform(-1.0, 1.0, n)
    return ClusterState(x=x, v=v, m=np.full(n, 1.0 / n), time=0.0)
