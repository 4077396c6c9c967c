"""Shared fixtures for the test suite."""

from __future__ import annotations

import pytest

from metapop.problems import Family, make_instance, make_suite


@pytest.fixture
def sphere_task():
    return make_instance(Family.SPHERE, 3, 12345)


@pytest.fixture
def small_suite():
    """Tiny mixed suite: 2 families x 4 instances in dimension 2."""
    return make_suite(
        [Family.SPHERE, Family.RASTRIGIN],
        dimension=2,
        instances_per_family=4,
        split_ratio=(0.5, 0.25, 0.25),
        master_seed=11,
    )
