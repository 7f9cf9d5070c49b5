import math

import numpy as np
import pytest

import hip_planning as hp


def test_defaults():
    s = hp.default_settings()
    assert s["planner"]["phi"] == 0.75
    assert hp.default_settings(["planner.phi=0.5"])["planner"]["phi"] == 0.5
    with pytest.raises(hp.HipError):
        hp.default_settings(["planner.nope=1"])


def test_world_is_seeded():
    a = hp.generate_world(7)
    assert a == hp.generate_world(7)
    assert a != hp.generate_world(8)
    kinds = {o["kind"] for o in hp.generate_world(3, profile="out_of_distribution")["obstacles"]}
    assert "novel" in kinds or "wall" in kinds


def test_sigma_floor():
    f = hp.sigma_floor()
    assert f == pytest.approx(0.01626, rel=1e-3)
    assert 10 * (-math.log(2 * math.pi) - 2 * math.log(f)) == pytest.approx(64.0)


def test_costmap_bounds():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-5, 5, size=(40, 2))
    cm = hp.costmap(pts)
    assert cm.shape == (100, 100)
    assert cm.min() >= 0.0 and cm.max() <= 6.4
    soft = hp.costmap(pts, mode="global_softmax")
    assert soft.sum() == pytest.approx(6.4, abs=1e-9)
    traj = rng.uniform(-8, 8, size=(10, 2))
    assert 0.0 <= hp.traj_cost(pts, (0.0, 0.0, 0.0), traj) <= 64.0


def test_lidar_sees_obstacles():
    pts = hp.lidar(0)
    assert pts.ndim == 2 and pts.shape[1] == 2


def test_directive_and_grad_check():
    inside = np.array([[0.5, 0.0], [3.0, 0.0]])
    outside = np.array([[0.5, 0.0], [-3.0, 0.0]])
    assert hp.directive_cost(inside, (0.0, 0.0, 0.0), (10.0, 0.0)) == 0.0
    assert hp.directive_cost(outside, (0.0, 0.0, 0.0), (10.0, 0.0)) == 129.0
    assert hp.grad_check(3) < 1e-4
