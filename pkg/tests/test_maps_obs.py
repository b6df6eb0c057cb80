"""Map configuration, observation encoding, and normalization tests."""

import math

import numpy as np
import pytest

from copolicy.maps import (
    MapConfig,
    MapError,
    Obstacle,
    all_splits,
    builtin_suite,
    load_suite,
    map_from_dict,
    map_to_dict,
    save_suite,
    validate_map,
)
from copolicy.obs import OBS_DIM, OBSTACLE_SENTINEL, encode_obs, fit_norm_stats
from copolicy.sim import PhysicsParams, TableState

PARAMS = PhysicsParams()


def state_at(x=0.0, y=0.0, theta=0.0):
    return TableState(x, y, theta % (2 * math.pi), 0.0, 0.0, 0.0)


def test_empty_map_encoding_layout():
    m = MapConfig("e", (), (1.0, 2.0, 0.5), (10.0, 7.0))
    v = encode_obs(state_at(0.0, 0.0, 0.0), m)
    assert v.shape == (OBS_DIM,)
    assert (v[2], v[3]) == (1.0, 0.0)
    assert tuple(v[7:9]) == OBSTACLE_SENTINEL
    assert tuple(v[9:11]) == OBSTACLE_SENTINEL
    assert tuple(v[11:13]) == OBSTACLE_SENTINEL
    assert (v[13], v[14]) == (1.0, 2.0)
    assert v[15] == pytest.approx(math.cos(0.5))
    assert (v[17], v[18]) == (10.0, 7.0)


def test_obstacle_order_does_not_matter():
    obs = (Obstacle(6.0, 3.0, 0.8), Obstacle(4.0, 5.0, 0.8), Obstacle(5.0, 2.0, 0.6))
    a = MapConfig("a", obs, (1.4, 4.0, 0.0), (10.6, 4.0))
    b = MapConfig("b", obs[::-1], (1.4, 4.0, 0.0), (10.6, 4.0))
    s = state_at(2.0, 4.0)
    va, vb = encode_obs(s, a), encode_obs(s, b)
    assert np.array_equal(va, vb)


def test_quarter_turn_encoding():
    m = MapConfig("q", (), (1.0, 1.0, 0.0), (10.0, 7.0))
    v = encode_obs(state_at(theta=math.pi / 2), m)
    assert abs(v[2]) < 1e-12
    assert abs(v[3] - 1.0) < 1e-12


@pytest.mark.parametrize("n_obs", [0, 1, 2, 3])
def test_encoding_length_fixed(n_obs):
    obs = tuple(Obstacle(4.0 + i, 3.0, 0.5) for i in range(n_obs))
    m = MapConfig("n", obs, (1.4, 4.0, 0.0), (10.6, 4.0))
    assert encode_obs(state_at(1.0, 1.0), m).shape == (OBS_DIM,)


def test_too_many_obstacles_rejected():
    obs = tuple(Obstacle(3.0 + i, 4.0, 0.4) for i in range(4))
    with pytest.raises(MapError, match="maximum"):
        MapConfig("x", obs, (1.4, 4.0, 0.0), (10.6, 4.0))


def test_validate_map_catches_bad_layouts():
    with pytest.raises(MapError, match="bounds"):
        validate_map(MapConfig("w", (Obstacle(0.1, 4.0, 0.8),),
                               (1.4, 4.0, 0.0), (10.6, 4.0)), PARAMS)
    with pytest.raises(MapError, match="overlaps"):
        validate_map(MapConfig("o", (Obstacle(1.5, 4.0, 0.8),),
                               (1.4, 4.0, 0.0), (10.6, 4.0)), PARAMS)


def test_builtin_suites_are_valid_and_disjoint():
    splits = all_splits()
    assert len(splits["train"]) >= 12
    assert len(splits["holdout"]) >= 4
    assert len(splits["unseen"]) >= 4
    ids = set()
    for split, maps in splits.items():
        for m in maps:
            validate_map(m, PARAMS)
            assert m.map_id not in ids
            ids.add(m.map_id)
    # holdout reuses the train slot grid; unseen does not
    train_slots = {(o.x, o.y) for m in splits["train"] for o in m.obstacles}
    for m in splits["holdout"]:
        for o in m.obstacles:
            assert (o.x, o.y) in train_slots
    unseen_slots = {(o.x, o.y) for m in splits["unseen"] for o in m.obstacles}
    assert not (unseen_slots & train_slots)


def test_suite_json_round_trip(tmp_path):
    maps = builtin_suite("holdout")
    p = tmp_path / "suite.json"
    save_suite(p, maps)
    loaded = load_suite(p)
    assert [map_to_dict(m) for m in loaded] == [map_to_dict(m) for m in maps]
    assert map_from_dict(map_to_dict(maps[0])) == maps[0]


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------


def test_norm_stats_constant_dimension():
    m = np.zeros((10, 3))
    m[:, 0] = 5.0
    m[:, 1] = np.linspace(-1, 1, 10)
    stats = fit_norm_stats(m, action_scale=1.0)
    assert stats.obs_scale[0] == pytest.approx(1e-6)
    z = stats.apply_obs(m[0])
    assert z[0] == 0.0


def test_norm_round_trip():
    rng = np.random.default_rng(2)
    m = rng.standard_normal((50, OBS_DIM)) * 3 + 1
    stats = fit_norm_stats(m, action_scale=2.0)
    x = rng.standard_normal(OBS_DIM)
    assert np.max(np.abs(stats.invert_obs(stats.apply_obs(x)) - x)) < 1e-9
    a = rng.uniform(-2, 2, size=4)
    assert np.max(np.abs(stats.invert_action(stats.apply_action(a)) - a)) < 1e-12


def test_norm_two_tick_hand_computation():
    m = np.array([[0.0], [2.0]])
    stats = fit_norm_stats(m, action_scale=1.0)
    assert stats.obs_mean[0] == 1.0
    assert stats.obs_scale[0] == 1.0


def test_norm_rejects_empty():
    with pytest.raises(ValueError):
        fit_norm_stats(np.zeros((0, 3)), 1.0)
