"""Policy-runtime tests: plan cadence, the zero-order-hold bridge, partner
history exactness, determinism, scripted partners, and evaluation
bookkeeping. Models here are tiny and untrained; learned behavior is
covered by the acceptance suite."""

import math

import numpy as np
import pytest

from copolicy.dataset import PLAN_STRIDE
from copolicy.denoiser import BCBaseline, Denoiser, ModelConfig
from copolicy.maps import MapConfig, Obstacle, builtin_suite
from copolicy.obs import NormStats, OBS_DIM
from copolicy.runtime import (
    RuntimeConfig,
    STOCK_PARTNERS,
    ScriptedPartner,
    _EpisodeDriver,
    evaluate_suite,
    format_summary_table,
    run_episode,
    run_episodes_batched,
    scripted_partner_act,
    summarize,
    wrap_policy,
    write_eval_csv,
    write_summary_csv,
)
from copolicy.sim import PhysicsParams, TableState

PARAMS = PhysicsParams()
EMPTY = MapConfig("empty", (), (6.0, 4.0, 0.0), (11.2, 7.4))
ONE_OB = MapConfig("one", (Obstacle(6.0, 4.0, 0.8),), (1.4, 4.0, 0.0), (10.6, 4.0))


def flat_stats():
    return NormStats(obs_mean=np.zeros(OBS_DIM), obs_scale=np.ones(OBS_DIM),
                     action_scale=PARAMS.f_max)


def tiny_cfg(**kw):
    base = dict(n_layers=2, n_heads=2, d_model=32, d_ff=64, dropout=0.0,
                t_obs=4, t_pred=16, diffusion_steps=20)
    base.update(kw)
    return ModelConfig(**base)


def zero_bc():
    model = BCBaseline(tiny_cfg(), seed=0)
    model.store["out.w"].data[:] = 0.0
    model.store["out.b"].data[:] = 0.0
    return model


def random_denoiser(seed=0):
    model = Denoiser(tiny_cfg(), seed=seed)
    rng = np.random.default_rng(seed + 50)
    model.store["head.w"].data[:] = rng.normal(0, 0.1, model.store["head.w"].shape)
    return model


# ---------------------------------------------------------------------------
# cadence and the two-rate bridge
# ---------------------------------------------------------------------------


def test_coplan_sampler_call_count():
    runtime = RuntimeConfig.coplan(timeout_ticks=240)
    rec_model = zero_bc()
    drv_record = run_episode(EMPTY, rec_model, flat_stats(), runtime, seed=1, params=PARAMS)
    assert drv_record.outcome == "timeout"
    assert drv_record.n_ticks == 240
    assert len(drv_record.plan_ms) == math.ceil(240 / (8 * PLAN_STRIDE))  # 10


def test_reactive_sampler_call_cadence():
    runtime = RuntimeConfig.reactive("scripted:compliant", timeout_ticks=30)
    rec = run_episode(EMPTY, zero_bc(), flat_stats(), runtime, seed=2, params=PARAMS)
    assert len(rec.plan_ms) == 10  # one plan per 3 simulator ticks


def test_zero_policy_times_out():
    runtime = RuntimeConfig.coplan(timeout_ticks=300)
    rec = run_episode(ONE_OB, zero_bc(), flat_stats(), runtime, seed=3, params=PARAMS)
    assert rec.outcome == "timeout"
    assert all(a.robot_fx == 0.0 and a.robot_fy == 0.0 for a in rec.actions)


def test_zoh_triples_coplan():
    runtime = RuntimeConfig.coplan(timeout_ticks=240)
    rec = run_episode(EMPTY, random_denoiser(), flat_stats(), runtime, seed=4, params=PARAMS)
    acts = rec.actions
    for i in range(0, len(acts) - PLAN_STRIDE + 1, PLAN_STRIDE):
        assert acts[i] == acts[i + 1] == acts[i + 2]


def test_zoh_triples_robot_half_reactive():
    runtime = RuntimeConfig.reactive("scripted:compliant", timeout_ticks=120)
    rec = run_episode(EMPTY, random_denoiser(), flat_stats(), runtime, seed=5, params=PARAMS)
    acts = rec.actions
    human_changed = False
    for i in range(0, len(acts) - PLAN_STRIDE + 1, PLAN_STRIDE):
        trio = acts[i:i + PLAN_STRIDE]
        assert trio[0].robot_fx == trio[1].robot_fx == trio[2].robot_fx
        assert trio[0].robot_fy == trio[1].robot_fy == trio[2].robot_fy
        if len({(a.human_fx, a.human_fy) for a in trio}) > 1:
            human_changed = True
    assert human_changed  # the partner acts at the full simulator rate


def test_partner_history_matches_executed_downsample():
    runtime = RuntimeConfig.reactive("scripted:stubborn_above", timeout_ticks=90)
    policy = wrap_policy(random_denoiser(), flat_stats())
    drv = _EpisodeDriver(EMPTY, policy, runtime, PARAMS, seed=6)
    while drv.outcome is None:
        if drv.needs_plan():
            obs, human, valid = drv.window()
            plan = policy.plan_batch(obs[None], human[None], valid[None],
                                     runtime.n_inference_steps, [drv.rng_plan])
            drv.accept_plan(plan[0], 0.0)
        drv.step_plan_action()
    rec = drv.record()
    executed = np.array([[a.human_fx, a.human_fy] for a in rec.actions])
    for i, bin_mean in enumerate(drv.human_hist):
        expect = executed[i * PLAN_STRIDE:(i + 1) * PLAN_STRIDE].mean(axis=0)
        assert np.array_equal(bin_mean, expect)


def test_run_episode_bit_deterministic():
    runtime = RuntimeConfig.reactive("scripted:stubborn_below", timeout_ticks=150)
    a = run_episode(ONE_OB, random_denoiser(), flat_stats(), runtime, seed=7, params=PARAMS)
    b = run_episode(ONE_OB, random_denoiser(), flat_stats(), runtime, seed=7, params=PARAMS)
    assert a.actions == b.actions
    assert a.states == b.states
    assert a.outcome == b.outcome


def test_batched_matches_solo_outcomes():
    runtime = RuntimeConfig.coplan(timeout_ticks=120)
    model, stats = random_denoiser(), flat_stats()
    jobs = [(EMPTY, 11), (EMPTY, 12), (ONE_OB, 13)]
    solo = [run_episode(m, model, stats, runtime, s, PARAMS) for m, s in jobs]
    batch = run_episodes_batched(jobs, model, stats, runtime, PARAMS)
    for a, b in zip(solo, batch):
        assert a.outcome == b.outcome
        assert a.n_ticks == b.n_ticks
        fa = np.array([[s.x, s.y, s.theta] for s in a.states])
        fb = np.array([[s.x, s.y, s.theta] for s in b.states])
        assert np.allclose(fa, fb, atol=1e-6)


def test_coplan_never_reads_partner_inputs():
    runtime = RuntimeConfig(mode="coplan", t_action=8, n_inference_steps=5,
                            partner="scripted:stubborn_above", timeout_ticks=48)
    policy = wrap_policy(zero_bc(), flat_stats())
    drv = _EpisodeDriver(EMPTY, policy, runtime, PARAMS, seed=1)
    assert drv.partner_state is None


def test_reactive_requires_partner():
    with pytest.raises(ValueError, match="partner"):
        run_episode(EMPTY, zero_bc(), flat_stats(),
                    RuntimeConfig(mode="reactive", t_action=1, n_inference_steps=5),
                    seed=0, params=PARAMS)


def test_t_action_bounded_by_horizon():
    runtime = RuntimeConfig(mode="coplan", t_action=99, n_inference_steps=5)
    with pytest.raises(ValueError, match="horizon"):
        run_episode(EMPTY, random_denoiser(), flat_stats(), runtime, seed=0, params=PARAMS)


# ---------------------------------------------------------------------------
# scripted partner behavior
# ---------------------------------------------------------------------------


def angle_between(vx, vy, wx, wy):
    dot = vx * wx + vy * wy
    n = math.hypot(vx, vy) * math.hypot(wx, wy)
    return math.degrees(math.acos(max(-1.0, min(1.0, dot / n))))


def test_partner_tracks_route_when_stubborn():
    partner = ScriptedPartner("p", "above", stubbornness=1.0, noise_sigma=0.0)
    state = TableState(3.0, 4.0, 0.0, 0.0, 0.0, 0.0)  # at rest on the route
    straight = MapConfig("s", (), (3.0, 4.0, 0.0), (10.6, 4.0))
    fx, fy = scripted_partner_act(partner, state, straight, PARAMS,
                                  np.random.default_rng(0))
    assert angle_between(fx, fy, 1.0, 0.0) < 15.0


def test_partner_yields_when_compliant():
    partner = ScriptedPartner("p", "above", stubbornness=0.0, noise_sigma=0.0)
    state = TableState(4.0, 3.0, 0.0, 0.3, 0.55, 0.0)  # moving up-right
    straight = MapConfig("s", (), (3.0, 4.0, 0.0), (10.6, 4.0))
    fx, fy = scripted_partner_act(partner, state, straight, PARAMS,
                                  np.random.default_rng(0))
    assert angle_between(fx, fy, state.vx, state.vy) < 15.0


def test_partner_deterministic_without_noise():
    partner = ScriptedPartner("p", "below", stubbornness=0.7, noise_sigma=0.0)
    state = TableState(4.0, 4.2, 0.3, 0.1, -0.05, 0.01)
    outs = {scripted_partner_act(partner, state, ONE_OB, PARAMS,
                                 np.random.default_rng(i)) for i in range(3)}
    assert len(outs) == 1


def test_stock_partners_cover_both_sides():
    assert STOCK_PARTNERS["stubborn_above"].route_choice == "above"
    assert STOCK_PARTNERS["stubborn_below"].route_choice == "below"
    assert STOCK_PARTNERS["compliant"].stubbornness < 0.5


# ---------------------------------------------------------------------------
# evaluation bookkeeping
# ---------------------------------------------------------------------------


def test_evaluate_suite_row_counts(tmp_path):
    methods = {
        "codp_h": (random_denoiser(1), flat_stats()),
        "bc": (zero_bc(), flat_stats()),
    }
    suites = {"holdout": [EMPTY, ONE_OB], "unseen": [EMPTY]}
    runtime_for = lambda m: RuntimeConfig.coplan(timeout_ticks=48)
    rows, summary = evaluate_suite(methods, suites, runtime_for, seeds_per_map=2,
                                   params=PARAMS)
    assert len(rows) == 2 * (2 * 2 + 1 * 2)
    assert len(summary) == len(methods) * len(suites)  # methods x splits
    ep_csv, sm_csv = tmp_path / "episodes.csv", tmp_path / "summary.csv"
    write_eval_csv(ep_csv, rows)
    write_summary_csv(sm_csv, summary)
    assert len(ep_csv.read_text().splitlines()) == len(rows) + 1
    assert len(sm_csv.read_text().splitlines()) == len(summary) + 1
    table = format_summary_table(summary)
    assert "codp_h" in table and "bc" in table


def test_summarize_success_stats():
    from copolicy.runtime import EvalRow

    rows = [
        EvalRow("m", "s", "a", 1, "goal_reached", 10.0, 5.0),
        EvalRow("m", "s", "a", 2, "timeout", 60.0, 5.0),
        EvalRow("m", "s", "b", 3, "goal_reached", 20.0, 5.0),
        EvalRow("m", "s", "b", 4, "collision_obstacle", 3.0, 5.0),
    ]
    s = summarize(rows)[0]
    assert s["success_rate"] == 0.5
    assert s["mean_time_s"] == 15.0
    assert s["episodes"] == 4
