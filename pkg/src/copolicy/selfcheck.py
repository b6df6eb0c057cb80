"""Fast self-check: runs the core property suites (gradients, schedule,
dynamics oracle, collision oracle, interaction force) and prints one
PASS/FAIL line per suite. Deterministic."""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .diffusion import forward_noise, jump_step, reverse_step, strided_plan
from .maps import MapConfig, Obstacle
from .metrics import interaction_force
from .schedule import make_schedule, validate_schedule
from .sim import JointAction, PhysicsParams, TableState, step, table_overlaps_square
from .tensor import Tensor, backward


def _fd_ok(build, shape, rng, h=1e-5, rtol=1e-4) -> bool:
    a = rng.standard_normal(shape)
    t = Tensor(a.copy(), requires_grad=True)
    t.grad = np.zeros_like(a)
    probe = build(t)
    w = np.linspace(0.5, 1.5, probe.data.size).reshape(probe.data.shape)
    loss = T.sum_all(T.mul(probe, Tensor(w)))
    backward(loss)

    def f(arr):
        with T.no_grad():
            return float(T.sum_all(T.mul(build(Tensor(arr)), Tensor(w))).item())

    flat, gflat = a.reshape(-1), t.grad.reshape(-1)
    for i in range(min(40, flat.size)):
        orig = flat[i]
        flat[i] = orig + h
        up = f(a)
        flat[i] = orig - h
        dn = f(a)
        flat[i] = orig
        num = (up - dn) / (2 * h)
        if abs(gflat[i] - num) / max(abs(gflat[i]), abs(num), 1e-6) > rtol:
            return False
    return True


def check_gradients() -> bool:
    rng = np.random.default_rng(100)
    gain, bias = Tensor(np.ones(6)), Tensor(np.zeros(6))
    weight = Tensor(rng.standard_normal((6, 5)))
    cases = [
        (lambda x: T.gelu(x), (4, 6)),
        (lambda x: T.softmax_lastdim(x), (3, 6)),
        (lambda x: T.layernorm(x, gain, bias), (4, 6)),
        (lambda x: T.matmul(x, weight), (4, 6)),
    ]
    return all(_fd_ok(build, shape, rng) for build, shape in cases)


def check_schedule() -> bool:
    try:
        for kind in ("cosine", "linear"):
            validate_schedule(make_schedule(100, kind))
    except AssertionError:
        return False
    s = make_schedule(100)
    rng = np.random.default_rng(5)
    x0 = rng.uniform(-1, 1, (64, 4))
    eps = rng.standard_normal(x0.shape)
    x1 = forward_noise(x0, 1, s, eps)
    if np.max(np.abs(reverse_step(x1, 1, eps, s, None) - x0)) > 1e-9:
        return False
    # stride-1 deterministic chain == zero-noise stochastic chain
    x = rng.standard_normal((4, 4))
    a = x.copy()
    for k in range(s.K, 0, -1):
        a = reverse_step(a, k, np.tanh(a), s, None)
    b = x.copy()
    for k_from, k_to in strided_plan(s.K, s.K):
        b = jump_step(b, k_from, k_to, np.tanh(b), s, eta=0.0)
    return a.tobytes() == b.tobytes()


def check_dynamics() -> bool:
    params = PhysicsParams()
    world = MapConfig("sc", (), (6.0, 4.0, 0.0), (11.0, 7.0))
    state = TableState(6.0, 4.0, 0.3, 0.0, 0.0, 0.0)
    y = np.array([state.x, state.y, state.theta, state.vx, state.vy, state.omega])

    def deriv(yv, act):
        c, s2 = math.cos(yv[2]), math.sin(yv[2])
        rx, ry = c * params.table_length / 2, s2 * params.table_length / 2
        fx = act.human_fx + act.robot_fx - params.linear_damping * yv[3]
        fy = act.human_fy + act.robot_fy - params.linear_damping * yv[4]
        tq = ((-rx) * act.human_fy - (-ry) * act.human_fx + rx * act.robot_fy
              - ry * act.robot_fx - params.angular_damping * yv[5])
        return np.array([yv[3], yv[4], yv[5], fx / params.mass, fy / params.mass,
                         tq / params.moment_of_inertia])

    h = params.dt_sim / 100
    cur = state
    for i in range(100):
        t = i * params.dt_sim
        act = JointAction(0.3 * math.sin(t), 0.10 * math.cos(t),
                          0.25 * math.sin(t + 1), 0.08 * math.sin(t / 3))
        cur = step(cur, act, params, world).next_state
        for _ in range(100):
            k1 = deriv(y, act)
            k2 = deriv(y + 0.5 * h * k1, act)
            k3 = deriv(y + 0.5 * h * k2, act)
            k4 = deriv(y + h * k3, act)
            y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if abs(cur.x - y[0]) > 1e-2 or abs(cur.y - y[1]) > 1e-2:
            return False
        dth = (cur.theta - y[2] + math.pi) % (2 * math.pi) - math.pi
        if abs(dth) > 1e-2:
            return False
    return True


def check_collision_oracle() -> bool:
    params = PhysicsParams()
    rng = np.random.default_rng(2023)
    for _ in range(200):
        ob = Obstacle(rng.uniform(3, 9), rng.uniform(2, 6), rng.uniform(0.4, 1.2))
        st = TableState(ob.x + rng.uniform(-1.5, 1.5), ob.y + rng.uniform(-1.5, 1.5),
                        rng.uniform(0, 2 * math.pi), 0, 0, 0)
        sat = table_overlaps_square(st, params, ob)
        c, s2 = math.cos(st.theta), math.sin(st.theta)
        hl, hw = params.table_length / 2, params.table_width / 2
        us, vs = np.meshgrid(np.linspace(-hl, hl, 100), np.linspace(-hw, hw, 100))
        px = st.x + c * us - s2 * vs
        py = st.y + s2 * us + c * vs
        brute = bool(np.any((np.abs(px - ob.x) <= ob.half())
                            & (np.abs(py - ob.y) <= ob.half())))
        if not brute:
            qs = np.linspace(-ob.half(), ob.half(), 100)
            qx, qy = np.meshgrid(ob.x + qs, ob.y + qs)
            lx = c * (qx - st.x) + s2 * (qy - st.y)
            ly = -s2 * (qx - st.x) + c * (qy - st.y)
            brute = bool(np.any((np.abs(lx) <= hl) & (np.abs(ly) <= hw)))
        if sat != brute:
            return False
    return True


def check_interaction_force() -> bool:
    params = PhysicsParams()
    st = TableState(6.0, 4.0, 0.0, 0, 0, 0)
    cases = [
        (JointAction(-0.8, 0, 0.8, 0), 0.8),
        (JointAction(0.8, 0, 0.8, 0), 0.0),
        (JointAction(0.8, 0, -0.8, 0), -0.8),
    ]
    for act, want in cases:
        if abs(interaction_force(st, act, params).f_int - want) > 1e-12:
            return False
    base = interaction_force(st, JointAction(0.3, 0.0, -0.1, 0.0), params).f_int
    shifted = interaction_force(st, JointAction(0.3, 0.5, -0.1, 0.5), params).f_int
    return abs(base - shifted) < 1e-12


SUITES = [
    ("gradients", check_gradients),
    ("schedule", check_schedule),
    ("dynamics-oracle", check_dynamics),
    ("collision-oracle", check_collision_oracle),
    ("interaction-force", check_interaction_force),
]


def run_selfcheck(out=print) -> bool:
    ok = True
    for name, fn in SUITES:
        passed = fn()
        out(f"{name:<20} {'PASS' if passed else 'FAIL'}")
        ok = ok and passed
    return ok
