"""Runtime invariant suite: fast randomized checks of the core algebra,
usable from the CLI without the test harness."""

from __future__ import annotations

import math
import time
from typing import Callable, List, Optional

import numpy as np

from . import nn, rl, soccer
from . import quizbowl as qb
from .agents import Agent, AgentSpec


def _finite_difference(loss: Callable[[nn.ParamSet], float], params: nn.ParamSet,
                       step: float = 1e-5) -> nn.ParamSet:
    grads = {}
    for name, value in params.items():
        g = np.zeros_like(value)
        flat, gflat = value.ravel(), g.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            hi = loss(params)
            flat[k] = orig - step
            lo = loss(params)
            flat[k] = orig
            gflat[k] = (hi - lo) / (2.0 * step)
        grads[name] = g
    return grads


def _mini_spec(kind: str, multitask: str, rng: np.random.Generator) -> AgentSpec:
    outputs = {"none": 1, "type": 2, "action": 3}[multitask]
    return AgentSpec(
        kind=kind,
        state_dim=int(rng.integers(2, 6)),
        action_count=int(rng.integers(2, 5)),
        opponent_dim=0 if kind == "dqn" else int(rng.integers(2, 6)),
        state_hidden=(int(rng.integers(2, 9)),),
        head_hidden=(int(rng.integers(2, 9)),),
        opponent_hidden=int(rng.integers(2, 9)),
        experts=int(rng.integers(1, 4)),
        multitask=multitask,
        multitask_outputs=outputs,
    )


def gradient_check_all_kinds(trials: int = 20, tol: float = 1e-4,
                             verbose: bool = False,
                             rng: Optional[np.random.Generator] = None) -> float:
    """Backprop vs central finite differences on random miniature networks of
    every agent kind; returns the worst relative error seen."""
    rng = rng if rng is not None else np.random.default_rng(12345)
    worst = 0.0
    variants = [("dqn", "none"), ("dron_concat", "none"),
                ("dron_moe", "none"), ("dron_moe", "type")]
    for kind, multitask in variants:
        kind_worst = 0.0
        for trial in range(trials):
            spec = _mini_spec(kind, multitask, rng)
            agent = Agent(spec, seed=int(rng.integers(1 << 30)))
            # move every parameter (biases start at zero) off the ReLU kinks,
            # where finite differences are not a valid derivative oracle
            for value in agent.params.values():
                value += rng.uniform(-0.1, 0.1, size=value.shape)
            batch = 2
            S = rng.normal(size=(batch, spec.state_dim))
            O = None if kind == "dqn" else rng.normal(size=(batch, spec.opponent_dim))
            wq = rng.normal(size=(batch, spec.action_count))
            sup_target = None
            lam = spec.multitask_weight
            if multitask != "none":
                sup_target = rng.integers(0, spec.multitask_outputs, size=batch)

            def total_loss(params):
                fwd = agent.forward_train(S, O, params=params)
                value = float((wq * fwd.q).sum())
                if sup_target is not None:
                    for b in range(batch):
                        loss_b, _ = nn.loss_and_grad(
                            spec.multitask_loss, fwd.supervision[b], int(sup_target[b])
                        )
                        value += lam * loss_b
                return value

            fwd = agent.forward_train(S, O)
            dsup = None
            if sup_target is not None:
                dsup = np.zeros_like(fwd.supervision)
                for b in range(batch):
                    _, g = nn.loss_and_grad(
                        spec.multitask_loss, fwd.supervision[b], int(sup_target[b])
                    )
                    dsup[b] = lam * g
            analytic = agent.backward_train(fwd, wq, dsup)
            numeric = _finite_difference(total_loss, agent.params)
            for name in analytic:
                a, n = analytic[name].ravel(), numeric[name].ravel()
                denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
                kind_worst = max(kind_worst, float(np.max(np.abs(a - n) / denom)))
        if verbose:
            print(f"  {kind}{'+' + multitask if multitask != 'none' else '':9s} "
                  f"max rel err {kind_worst:.3g}")
        worst = max(worst, kind_worst)
    return worst


def _check(name: str, fn: Callable[[], bool], lines: List[str]) -> bool:
    try:
        ok = fn()
    except Exception as exc:  # a crash is a failure with a reason
        lines.append(f"FAIL {name}: {exc}")
        return False
    lines.append(f"{'ok  ' if ok else 'FAIL'} {name}")
    return ok


def run_selfcheck(verbose: bool = True) -> bool:
    """Condensed invariant suite; prints one line per check."""
    lines: List[str] = []
    rng = np.random.default_rng(777)
    ok = True

    def moe_algebra() -> bool:
        spec = AgentSpec(kind="dron_moe", state_dim=5, action_count=4, opponent_dim=6,
                         state_hidden=(8,), head_hidden=(8,), opponent_hidden=7, experts=3)
        agent = Agent(spec, seed=11)
        for _ in range(1000):
            fwd = agent.forward_train(rng.normal(size=(1, 5)), rng.normal(size=(1, 6)))
            gate = fwd.gate[0]
            if not (np.all(gate >= 0.0) and abs(gate.sum() - 1.0) <= 1e-6):
                return False
            stacked = np.stack([q[0] for q in fwd.expert_q])
            if np.any(fwd.q[0] < stacked.min(axis=0) - 1e-12):
                return False
            if np.any(fwd.q[0] > stacked.max(axis=0) + 1e-12):
                return False
        return True

    def gradcheck() -> bool:
        return gradient_check_all_kinds(trials=3, rng=np.random.default_rng(5)) <= 1e-4

    def softmax_simplex() -> bool:
        for _ in range(500):
            p = nn.softmax(rng.uniform(-1e3, 1e3, size=rng.integers(1, 9)))
            if not (np.all(p >= 0.0) and abs(p.sum() - 1.0) <= 1e-9):
                return False
        return True

    def epsilon_monotone() -> bool:
        sched = rl.EpsilonSchedule()
        values = [rl.epsilon_at(sched, s) for s in range(0, 700_000, 5_000)]
        return all(a >= b for a, b in zip(values, values[1:]))

    def soccer_invariants() -> bool:
        for _ in range(300):
            state, _ = soccer.reset(soccer.DEFAULT_CONFIG, rng)
            while True:
                state, reward, done, _ = soccer.step(
                    state, int(rng.integers(0, 5)), int(rng.integers(0, 5))
                )
                if state.pos_a == state.pos_b or state.ball not in ("A", "B"):
                    return False
                if done:
                    if reward not in (-1.0, 0.0, 1.0) or state.step > 100:
                        return False
                    break
        return True

    def quiz_invariants() -> bool:
        cfg = qb.DEFAULT_QUIZ_CONFIG
        pop = qb.make_population("mixed", rng)
        for _ in range(200):
            state, _ = qb.sample_episode(cfg, pop, rng)
            total, decisions = 0.0, 0
            while True:
                action = qb.BUZZ if rng.random() < 0.05 else qb.WAIT
                state, reward, done, _ = qb.step(state, action, cfg, rng)
                total += reward
                decisions += 1
                if done:
                    break
            if not (-15.0 <= total <= 10.0) or decisions > state.length + 1:
                return False
        return True

    def replay_uniform() -> bool:
        buf = rl.ReplayBuffer(10)
        for v in range(10):
            t = rl.Transition(np.array([float(v)]), np.zeros(1), 0, 0.0,
                              np.zeros(1), np.zeros(1), True)
            buf.push(t)
        counts = np.zeros(10)
        draws = 50_000
        for t in buf.sample(draws, np.random.default_rng(3)):
            counts[int(t.state[0])] += 1
        sigma = math.sqrt(draws * 0.1 * 0.9)
        return bool(np.all(np.abs(counts - draws * 0.1) <= 4 * sigma))

    started = time.time()
    for name, fn in [
        ("moe gate simplex + convex bounds (1000 trials)", moe_algebra),
        ("gradient check, all agent kinds", gradcheck),
        ("softmax stays on the simplex", softmax_simplex),
        ("epsilon schedule non-increasing", epsilon_monotone),
        ("soccer rollout invariants", soccer_invariants),
        ("quiz rollout invariants", quiz_invariants),
        ("replay sampling uniform", replay_uniform),
    ]:
        ok = _check(name, fn, lines) and ok
    if verbose:
        print("\n".join(lines))
        print(f"selfcheck {'PASSED' if ok else 'FAILED'} in {time.time() - started:.1f}s")
    return ok
