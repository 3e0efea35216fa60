"""Experiment driver: training epochs, periodic greedy evaluation, metric
aggregation, checkpoints, and CSV emission.

Determinism contract: (config, seed) fully determine every CSV byte and
checkpoint parameter. All random streams derive from the run seed via named
integer sub-keys, and per-game evaluation streams derive from (eval seed,
game index) so results do not depend on scheduling.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import quizbowl as qb
from . import rl, soccer
from .agents import Agent, AgentSpec, quiz_agent_spec, soccer_agent_spec
from .checkpoint import Checkpoint, rng_state_of, save_checkpoint
from .config import ExperimentConfig
from .errors import ConfigurationError, TrainingError, UsageError
from .nn import AdaGradState, ParamSet
from .stats import mean_confidence_halfwidth

CSV_HEADER = "epoch,mean_reward,rush,miss,win,tie"

# sub-keys for deriving independent random streams from the run seed
_STREAM_ENV = 100
_STREAM_EXPLORE = 101
_STREAM_REPLAY = 102
_STREAM_POPULATION = 103
_STREAM_EVAL = 200


@dataclass
class MetricsSummary:
    mean_reward: float
    games: int = 0
    win_rate: float = 0.0
    tie_rate: float = 0.0
    loss_rate: float = 0.0
    rush_rate: float = 0.0
    miss_rate: float = 0.0


@dataclass
class RunResult:
    seed: int
    epoch_metrics: List[MetricsSummary]
    checkpoint: Checkpoint
    curve_path: Optional[str] = None
    checkpoint_path: Optional[str] = None

    @property
    def epoch_rewards(self) -> List[float]:
        return [m.mean_reward for m in self.epoch_metrics]

    @property
    def mean_r(self) -> float:
        """Average test reward over the last 10 epochs (all, if fewer)."""
        rewards = self.epoch_rewards
        window = rewards[-10:] if len(rewards) >= 10 else rewards
        return float(np.mean(window))

    @property
    def max_r(self) -> float:
        return float(np.max(self.epoch_rewards))


def agent_spec_for(config: ExperimentConfig) -> AgentSpec:
    if config.environment == "soccer":
        return soccer_agent_spec(
            config.agent, multitask=config.multitask, experts=config.experts,
            multitask_weight=config.multitask_weight,
        )
    return quiz_agent_spec(
        config.agent, vocab=config.vocab, multitask=config.multitask,
        experts=config.experts, multitask_weight=config.multitask_weight,
    )


def quiz_config_for(config: ExperimentConfig) -> qb.QuizConfig:
    return qb.QuizConfig(
        vocab=config.vocab, min_length=config.question_min,
        max_length=config.question_max, alpha=config.belief_alpha,
        kappa=config.belief_kappa,
    )


# -- environment drivers ------------------------------------------------------


class SoccerDriver:
    """Runs the primary agent (player A) against the rule-based opponent."""

    opponent_feature_dim = 16

    def __init__(self, config: ExperimentConfig, rng: np.random.Generator):
        self.cfg = soccer.DEFAULT_CONFIG
        self.mode_policy = config.opponent
        self.multitask = config.multitask
        self.rng = rng
        self._begin_episode()

    def _begin_episode(self) -> None:
        self.state, self.mode = soccer.reset(self.cfg, self.rng, self.mode_policy)
        self.stats = soccer.OpponentStats()

    def observe(self) -> Tuple[np.ndarray, np.ndarray]:
        return (
            soccer.featurize_state(self.state, self.cfg, "A"),
            soccer.opponent_features(self.stats),
        )

    def step(self, action: int):
        """Advance one joint step; returns (transition fields, done)."""
        phi_s, phi_o = self.observe()
        action_b = soccer.rule_agent_act(self.state, self.mode, self.rng, self.cfg, "B")
        category = soccer.classify_move(self.state, action_b, self.cfg, "B")
        supervision = None
        if self.multitask == "type":
            supervision = soccer.MODES.index(self.mode)
        elif self.multitask == "action":
            supervision = soccer.MOVE_CATEGORIES.index(category)
        next_state, reward, done, events = soccer.step(self.state, action, action_b, self.cfg)
        self.stats.observe(category, action_b, lost_ball=events.ball_taken_by == "B")
        self.state = next_state
        phi_s2 = soccer.featurize_state(next_state, self.cfg, "A")
        phi_o2 = soccer.opponent_features(self.stats)
        transition = rl.Transition(
            state=phi_s, opponent=phi_o, action=action, reward=reward,
            next_state=phi_s2, next_opponent=phi_o2, terminal=done,
            supervision=supervision,
        )
        if done:
            self._begin_episode()
        return transition, reward, done


class QuizDriver:
    """Runs the agent against sampled opponents from a persistent pool, or in
    opponent-free self-play with shaped immediate rewards."""

    opponent_feature_dim = 3

    def __init__(self, config: ExperimentConfig, rng: np.random.Generator,
                 population: Optional[qb.Population] = None):
        self.quiz_cfg = quiz_config_for(config)
        self.self_play = config.opponent == "self"
        self.multitask = config.multitask
        self.rng = rng
        if self.self_play:
            self.population = None
        elif population is not None:
            self.population = population
        else:
            raise ConfigurationError("QuizDriver needs an opponent population")
        self._begin_episode()

    def _begin_episode(self) -> None:
        if self.self_play:
            # no opponent: draw a question only
            solo = qb.Population([qb.OpponentProfile(1.0, 0.0, 0.0)])
            self.state, _ = qb.sample_episode(self.quiz_cfg, solo, self.rng)
            self.state.opponent_buzz_pos = self.state.length + 1  # never fires
            self.profile = None
            self.phi_o = np.zeros(3)
        else:
            self.state, self.profile = qb.sample_episode(self.quiz_cfg, self.population, self.rng)
            self.phi_o = qb.opponent_features(self.profile)

    def observe(self) -> Tuple[np.ndarray, np.ndarray]:
        return qb.featurize(self.state), self.phi_o

    def _supervision(self) -> Optional[object]:
        if self.self_play or self.multitask == "none":
            return None
        if self.multitask == "type":
            return qb.opponent_type(self.profile) - 1
        return qb.action_supervision_target(self.state.t, self.state.opponent_buzz_pos)

    def step(self, action: int):
        phi_s, phi_o = self.observe()
        supervision = self._supervision()
        if self.self_play:
            reward = qb.dqnself_reward(action == qb.BUZZ, qb.belief_correct(self.state),
                                       self.quiz_cfg)
            if self.state.t >= self.state.length:
                done = True
            else:
                self.state = qb.advance_belief(self.state, self.quiz_cfg, self.rng)
                done = False
            phi_s2 = qb.featurize(self.state)
            transition = rl.Transition(
                state=phi_s, opponent=phi_o, action=action, reward=reward,
                next_state=phi_s2, next_opponent=phi_o, terminal=True,
                supervision=None,
            )
            if done:
                self._begin_episode()
            return transition, reward, done

        was_opp_locked = self.state.opponent_locked
        next_state, reward, done, outcome = qb.step(self.state, action, self.quiz_cfg, self.rng)
        buzzed_wrong = next_state.opponent_locked and not was_opp_locked
        buzzed_right = outcome is not None and outcome.who == "opponent" and outcome.correct
        if buzzed_wrong or buzzed_right:
            # history updates as soon as the buzz is observed, so a failed
            # opponent buzz becomes visible in the opponent features
            self.profile.record_buzz(
                self.state.opponent_buzz_pos / self.state.length, wrong=buzzed_wrong
            )
        self.state = next_state
        phi_s2 = qb.featurize(next_state)
        phi_o2 = qb.opponent_features(self.profile)
        transition = rl.Transition(
            state=phi_s, opponent=phi_o, action=action, reward=reward,
            next_state=phi_s2, next_opponent=phi_o2, terminal=done,
            supervision=supervision,
        )
        if done:
            self._begin_episode()
        else:
            self.phi_o = phi_o2
        return transition, reward, done


def make_driver(config: ExperimentConfig, rng: np.random.Generator, seed: int):
    if config.environment == "soccer":
        return SoccerDriver(config, rng)
    population = None
    if config.opponent != "self":
        population = qb.make_population(
            config.opponent, np.random.default_rng([seed, _STREAM_POPULATION]),
            size=config.opponent_pool,
        )
    return QuizDriver(config, rng, population=population)


# -- evaluation ---------------------------------------------------------------


def _greedy(agent: Agent, phi_s: np.ndarray, phi_o: np.ndarray) -> int:
    q = agent.q_values(phi_s, phi_o if agent.spec.kind != "dqn" else None)
    return int(np.argmax(q))


def evaluate_soccer(agent: Agent, opponent: str, n_games: int, seed: int,
                    render: bool = False) -> MetricsSummary:
    cfg = soccer.DEFAULT_CONFIG
    rewards = []
    wins = ties = 0
    for game in range(n_games):
        rng = np.random.default_rng([seed, game])
        state, mode = soccer.reset(cfg, rng, opponent)
        stats = soccer.OpponentStats()
        while True:
            phi_s = soccer.featurize_state(state, cfg, "A")
            phi_o = soccer.opponent_features(stats)
            action = _greedy(agent, phi_s, phi_o)
            action_b = soccer.rule_agent_act(state, mode, rng, cfg, "B")
            category = soccer.classify_move(state, action_b, cfg, "B")
            state, reward, done, events = soccer.step(state, action, action_b, cfg)
            stats.observe(category, action_b, lost_ball=events.ball_taken_by == "B")
            if render:
                print(soccer.render(state, cfg))
                print()
            if done:
                rewards.append(reward)
                wins += reward > 0
                ties += reward == 0
                break
    n = len(rewards)
    return MetricsSummary(
        mean_reward=float(np.mean(rewards)), games=n,
        win_rate=wins / n, tie_rate=ties / n, loss_rate=(n - wins - ties) / n,
    )


def evaluate_quiz(agent: Agent, opponent: str, n_games: int, seed: int,
                  quiz_cfg: qb.QuizConfig, pool_size: int = 40,
                  trace_rows: Optional[list] = None) -> MetricsSummary:
    if opponent == "self":
        raise UsageError("evaluation always runs against a real opponent pool")
    population = qb.make_population(
        opponent, np.random.default_rng([seed, _STREAM_POPULATION]), size=pool_size
    )
    rewards = []
    rushes = misses = wins = losses = 0
    for game in range(n_games):
        rng = np.random.default_rng([seed, game])
        state, profile = qb.sample_episode(quiz_cfg, population, rng)
        phi_o = qb.opponent_features(profile)
        trace = qb.EpisodeTrace()
        agent_buzz_t = None
        opponent_won = False
        while True:
            action = _greedy(agent, qb.featurize(state), phi_o)
            trace.steps.append(qb.StepRecord(
                t=state.t, belief_was_correct=qb.belief_correct(state),
                agent_action=action, agent_had_buzzed=state.agent_locked,
            ))
            was_opp_locked = state.opponent_locked
            next_state, reward, done, outcome = qb.step(state, action, quiz_cfg, rng)
            trace.total_reward += reward
            if outcome is not None and outcome.who == "agent":
                trace.agent_buzzed = True
                trace.agent_buzz_correct = outcome.correct
                agent_buzz_t = outcome.step
            buzzed_wrong = next_state.opponent_locked and not was_opp_locked
            buzzed_right = (outcome is not None and outcome.who == "opponent"
                            and outcome.correct)
            opponent_won = opponent_won or buzzed_right
            if buzzed_wrong or buzzed_right:
                profile.record_buzz(
                    state.opponent_buzz_pos / state.length, wrong=buzzed_wrong
                )
                phi_o = qb.opponent_features(profile)
            state = next_state
            if done:
                break
        trace.completed = True
        reward, rush, miss = qb.score_episode(trace)
        rewards.append(reward)
        rushes += rush
        misses += miss
        wins += trace.agent_buzz_correct
        losses += opponent_won
        if trace_rows is not None:
            trace_rows.append({
                "game": game,
                "length": state.length,
                "opponent_mean_buzz_frac": profile.mean_buzz_frac,
                "opponent_buzz_pos": state.opponent_buzz_pos,
                "agent_buzz_pos": -1 if agent_buzz_t is None else agent_buzz_t,
                "agent_buzz_correct": int(trace.agent_buzz_correct),
                "reward": reward,
            })
    n = len(rewards)
    return MetricsSummary(
        mean_reward=float(np.mean(rewards)), games=n,
        win_rate=wins / n, tie_rate=(n - wins - losses) / n, loss_rate=losses / n,
        rush_rate=rushes / n, miss_rate=misses / n,
    )


def evaluate(checkpoint: Checkpoint, opponent: str, n_games: int, seed: int,
             render: bool = False, trace_rows: Optional[list] = None) -> MetricsSummary:
    """Greedy-policy evaluation of a checkpoint; deterministic given seed."""
    if n_games < 1:
        raise UsageError("n_games must be at least 1")
    agent = checkpoint.build_agent()
    if checkpoint.environment == "soccer":
        return evaluate_soccer(agent, opponent, n_games, seed, render=render)
    env = checkpoint.env_params
    quiz_cfg = qb.QuizConfig(
        vocab=int(env.get("vocab", 50)),
        min_length=int(env.get("question_min", 60)),
        max_length=int(env.get("question_max", 120)),
        alpha=float(env.get("belief_alpha", 8.0)),
        kappa=float(env.get("belief_kappa", 1.0)),
    )
    return evaluate_quiz(agent, opponent, n_games, seed, quiz_cfg,
                         trace_rows=trace_rows)


def _evaluate_during_training(agent: Agent, config: ExperimentConfig,
                              seed: int, epoch: int) -> MetricsSummary:
    eval_seed_key = [seed, _STREAM_EVAL, epoch]
    eval_seed = int(np.random.SeedSequence(eval_seed_key).generate_state(1)[0])
    opponent = config.opponent if config.opponent != "self" else "mixed"
    if config.environment == "soccer":
        return evaluate_soccer(agent, opponent, config.eval_games, eval_seed)
    return evaluate_quiz(agent, opponent, config.eval_games, eval_seed,
                         quiz_config_for(config), pool_size=config.opponent_pool)


# -- training -----------------------------------------------------------------


def csv_row(epoch: int, m: MetricsSummary) -> str:
    return (f"{epoch},{m.mean_reward:.6f},{m.rush_rate:.6f},{m.miss_rate:.6f},"
            f"{m.win_rate:.6f},{m.tie_rate:.6f}")


def env_params_for(config: ExperimentConfig) -> dict:
    if config.environment != "quizbowl":
        return {}
    return {
        "vocab": config.vocab, "question_min": config.question_min,
        "question_max": config.question_max, "belief_alpha": config.belief_alpha,
        "belief_kappa": config.belief_kappa,
    }


def train_run(config: ExperimentConfig, seed: int,
              progress: Optional[Callable[[int, MetricsSummary], None]] = None) -> RunResult:
    """One fully seeded training run: epochs of environment interaction with
    one TD update per step (once the buffer is warm), greedy evaluation after
    every epoch."""
    agent = Agent(agent_spec_for(config), seed=seed)
    qcfg = rl.QLearningConfig(
        discount=config.gamma, batch_size=config.batch_size,
        target_sync=config.target_sync, learning_rate=config.learning_rate,
        grad_clip=config.effective_grad_clip,
    )
    schedule = rl.EpsilonSchedule(
        start=config.epsilon_start, end=config.epsilon_end,
        decay_steps=config.epsilon_decay_steps,
    )
    env_rng = np.random.default_rng([seed, _STREAM_ENV])
    explore_rng = np.random.default_rng([seed, _STREAM_EXPLORE])
    replay_rng = np.random.default_rng([seed, _STREAM_REPLAY])
    driver = make_driver(config, env_rng, seed)
    replay = rl.ReplayBuffer(config.replay_capacity)
    opt_state = AdaGradState.for_params(agent.params, config.learning_rate)
    target = rl.sync_target(agent)
    updates = 0
    global_step = 0
    metrics: List[MetricsSummary] = []

    for epoch in range(1, config.epochs + 1):
        for _ in range(config.steps_per_epoch):
            phi_s, phi_o = driver.observe()
            eps = rl.epsilon_at(schedule, global_step)
            q = agent.q_values(phi_s, phi_o if agent.spec.kind != "dqn" else None)
            action = rl.act_epsilon_greedy(q, eps, explore_rng)
            transition, _, _ = driver.step(action)
            replay.push(transition)
            global_step += 1
            if len(replay) >= config.replay_min:
                batch = replay.sample(config.batch_size, replay_rng)
                try:
                    rl.td_update(agent, batch, qcfg, opt_state, target)
                except TrainingError as exc:
                    raise TrainingError(f"epoch {epoch}: {exc}") from exc
                updates += 1
                if updates % config.target_sync == 0:
                    target = rl.sync_target(agent)
        summary = _evaluate_during_training(agent, config, seed, epoch)
        metrics.append(summary)
        if progress is not None:
            progress(epoch, summary)

    checkpoint = Checkpoint(
        agent_spec=agent.spec, params=agent.params,
        environment=config.environment, steps=global_step,
        rng_state=rng_state_of(env_rng), env_params=env_params_for(config),
    )
    return RunResult(seed=seed, epoch_metrics=metrics, checkpoint=checkpoint)


def train(config: ExperimentConfig, output_dir: Optional[str] = None,
          progress: Optional[Callable[[int, int, MetricsSummary], None]] = None
          ) -> List[RunResult]:
    """Train every seed in the config, writing a learning-curve CSV and a
    checkpoint per seed into the output directory."""
    out = output_dir if output_dir is not None else config.output_dir
    os.makedirs(out, exist_ok=True)
    results = []
    for seed in config.seeds:
        hook = (lambda e, m, s=seed: progress(s, e, m)) if progress else None
        result = train_run(config, seed, progress=hook)
        curve_path = os.path.join(out, f"curve_seed{seed}.csv")
        with open(curve_path, "w", encoding="utf-8") as fh:
            fh.write(CSV_HEADER + "\n")
            for epoch, m in enumerate(result.epoch_metrics, start=1):
                fh.write(csv_row(epoch, m) + "\n")
        ckpt_path = os.path.join(out, f"checkpoint_seed{seed}.ckpt")
        save_checkpoint(result.checkpoint, ckpt_path)
        result.curve_path = curve_path
        result.checkpoint_path = ckpt_path
        results.append(result)
    return results


# -- expert sweep ---------------------------------------------------------------


@dataclass
class SweepPoint:
    experts: int
    seed_means: List[float]
    mean: float
    ci_halfwidth: float
    degenerate: bool  # single seed: the interval collapses to a point


def sweep_experts(config: ExperimentConfig, k_values: Sequence[int],
                  output_dir: Optional[str] = None,
                  progress: Optional[Callable[..., None]] = None) -> List[SweepPoint]:
    """Full train+evaluate per expert count per seed; 90% normal-approximation
    confidence intervals over seed means."""
    if not k_values:
        raise UsageError("at least one expert count is required")
    from dataclasses import replace as dc_replace

    points = []
    out = output_dir if output_dir is not None else config.output_dir
    os.makedirs(out, exist_ok=True)
    for k in k_values:
        cfg_k = dc_replace(config, agent="dron_moe", experts=int(k))
        seed_means = []
        for seed in cfg_k.seeds:
            hook = None
            if progress is not None:
                hook = (lambda e, m, s=seed, kk=k: progress(kk, s, e, m))
            result = train_run(cfg_k, seed, progress=hook)
            seed_means.append(result.mean_r)
        points.append(SweepPoint(
            experts=int(k), seed_means=seed_means,
            mean=float(np.mean(seed_means)),
            ci_halfwidth=mean_confidence_halfwidth(seed_means),
            degenerate=len(seed_means) < 2,
        ))
    path = os.path.join(out, "sweep.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("experts,mean_reward,ci_halfwidth,seeds,degenerate\n")
        for p in points:
            fh.write(f"{p.experts},{p.mean:.6f},{p.ci_halfwidth:.6f},"
                     f"{len(p.seed_means)},{int(p.degenerate)}\n")
    return points
