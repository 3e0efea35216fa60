"""Synthetic incremental question-answering buzzing game.

A question is a sequence of L words. A belief vector over V candidate
answers sharpens as words are revealed: at word t the true answer's logit
carries a bonus alpha*(t/L)^kappa on top of unit-normal noise, so the
argmax accuracy climbs from chance to near-certainty across the question.
The agent chooses buzz/wait at every word; a simulated opponent buzzes at a
position drawn from its profile and answers correctly with its
characteristic accuracy. Payoffs follow quiz-bowl scoring: +10 for a
correct buzz, -5 for a wrong one (the buzzer is then locked out), -10 when
the opponent answers correctly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConfigurationError, UsageError

WAIT, BUZZ = 0, 1
QUIZ_ACTIONS = ("wait", "buzz")

POPULATION_PRESETS = ("mixed", "type1", "type2", "type3", "type4")

# per-bucket mean buzz fraction, accuracy at buzz, and mixture weight
_BUCKET_MU = (0.15, 0.38, 0.62, 0.88)
_BUCKET_RHO = (0.6, 0.8, 0.85, 0.9)
_BUCKET_WEIGHT = (4.8, 18.0, 0.7, 1.3)


@dataclass(frozen=True)
class QuizConfig:
    vocab: int = 50
    min_length: int = 60
    max_length: int = 120
    alpha: float = 8.0  # belief sharpening scale
    kappa: float = 1.0  # belief sharpening exponent
    reward_correct: float = 10.0
    reward_wrong: float = -5.0
    reward_opponent_correct: float = -10.0
    # shaped rewards for the opponent-free baseline: (buzz, wait) per
    # prediction-correct and prediction-wrong
    self_reward_correct: Tuple[float, float] = (10.0, -10.0)
    self_reward_wrong: Tuple[float, float] = (-15.0, 15.0)

    def __post_init__(self) -> None:
        if self.vocab < 2:
            raise ConfigurationError("vocab must be at least 2")
        if not 1 <= self.min_length <= self.max_length:
            raise ConfigurationError("bad question length range")


DEFAULT_QUIZ_CONFIG = QuizConfig()


@dataclass
class OpponentProfile:
    """Simulator-side ground truth plus the agent-visible history."""

    mean_buzz_frac: float  # mu
    spread: float  # sigma
    accuracy: float  # rho, chance the answer is right at buzz time
    games: int = 0
    frac_sum: float = 0.0
    error_sum: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.mean_buzz_frac <= 1.0:
            raise ConfigurationError("mean buzz fraction must lie in (0, 1]")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ConfigurationError("accuracy must lie in [0, 1]")

    # historical statistics are seeded with a (0.5, 0.5) prior pseudo-count
    @property
    def historical_buzz_frac(self) -> float:
        return (0.5 + self.frac_sum) / (1 + self.games)

    @property
    def historical_error_rate(self) -> float:
        return (0.5 + self.error_sum) / (1 + self.games)

    def record_buzz(self, fraction: float, wrong: bool) -> None:
        self.games += 1
        self.frac_sum += fraction
        self.error_sum += 1.0 if wrong else 0.0


class Population:
    """A pool of persistent opponents sampled uniformly per episode."""

    def __init__(self, profiles: List[OpponentProfile]):
        if not profiles:
            raise ConfigurationError("population must be non-empty")
        self.profiles = profiles

    def sample(self, rng: np.random.Generator) -> OpponentProfile:
        return self.profiles[int(rng.integers(0, len(self.profiles)))]


def make_population(
    preset: str,
    rng: np.random.Generator,
    size: int = 40,
    spread: float = 0.08,
    mu_jitter: float = 0.04,
) -> Population:
    """Built-in opponent pools: one per buzz-position bucket, plus a mixture
    weighted by the bucket episode counts."""
    if preset not in POPULATION_PRESETS:
        raise ConfigurationError(f"unknown population preset {preset!r}")
    if preset == "mixed":
        weights = np.array(_BUCKET_WEIGHT)
        counts = np.maximum(1, np.round(size * weights / weights.sum()).astype(int))
        buckets = [b for b, c in enumerate(counts) for _ in range(c)]
    else:
        buckets = [int(preset[-1]) - 1] * size
    profiles = []
    for b in buckets:
        mu = _BUCKET_MU[b] + mu_jitter * (2.0 * rng.random() - 1.0)
        mu = min(1.0, max(0.01, mu))
        profiles.append(OpponentProfile(mean_buzz_frac=mu, spread=spread,
                                        accuracy=_BUCKET_RHO[b]))
    return Population(profiles)


@dataclass
class QuizState:
    t: int
    length: int
    answer: int
    belief: np.ndarray  # log probabilities, length V
    prev_belief: np.ndarray
    agent_locked: bool = False
    opponent_locked: bool = False
    opponent_buzz_pos: int = 1  # hidden from featurization
    opponent_correct: bool = False  # pre-drawn outcome of the opponent's buzz
    done: bool = False


@dataclass
class BuzzOutcome:
    who: str  # "agent" | "opponent"
    correct: bool
    step: int
    reward: float


def _draw_belief(t: int, length: int, answer: int, config: QuizConfig,
                 rng: np.random.Generator) -> np.ndarray:
    logits = rng.standard_normal(config.vocab)
    logits[answer] += config.alpha * (t / length) ** config.kappa
    shifted = logits - logits.max()
    return shifted - math.log(np.exp(shifted).sum())


def sample_episode(
    config: QuizConfig, population: Population, rng: np.random.Generator
) -> Tuple[QuizState, OpponentProfile]:
    """Draw a question, an answer, and an opponent; pre-draw the opponent's
    buzz position (clamped to [1, L]) and its correctness."""
    length = int(rng.integers(config.min_length, config.max_length + 1))
    answer = int(rng.integers(0, config.vocab))
    profile = population.sample(rng)
    z = rng.standard_normal()
    pos = int(round(length * (profile.mean_buzz_frac + profile.spread * z)))
    pos = min(length, max(1, pos))
    correct = rng.random() < profile.accuracy
    uniform = np.full(config.vocab, -math.log(config.vocab))
    state = QuizState(
        t=0, length=length, answer=answer,
        belief=_draw_belief(0, length, answer, config, rng),
        prev_belief=uniform,
        opponent_buzz_pos=pos, opponent_correct=correct,
    )
    return state, profile


def advance_belief(state: QuizState, config: QuizConfig, rng: np.random.Generator) -> QuizState:
    """Reveal the next word: the previous belief shifts back and a fresh
    belief is drawn with a slightly larger bonus on the true answer."""
    if state.done:
        raise UsageError("cannot advance a finished episode")
    if state.t >= state.length:
        raise UsageError("cannot advance past the end of the question")
    t = state.t + 1
    return replace(
        state,
        t=t,
        prev_belief=state.belief,
        belief=_draw_belief(t, state.length, state.answer, config, rng),
    )


def belief_correct(state: QuizState) -> bool:
    return int(np.argmax(state.belief)) == state.answer


def step(
    state: QuizState,
    action: int,
    config: QuizConfig,
    rng: np.random.Generator,
) -> Tuple[QuizState, float, bool, Optional[BuzzOutcome]]:
    """One decision point. Within a step the agent's buzz resolves first,
    then the opponent's scheduled buzz, then the next word is revealed. A
    wrong buzz locks that side out and play continues; the question running
    out with no correct buzz ends the episode with no further reward."""
    if state.done:
        raise UsageError("cannot step a finished episode")
    reward = 0.0
    outcome = None

    if action == BUZZ and not state.agent_locked:
        if belief_correct(state):
            reward = config.reward_correct
            outcome = BuzzOutcome("agent", True, state.t, reward)
            return replace(state, done=True), reward, True, outcome
        reward = config.reward_wrong
        state = replace(state, agent_locked=True)
        outcome = BuzzOutcome("agent", False, state.t, reward)

    if not state.opponent_locked and state.t == state.opponent_buzz_pos:
        if state.opponent_correct:
            reward += config.reward_opponent_correct
            outcome = BuzzOutcome("opponent", True, state.t, config.reward_opponent_correct)
            return replace(state, done=True), reward, True, outcome
        state = replace(state, opponent_locked=True)

    if state.t >= state.length:
        return replace(state, done=True), reward, True, outcome
    return advance_belief(state, config, rng), reward, False, outcome


def featurize(state: QuizState) -> np.ndarray:
    """Current and previous belief vectors, the fraction of the question
    revealed, and whether the agent has already buzzed wrong."""
    return np.concatenate([
        state.belief,
        state.prev_belief,
        [state.t / state.length, 1.0 if state.agent_locked else 0.0],
    ])


def opponent_features(profile: OpponentProfile) -> np.ndarray:
    """Three features: (log-scaled) games played, historical mean buzz
    fraction, historical error rate."""
    return np.array([
        math.log1p(profile.games) / 10.0,
        profile.historical_buzz_frac,
        profile.historical_error_rate,
    ])


def opponent_type(profile: OpponentProfile) -> int:
    """Quartile (1-4) of the historical mean buzz fraction; boundary values
    fall to the lower class."""
    frac = profile.historical_buzz_frac
    return 1 + sum(frac > b for b in (0.25, 0.5, 0.75))


def action_supervision_target(t: int, buzz_position: int) -> float:
    """How far along the opponent is toward its buzz: min(1, t / position)."""
    if buzz_position < 1:
        raise UsageError("buzz position must be at least 1")
    return min(1.0, t / buzz_position)


def dqnself_reward(buzz: bool, prediction_correct: bool, config: QuizConfig = DEFAULT_QUIZ_CONFIG) -> float:
    """Shaped immediate reward for the opponent-free baseline."""
    pair = config.self_reward_correct if prediction_correct else config.self_reward_wrong
    return pair[0] if buzz else pair[1]


@dataclass
class StepRecord:
    t: int
    belief_was_correct: bool
    agent_action: int
    agent_had_buzzed: bool  # before this decision


@dataclass
class EpisodeTrace:
    steps: List[StepRecord] = field(default_factory=list)
    total_reward: float = 0.0
    agent_buzzed: bool = False
    agent_buzz_correct: bool = False
    completed: bool = False


def score_episode(trace: EpisodeTrace) -> Tuple[float, bool, bool]:
    """Episode reward plus the two error indicators: rush (buzzed and was
    wrong) and miss (never buzzed correctly although, at some decision before
    the deciding event, the belief argmax was already the true answer and
    the agent had not yet buzzed)."""
    if not trace.completed:
        raise UsageError("cannot score an incomplete episode trace")
    rush = trace.agent_buzzed and not trace.agent_buzz_correct
    miss = False
    if not trace.agent_buzz_correct:
        miss = any(r.belief_was_correct and not r.agent_had_buzzed for r in trace.steps)
    return trace.total_reward, rush, miss
