"""Nested rollout policy adaptation over a dialogue environment.

Level 0 is a plain softmax-guided playout. Each level above runs an
iteration loop: recurse one level down on a copy of the current policy,
track the best-scoring rollout seen (strict improvement only, so ties keep
the incumbent), and shift the policy toward that best act sequence after
every iteration. The recursion receives a copy so the caller's policy is
only ever changed by its own adaptation step.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DialogueState,
    NrpaParams,
    Policy,
    RolloutResult,
    InvariantError,
    Terminal,
    WEIGHT_CLAMP,
    sample_action,
    softmax_probs,
    uniform_policy,
)
from .envs import Environment, EnvStepError
from .kernels import adapt_weights
from .reward import RewardSpec, evaluate


@dataclass
class SearchStats:
    """Observability for one search: loop counts and the best find."""

    playouts_executed: int = 0
    best_score: float = float("-inf")
    best_sequence: tuple[str, ...] = ()
    iterations_per_level: list[int] = field(default_factory=list)
    early_stopped_per_level: list[bool] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "playouts_executed": self.playouts_executed,
            "best_score": self.best_score,
            "best_sequence": list(self.best_sequence),
            "iterations_per_level": list(self.iterations_per_level),
            "early_stopped_per_level": list(self.early_stopped_per_level),
        }


class SearchAbort(RuntimeError):
    """Environment failure mid-search; carries whatever was gathered so far."""

    def __init__(
        self,
        message: str,
        stats: SearchStats | None = None,
        partial_sequence: tuple[str, ...] = (),
    ):
        super().__init__(message)
        self.stats = stats
        self.partial_sequence = partial_sequence


def playout(
    state: DialogueState,
    policy: Policy,
    env: Environment,
    params: NrpaParams,
    rng: random.Random,
    reward_spec: RewardSpec | None = None,
) -> RolloutResult:
    """Simulate to a terminal (or the playout horizon) and score the result.

    A rollout cut off by the horizon is scored as budget-exhausted: during
    lookahead the horizon is the effective dialogue budget.
    """
    spec = reward_spec if reward_spec is not None else RewardSpec()
    if state.terminal is not Terminal.ONGOING:
        raise InvariantError("playout requires an ongoing state")
    sequence: list[str] = []
    current = state
    while current.terminal is Terminal.ONGOING and len(sequence) < params.max_playout_steps:
        act_id = sample_action(policy, rng)
        try:
            current, _signal = env.step(current, act_id, rng)
        except EnvStepError as exc:
            raise SearchAbort(str(exc), partial_sequence=tuple(sequence)) from exc
        sequence.append(act_id)
    if current.terminal is Terminal.ONGOING:
        current = current.finished(Terminal.TURN_BUDGET)
    return RolloutResult(
        score=evaluate(current, spec),
        sequence=tuple(sequence),
        final_state=current,
    )


def adapt(
    policy: Policy,
    sequence: tuple[str, ...] | list[str],
    alpha: float,
    state: DialogueState | None = None,
    from_updated: bool = False,
) -> Policy:
    """Return a policy shifted toward the given act sequence.

    Per step: every act loses alpha * P(act) while the chosen act gains a
    flat alpha, a net gain of alpha * (1 - P(chosen)). Probabilities are
    taken from the incoming policy for the whole sequence; pass
    ``from_updated`` for the variant that recomputes them from the evolving
    vector. The ``state`` argument is accepted for signature parity but a
    flat act-indexed policy has no use for it, so no environment calls
    happen here.
    """
    del state
    try:
        indices = np.array(
            [policy.space.index_of(a) for a in sequence], dtype=np.int64
        )
    except InvariantError as exc:
        raise InvariantError(f"adapt got a corrupted sequence: {exc}") from exc
    new_weights = adapt_weights(
        policy.weights, indices, alpha, from_updated, WEIGHT_CLAMP
    )
    return Policy(policy.space, new_weights)


def _solved_score_floor(
    state: DialogueState, params: NrpaParams, spec: RewardSpec
) -> float:
    """Lowest score any solved rollout from this state can achieve."""
    return spec.success_value - spec.turn_penalty * (
        state.turn_count + params.max_playout_steps
    )


def _nrpa(
    level: int,
    policy: Policy,
    state: DialogueState,
    env: Environment,
    params: NrpaParams,
    spec: RewardSpec,
    rng: random.Random,
    stats: SearchStats,
) -> tuple[RolloutResult, Policy]:
    if level == 0:
        result = playout(state, policy, env, params, rng, spec)
        stats.playouts_executed += 1
        return result, policy
    best: RolloutResult | None = None
    last_improvement = 0
    solved_floor = _solved_score_floor(state, params, spec)
    for iteration in range(1, params.iterations + 1):
        result, _ = _nrpa(level - 1, policy.copy(), state, env, params, spec, rng, stats)
        if best is None or result.score > best.score:
            best = result
            last_improvement = iteration
        policy = adapt(
            policy, best.sequence, params.alpha, from_updated=params.adapt_from_updated
        )
        stats.iterations_per_level[level - 1] += 1
        if iteration >= params.min_iterations:
            # The stall counter only starts once the minimum iterations have
            # run, so a level stops no sooner than min_iterations + patience.
            stalled = (
                params.stall_stop_enabled
                and iteration - max(last_improvement, params.min_iterations)
                >= params.early_stopping
            )
            solved = params.solved_stop_enabled and best.score >= solved_floor
            if stalled or solved:
                stats.early_stopped_per_level[level - 1] = True
                break
    assert best is not None
    return best, policy


def nrpa(
    level: int,
    policy: Policy,
    state: DialogueState,
    env: Environment,
    params: NrpaParams,
    rng: random.Random,
    reward_spec: RewardSpec | None = None,
) -> tuple[RolloutResult, SearchStats]:
    """Run the full nested search and report stats alongside the best result."""
    if level < 0:
        raise InvariantError("level must be >= 0")
    if state.terminal is not Terminal.ONGOING:
        raise InvariantError("search requires an ongoing state")
    spec = reward_spec if reward_spec is not None else RewardSpec()
    stats = SearchStats(
        iterations_per_level=[0] * level,
        early_stopped_per_level=[False] * level,
    )
    try:
        best, _ = _nrpa(level, policy, state, env, params, spec, rng, stats)
    except SearchAbort as exc:
        exc.stats = stats
        raise
    stats.best_score = best.score
    stats.best_sequence = best.sequence
    return best, stats


def plan_next_act(
    state: DialogueState,
    env: Environment,
    params: NrpaParams,
    rng: random.Random,
    reward_spec: RewardSpec | None = None,
) -> tuple[str, SearchStats]:
    """Pick the next system act for a live turn.

    Starts from a fresh zero policy every call and commits only the head of
    the best found sequence (receding horizon). ``policy_argmax`` instead
    commits the top-level policy's highest-weight act after adaptation.
    """
    policy = uniform_policy(state.scenario.action_space)
    spec = reward_spec if reward_spec is not None else RewardSpec()
    if state.terminal is not Terminal.ONGOING:
        raise InvariantError("cannot plan from a terminal state")
    stats = SearchStats(
        iterations_per_level=[0] * params.level,
        early_stopped_per_level=[False] * params.level,
    )
    try:
        best, final_policy = _nrpa(
            params.level, policy, state, env, params, spec, rng, stats
        )
    except SearchAbort as exc:
        exc.stats = stats
        raise
    stats.best_score = best.score
    stats.best_sequence = best.sequence
    if not best.sequence:
        raise SearchAbort("search produced an empty sequence", stats=stats)
    if params.root_selection == "policy_argmax":
        probs = softmax_probs(final_policy)
        chosen = final_policy.space.acts[int(np.argmax(probs))].id
    else:
        chosen = best.sequence[0]
    return chosen, stats
