"""Playout, adaptation, nested search, and root act selection."""

from __future__ import annotations

import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialoplan.core import (
    NrpaParams,
    Policy,
    InvariantError,
    Terminal,
    initial_state,
    softmax_probs,
    uniform_policy,
)
from dialoplan.envs import EnvStepError
from dialoplan.reward import RewardSpec, evaluate
from dialoplan.search import SearchAbort, adapt, nrpa, plan_next_act, playout

from conftest import ONGOING, SOLVED, make_space, scripted_env

SPEC = RewardSpec()


def stopless(**kw):
    base = dict(stall_stop_enabled=False, solved_stop_enabled=False)
    base.update(kw)
    return NrpaParams(**base)


class TestPlayout:
    def test_immediate_solve_scores_one_turn(self, solve_env, fresh_state):
        policy = Policy(solve_env.scenario.action_space, np.array([50.0, -50.0]))
        result = playout(fresh_state, policy, solve_env, NrpaParams(), random.Random(0), SPEC)
        assert result.sequence == ("solve",)
        assert result.score == 1 - 0.001 * 1
        assert result.final_state.terminal is Terminal.SOLVED

    def test_budget_exhaustion(self, flat_env):
        state = initial_state(flat_env.scenario)
        params = NrpaParams(max_playout_steps=10)
        result = playout(state, uniform_policy(flat_env.scenario.action_space),
                         flat_env, params, random.Random(3), SPEC)
        assert len(result.sequence) == 10
        assert result.final_state.terminal is Terminal.TURN_BUDGET
        assert result.score == evaluate(result.final_state, SPEC)

    def test_horizon_cut_counts_as_budget(self, flat_env):
        state = initial_state(flat_env.scenario)
        params = NrpaParams(max_playout_steps=2)
        result = playout(state, uniform_policy(flat_env.scenario.action_space),
                         flat_env, params, random.Random(3), SPEC)
        assert len(result.sequence) == 2
        assert result.final_state.terminal is Terminal.TURN_BUDGET

    def test_terminal_start_rejected(self, solve_env, fresh_state):
        done = fresh_state.finished(Terminal.SOLVED)
        with pytest.raises(InvariantError):
            playout(done, uniform_policy(solve_env.scenario.action_space),
                    solve_env, NrpaParams(), random.Random(0), SPEC)


class TestAdapt:
    def test_two_act_single_step(self):
        policy = uniform_policy(make_space(["a", "b"]))
        adapted = adapt(policy, ["a"], 1.0)
        assert adapted.weights == pytest.approx([0.5, -0.5], abs=1e-12)

    def test_four_act_single_step(self):
        policy = uniform_policy(make_space(["a", "b", "c", "d"]))
        adapted = adapt(policy, ["c"], 1.0)
        assert adapted.weights[2] == pytest.approx(0.75, abs=1e-12)
        for i in (0, 1, 3):
            assert adapted.weights[i] == pytest.approx(-0.25, abs=1e-12)

    def test_zero_alpha_is_identity(self):
        policy = Policy(make_space(["a", "b"]), np.array([0.3, -0.7]))
        adapted = adapt(policy, ["a", "b", "a"], 0.0)
        assert np.array_equal(adapted.weights, policy.weights)

    def test_unknown_act_is_hard_error(self):
        policy = uniform_policy(make_space(["a", "b"]))
        with pytest.raises(InvariantError, match="corrupted"):
            adapt(policy, ["a", "zzz"], 1.0)

    def test_input_policy_not_mutated(self):
        policy = uniform_policy(make_space(["a", "b"]))
        adapt(policy, ["a"], 1.0)
        assert policy.weights.tolist() == [0.0, 0.0]

    def test_probabilities_fixed_at_call_entry(self):
        # Over a multi-step sequence the subtraction always uses the incoming
        # weights, so two steps on the same act subtract the same amount.
        policy = uniform_policy(make_space(["a", "b"]))
        adapted = adapt(policy, ["a", "a"], 1.0)
        assert adapted.weights == pytest.approx([1.0, -1.0], abs=1e-12)

    def test_recompute_variant_differs_on_multistep(self):
        policy = uniform_policy(make_space(["a", "b"]))
        fixed = adapt(policy, ["a", "a"], 1.0)
        live = adapt(policy, ["a", "a"], 1.0, from_updated=True)
        assert not np.array_equal(fixed.weights, live.weights)

    def test_state_argument_is_inert(self, solve_env, fresh_state):
        policy = uniform_policy(make_space(["a", "b"]))
        with_state = adapt(policy, ["a"], 1.0, state=fresh_state)
        without = adapt(policy, ["a"], 1.0)
        assert np.array_equal(with_state.weights, without.weights)

    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(min_value=2, max_value=11),
        st.sampled_from([0.1, 1.0]),
        st.data(),
    )
    def test_single_step_net_changes(self, n, alpha, data):
        weights = np.array(
            data.draw(st.lists(
                st.floats(min_value=-5, max_value=5, allow_nan=False),
                min_size=n, max_size=n,
            ))
        )
        chosen = data.draw(st.integers(min_value=0, max_value=n - 1))
        space = make_space([f"a{i}" for i in range(n)])
        policy = Policy(space, weights)
        probs = softmax_probs(policy)
        adapted = adapt(policy, [f"a{chosen}"], alpha)
        deltas = adapted.weights - weights
        assert deltas[chosen] == pytest.approx(alpha * (1 - probs[chosen]), abs=1e-9)
        for i in range(n):
            if i != chosen:
                assert deltas[i] == pytest.approx(-alpha * probs[i], abs=1e-9)
        assert abs(deltas.sum()) < 1e-9

    @settings(max_examples=200, deadline=None)
    @given(st.data(), st.floats(min_value=0.1, max_value=2.0))
    def test_chosen_act_probability_strictly_grows(self, data, alpha):
        # Weight range kept small enough that the update cannot vanish in
        # float rounding when the chosen act is already near-certain.
        n = data.draw(st.integers(min_value=2, max_value=8))
        weights = np.array(
            data.draw(st.lists(
                st.floats(min_value=-5, max_value=5, allow_nan=False),
                min_size=n, max_size=n,
            ))
        )
        chosen = data.draw(st.integers(min_value=0, max_value=n - 1))
        space = make_space([f"a{i}" for i in range(n)])
        policy = Policy(space, weights)
        before = softmax_probs(policy)[chosen]
        after = softmax_probs(adapt(policy, [f"a{chosen}"], alpha))[chosen]
        assert after > before


class TestNrpa:
    def test_level_one_runs_exact_iteration_count(self, flat_env):
        state = initial_state(flat_env.scenario)
        params = stopless(level=1, iterations=10, max_playout_steps=3)
        _, stats = nrpa(1, uniform_policy(flat_env.scenario.action_space),
                        state, flat_env, params, random.Random(0), SPEC)
        assert stats.playouts_executed == 10
        assert stats.iterations_per_level == [10]

    @pytest.mark.parametrize("level,iterations", [(1, 10), (2, 5), (2, 10)])
    def test_simulation_count_equals_power(self, flat_env, level, iterations):
        state = initial_state(flat_env.scenario)
        params = stopless(level=level, iterations=iterations, max_playout_steps=3)
        _, stats = nrpa(level, uniform_policy(flat_env.scenario.action_space),
                        state, flat_env, params, random.Random(1), SPEC)
        assert stats.playouts_executed == iterations ** level

    def test_simulation_count_bounded_with_stops(self, solve_env, fresh_state):
        params = NrpaParams(level=2, iterations=10)
        _, stats = nrpa(2, uniform_policy(solve_env.scenario.action_space),
                        fresh_state, solve_env, params, random.Random(5), SPEC)
        assert stats.playouts_executed <= 100

    def test_early_stop_after_six_flat_iterations(self, flat_env):
        # First iteration sets the incumbent; the stall counter only starts
        # after min_iterations, so the level halts at 3 + 3 = 6.
        state = initial_state(flat_env.scenario)
        params = NrpaParams(level=1, iterations=10, early_stopping=3, min_iterations=3,
                            max_playout_steps=3)
        _, stats = nrpa(1, uniform_policy(flat_env.scenario.action_space),
                        state, flat_env, params, random.Random(0), SPEC)
        assert stats.iterations_per_level == [6]
        assert stats.early_stopped_per_level == [True]

    def test_solved_stop_halts_at_min_iterations(self, solve_env, fresh_state):
        params = NrpaParams(level=1, iterations=10, min_iterations=3,
                            stall_stop_enabled=False)
        policy = Policy(solve_env.scenario.action_space, np.array([50.0, -50.0]))
        _, stats = nrpa(1, policy, fresh_state, solve_env, params, random.Random(0), SPEC)
        assert stats.iterations_per_level == [3]
        assert stats.early_stopped_per_level == [True]

    def test_reproducible_given_seed(self, solve_env, fresh_state):
        params = NrpaParams(level=2, iterations=5, rng_seed=8)
        runs = [
            nrpa(2, uniform_policy(solve_env.scenario.action_space), fresh_state,
                 solve_env, params, random.Random(8), SPEC)
            for _ in range(2)
        ]
        assert runs[0][0].sequence == runs[1][0].sequence
        assert runs[0][0].score == runs[1][0].score
        assert runs[0][1].to_json_dict() == runs[1][1].to_json_dict()

    def test_caller_policy_object_unchanged(self, solve_env, fresh_state):
        policy = uniform_policy(solve_env.scenario.action_space)
        nrpa(2, policy, fresh_state, solve_env, stopless(level=2, iterations=3),
             random.Random(0), SPEC)
        assert policy.weights.tolist() == [0.0, 0.0]

    def test_best_score_is_max_over_playouts(self, solve_env, fresh_state):
        scores = []
        original_step = solve_env.step

        def recording_step(state, act, rng):
            return original_step(state, act, rng)

        solve_env.step = recording_step
        best, stats = nrpa(1, uniform_policy(solve_env.scenario.action_space),
                           fresh_state, solve_env, stopless(iterations=10),
                           random.Random(4), SPEC)
        solve_env.step = original_step
        assert best.score == stats.best_score
        assert stats.best_sequence == best.sequence

    def test_terminal_state_rejected(self, solve_env, fresh_state):
        done = fresh_state.finished(Terminal.SOLVED)
        with pytest.raises(InvariantError):
            nrpa(1, uniform_policy(solve_env.scenario.action_space), done,
                 solve_env, NrpaParams(), random.Random(0), SPEC)

    def test_playout_env_failure_carries_partial_sequence(self, flat_env):
        state = initial_state(flat_env.scenario)
        calls = {"n": 0}
        original = flat_env._generate

        def failing(st, act, rng):
            calls["n"] += 1
            if calls["n"] > 2:
                raise EnvStepError("backend unreachable")
            return original(st, act, rng)

        flat_env._generate = failing
        with pytest.raises(SearchAbort) as exc_info:
            playout(state, uniform_policy(flat_env.scenario.action_space),
                    flat_env, NrpaParams(max_playout_steps=5), random.Random(0), SPEC)
        flat_env._generate = original
        assert len(exc_info.value.partial_sequence) == 2

    def test_env_failure_aborts_with_partial_stats(self, solve_env, fresh_state):
        calls = {"n": 0}
        original = solve_env._generate

        def failing(state, act, rng):
            calls["n"] += 1
            if calls["n"] > 7:
                raise EnvStepError("backend unreachable")
            return original(state, act, rng)

        solve_env._generate = failing
        with pytest.raises(SearchAbort) as exc_info:
            nrpa(1, uniform_policy(solve_env.scenario.action_space), fresh_state,
                 solve_env, stopless(iterations=10, max_playout_steps=4),
                 random.Random(9), SPEC)
        solve_env._generate = original
        assert exc_info.value.stats is not None
        assert exc_info.value.stats.playouts_executed > 0


class TestPlanNextAct:
    def only_question_env(self):
        space = make_space(["question", "chat", "close"])
        return scripted_env(
            space,
            transitions={
                "question": {"question": SOLVED},
            },
            default=ONGOING,
            max_turns=4,
        )

    def test_unique_solving_act_is_chosen(self):
        env = self.only_question_env()
        # Independent check: enumerate all act sequences up to the horizon
        # and confirm only question-first sequences can solve.
        space = env.scenario.action_space
        solving_first_acts = set()
        for length in range(1, 5):
            for seq in itertools.product(space.ids(), repeat=length):
                state = initial_state(env.scenario)
                for act in seq:
                    if state.terminal is not Terminal.ONGOING:
                        break
                    state, _ = env.step(state, act, random.Random(0))
                if state.terminal is Terminal.SOLVED:
                    solving_first_acts.add(seq[0])
        assert solving_first_acts == {"question"}

        # Any solved rollout necessarily starts with question, so the planner
        # returns it whenever the level-2 search finds the solve at all.
        state = initial_state(env.scenario)
        for seed in range(5):
            act, _ = plan_next_act(state, env, NrpaParams(level=2, iterations=10,
                                                          max_playout_steps=4),
                                   random.Random(seed), SPEC)
            assert act == "question"

    def test_tie_keeps_first_found(self, flat_env):
        state = initial_state(flat_env.scenario)
        params = stopless(level=1, iterations=6, max_playout_steps=2)
        act_a, _ = plan_next_act(state, flat_env, params, random.Random(1), SPEC)
        act_b, _ = plan_next_act(state, flat_env, params, random.Random(1), SPEC)
        assert act_a == act_b

    def test_level_one_single_step_scenario(self, solve_env, fresh_state):
        params = stopless(level=1, iterations=10, max_playout_steps=1)
        act, stats = plan_next_act(fresh_state, solve_env, params, random.Random(2), SPEC)
        assert act == "solve"
        assert stats.best_sequence[0] == "solve"

    def test_terminal_state_is_error(self, solve_env, fresh_state):
        with pytest.raises(InvariantError):
            plan_next_act(fresh_state.finished(Terminal.SOLVED), solve_env,
                          NrpaParams(), random.Random(0), SPEC)

    def test_policy_argmax_selection(self, solve_env, fresh_state):
        params = stopless(level=1, iterations=10, root_selection="policy_argmax")
        act, _ = plan_next_act(fresh_state, solve_env, params, random.Random(3), SPEC)
        assert act == "solve"

    def test_fresh_zero_policy_each_call(self, solve_env, fresh_state):
        params = stopless(level=1, iterations=4)
        first = plan_next_act(fresh_state, solve_env, params, random.Random(6), SPEC)
        second = plan_next_act(fresh_state, solve_env, params, random.Random(6), SPEC)
        assert first == second
