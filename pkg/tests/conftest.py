"""Shared fixtures: tiny action spaces and scripted environments."""

from __future__ import annotations

import pytest

from dialoplan.core import (
    ActionSpace,
    Dataset,
    DialogueAct,
    ScenarioConfig,
    Speaker,
    Utterance,
    initial_state,
)
from dialoplan.envs.scripted import Entry, ScriptedEnvironment, ScriptedScenario
from dialoplan.reward import SignalKind


def make_space(ids, dataset=Dataset.ESCONV):
    return ActionSpace(
        dataset, tuple(DialogueAct(a, a.title(), f"Please {a}.") for a in ids)
    )


def make_scenario(space, max_turns=10, scenario_id="test", slots=None, dataset=None):
    return ScenarioConfig(
        dataset=dataset or space.dataset,
        scenario_id=scenario_id,
        action_space=space,
        max_turns=max_turns,
        slots=slots or {},
        opening=(
            Utterance(Speaker.SYSTEM, "Hello!", 0, act=space.acts[0].id),
            Utterance(Speaker.USER, "Hi.", 0),
        ),
    )


SOLVED = Entry(user_text="That solved it, thanks!", signal=SignalKind.USER_SOLVED)
ONGOING = Entry(user_text="Hmm, go on.", signal=SignalKind.USER_ONGOING)
REJECTED = Entry(user_text="I give up.", signal=SignalKind.DEAL_REJECTED)


def scripted_env(space, transitions, default=ONGOING, max_turns=10, act_defaults=None,
                 solved_keywords=(), scenario=None):
    scenario = scenario or make_scenario(space, max_turns=max_turns)
    script = ScriptedScenario(
        scenario=scenario,
        transitions=transitions,
        act_defaults=act_defaults or {},
        default=default,
        solved_keywords=tuple(solved_keywords),
    )
    return ScriptedEnvironment(script)


@pytest.fixture
def two_act_space():
    return make_space(["solve", "stall"])


@pytest.fixture
def solve_env(two_act_space):
    """Playing 'solve' finishes the dialogue immediately; 'stall' never does."""
    return scripted_env(
        two_act_space,
        transitions={},
        act_defaults={"solve": SOLVED, "stall": ONGOING},
    )


@pytest.fixture
def flat_env(two_act_space):
    """Nothing ever solves; every playout exhausts its budget."""
    return scripted_env(two_act_space, transitions={}, default=ONGOING)


@pytest.fixture
def fresh_state(solve_env):
    return initial_state(solve_env.scenario)
