"""Dialogue environments: the transition function behind the planner.

An environment advances a state by one exchange (one system utterance with
its act, then at most one user reply) and reports what it observed about
the user's status. States are immutable, so any number of lookahead
playouts can branch from a live state without touching it.
"""

from __future__ import annotations

import random
from abc import ABC, abstractmethod

from ..core import DialogueState, ScenarioConfig, InvariantError, Terminal
from ..reward import EnvSignal, SignalKind, classify_terminal


class EnvStepError(RuntimeError):
    """The environment could not produce a transition (backend failure)."""


class Environment(ABC):
    """Behavioral contract shared by the scripted oracle and the LLM env."""

    scenario: ScenarioConfig

    def step(
        self, state: DialogueState, act_id: str, rng: random.Random
    ) -> tuple[DialogueState, EnvSignal]:
        """Advance by one exchange and classify the resulting state."""
        if state.terminal is not Terminal.ONGOING:
            raise InvariantError("step on a terminal state is rejected")
        sys_text, user_text, signal = self._generate(state, act_id, rng)
        nxt = state.with_system_turn(act_id, sys_text)
        if user_text is not None:
            nxt = nxt.with_user_reply(user_text)
        terminal = classify_terminal(nxt, signal.kind, self.scenario.max_turns)
        if terminal is not Terminal.ONGOING:
            nxt = nxt.finished(terminal)
        return nxt, signal

    @abstractmethod
    def _generate(
        self, state: DialogueState, act_id: str, rng: random.Random
    ) -> tuple[str, str | None, EnvSignal]:
        """Produce (system text, optional user reply, signal) for one step."""

    @abstractmethod
    def system_utterance(
        self, state: DialogueState, act_id: str, rng: random.Random
    ) -> str:
        """System side only; used when a real human plays the user role."""

    @abstractmethod
    def classify_user_message(
        self, state: DialogueState, rng: random.Random
    ) -> EnvSignal:
        """Judge the latest user utterance (live sessions)."""


__all__ = [
    "EnvSignal",
    "EnvStepError",
    "Environment",
    "SignalKind",
]
