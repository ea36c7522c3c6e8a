"""Deterministic table-driven environment, used as a test oracle.

Transitions are keyed by (abstract state key, act id). The default key is
the comma-joined act sequence played so far, which makes the table a tree
over act sequences. Entries may carry stochastic branches whose outcome is
resolved by the seeded search RNG, so reruns stay reproducible.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..core import (
    ActionSpace,
    Dataset,
    DialogueState,
    ScenarioConfig,
    Speaker,
    InvariantError,
    Utterance,
)
from ..reward import EnvSignal, SignalKind
from . import Environment


class ScriptedScenarioError(InvariantError):
    """The transition table is inconsistent or has a hole."""


@dataclass(frozen=True)
class Branch:
    probability: float
    user_text: str
    signal: SignalKind
    deal_price: float | None = None


@dataclass(frozen=True)
class Entry:
    """Outcome of playing one act from one abstract state."""

    user_text: str = ""
    signal: SignalKind = SignalKind.USER_ONGOING
    sys_text: str | None = None
    deal_price: float | None = None
    branches: tuple[Branch, ...] = ()

    def resolve(self, rng: random.Random) -> tuple[str, SignalKind, float | None]:
        if not self.branches:
            return self.user_text, self.signal, self.deal_price
        draw = rng.random()
        acc = 0.0
        for branch in self.branches:
            acc += branch.probability
            if draw < acc:
                return branch.user_text, branch.signal, branch.deal_price
        last = self.branches[-1]
        return last.user_text, last.signal, last.deal_price


StateKeyFn = Callable[[DialogueState], str]


def act_sequence_key(state: DialogueState) -> str:
    return ",".join(state.system_acts())


@dataclass
class ScriptedScenario:
    """Transition table plus fallbacks.

    Lookup order for (key, act): the explicit table, then the per-act
    default, then the global default. A missing pair with no fallback is a
    load-time error for every reachable state.
    """

    scenario: ScenarioConfig
    transitions: dict[str, dict[str, Entry]]
    act_defaults: dict[str, Entry] = field(default_factory=dict)
    default: Entry | None = None
    solved_keywords: tuple[str, ...] = ()
    state_key_fn: StateKeyFn = act_sequence_key

    def __post_init__(self) -> None:
        self._check_branches()
        if self.state_key_fn is act_sequence_key:
            self._check_reachable()

    def _check_branches(self) -> None:
        for key, per_act in self.transitions.items():
            for act_id, entry in per_act.items():
                if entry.branches:
                    total = sum(b.probability for b in entry.branches)
                    if abs(total - 1.0) > 1e-9:
                        raise ScriptedScenarioError(
                            f"branch probabilities at ({key!r}, {act_id!r}) "
                            f"sum to {total}, expected 1"
                        )

    def _check_reachable(self) -> None:
        """Every reachable (key, act) pair needs an entry unless a default exists."""
        if self.default is not None:
            return
        act_ids = self.scenario.action_space.ids()
        queue: deque[tuple[str, int]] = deque([("", 0)])
        seen = {""}
        while queue:
            key, depth = queue.popleft()
            if depth >= self.scenario.max_turns:
                continue
            per_act = self.transitions.get(key)
            for act_id in act_ids:
                entry = per_act.get(act_id) if per_act else None
                if entry is None:
                    entry = self.act_defaults.get(act_id)
                if entry is None:
                    raise ScriptedScenarioError(
                        f"no transition for state key {key!r} and act {act_id!r}"
                    )
                outcomes = entry.branches or (entry,)
                if any(o.signal is SignalKind.USER_ONGOING for o in outcomes):
                    child = f"{key},{act_id}" if key else act_id
                    if child not in seen:
                        seen.add(child)
                        queue.append((child, depth + 1))

    def entry_for(self, key: str, act_id: str) -> Entry:
        per_act = self.transitions.get(key)
        if per_act is not None and act_id in per_act:
            return per_act[act_id]
        if act_id in self.act_defaults:
            return self.act_defaults[act_id]
        if self.default is not None:
            return self.default
        raise ScriptedScenarioError(
            f"no transition for state key {key!r} and act {act_id!r}"
        )


class ScriptedEnvironment(Environment):
    def __init__(self, script: ScriptedScenario):
        self.script = script
        self.scenario = script.scenario

    def _generate(self, state, act_id, rng):
        self.scenario.action_space.index_of(act_id)  # reject unknown acts
        key = self.script.state_key_fn(state)
        entry = self.script.entry_for(key, act_id)
        user_text, signal_kind, deal_price = entry.resolve(rng)
        sys_text = entry.sys_text
        if sys_text is None:
            sys_text = self.scenario.action_space.act(act_id).label
        return sys_text, user_text, EnvSignal(signal_kind, deal_price=deal_price)

    def system_utterance(self, state, act_id, rng):
        key = self.script.state_key_fn(state)
        entry = self.script.entry_for(key, act_id)
        if entry.sys_text is not None:
            return entry.sys_text
        return self.scenario.action_space.act(act_id).label

    def classify_user_message(self, state, rng):
        """Keyword match when configured; otherwise the committed entry's signal."""
        latest = state.history[-1] if state.history else None
        if latest is not None and latest.speaker is Speaker.USER and self.script.solved_keywords:
            text = latest.text.lower()
            if any(kw.lower() in text for kw in self.script.solved_keywords):
                return EnvSignal(SignalKind.USER_SOLVED)
            return EnvSignal(SignalKind.USER_ONGOING)
        acts = state.system_acts()
        if not acts:
            return EnvSignal(SignalKind.USER_ONGOING)
        prefix_state_key = ",".join(acts[:-1])
        entry = self.script.entry_for(prefix_state_key, acts[-1])
        _, kind, deal_price = entry.resolve(rng)
        return EnvSignal(kind, deal_price=deal_price)


def _entry_from_json(doc: dict) -> Entry:
    branches = tuple(
        Branch(
            probability=b["probability"],
            user_text=b.get("user_text", ""),
            signal=SignalKind(b["signal"]),
            deal_price=b.get("deal_price"),
        )
        for b in doc.get("branches", [])
    )
    return Entry(
        user_text=doc.get("user_text", ""),
        signal=SignalKind(doc.get("signal", "UserOngoing")),
        sys_text=doc.get("sys_text"),
        deal_price=doc.get("deal_price"),
        branches=branches,
    )


def load_scripted_scenario(
    path: str | Path, action_space: ActionSpace | None = None
) -> ScriptedScenario:
    """Read a scripted scenario JSON file.

    The action space may be inlined under "action_space" or supplied by the
    caller (e.g. resolved from a separate file by the run config).
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if action_space is None:
        if "action_space" not in doc:
            raise ScriptedScenarioError(f"{path}: no action space inline or supplied")
        action_space = ActionSpace.from_json_dict(doc["action_space"])
    opening = tuple(Utterance.from_json_dict(u) for u in doc.get("opening", ()))
    scenario = ScenarioConfig(
        dataset=Dataset(doc.get("dataset", action_space.dataset.value)),
        scenario_id=doc.get("id", path.stem),
        action_space=action_space,
        max_turns=doc.get("max_turns", 10),
        slots=doc.get("slots", {}),
        opening=opening,
        notes=doc.get("notes", ""),
    )
    transitions = {
        key: {act_id: _entry_from_json(entry) for act_id, entry in per_act.items()}
        for key, per_act in doc.get("transitions", {}).items()
    }
    act_defaults = {
        act_id: _entry_from_json(entry)
        for act_id, entry in doc.get("act_defaults", {}).items()
    }
    default = _entry_from_json(doc["default"]) if "default" in doc else None
    return ScriptedScenario(
        scenario=scenario,
        transitions=transitions,
        act_defaults=act_defaults,
        default=default,
        solved_keywords=tuple(doc.get("solved_keywords", ())),
    )
