"""Domain types for goal-oriented dialogue planning plus the policy math.

A dialogue is an alternating system/user utterance history bound to a
scenario. The planner's policy is a single flat weight vector over the
scenario's dialogue-act set; act probabilities are the softmax of those
weights. Index-to-act-id mapping is owned by the ActionSpace and travels
with every serialized policy artifact.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
import numpy as np

from .kernels import sample_index as _kernel_sample
from .kernels import softmax as _kernel_softmax

# Adapted weights are clamped to this magnitude; exp(+/-50) still has ample
# headroom in float64 even after max-subtraction is applied.
WEIGHT_CLAMP = 50.0


class Dataset(str, Enum):
    ESCONV = "ESConv"
    CIMA = "CIMA"
    CRAIGSLIST = "CraigslistBargain"
    P4G = "P4G"


class Speaker(str, Enum):
    SYSTEM = "System"
    USER = "User"


class Terminal(str, Enum):
    ONGOING = "Ongoing"
    SOLVED = "Solved"
    FAILED = "Failed"
    TURN_BUDGET = "TurnBudgetExhausted"


class InvariantError(ValueError):
    """A domain object violated one of its declared invariants."""


@dataclass(frozen=True)
class DialogueAct:
    """One discrete strategy the system can pick for its next utterance."""

    id: str
    label: str
    prompt_text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise InvariantError("dialogue act id must be nonempty")
        if not self.prompt_text:
            raise InvariantError(f"act {self.id!r}: prompt_text must be nonempty")


@dataclass(frozen=True)
class ActionSpace:
    """Ordered act set for one dataset; owns the index <-> id mapping."""

    dataset: Dataset
    acts: tuple[DialogueAct, ...]
    notes: str = ""

    def __post_init__(self) -> None:
        if len(self.acts) < 2:
            raise InvariantError("action space needs at least 2 acts")
        ids = [a.id for a in self.acts]
        if len(set(ids)) != len(ids):
            raise InvariantError(f"duplicate act ids in {self.dataset.value} space")
        object.__setattr__(self, "_index", {a.id: i for i, a in enumerate(self.acts)})

    def __len__(self) -> int:
        return len(self.acts)

    def ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.acts)

    def index_of(self, act_id: str) -> int:
        try:
            return self._index[act_id]  # type: ignore[attr-defined]
        except KeyError:
            raise InvariantError(f"unknown act id {act_id!r} for {self.dataset.value}") from None

    def act(self, act_id: str) -> DialogueAct:
        return self.acts[self.index_of(act_id)]

    def to_json_dict(self) -> dict:
        doc = {
            "dataset": self.dataset.value,
            "acts": [
                {"id": a.id, "label": a.label, "prompt_text": a.prompt_text}
                for a in self.acts
            ],
        }
        if self.notes:
            doc["notes"] = self.notes
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ActionSpace":
        acts = tuple(
            DialogueAct(a["id"], a.get("label", a["id"]), a["prompt_text"])
            for a in doc["acts"]
        )
        return cls(Dataset(doc["dataset"]), acts, notes=doc.get("notes", ""))

    @classmethod
    def load(cls, path: str | Path) -> "ActionSpace":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class Utterance:
    """One message in the history. System turns always carry their act."""

    speaker: Speaker
    text: str
    turn_index: int
    act: str | None = None

    def __post_init__(self) -> None:
        if (self.speaker is Speaker.SYSTEM) != (self.act is not None):
            raise InvariantError("act must be present exactly on System utterances")
        if self.turn_index < 0:
            raise InvariantError("turn_index must be nonnegative")

    def to_json_dict(self) -> dict:
        return {
            "speaker": self.speaker.value,
            "text": self.text,
            "turn_index": self.turn_index,
            "act": self.act,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Utterance":
        return cls(Speaker(doc["speaker"]), doc["text"], doc["turn_index"], doc.get("act"))


@dataclass(frozen=True)
class ScenarioConfig:
    """A concrete task instance: slots, turn budget, act set, opening."""

    dataset: Dataset
    scenario_id: str
    action_space: ActionSpace
    max_turns: int
    slots: dict = field(default_factory=dict)
    opening: tuple[Utterance, ...] = ()
    notes: str = ""

    def __post_init__(self) -> None:
        if self.max_turns < 1:
            raise InvariantError(f"scenario {self.scenario_id}: max_turns must be >= 1")
        if self.dataset is Dataset.CRAIGSLIST:
            buyer = self.slots.get("buyer_target_price")
            seller = self.slots.get("seller_target_price")
            if buyer is not None and seller is not None:
                if float(buyer) >= float(seller):
                    raise InvariantError(
                        f"scenario {self.scenario_id}: buyer target must be "
                        "below seller target"
                    )
        if self.opening:
            if self.opening[0].speaker is not Speaker.SYSTEM:
                raise InvariantError(f"scenario {self.scenario_id}: opening must start with the system")
            if self.opening[0].turn_index != 0:
                raise InvariantError(f"scenario {self.scenario_id}: opening system turn has index 0")


@dataclass(frozen=True)
class DialogueState:
    """Immutable dialogue snapshot; transitions return new states."""

    scenario: ScenarioConfig
    history: tuple[Utterance, ...]
    turn_count: int
    terminal: Terminal = Terminal.ONGOING

    def with_system_turn(self, act_id: str, text: str) -> "DialogueState":
        if self.terminal is not Terminal.ONGOING:
            raise InvariantError("cannot extend a terminal dialogue")
        turn = self.turn_count + 1
        utt = Utterance(Speaker.SYSTEM, text, turn, act=act_id)
        return replace(self, history=self.history + (utt,), turn_count=turn)

    def with_user_reply(self, text: str) -> "DialogueState":
        if self.terminal is not Terminal.ONGOING:
            raise InvariantError("cannot extend a terminal dialogue")
        utt = Utterance(Speaker.USER, text, self.turn_count)
        return replace(self, history=self.history + (utt,))

    def finished(self, terminal: Terminal) -> "DialogueState":
        return replace(self, terminal=terminal)

    @property
    def last_speaker(self) -> Speaker | None:
        return self.history[-1].speaker if self.history else None

    def system_acts(self) -> tuple[str, ...]:
        """Act ids of completed system turns, opener excluded."""
        return tuple(
            u.act for u in self.history
            if u.speaker is Speaker.SYSTEM and u.turn_index >= 1 and u.act is not None
        )

    def validate(self) -> None:
        """Check alternation and the turn-count bookkeeping."""
        for prev, cur in zip(self.history, self.history[1:]):
            if prev.speaker is cur.speaker:
                raise InvariantError("history must alternate System/User")
        n_turns = sum(
            1 for u in self.history
            if u.speaker is Speaker.SYSTEM and u.turn_index >= 1
        )
        if n_turns != self.turn_count:
            raise InvariantError(f"turn_count {self.turn_count} != system turns {n_turns}")


def initial_state(scenario: ScenarioConfig) -> DialogueState:
    """Fresh dialogue seeded with the scenario's opening exchange."""
    return DialogueState(scenario=scenario, history=scenario.opening, turn_count=0)


@dataclass
class Policy:
    """Flat weight vector over an action space, softmax-normalized on use.

    The only mutable core type; the adaptation step returns fresh vectors,
    so copies are cheap and safe to share across searches.
    """

    space: ActionSpace
    weights: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (len(self.space),):
            raise InvariantError(
                f"policy has {self.weights.shape[0] if self.weights.ndim else 0} weights "
                f"for {len(self.space)} acts"
            )
        if not np.all(np.isfinite(self.weights)):
            raise InvariantError("policy weights must all be finite")

    def copy(self) -> "Policy":
        return Policy(self.space, self.weights.copy())

    def to_json_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "act_ids": list(self.space.ids()),
        }


def uniform_policy(space: ActionSpace) -> Policy:
    """All-zero weights: the uniform softmax starting point."""
    return Policy(space, np.zeros(len(space), dtype=np.float64))


def softmax_probs(policy: Policy) -> np.ndarray:
    """Act probabilities P(a) = exp(w_a) / sum_a' exp(w_a')."""
    if len(policy.weights) == 0:
        raise InvariantError("cannot softmax an empty weight vector")
    return _kernel_softmax(policy.weights)


def sample_action(policy: Policy, rng: random.Random) -> str:
    """Draw one act id from the policy's softmax distribution."""
    if len(policy.weights) == 0:
        raise InvariantError("cannot sample from an empty weight vector")
    idx = _kernel_sample(policy.weights, rng.random())
    return policy.space.acts[idx].id


@dataclass(frozen=True)
class RolloutResult:
    """Outcome of one simulated dialogue continuation."""

    score: float
    sequence: tuple[str, ...]
    final_state: DialogueState


@dataclass(frozen=True)
class NrpaParams:
    """Search hyperparameters.

    ``early_stopping`` is the number of consecutive non-improving
    iterations tolerated once ``min_iterations`` have run;
    ``max_playout_steps`` caps system turns simulated per playout.
    """

    level: int = 1
    iterations: int = 10
    alpha: float = 1.0
    early_stopping: int = 3
    min_iterations: int = 3
    max_playout_steps: int = 10
    rng_seed: int = 0
    stall_stop_enabled: bool = True
    solved_stop_enabled: bool = True
    root_selection: str = "best_sequence_head"
    adapt_from_updated: bool = False

    def __post_init__(self) -> None:
        if self.level < 1:
            raise InvariantError("level must be >= 1")
        if self.iterations < 1:
            raise InvariantError("iterations must be >= 1")
        if self.alpha <= 0:
            raise InvariantError("alpha must be positive")
        if self.early_stopping < 1:
            raise InvariantError("early_stopping must be >= 1")
        if self.min_iterations < 1 or self.min_iterations > self.iterations:
            raise InvariantError("need 1 <= min_iterations <= iterations")
        if self.max_playout_steps < 1:
            raise InvariantError("max_playout_steps must be >= 1")
        if self.root_selection not in ("best_sequence_head", "policy_argmax"):
            raise InvariantError(f"unknown root_selection {self.root_selection!r}")

    def to_json_dict(self) -> dict:
        return {
            "level": self.level,
            "iterations": self.iterations,
            "alpha": self.alpha,
            "early_stopping": self.early_stopping,
            "min_iterations": self.min_iterations,
            "max_playout_steps": self.max_playout_steps,
            "rng_seed": self.rng_seed,
            "stall_stop_enabled": self.stall_stop_enabled,
            "solved_stop_enabled": self.solved_stop_enabled,
            "root_selection": self.root_selection,
            "adapt_from_updated": self.adapt_from_updated,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "NrpaParams":
        known = {f: doc[f] for f in cls.__dataclass_fields__ if f in doc}
        return cls(**known)
