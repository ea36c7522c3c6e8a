"""Terminal classification and final-state scoring.

A solved dialogue earns the success value; every completed system turn
costs a flat penalty, so shorter successful dialogues always score higher.
Unsolved dialogues keep the base value minus the same per-turn penalty.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .core import DialogueState, InvariantError, Terminal


class SignalKind(str, Enum):
    """What the environment observed about the user's latest move."""

    USER_SOLVED = "UserSolved"
    USER_ONGOING = "UserOngoing"
    DEAL_REACHED = "DealReached"
    DEAL_REJECTED = "DealRejected"


@dataclass(frozen=True)
class EnvSignal:
    """Signal kind plus negotiation extras (deal price, parse trouble)."""

    kind: SignalKind
    deal_price: float | None = None
    price_invalid: bool = False
    note: str = ""


@dataclass(frozen=True)
class RewardSpec:
    success_value: float = 1.0
    turn_penalty: float = 0.001
    unsolved_base: float = 0.0
    max_turns: int = 10

    def __post_init__(self) -> None:
        if self.turn_penalty < 0:
            raise InvariantError("turn_penalty must be >= 0")
        if self.success_value <= self.unsolved_base:
            raise InvariantError("success_value must exceed unsolved_base")
        if self.max_turns < 1:
            raise InvariantError("max_turns must be >= 1")

    def assert_orderable(self, max_turns: int | None = None) -> None:
        """Any solved outcome must outscore any unsolved one within budget."""
        budget = self.max_turns if max_turns is None else max_turns
        if self.turn_penalty * budget >= self.success_value - self.unsolved_base:
            raise InvariantError(
                "turn penalty over the full budget would let unsolved states "
                "outscore solved ones; lower turn_penalty or max_turns"
            )

    def to_json_dict(self) -> dict:
        return {
            "success_value": self.success_value,
            "turn_penalty": self.turn_penalty,
            "unsolved_base": self.unsolved_base,
            "max_turns": self.max_turns,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "RewardSpec":
        known = {f: doc[f] for f in cls.__dataclass_fields__ if f in doc}
        return cls(**known)


def evaluate(state: DialogueState, spec: RewardSpec) -> float:
    """Score a finished dialogue; rejects ongoing states."""
    if state.terminal is Terminal.ONGOING:
        raise InvariantError("cannot evaluate an ongoing dialogue")
    base = spec.success_value if state.terminal is Terminal.SOLVED else spec.unsolved_base
    return base - spec.turn_penalty * state.turn_count


def classify_terminal(
    state: DialogueState,
    signal: SignalKind,
    max_turns: int,
) -> Terminal:
    """Fold an environment signal and the turn budget into a terminal class.

    A solved signal wins even on the budget boundary; the budget check comes
    before outright rejection so an exhausted dialogue is budget-terminal.
    """
    if signal in (SignalKind.USER_SOLVED, SignalKind.DEAL_REACHED):
        return Terminal.SOLVED
    if state.turn_count >= max_turns:
        return Terminal.TURN_BUDGET
    if signal is SignalKind.DEAL_REJECTED:
        return Terminal.FAILED
    return Terminal.ONGOING
