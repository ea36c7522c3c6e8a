"""Online dialogue-act planner with nested rollout policy adaptation."""

from .core import (
    ActionSpace,
    Dataset,
    DialogueAct,
    DialogueState,
    NrpaParams,
    Policy,
    RolloutResult,
    ScenarioConfig,
    Speaker,
    Terminal,
    Utterance,
    initial_state,
    sample_action,
    softmax_probs,
    uniform_policy,
)
from .reward import EnvSignal, RewardSpec, SignalKind, classify_terminal, evaluate
from .search import SearchStats, adapt, nrpa, plan_next_act, playout

__version__ = "0.1.0"

__all__ = [
    "ActionSpace",
    "Dataset",
    "DialogueAct",
    "DialogueState",
    "EnvSignal",
    "NrpaParams",
    "Policy",
    "RewardSpec",
    "RolloutResult",
    "ScenarioConfig",
    "SearchStats",
    "SignalKind",
    "Speaker",
    "Terminal",
    "Utterance",
    "adapt",
    "classify_terminal",
    "evaluate",
    "initial_state",
    "nrpa",
    "plan_next_act",
    "playout",
    "sample_action",
    "softmax_probs",
    "uniform_policy",
]
