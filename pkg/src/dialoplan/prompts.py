"""Role-play prompt templates and slot rendering.

Templates live in JSON data files, one file per dataset, so a new dataset
is a data change rather than a code change. Slot markers use the
``[slot_name]`` syntax. Rendering emits the template's fixed turns and then
maps the dialogue history into chat messages from the simulated speaker's
perspective: the system simulator sees user utterances as ``user`` messages
and its own past utterances as ``assistant`` messages, and the user
simulator sees the exact mirror.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .core import (
    ActionSpace,
    Dataset,
    DialogueAct,
    DialogueState,
    ScenarioConfig,
    Speaker,
    InvariantError,
    Utterance,
)
from .llm_client import ChatMessage


class RenderError(InvariantError):
    """A template could not be rendered (missing slot, bad pairing)."""


class PromptRole(str, Enum):
    ASSISTANT_SIM = "AssistantSim"
    USER_SIM = "UserSim"
    CRITIC = "Critic"
    JUDGE = "Judge"


@dataclass(frozen=True)
class PromptTemplate:
    dataset: Dataset
    role: PromptRole
    turns: tuple[tuple[str, str], ...]
    required_slots: frozenset[str]
    notes: str = ""


# Display names used when history is flattened to a transcript string.
SPEAKER_NAMES: dict[Dataset, tuple[str, str]] = {
    Dataset.ESCONV: ("Therapist", "Patient"),
    Dataset.CIMA: ("Teacher", "Student"),
    Dataset.CRAIGSLIST: ("Buyer", "Seller"),
    Dataset.P4G: ("Persuader", "Persuadee"),
}

_SLOT = re.compile(r"\[([a-z0-9_]+)\]")


def substitute_slots(text: str, bindings: dict[str, str]) -> str:
    def repl(match: re.Match) -> str:
        name = match.group(1)
        if name in bindings:
            return str(bindings[name])
        return match.group(0)

    return _SLOT.sub(repl, text)


def format_transcript(state: DialogueState) -> str:
    sys_name, usr_name = SPEAKER_NAMES[state.scenario.dataset]
    lines = []
    for utt in state.history:
        name = sys_name if utt.speaker is Speaker.SYSTEM else usr_name
        lines.append(f"{name}: {utt.text}")
    return "\n".join(lines)


def render(
    template: PromptTemplate,
    scenario: ScenarioConfig,
    act: DialogueAct | None = None,
    state: DialogueState | None = None,
) -> list[ChatMessage]:
    """Render a template against a scenario, step act, and dialogue state."""
    if (template.role is PromptRole.ASSISTANT_SIM) != (act is not None):
        raise RenderError(
            f"{template.role.value} template "
            f"{'requires' if template.role is PromptRole.ASSISTANT_SIM else 'rejects'} an act"
        )
    bindings = {k: str(v) for k, v in scenario.slots.items()}
    if act is not None:
        bindings["action"] = act.prompt_text
    if state is not None and "history" in template.required_slots:
        bindings["history"] = format_transcript(state)
    missing = sorted(template.required_slots - bindings.keys())
    if missing:
        raise RenderError(f"missing slot(s) for {template.role.value}: {', '.join(missing)}")
    messages = []
    for msg_role, text in template.turns:
        rendered = substitute_slots(text, bindings)
        residual = [s for s in _SLOT.findall(rendered) if s in template.required_slots]
        if residual:
            raise RenderError(f"unresolved slot marker(s): {', '.join(sorted(set(residual)))}")
        messages.append(ChatMessage(msg_role, rendered))
    if state is not None and template.role in (PromptRole.ASSISTANT_SIM, PromptRole.USER_SIM):
        own_side = Speaker.SYSTEM if template.role is PromptRole.ASSISTANT_SIM else Speaker.USER
        for utt in state.history:
            chat_role = "assistant" if utt.speaker is own_side else "user"
            messages.append(ChatMessage(chat_role, utt.text))
    return messages


def render_judge(
    context: str,
    resp_a: str,
    resp_b: str,
    template: PromptTemplate,
) -> list[ChatMessage]:
    """A/B/C comparison prompt for one response pair."""
    if not resp_a or not resp_b:
        raise RenderError("judge comparison needs two nonempty responses")
    bindings = {"context": context, "resp_a": resp_a, "resp_b": resp_b}
    messages = []
    for msg_role, text in template.turns:
        messages.append(ChatMessage(msg_role, substitute_slots(text, bindings)))
    return messages


class TemplateSet:
    """All templates for one dataset, indexed by role."""

    def __init__(self, dataset: Dataset, templates: dict[PromptRole, PromptTemplate]):
        self.dataset = dataset
        self._templates = templates

    def get(self, role: PromptRole) -> PromptTemplate:
        try:
            return self._templates[role]
        except KeyError:
            raise RenderError(f"no {role.value} template for {self.dataset.value}") from None

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TemplateSet":
        dataset = Dataset(doc["dataset"])
        templates = {}
        for tdoc in doc["templates"]:
            role = PromptRole(tdoc["role"])
            templates[role] = PromptTemplate(
                dataset=dataset,
                role=role,
                turns=tuple((r, t) for r, t in tdoc["turns"]),
                required_slots=frozenset(tdoc.get("required_slots", ())),
                notes=tdoc.get("notes", ""),
            )
        return cls(dataset, templates)

    @classmethod
    def load(cls, path: str | Path) -> "TemplateSet":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


_DATASET_FILES = {
    Dataset.ESCONV: "esconv",
    Dataset.CIMA: "cima",
    Dataset.CRAIGSLIST: "craigslist",
    Dataset.P4G: "p4g",
}


def _data_root():
    return resources.files("dialoplan").joinpath("data")


def builtin_templates(dataset: Dataset) -> TemplateSet:
    ref = _data_root().joinpath("templates", f"{_DATASET_FILES[dataset]}.json")
    with ref.open(encoding="utf-8") as fh:
        return TemplateSet.from_json_dict(json.load(fh))


def builtin_action_space(dataset: Dataset) -> ActionSpace:
    ref = _data_root().joinpath("action_spaces", f"{_DATASET_FILES[dataset]}.json")
    with ref.open(encoding="utf-8") as fh:
        return ActionSpace.from_json_dict(json.load(fh))


def load_scenario(path: str | Path, action_space: ActionSpace | None = None) -> ScenarioConfig:
    """Read a scenario file; opening texts may reference scenario slots."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return scenario_from_json_dict(doc, action_space, default_id=path.stem)


def scenario_from_json_dict(
    doc: dict, action_space: ActionSpace | None = None, default_id: str = "scenario"
) -> ScenarioConfig:
    dataset = Dataset(doc["dataset"])
    if action_space is None:
        if "action_space" in doc:
            action_space = ActionSpace.from_json_dict(doc["action_space"])
        else:
            action_space = builtin_action_space(dataset)
    slots = {k: str(v) for k, v in doc.get("slots", {}).items()}
    opening = []
    for item in doc.get("opening", ()):
        opening.append(
            Utterance(
                speaker=Speaker(item["speaker"]),
                text=substitute_slots(item["text"], slots),
                turn_index=item.get("turn_index", 0),
                act=item.get("act"),
            )
        )
    return ScenarioConfig(
        dataset=dataset,
        scenario_id=doc.get("id", default_id),
        action_space=action_space,
        max_turns=doc.get("max_turns", 10),
        slots=slots,
        opening=tuple(opening),
        notes=doc.get("notes", ""),
    )
