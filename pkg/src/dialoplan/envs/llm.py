"""Environment backed by chat-completion models.

Three model roles drive a step: the assistant simulator produces the system
utterance for the chosen act, the user simulator produces the reply, and
the critic classifies the user's status from the updated transcript. The
critic must answer with a single token from a closed set; anything else is
treated as Ongoing and logged, since a hallucinated success would silently
inflate scores while a missed one merely costs turns.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from ..core import Dataset, DialogueState, ScenarioConfig
from ..llm_client import ChatRequest, LlmClient, MockTransport
from ..prompts import SPEAKER_NAMES, PromptRole, TemplateSet, builtin_templates, render
from ..reward import EnvSignal, SignalKind
from . import Environment

logger = logging.getLogger(__name__)

_PRICE = re.compile(r"[-+]?\$?\s*([0-9][0-9,]*(?:\.[0-9]+)?)")


def extract_deal_price(text: str) -> float | None:
    """Pull the agreed price out of the critic's structured answer."""
    match = _PRICE.search(text)
    if match is None:
        return None
    return float(match.group(1).replace(",", ""))


@dataclass(frozen=True)
class LlmEnvConfig:
    system_model: str = "gpt-4o-mini"
    user_model: str = "gpt-4o-mini"
    critic_model: str = "gpt-4o-mini"
    system_temperature: float = 0.7
    user_temperature: float = 0.7
    critic_temperature: float = 0.0
    max_tokens: int = 256
    cache_enabled: bool = True

    def __post_init__(self) -> None:
        for name in ("system_model", "user_model", "critic_model"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be nonempty")
        for name in ("system_temperature", "user_temperature", "critic_temperature"):
            value = getattr(self, name)
            if not 0.0 <= value <= 2.0:
                raise ValueError(f"{name} must be in [0, 2]")

    def to_json_dict(self) -> dict:
        return {
            "system_model": self.system_model,
            "user_model": self.user_model,
            "critic_model": self.critic_model,
            "system_temperature": self.system_temperature,
            "user_temperature": self.user_temperature,
            "critic_temperature": self.critic_temperature,
            "max_tokens": self.max_tokens,
            "cache_enabled": self.cache_enabled,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "LlmEnvConfig":
        known = {f: doc[f] for f in cls.__dataclass_fields__ if f in doc}
        return cls(**known)


class LlmEnvironment(Environment):
    def __init__(
        self,
        scenario: ScenarioConfig,
        config: LlmEnvConfig,
        client: LlmClient,
        templates: TemplateSet | None = None,
    ):
        self.scenario = scenario
        self.config = config
        self.client = client
        self.templates = templates or builtin_templates(scenario.dataset)

    def _complete(self, role: PromptRole, messages, seed_hint: int | None = None) -> str:
        cfg = self.config
        model, temperature = {
            PromptRole.ASSISTANT_SIM: (cfg.system_model, cfg.system_temperature),
            PromptRole.USER_SIM: (cfg.user_model, cfg.user_temperature),
            PromptRole.CRITIC: (cfg.critic_model, cfg.critic_temperature),
        }[role]
        req = ChatRequest(
            model=model,
            messages=tuple(messages),
            temperature=temperature,
            max_tokens=cfg.max_tokens,
            seed=seed_hint,
        )
        return self.client.complete(req).strip()

    def _generate(self, state, act_id, rng):
        act = self.scenario.action_space.act(act_id)
        sys_messages = render(
            self.templates.get(PromptRole.ASSISTANT_SIM), self.scenario, act, state
        )
        sys_text = self._complete(PromptRole.ASSISTANT_SIM, sys_messages)
        after_system = state.with_system_turn(act_id, sys_text)
        user_messages = render(
            self.templates.get(PromptRole.USER_SIM), self.scenario, None, after_system
        )
        user_text = self._complete(PromptRole.USER_SIM, user_messages)
        after_user = after_system.with_user_reply(user_text)
        signal = self._classify(after_user)
        return sys_text, user_text, signal

    def system_utterance(self, state, act_id, rng):
        act = self.scenario.action_space.act(act_id)
        messages = render(
            self.templates.get(PromptRole.ASSISTANT_SIM), self.scenario, act, state
        )
        return self._complete(PromptRole.ASSISTANT_SIM, messages)

    def classify_user_message(self, state, rng):
        return self._classify(state)

    def _classify(self, state: DialogueState) -> EnvSignal:
        messages = render(self.templates.get(PromptRole.CRITIC), self.scenario, None, state)
        raw = self._complete(PromptRole.CRITIC, messages)
        return parse_critic_verdict(raw, self.scenario.dataset)


def demo_transport(dataset: Dataset, solve_after_turns: int = 2) -> MockTransport:
    """Offline stand-in for a model endpoint.

    Simulators get short canned lines, the critic reports success once the
    transcript shows more than ``solve_after_turns`` completed system turns,
    and judges always pick A. Deterministic, so demo runs are reproducible.
    """
    sys_name, usr_name = SPEAKER_NAMES[dataset]

    def _content(req: ChatRequest) -> str:
        return "\n".join(m.content for m in req.messages)

    def _is_critic(req: ChatRequest) -> bool:
        return "Answer:" in req.messages[-1].content

    def _is_judge(req: ChatRequest) -> bool:
        return "Your choice:" in req.messages[-1].content

    def _is_user_sim(req: ChatRequest) -> bool:
        text = _content(req)
        return any(
            f"as a {role}" in text or f"as the {role}" in text
            for role in ("patient", "student", "seller", "Persuadee")
        )

    def _critic_reply(req: ChatRequest) -> str:
        # The transcript block lists one system-name line per system turn,
        # opener included.
        system_lines = _content(req).count(f"{sys_name}:")
        solved = system_lines > solve_after_turns
        if dataset is Dataset.CRAIGSLIST:
            return "DEAL 12" if solved else "ONGOING"
        return "Solved" if solved else "Ongoing"

    sys_lines = [
        "Let's take this one step at a time together.",
        "I hear you; tell me a bit more about that.",
        "Here is a thought that might help.",
    ]
    usr_lines = [
        "Okay, that makes sense to me.",
        "I see, let me think about that.",
        "Alright, go on.",
    ]

    def _sim_reply(lines):
        return lambda req: lines[len(req.messages) % len(lines)]

    transport = MockTransport(default=_sim_reply(sys_lines))
    transport.add_rule(_is_judge, "A")
    transport.add_rule(_is_critic, _critic_reply)
    transport.add_rule(_is_user_sim, _sim_reply(usr_lines))
    return transport


def parse_critic_verdict(raw: str, dataset: Dataset) -> EnvSignal:
    """Map the critic's closed-set answer to a signal; fail open to Ongoing."""
    head = raw.strip().split(None, 1)
    token = head[0].strip(".:,!").upper() if head else ""
    if dataset is Dataset.CRAIGSLIST:
        if token == "DEAL":
            price = extract_deal_price(head[1] if len(head) > 1 else "")
            if price is None:
                logger.warning("critic confirmed a deal with no parseable price: %r", raw)
                return EnvSignal(SignalKind.DEAL_REACHED, price_invalid=True, note=raw)
            return EnvSignal(SignalKind.DEAL_REACHED, deal_price=price)
        if token == "REJECT":
            return EnvSignal(SignalKind.DEAL_REJECTED)
        if token in ("ONGOING", "NODEAL"):
            return EnvSignal(SignalKind.USER_ONGOING)
        logger.warning("unparseable critic verdict %r; treating as Ongoing", raw)
        return EnvSignal(SignalKind.USER_ONGOING, note=f"malformed: {raw}")
    if token == "SOLVED":
        return EnvSignal(SignalKind.USER_SOLVED)
    if token == "ONGOING":
        return EnvSignal(SignalKind.USER_ONGOING)
    logger.warning("unparseable critic verdict %r; treating as Ongoing", raw)
    return EnvSignal(SignalKind.USER_ONGOING, note=f"malformed: {raw}")
