"""Episode orchestration, metrics, and judge-based head-to-head duels.

An episode alternates planning and committing: plan the next act with a
fresh search, let the environment play out the exchange, stop on a terminal
or the scenario turn budget. Records serialize one JSON object per line;
wall-clock timing is kept out of the canonical record so identical seeds
produce identical artifacts.
"""

from __future__ import annotations

import logging
import random
import re
import statistics
import time
from dataclasses import dataclass, field

from .core import Dataset, NrpaParams, ScenarioConfig, InvariantError, Terminal, initial_state
from .envs import Environment
from .llm_client import ChatRequest, LlmClient
from .prompts import PromptTemplate, render_judge
from .reward import RewardSpec, SignalKind, evaluate
from .search import SearchAbort, plan_next_act

logger = logging.getLogger(__name__)


@dataclass
class TurnEntry:
    act: str
    system_text: str
    user_text: str
    stats: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "act": self.act,
            "system_text": self.system_text,
            "user_text": self.user_text,
            "stats": self.stats,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TurnEntry":
        return cls(doc["act"], doc["system_text"], doc["user_text"], doc.get("stats", {}))


@dataclass
class EpisodeRecord:
    scenario_id: str
    dataset: str
    params: dict
    turns: list[TurnEntry]
    terminal: str
    turns_used: int
    reward: float | None
    rng_seed: int
    deal_price: float | None = None
    sale_to_list: float | None = None
    sl_invalid: bool = False
    aborted: bool = False
    # Measured timing is reported separately; keeping it out of the record
    # keeps serialized runs byte-reproducible.
    duration_s: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "dataset": self.dataset,
            "params": self.params,
            "turns": [t.to_json_dict() for t in self.turns],
            "terminal": self.terminal,
            "turns_used": self.turns_used,
            "reward": self.reward,
            "rng_seed": self.rng_seed,
            "deal_price": self.deal_price,
            "sale_to_list": self.sale_to_list,
            "sl_invalid": self.sl_invalid,
            "aborted": self.aborted,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "EpisodeRecord":
        return cls(
            scenario_id=doc["scenario_id"],
            dataset=doc["dataset"],
            params=doc.get("params", {}),
            turns=[TurnEntry.from_json_dict(t) for t in doc.get("turns", [])],
            terminal=doc["terminal"],
            turns_used=doc["turns_used"],
            reward=doc.get("reward"),
            rng_seed=doc.get("rng_seed", 0),
            deal_price=doc.get("deal_price"),
            sale_to_list=doc.get("sale_to_list"),
            sl_invalid=doc.get("sl_invalid", False),
            aborted=doc.get("aborted", False),
        )


def compute_sl(
    deal_price: float | None, seller_target: float, buyer_target: float
) -> float:
    """Sale-to-list ratio: 1.0 at the buyer's target, 0 with no deal."""
    if buyer_target == seller_target:
        raise InvariantError("buyer and seller targets must differ")
    if deal_price is None:
        return 0.0
    return (deal_price - seller_target) / (buyer_target - seller_target)


def run_episode(
    scenario: ScenarioConfig,
    env: Environment,
    params: NrpaParams,
    reward_spec: RewardSpec,
    seed: int,
) -> EpisodeRecord:
    """Play one full dialogue, planning every system turn from scratch."""
    rng = random.Random(seed)
    state = initial_state(scenario)
    turns: list[TurnEntry] = []
    deal_price: float | None = None
    sl_invalid = False
    started = time.perf_counter()
    aborted = False
    try:
        while state.terminal is Terminal.ONGOING and state.turn_count < scenario.max_turns:
            act_id, stats = plan_next_act(state, env, params, rng, reward_spec)
            before = len(state.history)
            state, signal = env.step(state, act_id, rng)
            new_utts = state.history[before:]
            sys_text = new_utts[0].text if new_utts else ""
            user_text = new_utts[1].text if len(new_utts) > 1 else ""
            turns.append(TurnEntry(act_id, sys_text, user_text, stats.to_json_dict()))
            if signal.kind is SignalKind.DEAL_REACHED:
                deal_price = signal.deal_price
                sl_invalid = signal.price_invalid
    except SearchAbort as exc:
        logger.warning("episode %s aborted: %s", scenario.scenario_id, exc)
        aborted = True
    duration = time.perf_counter() - started

    if aborted:
        record = EpisodeRecord(
            scenario_id=scenario.scenario_id,
            dataset=scenario.dataset.value,
            params=params.to_json_dict(),
            turns=turns,
            terminal=state.terminal.value,
            turns_used=state.turn_count,
            reward=None,
            rng_seed=seed,
            aborted=True,
            duration_s=duration,
        )
        return record

    reward = evaluate(state, reward_spec)
    sale_to_list = None
    if scenario.dataset is Dataset.CRAIGSLIST:
        if sl_invalid:
            sale_to_list = None
        else:
            seller = float(scenario.slots["seller_target_price"])
            buyer = float(scenario.slots["buyer_target_price"])
            price = deal_price if state.terminal is Terminal.SOLVED else None
            sale_to_list = compute_sl(price, seller, buyer)
    return EpisodeRecord(
        scenario_id=scenario.scenario_id,
        dataset=scenario.dataset.value,
        params=params.to_json_dict(),
        turns=turns,
        terminal=state.terminal.value,
        turns_used=state.turn_count,
        reward=reward,
        rng_seed=seed,
        deal_price=deal_price,
        sale_to_list=sale_to_list,
        sl_invalid=sl_invalid,
        duration_s=duration,
    )


@dataclass
class MetricsSummary:
    at: float
    sr: float
    sl: float | None
    n_episodes: int
    at_std: float
    sr_std: float
    sl_std: float | None
    aborted: int = 0
    sl_invalid: int = 0

    def to_json_dict(self) -> dict:
        return {
            "AT": self.at,
            "SR": self.sr,
            "SL": self.sl,
            "n_episodes": self.n_episodes,
            "std": {"AT": self.at_std, "SR": self.sr_std, "SL": self.sl_std},
            "aborted": self.aborted,
            "sl_invalid": self.sl_invalid,
        }

    def format_lines(self) -> list[str]:
        lines = [
            f"episodes: {self.n_episodes} (aborted and excluded: {self.aborted})",
            f"AT (average turns): {self.at:.3f} +/- {self.at_std:.3f}",
            f"SR (success rate): {self.sr:.3f} +/- {self.sr_std:.3f}",
        ]
        if self.sl is not None:
            lines.append(f"SL (sale-to-list): {self.sl:.4f} +/- {self.sl_std:.4f}")
        if self.sl_invalid:
            lines.append(f"warning: {self.sl_invalid} episode(s) had unparseable deal prices")
        return lines


def _population_std(values: list[float]) -> float:
    return statistics.pstdev(values) if len(values) > 1 else 0.0


def summarize(records: list[EpisodeRecord]) -> MetricsSummary:
    usable = [r for r in records if not r.aborted]
    if not usable:
        raise InvariantError("no non-aborted episodes to summarize")
    turns = [float(r.turns_used) for r in usable]
    successes = [1.0 if r.terminal == Terminal.SOLVED.value else 0.0 for r in usable]
    cb = [r for r in usable if r.dataset == Dataset.CRAIGSLIST.value]
    sl_invalid = sum(1 for r in cb if r.sl_invalid)
    sl_values = [float(r.sale_to_list or 0.0) for r in cb if not r.sl_invalid]
    sl = statistics.fmean(sl_values) if sl_values else None
    return MetricsSummary(
        at=statistics.fmean(turns),
        sr=statistics.fmean(successes),
        sl=sl,
        n_episodes=len(usable),
        at_std=_population_std(turns),
        sr_std=_population_std(successes),
        sl_std=_population_std(sl_values) if sl_values else None,
        aborted=len(records) - len(usable),
        sl_invalid=sl_invalid,
    )


class Verdict:
    A = "A"
    B = "B"
    TIE = "Tie"


_VERDICT_TOKEN = re.compile(r"^\(?([ABCabc])[\).:,!]?$")


def parse_verdict_letter(text: str) -> str | None:
    """First token must be A, B, or C (punctuation-tolerant); else None."""
    parts = text.strip().split(None, 1)
    if not parts:
        return None
    match = _VERDICT_TOKEN.match(parts[0])
    if match is None:
        return None
    return match.group(1).upper()


@dataclass(frozen=True)
class JudgeConfig:
    """Judge sampling setup. Each of the ``samples`` calls carries its own
    seed, so majority voting stays meaningful even at temperature 0 against
    seed-sensitive backends."""

    model: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    samples: int = 5


def static_duel(
    context: str,
    resp_a: str,
    resp_b: str,
    judge: JudgeConfig,
    client: LlmClient,
    template: PromptTemplate,
    seed_base: int = 0,
) -> str:
    """Majority verdict over several judge samples.

    Position bias is mitigated by swapping the two responses on
    odd-numbered samples and un-swapping the parsed letter. C and
    unparseable answers count toward Tie; the verdict is whichever of A/B
    got more votes, Tie when they draw.
    """
    a_votes = 0
    b_votes = 0
    parsed_any = False
    for i in range(judge.samples):
        swapped = i % 2 == 1
        first, second = (resp_b, resp_a) if swapped else (resp_a, resp_b)
        messages = render_judge(context, first, second, template)
        raw = client.complete(
            ChatRequest(
                model=judge.model,
                messages=tuple(messages),
                temperature=judge.temperature,
                seed=seed_base + i,
            )
        )
        letter = parse_verdict_letter(raw)
        if letter is None:
            continue
        parsed_any = True
        if letter == "C":
            continue
        if swapped:
            letter = "B" if letter == "A" else "A"
        if letter == "A":
            a_votes += 1
        else:
            b_votes += 1
    if not parsed_any:
        logger.warning("judge produced no parseable verdicts; recording a tie")
    if a_votes > b_votes:
        return Verdict.A
    if b_votes > a_votes:
        return Verdict.B
    return Verdict.TIE


@dataclass
class WinRateReport:
    mean: float
    std: float
    mean_excluding_ties: float
    std_excluding_ties: float
    per_run: list[float]

    def to_json_dict(self) -> dict:
        return {
            "win_rate": self.mean,
            "win_rate_std": self.std,
            "win_rate_excluding_ties": self.mean_excluding_ties,
            "win_rate_excluding_ties_std": self.std_excluding_ties,
            "per_run": self.per_run,
        }


def win_rate(runs_verdicts: list[list[str]]) -> WinRateReport:
    """Mean and population std of per-run win rates.

    The headline rate counts ties in the denominator; the ties-excluded
    variant is reported alongside it.
    """
    if not runs_verdicts or any(not run for run in runs_verdicts):
        raise InvariantError("win_rate needs at least one verdict per run")
    rates = []
    rates_excl = []
    for run in runs_verdicts:
        wins = sum(1 for v in run if v == Verdict.A)
        losses = sum(1 for v in run if v == Verdict.B)
        rates.append(wins / len(run))
        decided = wins + losses
        rates_excl.append(wins / decided if decided else 0.0)
    return WinRateReport(
        mean=statistics.fmean(rates),
        std=_population_std(rates),
        mean_excluding_ties=statistics.fmean(rates_excl),
        std_excluding_ties=_population_std(rates_excl),
        per_run=rates,
    )
