"""Operator entry points: run episodes, judge duels, serve the live API.

Everything is driven by one JSON config file; a few flags override the
config for quick sweeps. Exit codes: 0 success, 1 runtime failure, 2 usage
or configuration error.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .core import Dataset, NrpaParams, InvariantError
from .envs.llm import LlmEnvConfig, LlmEnvironment, demo_transport
from .envs.scripted import ScriptedEnvironment, load_scripted_scenario
from .evaluation import (
    EpisodeRecord,
    JudgeConfig,
    run_episode,
    static_duel,
    summarize,
    win_rate,
)
from .llm_client import HttpTransport, LlmClient
from .prompts import PromptRole, builtin_templates, load_scenario
from .reward import RewardSpec

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class CliConfigError(ValueError):
    """Bad config file or flags; reported with exit code 2."""


def _resolve(raw: str, base: Path) -> Path:
    path = Path(raw)
    return path if path.is_absolute() else (base / path).resolve()


@dataclass
class RunConfig:
    mode: str = "scripted"
    scenario_paths: list[Path] = field(default_factory=list)
    episodes_per_scenario: int = 1
    params: NrpaParams = field(default_factory=NrpaParams)
    reward: RewardSpec = field(default_factory=RewardSpec)
    llm: LlmEnvConfig = field(default_factory=LlmEnvConfig)
    transport: str = "http"
    base_url: str | None = None
    cache_path: Path | None = None
    judge: JudgeConfig = field(default_factory=JudgeConfig)
    judge_dataset: Dataset = Dataset.P4G
    workers: int = 1
    out_dir: Path = Path("runs")
    run_id: str | None = None
    replay_from: Path | None = None
    persist_dir: Path | None = None

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise CliConfigError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise CliConfigError(f"config {path} is not valid JSON: {exc}") from exc
        base = path.parent
        mode = doc.get("mode", "scripted")
        if mode not in ("scripted", "llm", "replay"):
            raise CliConfigError(f"mode: unknown value {mode!r}")
        try:
            params = NrpaParams.from_json_dict(doc.get("params", {}))
            reward = RewardSpec.from_json_dict(doc.get("reward", {}))
            llm = LlmEnvConfig.from_json_dict(doc.get("llm", {}))
        except (InvariantError, ValueError, TypeError) as exc:
            raise CliConfigError(str(exc)) from exc
        reward.assert_orderable()
        scenario_paths = [_resolve(p, base) for p in doc.get("scenarios", [])]
        if mode in ("scripted", "llm"):
            if not scenario_paths:
                raise CliConfigError("scenarios: at least one scenario file is required")
            for sp in scenario_paths:
                if not sp.exists():
                    raise CliConfigError(f"scenarios: file not found: {sp}")
        replay_from = None
        if mode == "replay":
            raw = doc.get("replay_from")
            if not raw:
                raise CliConfigError("replay_from: required when mode is replay")
            replay_from = _resolve(raw, base)
            if not replay_from.exists():
                raise CliConfigError(f"replay_from: file not found: {replay_from}")
        judge_doc = doc.get("judge", {})
        judge = JudgeConfig(
            model=judge_doc.get("model", "gpt-3.5-turbo"),
            temperature=judge_doc.get("temperature", 0.7),
            samples=judge_doc.get("samples", 5),
        )
        return cls(
            mode=mode,
            scenario_paths=scenario_paths,
            episodes_per_scenario=int(doc.get("episodes_per_scenario", 1)),
            params=params,
            reward=reward,
            llm=llm,
            transport=doc.get("llm", {}).get("transport", "http"),
            base_url=doc.get("llm", {}).get("base_url"),
            cache_path=(
                _resolve(doc["llm"]["cache_path"], base)
                if doc.get("llm", {}).get("cache_path")
                else None
            ),
            judge=judge,
            judge_dataset=Dataset(judge_doc.get("dataset", "P4G")),
            workers=int(doc.get("workers", 1)),
            out_dir=_resolve(doc.get("out_dir", "runs"), base),
            run_id=doc.get("run_id"),
            replay_from=replay_from,
            persist_dir=(
                _resolve(doc["persist_dir"], base) if doc.get("persist_dir") else None
            ),
        )

    def apply_overrides(self, args: argparse.Namespace) -> None:
        updates = {}
        if getattr(args, "seed", None) is not None:
            updates["rng_seed"] = args.seed
        if getattr(args, "level", None) is not None:
            updates["level"] = args.level
        if getattr(args, "iterations", None) is not None:
            updates["iterations"] = args.iterations
        if updates:
            doc = self.params.to_json_dict()
            doc.update(updates)
            try:
                self.params = NrpaParams.from_json_dict(doc)
            except InvariantError as exc:
                raise CliConfigError(str(exc)) from exc


def build_client(config: RunConfig) -> LlmClient:
    if config.transport == "mock":
        transport = demo_transport(config.judge_dataset)
    else:
        transport = HttpTransport(base_url=config.base_url)
    return LlmClient(
        transport,
        cache_path=config.cache_path,
        cache_enabled=config.llm.cache_enabled,
    )


def _build_jobs(config: RunConfig):
    """(scenario, env) pairs in config order, plus the demo client if any."""
    jobs = []
    client = None
    for path in config.scenario_paths:
        if config.mode == "scripted":
            script = load_scripted_scenario(path)
            env = ScriptedEnvironment(script)
            scenario = script.scenario
        else:
            scenario = load_scenario(path)
            if client is None:
                if config.transport == "mock":
                    client = LlmClient(
                        demo_transport(scenario.dataset),
                        cache_path=config.cache_path,
                        cache_enabled=config.llm.cache_enabled,
                    )
                else:
                    client = build_client(config)
            env = LlmEnvironment(scenario, config.llm, client)
        jobs.append((scenario, env))
    return jobs


def cmd_run(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    config.apply_overrides(args)
    if args.out:
        run_dir = Path(args.out)
    else:
        run_id = config.run_id or time.strftime("run-%Y%m%d-%H%M%S")
        run_dir = config.out_dir / run_id
    run_dir.mkdir(parents=True, exist_ok=True)

    if config.mode == "replay":
        records = read_episodes(config.replay_from)
        summary = summarize(records)
        _write_json(run_dir / "summary.json", summary.to_json_dict())
        for line in summary.format_lines():
            print(line)
        print(f"results: {run_dir}")
        return EXIT_OK

    jobs = _build_jobs(config)
    episode_jobs = []
    index = 0
    for scenario, env in jobs:
        for _ in range(config.episodes_per_scenario):
            episode_jobs.append((scenario, env, config.params.rng_seed + index))
            index += 1

    def _one(job):
        scenario, env, seed = job
        return run_episode(scenario, env, config.params, config.reward, seed)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_one, episode_jobs))
    else:
        records = [_one(job) for job in episode_jobs]

    _write_json(run_dir / "config.json", _config_snapshot(config))
    with open(run_dir / "episodes.jsonl", "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json_dict(), sort_keys=True) + "\n")
    summary = summarize(records)
    _write_json(run_dir / "summary.json", summary.to_json_dict())
    _write_json(
        run_dir / "timings.json",
        {
            "episodes": [
                {"scenario_id": r.scenario_id, "duration_s": r.duration_s}
                for r in records
            ]
        },
    )
    for line in summary.format_lines():
        print(line)
    print(f"results: {run_dir}")
    return EXIT_OK


def _config_snapshot(config: RunConfig) -> dict:
    return {
        "mode": config.mode,
        "scenarios": [str(p) for p in config.scenario_paths],
        "episodes_per_scenario": config.episodes_per_scenario,
        "params": config.params.to_json_dict(),
        "reward": config.reward.to_json_dict(),
        "workers": config.workers,
    }


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_episodes(path: Path) -> list[EpisodeRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(EpisodeRecord.from_json_dict(json.loads(line)))
    return records


def _load_transcripts(path: Path) -> list[dict]:
    if not path.exists():
        raise CliConfigError(f"transcript file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, list):
        raise CliConfigError(f"{path}: expected a JSON array of responses")
    return doc


def cmd_duel(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    side_a = _load_transcripts(Path(args.a))
    side_b = _load_transcripts(Path(args.b))
    if len(side_a) != len(side_b):
        raise CliConfigError(
            f"transcript counts differ: {len(side_a)} vs {len(side_b)}"
        )
    if not side_a:
        raise CliConfigError("transcript files are empty")
    client = build_client(config)
    template = builtin_templates(config.judge_dataset).get(PromptRole.JUDGE)
    runs = args.runs
    all_runs = []
    for run_index in range(runs):
        verdicts = []
        for pair_index, (item_a, item_b) in enumerate(zip(side_a, side_b)):
            context = item_a.get("context", item_b.get("context", ""))
            seed_base = (run_index * len(side_a) + pair_index) * config.judge.samples
            verdicts.append(
                static_duel(
                    context,
                    item_a["response"],
                    item_b["response"],
                    config.judge,
                    client,
                    template,
                    seed_base=seed_base,
                )
            )
        all_runs.append(verdicts)
    report = win_rate(all_runs)
    print(
        f"win rate (ties in denominator): {report.mean * 100:.2f}% "
        f"+/- {report.std * 100:.2f}% over {runs} run(s)"
    )
    print(
        f"win rate (ties excluded):       {report.mean_excluding_ties * 100:.2f}% "
        f"+/- {report.std_excluding_ties * 100:.2f}%"
    )
    if args.out:
        _write_json(Path(args.out), report.to_json_dict())
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import ServiceSettings, create_app

    config = RunConfig.load(args.config)
    if config.mode == "replay":
        raise CliConfigError("serve needs a scripted or llm config, not replay")
    host, _, port_text = args.bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise CliConfigError(f"bind address must look like host:port, got {args.bind!r}")
    port = int(port_text)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise CliConfigError(f"cannot bind {args.bind}: {exc}") from exc
    finally:
        probe.close()

    settings = ServiceSettings.from_run_config(config)
    app = create_app(settings)
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialoplan", description="Dialogue-act planner toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run planning episodes and report metrics")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--out", help="run directory (default: <out_dir>/<run-id>)")
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--level", type=int)
    run_p.add_argument("--iterations", type=int)
    run_p.set_defaults(func=cmd_run)

    duel_p = sub.add_parser("duel", help="judge two response sets head to head")
    duel_p.add_argument("--config", required=True)
    duel_p.add_argument("--a", required=True, help="transcript JSON for side A")
    duel_p.add_argument("--b", required=True, help="transcript JSON for side B")
    duel_p.add_argument("--runs", type=int, default=3)
    duel_p.add_argument("--out")
    duel_p.set_defaults(func=cmd_duel)

    serve_p = sub.add_parser("serve", help="serve the live chat API")
    serve_p.add_argument("--config", required=True)
    serve_p.add_argument("--bind", default="127.0.0.1:8008")
    serve_p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
