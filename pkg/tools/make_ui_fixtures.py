"""Generate frontend contract fixtures from the live service schema.

Drives the real session API in-process against the bundled scripted
scenario and dumps the raw JSON payloads the UI tests stub with. Re-run
whenever the service schema changes:

    python tools/make_ui_fixtures.py
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from fastapi.testclient import TestClient

from dialoplan.core import NrpaParams
from dialoplan.envs.scripted import ScriptedEnvironment, load_scripted_scenario
from dialoplan.reward import RewardSpec
from dialoplan.service import ScenarioBundle, ServiceSettings, create_app

OUT_DIR = Path(__file__).parent.parent / "frontend" / "test" / "fixtures"


def main() -> None:
    ref = resources.files("dialoplan").joinpath("data/scenarios/scripted_smoke.json")
    script = load_scripted_scenario(str(ref))
    settings = ServiceSettings(
        bundles={
            script.scenario.scenario_id: ScenarioBundle(
                script.scenario, ScriptedEnvironment(script)
            )
        },
        default_params=NrpaParams(level=1, iterations=10, rng_seed=4),
        reward_spec=RewardSpec(),
        persist_dir=None,
    )
    client = TestClient(create_app(settings))
    fixtures: dict[str, dict] = {}

    created = client.post("/sessions", json={"scenario_id": "scripted_smoke"})
    fixtures["create_session"] = created.json()
    sid = created.json()["session_id"]

    fixtures["create_session_unknown"] = client.post(
        "/sessions", json={"scenario_id": "missing"}
    ).json()

    turn = client.post(
        f"/sessions/{sid}/message",
        json={"text": "I am worried about my job.", "nonce": "fixture-turn-1"},
    )
    fixtures["message_turn"] = turn.json()

    solved = client.post(
        f"/sessions/{sid}/message",
        json={"text": "That is much better, thank you.", "nonce": "fixture-turn-2"},
    )
    fixtures["message_terminal"] = solved.json()

    fixtures["session_detail"] = client.get(f"/sessions/{sid}").json()
    fixtures["session_stats"] = client.get(f"/sessions/{sid}/stats").json()
    fixtures["healthz"] = client.get("/healthz").json()

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for name, payload in fixtures.items():
        path = OUT_DIR / f"{name}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
