#!/usr/bin/env python3
"""Regenerate the UI test fixtures from the real backend.

Builds the standard mixed fixture capture, analyses it, serves the store,
and snapshots the API documents the frontend tests replay:
  tests/fixtures/tree.json     raw GET /api/tree bytes
  tests/fixtures/preview.json  rule preview hit_count vs CLI evaluation

Run from the frontend/ directory:
  python tools/make_fixtures.py
"""

import json
import subprocess
import sys
import tempfile
import threading
import urllib.request
from pathlib import Path

FRONTEND = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(FRONTEND.parent / "tests"))

from conftest import build_mixed_capture  # noqa: E402

from tapsight.api import make_server  # noqa: E402
from tapsight.pipeline import RunConfig, analyse  # noqa: E402

PREVIEW_RULE = {"rule_id": "ua-iphone", "selector": "http_transactions.user_agent",
                "result_name": "Apple iPhone", "parent_path": "Devices/Mobile",
                "pattern": "iPhone", "mode": "partial", "enabled": True}

FIXTURE_RULES = [
    PREVIEW_RULE,
    {"rule_id": "ua-android", "selector": "http_transactions.user_agent",
     "result_name": "Android device", "parent_path": "Devices/Mobile",
     "pattern": "Android", "mode": "partial", "enabled": True},
    {"rule_id": "ua-windows", "selector": "http_transactions.user_agent",
     "result_name": "Windows", "parent_path": "Devices/Operating systems",
     "pattern": "Windows NT", "mode": "partial", "enabled": True},
    {"rule_id": "mail-sender", "selector": "smtp_envelopes.mail_from",
     "result_name": "Mail sender", "parent_path": "Services/Mail",
     "pattern": "@", "mode": "partial", "enabled": True},
    {"rule_id": "dns-names", "selector": "dns_records.query_name",
     "result_name": "Example lookups", "parent_path": "Services",
     "pattern": "example.test", "mode": "partial", "enabled": True},
]


def main():
    fixtures = FRONTEND / "tests" / "fixtures"
    fixtures.mkdir(parents=True, exist_ok=True)
    work = Path(tempfile.mkdtemp(prefix="ui-fixtures-"))
    cap = work / "mixed.pcap"
    build_mixed_capture(cap)
    store = work / "mixed.db"
    analyse(RunConfig(name="ui-fixture", captures=[str(cap)], out=str(store)))

    ruleset_path = work / "rules.json"
    ruleset_path.write_text(json.dumps({"format_version": 1,
                                        "rules": FIXTURE_RULES}, indent=2))

    server = make_server(str(store), str(ruleset_path), "127.0.0.1:0")
    threading.Thread(target=server.serve_forever, daemon=True).start()
    base = f"http://127.0.0.1:{server.server_address[1]}"

    with urllib.request.urlopen(base + "/api/tree") as resp:
        tree_bytes = resp.read()
    (fixtures / "tree.json").write_bytes(tree_bytes)

    req = urllib.request.Request(
        base + "/api/rules/preview", data=json.dumps(PREVIEW_RULE).encode(),
        method="POST", headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        api_preview = json.loads(resp.read())
    server.shutdown()

    cli = subprocess.run(
        [sys.executable, "-m", "tapsight.cli", "rules", "apply", str(store),
         str(ruleset_path), "--json"],
        capture_output=True, text=True, check=True, cwd=FRONTEND.parent)
    cli_tree = json.loads(cli.stdout)
    node = cli_tree["tree"]
    for label in ("Devices", "Mobile", "Apple iPhone"):
        node = next(c for c in node["children"] if c["label"] == label)

    (fixtures / "preview.json").write_text(json.dumps({
        "rule": PREVIEW_RULE,
        "api_preview_hit_count": api_preview["hit_count"],
        "cli_evaluation_hit_count": node["hit_count"],
    }, indent=2) + "\n")
    print(f"tree.json: {len(tree_bytes)} bytes; preview hit_count "
          f"api={api_preview['hit_count']} cli={node['hit_count']}")


if __name__ == "__main__":
    main()
