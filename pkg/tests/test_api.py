"""JSON API: endpoints, ruleset editing, preview/CLI equality, read-only."""

import hashlib
import json
import threading
import urllib.error
import urllib.request

import pytest

from tapsight.api import make_server
from tapsight.rules import (
    DetectionRule,
    RuleSet,
    evaluate,
    save_ruleset,
    tree_to_json,
)
from tapsight.store import open_readonly

UA_RULE = {"rule_id": "ua-iphone", "selector": "http_transactions.user_agent",
           "result_name": "Apple iPhone", "parent_path": "Devices/Mobile",
           "pattern": "iPhone", "mode": "partial", "enabled": True}


@pytest.fixture
def service(tmp_path, analysed_store):
    store_path, _ = analysed_store
    ruleset_path = tmp_path / "live_rules.json"
    save_ruleset(RuleSet(rules=[DetectionRule(**{k: v for k, v in UA_RULE.items()
                                                 if k != "enabled"})]), ruleset_path)
    server = make_server(str(store_path), str(ruleset_path), "127.0.0.1:0")
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, store_path, ruleset_path
    server.shutdown()
    server.server_close()


def get(base, path):
    try:
        with urllib.request.urlopen(base + path) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def send(base, path, method, doc):
    req = urllib.request.Request(base + path, data=json.dumps(doc).encode(),
                                 method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def test_api_run_document(service):
    base, _, _ = service
    status, doc = get(base, "/api/run")
    assert status == 200
    assert doc["name"] == "fixture"
    assert doc["finalized"] == 1
    assert doc["counters"]["flow_records"] == 4
    assert len(doc["capture_files"]) == 1


def test_api_schema_lists_selectors(service):
    base, _, _ = service
    status, doc = get(base, "/api/schema")
    assert status == 200
    assert "user_agent" in doc["tables"]["http_transactions"]
    assert "query_name" in doc["tables"]["dns_records"]


def test_api_tree_equals_cli_evaluation(service):
    base, store_path, ruleset_path = service
    with urllib.request.urlopen(base + "/api/tree") as resp:
        api_bytes = resp.read()
    store = open_readonly(store_path)
    from tapsight.rules import load_ruleset
    expected = tree_to_json(evaluate(store, load_ruleset(ruleset_path)))
    store.close()
    assert api_bytes.decode() == expected  # byte-identical single source of truth


def test_api_search_rows_and_total(service):
    base, _, _ = service
    status, doc = get(base, "/api/search?selector=http_transactions.user_agent"
                            "&q=iphone&mode=partial")
    assert status == 200
    assert doc["total"] == 1
    assert len(doc["rows"]) == 1
    assert "iPhone" in doc["rows"][0]["user_agent"]


def test_api_search_unknown_selector_404(service):
    base, _, _ = service
    status, doc = get(base, "/api/search?selector=nosuch.column&q=x")
    assert status == 404
    assert "error" in doc


def test_api_search_bad_mode_400(service):
    base, _, _ = service
    status, _ = get(base, "/api/search?selector=flows.protocol&q=x&mode=regex")
    assert status == 400


def test_api_rules_get(service):
    base, _, _ = service
    status, doc = get(base, "/api/rules")
    assert status == 200
    assert doc["format_version"] == 1
    assert doc["rules"][0]["rule_id"] == "ua-iphone"


def test_api_put_rules_duplicate_ids_rejected(service):
    base, _, ruleset_path = service
    before = ruleset_path.read_text()
    doc = {"format_version": 1, "rules": [UA_RULE, UA_RULE]}
    status, body = send(base, "/api/rules", "PUT", doc)
    assert status == 400
    assert body["violations"]
    assert ruleset_path.read_text() == before  # nothing persisted


def test_api_put_rules_then_tree_reflects_change(service):
    base, _, _ = service
    new_rule = {"rule_id": "win", "selector": "http_transactions.user_agent",
                "result_name": "Windows box", "parent_path": "Devices/Desktops",
                "pattern": "Windows NT", "mode": "partial", "enabled": True}
    status, body = send(base, "/api/rules", "PUT",
                        {"format_version": 1, "rules": [UA_RULE, new_rule]})
    assert status == 200
    assert body["rules"] == 2
    status, tree = get(base, "/api/tree")
    labels = {c["label"] for c in tree["tree"]["children"][0]["children"]}
    assert labels == {"Mobile", "Desktops"}


def test_api_preview_matches_direct_evaluation(service):
    base, store_path, _ = service
    rule = {"selector": "http_transactions.user_agent", "pattern": "iPhone",
            "mode": "partial", "result_name": "x"}
    status, doc = send(base, "/api/rules/preview", "POST", rule)
    assert status == 200
    store = open_readonly(store_path)
    tree = evaluate(store, RuleSet(rules=[DetectionRule(
        rule_id="p", selector=rule["selector"], result_name="x",
        parent_path="", pattern=rule["pattern"], mode=rule["mode"])]))
    store.close()
    assert doc["hit_count"] == tree.root.children["x"].hit_count
    assert len(doc["sample"]) == doc["hit_count"] == 1


def test_api_preview_validation_400(service):
    base, _, _ = service
    status, doc = send(base, "/api/rules/preview", "POST",
                       {"selector": "nosuch.column", "pattern": "x"})
    assert status == 400
    assert any(v["code"] == "UnknownSelector" for v in doc["violations"])


def test_api_session_never_touches_store(service):
    base, store_path, _ = service
    before = hashlib.sha256(store_path.read_bytes()).hexdigest()
    get(base, "/api/run")
    get(base, "/api/tree")
    get(base, "/api/search?selector=flows.protocol&q=http")
    send(base, "/api/rules/preview", "POST",
         {"selector": "flows.protocol", "pattern": "http", "result_name": "x"})
    send(base, "/api/rules", "PUT", {"format_version": 1, "rules": [UA_RULE]})
    assert hashlib.sha256(store_path.read_bytes()).hexdigest() == before


def test_api_fallback_page_when_no_ui(service):
    base, _, _ = service
    with urllib.request.urlopen(base + "/") as resp:
        body = resp.read()
    assert resp.status == 200
    assert b"JSON API is live" in body


def test_api_404_endpoints(service):
    base, _, _ = service
    status, _ = get(base, "/api/not-a-thing")
    assert status == 404
