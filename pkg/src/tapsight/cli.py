"""Operator command set.

Subcommands map the desk workflow: analyse a set of captures into a store,
search it, manage detection rules, render reports, serve the UI. Exit
codes: 0 success, 1 fatal input error, 2 completed with errors recorded in
the counters.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import TapsightError
from .pipeline import AnalysisResult, RunConfig, analyse
from .report import build_report, stats_summary
from .rules import (
    evaluate,
    load_ruleset,
    tree_to_dict,
    tree_to_json,
    validate_ruleset,
)
from .store import open_readonly


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tapsight",
                                description="Offline metadata analysis of intercepted captures")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyse", help="run the full analysis pipeline")
    a.add_argument("captures", nargs="+", help="capture files, processed in order")
    a.add_argument("--name", help="analysis name (default: first capture's stem)")
    a.add_argument("--out", required=True, help="store file to create")
    a.add_argument("--idle-timeout", type=float, default=None,
                   help="seconds before a silent flow is closed (default 300)")
    a.add_argument("--defrag-max-age", type=float, default=None,
                   help="seconds before an unfinished fragment buffer is dropped (default 30)")
    a.add_argument("--export-flows", action="store_true", default=None,
                   help="write each flow's reassembled streams to <out>.streams/")
    a.add_argument("--verbose-log", action="store_true", default=None,
                   help="write per-packet decode lines to <out>.log")
    a.add_argument("--rules", help="ruleset file to evaluate after analysis")
    a.add_argument("--serve", metavar="ADDR",
                   help="serve the result on host:port when the run completes")
    a.add_argument("--config", help="JSON config file; flags override its values")
    a.add_argument("--quiet", action="store_true", help="suppress progress output")

    s = sub.add_parser("search", help="keyword search over a finalized store")
    s.add_argument("store")
    s.add_argument("selector", help="table.column, e.g. http_transactions.user_agent")
    s.add_argument("pattern")
    s.add_argument("--exact", action="store_true", help="full-string match instead of substring")
    s.add_argument("--limit", type=int, default=100)
    s.add_argument("--json", action="store_true")

    r = sub.add_parser("rules", help="validate or apply detection rulesets")
    rsub = r.add_subparsers(dest="rules_command", required=True)
    rv = rsub.add_parser("validate", help="check a ruleset file")
    rv.add_argument("ruleset")
    ra = rsub.add_parser("apply", help="evaluate a ruleset and print the tree")
    ra.add_argument("store")
    ra.add_argument("ruleset")
    ra.add_argument("--verbose", action="store_true", help="include zero-hit rules")
    ra.add_argument("--json", action="store_true")

    rp = sub.add_parser("report", help="render the full report")
    rp.add_argument("store")
    rp.add_argument("--rules", help="ruleset for the detections section")
    rp.add_argument("--format", choices=("text", "html"), default="text")
    rp.add_argument("--out", help="write to file instead of stdout")

    sv = sub.add_parser("serve", help="serve the JSON API and UI for a store")
    sv.add_argument("store")
    sv.add_argument("--rules", help="ruleset file (editable through the API)")
    sv.add_argument("--bind", default="127.0.0.1:8787")
    sv.add_argument("--static", help="directory with the UI bundle")

    st = sub.add_parser("stats", help="print the statistics summary")
    st.add_argument("store")
    return p


def _load_config(args) -> RunConfig:
    file_cfg = {}
    if args.config:
        file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    name = args.name or file_cfg.get("name") or Path(args.captures[0]).stem
    cfg = RunConfig(name=name, captures=list(args.captures), out=args.out)
    for flag, key in (("idle_timeout", "idle_timeout_s"),
                      ("defrag_max_age", "defrag_max_age_s"),
                      ("export_flows", "export_flows"),
                      ("verbose_log", "verbose_logging"),
                      ("rules", "ruleset_path")):
        value = getattr(args, flag, None)
        if value is None:
            value = file_cfg.get(key)
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def _print_tree(result: AnalysisResult) -> None:
    if not result.tree_json:
        return
    doc = json.loads(result.tree_json)
    _print_tree_node(doc["tree"], 0)


def _print_tree_node(node: dict, depth: int) -> None:
    print(f"{'  ' * depth}{node['label']} [{node['hit_count']}]")
    for child in node["children"]:
        _print_tree_node(child, depth + 1)


def _cmd_analyse(args) -> int:
    cfg = _load_config(args)
    progress = None
    if not args.quiet and sys.stderr.isatty():
        def progress(done, total):
            pct = 100.0 * done / total if total else 100.0
            print(f"\r{pct:5.1f} % ({done}/{total} packets)", end="", file=sys.stderr)
    result = analyse(cfg, progress=progress)
    if progress:
        print("", file=sys.stderr)
    store = open_readonly(cfg.out)
    try:
        print(stats_summary(store), end="")
    finally:
        store.close()
    _print_tree(result)
    if args.serve:
        from .api import serve
        serve(cfg.out, cfg.ruleset_path, args.serve)
    return result.exit_code


def _cmd_search(args) -> int:
    store = open_readonly(args.store)
    try:
        rows = store.search(args.selector, args.pattern,
                            "exact" if args.exact else "partial", limit=args.limit)
    finally:
        store.close()
    if args.json:
        print(json.dumps(rows, default=str))
    else:
        for row in rows:
            print(f"{row['_table']}#{row['id']}  ts={row['_ts']}  {row['_matched']}")
        print(f"({len(rows)} rows)")
    return 0


def _cmd_rules(args) -> int:
    if args.rules_command == "validate":
        ruleset = load_ruleset(args.ruleset)
        violations = validate_ruleset(ruleset)
        for v in violations:
            print(f"{v.rule_id or '-'}: {v.code}: {v.message}")
        if violations:
            return 1
        print(f"ok ({len(ruleset.rules)} rules)")
        return 0
    ruleset = load_ruleset(args.ruleset)
    store = open_readonly(args.store)
    try:
        tree = evaluate(store, ruleset, verbose=args.verbose)
    finally:
        store.close()
    if args.json:
        print(tree_to_json(tree))
    else:
        _print_tree_node(tree_to_dict(tree.root), 0)
        for rid, reason in tree.skipped:
            print(f"skipped {rid}: {reason}")
    return 0


def _cmd_report(args) -> int:
    store = open_readonly(args.store)
    try:
        tree = None
        if args.rules:
            tree = evaluate(store, load_ruleset(args.rules))
        doc = build_report(store, tree, args.format)
    finally:
        store.close()
    if args.out:
        Path(args.out).write_bytes(doc)
    else:
        sys.stdout.write(doc.decode("utf-8"))
    return 0


def _cmd_serve(args) -> int:
    from .api import serve
    static = args.static
    if static is None:
        bundled = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
        static = str(bundled) if bundled.is_dir() else None
    serve(args.store, args.rules, args.bind, static)
    return 0


def _cmd_stats(args) -> int:
    store = open_readonly(args.store)
    try:
        print(stats_summary(store), end="")
    finally:
        store.close()
    return 0


_COMMANDS = {
    "analyse": _cmd_analyse,
    "search": _cmd_search,
    "rules": _cmd_rules,
    "report": _cmd_report,
    "serve": _cmd_serve,
    "stats": _cmd_stats,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (TapsightError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
