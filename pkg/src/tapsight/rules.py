"""Detection rules: validation, ruleset files, and result-tree evaluation.

A rule is a single keyword predicate over one metadata column; a hit
places a named node under a slash-separated parent path in the result
tree. Matching reuses the store's search semantics exactly (same SQL
predicates), so editor previews and final trees cannot disagree. Rules
targeting the same column are evaluated in one combined scan to keep
large stores near single-scan cost.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import RulesetParseError, UnknownSelectorError, UnsupportedVersionError
from .store import SEARCHABLE, Store, _like_param, parse_selector, searchable_selectors

RULESET_VERSION = 1
EVIDENCE_EXPORT_LIMIT = 200  # per node, in serialized trees only

_LOWER_TABLE = str.maketrans({chr(c): chr(c + 32) for c in range(65, 91)})


def ascii_lower(text: str) -> str:
    """ASCII-only case folding, matching the store's LIKE/NOCASE behavior."""
    return text.translate(_LOWER_TABLE)


@dataclass
class DetectionRule:
    rule_id: str
    selector: str  # table.column naming the metadata to inspect
    result_name: str
    parent_path: str
    pattern: str
    mode: str = "partial"
    enabled: bool = True


@dataclass
class RuleSet:
    format_version: int = RULESET_VERSION
    rules: list[DetectionRule] = field(default_factory=list)


@dataclass
class Violation:
    code: str
    message: str
    rule_id: str | None = None


def validate_rule(rule: DetectionRule, schema: dict[str, list[str]] | None = None) -> list[Violation]:
    """Structural checks for one rule; an empty list means ok."""
    schema = schema if schema is not None else searchable_selectors()
    out = []
    rid = rule.rule_id
    if not rid:
        out.append(Violation("EmptyId", "rule id must be non-empty", rid))
    table, dot, column = rule.selector.partition(".")
    if not dot or table not in schema or column not in schema.get(table, ()):
        out.append(Violation("UnknownSelector",
                             f"selector {rule.selector!r} does not name a searchable column", rid))
    if not rule.result_name:
        out.append(Violation("EmptyName", "result_name must be non-empty", rid))
    if rule.parent_path and any(not seg for seg in rule.parent_path.split("/")):
        out.append(Violation("EmptyPathSegment",
                             f"parent_path {rule.parent_path!r} has an empty segment", rid))
    if not rule.pattern:
        out.append(Violation("EmptyPattern", "pattern must be non-empty", rid))
    if rule.mode not in ("partial", "exact"):
        out.append(Violation("BadMode", f"mode must be partial or exact, not {rule.mode!r}", rid))
    return out


def validate_ruleset(ruleset: RuleSet, schema: dict[str, list[str]] | None = None) -> list[Violation]:
    out = []
    seen = set()
    for rule in ruleset.rules:
        if rule.rule_id in seen:
            out.append(Violation("DuplicateId", f"duplicate rule id {rule.rule_id!r}",
                                 rule.rule_id))
        seen.add(rule.rule_id)
        out.extend(validate_rule(rule, schema))
    return out


_RULE_KEYS = {"rule_id", "selector", "result_name", "parent_path", "pattern",
              "mode", "enabled"}


def ruleset_from_dict(doc: dict) -> RuleSet:
    if not isinstance(doc, dict):
        raise RulesetParseError("ruleset file must hold a JSON object")
    version = doc.get("format_version")
    if version != RULESET_VERSION:
        raise UnsupportedVersionError(
            f"format_version {version!r} not supported (expected {RULESET_VERSION})")
    raw_rules = doc.get("rules")
    if not isinstance(raw_rules, list):
        raise RulesetParseError("ruleset is missing the rules list")
    rules = []
    seen = set()
    for i, raw in enumerate(raw_rules):
        if not isinstance(raw, dict):
            raise RulesetParseError(f"rules[{i}] is not an object")
        missing = {"rule_id", "selector", "result_name", "pattern"} - raw.keys()
        if missing:
            raise RulesetParseError(f"rules[{i}] is missing {sorted(missing)}")
        fields = {k: raw[k] for k in raw.keys() & _RULE_KEYS}
        fields.setdefault("parent_path", "")  # absent parent means a root-level leaf
        rule = DetectionRule(**fields)
        if rule.rule_id in seen:
            raise RulesetParseError(f"rules[{i}]: duplicate rule id {rule.rule_id!r}")
        seen.add(rule.rule_id)
        rules.append(rule)
    return RuleSet(format_version=version, rules=rules)


def load_ruleset(path: str | Path) -> RuleSet:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise RulesetParseError(f"{path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RulesetParseError(
            f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return ruleset_from_dict(doc)


def ruleset_to_dict(ruleset: RuleSet) -> dict:
    return {"format_version": ruleset.format_version,
            "rules": [asdict(r) for r in ruleset.rules]}


def save_ruleset(ruleset: RuleSet, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(ruleset_to_dict(ruleset), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8")


# result tree ----------------------------------------------------------------

@dataclass
class ResultNode:
    label: str
    hit_count: int = 0
    distinct_count: int = 0
    evidence: list = field(default_factory=list)
    children: dict = field(default_factory=dict)  # label -> ResultNode

    def child(self, label: str) -> "ResultNode":
        node = self.children.get(label)
        if node is None:
            node = self.children[label] = ResultNode(label)
        return node


@dataclass
class ResultTree:
    root: ResultNode
    skipped: list = field(default_factory=list)  # (rule_id, reason)


def _evidence_entry(row: dict) -> dict:
    last = row.get("last_ts", row["_ts"])
    return {"table": row["_table"], "row_id": row["id"],
            "value": row["_matched"], "first_ts": row["_ts"], "last_ts": last}


_SCAN_CHUNK = 5  # rules per combined scan; larger groups fan out to threads


def _scan_chunk(conn, table: str, column: str,
                group: list[DetectionRule], close: bool = False) -> dict[str, list[dict]]:
    """One combined ordered scan for up to a handful of same-column rules.

    Returns rule_id -> matching rows; a row matching several rules lands in
    each, exactly as separate search() calls would report it.
    """
    predicates, params = [], []
    for rule in group:
        if rule.mode == "partial":
            predicates.append(f"{column} LIKE ? ESCAPE '\\'")
            params.append(_like_param(rule.pattern))
        else:
            predicates.append(f"{column} = ? COLLATE NOCASE")
            params.append(rule.pattern)
    ts_col = SEARCHABLE[table][0]
    sql = (f"SELECT * FROM {table} WHERE {' OR '.join(predicates)} "
           f"ORDER BY {ts_col}, id")
    folded = [(r, ascii_lower(r.pattern)) for r in group]
    out: dict[str, list[dict]] = {r.rule_id: [] for r in group}
    try:
        for raw in conn.execute(sql, params):
            row = dict(raw)
            row["_table"] = table
            row["_matched"] = raw[column]
            row["_ts"] = raw[ts_col]
            value = ascii_lower(raw[column]) if raw[column] is not None else None
            if value is None:
                continue
            for rule, needle in folded:
                if (needle in value) if rule.mode == "partial" else (needle == value):
                    out[rule.rule_id].append(row)
    finally:
        if close:
            conn.close()
    return out


def _match_rows(store: Store, table: str, column: str,
                group: list[DetectionRule]) -> dict[str, list[dict]]:
    """Evaluate all rules on one column; big groups scan in parallel.

    SQLite releases the GIL while stepping, so chunked scans on separate
    read-only connections overlap; results are merged per rule id, keeping
    assembly deterministic.
    """
    if len(group) == 1:
        rule = group[0]
        return {rule.rule_id: store.search(f"{table}.{column}", rule.pattern, rule.mode)}
    chunks = [group[i:i + _SCAN_CHUNK] for i in range(0, len(group), _SCAN_CHUNK)]
    if len(chunks) == 1:
        return _scan_chunk(store.conn, table, column, chunks[0])
    from concurrent.futures import ThreadPoolExecutor
    out: dict[str, list[dict]] = {}
    with ThreadPoolExecutor(max_workers=min(4, len(chunks))) as pool:
        futures = [pool.submit(_scan_chunk, store.clone_connection(), table,
                               column, chunk, True) for chunk in chunks]
        for future in futures:
            out.update(future.result())
    return out


def evaluate(store: Store, ruleset: RuleSet, verbose: bool = False) -> ResultTree:
    """Run every enabled rule against the store and assemble the tree.

    Zero-hit rules are omitted unless verbose; rules whose selector does not
    resolve are skipped and reported, never fatal. Evaluation performs zero
    writes.
    """
    root = ResultNode("Results")
    tree = ResultTree(root)
    groups: dict[tuple[str, str], list[DetectionRule]] = {}
    ordered: list[DetectionRule] = []
    for rule in ruleset.rules:
        if not rule.enabled:
            continue
        try:
            table, column = parse_selector(rule.selector)
        except UnknownSelectorError as exc:
            tree.skipped.append((rule.rule_id, str(exc)))
            continue
        groups.setdefault((table, column), []).append(rule)
        ordered.append(rule)

    hits: dict[str, list[dict]] = {}
    for (table, column), group in groups.items():
        hits.update(_match_rows(store, table, column, group))

    for rule in ordered:
        rows = hits.get(rule.rule_id, [])
        if not rows and not verbose:
            continue
        node = root
        if rule.parent_path:
            for seg in rule.parent_path.split("/"):
                node = node.child(seg)
        leaf = node.child(rule.result_name)
        leaf.evidence.extend(_evidence_entry(r) for r in rows)
        leaf.hit_count = len(leaf.evidence)
        leaf.distinct_count = len({e["value"] for e in leaf.evidence})
    _roll_up(root)
    return tree


def _roll_up(node: ResultNode) -> int:
    total = len(node.evidence)
    for child in node.children.values():
        total += _roll_up(child)
    node.hit_count = total
    if not node.children:
        node.distinct_count = len({e["value"] for e in node.evidence})
    return total


def tree_to_dict(node: ResultNode, evidence_limit: int | None = EVIDENCE_EXPORT_LIMIT) -> dict:
    """Canonical serializable form; children ordered by label."""
    evidence = node.evidence
    truncated = evidence_limit is not None and len(evidence) > evidence_limit
    out = {
        "label": node.label,
        "hit_count": node.hit_count,
        "distinct_count": node.distinct_count,
        "evidence": evidence[:evidence_limit] if truncated else list(evidence),
        "evidence_truncated": truncated,
        "children": [tree_to_dict(node.children[k], evidence_limit)
                     for k in sorted(node.children)],
    }
    return out


def tree_to_json(tree: ResultTree, evidence_limit: int | None = EVIDENCE_EXPORT_LIMIT) -> str:
    doc = {"tree": tree_to_dict(tree.root, evidence_limit),
           "skipped_rules": [{"rule_id": rid, "reason": reason}
                             for rid, reason in tree.skipped]}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
