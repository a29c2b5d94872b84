"""Human-readable run summaries and evidence reports.

Every number rendered here is read back from the store (rows or counters),
never recomputed, and the output is deterministic: identical store +
ruleset always produce byte-identical documents, so reports can be
re-generated for the case file at any time.
"""

from __future__ import annotations

import html as _html
import json

from .rules import ResultTree, tree_to_dict
from .store import Store

_TOP_SELECTORS = [
    ("Top HTTP hosts", "http_transactions.host"),
    ("Top DNS names", "dns_records.query_name"),
    ("Top user agents", "http_transactions.user_agent"),
    ("Mail senders", "smtp_envelopes.mail_from"),
    ("Mail recipient lists", "smtp_envelopes.rcpt_to"),
]


def stats_summary(store: Store) -> str:
    """Counter block shown when an analysis finishes."""
    info = store.run_info()
    counters = store.counters()
    lines = [f"analysis: {info.get('name', '?')}"]
    if store.incomplete:
        lines.append("WARNING: run is not finalized; numbers may be partial")
    for cf in info.get("capture_files", []):
        lines.append(f"capture: {cf['path']}")
        lines.append(f"  bytes={cf['byte_length']} packets={cf['packet_count']}")
        lines.append(f"  md5={cf['md5']}")
        lines.append(f"  sha1={cf['sha1']}")
    dur = info.get("duration_s")
    if dur is not None:
        lines.append(f"duration: {dur:.3f} s")
        lines.append(f"throughput: {info.get('throughput_bps', 0) / 1e6:.1f} MB/s")
    lines.append("counters:")
    for name, value in sorted(counters.items()):
        lines.append(f"  {name:36s} {value}")
    return "\n".join(lines) + "\n"


def _top_sections(store: Store, n: int = 10) -> list[tuple[str, list[tuple[str, int]]]]:
    out = []
    for title, selector in _TOP_SELECTORS:
        rows = store.top_values(selector, n)
        if rows:
            out.append((title, rows))
    return out


def _render_tree_text(node: dict, depth: int = 0, lines: list | None = None) -> list[str]:
    if lines is None:
        lines = []
    lines.append(f"{'  ' * depth}{node['label']} [{node['hit_count']}]")
    for child in node["children"]:
        _render_tree_text(child, depth + 1, lines)
    return lines


def build_report(store: Store, tree: ResultTree | None = None,
                 fmt: str = "text") -> bytes:
    """Full report document; fmt is 'text' or 'html' (single self-contained file)."""
    if fmt == "text":
        return _build_text(store, tree).encode("utf-8")
    if fmt == "html":
        return _build_html(store, tree).encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")


def _build_text(store: Store, tree: ResultTree | None) -> str:
    parts = [stats_summary(store)]
    if tree is not None:
        root = tree_to_dict(tree.root)
        if root["children"] or root["evidence"]:
            parts.append("detections:")
            parts.append("\n".join(_render_tree_text(root)))
        if tree.skipped:
            parts.append("skipped rules:")
            for rid, reason in tree.skipped:
                parts.append(f"  {rid}: {reason}")
    for title, rows in _top_sections(store):
        parts.append(f"{title}:")
        for value, count in rows:
            parts.append(f"  {count:6d}  {value}")
    return "\n".join(parts) + "\n"


def _build_html(store: Store, tree: ResultTree | None) -> str:
    esc = _html.escape
    info = store.run_info()
    counters = store.counters()
    body = [f"<h1>Analysis report: {esc(str(info.get('name', '?')))}</h1>"]
    body.append("<h2>Capture files</h2><table><tr><th>path</th><th>bytes</th>"
                "<th>packets</th><th>md5</th><th>sha1</th></tr>")
    for cf in info.get("capture_files", []):
        body.append(f"<tr><td>{esc(cf['path'])}</td><td>{cf['byte_length']}</td>"
                    f"<td>{cf['packet_count']}</td><td><code>{cf['md5']}</code></td>"
                    f"<td><code>{cf['sha1']}</code></td></tr>")
    body.append("</table>")

    if tree is not None:
        root = tree_to_dict(tree.root)
        if root["children"] or root["evidence"]:
            body.append("<h2>Detections</h2>")
            body.append(_tree_html(root))

    for title, rows in _top_sections(store):
        body.append(f"<h2>{esc(title)}</h2><table>")
        for value, count in rows:
            body.append(f"<tr><td>{count}</td><td>{esc(str(value))}</td></tr>")
        body.append("</table>")

    body.append("<h2>Counters</h2><table>")
    for name, value in sorted(counters.items()):
        body.append(f"<tr><td>{esc(name)}</td><td>{value}</td></tr>")
    body.append("</table>")
    style = ("body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}"
             "td,th{border:1px solid #999;padding:2px 8px}ul{list-style:none}"
             "li span.count{color:#666}")
    return ("<!DOCTYPE html><html><head><meta charset='utf-8'>"
            f"<title>Analysis report</title><style>{style}</style></head><body>"
            + "".join(body) + "</body></html>")


def _tree_html(node: dict) -> str:
    esc = _html.escape
    out = [f"<li>{esc(node['label'])} <span class='count'>[{node['hit_count']}]</span>"]
    if node["children"]:
        out.append("<ul>")
        out.extend(_tree_html(c) for c in node["children"])
        out.append("</ul>")
    out.append("</li>")
    return "<ul>" + "".join(out) + "</ul>" if node["label"] == "Results" else "".join(out)


def tree_json_document(tree: ResultTree) -> str:
    """Tree serialization shared by report tooling and the service API."""
    from .rules import tree_to_json
    return tree_to_json(tree)


def run_document(store: Store) -> dict:
    """AnalysisRun + stats as one JSON-ready object."""
    info = store.run_info()
    info["counters"] = store.counters()
    info["incomplete"] = store.incomplete
    return info


def to_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
