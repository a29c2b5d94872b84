"""Read-only JSON API and static UI host for the investigator frontend.

The service opens the store with read-only connections only; there is no
code path that can write to it. The single writable resource is the
ruleset file (PUT /api/rules), guarded by validation and a lock. Each
request gets its own store connection, so concurrent readers are safe.

Endpoints:
    GET  /api/run                      run provenance + stats
    GET  /api/schema                   searchable table.column selectors
    GET  /api/tree                     evaluated result tree for the ruleset
    GET  /api/search?selector=&q=&mode=&limit=
    GET  /api/rules                    current ruleset
    PUT  /api/rules                    replace ruleset (validated)
    POST /api/rules/preview            evaluate one candidate rule, no save
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .errors import RulesetParseError, UnknownSelectorError
from .report import run_document, to_json
from .rules import (
    DetectionRule,
    RuleSet,
    evaluate,
    load_ruleset,
    ruleset_from_dict,
    ruleset_to_dict,
    save_ruleset,
    tree_to_json,
    validate_rule,
    validate_ruleset,
)
from .store import Store, searchable_selectors

_MAX_BODY = 10 << 20
_SEARCH_LIMIT = 1000

_FALLBACK_PAGE = b"""<!DOCTYPE html><html><head><meta charset="utf-8">
<title>capture analysis API</title></head><body>
<h1>Capture analysis service</h1>
<p>No UI bundle is installed. The JSON API is live; see /api/run,
/api/schema, /api/tree, /api/search, /api/rules.</p></body></html>"""

_CONTENT_TYPES = {".html": "text/html", ".js": "application/javascript",
                  ".css": "text/css", ".map": "application/json",
                  ".json": "application/json", ".svg": "image/svg+xml",
                  ".png": "image/png", ".ico": "image/x-icon"}


class ServiceState:
    """Shared immutable-ish context handed to request handlers."""

    def __init__(self, store_path: str, ruleset_path: str | None,
                 static_dir: str | None = None):
        self.store_path = store_path
        self.ruleset_path = ruleset_path
        self.static_dir = static_dir
        self.rules_lock = threading.Lock()

    def open_store(self) -> Store:
        return Store(self.store_path)

    def current_ruleset(self) -> RuleSet:
        if not self.ruleset_path or not Path(self.ruleset_path).exists():
            return RuleSet()
        return load_ruleset(self.ruleset_path)


class ApiHandler(BaseHTTPRequestHandler):
    server_version = "tapsight"
    protocol_version = "HTTP/1.1"

    # populated by make_server
    state: ServiceState

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, body: bytes, content_type="application/json") -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type + "; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Cache-Control", "no-store")
        self.end_headers()
        self.wfile.write(body)

    def _json(self, status: int, obj) -> None:
        self._send(status, to_json(obj).encode("utf-8"))

    def _error(self, status: int, message: str, violations=None) -> None:
        doc = {"error": message}
        if violations is not None:
            doc["violations"] = violations
        self._json(status, doc)

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length", 0))
        if length > _MAX_BODY:
            raise ValueError("request body too large")
        return self.rfile.read(length)

    # -- GET ------------------------------------------------------------

    def do_GET(self):
        url = urlparse(self.path)
        try:
            if url.path == "/api/run":
                store = self.state.open_store()
                try:
                    self._json(200, run_document(store))
                finally:
                    store.close()
            elif url.path == "/api/schema":
                self._json(200, {"tables": searchable_selectors()})
            elif url.path == "/api/tree":
                self._get_tree()
            elif url.path == "/api/search":
                self._get_search(parse_qs(url.query))
            elif url.path == "/api/rules":
                self._json(200, ruleset_to_dict(self.state.current_ruleset()))
            elif url.path.startswith("/api/"):
                self._error(404, f"no such endpoint {url.path}")
            else:
                self._static(url.path)
        except UnknownSelectorError as exc:
            self._error(404, str(exc))
        except RulesetParseError as exc:
            self._error(500, f"ruleset file unreadable: {exc}")
        except BrokenPipeError:
            pass
        except Exception as exc:  # never leak a traceback as a 500 page
            self._error(500, f"{type(exc).__name__}: {exc}")

    def _get_tree(self):
        ruleset = self.state.current_ruleset()
        store = self.state.open_store()
        try:
            tree = evaluate(store, ruleset)
        finally:
            store.close()
        self._send(200, tree_to_json(tree).encode("utf-8"))

    def _get_search(self, query: dict):
        selector = (query.get("selector") or [""])[0]
        pattern = (query.get("q") or [""])[0]
        mode = (query.get("mode") or ["partial"])[0]
        try:
            limit = int((query.get("limit") or [str(_SEARCH_LIMIT)])[0])
        except ValueError:
            return self._error(400, "limit must be an integer")
        if mode not in ("partial", "exact"):
            return self._error(400, f"mode must be partial or exact, not {mode!r}")
        store = self.state.open_store()
        try:
            rows = store.search(selector, pattern, mode, limit=limit)
            total = store.search_count(selector, pattern, mode)
        finally:
            store.close()
        self._json(200, {"selector": selector, "q": pattern, "mode": mode,
                         "total": total, "rows": rows})

    def _static(self, path: str):
        if path == "/":
            path = "/index.html"
        static_dir = self.state.static_dir
        if static_dir:
            target = (Path(static_dir) / path.lstrip("/")).resolve()
            if str(target).startswith(str(Path(static_dir).resolve())) and target.is_file():
                ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
                self._send(200, target.read_bytes(), ctype)
                return
        if path == "/index.html":
            self._send(200, _FALLBACK_PAGE, "text/html")
        else:
            self._error(404, f"no such path {path}")

    # -- PUT / POST -------------------------------------------------------

    def do_PUT(self):
        if urlparse(self.path).path != "/api/rules":
            return self._error(404, "only /api/rules accepts PUT")
        if not self.state.ruleset_path:
            return self._error(400, "service started without a ruleset file")
        try:
            doc = json.loads(self._body())
            ruleset = ruleset_from_dict(doc)
        except (ValueError, RulesetParseError) as exc:
            return self._error(400, str(exc), violations=[{"code": "ParseError",
                                                           "message": str(exc)}])
        violations = validate_ruleset(ruleset)
        if violations:
            return self._error(400, "ruleset has violations",
                               violations=[v.__dict__ for v in violations])
        with self.state.rules_lock:
            save_ruleset(ruleset, self.state.ruleset_path)
        self._json(200, {"ok": True, "rules": len(ruleset.rules)})

    def do_POST(self):
        if urlparse(self.path).path != "/api/rules/preview":
            return self._error(404, "only /api/rules/preview accepts POST")
        try:
            doc = json.loads(self._body())
            if not isinstance(doc, dict):
                raise ValueError("rule document must be a JSON object")
            rule = DetectionRule(
                rule_id=doc.get("rule_id", "preview"),
                selector=doc.get("selector", ""),
                result_name=doc.get("result_name", "preview"),
                parent_path=doc.get("parent_path", ""),
                pattern=doc.get("pattern", ""),
                mode=doc.get("mode", "partial"),
            )
        except (ValueError, TypeError) as exc:
            return self._error(400, f"bad rule document: {exc}")
        violations = validate_rule(rule)
        if violations:
            return self._error(400, "rule has violations",
                               violations=[v.__dict__ for v in violations])
        store = self.state.open_store()
        try:
            hit_count = store.search_count(rule.selector, rule.pattern, rule.mode)
            sample = store.search(rule.selector, rule.pattern, rule.mode, limit=20)
        except UnknownSelectorError as exc:
            return self._error(404, str(exc))
        finally:
            store.close()
        distinct = len({row["_matched"] for row in sample})
        self._json(200, {"hit_count": hit_count, "sample": sample,
                         "sample_distinct": distinct})


def make_server(store_path: str, ruleset_path: str | None, bind: str = "127.0.0.1:0",
                static_dir: str | None = None) -> ThreadingHTTPServer:
    """Build the HTTP service; caller runs serve_forever() (or a thread does)."""
    host, _, port = bind.rpartition(":")
    state = ServiceState(store_path, ruleset_path, static_dir)
    handler = type("BoundApiHandler", (ApiHandler,), {"state": state})
    server = ThreadingHTTPServer((host or "127.0.0.1", int(port)), handler)
    server.daemon_threads = True
    return server


def serve(store_path: str, ruleset_path: str | None, bind: str,
          static_dir: str | None = None) -> None:
    server = make_server(store_path, ruleset_path, bind, static_dir)
    host, port = server.server_address[:2]
    print(f"serving analysis API on http://{host}:{port}/ (Ctrl-C stops)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
