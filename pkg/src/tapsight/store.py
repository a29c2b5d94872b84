"""Single-file relational store for run provenance, flows and protocol
metadata.

One analysis produces one self-contained SQLite file with one table per
parsed protocol. Writes happen only between create_run() and
finalize_run(), batched inside transactions so bulk ingest does not
dominate the run time; examination afterwards is read-only by
construction (connections opened with mode=ro).

No payload bytes are ever stored here: flows, datagram logs and protocol
rows carry header metadata and counts only.
"""

from __future__ import annotations

import json
import sqlite3
from dataclasses import dataclass
from pathlib import Path

from .dpi.dns import DnsRecord
from .dpi.ftp import FtpSession
from .dpi.http import HttpTransaction
from .dpi.mail import MailEnvelope, Pop3Session
from .errors import (
    ConstraintViolationError,
    FinalizedRunError,
    PathExistsError,
    UnknownSelectorError,
)
from .flows import FlowRecord

BATCH_SIZE = 1000
SCHEMA_VERSION = 1


@dataclass
class IcmpEntry:
    ts: float
    src_ip: str
    dst_ip: str
    icmp_type: int
    icmp_code: int
    length: int


@dataclass
class UdpEntry:
    ts: float
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    length: int


_TABLES: dict[str, str] = {
    "runs": """CREATE TABLE runs (
        id INTEGER PRIMARY KEY, name TEXT NOT NULL, created_ts REAL NOT NULL,
        schema_version INTEGER NOT NULL, config TEXT NOT NULL,
        finalized INTEGER NOT NULL DEFAULT 0, duration_s REAL, throughput_bps REAL,
        stats TEXT)""",
    "capture_files": """CREATE TABLE capture_files (
        id INTEGER PRIMARY KEY, run_id INTEGER NOT NULL REFERENCES runs(id),
        position INTEGER NOT NULL, path TEXT NOT NULL, byte_length INTEGER NOT NULL,
        md5 TEXT NOT NULL, sha1 TEXT NOT NULL, magic_variant TEXT NOT NULL,
        link_type INTEGER NOT NULL, packet_count INTEGER)""",
    "flows": """CREATE TABLE flows (
        id INTEGER PRIMARY KEY, run_id INTEGER NOT NULL,
        client_ip TEXT NOT NULL, client_port INTEGER NOT NULL,
        server_ip TEXT NOT NULL, server_port INTEGER NOT NULL,
        first_ts REAL NOT NULL, last_ts REAL NOT NULL, duration_s REAL NOT NULL,
        bytes_c2s INTEGER NOT NULL, bytes_s2c INTEGER NOT NULL,
        packets_c2s INTEGER NOT NULL, packets_s2c INTEGER NOT NULL,
        delivered_c2s INTEGER NOT NULL, delivered_s2c INTEGER NOT NULL,
        termination TEXT NOT NULL, protocol TEXT NOT NULL)""",
    "icmp_log": """CREATE TABLE icmp_log (
        id INTEGER PRIMARY KEY, run_id INTEGER NOT NULL, ts REAL NOT NULL,
        src_ip TEXT NOT NULL, dst_ip TEXT NOT NULL,
        icmp_type INTEGER NOT NULL, icmp_code INTEGER NOT NULL, length INTEGER NOT NULL)""",
    "udp_log": """CREATE TABLE udp_log (
        id INTEGER PRIMARY KEY, run_id INTEGER NOT NULL, ts REAL NOT NULL,
        src_ip TEXT NOT NULL, dst_ip TEXT NOT NULL,
        src_port INTEGER NOT NULL, dst_port INTEGER NOT NULL, length INTEGER NOT NULL)""",
    "http_transactions": """CREATE TABLE http_transactions (
        id INTEGER PRIMARY KEY, run_id INTEGER NOT NULL,
        flow_id INTEGER NOT NULL REFERENCES flows(id), ts REAL NOT NULL,
        method TEXT, uri TEXT, version TEXT, host TEXT, user_agent TEXT,
        referer TEXT, request_content_type TEXT, response_content_type TEXT,
        response_status INTEGER, request_bytes INTEGER NOT NULL,
        response_bytes INTEGER NOT NULL, parse_error INTEGER NOT NULL)""",
    "dns_records": """CREATE TABLE dns_records (
        id INTEGER PRIMARY KEY, run_id INTEGER NOT NULL, flow_id INTEGER,
        ts REAL NOT NULL, transport TEXT NOT NULL, txid INTEGER NOT NULL,
        query_name TEXT NOT NULL, query_type TEXT NOT NULL,
        response_code INTEGER, answers TEXT NOT NULL)""",
    "smtp_envelopes": """CREATE TABLE smtp_envelopes (
        id INTEGER PRIMARY KEY, run_id INTEGER NOT NULL,
        flow_id INTEGER NOT NULL REFERENCES flows(id), ts REAL NOT NULL,
        helo TEXT, mail_from TEXT, rcpt_to TEXT NOT NULL, subject TEXT,
        message_bytes INTEGER NOT NULL)""",
    "pop3_sessions": """CREATE TABLE pop3_sessions (
        id INTEGER PRIMARY KEY, run_id INTEGER NOT NULL,
        flow_id INTEGER NOT NULL REFERENCES flows(id), ts REAL NOT NULL,
        username TEXT, commands TEXT NOT NULL, retrieved_count INTEGER NOT NULL,
        retrieved_bytes INTEGER NOT NULL)""",
    "ftp_sessions": """CREATE TABLE ftp_sessions (
        id INTEGER PRIMARY KEY, run_id INTEGER NOT NULL,
        flow_id INTEGER NOT NULL REFERENCES flows(id), ts REAL NOT NULL,
        username TEXT, greeting TEXT, commands TEXT NOT NULL, transfers TEXT NOT NULL)""",
    "counters": """CREATE TABLE counters (
        name TEXT PRIMARY KEY, value INTEGER NOT NULL)""",
}

# table -> (timestamp column for result ordering, searchable text columns)
SEARCHABLE: dict[str, tuple[str, tuple[str, ...]]] = {
    "flows": ("first_ts", ("client_ip", "server_ip", "termination", "protocol")),
    "http_transactions": ("ts", ("method", "uri", "version", "host", "user_agent",
                                 "referer", "request_content_type",
                                 "response_content_type")),
    "dns_records": ("ts", ("transport", "query_name", "query_type", "answers")),
    "smtp_envelopes": ("ts", ("helo", "mail_from", "rcpt_to", "subject")),
    "pop3_sessions": ("ts", ("username", "commands")),
    "ftp_sessions": ("ts", ("username", "greeting", "commands", "transfers")),
    "udp_log": ("ts", ("src_ip", "dst_ip")),
    "icmp_log": ("ts", ("src_ip", "dst_ip")),
    "capture_files": ("position", ("path", "md5", "sha1")),
}

_FLOW_REF_TABLES = {"http_transactions", "smtp_envelopes", "pop3_sessions", "ftp_sessions"}


def searchable_selectors() -> dict[str, list[str]]:
    return {table: list(cols) for table, (_, cols) in SEARCHABLE.items()}


def parse_selector(selector: str) -> tuple[str, str]:
    table, dot, column = selector.partition(".")
    if not dot or table not in SEARCHABLE or column not in SEARCHABLE[table][1]:
        raise UnknownSelectorError(f"unknown selector {selector!r}")
    return table, column


def _like_param(pattern: str) -> str:
    escaped = pattern.replace("\\", "\\\\").replace("%", "\\%").replace("_", "\\_")
    return f"%{escaped}%"


class StoreWriter:
    """Write handle used by the analysis pipeline; single-threaded."""

    def __init__(self, path: str | Path, name: str, capture_files: list,
                 config: dict, created_ts: float, batch_size: int = BATCH_SIZE):
        path = Path(path)
        if path.exists():
            raise PathExistsError(f"refusing to overwrite {path}")
        self.path = str(path)
        self.conn = sqlite3.connect(self.path)
        self.conn.execute("PRAGMA journal_mode=MEMORY")
        self.conn.execute("PRAGMA synchronous=OFF")
        for sql in _TABLES.values():
            self.conn.execute(sql)
        self.run_id = 1
        self.conn.execute(
            "INSERT INTO runs (id, name, created_ts, schema_version, config) "
            "VALUES (?, ?, ?, ?, ?)",
            (self.run_id, name, created_ts, SCHEMA_VERSION, json.dumps(config, sort_keys=True)))
        for pos, cf in enumerate(capture_files):
            self.conn.execute(
                "INSERT INTO capture_files (run_id, position, path, byte_length,"
                " md5, sha1, magic_variant, link_type, packet_count)"
                " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (self.run_id, pos, cf.path, cf.byte_length, cf.md5, cf.sha1,
                 cf.magic_variant, cf.link_type, cf.packet_count))
        self.conn.commit()
        self.batch_size = batch_size
        self.finalized = False
        self._batch: dict[str, list[tuple]] = {t: [] for t in _TABLES}
        self._batched = 0
        self._next_id = {t: 1 for t in _TABLES}
        self._flow_ids: set[int] = set()
        self.row_counts = {t: 0 for t in _TABLES}

    def insert_record(self, record) -> int:
        """Queue one record; returns its assigned row id.

        Raises FinalizedRunError after finalize_run and
        ConstraintViolationError for protocol rows referencing a flow id
        that was never inserted.
        """
        if self.finalized:
            raise FinalizedRunError("run is finalized; store is read-only")
        table, row, rid = self._encode(record)
        if table in _FLOW_REF_TABLES and row[2] not in self._flow_ids:
            raise ConstraintViolationError(
                f"{table} row references unknown flow id {row[2]}")
        self._batch[table].append(row)
        self._batched += 1
        self.row_counts[table] += 1
        if table == "flows":
            self._flow_ids.add(rid)
        if self._batched >= self.batch_size:
            self.flush()
        return rid

    def _take_id(self, table: str) -> int:
        rid = self._next_id[table]
        self._next_id[table] = rid + 1
        return rid

    def _encode(self, r) -> tuple[str, tuple, int]:
        run = self.run_id
        if isinstance(r, FlowRecord):
            rid = r.flow_id
            self._next_id["flows"] = max(self._next_id["flows"], rid + 1)
            return "flows", (rid, run, r.client_ip, r.client_port, r.server_ip,
                             r.server_port, r.first_ts, r.last_ts, r.duration,
                             r.bytes_c2s, r.bytes_s2c, r.packets_c2s, r.packets_s2c,
                             r.delivered_c2s, r.delivered_s2c, r.termination,
                             r.protocol_label), rid
        if isinstance(r, HttpTransaction):
            rid = self._take_id("http_transactions")
            return "http_transactions", (rid, run, r.flow_id, r.ts, r.method, r.uri,
                                         r.version, r.host, r.user_agent, r.referer,
                                         r.request_content_type, r.response_content_type,
                                         r.response_status, r.request_bytes,
                                         r.response_bytes, int(r.parse_error)), rid
        if isinstance(r, DnsRecord):
            rid = self._take_id("dns_records")
            return "dns_records", (rid, run, r.flow_id, r.ts, r.transport, r.txid,
                                   r.query_name, r.query_type, r.response_code,
                                   json.dumps(r.answers)), rid
        if isinstance(r, MailEnvelope):
            rid = self._take_id("smtp_envelopes")
            return "smtp_envelopes", (rid, run, r.flow_id, r.ts, r.helo, r.mail_from,
                                      json.dumps(r.rcpt_to), r.subject,
                                      r.message_bytes), rid
        if isinstance(r, Pop3Session):
            rid = self._take_id("pop3_sessions")
            return "pop3_sessions", (rid, run, r.flow_id, r.ts, r.username,
                                     json.dumps(r.commands), r.retrieved_count,
                                     r.retrieved_bytes), rid
        if isinstance(r, FtpSession):
            rid = self._take_id("ftp_sessions")
            return "ftp_sessions", (rid, run, r.flow_id, r.ts, r.username, r.greeting,
                                    json.dumps(r.commands), json.dumps(r.transfers)), rid
        if isinstance(r, IcmpEntry):
            rid = self._take_id("icmp_log")
            return "icmp_log", (rid, run, r.ts, r.src_ip, r.dst_ip, r.icmp_type,
                                r.icmp_code, r.length), rid
        if isinstance(r, UdpEntry):
            rid = self._take_id("udp_log")
            return "udp_log", (rid, run, r.ts, r.src_ip, r.dst_ip, r.src_port,
                               r.dst_port, r.length), rid
        raise TypeError(f"cannot store record of type {type(r).__name__}")

    def flush(self) -> None:
        if not self._batched:
            return
        cur = self.conn.cursor()
        cur.execute("BEGIN")
        for table in ("flows", "http_transactions", "dns_records", "smtp_envelopes",
                      "pop3_sessions", "ftp_sessions", "icmp_log", "udp_log"):
            rows = self._batch[table]
            if rows:
                marks = ",".join("?" * len(rows[0]))
                cur.executemany(f"INSERT INTO {table} VALUES ({marks})", rows)
                rows.clear()
        self.conn.commit()
        self._batched = 0

    def finalize_run(self, stats: dict, duration_s: float, throughput_bps: float) -> None:
        """Flush everything, persist stats, and demote the handle to read-only."""
        if self.finalized:
            raise FinalizedRunError("run already finalized")
        self.flush()
        counters = stats.get("counters", {})
        self.conn.executemany("INSERT OR REPLACE INTO counters VALUES (?, ?)",
                              sorted(counters.items()))
        self.conn.execute(
            "UPDATE runs SET finalized=1, duration_s=?, throughput_bps=?, stats=? "
            "WHERE id=?",
            (duration_s, throughput_bps, json.dumps(stats, sort_keys=True), self.run_id))
        self.conn.commit()
        self.conn.execute("PRAGMA journal_mode=DELETE")
        self.conn.close()
        self.finalized = True


class Store:
    """Read-only query handle over a finalized store."""

    def __init__(self, path: str | Path):
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(str(path))
        self.path = str(path)
        self.conn = sqlite3.connect(f"file:{self.path}?mode=ro&immutable=0", uri=True)
        # memory-mapped reads make full-table keyword scans several times
        # faster; large stores beyond the cap just fall back to pread
        self.conn.execute("PRAGMA mmap_size=2147418112")
        self.conn.row_factory = sqlite3.Row
        row = self.conn.execute("SELECT finalized FROM runs LIMIT 1").fetchone()
        self.incomplete = row is None or not row["finalized"]

    def close(self) -> None:
        self.conn.close()

    def clone_connection(self) -> sqlite3.Connection:
        """Extra read-only connection for a worker thread; caller closes it.

        check_same_thread is off because the clone is handed to exactly one
        worker; it is never shared."""
        conn = sqlite3.connect(f"file:{self.path}?mode=ro&immutable=0", uri=True,
                               check_same_thread=False)
        conn.execute("PRAGMA mmap_size=2147418112")
        conn.row_factory = sqlite3.Row
        return conn

    def run_info(self) -> dict:
        run = self.conn.execute("SELECT * FROM runs LIMIT 1").fetchone()
        files = self.conn.execute(
            "SELECT * FROM capture_files ORDER BY position").fetchall()
        info = dict(run) if run else {}
        if info.get("config"):
            info["config"] = json.loads(info["config"])
        if info.get("stats"):
            info["stats"] = json.loads(info["stats"])
        info["capture_files"] = [dict(f) for f in files]
        return info

    def counters(self) -> dict[str, int]:
        return {name: value for name, value in
                self.conn.execute("SELECT name, value FROM counters ORDER BY name")}

    def table_counts(self) -> dict[str, int]:
        return {t: self.conn.execute(f"SELECT COUNT(*) FROM {t}").fetchone()[0]
                for t in _TABLES}

    def search(self, selector: str, pattern: str, mode: str = "partial",
               limit: int | None = None) -> list[dict]:
        """Keyword search over one text column.

        partial: ASCII-case-insensitive substring containment.
        exact:   ASCII-case-insensitive full-string equality.
        Results ordered by timestamp then row id.
        """
        table, column = parse_selector(selector)
        if mode not in ("partial", "exact"):
            raise ValueError(f"mode must be 'partial' or 'exact', not {mode!r}")
        ts_col = SEARCHABLE[table][0]
        if mode == "partial":
            where, param = f"{column} LIKE ? ESCAPE '\\'", _like_param(pattern)
        else:
            where, param = f"{column} = ? COLLATE NOCASE", pattern
        sql = f"SELECT * FROM {table} WHERE {where} ORDER BY {ts_col}, id"
        if limit is not None:
            sql += f" LIMIT {int(limit)}"
        out = []
        for row in self.conn.execute(sql, (param,)):
            d = dict(row)
            d["_table"] = table
            d["_matched"] = row[column]
            d["_ts"] = row[ts_col]
            out.append(d)
        return out

    def search_count(self, selector: str, pattern: str, mode: str = "partial") -> int:
        table, column = parse_selector(selector)
        if mode == "partial":
            where, param = f"{column} LIKE ? ESCAPE '\\'", _like_param(pattern)
        else:
            where, param = f"{column} = ? COLLATE NOCASE", pattern
        return self.conn.execute(
            f"SELECT COUNT(*) FROM {table} WHERE {where}", (param,)).fetchone()[0]

    def top_values(self, selector: str, n: int = 10) -> list[tuple[str, int]]:
        table, column = parse_selector(selector)
        sql = (f"SELECT {column}, COUNT(*) c FROM {table} WHERE {column} IS NOT NULL "
               f"AND {column} != '' GROUP BY {column} ORDER BY c DESC, {column} LIMIT ?")
        return [(r[0], r[1]) for r in self.conn.execute(sql, (n,))]


def open_readonly(path: str | Path) -> Store:
    """Open for examination; unfinalized stores open too, flagged incomplete."""
    store = Store(path)
    if store.incomplete:
        import logging
        logging.getLogger(__name__).warning(
            "%s: run is not finalized; opening read-only anyway", path)
    return store


def create_run(path: str | Path, name: str, capture_files: list, config: dict,
               created_ts: float, batch_size: int = BATCH_SIZE) -> StoreWriter:
    return StoreWriter(path, name, capture_files, config, created_ts, batch_size)
