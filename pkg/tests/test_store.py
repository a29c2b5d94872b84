"""Store contract: schema, batching, finalize, read-only search."""

import hashlib
import sqlite3

import pytest

from tapsight.dpi.http import HttpTransaction
from tapsight.errors import (
    ConstraintViolationError,
    FinalizedRunError,
    PathExistsError,
    UnknownSelectorError,
)
from tapsight.flows import FlowRecord
from tapsight.pcap import CaptureFile
from tapsight.store import StoreWriter, create_run, open_readonly


def _capture_file(path="a.pcap", length=100, seed="a"):
    return CaptureFile(path=path, byte_length=length,
                       md5=hashlib.md5(seed.encode()).hexdigest(),
                       sha1=hashlib.sha1(seed.encode()).hexdigest(),
                       magic_variant="microsecond", byte_order="<",
                       link_type=1, snaplen=65535, packet_count=3)


def _flow(fid=1, ua_port=80):
    return FlowRecord(flow_id=fid, client_ip="10.0.0.2", client_port=50000 + fid,
                      server_ip="93.184.216.34", server_port=ua_port,
                      first_ts=1000.0 + fid, last_ts=1001.0 + fid, duration=1.0,
                      bytes_c2s=10, bytes_s2c=20, packets_c2s=2, packets_s2c=2,
                      delivered_c2s=10, delivered_s2c=20,
                      termination="fin", protocol_label="http")


def _txn(flow_id=1, ua="Mozilla/5.0 (iPhone; CPU iPhone OS 10_3 like Mac OS X)",
         ts=1000.5):
    return HttpTransaction(flow_id=flow_id, ts=ts, method="GET", uri="/",
                           version="HTTP/1.1", host="x.test", user_agent=ua,
                           request_bytes=0, response_bytes=3, response_status=200)


@pytest.fixture
def writer(tmp_path):
    return create_run(tmp_path / "s.db", "t", [_capture_file()], {"k": 1}, 1000.0)


def test_fresh_store_has_eleven_tables(writer):
    tables = writer.conn.execute(
        "SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE 'sqlite_%'"
    ).fetchall()
    assert len(tables) == 11
    names = {t[0] for t in tables}
    assert {"runs", "capture_files", "flows", "icmp_log", "udp_log",
            "http_transactions", "dns_records", "smtp_envelopes",
            "pop3_sessions", "ftp_sessions", "counters"} == names
    for (name,) in tables:
        if name not in ("runs", "capture_files"):
            assert writer.conn.execute(f"SELECT COUNT(*) FROM {name}").fetchone()[0] == 0


def test_existing_path_refused(tmp_path, writer):
    with pytest.raises(PathExistsError):
        create_run(tmp_path / "s.db", "again", [], {}, 0.0)


def test_two_capture_files_rows(tmp_path):
    w = create_run(tmp_path / "two.db", "t",
                   [_capture_file("a.pcap", 10, "a"), _capture_file("b.pcap", 20, "b")],
                   {}, 0.0)
    rows = w.conn.execute(
        "SELECT path, md5, sha1 FROM capture_files ORDER BY position").fetchall()
    assert [r[0] for r in rows] == ["a.pcap", "b.pcap"]
    assert rows[0][1] != rows[1][1]
    assert rows[0][2] != rows[1][2]


def test_flow_insert_returns_positive_id(writer):
    assert writer.insert_record(_flow(1)) > 0


def test_dangling_flow_reference_rejected(writer):
    with pytest.raises(ConstraintViolationError):
        writer.insert_record(_txn(flow_id=404))


def test_bulk_insert_count(tmp_path):
    w = create_run(tmp_path / "bulk.db", "t", [], {}, 0.0)
    w.insert_record(_flow(1))
    for i in range(10_000):
        w.insert_record(_txn(flow_id=1, ts=1000.0 + i))
    w.finalize_run({"counters": {}}, 1.0, 0.0)
    store = open_readonly(tmp_path / "bulk.db")
    assert store.table_counts()["http_transactions"] == 10_000


def test_finalize_sets_flag_and_rejects_further_writes(tmp_path):
    w = create_run(tmp_path / "f.db", "t", [], {}, 0.0)
    w.insert_record(_flow(1))
    w.finalize_run({"counters": {"flow_records": 1}}, 2.5, 40.0)
    with pytest.raises(FinalizedRunError):
        w.insert_record(_flow(2))
    with pytest.raises(FinalizedRunError):
        w.finalize_run({"counters": {}}, 0.0, 0.0)
    store = open_readonly(tmp_path / "f.db")
    assert not store.incomplete
    info = store.run_info()
    assert info["finalized"] == 1
    assert info["duration_s"] == 2.5


def test_stats_round_trip_counters(tmp_path):
    counters = {"packets_total": 42, "flow_records": 1}
    w = create_run(tmp_path / "c.db", "t", [], {}, 0.0)
    w.insert_record(_flow(1))
    w.finalize_run({"counters": counters}, 1.0, 1.0)
    store = open_readonly(tmp_path / "c.db")
    assert store.counters() == counters


def test_unfinalized_store_opens_with_incomplete_flag(tmp_path):
    w = create_run(tmp_path / "u.db", "t", [], {}, 0.0)
    w.insert_record(_flow(1))
    w.flush()
    w.conn.commit()
    store = open_readonly(tmp_path / "u.db")
    assert store.incomplete


def test_missing_store_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        open_readonly(tmp_path / "nope.db")


def test_readonly_handle_cannot_write(tmp_path):
    w = create_run(tmp_path / "ro.db", "t", [], {}, 0.0)
    w.finalize_run({"counters": {}}, 0.0, 0.0)
    store = open_readonly(tmp_path / "ro.db")
    with pytest.raises(sqlite3.OperationalError):
        store.conn.execute("INSERT INTO counters VALUES ('x', 1)")


def test_store_digest_unchanged_by_query_sequence(tmp_path):
    path = tmp_path / "digest.db"
    w = create_run(path, "t", [_capture_file()], {}, 0.0)
    w.insert_record(_flow(1))
    w.insert_record(_txn(1))
    w.finalize_run({"counters": {}}, 0.0, 0.0)
    before = hashlib.sha256(path.read_bytes()).hexdigest()
    store = open_readonly(path)
    store.search("http_transactions.user_agent", "iphone")
    store.search("flows.client_ip", "10.0.0.2", "exact")
    store.run_info()
    store.counters()
    store.table_counts()
    store.top_values("http_transactions.host")
    store.close()
    assert hashlib.sha256(path.read_bytes()).hexdigest() == before


@pytest.fixture
def ua_store(tmp_path):
    """Three user-agent rows (one iPhone, two Windows), plus supporting flows."""
    path = tmp_path / "ua.db"
    w = create_run(path, "t", [], {}, 0.0)
    uas = ["Mozilla/5.0 (iPhone; CPU iPhone OS 10_3 like Mac OS X) Safari/602.1",
           "Mozilla/5.0 (Windows NT 10.0; Win64; x64) Chrome/120.0",
           "Mozilla/5.0 (Windows NT 6.1; rv:60.0) Firefox/60.0"]
    for i, ua in enumerate(uas, start=1):
        w.insert_record(_flow(i))
        w.insert_record(_txn(flow_id=i, ua=ua, ts=1000.0 + i))
    w.finalize_run({"counters": {}}, 0.0, 0.0)
    store = open_readonly(path)
    yield store, uas
    store.close()


def test_partial_search_case_insensitive_substring(ua_store):
    store, _ = ua_store
    rows = store.search("http_transactions.user_agent", "iphone", "partial")
    assert len(rows) == 1
    assert "iPhone" in rows[0]["_matched"]


def test_exact_search_requires_full_string(ua_store):
    store, uas = ua_store
    assert store.search("dns_records.query_name", "example.com", "exact") == []
    rows = store.search("http_transactions.user_agent", uas[0].upper(), "exact")
    assert len(rows) == 1  # case-insensitive full-string equality


def test_partial_search_matches_linear_scan_oracle(ua_store):
    store, uas = ua_store
    rows = store.search("http_transactions.user_agent", "Windows NT", "partial")
    oracle = [ua for ua in uas if "windows nt" in ua.lower()]
    assert sorted(r["_matched"] for r in rows) == sorted(oracle)
    assert len(rows) == 2


def test_search_results_ordered_by_ts_then_id(ua_store):
    store, _ = ua_store
    rows = store.search("http_transactions.user_agent", "Mozilla", "partial")
    keys = [(r["_ts"], r["id"]) for r in rows]
    assert keys == sorted(keys)


def test_unknown_selector_raises(ua_store):
    store, _ = ua_store
    with pytest.raises(UnknownSelectorError):
        store.search("nosuch.column", "x")
    with pytest.raises(UnknownSelectorError):
        store.search("runs.name", "x")  # real column, not searchable


def test_like_metacharacters_escaped(tmp_path):
    path = tmp_path / "esc.db"
    w = create_run(path, "t", [], {}, 0.0)
    w.insert_record(_flow(1))
    w.insert_record(_txn(1, ua="literal%percent_and_underscore"))
    w.insert_record(_txn(1, ua="other row entirely"))
    w.finalize_run({"counters": {}}, 0.0, 0.0)
    store = open_readonly(path)
    assert len(store.search("http_transactions.user_agent", "al%per", "partial")) == 1
    assert len(store.search("http_transactions.user_agent", "d_u", "partial")) == 1
    assert store.search("http_transactions.user_agent", "x%y", "partial") == []


def test_durability_row_counts_survive_reopen(tmp_path):
    path = tmp_path / "d.db"
    w = create_run(path, "t", [], {}, 0.0)
    emitted = {"flows": 7, "http_transactions": 23}
    for i in range(1, emitted["flows"] + 1):
        w.insert_record(_flow(i))
    for i in range(emitted["http_transactions"]):
        w.insert_record(_txn(flow_id=i % 7 + 1, ts=2000.0 + i))
    w.finalize_run({"counters": emitted}, 0.0, 0.0)
    store = open_readonly(path)
    counts = store.table_counts()
    assert counts["flows"] == emitted["flows"]
    assert counts["http_transactions"] == emitted["http_transactions"]


def test_referential_integrity_join(tmp_path):
    path = tmp_path / "ri.db"
    w = create_run(path, "t", [], {}, 0.0)
    w.insert_record(_flow(1))
    w.insert_record(_txn(1))
    w.finalize_run({"counters": {}}, 0.0, 0.0)
    store = open_readonly(path)
    orphans = store.conn.execute(
        "SELECT COUNT(*) FROM http_transactions h LEFT JOIN flows f "
        "ON h.flow_id = f.id WHERE f.id IS NULL").fetchone()[0]
    assert orphans == 0
