"""End-to-end analysis: ingest -> defragment -> flows -> DPI -> store.

One sequential pass per capture file feeds a single store writer. Before
anything is written, every input file is opened, hashed (MD5 + SHA1) and
packet-counted, so an unreadable input is fatal before store creation and
progress can be reported against a real total. Malformed traffic inside a
readable capture never aborts the run; it only moves counters.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

from . import decode
from .decode import (
    ACCEPTED,
    DISPOSITION_NAMES,
    FILTERED_LINK,
    FILTERED_NET,
    FILTERED_TRANSPORT,
    MALFORMED,
    PROTO_TCP,
    PROTO_UDP,
    ip_text,
)
from .defrag import COMPLETE, NOT_FRAGMENTED, REJECTED, Defragmenter
from .dpi import (
    LABEL_DNS,
    LABEL_FTP,
    LABEL_HTTP,
    LABEL_POP3,
    LABEL_SMTP,
    LABEL_UNKNOWN,
    DnsStreamParser,
    DnsTracker,
    FtpFlowParser,
    HttpFlowParser,
    Pop3FlowParser,
    SmtpFlowParser,
    classify,
)
from .flows import C2S, EV_CLOSED, EV_CREATED, EV_DATA, S2C, FlowEngine
from .pcap import CaptureFile, open_capture
from .store import IcmpEntry, StoreWriter, UdpEntry

log = logging.getLogger(__name__)

DNS_PORT = 53

# counters that flip the exit status to completed-with-errors
ERROR_COUNTER_KEYS = (
    "packets_malformed", "fragments_rejected", "fragments_transport_malformed",
    "dns_malformed", "http_parse_errors", "smtp_malformed_lines",
    "pop3_malformed_lines", "ftp_malformed_lines", "tcp_isn_conflicts",
    "tcp_staging_overflows", "truncated_captures",
)


@dataclass
class RunConfig:
    """Everything an analysis run can be told; defaults fill absent fields."""

    name: str
    captures: list[str]
    out: str
    idle_timeout_s: float = 300.0
    defrag_max_age_s: float = 30.0
    export_flows: bool = False
    verbose_logging: bool = False
    ruleset_path: str | None = None
    inspect_window: int = 64 * 1024
    staging_cap: int = 1 << 20
    defrag_buffer_cap: int = 4096
    batch_size: int = 1000
    log_path: str | None = None  # default: <out>.log
    export_dir: str | None = None  # default: <out>.streams

    def snapshot(self) -> dict:
        return {
            "name": self.name,
            "captures": list(self.captures),
            "idle_timeout_s": self.idle_timeout_s,
            "defrag_max_age_s": self.defrag_max_age_s,
            "export_flows": self.export_flows,
            "verbose_logging": self.verbose_logging,
            "ruleset_path": self.ruleset_path,
            "inspect_window": self.inspect_window,
            "staging_cap": self.staging_cap,
            "defrag_buffer_cap": self.defrag_buffer_cap,
            "defrag_overlap_policy": "first_arrived_wins",
            "file_order": "as_given",
        }


@dataclass
class AnalysisResult:
    store_path: str
    run_id: int
    stats: dict
    capture_files: list[CaptureFile]
    exit_code: int
    tree_json: str | None = None


class _FlowApp:
    """Per-flow DPI state: classification windows, parser, export files."""

    __slots__ = ("windows", "parser", "export", "first_data_ts")

    def __init__(self):
        self.windows = [bytearray(), bytearray()]
        self.parser = None
        self.export = None  # [file c2s, file s2c] when stream export is on
        self.first_data_ts = None


class Counters(dict):
    def bump(self, key, n=1):
        self[key] = self.get(key, 0) + n


_PARSER_FACTORIES = {
    LABEL_HTTP: HttpFlowParser,
    LABEL_SMTP: SmtpFlowParser,
    LABEL_POP3: Pop3FlowParser,
    LABEL_FTP: FtpFlowParser,
}


class AnalysisPipeline:
    def __init__(self, config: RunConfig, progress=None):
        self.config = config
        self.progress = progress  # callable(done_packets, total_packets)
        self.counters = Counters()
        self.engine = FlowEngine(staging_cap=config.staging_cap)
        self.defrag = Defragmenter(max_age=config.defrag_max_age_s,
                                   max_buffers=config.defrag_buffer_cap)
        self.dns = DnsTracker()
        self.writer: StoreWriter | None = None
        self._log_fh = None
        self._last_reap = 0.0
        self._packets_done = 0
        self._packets_total = 0
        self._last_progress = 0.0

    # -- provenance pre-pass -------------------------------------------------

    def prepass(self) -> list[CaptureFile]:
        """Hash and count every input; raises on unreadable files."""
        infos = []
        for path in self.config.captures:
            reader = open_capture(path)
            info = reader.describe()
            info.packet_count = reader.count_packets()
            if reader.truncated:
                self.counters.bump("truncated_captures")
            infos.append(info)
            self._packets_total += info.packet_count
        return infos

    # -- main pass -------------------------------------------------------

    def run(self) -> AnalysisResult:
        cfg = self.config
        t0 = time.perf_counter()
        created_ts = time.time()
        files = self.prepass()

        self.writer = StoreWriter(cfg.out, cfg.name, files, cfg.snapshot(),
                                  created_ts, batch_size=cfg.batch_size)
        if cfg.export_flows:
            self._export_dir = cfg.export_dir or (cfg.out + ".streams")
            os.makedirs(self._export_dir, exist_ok=True)
        if cfg.verbose_logging:
            self._log_fh = open(cfg.log_path or (cfg.out + ".log"), "w", buffering=1 << 20)

        try:
            for path in cfg.captures:
                self._process_file(path)
            self._finish()
        finally:
            if self._log_fh:
                self._log_fh.close()

        wall = time.perf_counter() - t0
        total_bytes = sum(f.byte_length for f in files)
        self.counters["bytes_total"] = total_bytes
        stats = {
            "counters": dict(sorted(self.counters.items())),
            "wall_seconds": wall,
            "throughput_bytes_per_s": total_bytes / wall if wall > 0 else 0.0,
        }
        self.writer.finalize_run(stats, wall, stats["throughput_bytes_per_s"])
        errors = sum(self.counters.get(k, 0) for k in ERROR_COUNTER_KEYS)
        return AnalysisResult(
            store_path=cfg.out, run_id=self.writer.run_id, stats=stats,
            capture_files=files, exit_code=2 if errors else 0)

    def _process_file(self, path: str) -> None:
        reader = open_capture(path)
        link_type = reader.link_type
        counters = self.counters
        verbose = self._log_fh
        decode_layers = decode.decode_layers
        progress = self.progress
        for rec in reader:
            pkt = decode_layers(rec.payload, link_type)
            disp = pkt.disposition
            counters.bump("packets_total")
            if pkt.ip_version == 4 and not pkt.ip_checksum_ok:
                counters.bump("ip_checksum_mismatches")
            if disp == ACCEPTED:
                counters.bump("packets_accepted")
                self._route(pkt, rec)
            elif disp == FILTERED_LINK:
                counters.bump("packets_filtered_link_layer")
            elif disp == FILTERED_NET:
                counters.bump("packets_filtered_net_layer")
                if pkt.ipv6_fragment:
                    counters.bump("ipv6_fragments")
            elif disp == FILTERED_TRANSPORT:
                counters.bump("packets_filtered_transport")
            else:
                counters.bump("packets_malformed")
            if verbose:
                self._log_packet(rec, pkt)
            self._packets_done += 1
            if progress is not None:
                now = time.monotonic()
                if now - self._last_progress >= 1.0:
                    self._last_progress = now
                    progress(self._packets_done, self._packets_total)
        if reader.truncated:
            # already counted in the pre-pass; do not double-count
            pass

    def _route(self, pkt, rec) -> None:
        ts = rec.ts_unix()
        counters = self.counters
        if ts - self._last_reap >= 5.0:
            self._last_reap = ts
            self._reap(ts)

        if pkt.is_fragment:
            outcome, datagram = self.defrag.submit(
                pkt.src, pkt.dst, pkt.frag_ident, pkt.proto, pkt.frag_mf,
                pkt.frag_offset, pkt.ip_payload, ts)
            if outcome == REJECTED:
                counters.bump("fragments_rejected")
                return
            if outcome != COMPLETE:
                return
            counters.bump("fragments_reassembled")
            pkt = decode.decode_reassembled(pkt, datagram)
            if pkt.disposition != ACCEPTED:
                counters.bump("fragments_transport_malformed")
                return

        if pkt.tcp is not None:
            self._tcp(pkt, ts)
        elif pkt.udp is not None:
            self._udp(pkt, ts)
        elif pkt.icmp is not None:
            counters.bump("icmp_entries")
            self.writer.insert_record(IcmpEntry(
                ts, ip_text(pkt.src), ip_text(pkt.dst),
                pkt.icmp.type, pkt.icmp.code, pkt.icmp.length))

    # -- TCP / DPI ---------------------------------------------------------

    def _tcp(self, pkt, ts: float) -> None:
        for ev in self.engine.observe(pkt.src, pkt.dst, pkt.tcp, ts):
            kind = ev[0]
            if kind == EV_DATA:
                self._flow_data(ev[1], ev[2], ev[3], ts)
            elif kind == EV_CREATED:
                flow = ev[1]
                flow.app = _FlowApp()
                if self.config.export_flows:
                    flow.app.export = [None, None]
                if flow.server[1] == DNS_PORT:
                    flow.label = LABEL_DNS
                    flow.app.parser = DnsStreamParser(
                        self.dns, flow.flow_id, ("flow", flow.flow_id))
            elif kind == EV_CLOSED:
                self._flow_closed(ev[1], ev[2])
        self._drain_dns()

    def _flow_data(self, flow, direction, data, ts: float) -> None:
        app = flow.app
        if app is None:
            return
        if app.first_data_ts is None:
            app.first_data_ts = ts
        if app.export is not None:
            self._export_bytes(flow, direction, data)
        if flow.label is None:
            self._classify_flow(flow, direction, data, ts)
        elif app.parser is not None:
            app.parser.feed(direction, data, ts)

    def _classify_flow(self, flow, direction, data, ts: float) -> None:
        app = flow.app
        window = self.config.inspect_window
        win = app.windows[direction]
        room = window - len(win)
        if room > 0:
            win += data[:room]
        label = classify(app.windows[C2S], app.windows[S2C], flow.server[1])
        if label == LABEL_UNKNOWN:
            if len(app.windows[C2S]) >= window and len(app.windows[S2C]) >= window:
                flow.label = LABEL_UNKNOWN  # both windows full; label is frozen
                app.windows = None
            return
        flow.label = label
        factory = _PARSER_FACTORIES.get(label)
        if factory is not None:
            parser = factory(flow.flow_id)
            ts0 = app.first_data_ts if app.first_data_ts is not None else ts
            if app.windows[C2S]:
                parser.feed(C2S, bytes(app.windows[C2S]), ts0)
            if app.windows[S2C]:
                parser.feed(S2C, bytes(app.windows[S2C]), ts0)
            if room < len(data):
                parser.feed(direction, data[room:], ts)  # chunk tail past the window
            app.parser = parser
        app.windows = None

    def _flow_closed(self, record, flow) -> None:
        app = flow.app
        counters = self.counters
        if flow.label is None:
            # short flow: decide from whatever the windows caught
            label = classify(app.windows[C2S], app.windows[S2C], flow.server[1]) \
                if app is not None and app.windows is not None else LABEL_UNKNOWN
            record.protocol_label = label
            if app is not None and app.windows is not None:
                factory = _PARSER_FACTORIES.get(label)
                if factory is not None:
                    app.parser = factory(flow.flow_id)
                    if app.windows[C2S]:
                        app.parser.feed(C2S, bytes(app.windows[C2S]), record.first_ts)
                    if app.windows[S2C]:
                        app.parser.feed(S2C, bytes(app.windows[S2C]), record.first_ts)
        counters.bump("flow_records")
        self.writer.insert_record(record)
        if app is None:
            return
        parser = app.parser
        if parser is not None:
            if isinstance(parser, HttpFlowParser):
                for txn in parser.close():
                    counters.bump("http_transactions")
                    self.writer.insert_record(txn)
                counters.bump("http_parse_errors", parser.parse_errors)
            elif isinstance(parser, SmtpFlowParser):
                for env in parser.close():
                    counters.bump("smtp_envelopes")
                    self.writer.insert_record(env)
                counters.bump("smtp_malformed_lines", parser.malformed_lines)
            elif isinstance(parser, Pop3FlowParser):
                for ses in parser.close():
                    counters.bump("pop3_sessions")
                    self.writer.insert_record(ses)
                counters.bump("pop3_malformed_lines", parser.malformed_lines)
            elif isinstance(parser, FtpFlowParser):
                for ses in parser.close():
                    counters.bump("ftp_sessions")
                    self.writer.insert_record(ses)
                counters.bump("ftp_malformed_lines", parser.malformed_lines)
        if app.export is not None:
            for direction in (C2S, S2C):
                fh = app.export[direction]
                if fh is None:  # both direction files exist even when empty
                    suffix = "c2s" if direction == C2S else "s2c"
                    name = f"{self.writer.run_id}_{flow.flow_id}_{suffix}.bin"
                    fh = open(os.path.join(self._export_dir, name), "wb")
                fh.close()
        flow.app = None

    def _export_bytes(self, flow, direction, data) -> None:
        fh = flow.app.export[direction]
        if fh is None:
            suffix = "c2s" if direction == C2S else "s2c"
            name = f"{self.writer.run_id}_{flow.flow_id}_{suffix}.bin"
            fh = open(os.path.join(self._export_dir, name), "wb")
            flow.app.export[direction] = fh
        fh.write(data)

    # -- UDP / ICMP --------------------------------------------------------

    def _udp(self, pkt, ts: float) -> None:
        udp = pkt.udp
        if udp.dport == DNS_PORT or udp.sport == DNS_PORT:
            if udp.dport == DNS_PORT:
                endpoint = (pkt.src, udp.sport, pkt.dst, udp.dport)
            else:
                endpoint = (pkt.dst, udp.dport, pkt.src, udp.sport)
            self.dns.add_message(udp.payload, ts, "udp", endpoint)
            self._drain_dns()
            return
        self.counters.bump("udp_entries")
        self.writer.insert_record(UdpEntry(
            ts, ip_text(pkt.src), ip_text(pkt.dst), udp.sport, udp.dport,
            max(0, udp.length - 8)))

    def _drain_dns(self) -> None:
        records = self.dns.records
        if records:
            counters = self.counters
            writer = self.writer
            for rec in records:
                counters.bump("dns_records")
                writer.insert_record(rec)
            records.clear()

    # -- housekeeping -------------------------------------------------------

    def _reap(self, now: float) -> None:
        for ev in self.engine.reap_idle(now, self.config.idle_timeout_s):
            self._flow_closed(ev[1], ev[2])
        self.defrag.expire(now)

    def _finish(self) -> None:
        for ev in self.engine.finish():
            self._flow_closed(ev[1], ev[2])
        self.defrag.expire(float("inf"))
        self.dns.flush()
        self._drain_dns()
        c = self.counters
        c["fragments_abandoned"] = self.defrag.abandoned
        c["fragments_evicted"] = self.defrag.evicted
        c.setdefault("fragments_rejected", 0)
        c["dns_malformed"] = self.dns.malformed
        c["flows_created"] = self.engine.created
        c["flows_closed_fin"] = self.engine.closed_by["fin"]
        c["flows_closed_rst"] = self.engine.closed_by["rst"]
        c["flows_closed_idle_timeout"] = self.engine.closed_by["idle_timeout"]
        c["flows_closed_capture_end"] = self.engine.closed_by["capture_end"]
        c["tcp_ignored_no_syn"] = self.engine.ignored_no_syn
        c["tcp_duplicates"] = self.engine.duplicates
        c["tcp_isn_conflicts"] = self.engine.isn_conflicts
        c["tcp_staging_overflows"] = self.engine.staging_overflows
        for key in ("packets_total", "packets_accepted", "packets_filtered_link_layer",
                    "packets_filtered_net_layer", "packets_filtered_transport",
                    "packets_malformed", "flow_records", "http_transactions",
                    "dns_records", "smtp_envelopes", "pop3_sessions", "ftp_sessions",
                    "icmp_entries", "udp_entries", "ip_checksum_mismatches",
                    "ipv6_fragments", "http_parse_errors", "smtp_malformed_lines",
                    "pop3_malformed_lines", "ftp_malformed_lines", "truncated_captures"):
            c.setdefault(key, 0)

    def _log_packet(self, rec, pkt) -> None:
        disp = DISPOSITION_NAMES[pkt.disposition]
        if pkt.src is not None:
            line = (f"{rec.index} {rec.ts_text()} {disp} "
                    f"{ip_text(pkt.src)}>{ip_text(pkt.dst)} proto={pkt.proto}\n")
        else:
            line = f"{rec.index} {rec.ts_text()} {disp}\n"
        self._log_fh.write(line)


def analyse(config: RunConfig, progress=None) -> AnalysisResult:
    """Run the full analysis; returns the result with stats and exit code.

    Fatal errors (unreadable capture, existing store path) raise before any
    store file is created; everything else is absorbed into counters.
    """
    pipeline = AnalysisPipeline(config, progress=progress)
    result = pipeline.run()
    if config.ruleset_path:
        from .rules import evaluate, load_ruleset, tree_to_json
        from .store import open_readonly
        ruleset = load_ruleset(config.ruleset_path)
        store = open_readonly(config.out)
        try:
            result.tree_json = tree_to_json(evaluate(store, ruleset))
        finally:
            store.close()
    return result
