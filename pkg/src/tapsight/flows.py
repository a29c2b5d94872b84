"""SYN-gated TCP flow tracking and per-direction stream reassembly.

Connections are keyed by the 4-tuple (source ip, destination ip, source
port, destination port) with symmetric lookup; the sender of the first pure
SYN is the client and fixes the stored orientation. Flows that never show a
SYN are never created: mid-stream segments without a flow are counted and
dropped, which is a deliberate difference from analyzers that infer
SYN-less streams (inference can swap client and server).

Stream bytes are released in sender order only. Out-of-order segments are
staged as disjoint pieces trimmed against both the delivered watermark and
earlier-staged ranges, so overlapping retransmissions resolve
first-arrived-wins, mirroring the defragmenter. Sequence numbers are
unwrapped modulo 2^32 around the delivery watermark, so long intercepts
that wrap survive.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from dataclasses import dataclass

from .decode import TH_ACK, TH_FIN, TH_RST, TH_SYN, ip_text

# flow states
SYN_SEEN = 0
SYNACK_SEEN = 1
ESTABLISHED = 2
HALF_CLOSED = 3

# directions
C2S = 0
S2C = 1

# event kinds yielded by observe()
EV_CREATED = 0
EV_DATA = 1
EV_CLOSED = 2
EV_IGNORED_NO_SYN = 3
EV_DUPLICATE = 4

# termination reasons
TERM_FIN = "fin"
TERM_RST = "rst"
TERM_IDLE = "idle_timeout"
TERM_CAPTURE_END = "capture_end"

_SEQ_MOD = 1 << 32
_SEQ_HALF = 1 << 31


@dataclass
class FlowRecord:
    """Per-flow metadata row emitted when a flow terminates."""

    flow_id: int
    client_ip: str
    client_port: int
    server_ip: str
    server_port: int
    first_ts: float
    last_ts: float
    duration: float
    bytes_c2s: int
    bytes_s2c: int
    packets_c2s: int
    packets_s2c: int
    delivered_c2s: int
    delivered_s2c: int
    termination: str
    protocol_label: str


class _DirState:
    """One direction's reassembly state, offsets relative to ISN+1."""

    __slots__ = ("expected", "staged", "staged_bytes", "wire_bytes", "packets",
                 "fin_seen")

    def __init__(self):
        self.expected = 0
        self.staged = []  # sorted disjoint (offset, bytes) pieces
        self.staged_bytes = 0
        self.wire_bytes = 0
        self.packets = 0
        self.fin_seen = False


class TcpFlow:
    __slots__ = ("flow_id", "client", "server", "state", "isn_client",
                 "isn_server", "first_ts", "last_ts", "dirs", "label", "app")

    def __init__(self, flow_id, client, server, isn_client, ts):
        self.flow_id = flow_id
        self.client = client  # (packed ip, port)
        self.server = server
        self.state = SYN_SEEN
        self.isn_client = isn_client
        self.isn_server = None
        self.first_ts = ts
        self.last_ts = ts
        self.dirs = (_DirState(), _DirState())
        self.label = None  # protocol label, assigned at most once by DPI
        self.app = None  # opaque per-flow state owned by the pipeline

    def record(self, termination) -> FlowRecord:
        c2s, s2c = self.dirs
        return FlowRecord(
            flow_id=self.flow_id,
            client_ip=ip_text(self.client[0]),
            client_port=self.client[1],
            server_ip=ip_text(self.server[0]),
            server_port=self.server[1],
            first_ts=self.first_ts,
            last_ts=self.last_ts,
            duration=self.last_ts - self.first_ts,
            bytes_c2s=c2s.wire_bytes,
            bytes_s2c=s2c.wire_bytes,
            packets_c2s=c2s.packets,
            packets_s2c=s2c.packets,
            delivered_c2s=c2s.expected,
            delivered_s2c=s2c.expected,
            termination=termination,
            protocol_label=self.label or "unknown",
        )


class FlowEngine:
    """Tracks live TCP flows and reassembles their byte streams.

    observe() returns a list of event tuples, in order:
      (EV_CREATED, flow)
      (EV_DATA, flow, direction, bytes)   contiguous newly delivered bytes
      (EV_CLOSED, record, flow)
      (EV_IGNORED_NO_SYN,)
      (EV_DUPLICATE, flow)
    A single segment can yield several (FIN carrying data: EV_DATA then
    EV_CLOSED once both directions have closed).
    """

    def __init__(self, staging_cap: int = 1 << 20, staging_piece_cap: int = 4096):
        self.flows: dict[tuple, TcpFlow] = {}
        self.staging_cap = staging_cap
        self.staging_piece_cap = staging_piece_cap
        self.next_flow_id = 1
        self.ignored_no_syn = 0
        self.duplicates = 0
        self.isn_conflicts = 0
        self.staging_overflows = 0
        self.created = 0
        self.closed_by = {TERM_FIN: 0, TERM_RST: 0, TERM_IDLE: 0, TERM_CAPTURE_END: 0}

    def observe(self, src, dst, tcp, ts) -> list:
        """Process one accepted TCP segment (post-defragmentation)."""
        key = (src, tcp.sport, dst, tcp.dport)
        flow = self.flows.get(key)
        if flow is not None:
            direction = C2S
        else:
            flow = self.flows.get((dst, tcp.dport, src, tcp.sport))
            direction = S2C
        flags = tcp.flags
        payload = tcp.payload

        if flow is None:
            if flags & (TH_SYN | TH_ACK | TH_RST | TH_FIN) == TH_SYN:
                flow = TcpFlow(self.next_flow_id, (src, tcp.sport), (dst, tcp.dport),
                               tcp.seq, ts)
                self.next_flow_id += 1
                self.flows[key] = flow
                self.created += 1
                st = flow.dirs[C2S]
                st.packets = 1
                st.wire_bytes = len(payload)
                if payload:  # fast-open data rides at ISN+1
                    self._stage(flow, C2S, 0, bytes(payload))
                return [(EV_CREATED, flow)]
            self.ignored_no_syn += 1
            return [(EV_IGNORED_NO_SYN,)]

        flow.last_ts = ts
        st = flow.dirs[direction]
        st.packets += 1
        st.wire_bytes += len(payload)
        events = []

        if flags & TH_RST:
            events.append(self._close(flow, TERM_RST))
            return events

        if flags & TH_SYN:
            if direction == S2C and flags & TH_ACK:
                if flow.state == SYN_SEEN:
                    flow.isn_server = tcp.seq
                    flow.state = SYNACK_SEEN
                    return events
                if flow.isn_server is not None and tcp.seq != flow.isn_server:
                    self.isn_conflicts += 1
                self.duplicates += 1
                events.append((EV_DUPLICATE, flow))
                return events
            # SYN retransmission (or reused 4-tuple while the flow is live)
            reference = flow.isn_client if direction == C2S else flow.isn_server
            if reference is not None and tcp.seq != reference:
                self.isn_conflicts += 1
            self.duplicates += 1
            events.append((EV_DUPLICATE, flow))
            return events

        if flow.state == SYNACK_SEEN and direction == C2S and flags & TH_ACK:
            flow.state = ESTABLISHED
            events.extend(self.establish_and_drain(flow))

        if payload:
            ev = self._ingest_data(flow, direction, tcp.seq, payload)
            if ev is not None:
                events.append(ev)
            if st.staged_bytes > self.staging_cap or len(st.staged) > self.staging_piece_cap:
                self.staging_overflows += 1
                events.append(self._close(flow, TERM_RST))
                return events

        if flags & TH_FIN:
            st.fin_seen = True
            other = flow.dirs[1 - direction]
            if other.fin_seen:
                events.append(self._close(flow, TERM_FIN))
            else:
                flow.state = HALF_CLOSED
        return events

    def _ingest_data(self, flow, direction, seq, payload):
        st = flow.dirs[direction]
        isn = flow.isn_client if direction == C2S else flow.isn_server
        if isn is None:
            # data from a direction whose ISN was never seen; cannot place it
            return None
        rel = (seq - isn - 1) & 0xFFFFFFFF
        expected = st.expected
        # unwrap to the multiple of 2^32 nearest the delivery watermark
        rel += ((expected - rel + _SEQ_HALF) // _SEQ_MOD) * _SEQ_MOD
        end = rel + len(payload)

        if end <= expected:
            self.duplicates += 1
            return (EV_DUPLICATE, flow)
        if rel < expected:
            payload = payload[expected - rel:]
            rel = expected

        new_pieces = self._stage(flow, direction, rel, payload)
        if not new_pieces:
            self.duplicates += 1
            return (EV_DUPLICATE, flow)

        if flow.state not in (ESTABLISHED, HALF_CLOSED):
            return None  # held until the handshake completes
        delivered = self._drain(st)
        if delivered:
            return (EV_DATA, flow, direction, delivered)
        return None

    def _stage(self, flow, direction, rel, payload):
        """Insert [rel, rel+len) trimmed against staged ranges; earlier bytes win."""
        st = flow.dirs[direction]
        staged = st.staged
        end = rel + len(payload)
        cursor = rel
        i = bisect_left(staged, (cursor,))
        if i > 0:
            p_off, p_data = staged[i - 1]
            if p_off + len(p_data) > cursor:
                cursor = p_off + len(p_data)
        gaps = []
        while cursor < end and i < len(staged):
            s_off, s_data = staged[i]
            if s_off >= end:
                break
            if s_off > cursor:
                gaps.append((cursor, bytes(payload[cursor - rel:s_off - rel])))
            cursor = max(cursor, s_off + len(s_data))
            i += 1
        if cursor < end:
            gaps.append((cursor, bytes(payload[cursor - rel:end - rel])))
        for off, piece in gaps:
            insort(staged, (off, piece))
            st.staged_bytes += len(piece)
        return bool(gaps)

    def _drain(self, st):
        """Pop staged pieces contiguous with the watermark; returns joined bytes."""
        staged = st.staged
        if not staged or staged[0][0] != st.expected:
            return b""
        chunks = []
        while staged and staged[0][0] == st.expected:
            _, data = staged.pop(0)
            chunks.append(data)
            st.expected += len(data)
            st.staged_bytes -= len(data)
        return chunks[0] if len(chunks) == 1 else b"".join(chunks)

    def establish_and_drain(self, flow):
        """Release any pre-handshake staged data; used right after establishment."""
        out = []
        for direction in (C2S, S2C):
            data = self._drain(flow.dirs[direction])
            if data:
                out.append((EV_DATA, flow, direction, data))
        return out

    def _close(self, flow, termination):
        key = (flow.client[0], flow.client[1], flow.server[0], flow.server[1])
        self.flows.pop(key, None)
        self.closed_by[termination] += 1
        return (EV_CLOSED, flow.record(termination), flow)

    def reap_idle(self, now: float, idle_timeout: float) -> list:
        """Close flows whose last activity predates now - idle_timeout."""
        stale = [f for f in self.flows.values() if now - f.last_ts > idle_timeout]
        return [self._close(f, TERM_IDLE) for f in stale]

    def finish(self) -> list:
        """Close every live flow at end of capture."""
        live = list(self.flows.values())
        return [self._close(f, TERM_CAPTURE_END) for f in live]
