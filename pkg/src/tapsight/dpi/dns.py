"""DNS message decoding and query/response pairing.

Traffic on port 53 is parsed regardless of content (the one port-based
rule). Name decompression chases pointers under a hop limit so crafted
loops terminate as a malformed count instead of a hang. Queries are held
until their response arrives and the pair collapses into one record;
unanswered queries flush as answerless records at end of run.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass, field

_HOP_LIMIT = 32
_MAX_NAME = 255
_MAX_LABELS = 128
_TYPE_NAMES = {1: "A", 28: "AAAA", 5: "CNAME", 15: "MX", 16: "TXT", 12: "PTR"}
_HEADER = struct.Struct(">HHHHHH")


class DnsMalformed(Exception):
    """Message cannot be decoded; callers count and discard."""


@dataclass
class DnsRecord:
    ts: float
    transport: str  # "udp" | "tcp"
    txid: int
    query_name: str
    query_type: str
    response_code: int | None = None
    answers: list = field(default_factory=list)  # (name, type, value text, ttl)
    flow_id: int | None = None


def decode_name(msg: bytes, offset: int) -> tuple[str, int]:
    """Decompress a domain name; returns (name, offset after the inline part)."""
    labels = []
    total = 0
    hops = 0
    end = -1  # inline end, fixed at the first pointer
    pos = offset
    n = len(msg)
    while True:
        if pos >= n:
            raise DnsMalformed("name runs off the message")
        length = msg[pos]
        if length & 0xC0 == 0xC0:
            if pos + 1 >= n:
                raise DnsMalformed("dangling compression pointer")
            if end < 0:
                end = pos + 2
            hops += 1
            if hops > _HOP_LIMIT:
                raise DnsMalformed("compression pointer loop")
            pos = ((length & 0x3F) << 8) | msg[pos + 1]
            continue
        if length & 0xC0:
            raise DnsMalformed("reserved label type")
        if length == 0:
            if end < 0:
                end = pos + 1
            break
        if pos + 1 + length > n:
            raise DnsMalformed("label runs off the message")
        labels.append(msg[pos + 1:pos + 1 + length].decode("latin-1"))
        total += length + 1
        if total > _MAX_NAME or len(labels) > _MAX_LABELS:
            raise DnsMalformed("name too long")
        pos += 1 + length
    return ".".join(labels), end


def _rdata_text(msg: bytes, rtype: int, pos: int, rdlen: int) -> str:
    data = msg[pos:pos + rdlen]
    if rtype == 1 and rdlen == 4:
        return f"{data[0]}.{data[1]}.{data[2]}.{data[3]}"
    if rtype == 28 and rdlen == 16:
        return socket.inet_ntop(socket.AF_INET6, data)
    if rtype in (2, 5, 12):  # NS, CNAME, PTR
        return decode_name(msg, pos)[0]
    if rtype == 15 and rdlen >= 3:  # MX: preference + exchange
        pref = struct.unpack_from(">H", msg, pos)[0]
        return f"{pref} {decode_name(msg, pos + 2)[0]}"
    if rtype == 16:  # TXT: length-prefixed strings
        out, p = [], pos
        while p < pos + rdlen:
            ln = msg[p]
            out.append(msg[p + 1:p + 1 + ln].decode("latin-1", "replace"))
            p += 1 + ln
        return "".join(out)
    return data.hex()


def type_text(rtype: int) -> str:
    return _TYPE_NAMES.get(rtype, str(rtype))


@dataclass
class DnsMessage:
    txid: int
    is_response: bool
    rcode: int
    query_name: str
    query_type: str
    answers: list


def decode_message(msg: bytes) -> DnsMessage:
    """Decode header + first question + answer section; raises DnsMalformed."""
    if len(msg) < 12:
        raise DnsMalformed("short header")
    txid, flags, qdcount, ancount, _ns, _ar = _HEADER.unpack_from(msg, 0)
    if qdcount > 32 or ancount > 256:
        raise DnsMalformed("implausible section counts")
    pos = 12
    qname, qtype = "", "0"
    for i in range(qdcount):
        name, pos = decode_name(msg, pos)
        if pos + 4 > len(msg):
            raise DnsMalformed("question runs off the message")
        qt = struct.unpack_from(">H", msg, pos)[0]
        pos += 4
        if i == 0:
            qname, qtype = name, type_text(qt)
    answers = []
    for _ in range(ancount):
        name, pos = decode_name(msg, pos)
        if pos + 10 > len(msg):
            raise DnsMalformed("answer runs off the message")
        rtype, _rclass, ttl, rdlen = struct.unpack_from(">HHIH", msg, pos)
        pos += 10
        if pos + rdlen > len(msg):
            raise DnsMalformed("rdata runs off the message")
        try:
            value = _rdata_text(msg, rtype, pos, rdlen)
        except DnsMalformed:
            value = msg[pos:pos + rdlen].hex()
        answers.append((name, type_text(rtype), value, ttl))
        pos += rdlen
    return DnsMessage(txid, bool(flags & 0x8000), flags & 0xF, qname, qtype, answers)


class DnsTracker:
    """Accumulates DnsRecords across the run, pairing queries with responses."""

    def __init__(self, pending_cap: int = 8192):
        self.records: list[DnsRecord] = []
        self.malformed = 0
        self.pending_cap = pending_cap
        self._pending: dict[tuple, DnsRecord] = {}

    def _key(self, msg: DnsMessage, endpoint_key) -> tuple:
        return (msg.txid, msg.query_name.lower(), endpoint_key)

    def add_message(self, raw, ts: float, transport: str, endpoint_key,
                    flow_id: int | None = None) -> None:
        """endpoint_key must be identical for a query and its response."""
        try:
            msg = decode_message(bytes(raw))
        except DnsMalformed:
            self.malformed += 1
            return
        key = self._key(msg, endpoint_key)
        if not msg.is_response:
            if key not in self._pending:
                if len(self._pending) >= self.pending_cap:
                    oldest_key = min(self._pending, key=lambda k: self._pending[k].ts)
                    self.records.append(self._pending.pop(oldest_key))
                self._pending[key] = DnsRecord(
                    ts=ts, transport=transport, txid=msg.txid,
                    query_name=msg.query_name, query_type=msg.query_type,
                    flow_id=flow_id)
            return
        rec = self._pending.pop(key, None)
        if rec is None:
            rec = DnsRecord(ts=ts, transport=transport, txid=msg.txid,
                            query_name=msg.query_name, query_type=msg.query_type,
                            flow_id=flow_id)
        rec.response_code = msg.rcode
        rec.answers = msg.answers
        self.records.append(rec)

    def flush(self) -> list[DnsRecord]:
        """Emit unanswered queries as answerless records; returns all records."""
        leftovers = sorted(self._pending.values(), key=lambda r: r.ts)
        self.records.extend(leftovers)
        self._pending.clear()
        return self.records


class DnsStreamParser:
    """TCP transport framing: each message is prefixed by a 2-byte length."""

    def __init__(self, tracker: DnsTracker, flow_id: int, endpoint_key):
        self.tracker = tracker
        self.flow_id = flow_id
        self.endpoint_key = endpoint_key
        self._bufs = [bytearray(), bytearray()]

    def feed(self, direction: int, data, ts: float) -> None:
        buf = self._bufs[direction]
        buf += data
        while len(buf) >= 2:
            msg_len = (buf[0] << 8) | buf[1]
            if len(buf) < 2 + msg_len:
                return
            raw = bytes(buf[2:2 + msg_len])
            del buf[:2 + msg_len]
            self.tracker.add_message(raw, ts, "tcp", self.endpoint_key, self.flow_id)
