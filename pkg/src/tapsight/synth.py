"""Synthetic traffic and capture-file construction.

Used by the test suite (ground-truth fixtures), the benchmark scripts
(large mixed-protocol captures), and the robustness fuzzer (structured
mutations of valid captures). Frames are built bit-exact against the
published header layouts; IPv4 header checksums are valid unless a test
asks for a broken one.
"""

from __future__ import annotations

import random
import socket
import struct

from .decode import TH_ACK, TH_FIN, TH_PSH, TH_SYN
from .pcap import GLOBAL_HEADER_LEN, MAGIC_NSEC, MAGIC_USEC, RECORD_HEADER_LEN

SRC_MAC = bytes.fromhex("02a1a1a1a1a1")
DST_MAC = bytes.fromhex("02b2b2b2b2b2")


def ip4(addr: str) -> bytes:
    return socket.inet_aton(addr)


def ip6(addr: str) -> bytes:
    return socket.inet_pton(socket.AF_INET6, addr)


def ether(payload: bytes, ethertype: int, src: bytes = SRC_MAC, dst: bytes = DST_MAC,
          vlan: int | None = None) -> bytes:
    if vlan is None:
        return dst + src + struct.pack(">H", ethertype) + payload
    return dst + src + struct.pack(">HHH", 0x8100, vlan, ethertype) + payload


def _ipv4_checksum(header: bytes) -> int:
    total = sum(struct.unpack(f">{len(header) // 2}H", header))
    while total > 0xFFFF:
        total = (total & 0xFFFF) + (total >> 16)
    return total ^ 0xFFFF


def ipv4(payload: bytes, proto: int, src: str, dst: str, ident: int = 0,
         mf: bool = False, offset: int = 0, ttl: int = 64,
         bad_checksum: bool = False) -> bytes:
    flags_frag = (0x2000 if mf else 0) | (offset // 8)
    head = struct.pack(">BBHHHBBH4s4s", 0x45, 0, 20 + len(payload), ident,
                       flags_frag, ttl, proto, 0, ip4(src), ip4(dst))
    cksum = _ipv4_checksum(head)
    if bad_checksum:
        cksum ^= 0x5555
    return head[:10] + struct.pack(">H", cksum) + head[12:] + payload


def ipv6(payload: bytes, next_header: int, src: str, dst: str) -> bytes:
    return struct.pack(">IHBB16s16s", 6 << 28, len(payload), next_header, 64,
                       ip6(src), ip6(dst)) + payload


def tcp_seg(sport: int, dport: int, seq: int, ack: int, flags: int,
            payload: bytes = b"", window: int = 65535) -> bytes:
    return struct.pack(">HHIIBBHHH", sport, dport, seq & 0xFFFFFFFF,
                       ack & 0xFFFFFFFF, 5 << 4, flags, window, 0, 0) + payload


def udp_dgram(sport: int, dport: int, payload: bytes) -> bytes:
    return struct.pack(">HHHH", sport, dport, 8 + len(payload), 0) + payload


def icmp_msg(type_: int, code: int = 0, payload: bytes = b"") -> bytes:
    return struct.pack(">BBH", type_, code, 0) + payload


def tcp_frame(src: str, dst: str, sport: int, dport: int, seq: int, ack: int,
              flags: int, payload: bytes = b"") -> bytes:
    return ether(ipv4(tcp_seg(sport, dport, seq, ack, flags, payload), 6, src, dst),
                 0x0800)


def udp_frame(src: str, dst: str, sport: int, dport: int, payload: bytes) -> bytes:
    return ether(ipv4(udp_dgram(sport, dport, payload), 17, src, dst), 0x0800)


def icmp_frame(src: str, dst: str, type_: int = 8, code: int = 0,
               payload: bytes = b"ping") -> bytes:
    return ether(ipv4(icmp_msg(type_, code, payload), 1, src, dst), 0x0800)


def fragments(payload: bytes, cuts: list[int]) -> list[tuple[int, bool, bytes]]:
    """Split a transport payload at 8-byte-aligned cuts.

    Returns (offset, more_fragments, chunk) triples in natural order; callers
    shuffle for arrival-order tests.
    """
    for cut in cuts:
        if cut % 8:
            raise ValueError(f"fragment cut {cut} is not 8-byte aligned")
    bounds = [0] + sorted(set(c for c in cuts if 0 < c < len(payload))) + [len(payload)]
    out = []
    for i in range(len(bounds) - 1):
        first, last = bounds[i], bounds[i + 1]
        out.append((first, last != len(payload), payload[first:last]))
    return out


def fragment_frames(src: str, dst: str, ident: int, proto: int, payload: bytes,
                    cuts: list[int]) -> list[bytes]:
    return [ether(ipv4(chunk, proto, src, dst, ident=ident, mf=mf, offset=off), 0x0800)
            for off, mf, chunk in fragments(payload, cuts)]


# DNS message building ------------------------------------------------------

DNS_TYPES = {"A": 1, "NS": 2, "CNAME": 5, "SOA": 6, "PTR": 12, "MX": 15,
             "TXT": 16, "AAAA": 28}


def dns_name(name: str) -> bytes:
    out = bytearray()
    for label in name.rstrip(".").split("."):
        raw = label.encode()
        out.append(len(raw))
        out += raw
    out.append(0)
    return bytes(out)


def _dns_rdata(rtype: int, value) -> bytes:
    if rtype == 1:
        return ip4(value)
    if rtype == 28:
        return ip6(value)
    if rtype in (2, 5, 12):
        return dns_name(value)
    if rtype == 15:
        pref, host = value
        return struct.pack(">H", pref) + dns_name(host)
    if rtype == 16:
        raw = value.encode()
        return bytes([len(raw)]) + raw
    return value if isinstance(value, bytes) else str(value).encode()


def dns_query(txid: int, name: str, qtype: str | int = "A") -> bytes:
    qt = DNS_TYPES.get(qtype, qtype) if isinstance(qtype, str) else qtype
    return (struct.pack(">HHHHHH", txid, 0x0100, 1, 0, 0, 0)
            + dns_name(name) + struct.pack(">HH", qt, 1))


def dns_response(txid: int, name: str, qtype: str | int = "A",
                 answers: list | None = None, rcode: int = 0,
                 compress: bool = True) -> bytes:
    """Response carrying the question plus `answers` [(name, type, value, ttl)].

    With compress=True every answer owner name equal to the question name is
    written as a pointer to offset 12, exercising the decompression path.
    """
    qt = DNS_TYPES.get(qtype, qtype) if isinstance(qtype, str) else qtype
    answers = answers or []
    msg = bytearray(struct.pack(">HHHHHH", txid, 0x8180 | (rcode & 0xF),
                                1, len(answers), 0, 0))
    msg += dns_name(name) + struct.pack(">HH", qt, 1)
    for a_name, a_type, value, ttl in answers:
        at = DNS_TYPES.get(a_type, a_type) if isinstance(a_type, str) else a_type
        if compress and a_name == name:
            msg += b"\xc0\x0c"
        else:
            msg += dns_name(a_name)
        rdata = _dns_rdata(at, value)
        msg += struct.pack(">HHIH", at, 1, ttl, len(rdata)) + rdata
    return bytes(msg)


def dns_pointer_loop(txid: int = 0xBEEF) -> bytes:
    """Malformed message whose question name is a self-referencing pointer."""
    return struct.pack(">HHHHHH", txid, 0x0100, 1, 0, 0, 0) + b"\xc0\x0c" + b"\x00\x01\x00\x01"


# capture-file assembly ------------------------------------------------------

class CaptureBuilder:
    """Accumulates (timestamp, frame) pairs and writes a classic capture file."""

    def __init__(self, variant: str = "microsecond", byte_order: str = "<",
                 link_type: int = 1, snaplen: int = 262144):
        self.variant = variant
        self.byte_order = byte_order
        self.link_type = link_type
        self.snaplen = snaplen
        self._chunks: list[bytes] = []
        self._rec = struct.Struct(byte_order + "IIII")
        self.count = 0

    def add(self, ts, frame: bytes, orig_len: int | None = None) -> None:
        """ts is float seconds or an exact (sec, frac) pair in file resolution."""
        if isinstance(ts, tuple):
            sec, frac = ts
        else:
            scale = 1_000_000 if self.variant == "microsecond" else 1_000_000_000
            sec = int(ts)
            frac = round((ts - sec) * scale)
            if frac >= scale:
                sec, frac = sec + 1, 0
        self._chunks.append(self._rec.pack(sec, frac, len(frame),
                                           orig_len if orig_len is not None else len(frame)))
        self._chunks.append(frame)
        self.count += 1

    def header(self) -> bytes:
        magic = MAGIC_USEC if self.variant == "microsecond" else MAGIC_NSEC
        return struct.pack(self.byte_order + "IHHiIII", magic, 2, 4, 0, 0,
                           self.snaplen, self.link_type)

    def to_bytes(self) -> bytes:
        return self.header() + b"".join(self._chunks)

    def write(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.header())
            for chunk in self._chunks:
                fh.write(chunk)


class TcpSession:
    """Scripted TCP connection producing handshake, data and close frames."""

    def __init__(self, builder: CaptureBuilder, client: str, server: str,
                 cport: int, sport: int, ts: float, step: float = 0.0005,
                 isn_client: int = 0x1000, isn_server: int = 0x2000,
                 mss: int = 1400):
        self.b = builder
        self.client, self.server = client, server
        self.cport, self.sport = cport, sport
        self.ts = ts
        self.step = step
        self.mss = mss
        self.isn = [isn_client, isn_server]
        self.seq = [isn_client, isn_server]  # next seq per direction (0=c2s)
        self.fin_sent = [False, False]

    def _frame(self, direction: int, flags: int, payload: bytes = b"",
               seq: int | None = None) -> bytes:
        if direction == 0:
            src, dst, sp, dp = self.client, self.server, self.cport, self.sport
        else:
            src, dst, sp, dp = self.server, self.client, self.sport, self.cport
        use_seq = self.seq[direction] if seq is None else seq
        ack = self.seq[1 - direction] & 0xFFFFFFFF
        return tcp_frame(src, dst, sp, dp, use_seq, ack, flags, payload)

    def _emit(self, direction, flags, payload=b"", seq=None, advance=True):
        frame = self._frame(direction, flags, payload, seq)
        self.b.add(self.ts, frame)
        self.ts += self.step
        if advance and seq is None:
            if flags & (TH_SYN | TH_FIN):
                self.seq[direction] += 1
            self.seq[direction] = (self.seq[direction] + len(payload)) & 0xFFFFFFFF
        return frame

    def handshake(self) -> None:
        self._emit(0, TH_SYN)
        self._emit(1, TH_SYN | TH_ACK)
        self._emit(0, TH_ACK)

    def send(self, direction: int, data: bytes, segment: int | None = None) -> None:
        """Emit data split into MSS-sized segments, in order."""
        size = segment or self.mss
        for i in range(0, len(data), size):
            self._emit(direction, TH_PSH | TH_ACK, data[i:i + size])

    def segments(self, direction: int, data: bytes, segment: int | None = None) -> list[bytes]:
        """Build data frames without adding them; caller controls arrival order."""
        size = segment or self.mss
        frames = []
        for i in range(0, len(data), size):
            frames.append(self._frame(direction, TH_PSH | TH_ACK,
                                      data[i:i + size], seq=self.seq[direction]))
            self.seq[direction] = (self.seq[direction] + len(data[i:i + size])) & 0xFFFFFFFF
        return frames

    def add_raw(self, frame: bytes) -> None:
        self.b.add(self.ts, frame)
        self.ts += self.step

    def close_fin(self, final_ack: bool = True) -> None:
        self._emit(0, TH_FIN | TH_ACK)
        self._emit(1, TH_FIN | TH_ACK)
        if final_ack:  # lands after the tracker closed the flow: a keyless segment
            self._emit(0, TH_ACK)

    def reset(self, direction: int = 0) -> None:
        self._emit(direction, 0x04 | TH_ACK)  # RST

    def exchange_http(self, request: bytes, response: bytes) -> None:
        self.send(0, request)
        self.send(1, response)


def http_request(method="GET", uri="/", host="example.test",
                 user_agent="Mozilla/5.0 (X11; Linux x86_64) Gecko/20100101 Firefox/115.0",
                 headers: dict | None = None, body: bytes = b"") -> bytes:
    lines = [f"{method} {uri} HTTP/1.1", f"Host: {host}", f"User-Agent: {user_agent}"]
    for k, v in (headers or {}).items():
        lines.append(f"{k}: {v}")
    if body:
        lines.append(f"Content-Length: {len(body)}")
    return ("\r\n".join(lines) + "\r\n\r\n").encode() + body


def http_response(status=200, reason="OK", content_type="text/html",
                  body: bytes = b"<html></html>", headers: dict | None = None) -> bytes:
    lines = [f"HTTP/1.1 {status} {reason}", f"Content-Type: {content_type}",
             f"Content-Length: {len(body)}"]
    for k, v in (headers or {}).items():
        lines.append(f"{k}: {v}")
    return ("\r\n".join(lines) + "\r\n\r\n").encode() + body


# benchmark corpus generation -------------------------------------------------

USER_AGENTS = [
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/120.0 Safari/537.36",
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64; rv:115.0) Gecko/20100101 Firefox/115.0",
    "Mozilla/5.0 (iPhone; CPU iPhone OS 16_5 like Mac OS X) AppleWebKit/605.1.15 (KHTML, like Gecko) Version/16.5 Mobile/15E148 Safari/604.1",
    "Mozilla/5.0 (Linux; Android 13; Pixel 7) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/119.0 Mobile Safari/537.36",
    "Mozilla/5.0 (Macintosh; Intel Mac OS X 13_4) AppleWebKit/605.1.15 (KHTML, like Gecko) Version/16.5 Safari/605.1.15",
    "Mozilla/5.0 (X11; Linux x86_64; rv:115.0) Gecko/20100101 Firefox/115.0",
    "curl/8.1.2",
]

HOSTS = ["www.example.test", "cdn.example.test", "news.site.test", "mail.webapp.test",
         "static.images.test", "api.service.test"]

DNS_NAMES = ["www.example.test", "cdn.example.test", "news.site.test", "tracker.ads.test",
             "api.service.test", "time.sync.test", "mail.webapp.test", "login.portal.test"]


def benchmark_capture(path, target_bytes: int, seed: int = 7,
                      body_marker: bytes | None = None) -> dict:
    """Write a mixed-protocol capture of roughly target_bytes.

    Traffic mix: mostly HTTP flows with sizeable bodies, plus DNS lookups,
    mail (SMTP/POP3), FTP control sessions, pings, unknown TLS-ish flows
    and the occasional fragmented datagram. Returns generation ground truth
    (flow/session counts) for assertions.
    """
    rng = random.Random(seed)
    b = CaptureBuilder()
    ts = 1_700_000_000.0
    truth = {"http_flows": 0, "http_transactions": 0, "dns_queries": 0,
             "smtp_sessions": 0, "pop3_sessions": 0, "ftp_sessions": 0,
             "icmp": 0, "unknown_flows": 0, "fragmented_datagrams": 0}
    size = 0
    port = 40000
    client = "10.0.0.2"

    def grew(before_count):
        nonlocal size
        added = sum(len(c) for c in b._chunks[before_count:])
        size += added

    while size < target_bytes:
        ts += 0.01
        port += 1
        if port > 64000:
            port = 40000
        mark = len(b._chunks)
        kind = rng.randrange(100)
        if kind < 70:  # HTTP
            server = f"93.184.{rng.randrange(1, 250)}.{rng.randrange(1, 250)}"
            s = TcpSession(b, client, server, port, rng.choice((80, 8080, 8000)), ts,
                           isn_client=rng.randrange(1 << 32), isn_server=rng.randrange(1 << 32))
            s.handshake()
            truth["http_flows"] += 1
            for _ in range(rng.randrange(1, 4)):
                ua = rng.choice(USER_AGENTS)
                host = rng.choice(HOSTS)
                body_len = rng.randrange(2048, 65536)
                body = (b"%06d" % rng.randrange(1000000)) * (body_len // 6)
                if body_marker and rng.randrange(4) == 0:
                    body = body_marker + body
                s.exchange_http(
                    http_request(uri=f"/page/{rng.randrange(9999)}", host=host, user_agent=ua),
                    http_response(body=body))
                truth["http_transactions"] += 1
            s.close_fin()
        elif kind < 85:  # DNS over UDP
            name = rng.choice(DNS_NAMES)
            txid = rng.randrange(1 << 16)
            sport = rng.randrange(20000, 60000)
            b.add(ts, udp_frame(client, "10.0.0.1", sport, 53, dns_query(txid, name)))
            b.add(ts + 0.002, udp_frame("10.0.0.1", client, 53, sport, dns_response(
                txid, name, "A", [(name, "A", f"93.184.0.{rng.randrange(1, 250)}", 300)])))
            truth["dns_queries"] += 1
        elif kind < 89:  # SMTP
            s = TcpSession(b, client, "10.1.0.9", port, 25, ts)
            s.handshake()
            s.send(1, b"220 mail.webapp.test ESMTP\r\n")
            s.send(0, b"EHLO workstation.lan\r\n")
            s.send(1, b"250 ok\r\n")
            s.send(0, b"MAIL FROM:<user@webapp.test>\r\n")
            s.send(1, b"250 ok\r\n")
            s.send(0, b"RCPT TO:<friend@far.test>\r\n")
            s.send(1, b"250 ok\r\n")
            s.send(0, b"DATA\r\n")
            s.send(1, b"354 go\r\n")
            msg = b"Subject: status %d\r\n\r\n" % rng.randrange(1000)
            msg += (body_marker or b"") + b"line of text\r\n" * rng.randrange(4, 40)
            s.send(0, msg + b".\r\n")
            s.send(1, b"250 queued\r\n")
            s.close_fin()
            truth["smtp_sessions"] += 1
        elif kind < 92:  # POP3
            s = TcpSession(b, client, "10.1.0.9", port, 110, ts)
            s.handshake()
            s.send(1, b"+OK pop ready\r\n")
            s.send(0, b"USER collector\r\n")
            s.send(1, b"+OK\r\n")
            s.send(0, b"PASS hunter2\r\n")
            s.send(1, b"+OK logged in\r\n")
            s.send(0, b"RETR 1\r\n")
            body = (body_marker or b"") + b"mail body line\r\n" * rng.randrange(3, 30)
            s.send(1, b"+OK message follows\r\n" + body + b".\r\n")
            s.send(0, b"QUIT\r\n")
            s.send(1, b"+OK bye\r\n")
            s.close_fin()
            truth["pop3_sessions"] += 1
        elif kind < 94:  # FTP control
            s = TcpSession(b, client, "10.1.0.20", port, 21, ts)
            s.handshake()
            s.send(1, b"220 ftp ready\r\n")
            s.send(0, b"USER anonymous\r\n")
            s.send(1, b"331 send password\r\n")
            s.send(0, b"PASS guest\r\n")
            s.send(1, b"230 logged in\r\n")
            s.send(0, b"TYPE I\r\n")
            s.send(1, b"200 ok\r\n")
            s.send(0, b"RETR /pub/file%d.zip\r\n" % rng.randrange(100))
            s.send(1, b"150 opening\r\n")
            s.send(1, b"226 transfer complete\r\n")
            s.send(0, b"QUIT\r\n")
            s.send(1, b"221 bye\r\n")
            s.close_fin()
            truth["ftp_sessions"] += 1
        elif kind < 96:  # ping
            b.add(ts, icmp_frame(client, "10.0.0.1"))
            b.add(ts + 0.001, icmp_frame("10.0.0.1", client, type_=0))
            truth["icmp"] += 2
        elif kind < 99:  # TLS-ish unknown flow
            server = f"104.16.{rng.randrange(1, 250)}.{rng.randrange(1, 250)}"
            s = TcpSession(b, client, server, port, 443, ts)
            s.handshake()
            s.send(0, b"\x16\x03\x01" + rng.randbytes(509))
            s.send(1, b"\x16\x03\x03" + rng.randbytes(2048))
            s.send(0, rng.randbytes(1024))
            s.close_fin()
            truth["unknown_flows"] += 1
        else:  # fragmented UDP datagram (non-DNS)
            payload = udp_dgram(port, 9999, rng.randbytes(3000))
            for frame in fragment_frames(client, "10.0.0.1", rng.randrange(1 << 16),
                                         17, payload, [1480]):
                b.add(ts, frame)
            truth["fragmented_datagrams"] += 1
        grew(mark)

    b.write(path)
    truth["bytes"] = size + 24
    truth["packets"] = b.count
    return truth


RARE_DEVICE_UAS = [
    "Mozilla/5.0 (Nintendo Switch; WifiWebAuthApplet) NintendoBrowser/5.1.0.13343",
    "Mozilla/5.0 (PlayStation 5 3.03) AppleWebKit/605.1.15 (KHTML, like Gecko)",
    "Mozilla/5.0 (SMART-TV; Linux; Tizen 6.0) SamsungBrowser/3.0",
    "Roku4640X/DVP-7.70 (297.70E04154A)",
    "Dalvik/2.1.0 (Linux; U; Android 9; Freebox Player Build/PPR1)",
    "AppleTV11,1/11.1",
    "Mozilla/5.0 (Windows Phone 10.0; Android 6.0.1; NOKIA; Lumia 635)",
    "HomeAssistant/2023.6 aiohttp/3.8.4",
    "Sonos/70.3-35050 (ZPS12)",
    "BlackBerry9900/5.1.0.692 Profile/MIDP-2.1",
]


def populate_benchmark_store(path, rows: int = 1_000_000, seed: int = 11,
                             rare_rows_per_device: int = 500) -> None:
    """Build a finalized store with `rows` HTTP transaction rows for the
    query-latency benchmark; flow rows are created in proportion.

    Common user agents dominate; each RARE_DEVICE_UAS entry appears exactly
    rare_rows_per_device times, so device-hunt queries must scan the whole
    table while returning a modest result set."""
    from .dpi.http import HttpTransaction
    from .flows import FlowRecord
    from .pcap import CaptureFile
    from .store import StoreWriter

    rng = random.Random(seed)
    cf = CaptureFile(path="synthetic", byte_length=0, md5="0" * 32, sha1="0" * 40,
                     magic_variant="microsecond", byte_order="<", link_type=1,
                     snaplen=0, packet_count=0)
    writer = StoreWriter(path, "query-benchmark", [cf], {"synthetic": True},
                         1_700_000_000.0, batch_size=50_000)
    flows_needed = rows // 50 + 1
    ts = 1_700_000_000.0
    for fid in range(1, flows_needed + 1):
        writer.insert_record(FlowRecord(
            flow_id=fid, client_ip="10.0.0.2", client_port=40000 + fid % 20000,
            server_ip=f"93.184.{fid % 250 + 1}.{fid % 199 + 1}", server_port=80,
            first_ts=ts + fid, last_ts=ts + fid + 1.0, duration=1.0,
            bytes_c2s=512, bytes_s2c=4096, packets_c2s=6, packets_s2c=8,
            delivered_c2s=512, delivered_s2c=4096, termination="fin",
            protocol_label="http"))
    rare_total = min(rows, rare_rows_per_device * len(RARE_DEVICE_UAS))
    rare_every = max(1, rows // max(1, rare_total))
    rare_emitted = 0
    for i in range(rows):
        if rare_emitted < rare_total and i % rare_every == 0:
            ua = RARE_DEVICE_UAS[rare_emitted % len(RARE_DEVICE_UAS)]
            rare_emitted += 1
        else:
            ua = USER_AGENTS[i % len(USER_AGENTS)]
        writer.insert_record(HttpTransaction(
            flow_id=i % flows_needed + 1, ts=ts + i * 0.001,
            method="GET", uri=f"/asset/{i % 9973}", version="HTTP/1.1",
            host=HOSTS[i % len(HOSTS)], user_agent=ua,
            referer=None, request_content_type=None,
            response_content_type="text/html", response_status=200,
            request_bytes=0, response_bytes=rng.randrange(512, 65536)))
    stats = {"counters": {"http_transactions": rows}, "wall_seconds": 0.0,
             "throughput_bytes_per_s": 0.0}
    writer.finalize_run(stats, 0.0, 0.0)


# structured capture mutation for robustness testing -------------------------

def record_offsets(data: bytes) -> list[tuple[int, int]]:
    """(record start, frame length) pairs for a well-formed classic capture."""
    if len(data) < GLOBAL_HEADER_LEN:
        return []
    magic = struct.unpack_from("<I", data, 0)[0]
    order = "<" if magic in (MAGIC_USEC, MAGIC_NSEC) else ">"
    rec = struct.Struct(order + "IIII")
    out = []
    off = GLOBAL_HEADER_LEN
    while off + RECORD_HEADER_LEN <= len(data):
        incl = rec.unpack_from(data, off)[2]
        if off + RECORD_HEADER_LEN + incl > len(data):
            break
        out.append((off, incl))
        off += RECORD_HEADER_LEN + incl
    return out


def mutate_capture(data: bytes, rng: random.Random) -> bytes:
    """Apply one structured mutation: truncation, header-byte damage,
    TCP flag/offset scrambling, or a DNS pointer-loop injection."""
    records = record_offsets(data)
    choice = rng.randrange(4)
    buf = bytearray(data)
    if choice == 0 or not records:
        return bytes(buf[:rng.randrange(1, max(2, len(buf)))])
    if choice == 1:
        for _ in range(rng.randrange(1, 32)):
            start, incl = records[rng.randrange(len(records))]
            span = min(incl, 54)  # damage the header region, where parsers live
            if span:
                pos = start + RECORD_HEADER_LEN + rng.randrange(span)
                buf[pos] = rng.randrange(256)
        return bytes(buf)
    if choice == 2:
        for _ in range(rng.randrange(1, 16)):
            start, incl = records[rng.randrange(len(records))]
            if incl >= 54:  # ether(14) + ip(20) + tcp offset/flags at 46..47
                base = start + RECORD_HEADER_LEN + 14 + 20
                buf[base + 12] = rng.randrange(256)
                buf[base + 13] = rng.randrange(256)
                buf[base + 4:base + 8] = rng.randbytes(4)
        return bytes(buf)
    loop = udp_frame("10.9.9.9", "10.8.8.8", 4444, 53, dns_pointer_loop(rng.randrange(65536)))
    rec = struct.pack("<IIII", 1, 0, len(loop), len(loop))
    return bytes(buf) + rec + loop
