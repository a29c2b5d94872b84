"""IPv4 datagram reassembly with RFC 815 hole descriptors.

Each reassembly buffer starts as a single hole [0, inf). An arriving
fragment fills whatever part of a hole it covers and splits the remainder;
the final fragment (MF=0) pins the total length and trims the tail hole.
Because bytes are only ever written into holes, overlap resolution is
first-arrived-wins by construction.

Fragmentation attacks are not classified here; teardrop-style fragments
(offset + length past the 65535 datagram limit) are rejected and counted,
nothing more.
"""

from __future__ import annotations

_INF = 1 << 62
MAX_DATAGRAM = 65535

# submit() outcomes
NOT_FRAGMENTED = 0
PENDING = 1
COMPLETE = 2
REJECTED = 3


class ReassemblyBuffer:
    __slots__ = ("key", "holes", "data", "first_seen", "total_length")

    def __init__(self, key, first_seen):
        self.key = key
        self.holes = [(0, _INF)]  # disjoint, sorted, half-open [first, last)
        self.data = bytearray()
        self.first_seen = first_seen
        self.total_length = None


class Defragmenter:
    """Reassembles fragmented IPv4 datagrams keyed by (src, dst, ident, proto).

    Owned by the single pipeline thread. Counters: `reassembled`, `abandoned`
    (aged out), `evicted` (table cap), `rejected` (teardrop / oversize).
    """

    def __init__(self, max_age: float = 30.0, max_buffers: int = 4096,
                 max_datagram: int = MAX_DATAGRAM):
        self.max_age = max_age
        self.max_buffers = max_buffers
        self.max_datagram = max_datagram
        self.buffers: dict[tuple, ReassemblyBuffer] = {}
        self.reassembled = 0
        self.abandoned = 0
        self.evicted = 0
        self.rejected = 0

    def submit(self, src, dst, ident, proto, mf, offset, payload, ts):
        """Merge one IPv4 packet; returns (outcome, reassembled bytes | None).

        Unfragmented packets (MF=0, offset=0) pass straight through with
        outcome NOT_FRAGMENTED and payload None (caller keeps its own view).
        Oversize and teardrop fragments come back REJECTED, never raised.
        """
        if not mf and offset == 0:
            return NOT_FRAGMENTED, None

        frag_len = len(payload)
        end = offset + frag_len
        if end > self.max_datagram:
            self.rejected += 1
            key = (src, dst, ident, proto)
            if key in self.buffers:
                del self.buffers[key]
            return REJECTED, None

        key = (src, dst, ident, proto)
        buf = self.buffers.get(key)
        if buf is None:
            if len(self.buffers) >= self.max_buffers:
                oldest = min(self.buffers, key=lambda k: self.buffers[k].first_seen)
                del self.buffers[oldest]
                self.evicted += 1
            buf = ReassemblyBuffer(key, ts)
            self.buffers[key] = buf

        if not mf:
            # final fragment fixes the datagram length; first one seen wins
            if buf.total_length is None:
                buf.total_length = end
                buf.holes = [(f, min(l, end)) for f, l in buf.holes if f < end]

        if frag_len:
            self._fill(buf, offset, end, payload)

        if buf.total_length is not None and not buf.holes:
            datagram = bytes(buf.data[:buf.total_length])
            del self.buffers[key]
            self.reassembled += 1
            return COMPLETE, datagram
        return PENDING, None

    def _fill(self, buf, first, last, payload):
        if last > len(buf.data):
            buf.data.extend(b"\x00" * (last - len(buf.data)))
        new_holes = []
        for h_first, h_last in buf.holes:
            if h_last <= first or h_first >= last:
                new_holes.append((h_first, h_last))
                continue
            lo = max(h_first, first)
            hi = min(h_last, last)
            buf.data[lo:hi] = payload[lo - first:hi - first]
            if h_first < lo:
                new_holes.append((h_first, lo))
            if hi < h_last:
                new_holes.append((hi, h_last))
        buf.holes = new_holes

    def expire(self, now: float, max_age: float | None = None) -> list[tuple]:
        """Drop buffers older than max_age; returns the abandoned keys."""
        limit = self.max_age if max_age is None else max_age
        stale = [k for k, b in self.buffers.items() if now - b.first_seen > limit]
        for key in stale:
            del self.buffers[key]
            self.abandoned += 1
        return stale
