"""Incremental HTTP/1.x transaction extraction over a reassembled flow.

Requests and responses are parsed as two line-oriented state machines and
paired in order, so pipelining works. Bodies are skipped by Content-Length
or chunked framing and only counted; the bytes themselves are discarded as
they arrive. Malformed exchanges are flagged, and scanning resynchronizes
at the next plausible request or status line instead of giving up on the
flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .classify import DEFAULT_HTTP_METHODS

_MAX_LINE = 16 * 1024
_MAX_HEADER_BLOCK = 64 * 1024
_MAX_HEADERS = 128

# side states
_LINE = 0
_HEADERS = 1
_BODY_CL = 2
_CHUNK_SIZE = 3
_CHUNK_DATA = 4
_CHUNK_END = 5
_TRAILERS = 6
_BODY_EOF = 7
_RESYNC = 8


@dataclass
class HttpTransaction:
    flow_id: int
    ts: float
    method: str | None = None
    uri: str | None = None
    version: str | None = None
    host: str | None = None
    user_agent: str | None = None
    referer: str | None = None
    request_content_type: str | None = None
    response_content_type: str | None = None
    response_status: int | None = None
    request_bytes: int = 0
    response_bytes: int = 0
    parse_error: bool = False
    order: int = field(default=0, repr=False)


class _Side:
    __slots__ = ("buf", "state", "remaining", "header_bytes", "header_count")

    def __init__(self):
        self.buf = bytearray()
        self.state = _LINE
        self.remaining = 0
        self.header_bytes = 0
        self.header_count = 0


class HttpFlowParser:
    """Feeds on delivered stream bytes; emits transactions in request order."""

    def __init__(self, flow_id: int, methods: frozenset = DEFAULT_HTTP_METHODS):
        self.flow_id = flow_id
        self.methods = methods
        self.transactions: list[HttpTransaction] = []
        self.parse_errors = 0
        self._order = 0
        self._req = _Side()
        self._resp = _Side()
        self._pending: list[HttpTransaction] = []  # awaiting their response
        self._current_req: HttpTransaction | None = None
        self._current_resp: HttpTransaction | None = None
        self._resp_cl: int | None = None
        self._resp_chunked = False

    def feed(self, direction: int, data, ts: float) -> None:
        if direction == 0:
            self.feed_client(data, ts)
        else:
            self.feed_server(data, ts)

    # -- shared line machinery -----------------------------------------

    def _lines(self, side: _Side):
        """Yield complete lines; stops when the buffer holds no full line."""
        buf = side.buf
        while True:
            idx = buf.find(b"\n")
            if idx < 0:
                if len(buf) > _MAX_LINE:
                    del buf[:]
                    yield None  # oversized garbage line
                return
            line = bytes(buf[:idx]).rstrip(b"\r")
            del buf[:idx + 1]
            yield line

    def _consume_body(self, side: _Side, data, pos: int) -> int:
        """Swallow body bytes from buffer + incoming data; returns new pos."""
        take = min(side.remaining, len(side.buf))
        if take:
            del side.buf[:take]
            side.remaining -= take
        take = min(side.remaining, len(data) - pos)
        side.remaining -= take
        return pos + take

    # -- request side ----------------------------------------------------

    def feed_client(self, data, ts: float) -> None:
        side = self._req
        pos = 0
        n = len(data)
        while True:
            if side.state == _BODY_CL:
                before = side.remaining
                pos = self._consume_body(side, data, pos)
                if self._current_req:
                    self._current_req.request_bytes += before - side.remaining
                if side.remaining:
                    return
                side.state = _LINE
                self._current_req = None
            if side.state == _CHUNK_DATA:
                before = side.remaining
                pos = self._consume_body(side, data, pos)
                if self._current_req:
                    self._current_req.request_bytes += before - side.remaining
                if side.remaining:
                    return
                side.state = _CHUNK_END
            if pos < n:
                side.buf += data[pos:]
                pos = n
            progressed = self._parse_request_lines(side, ts)
            if not progressed:
                return

    def _parse_request_lines(self, side: _Side, ts: float) -> bool:
        for line in self._lines(side):
            if side.state == _LINE:
                if line is None or not line:
                    continue
                txn = self._parse_request_line(line, ts)
                if txn is None:
                    self._emit_parse_error(ts)
                    side.state = _RESYNC
                    continue
                self._current_req = txn
                self._pending.append(txn)
                side.state = _HEADERS
                side.header_bytes = 0
                side.header_count = 0
            elif side.state == _RESYNC:
                if line and self._looks_like_request(line):
                    txn = self._parse_request_line(line, ts)
                    if txn is not None:
                        self._current_req = txn
                        self._pending.append(txn)
                        side.state = _HEADERS
                        side.header_bytes = 0
                        side.header_count = 0
            elif side.state == _HEADERS:
                if self._header_overflow(side, line):
                    self._fail_current_request(side)
                    continue
                if line:
                    self._request_header(line)
                    continue
                txn = self._current_req
                side.state = _LINE
                if txn is not None:
                    if side.remaining:  # set by Content-Length header
                        side.state = _BODY_CL
                    elif txn.request_bytes == -1:  # chunked marker
                        txn.request_bytes = 0
                        side.state = _CHUNK_SIZE
                    else:
                        self._current_req = None
                if side.state in (_BODY_CL, _CHUNK_DATA):
                    return True
                if side.state == _CHUNK_SIZE:
                    continue
            elif side.state == _CHUNK_SIZE:
                if not self._chunk_size_line(side, line):
                    self._fail_current_request(side)
                elif side.state == _CHUNK_DATA:
                    return True
            elif side.state == _CHUNK_END:
                side.state = _CHUNK_SIZE
            elif side.state == _TRAILERS:
                if not line:
                    side.state = _LINE
                    self._current_req = None
        return side.state in (_BODY_CL, _CHUNK_DATA) and side.remaining > 0

    def _looks_like_request(self, line: bytes) -> bool:
        sp = line.find(b" ", 0, 9)
        return sp > 0 and line[:sp] in self.methods

    def _parse_request_line(self, line: bytes, ts: float) -> HttpTransaction | None:
        parts = line.split(b" ")
        if len(parts) != 3 or parts[0] not in self.methods or not parts[2].startswith(b"HTTP/"):
            return None
        txn = HttpTransaction(
            flow_id=self.flow_id, ts=ts,
            method=parts[0].decode("latin-1"),
            uri=parts[1].decode("latin-1", "replace")[:2048],
            version=parts[2].decode("latin-1"),
            order=self._order)
        self._order += 1
        return txn

    def _request_header(self, line: bytes) -> None:
        txn = self._current_req
        if txn is None:
            return
        name, _, value = line.partition(b":")
        key = name.strip().lower()
        val = value.strip().decode("latin-1", "replace")
        if key == b"host":
            txn.host = val
        elif key == b"user-agent":
            txn.user_agent = val
        elif key == b"referer":
            txn.referer = val
        elif key == b"content-type":
            txn.request_content_type = val
        elif key == b"content-length":
            try:
                self._req.remaining = max(0, int(val))
            except ValueError:
                pass
        elif key == b"transfer-encoding" and "chunked" in val.lower():
            txn.request_bytes = -1  # chunked marker, cleared at body start

    def _fail_current_request(self, side: _Side) -> None:
        if self._current_req is not None:
            self._current_req.parse_error = True
            self.parse_errors += 1
            self._current_req = None
        side.state = _RESYNC
        side.remaining = 0

    def _emit_parse_error(self, ts: float) -> None:
        self.parse_errors += 1
        txn = HttpTransaction(flow_id=self.flow_id, ts=ts, parse_error=True,
                              order=self._order)
        self._order += 1
        self.transactions.append(txn)

    # -- response side ---------------------------------------------------

    def feed_server(self, data, ts: float) -> None:
        side = self._resp
        pos = 0
        n = len(data)
        while True:
            if side.state == _BODY_EOF:
                if self._current_resp:
                    self._current_resp.response_bytes += n - pos + len(side.buf)
                del side.buf[:]
                return
            if side.state in (_BODY_CL, _CHUNK_DATA):
                before = side.remaining
                pos = self._consume_body(side, data, pos)
                if self._current_resp:
                    self._current_resp.response_bytes += before - side.remaining
                if side.remaining:
                    return
                if side.state == _BODY_CL:
                    side.state = _LINE
                    self._finish_response()
                else:
                    side.state = _CHUNK_END
            if pos < n:
                side.buf += data[pos:]
                pos = n
            if not self._parse_response_lines(side, ts):
                return

    def _parse_response_lines(self, side: _Side, ts: float) -> bool:
        for line in self._lines(side):
            if side.state == _LINE:
                if line is None or not line:
                    continue
                if not self._start_response(line):
                    side.state = _RESYNC
                    continue
                side.state = _HEADERS
                side.header_bytes = 0
                side.header_count = 0
            elif side.state == _RESYNC:
                if line and line.startswith(b"HTTP/") and self._start_response(line):
                    side.state = _HEADERS
                    side.header_bytes = 0
                    side.header_count = 0
            elif side.state == _HEADERS:
                if self._header_overflow(side, line):
                    self._fail_current_response(side)
                    continue
                if line:
                    self._response_header(line)
                    continue
                self._route_response_body(side)
                if side.state in (_BODY_CL, _CHUNK_DATA, _BODY_EOF):
                    return True
            elif side.state == _CHUNK_SIZE:
                if not self._chunk_size_line(side, line):
                    self._fail_current_response(side)
                elif side.state == _CHUNK_DATA:
                    return True
            elif side.state == _CHUNK_END:
                side.state = _CHUNK_SIZE
            elif side.state == _TRAILERS:
                if not line:
                    side.state = _LINE
                    self._finish_response()
        return side.state in (_BODY_CL, _CHUNK_DATA, _BODY_EOF) and (
            side.remaining > 0 or side.state == _BODY_EOF)

    def _start_response(self, line: bytes) -> bool:
        parts = line.split(b" ", 2)
        if len(parts) < 2 or not parts[0].startswith(b"HTTP/") or not parts[1].isdigit():
            if self._pending:
                self._pending[0].parse_error = True
                self.parse_errors += 1
            return False
        status = int(parts[1])
        if not 100 <= status <= 599:
            return False
        if 100 <= status < 200:
            self._current_resp = HttpTransaction(self.flow_id, 0.0)  # informational, discarded
            self._current_resp.response_status = status
            return True
        txn = self._pending[0] if self._pending else None
        if txn is None:
            # response with no recorded request; keep counters honest, drop it
            self.parse_errors += 1
            txn = HttpTransaction(self.flow_id, 0.0, parse_error=True, order=-1)
        txn.response_status = status
        self._current_resp = txn
        self._resp_cl = None
        self._resp_chunked = False
        return True

    def _response_header(self, line: bytes) -> None:
        name, _, value = line.partition(b":")
        key = name.strip().lower()
        val = value.strip()
        if key == b"content-length":
            try:
                self._resp_cl = max(0, int(val))
            except ValueError:
                pass
        elif key == b"transfer-encoding" and b"chunked" in val.lower():
            self._resp_chunked = True
        elif key == b"content-type" and self._current_resp is not None:
            self._current_resp.response_content_type = val.decode("latin-1", "replace")

    def _route_response_body(self, side: _Side) -> None:
        txn = self._current_resp
        status = txn.response_status if txn else 0
        if 100 <= status < 200:
            self._current_resp = None
            side.state = _LINE
            return
        method = txn.method if txn else None
        if method == "HEAD" or status in (204, 304):
            side.state = _LINE
            self._finish_response()
        elif self._resp_chunked:
            side.state = _CHUNK_SIZE
        elif self._resp_cl is not None:
            if self._resp_cl == 0:
                side.state = _LINE
                self._finish_response()
            else:
                side.remaining = self._resp_cl
                side.state = _BODY_CL
        else:
            side.state = _BODY_EOF

    def _finish_response(self) -> None:
        txn = self._current_resp
        self._current_resp = None
        if txn is None:
            return
        if self._pending and self._pending[0] is txn:
            self._pending.pop(0)
        if txn.order >= 0:
            self.transactions.append(txn)

    def _fail_current_response(self, side: _Side) -> None:
        txn = self._current_resp
        if txn is not None:
            txn.parse_error = True
            self.parse_errors += 1
            self._finish_response()
        side.state = _RESYNC
        side.remaining = 0

    # -- shared ------------------------------------------------------------

    def _header_overflow(self, side: _Side, line: bytes | None) -> bool:
        if line is None:
            return True
        side.header_bytes += len(line) + 2
        side.header_count += 1
        return side.header_bytes > _MAX_HEADER_BLOCK or side.header_count > _MAX_HEADERS

    def _chunk_size_line(self, side: _Side, line: bytes | None) -> bool:
        if line is None:
            return False
        token = line.split(b";", 1)[0].strip()
        if not token:
            return True  # stray CRLF between chunks
        try:
            size = int(token, 16)
        except ValueError:
            return False
        if size == 0:
            side.state = _TRAILERS
        else:
            side.remaining = size
            side.state = _CHUNK_DATA
        return True

    def close(self) -> list[HttpTransaction]:
        """Flush at flow end: EOF-bodied responses and unanswered requests."""
        if self._resp.state == _BODY_EOF:
            self._finish_response()
        for txn in self._pending:
            self.transactions.append(txn)  # response never observed
        self._pending.clear()
        self.transactions.sort(key=lambda t: t.order)
        return self.transactions
