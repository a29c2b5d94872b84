"""SMTP envelope and POP3 session extraction (metadata only).

Message bodies are byte-counted and dropped as they stream through; the
single retained content item is the Subject header line, scanned from the
message header block. PASS arguments are redacted before anything reaches
the store.
"""

from __future__ import annotations

from dataclasses import dataclass, field

_MAX_LINE = 8 * 1024


@dataclass
class MailEnvelope:
    flow_id: int
    ts: float
    helo: str | None = None
    mail_from: str | None = None
    rcpt_to: list = field(default_factory=list)
    subject: str | None = None
    message_bytes: int = 0


@dataclass
class Pop3Session:
    flow_id: int
    ts: float
    username: str | None = None
    commands: list = field(default_factory=list)  # (command line, "ok"|"err")
    retrieved_count: int = 0
    retrieved_bytes: int = 0


class _LineFeed:
    """Splits a direction's stream into lines with a bounded buffer."""

    __slots__ = ("buf", "overflowed")

    def __init__(self):
        self.buf = bytearray()
        self.overflowed = 0

    def push(self, data):
        self.buf += data

    def lines(self):
        buf = self.buf
        while True:
            idx = buf.find(b"\n")
            if idx < 0:
                if len(buf) > _MAX_LINE:
                    self.overflowed += 1
                    del buf[:]
                return
            line = bytes(buf[:idx]).rstrip(b"\r")
            del buf[:idx + 1]
            yield line


def _addr_of(arg: bytes) -> str:
    """Mail address out of 'FROM:<a@b>' / 'TO:<a@b>' style arguments."""
    lo, hi = arg.find(b"<"), arg.rfind(b">")
    raw = arg[lo + 1:hi] if 0 <= lo < hi else arg.split(b":")[-1].strip()
    return raw.decode("latin-1", "replace")


class SmtpFlowParser:
    def __init__(self, flow_id: int):
        self.flow_id = flow_id
        self.envelopes: list[MailEnvelope] = []
        self.malformed_lines = 0
        self._client = _LineFeed()
        self._server = _LineFeed()
        self._in_data = False
        self._in_msg_headers = False
        self._cur: MailEnvelope | None = None
        self._ts = 0.0

    def feed(self, direction: int, data, ts: float) -> None:
        self._ts = ts
        if direction == 1:
            self._server.push(data)
            for _ in self._server.lines():
                pass  # replies carry no stored metadata for SMTP
            return
        self._client.push(data)
        for line in self._client.lines():
            if self._in_data:
                self._message_line(line)
                continue
            self._command_line(line, ts)
        self.malformed_lines += self._client.overflowed + self._server.overflowed
        self._client.overflowed = self._server.overflowed = 0

    def _command_line(self, line: bytes, ts: float) -> None:
        if not line:
            return
        verb, _, arg = line.partition(b" ")
        verb = verb.upper()
        if verb in (b"EHLO", b"HELO"):
            self._envelope(ts).helo = arg.decode("latin-1", "replace")
        elif verb == b"MAIL":
            env = self._envelope(ts)
            env.mail_from = _addr_of(arg)
            env.ts = ts
        elif verb == b"RCPT":
            self._envelope(ts).rcpt_to.append(_addr_of(arg))
        elif verb == b"DATA":
            self._envelope(ts)
            self._in_data = True
            self._in_msg_headers = True
        elif verb == b"RSET":
            helo = self._cur.helo if self._cur else None
            self._cur = MailEnvelope(self.flow_id, ts, helo=helo)
        elif verb not in (b"QUIT", b"NOOP", b"VRFY", b"AUTH", b"STARTTLS"):
            self.malformed_lines += 1

    def _message_line(self, line: bytes) -> None:
        env = self._cur
        if line == b".":
            self._in_data = False
            if env is not None:
                self.envelopes.append(env)
                self._cur = MailEnvelope(self.flow_id, self._ts, helo=env.helo)
            return
        if line.startswith(b".."):
            line = line[1:]  # dot-stuffing
        if env is not None:
            env.message_bytes += len(line) + 2
            if self._in_msg_headers:
                if not line:
                    self._in_msg_headers = False
                elif line[:8].lower() == b"subject:" and env.subject is None:
                    env.subject = line[8:].strip().decode("latin-1", "replace")

    def _envelope(self, ts: float) -> MailEnvelope:
        if self._cur is None:
            self._cur = MailEnvelope(self.flow_id, ts)
        return self._cur

    def close(self) -> list[MailEnvelope]:
        cur = self._cur
        if cur is not None and (cur.mail_from or cur.rcpt_to or cur.message_bytes):
            self.envelopes.append(cur)  # session cut mid-message
        self._cur = None
        return self.envelopes


_POP3_MULTILINE = frozenset([b"RETR", b"TOP", b"CAPA"])
_POP3_MULTILINE_NOARG = frozenset([b"LIST", b"UIDL"])


class Pop3FlowParser:
    def __init__(self, flow_id: int):
        self.flow_id = flow_id
        self.malformed_lines = 0
        self._session: Pop3Session | None = None
        self._client = _LineFeed()
        self._server = _LineFeed()
        self._queue: list[tuple[bytes, bytes]] = []  # (verb, display line)
        self._greeted = False
        self._in_multiline = False
        self._counting_retr = False

    def feed(self, direction: int, data, ts: float) -> None:
        if self._session is None:
            self._session = Pop3Session(self.flow_id, ts)
        if direction == 0:
            self._client.push(data)
            for line in self._client.lines():
                self._client_line(line)
        else:
            self._server.push(data)
            for line in self._server.lines():
                self._server_line(line)
        self.malformed_lines += self._client.overflowed + self._server.overflowed
        self._client.overflowed = self._server.overflowed = 0

    def _client_line(self, line: bytes) -> None:
        if not line:
            return
        verb, _, arg = line.partition(b" ")
        verb = verb.upper()
        display = verb if verb == b"PASS" else (verb + (b" " + arg if arg else b""))
        if verb == b"USER" and self._session.username is None:
            self._session.username = arg.decode("latin-1", "replace")
        self._queue.append((verb, display))

    def _server_line(self, line: bytes) -> None:
        ses = self._session
        if self._in_multiline:
            if line == b".":
                self._in_multiline = False
                self._counting_retr = False
            elif self._counting_retr:
                if line.startswith(b".."):
                    line = line[1:]
                ses.retrieved_bytes += len(line) + 2
            return
        if not self._greeted:
            self._greeted = True
            return  # greeting is not a reply to any command
        ok = line.startswith(b"+OK")
        err = line.startswith(b"-ERR")
        if not ok and not err:
            self.malformed_lines += 1
            return
        if not self._queue:
            return
        verb, display = self._queue.pop(0)
        ses.commands.append((display.decode("latin-1", "replace"), "ok" if ok else "err"))
        if ok and (verb in _POP3_MULTILINE or
                   (verb in _POP3_MULTILINE_NOARG and display == verb)):
            self._in_multiline = True
            if verb == b"RETR":
                self._counting_retr = True
                ses.retrieved_count += 1

    def close(self) -> list[Pop3Session]:
        ses = self._session
        self._session = None
        if ses is None or (ses.username is None and not ses.commands):
            return []
        return [ses]
