"""FTP control-channel metadata extraction.

Only the control conversation is observed; data channels (PORT/PASV) are
separate flows that classify on their own and carry no commands. Replies
pair with commands in order; 1xx preliminary replies keep the command
open until its completion reply arrives, so RETR/STOR transfers record
their final code (e.g. 226).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .mail import _LineFeed


@dataclass
class FtpSession:
    flow_id: int
    ts: float
    username: str | None = None
    greeting: str | None = None
    commands: list = field(default_factory=list)  # (verb, arg, reply code)
    transfers: list = field(default_factory=list)  # (verb, path, reply code)


class FtpFlowParser:
    def __init__(self, flow_id: int):
        self.flow_id = flow_id
        self.malformed_lines = 0
        self._session: FtpSession | None = None
        self._client = _LineFeed()
        self._server = _LineFeed()
        self._queue: list[tuple[str, str]] = []  # commands awaiting final reply
        self._greeted = False
        self._multiline_code: bytes | None = None

    def feed(self, direction: int, data, ts: float) -> None:
        if self._session is None:
            self._session = FtpSession(self.flow_id, ts)
        feed = self._client if direction == 0 else self._server
        feed.push(data)
        for line in feed.lines():
            if direction == 0:
                self._client_line(line)
            else:
                self._server_line(line)
        self.malformed_lines += self._client.overflowed + self._server.overflowed
        self._client.overflowed = self._server.overflowed = 0

    def _client_line(self, line: bytes) -> None:
        if not line:
            return
        verb_raw, _, arg_raw = line.partition(b" ")
        verb = verb_raw.upper().decode("latin-1", "replace")
        if not verb.isalpha() or len(verb) > 4:
            self.malformed_lines += 1
            return
        arg = "" if verb == "PASS" else arg_raw.decode("latin-1", "replace")
        if verb == "USER" and self._session.username is None:
            self._session.username = arg
        self._queue.append((verb, arg))

    def _server_line(self, line: bytes) -> None:
        if self._multiline_code is not None:
            if line[:3] == self._multiline_code and line[3:4] == b" ":
                self._multiline_code = None
                self._complete_reply(int(line[:3]), line)
            return
        if len(line) < 3 or not line[:3].isdigit():
            self.malformed_lines += 1
            return
        code = int(line[:3])
        if line[3:4] == b"-":
            self._multiline_code = line[:3]
            if not self._greeted:
                self._greeting_text = line  # first line stands for the greeting
            return
        self._complete_reply(code, line)

    def _complete_reply(self, code: int, line: bytes) -> None:
        if not self._greeted:
            self._greeted = True
            text = getattr(self, "_greeting_text", None) or line
            self._session.greeting = text.decode("latin-1", "replace")
            return
        if 100 <= code < 200:
            return  # preliminary; completion reply still to come
        self._final_reply(code)

    def _final_reply(self, code: int) -> None:
        if not self._queue:
            return
        verb, arg = self._queue.pop(0)
        self._session.commands.append((verb, arg, code))
        if verb in ("RETR", "STOR", "STOU", "APPE"):
            self._session.transfers.append((verb, arg, code))

    def close(self) -> list[FtpSession]:
        ses = self._session
        self._session = None
        if ses is None or (ses.greeting is None and not ses.commands):
            return []
        return [ses]
