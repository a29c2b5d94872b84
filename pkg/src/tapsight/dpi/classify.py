"""Protocol label assignment from stream-prefix keywords.

Precedence when several rules could fire: dns (port rule) > http > smtp >
ftp > pop3 > unknown. SMTP and FTP both greet with "220", so the tie is
broken by the first decisive client verb; USER/PASS/QUIT/NOOP are shared
vocabulary and skip to the next line. The function is pure: callers retry
as prefixes grow (within the inspection window) and freeze the first
non-unknown answer.
"""

from __future__ import annotations

LABEL_HTTP = "http"
LABEL_FTP = "ftp"
LABEL_SMTP = "smtp"
LABEL_POP3 = "pop3"
LABEL_DNS = "dns"
LABEL_UNKNOWN = "unknown"

DNS_PORT = 53

DEFAULT_HTTP_METHODS = frozenset(
    [b"GET", b"POST", b"HEAD", b"PUT", b"DELETE", b"OPTIONS", b"CONNECT",
     b"TRACE", b"PATCH"])

SMTP_VERBS = frozenset([b"EHLO", b"HELO", b"MAIL", b"RCPT", b"DATA", b"VRFY"])
FTP_VERBS = frozenset(
    [b"PORT", b"PASV", b"RETR", b"STOR", b"TYPE", b"CWD", b"PWD", b"SYST",
     b"FEAT", b"EPSV", b"EPRT", b"LIST", b"NLST", b"ACCT", b"MKD", b"RMD",
     b"STRU", b"MODE", b"ABOR", b"SIZE", b"MDTM", b"STOU", b"APPE", b"CDUP"])
POP3_VERBS = frozenset(
    [b"USER", b"PASS", b"APOP", b"CAPA", b"STAT", b"LIST", b"RETR", b"DELE",
     b"NOOP", b"RSET", b"TOP", b"UIDL", b"QUIT"])
_SHARED_VERBS = frozenset([b"USER", b"PASS", b"QUIT", b"NOOP"])  # FTP & SMTP & POP3


def _client_verbs(prefix, limit: int = 16):
    """First token of each complete line; partial trailing lines are skipped."""
    pos = 0
    for _ in range(limit):
        end = prefix.find(b"\n", pos)
        if end < 0:
            return
        line = bytes(prefix[pos:end]).rstrip(b"\r")
        pos = end + 1
        sp = line.find(b" ")
        yield (line if sp < 0 else line[:sp]).upper()


def classify(client_prefix, server_prefix, server_port: int,
             http_methods: frozenset = DEFAULT_HTTP_METHODS) -> str:
    """Label a flow from its first delivered bytes per direction.

    Prefixes are bytes-like (bytes, bytearray, memoryview); either may be
    empty (nothing delivered yet). Unknown is returned whenever no rule is
    decisive, and callers may retry with longer prefixes until the
    inspection window fills.
    """
    if server_port == DNS_PORT:
        return LABEL_DNS

    if client_prefix:
        sp = client_prefix.find(b" ", 0, 9)
        if sp > 0 and bytes(client_prefix[:sp]) in http_methods and b"\r\n\r\n" in client_prefix:
            return LABEL_HTTP

    if server_prefix.startswith(b"220"):
        for verb in _client_verbs(client_prefix):
            if verb in SMTP_VERBS:
                return LABEL_SMTP
            if verb in FTP_VERBS:
                return LABEL_FTP
            if verb in _SHARED_VERBS:
                continue
            break
        return LABEL_UNKNOWN

    if server_prefix.startswith(b"+OK"):
        for verb in _client_verbs(client_prefix):
            if verb in POP3_VERBS:
                return LABEL_POP3
            break
        return LABEL_UNKNOWN

    return LABEL_UNKNOWN
