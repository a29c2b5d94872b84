"""Deep packet inspection: content-keyword protocol identification and
per-protocol metadata extraction.

Classification never consults the server port, with one sanctioned
exception: port 53 is DNS. Everything else is recognized from the first
bytes of the reassembled streams, so protocols on non-default ports are
still found. Parsers extract metadata only; message bodies are counted,
never stored.
"""

from .classify import (
    LABEL_DNS,
    LABEL_FTP,
    LABEL_HTTP,
    LABEL_POP3,
    LABEL_SMTP,
    LABEL_UNKNOWN,
    classify,
)
from .dns import DnsRecord, DnsStreamParser, DnsTracker
from .ftp import FtpFlowParser, FtpSession
from .http import HttpFlowParser, HttpTransaction
from .mail import MailEnvelope, Pop3FlowParser, Pop3Session, SmtpFlowParser

__all__ = [
    "classify",
    "LABEL_HTTP", "LABEL_FTP", "LABEL_SMTP", "LABEL_POP3", "LABEL_DNS", "LABEL_UNKNOWN",
    "HttpFlowParser", "HttpTransaction",
    "DnsTracker", "DnsStreamParser", "DnsRecord",
    "SmtpFlowParser", "MailEnvelope", "Pop3FlowParser", "Pop3Session",
    "FtpFlowParser", "FtpSession",
]
