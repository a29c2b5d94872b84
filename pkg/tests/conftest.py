"""Shared fixtures: small ground-truth captures and analysed stores."""

from __future__ import annotations

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))  # for reference_analyzer imports

from tapsight import synth
from tapsight.pipeline import RunConfig, analyse

BASE_TS = 1_700_000_000.0

IPHONE_UA = ("Mozilla/5.0 (iPhone; CPU iPhone OS 10_3 like Mac OS X) "
             "AppleWebKit/603.1.30 (KHTML, like Gecko) Version/10.0 Mobile/14E304 Safari/602.1")
WINDOWS_UA = ("Mozilla/5.0 (Windows NT 10.0; Win64; x64) "
              "AppleWebKit/537.36 (KHTML, like Gecko) Chrome/120.0 Safari/537.36")
ANDROID_UA = ("Mozilla/5.0 (Linux; Android 13; Pixel 7) "
              "AppleWebKit/537.36 (KHTML, like Gecko) Chrome/119.0 Mobile Safari/537.36")


def http_session(builder, ts, cport=49152, sport=80, server="93.184.216.34",
                 user_agent=IPHONE_UA, body=b"<html>fixture page</html>",
                 host="www.example.test", final_ack=True):
    s = synth.TcpSession(builder, "10.0.0.2", server, cport, sport, ts)
    s.handshake()
    s.exchange_http(synth.http_request(host=host, user_agent=user_agent),
                    synth.http_response(body=body))
    s.close_fin(final_ack=final_ack)
    return s


def build_mixed_capture(path, ua_list=(IPHONE_UA, WINDOWS_UA, ANDROID_UA)):
    """1 HTTP flow per UA, 2 DNS queries, 1 ICMP echo, 1 SMTP session."""
    b = synth.CaptureBuilder()
    ts = BASE_TS
    for i, ua in enumerate(ua_list):
        http_session(b, ts + i, cport=49152 + i, user_agent=ua)
    ts += 10
    b.add(ts, synth.udp_frame("10.0.0.2", "10.0.0.1", 5353, 53,
                              synth.dns_query(0x1234, "www.example.test")))
    b.add(ts + 0.01, synth.udp_frame("10.0.0.1", "10.0.0.2", 53, 5353,
                                     synth.dns_response(0x1234, "www.example.test", "A",
                                                        [("www.example.test", "A", "93.184.216.34", 300)])))
    b.add(ts + 0.2, synth.udp_frame("10.0.0.2", "10.0.0.1", 5354, 53,
                                    synth.dns_query(0x5678, "unanswered.test")))
    b.add(ts + 1.0, synth.icmp_frame("10.0.0.2", "10.0.0.1"))
    m = synth.TcpSession(b, "10.0.0.2", "10.1.0.9", 49200, 25, ts + 2.0)
    m.handshake()
    m.send(1, b"220 mail.webapp.test ESMTP\r\n")
    m.send(0, b"EHLO laptop.lan\r\n")
    m.send(1, b"250 ok\r\n")
    m.send(0, b"MAIL FROM:<alice@example.org>\r\n")
    m.send(1, b"250 ok\r\n")
    m.send(0, b"RCPT TO:<bob@example.net>\r\n")
    m.send(1, b"250 ok\r\n")
    m.send(0, b"DATA\r\n")
    m.send(1, b"354 go\r\n")
    m.send(0, b"Subject: fixture mail\r\n\r\nnothing to see\r\n.\r\n")
    m.send(1, b"250 queued\r\n")
    m.close_fin()
    b.write(path)
    return b


@pytest.fixture
def mixed_capture(tmp_path):
    path = tmp_path / "mixed.pcap"
    build_mixed_capture(path)
    return path


@pytest.fixture
def analysed_store(tmp_path, mixed_capture):
    out = tmp_path / "mixed.db"
    result = analyse(RunConfig(name="fixture", captures=[str(mixed_capture)],
                               out=str(out)))
    return out, result
