"""Independent reference analyzer used as an oracle.

Deliberately self-contained: parses the classic capture format and the
Ethernet/IPv4/TCP headers with its own struct code and no imports from the
package under test. Flows are identified by 4-tuple starting at a pure
SYN; per-direction packet and payload-byte totals are accumulated until
both FINs (or a RST) are seen. Segments that match no live flow are
counted as keyless.
"""

from __future__ import annotations

import struct


def analyze_capture(path: str) -> dict:
    data = open(path, "rb").read()
    magic_le = struct.unpack_from("<I", data)[0]
    order = "<" if magic_le in (0xA1B2C3D4, 0xA1B23C4D) else ">"
    rec_hdr = struct.Struct(order + "IIII")

    flows: dict[tuple, dict] = {}
    done: list[dict] = []
    keyless = 0
    off = 24
    while off + 16 <= len(data):
        _sec, _frac, incl, _orig = rec_hdr.unpack_from(data, off)
        off += 16
        if off + incl > len(data):
            break
        frame = data[off:off + incl]
        off += incl
        if len(frame) < 34:
            continue
        ethertype = struct.unpack_from(">H", frame, 12)[0]
        if ethertype != 0x0800:
            continue
        ihl = (frame[14] & 0x0F) * 4
        total_len = struct.unpack_from(">H", frame, 16)[0]
        proto = frame[23]
        if proto != 6:
            continue
        src = frame[26:30]
        dst = frame[30:34]
        tcp_off = 14 + ihl
        if len(frame) < tcp_off + 20:
            continue
        sport, dport = struct.unpack_from(">HH", frame, tcp_off)
        flags = frame[tcp_off + 13]
        data_off = (frame[tcp_off + 12] >> 4) * 4
        payload_len = max(0, min(total_len - ihl - data_off,
                                 len(frame) - tcp_off - data_off))

        key = (src, sport, dst, dport)
        rkey = (dst, dport, src, sport)
        if key in flows:
            flow, direction = flows[key], 0
        elif rkey in flows:
            flow, direction = flows[rkey], 1
        else:
            if flags & 0x17 == 0x02:  # pure SYN: no ACK/RST/FIN
                flows[key] = {
                    "client": f"{src[0]}.{src[1]}.{src[2]}.{src[3]}",
                    "client_port": sport,
                    "server": f"{dst[0]}.{dst[1]}.{dst[2]}.{dst[3]}",
                    "server_port": dport,
                    "bytes": [0, 0], "packets": [1, 0], "fins": [False, False],
                }
            else:
                keyless += 1
            continue
        flow["packets"][direction] += 1
        flow["bytes"][direction] += payload_len
        if flags & 0x04:  # RST
            done.append(flows.pop(key if direction == 0 else rkey))
            continue
        if flags & 0x01:  # FIN
            flow["fins"][direction] = True
            if all(flow["fins"]):
                done.append(flows.pop(key if direction == 0 else rkey))
    done.extend(flows.values())
    return {"flows": done, "keyless_segments": keyless}
