"""Link / internet / transport layer decoding.

Filter rules: Ethernet frames only; IPv4 or IPv6; TCP, UDP or ICMP. Every
frame gets exactly one disposition and malformed headers never raise out of
the decoder. 802.1Q/802.1ad VLAN tags are unwrapped before ethertype
dispatch. IPv4 header checksums are verified but a mismatch never drops the
packet (intercept equipment sometimes rewrites headers); the mismatch is
only flagged.
"""

from __future__ import annotations

import struct

# dispositions
ACCEPTED = 0
FILTERED_LINK = 1
FILTERED_NET = 2
FILTERED_TRANSPORT = 3
MALFORMED = 4

DISPOSITION_NAMES = {
    ACCEPTED: "accepted",
    FILTERED_LINK: "filtered_link_layer",
    FILTERED_NET: "filtered_net_layer",
    FILTERED_TRANSPORT: "filtered_transport",
    MALFORMED: "malformed",
}

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_IPV6 = 0x86DD
_VLAN_TPIDS = (0x8100, 0x88A8, 0x9100)

PROTO_ICMP = 1
PROTO_TCP = 6
PROTO_UDP = 17
PROTO_ICMPV6 = 58

# TCP flag bits
TH_FIN = 0x01
TH_SYN = 0x02
TH_RST = 0x04
TH_PSH = 0x08
TH_ACK = 0x10
TH_URG = 0x20

_ETH_TYPE = struct.Struct(">H")
_IPV4_FIXED = struct.Struct(">BBHHHBBH4s4s")
_IPV6_FIXED = struct.Struct(">IHBB16s16s")
_TCP_FIXED = struct.Struct(">HHIIBB")
_UDP_FIXED = struct.Struct(">HHHH")
_CKSUM_WORDS = [None] * 16  # per-ihl header word structs, built lazily


class TcpHeader:
    __slots__ = ("sport", "dport", "seq", "ack", "flags", "payload")

    def __init__(self, sport, dport, seq, ack, flags, payload):
        self.sport = sport
        self.dport = dport
        self.seq = seq
        self.ack = ack
        self.flags = flags
        self.payload = payload


class UdpHeader:
    __slots__ = ("sport", "dport", "length", "payload")

    def __init__(self, sport, dport, length, payload):
        self.sport = sport
        self.dport = dport
        self.length = length
        self.payload = payload


class IcmpHeader:
    __slots__ = ("type", "code", "length")

    def __init__(self, type_, code, length):
        self.type = type_
        self.code = code
        self.length = length


class DecodedPacket:
    """Decode result for one frame; `disposition` is always set."""

    __slots__ = ("disposition", "eth_dst", "eth_src", "eth_type", "vlan_tags",
                 "ip_version", "src", "dst", "proto", "ip_checksum_ok",
                 "is_fragment", "frag_ident", "frag_mf", "frag_offset",
                 "ipv6_fragment", "ip_payload", "tcp", "udp", "icmp")

    def __init__(self, disposition):
        self.disposition = disposition
        self.eth_dst = None
        self.eth_src = None
        self.eth_type = None
        self.vlan_tags = 0
        self.ip_version = 0
        self.src = None  # packed 4- or 16-byte address
        self.dst = None
        self.proto = None
        self.ip_checksum_ok = True
        self.is_fragment = False  # IPv4 fragment awaiting reassembly
        self.frag_ident = 0
        self.frag_mf = False
        self.frag_offset = 0
        self.ipv6_fragment = False
        self.ip_payload = None
        self.tcp = None
        self.udp = None
        self.icmp = None


def mac_text(raw) -> str:
    return bytes(raw).hex(":")


def ip_text(packed) -> str:
    b = bytes(packed)
    if len(b) == 4:
        return f"{b[0]}.{b[1]}.{b[2]}.{b[3]}"
    import socket
    return socket.inet_ntop(socket.AF_INET6, b)


def ipv4_checksum(data, offset: int, ihl_words: int) -> int:
    st = _CKSUM_WORDS[ihl_words]
    if st is None:
        st = _CKSUM_WORDS[ihl_words] = struct.Struct(f">{ihl_words * 2}H")
    total = sum(st.unpack_from(data, offset))
    while total > 0xFFFF:
        total = (total & 0xFFFF) + (total >> 16)
    return total


def decode_layers(payload, link_type: int) -> DecodedPacket:
    """Decode one frame into a DecodedPacket; never raises on malformed input."""
    if link_type != 1:  # non-Ethernet link codes open fine but filter everything
        return DecodedPacket(FILTERED_LINK)
    n = len(payload)
    if n < 14:
        return DecodedPacket(MALFORMED)

    pkt = DecodedPacket(ACCEPTED)
    pkt.eth_dst = payload[0:6]
    pkt.eth_src = payload[6:12]
    eth_type = _ETH_TYPE.unpack_from(payload, 12)[0]
    off = 14
    while eth_type in _VLAN_TPIDS and pkt.vlan_tags < 4:
        if off + 4 > n:
            pkt.disposition = MALFORMED
            return pkt
        eth_type = _ETH_TYPE.unpack_from(payload, off + 2)[0]
        off += 4
        pkt.vlan_tags += 1
    pkt.eth_type = eth_type

    if eth_type == ETHERTYPE_IPV4:
        return _decode_ipv4(pkt, payload, off, n)
    if eth_type == ETHERTYPE_IPV6:
        return _decode_ipv6(pkt, payload, off, n)
    pkt.disposition = FILTERED_NET
    return pkt


def _decode_ipv4(pkt, payload, off, n):
    if off + 20 > n:
        pkt.disposition = MALFORMED
        return pkt
    (ver_ihl, _tos, total_len, ident, flags_frag, _ttl, proto, _cksum,
     src, dst) = _IPV4_FIXED.unpack_from(payload, off)
    if ver_ihl >> 4 != 4:
        pkt.disposition = MALFORMED
        return pkt
    ihl = (ver_ihl & 0x0F) * 4
    if ihl < 20 or off + ihl > n or total_len < ihl:
        pkt.disposition = MALFORMED
        return pkt

    pkt.ip_version = 4
    pkt.src = src
    pkt.dst = dst
    pkt.proto = proto
    pkt.ip_checksum_ok = ipv4_checksum(payload, off, ihl // 4) == 0xFFFF
    pkt.frag_ident = ident
    pkt.frag_mf = bool(flags_frag & 0x2000)
    pkt.frag_offset = (flags_frag & 0x1FFF) * 8  # stored in 8-byte units

    if proto != PROTO_TCP and proto != PROTO_UDP and proto != PROTO_ICMP:
        pkt.disposition = FILTERED_TRANSPORT
        return pkt

    data_end = min(off + total_len, n)
    ip_payload = payload[off + ihl:data_end]
    pkt.ip_payload = ip_payload
    if pkt.frag_mf or pkt.frag_offset:
        # transport header only exists in the reassembled datagram
        pkt.is_fragment = True
        return pkt
    return _decode_transport(pkt, proto, ip_payload)


def _decode_ipv6(pkt, payload, off, n):
    if off + 40 > n:
        pkt.disposition = MALFORMED
        return pkt
    ver_tc_fl, pay_len, next_hdr, _hops, src, dst = _IPV6_FIXED.unpack_from(payload, off)
    if ver_tc_fl >> 28 != 6:
        pkt.disposition = MALFORMED
        return pkt
    pkt.ip_version = 6
    pkt.src = src
    pkt.dst = dst
    end = min(off + 40 + pay_len, n)
    off += 40

    for _ in range(8):  # bounded extension-header walk
        if next_hdr in (0, 43, 60):  # hop-by-hop, routing, destination options
            if off + 2 > end:
                pkt.disposition = MALFORMED
                return pkt
            next_hdr = payload[off]
            off += 8 + payload[off + 1] * 8
            if off > end:
                pkt.disposition = MALFORMED
                return pkt
        elif next_hdr == 44:
            # fragment extension: counted, never reassembled (routers do not
            # fragment IPv6; endpoints rarely do on tapped links)
            pkt.ipv6_fragment = True
            pkt.disposition = FILTERED_NET
            return pkt
        else:
            break
    pkt.proto = next_hdr

    if next_hdr == PROTO_TCP or next_hdr == PROTO_UDP:
        pkt.ip_payload = payload[off:end]
        return _decode_transport(pkt, next_hdr, pkt.ip_payload)
    if next_hdr == PROTO_ICMPV6:  # ICMPv6 counts as ICMP for the filter rule
        pkt.ip_payload = payload[off:end]
        return _decode_transport(pkt, PROTO_ICMP, pkt.ip_payload)
    pkt.disposition = FILTERED_TRANSPORT
    return pkt


def decode_reassembled(pkt: DecodedPacket, datagram: bytes) -> DecodedPacket:
    """Parse the transport header out of a defragmented datagram, in place.

    `pkt` is the decoded final-arriving fragment; its addresses and protocol
    stand for the whole datagram. Disposition flips to MALFORMED if the
    reassembled transport header is unreadable.
    """
    pkt.is_fragment = False
    pkt.frag_mf = False
    pkt.frag_offset = 0
    pkt.ip_payload = datagram
    return _decode_transport(pkt, pkt.proto, datagram)


def _decode_transport(pkt, proto, ip_payload):
    n = len(ip_payload)
    if proto == PROTO_TCP:
        if n < 20:
            pkt.disposition = MALFORMED
            return pkt
        sport, dport, seq, ack, off_res, flags = _TCP_FIXED.unpack_from(ip_payload, 0)
        data_off = (off_res >> 4) * 4
        if data_off < 20 or data_off > n:
            pkt.disposition = MALFORMED
            return pkt
        pkt.tcp = TcpHeader(sport, dport, seq, ack, flags & 0x3F, ip_payload[data_off:])
    elif proto == PROTO_UDP:
        if n < 8:
            pkt.disposition = MALFORMED
            return pkt
        sport, dport, length, _cksum = _UDP_FIXED.unpack_from(ip_payload, 0)
        if length < 8:
            pkt.disposition = MALFORMED
            return pkt
        pkt.udp = UdpHeader(sport, dport, length, ip_payload[8:min(length, n)])
    else:  # ICMP / ICMPv6
        if n < 4:
            pkt.disposition = MALFORMED
            return pkt
        pkt.icmp = IcmpHeader(ip_payload[0], ip_payload[1], n)
    return pkt
