"""Classic capture-file (pcap) reader.

Layout: 24-byte global header (magic, version, thiszone, sigfigs, snaplen,
link type) followed by [16-byte record header | frame bytes] repeated.
Both endiannesses and both timestamp resolutions (microsecond magic
0xa1b2c3d4, nanosecond magic 0xa1b23c4d) are supported. The next-generation
block format is out of scope.

The whole file is read into memory once; records are yielded as zero-copy
memoryview slices so the analysis passes (hashing, counting, decoding) can
share one buffer.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

from .errors import TruncatedHeaderError, UnknownMagicError

MAGIC_USEC = 0xA1B2C3D4
MAGIC_NSEC = 0xA1B23C4D

GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16

LINKTYPE_ETHERNET = 1


@dataclass
class CaptureFile:
    """Identity and provenance of one capture file."""

    path: str
    byte_length: int
    md5: str
    sha1: str
    magic_variant: str  # "microsecond" | "nanosecond"
    byte_order: str  # "<" | ">"
    link_type: int
    snaplen: int
    packet_count: int | None = None  # filled by count_packets


class PacketRecord:
    """One captured frame: ordinal, exact timestamp, lengths, payload view."""

    __slots__ = ("index", "ts_sec", "ts_frac", "frac_digits", "captured_length",
                 "original_length", "payload")

    def __init__(self, index, ts_sec, ts_frac, frac_digits, captured_length,
                 original_length, payload):
        self.index = index
        self.ts_sec = ts_sec
        self.ts_frac = ts_frac
        self.frac_digits = frac_digits  # 6 for microsecond files, 9 for nanosecond
        self.captured_length = captured_length
        self.original_length = original_length
        self.payload = payload

    def ts_unix(self) -> float:
        return self.ts_sec + self.ts_frac / (10 ** self.frac_digits)

    def ts_text(self) -> str:
        """Timestamp with the file's full fractional resolution."""
        return f"{self.ts_sec}.{self.ts_frac:0{self.frac_digits}d}"

    def __repr__(self):
        return (f"PacketRecord(index={self.index}, ts={self.ts_text()}, "
                f"captured={self.captured_length}, original={self.original_length})")


class CaptureReader:
    """Sequential reader over one capture file.

    Not thread-safe; one reader per file per pass. `truncated` is set when
    the file ends mid-record (interception is often cut mid-session, so this
    is a warning, not an error).
    """

    def __init__(self, path: str | Path):
        self.path = str(path)
        data = Path(path).read_bytes()
        if len(data) < GLOBAL_HEADER_LEN:
            raise TruncatedHeaderError(
                f"{self.path}: {len(data)} bytes is below the 24-byte global header")
        magic_le = struct.unpack_from("<I", data, 0)[0]
        magic_be = struct.unpack_from(">I", data, 0)[0]
        if magic_le == MAGIC_USEC:
            order, variant = "<", "microsecond"
        elif magic_be == MAGIC_USEC:
            order, variant = ">", "microsecond"
        elif magic_le == MAGIC_NSEC:
            order, variant = "<", "nanosecond"
        elif magic_be == MAGIC_NSEC:
            order, variant = ">", "nanosecond"
        else:
            raise UnknownMagicError(f"{self.path}: 0x{magic_be:08x} is not a capture-file magic")

        _vmaj, _vmin, _zone, _sigfigs, snaplen, link_type = struct.unpack_from(
            order + "HHiIII", data, 4)
        self._data = data
        self._view = memoryview(data)
        self._record_header = struct.Struct(order + "IIII")
        self.byte_order = order
        self.magic_variant = variant
        self.frac_digits = 6 if variant == "microsecond" else 9
        self.link_type = link_type
        self.snaplen = snaplen
        self.byte_length = len(data)
        self._offset = GLOBAL_HEADER_LEN
        self._index = 0
        self.truncated = False

    def reset(self) -> None:
        """Reposition at the first record; reusable after a counting pre-pass."""
        self._offset = GLOBAL_HEADER_LEN
        self._index = 0
        self.truncated = False

    def next_packet(self) -> PacketRecord | None:
        """Next record in file order, or None at end (sets `truncated` if cut)."""
        off = self._offset
        data = self._data
        if off >= len(data):
            return None
        if off + RECORD_HEADER_LEN > len(data):
            self.truncated = True
            return None
        ts_sec, ts_frac, incl_len, orig_len = self._record_header.unpack_from(data, off)
        off += RECORD_HEADER_LEN
        if off + incl_len > len(data):
            self.truncated = True
            return None
        payload = self._view[off:off + incl_len]
        rec = PacketRecord(self._index, ts_sec, ts_frac, self.frac_digits,
                           incl_len, orig_len, payload)
        self._index += 1
        self._offset = off + incl_len
        return rec

    def __iter__(self):
        while True:
            rec = self.next_packet()
            if rec is None:
                return
            yield rec

    def count_packets(self) -> int:
        """Count complete records by walking record headers; resets afterwards.

        The format stores no packet count in the global header, so a full
        pre-pass is the only safe way to know it.
        """
        data = self._data
        unpack = self._record_header.unpack_from
        off = GLOBAL_HEADER_LEN
        count = 0
        end = len(data)
        truncated = False
        while off < end:
            if off + RECORD_HEADER_LEN > end:
                truncated = True
                break
            incl_len = unpack(data, off)[2]
            off += RECORD_HEADER_LEN
            if off + incl_len > end:
                truncated = True
                break
            off += incl_len
            count += 1
        self.truncated = truncated
        self.reset()
        self.truncated = truncated
        return count

    def describe(self) -> CaptureFile:
        md5, sha1 = hash_capture_bytes(self._data)
        return CaptureFile(
            path=self.path,
            byte_length=self.byte_length,
            md5=md5,
            sha1=sha1,
            magic_variant=self.magic_variant,
            byte_order=self.byte_order,
            link_type=self.link_type,
            snaplen=self.snaplen,
        )


def open_capture(path: str | Path) -> CaptureReader:
    return CaptureReader(path)


def hash_capture_bytes(data: bytes) -> tuple[str, str]:
    return hashlib.md5(data).hexdigest(), hashlib.sha1(data).hexdigest()


def hash_capture(path: str | Path) -> tuple[str, str]:
    """(md5 hex, sha1 hex) over the entire file, for the tamper check."""
    md5 = hashlib.md5()
    sha1 = hashlib.sha1()
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(1 << 20)
            if not chunk:
                break
            md5.update(chunk)
            sha1.update(chunk)
    return md5.hexdigest(), sha1.hexdigest()
