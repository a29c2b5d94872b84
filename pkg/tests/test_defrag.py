"""Hole-descriptor reassembly against a brute-force fill-if-empty oracle."""

import random

from hypothesis import given, settings
from hypothesis import strategies as st

from tapsight.defrag import COMPLETE, NOT_FRAGMENTED, PENDING, REJECTED, Defragmenter

SRC = b"\x0a\x00\x00\x01"
DST = b"\x0a\x00\x00\x02"


def submit_all(defrag, frags, ident=1, proto=6, ts=0.0):
    """Feed (offset, mf, chunk) fragments; returns the Complete payload or None."""
    out = None
    for off, mf, chunk in frags:
        outcome, datagram = defrag.submit(SRC, DST, ident, proto, mf, off, chunk, ts)
        if outcome == COMPLETE:
            assert out is None, "second Complete for one datagram"
            out = datagram
        elif outcome == NOT_FRAGMENTED:  # degenerate single-piece partition
            assert out is None
            out = bytes(chunk)
    return out


def slot_oracle(frags):
    """First-arrived-wins reassembly by per-byte slots; independent of the
    hole-descriptor implementation."""
    slots = {}
    total = None
    for off, mf, chunk in frags:
        for i, byte in enumerate(chunk):
            slots.setdefault(off + i, byte)
        if not mf:
            total = off + len(chunk)
    if total is None or any(i not in slots for i in range(total)):
        return None
    return bytes(slots[i] for i in range(total))


def make_fragments(payload, cuts):
    bounds = [0] + sorted(set(c for c in cuts if 0 < c < len(payload))) + [len(payload)]
    return [(bounds[i], bounds[i + 1] != len(payload), payload[bounds[i]:bounds[i + 1]])
            for i in range(len(bounds) - 1)]


def test_unfragmented_passthrough():
    d = Defragmenter()
    outcome, datagram = d.submit(SRC, DST, 5, 6, False, 0, b"payload", 0.0)
    assert outcome == NOT_FRAGMENTED
    assert datagram is None
    assert not d.buffers


def test_two_fragments_reverse_arrival():
    payload = bytes(range(256)) * 12  # 3072 bytes
    frags = make_fragments(payload, [1480])
    d = Defragmenter()
    outcome, _ = d.submit(SRC, DST, 9, 6, frags[1][1], frags[1][0], frags[1][2], 0.0)
    assert outcome == PENDING
    outcome, datagram = d.submit(SRC, DST, 9, 6, frags[0][1], frags[0][0], frags[0][2], 0.0)
    assert outcome == COMPLETE
    assert datagram == payload


def test_overlap_first_arrived_wins():
    # [0,16) of 'A' then final [8,24) of 'B': bytes [8,16) must stay 'A'
    frags = [(0, True, b"A" * 16), (8, False, b"B" * 16)]
    d = Defragmenter()
    got = submit_all(d, frags)
    expect = slot_oracle(frags)
    assert got == expect == b"A" * 16 + b"B" * 8


def test_no_cross_talk_between_keys():
    d = Defragmenter()
    d.submit(SRC, DST, 1, 6, True, 0, b"a" * 8, 0.0)
    outcome, _ = d.submit(SRC, DST, 2, 6, False, 8, b"b" * 8, 0.0)  # other ident
    assert outcome == PENDING
    outcome, _ = d.submit(SRC, DST, 1, 17, False, 8, b"c" * 8, 0.0)  # other proto
    assert outcome == PENDING
    assert len(d.buffers) == 3


def test_expire_empty_table():
    assert Defragmenter().expire(1000.0) == []


def test_expire_threshold():
    d = Defragmenter(max_age=30.0)
    d.submit(SRC, DST, 1, 6, True, 0, b"x" * 8, 100.0)
    assert d.expire(131.0) == [(SRC, DST, 1, 6)]
    assert d.abandoned == 1


def test_expire_only_old_buffers():
    d = Defragmenter(max_age=30.0)
    d.submit(SRC, DST, 1, 6, True, 0, b"x" * 8, 100.0)   # aged 40s at now=140
    d.submit(SRC, DST, 2, 6, True, 0, b"y" * 8, 130.0)   # aged 10s
    expired = d.expire(140.0)
    assert expired == [(SRC, DST, 1, 6)]
    assert len(d.buffers) == 1


def test_teardrop_rejected():
    d = Defragmenter()
    outcome, _ = d.submit(SRC, DST, 1, 6, True, 65528, b"x" * 64, 0.0)
    assert outcome == REJECTED
    assert d.rejected == 1


def test_buffer_cap_evicts_oldest():
    d = Defragmenter(max_buffers=3)
    for i in range(4):
        d.submit(SRC, DST, i, 6, True, 0, b"x" * 8, float(i))
    assert len(d.buffers) == 3
    assert d.evicted == 1
    assert (SRC, DST, 0, 6) not in d.buffers


def test_duplicate_final_fragment_keeps_first_total():
    frags = [(0, True, b"A" * 8), (8, False, b"B" * 8), (8, False, b"C" * 8)]
    d = Defragmenter()
    assert submit_all(d, frags) == b"A" * 8 + b"B" * 8


@settings(max_examples=120, deadline=None)
@given(st.data())
def test_random_partition_any_order_roundtrip(data):
    rng = random.Random(data.draw(st.integers(0, 2 ** 32)))
    size = data.draw(st.integers(1, 6000))
    payload = rng.randbytes(size)
    cuts = sorted(rng.sample(range(8, max(9, size), 8),
                             k=min(rng.randrange(0, 6), max(0, (size - 8) // 8))))
    frags = make_fragments(payload, cuts)
    rng.shuffle(frags)
    d = Defragmenter()
    assert submit_all(d, frags) == payload
    assert not d.buffers  # buffer discarded after completion


@settings(max_examples=120, deadline=None)
@given(st.data())
def test_overlapping_fragments_match_slot_oracle(data):
    rng = random.Random(data.draw(st.integers(0, 2 ** 32)))
    total = data.draw(st.integers(2, 64)) * 8
    pieces = []
    covered = set()
    for _ in range(data.draw(st.integers(1, 10))):
        off = rng.randrange(0, total // 8) * 8
        length = rng.randrange(1, total - off + 1)
        pieces.append((off, True, bytes([rng.randrange(256)]) * length))
        covered.update(range(off, off + length))
    pieces.append((0, True, b"Z" * total))  # guarantee full coverage
    pieces.append((total, False, b""))  # empty final fragment pins the length
    rng.shuffle(pieces)
    d = Defragmenter()
    got = submit_all(d, pieces)
    assert got == slot_oracle(pieces)
    assert got is not None and len(got) == total
