import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codr.bitstream import BitReader, Bitstream
from codr.errors import CorruptionError


def test_lsb_first_layout():
    bs = Bitstream()
    bs.append(1, 1)      # bit 0
    bs.append(0b101, 3)  # bits 1..3
    assert bs.bit_length == 4
    assert bs.to_bytes() == bytes([0b1011])


def test_cross_byte_field():
    bs = Bitstream()
    bs.append(0b111111, 6)
    bs.append(0b10101, 5)
    assert bs.bit_length == 11
    # bits: 111111 10101 -> byte0 = 0b01111111, byte1 = 0b101
    assert bs.to_bytes() == bytes([0b01111111, 0b101])


def test_zero_width_append_is_noop():
    bs = Bitstream()
    bs.append(0, 0)
    assert bs.bit_length == 0
    assert bs.to_bytes() == b""


def test_value_too_wide_rejected():
    bs = Bitstream()
    with pytest.raises(ValueError):
        bs.append(4, 2)
    with pytest.raises(ValueError):
        bs.append(-1, 4)


def test_reader_past_end():
    bs = Bitstream()
    bs.append(3, 2)
    r = BitReader(bs)
    assert r.read(2) == 3
    with pytest.raises(CorruptionError):
        r.read(1)


def test_from_bytes_validates_length():
    with pytest.raises(CorruptionError):
        Bitstream.from_bytes(b"\x00", 9)


def test_extend():
    a = Bitstream()
    a.append(0b1101, 4)
    b = Bitstream()
    b.append(0b0110101, 7)
    a.extend(b)
    r = BitReader(a)
    assert r.read(4) == 0b1101
    assert r.read(7) == 0b0110101


fields = st.lists(
    st.integers(0, 40).flatmap(lambda w: st.tuples(st.integers(0, (1 << w) - 1), st.just(w))),
    max_size=60)


@settings(max_examples=300, deadline=None)
@given(fields)
def test_write_read_round_trip(items):
    bs = Bitstream()
    for value, width in items:
        bs.append(value, width)
    assert bs.bit_length == sum(w for _, w in items)
    r = BitReader(bs)
    for value, width in items:
        assert r.read(width) == value
    assert r.bits_left == 0


@settings(max_examples=100, deadline=None)
@given(fields)
def test_bytes_round_trip(items):
    bs = Bitstream()
    for value, width in items:
        bs.append(value, width)
    clone = Bitstream.from_bytes(bs.to_bytes(), bs.bit_length)
    assert clone == bs
    r = BitReader(clone)
    for value, width in items:
        assert r.read(width) == value
