"""Bit-level buffers, LSB-first within each byte."""

from __future__ import annotations

from .errors import CorruptionError


class Bitstream:
    """Append-only bit buffer. Bit k of the stream lives at bit (k % 8) of
    byte (k // 8), so the first appended bit is the least significant bit
    of the first byte."""

    __slots__ = ("_buf", "bit_length")

    def __init__(self):
        self._buf = bytearray()
        self.bit_length = 0

    def append(self, value: int, nbits: int) -> None:
        if nbits < 0:
            raise ValueError(f"nbits must be >= 0, got {nbits}")
        if value < 0 or (nbits < value.bit_length()):
            raise ValueError(f"value {value} does not fit in {nbits} bits")
        pos = self.bit_length
        self.bit_length += nbits
        need = (self.bit_length + 7) // 8
        if len(self._buf) < need:
            self._buf.extend(b"\0" * (need - len(self._buf)))
        while nbits > 0:
            byte_i, bit_i = divmod(pos, 8)
            take = min(8 - bit_i, nbits)
            self._buf[byte_i] |= (value & ((1 << take) - 1)) << bit_i
            value >>= take
            pos += take
            nbits -= take

    def extend(self, other: "Bitstream") -> None:
        reader = BitReader(other)
        left = other.bit_length
        while left > 0:
            take = min(32, left)
            self.append(reader.read(take), take)
            left -= take

    def to_bytes(self) -> bytes:
        return bytes(self._buf)

    @classmethod
    def from_bytes(cls, data: bytes, bit_length: int) -> "Bitstream":
        if bit_length > len(data) * 8:
            raise CorruptionError(
                f"declared bit length {bit_length} exceeds {len(data)} payload bytes")
        bs = cls()
        bs._buf = bytearray(data)
        bs.bit_length = bit_length
        return bs

    def __eq__(self, other) -> bool:
        if not isinstance(other, Bitstream):
            return NotImplemented
        return self.bit_length == other.bit_length and self.to_bytes() == other.to_bytes()

    def __len__(self) -> int:
        return self.bit_length


class BitReader:
    """Cursor over a Bitstream; reading past the end raises CorruptionError."""

    __slots__ = ("_buf", "_bit_length", "position")

    def __init__(self, stream: Bitstream):
        self._buf = stream._buf
        self._bit_length = stream.bit_length
        self.position = 0

    @property
    def bits_left(self) -> int:
        return self._bit_length - self.position

    def read(self, nbits: int) -> int:
        if nbits < 0:
            raise ValueError(f"nbits must be >= 0, got {nbits}")
        if self.position + nbits > self._bit_length:
            raise CorruptionError(
                f"read of {nbits} bits at position {self.position} passes "
                f"the end of a {self._bit_length}-bit stream")
        value = 0
        got = 0
        while got < nbits:
            byte_i, bit_i = divmod(self.position, 8)
            take = min(8 - bit_i, nbits - got)
            chunk = (self._buf[byte_i] >> bit_i) & ((1 << take) - 1)
            value |= chunk << got
            got += take
            self.position += take
        return value
