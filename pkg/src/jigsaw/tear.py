"""
Tearing data into parts and laying parts into blocks.

Data is read as a bit string (bit 1 is the most significant bit of octet 0), torn into parts
of random bounded size, each part is wrapped in '1' marker bits and embedded at a random
offset in an otherwise zero block. The receiver recovers a part as the bits strictly between
the first and last set bits, without knowing the offset.
"""
import random
from typing import Iterable, List, NamedTuple

from src.jigsaw.errors import BoundsError, ConfigurationError, IncompleteStreamError, MalformedBlockError
from src.jigsaw.field import Block


class Part(NamedTuple):
    """A bit string of `length` bits stored right-aligned in `bits`."""

    bits: int
    length: int

    @classmethod
    def from_bit_string(cls, bits: str) -> "Part":
        return cls(int(bits, 2) if bits else 0, len(bits))

    def to_bit_string(self) -> str:
        return format(self.bits, f"0{self.length}b") if self.length else ""


EMPTY_PART = Part(0, 0)


class BitReader:
    """Sequential reader of bit slices from an octet string."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.total = 8 * len(data)

    @property
    def remaining(self) -> int:
        return self.total - self.pos

    def read(self, count: int) -> Part:
        if count > self.remaining:
            raise BoundsError(f"Cannot read {count} bits, {self.remaining} left")
        start, end = self.pos // 8, (self.pos + count + 7) // 8
        chunk = int.from_bytes(self.data[start:end], "big")
        shift = 8 * (end - start) - (self.pos % 8) - count
        self.pos += count
        return Part((chunk >> shift) & ((1 << count) - 1), count)


class BitWriter:
    """Accumulates parts and releases whole octets as they complete."""

    def __init__(self, pending: Part = EMPTY_PART):
        self._acc = pending.bits
        self._nbits = pending.length
        self._out = bytearray()

    @property
    def pending(self) -> Part:
        """Bits written but not yet forming a whole octet."""
        return Part(self._acc, self._nbits)

    def write(self, part: Part) -> None:
        self._acc = (self._acc << part.length) | part.bits
        self._nbits += part.length
        whole = self._nbits // 8
        if whole:
            rest = self._nbits - 8 * whole
            self._out += (self._acc >> rest).to_bytes(whole, "big")
            self._acc &= (1 << rest) - 1
            self._nbits = rest

    def take_bytes(self) -> bytes:
        """Return and forget the octets completed so far."""
        out = bytes(self._out)
        self._out.clear()
        return out


def tear(data: bytes, min_part_bits: int, max_part_bits: int, rng: random.Random) -> List[Part]:
    """
    Tear data into parts of random size.

    Each part length is drawn uniformly from [min_part_bits, max_part_bits]; the final part is
    whatever remains and may be shorter.

    Args:
        data: Octets to tear
        min_part_bits: Lower limit on the part size
        max_part_bits: Upper limit on the part size
        rng: Stream drawing the part sizes

    Returns:
        Parts whose concatenation equals `data`
    """
    if not 1 <= min_part_bits <= max_part_bits:
        raise ConfigurationError(f"Empty part-size window [{min_part_bits}, {max_part_bits}]")
    reader = BitReader(data)
    parts = []
    while reader.remaining:
        size = rng.randint(min_part_bits, max_part_bits)
        parts.append(reader.read(min(size, reader.remaining)))
    return parts


def affix(part: Part, ps: int) -> Part:
    """
    Prefix and suffix a part with a '1' bit.

    Raises:
        BoundsError: If the marked part would not fit in a PS-bit block
    """
    if part.length > ps - 2:
        raise BoundsError(f"A {part.length}-bit part does not fit a {ps}-bit block with markers")
    return Part((1 << (part.length + 1)) | (part.bits << 1) | 1, part.length + 2)


def embed(marked: Part, offset: int, ps: int) -> Block:
    """
    Copy a marked part into a zero block at bit positions offset..offset+len-1.

    Args:
        marked: The affixed part
        offset: First bit position, counted from 1 at the most significant end
        ps: Block size

    Returns:
        The embedded block
    """
    if not 1 <= offset <= ps - marked.length + 1:
        raise BoundsError(f"Offset {offset} outside 1..{ps - marked.length + 1}")
    return Block(marked.bits << (ps - offset - marked.length + 1), ps)


def random_offset(marked: Part, ps: int, rng: random.Random) -> int:
    """Draw an embedding offset uniformly over its legal range."""
    return rng.randint(1, ps - marked.length + 1)


def extract(block: Block) -> Part:
    """
    Recover the part sandwiched between the first and last set bits.

    Raises:
        MalformedBlockError: If the block has fewer than two set bits
    """
    value = block.value
    if value.bit_count() < 2:
        raise MalformedBlockError("Block does not carry two marker bits")
    low = (value & -value).bit_length() - 1
    high = value.bit_length() - 1
    length = high - low - 1
    return Part((value >> (low + 1)) & ((1 << length) - 1), length)


def reassemble(parts: Iterable[Part]) -> bytes:
    """
    Concatenate parts in order.

    Raises:
        IncompleteStreamError: If the bits do not end on an octet boundary
    """
    writer = BitWriter()
    for part in parts:
        writer.write(part)
    if writer.pending.length:
        raise IncompleteStreamError(f"{writer.pending.length} dangling bits at end of stream")
    return writer.take_bytes()
