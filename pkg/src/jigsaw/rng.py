"""
Random sources for key generation and the sender.

A RandomSource hands out independent named sub-streams (tear sizes, embed offsets, R values,
AONT randomizer, key generation). Unseeded sources draw every stream from the operating
system's CSPRNG; seeded sources derive each stream deterministically from the seed.
"""
import hashlib
import random
import secrets
from typing import Dict, Optional, Union

from src.jigsaw.field import Block

TEAR_STREAM = "tear"
OFFSET_STREAM = "offset"
R_STREAM = "r"
AONT_STREAM = "aont"
KEYGEN_STREAM = "keygen"

Seed = Union[int, bytes, str]


def _seed_bytes(seed: Seed) -> bytes:
    if isinstance(seed, bytes):
        return seed
    if isinstance(seed, int):
        return seed.to_bytes(max(1, (seed.bit_length() + 7) // 8), "big")
    return bytes.fromhex(seed)


class RandomSource:
    """Factory of named random streams."""

    def __init__(self, seed: Optional[Seed] = None):
        """
        Args:
            seed: Seed for reproducible streams; None selects the system CSPRNG
        """
        self._seed = None if seed is None else _seed_bytes(seed)
        self._streams: Dict[str, random.Random] = {}

    @property
    def seeded(self) -> bool:
        return self._seed is not None

    def stream(self, name: str) -> random.Random:
        """Return the sub-stream called `name`, creating it on first use."""
        if name not in self._streams:
            if self._seed is None:
                self._streams[name] = secrets.SystemRandom()
            else:
                digest = hashlib.sha256(self._seed + b"/" + name.encode()).digest()
                self._streams[name] = random.Random(int.from_bytes(digest, "big"))  # nosec B311
        return self._streams[name]

    def nonzero_block(self, ps: int, name: str) -> Block:
        """Draw a uniformly random nonzero block from stream `name` by rejection."""
        stream = self.stream(name)
        value = 0
        while value == 0:
            value = stream.getrandbits(ps)
        return Block(value, ps)
