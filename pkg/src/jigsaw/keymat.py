"""
Key material for the jigsaw protocol.

This module holds the a-priori exchanged SharedSecret, the evolving PadState, the
transform(P, R) key-evolution step, MAC-key derivation, key generation and the binary
keyfile format.
"""
import hashlib
import logging
import struct
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Optional, Tuple

from src.jigsaw.errors import (
    BadMagicError,
    BoundsError,
    ConfigurationError,
    FieldSizeError,
    InvalidRandomError,
    InvariantViolationError,
    KeyfileError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from src.jigsaw.field import Block, ReductionPoly, add, default_poly, is_irreducible, mul
from src.jigsaw.rng import KEYGEN_STREAM, RandomSource

logger = logging.getLogger(__name__)

KEYFILE_MAGIC = b"JSAW"
KEYFILE_VERSION = 1
_HEADER = struct.Struct(">4sBIHBI")
_MAC_LEN = struct.Struct(">H")

DEFAULT_MAC_KEY_LEN = 20
MAX_MAC_KEY_LEN = 64
MAX_K = 0xFFFF


class Mode(IntEnum):
    """How parts are laid into blocks."""

    BASE = 0
    FULL_BLOCK = 1
    AONT = 2

    @classmethod
    def parse(cls, name: str) -> "Mode":
        try:
            return cls[name.replace("-", "_").upper()]
        except KeyError:
            raise ConfigurationError(f"Unknown mode: {name}")

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")


@dataclass(frozen=True)
class SharedSecret:
    """Everything the sender and receiver agree on before the first transfer."""

    ps: int
    k: int
    p_initial: Tuple[Block, ...]
    mac_key: bytes
    poly: ReductionPoly
    lam: Block
    min_part_bits: int
    mode: Mode = Mode.BASE

    def __post_init__(self):
        if self.ps < 8 or self.ps % 8:
            raise ConfigurationError(f"PS must be a positive multiple of 8 and at least 8, got {self.ps}")
        if not 2 <= self.k <= MAX_K:
            raise ConfigurationError(f"k must be between 2 and {MAX_K} (k = 1 transfers no data), got {self.k}")
        if len(self.p_initial) != self.k:
            raise ConfigurationError(f"Expected {self.k} pad blocks, got {len(self.p_initial)}")
        for index, block in enumerate(self.p_initial, start=1):
            if block.ps != self.ps:
                raise ConfigurationError(f"Pad block P_{index} has {block.ps} bits, expected {self.ps}")
            if block.is_zero():
                raise ConfigurationError(f"Pad block P_{index} is zero")
        if not 1 <= len(self.mac_key) <= MAX_MAC_KEY_LEN:
            raise ConfigurationError(f"MAC key must be 1..{MAX_MAC_KEY_LEN} octets, got {len(self.mac_key)}")
        if self.poly.ps != self.ps:
            raise ConfigurationError(f"Polynomial degree {self.poly.ps} does not match PS={self.ps}")
        if self.lam.ps != self.ps or self.lam.value in (0, 1):
            raise ConfigurationError("lambda must be a field element other than 0 and 1")
        if not 1 <= self.min_part_bits <= self.max_part_bits:
            raise ConfigurationError(f"min_part_bits must be in 1..{self.max_part_bits}, got {self.min_part_bits}")

    @property
    def max_part_bits(self) -> int:
        """Largest part a block can carry: PS without markers, PS - 2 with them."""
        return self.ps if self.mode == Mode.FULL_BLOCK else self.ps - 2

    def fingerprint(self) -> str:
        """SHA-256 of the keyfile encoding, hex."""
        return hashlib.sha256(save_keyfile(self)).hexdigest()


@dataclass(frozen=True)
class PadState:
    """The live key material P_1..P_k and the number of completed runs."""

    p: Tuple[Block, ...]
    run_index: int = 0

    @classmethod
    def initial(cls, secret: SharedSecret) -> "PadState":
        return cls(tuple(secret.p_initial), 0)

    @property
    def k(self) -> int:
        return len(self.p)


def transform(state: PadState, r: Block, poly: ReductionPoly) -> PadState:
    """
    Evolve the pad with the run's random block.

    P_i <- P_i XOR R for i < k and P_k <- P_k * R in the field.

    Args:
        state: Current pad
        r: Nonzero random block of the run
        poly: Field reduction polynomial

    Returns:
        The pad for the next run

    Raises:
        InvalidRandomError: If r is zero, which would zero P_k for good
    """
    if r.is_zero():
        raise InvalidRandomError("R must be nonzero")
    *head, last = state.p
    evolved = tuple(add(p, r) for p in head) + (mul(last, r, poly),)
    return PadState(evolved, state.run_index + 1)


def derive_mac_key(secret: SharedSecret, block_index: int, offset_octets: int, len_octets: int) -> bytes:
    """
    Take a MAC key from a slice of an initial pad block.

    Args:
        secret: Shared secret holding the initial pad
        block_index: Pad block to slice, 1..k
        offset_octets: First octet of the slice
        len_octets: Length of the slice

    Returns:
        The selected octets, big-endian order
    """
    if not 1 <= block_index <= secret.k:
        raise BoundsError(f"Block index {block_index} outside 1..{secret.k}")
    width = secret.ps // 8
    if len_octets < 1 or offset_octets < 0 or offset_octets + len_octets > width:
        raise BoundsError(f"Slice [{offset_octets}, {offset_octets + len_octets}) outside a {width}-octet block")
    return secret.p_initial[block_index - 1].to_bytes()[offset_octets : offset_octets + len_octets]


def keygen(
    ps: int,
    k: int,
    mode: Mode = Mode.BASE,
    min_part_bits: Optional[int] = None,
    rng: Optional[RandomSource] = None,
    poly: Optional[ReductionPoly] = None,
    mac_key: Optional[bytes] = None,
    mac_from_block: Optional[int] = None,
    validate_poly: bool = True,
) -> SharedSecret:
    """
    Generate a fresh shared secret.

    Args:
        ps: Block size in bits
        k: Number of pad blocks
        mode: Part layout mode
        min_part_bits: Lower limit on part size; defaults to PS/2 (PS in full-block mode)
        rng: Random source; None uses the system CSPRNG
        poly: Reduction polynomial; defaults to the shipped or discovered one for `ps`
        mac_key: Explicit MAC key; default is 20 random octets
        mac_from_block: Take the MAC key from this initial pad block instead
        validate_poly: Check irreducibility of a supplied polynomial

    Returns:
        The shared secret

    Raises:
        ConfigurationError: If the parameters break a SharedSecret invariant
    """
    if ps < 8 or ps % 8:
        raise ConfigurationError(f"PS must be a positive multiple of 8 and at least 8, got {ps}")
    if k < 2:
        raise ConfigurationError(f"k must be at least 2 (k = 1 transfers no data), got {k}")
    mode = Mode(mode)
    rng = rng or RandomSource()
    if poly is None:
        poly = default_poly(ps)
    elif validate_poly and not is_irreducible(poly):
        raise ConfigurationError(f"Polynomial {poly} is reducible")
    if min_part_bits is None:
        min_part_bits = ps if mode == Mode.FULL_BLOCK else ps // 2

    p_initial = tuple(rng.nonzero_block(ps, KEYGEN_STREAM) for _ in range(k))
    if mac_key is None:
        mac_key = rng.stream(KEYGEN_STREAM).getrandbits(8 * DEFAULT_MAC_KEY_LEN).to_bytes(DEFAULT_MAC_KEY_LEN, "big")

    secret = SharedSecret(
        ps=ps,
        k=k,
        p_initial=p_initial,
        mac_key=mac_key,
        poly=poly,
        lam=Block(2, ps),
        min_part_bits=min_part_bits,
        mode=mode,
    )
    if mac_from_block is not None:
        secret = replace(secret, mac_key=derive_mac_key(secret, mac_from_block, 0, min(ps // 8, MAX_MAC_KEY_LEN)))
    logger.info("Generated %s keyfile PS=%d k=%d fingerprint %s", mode.label, ps, k, secret.fingerprint()[:16])
    return secret


def save_keyfile(secret: SharedSecret) -> bytes:
    """
    Serialize a shared secret.

    Layout: magic | version | PS/8 | k | mode | min_part_bits | poly | lambda | mac_key_len | mac_key | P.

    Args:
        secret: Secret to serialize

    Returns:
        The keyfile octets
    """
    parts = [
        _HEADER.pack(KEYFILE_MAGIC, KEYFILE_VERSION, secret.ps // 8, secret.k, int(secret.mode), secret.min_part_bits),
        secret.poly.to_bytes(),
        secret.lam.to_bytes(),
        _MAC_LEN.pack(len(secret.mac_key)),
        secret.mac_key,
    ]
    parts.extend(block.to_bytes() for block in secret.p_initial)
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int, what: str) -> bytes:
        if self.pos + count > len(self.data):
            raise TruncatedFileError(f"Keyfile truncated while reading {what}")
        chunk = self.data[self.pos : self.pos + count]
        self.pos += count
        return chunk


def load_keyfile(data: bytes, validate_poly: bool = True) -> SharedSecret:
    """
    Parse and validate a keyfile.

    Args:
        data: Keyfile octets
        validate_poly: Run the irreducibility test on the stored polynomial

    Returns:
        The shared secret

    Raises:
        BadMagicError, UnsupportedVersionError, TruncatedFileError, InvariantViolationError
    """
    reader = _Reader(data)
    magic, version, width, k, mode, min_part_bits = _HEADER.unpack(reader.take(_HEADER.size, "header"))
    if magic != KEYFILE_MAGIC:
        raise BadMagicError(f"Not a keyfile: magic {magic!r}")
    if version != KEYFILE_VERSION:
        raise UnsupportedVersionError(f"Unsupported keyfile version {version}")
    if width == 0:
        raise InvariantViolationError("PS must be positive")
    ps = 8 * width
    try:
        mode = Mode(mode)
    except ValueError:
        raise InvariantViolationError(f"Unknown mode code {mode}")

    poly = ReductionPoly.from_bytes(reader.take(width, "polynomial"), ps)
    lam = Block.from_bytes(reader.take(width, "lambda"), ps)
    (mac_len,) = _MAC_LEN.unpack(reader.take(_MAC_LEN.size, "MAC key length"))
    mac_key = reader.take(mac_len, "MAC key")
    p_initial = tuple(Block.from_bytes(reader.take(width, f"P_{i + 1}"), ps) for i in range(k))
    if reader.pos != len(data):
        raise KeyfileError(f"{len(data) - reader.pos} trailing octets after the keyfile")

    try:
        secret = SharedSecret(
            ps=ps,
            k=k,
            p_initial=p_initial,
            mac_key=mac_key,
            poly=poly,
            lam=lam,
            min_part_bits=min_part_bits,
            mode=mode,
        )
    except (ConfigurationError, FieldSizeError) as e:
        raise InvariantViolationError(f"Invalid keyfile: {e}")
    if validate_poly and not is_irreducible(poly):
        raise InvariantViolationError(f"Keyfile polynomial {poly} is reducible")
    logger.info("Loaded %s keyfile PS=%d k=%d", mode.label, ps, k)
    return secret
