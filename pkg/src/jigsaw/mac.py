"""
Packet authentication with HMAC.

The MAC covers the packet sequence number, the flags octet and the payload, so a receiver
detects tampering with any of them. The hash is pluggable; SHA-1 is the default, although it
is deprecated for new designs.
"""
import hashlib
import hmac as _hmac
import struct
from dataclasses import dataclass
from typing import Optional

from src.jigsaw.errors import ConfigurationError

DEFAULT_HASH = "sha1"
IPAD = 0x36
OPAD = 0x5C

_SEQ_FLAGS = struct.Struct(">QB")


@dataclass(frozen=True)
class MacConfig:
    """Hash choice, key and tag length for packet authentication."""

    key: bytes
    hash_name: str = DEFAULT_HASH
    tag_len: Optional[int] = None

    def __post_init__(self):
        if not self.key:
            raise ConfigurationError("MAC key must not be empty")
        try:
            digest_size = hashlib.new(self.hash_name).digest_size
        except ValueError:
            raise ConfigurationError(f"Unknown hash function: {self.hash_name}")
        if self.tag_len is None:
            object.__setattr__(self, "tag_len", digest_size)
        elif not 1 <= self.tag_len <= digest_size:
            raise ConfigurationError(f"Tag length must be 1..{digest_size}, got {self.tag_len}")

    @property
    def block_size(self) -> int:
        return hashlib.new(self.hash_name).block_size


def hmac(cfg: MacConfig, msg: bytes) -> bytes:
    """
    Compute H((K ^ opad) || H((K ^ ipad) || msg)), truncated to the configured tag length.

    Keys longer than the hash block are hashed first; shorter keys are zero-padded.

    Args:
        cfg: MAC configuration
        msg: Message to authenticate

    Returns:
        The tag
    """
    block_size = cfg.block_size
    key = cfg.key
    if len(key) > block_size:
        key = hashlib.new(cfg.hash_name, key).digest()
    key = key.ljust(block_size, b"\x00")
    inner = hashlib.new(cfg.hash_name, bytes(b ^ IPAD for b in key) + msg).digest()
    outer = hashlib.new(cfg.hash_name, bytes(b ^ OPAD for b in key) + inner).digest()
    return outer[: cfg.tag_len]


def _packet_message(seq: int, flags: int, payload: bytes) -> bytes:
    return _SEQ_FLAGS.pack(seq, flags) + payload


def tag_packet(cfg: MacConfig, seq: int, flags: int, payload: bytes) -> bytes:
    """Tag a packet over BE64(seq) || flags || payload."""
    return hmac(cfg, _packet_message(seq, flags, payload))


def verify_packet(cfg: MacConfig, seq: int, flags: int, payload: bytes, tag: bytes) -> bool:
    """
    Check a packet tag.

    Returns False on any mismatch, including malformed sequence numbers or flags, and never raises.
    """
    if not 0 <= seq < 1 << 64 or not 0 <= flags < 256:
        return False
    return _hmac.compare_digest(tag_packet(cfg, seq, flags, payload), tag)
