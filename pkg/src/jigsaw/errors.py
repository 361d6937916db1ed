"""
Exception hierarchy for the jigsaw transfer library.

Every error a caller can provoke with bad input derives from JigsawError. The CLI maps
the three families below onto its exit codes (parse, authentication, protocol).
"""
from typing import Optional


class JigsawError(Exception):
    """Base class for all library errors."""


class ConfigurationError(JigsawError):
    """Invalid parameters or an unsupported configuration."""


class FieldSizeError(JigsawError):
    """Operands of a field operation disagree on the block size."""


class FieldDivisionError(JigsawError):
    """Inversion of the zero element."""


class InvalidRandomError(JigsawError):
    """A random block or pad block is zero where a nonzero value is required."""


class BoundsError(JigsawError):
    """An offset or slice falls outside its legal range."""


class KeyfileError(JigsawError):
    """A keyfile could not be parsed."""


class BadMagicError(KeyfileError):
    """The file does not start with the expected magic octets."""


class UnsupportedVersionError(KeyfileError):
    """The file format version is not understood."""


class TruncatedFileError(KeyfileError):
    """The file ends before all declared fields were read."""


class InvariantViolationError(KeyfileError):
    """The file parsed but its contents break a SharedSecret invariant."""


class StreamFormatError(JigsawError):
    """A packet frame or packet-stream file is malformed."""


class AuthenticationError(JigsawError):
    """One or more packets failed MAC verification."""

    def __init__(self, message: str, rejected: int = 0):
        super().__init__(message)
        self.rejected = rejected


class ProtocolError(JigsawError):
    """The peer or the packet stream violated the protocol."""


class MalformedBlockError(ProtocolError):
    """An unmasked block does not carry the two marker bits."""


class IncompleteStreamError(ProtocolError):
    """Bits are left over where the stream should end on an octet boundary."""


class IncompleteMessageError(ProtocolError):
    """A session was closed with a partial run or an open AONT group."""


class MissingPacketError(ProtocolError):
    """A sequence number never arrived."""

    def __init__(self, seq: int, message: Optional[str] = None):
        super().__init__(message or f"Packet with sequence number {seq} is missing")
        self.seq = seq


class InsufficientCaptureError(ProtocolError):
    """The adversary tap does not hold the rounds an attack step needs."""


class StateMismatchError(ProtocolError):
    """A session-state file does not belong to the keyfile or role in use."""


class StateFileError(JigsawError, RuntimeError):
    """A session-state file could not be read or written."""

