"""
Packet framing, sequence-number reordering and packet-stream files.

A frame is seq (8 octets, big-endian) | flags (1) | payload (PS/8) | tag. A packet-stream file
is a 20-octet header followed by frames. Received packets pass the MAC gate first; only
authentic packets reach the reorder buffer, which hands the codec a gap-free, in-order stream.
"""
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, List, Optional, Tuple, Union

from src.jigsaw.codec import RESERVED_FLAGS, Emission, ReceiverSession
from src.jigsaw.errors import MissingPacketError, ProtocolError, StreamFormatError
from src.jigsaw.field import Block
from src.jigsaw.mac import MacConfig, tag_packet, verify_packet

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 64
STREAM_MAGIC = b"JPKT"
STREAM_VERSION = 1
_FRAME_HEAD = struct.Struct(">QB")
_STREAM_HEADER = struct.Struct(">4sBIHBQ")


@dataclass(frozen=True)
class Packet:
    """The wire unit: sequence number, flags, masked payload and MAC tag."""

    seq: int
    flags: int
    payload: bytes
    tag: bytes

    @property
    def reserved_bits(self) -> int:
        return self.flags & RESERVED_FLAGS


def encode_packet(packet: Packet) -> bytes:
    """Encode a packet as seq | flags | payload | tag."""
    return _FRAME_HEAD.pack(packet.seq, packet.flags) + packet.payload + packet.tag


def decode_packet(data: bytes, payload_len: int, tag_len: int) -> Packet:
    """
    Decode one frame.

    Args:
        data: Frame octets
        payload_len: Payload length, PS/8
        tag_len: Tag length

    Returns:
        The packet

    Raises:
        StreamFormatError: If the frame length is wrong
    """
    expected = _FRAME_HEAD.size + payload_len + tag_len
    if len(data) != expected:
        raise StreamFormatError(f"Frame of {len(data)} octets, expected {expected}")
    seq, flags = _FRAME_HEAD.unpack_from(data)
    payload = data[_FRAME_HEAD.size : _FRAME_HEAD.size + payload_len]
    return Packet(seq, flags, payload, data[_FRAME_HEAD.size + payload_len :])


def packetize(emissions: Iterable[Emission], mac: MacConfig) -> List[Packet]:
    """Frame codec emissions and tag each one."""
    packets = []
    for emission in emissions:
        payload = emission.payload.to_bytes()
        packets.append(
            Packet(emission.seq, emission.flags, payload, tag_packet(mac, emission.seq, emission.flags, payload))
        )
    return packets


class ReorderBuffer:
    """Releases packets strictly in sequence order, holding early arrivals in a bounded window."""

    def __init__(self, window: int = DEFAULT_WINDOW, next_seq: int = 0):
        """
        Args:
            window: Capacity W; a packet W or more ahead of the expected one means a loss
            next_seq: First expected sequence number
        """
        if window < 1:
            raise ValueError("Reorder window must hold at least one packet")
        self.window = window
        self.next_seq = next_seq
        self._held: Dict[int, Packet] = {}
        self.duplicates = 0

    def __len__(self) -> int:
        return len(self._held)

    def push(self, packet: Packet) -> List[Packet]:
        """
        Accept a packet and return the in-order run it completes.

        Raises:
            MissingPacketError: If the packet lies beyond the window, naming the absent seq
        """
        if packet.seq < self.next_seq or packet.seq in self._held:
            self.duplicates += 1
            logger.debug("Dropping duplicate packet %d", packet.seq)
            return []
        if packet.seq - self.next_seq >= self.window:
            raise MissingPacketError(self.next_seq)
        self._held[packet.seq] = packet
        ready = []
        while self.next_seq in self._held:
            ready.append(self._held.pop(self.next_seq))
            self.next_seq += 1
        return ready

    def finish(self, total: Optional[int] = None) -> None:
        """
        Check that nothing is missing at end of input.

        Args:
            total: Number of packets the sender emitted, when known
        """
        if self._held or (total is not None and self.next_seq < total):
            raise MissingPacketError(self.next_seq)


class ReceivingEndpoint:
    """MAC gate, reorder buffer and receiver session chained together."""

    def __init__(self, session: ReceiverSession, mac: MacConfig, window: int = DEFAULT_WINDOW):
        self.session = session
        self.mac = mac
        self.reorder = ReorderBuffer(window, session.expected_seq)
        self.rejected: List[int] = []
        self.accepted = 0

    def accept(self, packet: Packet) -> bytes:
        """
        Authenticate and deliver one packet.

        Returns:
            Data octets recovered as a result, possibly empty
        """
        if not verify_packet(self.mac, packet.seq, packet.flags, packet.payload, packet.tag):
            logger.warning("MAC check failed for packet claiming seq %d", packet.seq)
            self.rejected.append(packet.seq)
            return b""
        if packet.reserved_bits:
            raise ProtocolError(f"Packet {packet.seq} has reserved flag bits set")
        self.accepted += 1
        out = bytearray()
        for ready in self.reorder.push(packet):
            out += self.session.push(ready.flags, Block.from_bytes(ready.payload, self.session.secret.ps))
        return bytes(out)

    def finish(self, total: Optional[int] = None) -> None:
        """Raise if packets are missing or the session ends mid-run."""
        self.reorder.finish(total)
        self.session.close()


@dataclass(frozen=True)
class StreamHeader:
    """Parameters recorded at the head of a packet-stream file."""

    ps: int
    k: int
    tag_len: int
    count: int

    @property
    def frame_len(self) -> int:
        return _FRAME_HEAD.size + self.ps // 8 + self.tag_len


Sink = Union[str, Path, BinaryIO]


def write_stream(sink: Sink, packets: List[Packet], ps: int, k: int, tag_len: int) -> None:
    """
    Write a packet-stream file.

    Args:
        sink: Path or binary file object
        packets: Packets in sending order
        ps: Block size in bits
        k: Pad blocks per run
        tag_len: Tag length in octets
    """
    header = _STREAM_HEADER.pack(STREAM_MAGIC, STREAM_VERSION, ps // 8, k, tag_len, len(packets))
    body = b"".join(encode_packet(p) for p in packets)
    if isinstance(sink, (str, Path)):
        Path(sink).write_bytes(header + body)
    else:
        sink.write(header + body)


def read_stream(source: Sink) -> Tuple[StreamHeader, List[Packet]]:
    """
    Read a packet-stream file.

    Returns:
        The header and the packets in file order

    Raises:
        StreamFormatError: On bad magic, version, or a count that does not match the frames
    """
    data = Path(source).read_bytes() if isinstance(source, (str, Path)) else source.read()
    if len(data) < _STREAM_HEADER.size:
        raise StreamFormatError("Packet stream shorter than its header")
    magic, version, width, k, tag_len, count = _STREAM_HEADER.unpack_from(data)
    if magic != STREAM_MAGIC:
        raise StreamFormatError(f"Not a packet stream: magic {magic!r}")
    if version != STREAM_VERSION:
        raise StreamFormatError(f"Unsupported packet stream version {version}")
    if width == 0:
        raise StreamFormatError("Packet stream announces zero-width payloads")
    header = StreamHeader(8 * width, k, tag_len, count)
    body = data[_STREAM_HEADER.size :]
    if len(body) != count * header.frame_len:
        raise StreamFormatError(f"Header announces {count} packets but the body holds {len(body)} octets")
    frames = [body[i * header.frame_len : (i + 1) * header.frame_len] for i in range(count)]
    return header, [decode_packet(frame, width, tag_len) for frame in frames]
