"""
Sender and receiver sessions of the jigsaw protocol.

A sender tears data into parts, lays each part into a block and queues the blocks. Every
k - 1 queued blocks form a run: block i is masked with pad block P_i, a fresh nonzero random
block R is masked with P_k, and the pad then evolves by transform(P, R). The receiver mirrors
the pad, unmasks each run, recovers R from the last slot and extracts the parts.

Runs may span message boundaries: whatever does not fill a run stays queued for the next
push, and flush() closes the stream with flagged padding slots.
"""
import logging
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Callable, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from src.jigsaw.aont import aont_forward, aont_inverse
from src.jigsaw.counters import OpCounters
from src.jigsaw.errors import (
    BoundsError,
    IncompleteMessageError,
    IncompleteStreamError,
    InvalidRandomError,
    ProtocolError,
)
from src.jigsaw.field import Block, add
from src.jigsaw.keymat import Mode, PadState, SharedSecret, transform
from src.jigsaw.rng import AONT_STREAM, OFFSET_STREAM, R_STREAM, TEAR_STREAM, RandomSource
from src.jigsaw.tear import EMPTY_PART, BitWriter, Part, affix, embed, extract, random_offset, tear

logger = logging.getLogger(__name__)

FLAG_GROUP_FINAL = 0x01
FLAG_FLUSH = 0x02
FLAG_PADDING = 0x04
RESERVED_FLAGS = 0xFF & ~(FLAG_GROUP_FINAL | FLAG_FLUSH | FLAG_PADDING)


class Slot(NamedTuple):
    """A queued block before masking; `plain` is the data-derived block it came from."""

    flags: int
    block: Block
    plain: Block


class Emission(NamedTuple):
    """One masked payload ready for framing."""

    seq: int
    flags: int
    payload: Block


@dataclass(frozen=True)
class RunTrace:
    """White-box record of one run, for verification harnesses only."""

    run_index: int
    first_seq: int
    x: Tuple[Block, ...]
    plain: Tuple[Block, ...]
    flags: Tuple[int, ...]
    r: Block
    pad: Tuple[Block, ...]


def mask_run(blocks: Sequence[Block], pad: Sequence[Block], executor: Optional[Executor] = None) -> List[Block]:
    """
    XOR each block of a run with its pad block.

    The maskings are independent, so they may be evaluated in any order or in parallel.
    """
    if len(blocks) != len(pad):
        raise BoundsError(f"A run has {len(pad)} slots, got {len(blocks)} blocks")
    if executor is not None:
        return list(executor.map(add, blocks, pad))
    return [add(b, p) for b, p in zip(blocks, pad)]


class SenderSession:
    """Sender side of a jigsaw session; single owner, not thread-safe."""

    def __init__(
        self,
        secret: SharedSecret,
        rng: Optional[RandomSource] = None,
        pad: Optional[PadState] = None,
        next_seq: int = 0,
        buffer: Iterable[Slot] = (),
        tail: bytes = b"",
        executor: Optional[Executor] = None,
        observer: Optional[Callable[[RunTrace], None]] = None,
    ):
        """
        Initialize a sender session.

        Args:
            secret: Shared secret
            rng: Random source; None uses the system CSPRNG
            pad: Pad state to resume from; defaults to the initial pad
            next_seq: Sequence number of the next emitted payload
            buffer: Queued slots to resume with
            tail: Full-block mode remainder octets to resume with
            executor: Optional executor for intra-run parallel masking
            observer: Optional callback receiving a RunTrace per run
        """
        self.secret = secret
        self.rng = rng or RandomSource()
        self.pad = pad or PadState.initial(secret)
        self.next_seq = next_seq
        self.buffer: List[Slot] = list(buffer)
        self.tail = tail
        self.executor = executor
        self.observer = observer
        self.counters = OpCounters()
        self.parts_torn = 0
        self.runs_emitted = 0
        if len(self.buffer) >= secret.k - 1:
            raise BoundsError(f"At most {secret.k - 2} slots can be queued, got {len(self.buffer)}")

    def push(self, data: bytes) -> List[Emission]:
        """
        Queue a message and emit every run it completes.

        Args:
            data: Message octets

        Returns:
            The masked payloads of the completed runs, in sequence order
        """
        mode = self.secret.mode
        if mode == Mode.AONT:
            return self.aont_wrap(data)
        out: List[Emission] = []
        if mode == Mode.FULL_BLOCK:
            data = self.tail + data
            width = self.secret.ps // 8
            whole = len(data) - len(data) % width
            self.tail = data[whole:]
            for part in tear(data[:whole], self.secret.ps, self.secret.ps, self.rng.stream(TEAR_STREAM)):
                self.parts_torn += 1
                block = Block(part.bits, self.secret.ps)
                out.extend(self._enqueue(Slot(0, block, block)))
            return out
        for part in self._tear(data):
            block = self._lay(part)
            out.extend(self._enqueue(Slot(0, block, block)))
        return out

    def aont_wrap(self, data: bytes) -> List[Emission]:
        """
        Queue a message as one all-or-nothing group.

        The parts are laid into blocks x_1..x_N, a random nonzero block x_{N+1} is appended, and
        the s = N + 1 transformed blocks are queued as full blocks, the last one flagged
        GROUP_FINAL.
        """
        parts = self._tear(data)
        if not parts:
            return []
        xs = [self._lay(part) for part in parts]
        xs.append(self.rng.nonzero_block(self.secret.ps, AONT_STREAM))
        ys = aont_forward(xs, self.secret.lam, self.secret.poly, self.counters)
        logger.debug("AONT group of %d blocks", len(ys))
        out: List[Emission] = []
        for index, (x, y) in enumerate(zip(xs, ys)):
            flags = FLAG_GROUP_FINAL if index == len(ys) - 1 else 0
            out.extend(self._enqueue(Slot(flags, y, x)))
        return out

    def flush(self) -> List[Emission]:
        """
        Close the part stream.

        The final data slot is flagged FLUSH and the run is completed with empty parts flagged
        PADDING. Does nothing when nothing is queued.
        """
        out: List[Emission] = []
        if self.secret.mode == Mode.FULL_BLOCK:
            if self.tail or self.buffer:
                tail_part = Part(int.from_bytes(self.tail, "big"), 8 * len(self.tail))
                self.tail = b""
                block = self._lay(tail_part)
                out.extend(self._enqueue(Slot(FLAG_FLUSH, block, block)))
        elif self.buffer:
            last = self.buffer[-1]
            self.buffer[-1] = last._replace(flags=last.flags | FLAG_FLUSH)
        if self.buffer:
            while len(self.buffer) < self.secret.k - 1:
                block = self._lay(EMPTY_PART)
                self.buffer.append(Slot(FLAG_PADDING, block, block))
            out.extend(self._emit_run())
        return out

    def _tear(self, data: bytes) -> List[Part]:
        parts = tear(data, self.secret.min_part_bits, self.secret.ps - 2, self.rng.stream(TEAR_STREAM))
        self.parts_torn += len(parts)
        return parts

    def _lay(self, part: Part) -> Block:
        marked = affix(part, self.secret.ps)
        return embed(marked, random_offset(marked, self.secret.ps, self.rng.stream(OFFSET_STREAM)), self.secret.ps)

    def _enqueue(self, slot: Slot) -> List[Emission]:
        self.buffer.append(slot)
        if len(self.buffer) == self.secret.k - 1:
            return self._emit_run()
        return []

    def _emit_run(self) -> List[Emission]:
        secret = self.secret
        r = self.rng.nonzero_block(secret.ps, R_STREAM)
        blocks = [slot.block for slot in self.buffer] + [r]
        flags = [slot.flags for slot in self.buffer] + [0]
        payloads = mask_run(blocks, self.pad.p, self.executor)
        self.counters.add(xors=secret.k)

        first_seq = self.next_seq
        if self.observer is not None:
            self.observer(
                RunTrace(
                    run_index=self.pad.run_index,
                    first_seq=first_seq,
                    x=tuple(slot.block for slot in self.buffer),
                    plain=tuple(slot.plain for slot in self.buffer),
                    flags=tuple(flags),
                    r=r,
                    pad=self.pad.p,
                )
            )
        logger.debug("Run %d emitted at seq %d", self.pad.run_index, first_seq)

        self.pad = transform(self.pad, r, secret.poly)
        self.counters.add(xors=secret.k - 1, mults=1)
        self.buffer = []
        self.runs_emitted += 1
        self.next_seq += secret.k
        return [Emission(first_seq + i, f, p) for i, (f, p) in enumerate(zip(flags, payloads))]


class ReceiverSession:
    """Receiver side of a jigsaw session; payloads must arrive in sequence order."""

    def __init__(
        self,
        secret: SharedSecret,
        pad: Optional[PadState] = None,
        expected_seq: int = 0,
        pending: Iterable[Tuple[int, Block]] = (),
        group: Iterable[Block] = (),
        stream_pending: Part = EMPTY_PART,
        executor: Optional[Executor] = None,
    ):
        """
        Initialize a receiver session.

        Args:
            secret: Shared secret
            pad: Pad state to resume from; defaults to the initial pad
            expected_seq: Sequence number of the next payload
            pending: (flags, payload) pairs of a partially received run
            group: Unmasked blocks of an open AONT group
            stream_pending: Recovered bits not yet forming a whole octet
            executor: Optional executor for intra-run parallel unmasking
        """
        self.secret = secret
        self.pad = pad or PadState.initial(secret)
        self.expected_seq = expected_seq
        self.pending: List[Tuple[int, Block]] = list(pending)
        self.group: List[Block] = list(group)
        self.writer = BitWriter(stream_pending)
        self.executor = executor
        self.counters = OpCounters()

    def push(self, flags: int, payload: Block) -> bytes:
        """
        Accept the next payload.

        Args:
            flags: Packet flags
            payload: Masked PS-bit payload

        Returns:
            Newly completed octets of recovered data, possibly empty
        """
        if flags & RESERVED_FLAGS:
            raise ProtocolError(f"Reserved flag bits set: {flags:#04x}")
        if payload.ps != self.secret.ps:
            raise BoundsError(f"Payload has {payload.ps} bits, expected {self.secret.ps}")
        self.pending.append((flags, payload))
        self.expected_seq += 1
        if len(self.pending) < self.secret.k:
            return b""
        return self._process_run()

    def close(self) -> None:
        """
        End the session.

        Raises:
            IncompleteMessageError: If a run, an AONT group or a partial octet is left open
        """
        if self.pending or self.group or self.writer.pending.length:
            raise IncompleteMessageError(
                f"Session closed with {len(self.pending)} run blocks, {len(self.group)} group blocks "
                f"and {self.writer.pending.length} bits outstanding"
            )

    @property
    def stream_pending(self) -> Part:
        return self.writer.pending

    def _process_run(self) -> bytes:
        secret = self.secret
        flags = [f for f, _ in self.pending]
        unmasked = mask_run([p for _, p in self.pending], self.pad.p, self.executor)
        self.counters.add(xors=secret.k)
        self.pending = []
        r = unmasked[-1]
        try:
            self.pad = transform(self.pad, r, secret.poly)
        except InvalidRandomError:
            raise ProtocolError(f"Run {self.pad.run_index} carried R = 0")
        self.counters.add(xors=secret.k - 1, mults=1)

        flushed = False
        for f, x in zip(flags[:-1], unmasked[:-1]):
            if f & FLAG_PADDING:
                continue
            if secret.mode == Mode.BASE:
                self.writer.write(extract(x))
            elif secret.mode == Mode.FULL_BLOCK:
                self.writer.write(extract(x) if f & FLAG_FLUSH else Part(x.value, secret.ps))
            else:
                self.group.append(x)
                if f & FLAG_GROUP_FINAL:
                    self._close_group()
            flushed = flushed or bool(f & FLAG_FLUSH)

        if flushed and (self.writer.pending.length or self.group):
            raise IncompleteStreamError(
                f"Flush boundary with {self.writer.pending.length} dangling bits and {len(self.group)} group blocks"
            )
        return self.writer.take_bytes()

    def _close_group(self) -> None:
        if len(self.group) < 2:
            raise ProtocolError(f"AONT group of {len(self.group)} blocks is too short")
        xs = aont_inverse(self.group, self.secret.lam, self.secret.poly, self.counters)
        self.group = []
        for x in xs[:-1]:
            self.writer.write(extract(x))
