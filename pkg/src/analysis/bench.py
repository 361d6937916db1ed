"""
Operation-count analysis.

Closed-form block-operation counts for transferring N parts, the AES lower-bound comparator,
reconciliation of a real sender's instrumented counters with the closed forms, and CSV rows
for the data-size and k sweeps.

All AES figures use the lower-bound accounting of at least 11 block XORs per block, ignoring
table lookups, shifts and matrix multiplications.
"""
import csv
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, NamedTuple, Optional, TextIO, Tuple

from src.jigsaw.codec import SenderSession
from src.jigsaw.counters import OpCounters
from src.jigsaw.errors import ConfigurationError
from src.jigsaw.keymat import Mode, SharedSecret
from src.jigsaw.rng import RandomSource

logger = logging.getLogger(__name__)

AES_XORS_PER_BLOCK = 11
CSV_HEADER = ("k", "data_size_bits", "N", "xor_blocks", "mult_blocks", "aes_xor_blocks", "mode")


class PartPolicy(Enum):
    """Part-size assumption for turning a data size into a part count."""

    BEST = "best"
    WORST = "worst"

    def part_bits(self, ps: int) -> int:
        return ps if self == PartPolicy.BEST else ps // 2


def closed_form_counts(n: int, k: int, mode: Mode = Mode.BASE) -> Tuple[int, int]:
    """
    Closed-form (xors, mults) for N parts.

    Base:  N + floor(N/k)(k - 1) additions and floor(N/k) multiplications.
    AONT:  3N + floor(N/k)(k - 1) - 2 additions and floor(N/k) + 1 multiplications.

    Args:
        n: Number of parts
        k: Pad blocks
        mode: BASE and FULL_BLOCK share the base formula

    Returns:
        (block XORs, block multiplications)
    """
    if n < 0 or k < 2:
        raise ConfigurationError(f"Counts need N >= 0 and k >= 2, got N={n}, k={k}")
    changes = n // k
    if mode == Mode.AONT:
        if n < 1:
            raise ConfigurationError("The AONT count formula needs N >= 1")
        return 3 * n + changes * (k - 1) - 2, changes + 1
    return n + changes * (k - 1), changes


def aes_counts(blocks: int) -> int:
    """Lower-bound block XORs for AES over `blocks` PS-bit blocks."""
    if blocks < 0:
        raise ConfigurationError(f"Block count must be non-negative, got {blocks}")
    return AES_XORS_PER_BLOCK * blocks


class CountRow(NamedTuple):
    k: int
    data_size_bits: int
    n: int
    xor_blocks: int
    mult_blocks: int
    aes_xor_blocks: int
    mode: str


def count_rows(
    k_values: Iterable[int],
    data_sizes: Iterable[int],
    ps: int,
    mode: Mode = Mode.BASE,
    policy: PartPolicy = PartPolicy.BEST,
) -> List[CountRow]:
    """
    Evaluate the closed forms over a grid of k and data sizes.

    Args:
        k_values: Values of k
        data_sizes: Data sizes in bits
        ps: Block size in bits
        mode: Count formula to use
        policy: Part-size assumption

    Returns:
        One row per (k, size), k-major
    """
    sizes = sorted(data_sizes)
    part_bits = policy.part_bits(ps)
    rows = []
    for k in k_values:
        for size in sizes:
            n = math.ceil(size / part_bits)
            if mode == Mode.AONT and n == 0:
                xors, mults = 0, 0
            else:
                xors, mults = closed_form_counts(n, k, mode)
            rows.append(CountRow(k, size, n, xors, mults, aes_counts(math.ceil(size / ps)), mode.label))
    return rows


def emit_csv(
    k_values: Iterable[int],
    data_sizes: Iterable[int],
    ps: int,
    sink: TextIO,
    mode: Mode = Mode.BASE,
    policy: PartPolicy = PartPolicy.BEST,
) -> List[CountRow]:
    """
    Write the count grid as CSV with LF line endings.

    Returns:
        The rows written
    """
    rows = count_rows(k_values, data_sizes, ps, mode, policy)
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(rows)
    logger.info("Wrote %d count rows", len(rows))
    return rows


@dataclass(frozen=True)
class Reconciliation:
    """
    Instrumented counters set against the closed forms.

    The closed forms read a run as k parts with one pad change. A sender run masks k - 1 data
    parts and R, so the formulas reproduce the counters only when N counts every masked block,
    R included. Evaluated on data parts alone they fall short, and the shortfall is kept in
    `residual`.
    """

    instrumented_xors: int
    instrumented_mults: int
    parts: int
    runs: int
    k: int

    @property
    def data_form(self) -> Tuple[int, int]:
        """Closed form with N = data parts torn."""
        return closed_form_counts(self.parts, self.k)

    @property
    def block_form(self) -> Tuple[int, int]:
        """Closed form with N = blocks masked, k per run."""
        return closed_form_counts(self.runs * self.k, self.k)

    @property
    def r_masking_xors(self) -> int:
        return self.runs

    @property
    def residual(self) -> int:
        """Instrumented XORs left after the data-part closed form and one R-masking XOR per run."""
        return self.instrumented_xors - self.data_form[0] - self.r_masking_xors

    @property
    def matches_block_form(self) -> bool:
        return (self.instrumented_xors, self.instrumented_mults) == self.block_form


def reconcile(counters: OpCounters, parts: int, runs: int, k: int) -> Reconciliation:
    """
    Reconcile a base or full-block sender's counters.

    Args:
        counters: Instrumented counters of a sender
        parts: Data parts torn
        runs: Completed runs
        k: Pad blocks

    Returns:
        The reconciliation
    """
    return Reconciliation(counters.block_xors, counters.block_mults, parts, runs, k)


@dataclass(frozen=True)
class CountReport:
    parts: int
    runs: int
    closed_form: Tuple[int, int]
    reconciliation: Reconciliation


def measure_counts(secret: SharedSecret, data: bytes, seed: Optional[int] = None, flush: bool = False) -> CountReport:
    """
    Push `data` through a real sender and report its counters next to the closed forms.

    Args:
        secret: Shared secret; AONT mode is rejected because its group operations mix into the counters
        data: Message
        seed: Sender seed
        flush: Also flush the trailing partial run

    Returns:
        The count report
    """
    if secret.mode == Mode.AONT:
        raise ConfigurationError("Instrumented reconciliation covers base and full-block modes")
    sender = SenderSession(secret, rng=RandomSource(seed))
    sender.push(data)
    if flush:
        sender.flush()
    runs = sender.runs_emitted
    return CountReport(
        parts=sender.parts_torn,
        runs=runs,
        closed_form=closed_form_counts(sender.parts_torn, secret.k, secret.mode),
        reconciliation=reconcile(sender.counters, sender.parts_torn, runs, secret.k),
    )
