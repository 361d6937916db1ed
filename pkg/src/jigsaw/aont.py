"""
Linear (s, q)-all-or-nothing transform over GF(2^PS).

Forward:  y_i = x_i + x_s (i < s),  y_s = x_1 + ... + x_{s-1} + lambda * x_s.
Inverse:  x_s = gamma * (y_1 + ... + y_s),  x_i = y_i + x_s,
with gamma = ((s - 1) mod 2 + lambda)^-1, since integer scalars reduce mod 2 in characteristic 2.
The transform is deterministic; input randomization is the caller's job.
"""
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

from src.jigsaw.counters import OpCounters
from src.jigsaw.errors import ConfigurationError, FieldSizeError
from src.jigsaw.field import Block, ReductionPoly, add, inv, mul


def _gamma(s: int, lam: Block, poly: ReductionPoly) -> Block:
    return inv(Block((s - 1) % 2, lam.ps) ^ lam, poly)


def _check(blocks: Sequence[Block], lam: Block) -> int:
    if len(blocks) < 2:
        raise FieldSizeError(f"An AONT group needs at least 2 blocks, got {len(blocks)}")
    if lam.value in (0, 1):
        raise ConfigurationError("lambda must be a field element other than 0 and 1")
    return len(blocks)


@dataclass(frozen=True)
class AontGroup:
    """A group of s blocks with its transform parameters."""

    blocks: Tuple[Block, ...]
    lam: Block
    poly: ReductionPoly
    gamma: Block = field(init=False)

    def __post_init__(self):
        s = _check(self.blocks, self.lam)
        object.__setattr__(self, "gamma", _gamma(s, self.lam, self.poly))

    @property
    def s(self) -> int:
        return len(self.blocks)

    def forward(self, counters: Optional[OpCounters] = None) -> "AontGroup":
        return AontGroup(tuple(aont_forward(self.blocks, self.lam, self.poly, counters)), self.lam, self.poly)

    def inverse(self, counters: Optional[OpCounters] = None) -> "AontGroup":
        return AontGroup(tuple(aont_inverse(self.blocks, self.lam, self.poly, counters)), self.lam, self.poly)


def aont_forward(
    x: Sequence[Block], lam: Block, poly: ReductionPoly, counters: Optional[OpCounters] = None
) -> list:
    """
    Apply the forward transform to s blocks.

    Uses exactly 2(s - 1) block XORs and one block multiplication.

    Args:
        x: Input blocks x_1..x_s
        lam: The lambda parameter
        poly: Field reduction polynomial
        counters: Optional tally to charge the operations to

    Returns:
        Output blocks y_1..y_s
    """
    s = _check(x, lam)
    last = x[-1]
    y = [add(xi, last) for xi in x[:-1]]
    total = x[0]
    for xi in x[1:-1]:
        total = add(total, xi)
    y.append(add(total, mul(lam, last, poly)))
    if counters is not None:
        counters.add(xors=2 * (s - 1), mults=1)
    return y


def aont_inverse(
    y: Sequence[Block], lam: Block, poly: ReductionPoly, counters: Optional[OpCounters] = None
) -> list:
    """
    Invert aont_forward.

    Args:
        y: Output blocks y_1..y_s
        lam: The lambda parameter used forward
        poly: Field reduction polynomial
        counters: Optional tally to charge the operations to

    Returns:
        Input blocks x_1..x_s
    """
    s = _check(y, lam)
    total = y[0]
    for yi in y[1:]:
        total = add(total, yi)
    last = mul(_gamma(s, lam, poly), total, poly)
    x = [add(yi, last) for yi in y[:-1]]
    x.append(last)
    if counters is not None:
        counters.add(xors=2 * (s - 1), mults=1)
    return x
