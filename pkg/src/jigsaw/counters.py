"""Block-operation tallies used to reconcile the implementation with the closed-form counts."""
from dataclasses import dataclass


@dataclass
class OpCounters:
    """Counts of PS-bit block XORs and block multiplications actually performed."""

    block_xors: int = 0
    block_mults: int = 0

    def add(self, xors: int = 0, mults: int = 0) -> None:
        if xors < 0 or mults < 0:
            raise ValueError("Operation counts only grow")
        self.block_xors += xors
        self.block_mults += mults

    def snapshot(self) -> "OpCounters":
        return OpCounters(self.block_xors, self.block_mults)
