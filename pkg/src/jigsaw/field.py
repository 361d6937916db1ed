"""
Arithmetic in the binary field GF(2^PS).

This module provides the Block type (a PS-bit value that doubles as a field element and as a
packet payload), reduction polynomials, and the field operations the protocol is built on:
addition, multiplication, inversion and Rabin's irreducibility test.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Tuple

from src.jigsaw.errors import ConfigurationError, FieldDivisionError, FieldSizeError

logger = logging.getLogger(__name__)

# Exponents of the terms below the leading one.
SHIPPED_POLYNOMIALS: Dict[int, Tuple[int, ...]] = {
    8: (4, 3, 1, 0),
    64: (4, 3, 1, 0),
    128: (7, 2, 1, 0),
}

# Irreducibility tests look for factors up to this degree before finishing the full test.
SMALL_FACTOR_DEGREE = 8


@dataclass(frozen=True)
class Block:
    """
    A PS-bit value.

    Bit 1 is the most significant bit; as a field element the value is read as the polynomial
    whose coefficient of x^i is bit i of the integer.
    """

    value: int
    ps: int

    def __post_init__(self):
        if self.ps < 1:
            raise FieldSizeError(f"Block size must be positive, got {self.ps}")
        if self.value < 0 or self.value >> self.ps:
            raise FieldSizeError(f"Value does not fit in {self.ps} bits")

    @classmethod
    def zero(cls, ps: int) -> "Block":
        return cls(0, ps)

    @classmethod
    def one(cls, ps: int) -> "Block":
        return cls(1, ps)

    @classmethod
    def from_bytes(cls, data: bytes, ps: int = None) -> "Block":
        """
        Build a block from big-endian octets.

        Args:
            data: Octets, most significant first
            ps: Block size in bits; defaults to 8 * len(data)

        Returns:
            The block
        """
        if ps is None:
            ps = 8 * len(data)
        if 8 * len(data) != ps:
            raise FieldSizeError(f"Expected {ps // 8} octets for a {ps}-bit block, got {len(data)}")
        return cls(int.from_bytes(data, "big"), ps)

    @classmethod
    def from_bit_string(cls, bits: str) -> "Block":
        """Build a block from a string of '0'/'1' characters, most significant first."""
        return cls(int(bits, 2), len(bits))

    def to_bytes(self) -> bytes:
        if self.ps % 8:
            raise FieldSizeError(f"A {self.ps}-bit block has no octet encoding")
        return self.value.to_bytes(self.ps // 8, "big")

    def to_bit_string(self) -> str:
        return format(self.value, f"0{self.ps}b")

    def bit(self, index: int) -> int:
        """Return bit `index`, counted from 1 at the most significant end."""
        if not 1 <= index <= self.ps:
            raise FieldSizeError(f"Bit index {index} outside 1..{self.ps}")
        return (self.value >> (self.ps - index)) & 1

    def is_zero(self) -> bool:
        return self.value == 0

    def __xor__(self, other: "Block") -> "Block":
        return add(self, other)


@dataclass(frozen=True)
class ReductionPoly:
    """A monic polynomial of degree `ps`; `low_bits` holds the coefficients below the leading term."""

    ps: int
    low_bits: int

    def __post_init__(self):
        if self.ps < 1:
            raise FieldSizeError(f"Polynomial degree must be positive, got {self.ps}")
        if self.low_bits < 0 or self.low_bits >> self.ps:
            raise FieldSizeError(f"Low coefficients do not fit below degree {self.ps}")

    @property
    def modulus(self) -> int:
        return (1 << self.ps) | self.low_bits

    @classmethod
    def from_exponents(cls, ps: int, exponents: Iterable[int]) -> "ReductionPoly":
        """
        Build x^ps + sum(x^e) from the exponents of the lower terms.

        Args:
            ps: Degree of the polynomial
            exponents: Exponents of the nonzero lower terms

        Returns:
            The reduction polynomial
        """
        low = 0
        for exponent in exponents:
            if not 0 <= exponent < ps:
                raise FieldSizeError(f"Exponent {exponent} is not below degree {ps}")
            low |= 1 << exponent
        return cls(ps, low)

    @classmethod
    def from_bytes(cls, data: bytes, ps: int) -> "ReductionPoly":
        if 8 * len(data) != ps:
            raise FieldSizeError(f"Expected {ps // 8} octets of polynomial coefficients, got {len(data)}")
        return cls(ps, int.from_bytes(data, "big"))

    def to_bytes(self) -> bytes:
        return self.low_bits.to_bytes(self.ps // 8, "big")

    def exponents(self) -> List[int]:
        return [self.ps] + [e for e in range(self.ps - 1, -1, -1) if (self.low_bits >> e) & 1]

    def __str__(self) -> str:
        terms = []
        for e in self.exponents():
            terms.append("1" if e == 0 else "x" if e == 1 else f"x^{e}")
        return " + ".join(terms)


def _check_same_size(*blocks: Block) -> int:
    sizes = {b.ps for b in blocks}
    if len(sizes) != 1:
        raise FieldSizeError(f"Mismatched block sizes: {sorted(sizes)}")
    return sizes.pop()


def add(a: Block, b: Block) -> Block:
    """Field addition: bitwise XOR of two equally sized blocks."""
    ps = _check_same_size(a, b)
    return Block(a.value ^ b.value, ps)


def mul(a: Block, b: Block, f: ReductionPoly) -> Block:
    """
    Multiply two field elements.

    Shift-and-XOR over the bits of `b`, reducing `a * x^i` modulo `f` after every shift so no
    intermediate value exceeds PS bits.

    Args:
        a: First factor
        b: Second factor
        f: Reduction polynomial of the same degree

    Returns:
        The product a * b mod f
    """
    ps = _check_same_size(a, b)
    if f.ps != ps:
        raise FieldSizeError(f"Polynomial of degree {f.ps} cannot reduce {ps}-bit blocks")
    top = 1 << ps
    modulus = f.modulus
    x, y, product = a.value, b.value, 0
    while y:
        if y & 1:
            product ^= x
        y >>= 1
        x <<= 1
        if x & top:
            x ^= modulus
    return Block(product, ps)


def inv(a: Block, f: ReductionPoly) -> Block:
    """
    Multiplicative inverse by the extended Euclidean algorithm over GF(2)[x].

    Args:
        a: Nonzero field element
        f: Reduction polynomial

    Returns:
        The element b with mul(a, b, f) == 1

    Raises:
        FieldDivisionError: If `a` is zero or shares a factor with `f`
    """
    if a.ps != f.ps:
        raise FieldSizeError(f"Polynomial of degree {f.ps} cannot reduce {a.ps}-bit blocks")
    if a.is_zero():
        raise FieldDivisionError("Zero has no multiplicative inverse")
    r0, r1 = f.modulus, a.value
    s0, s1 = 0, 1
    while r1:
        quotient, remainder = _poly_divmod(r0, r1)
        r0, r1 = r1, remainder
        s0, s1 = s1, s0 ^ _clmul(quotient, s1)
    if r0 != 1:
        raise FieldDivisionError(f"Element is not invertible modulo {f}")
    return Block(_poly_mod(s0, f.modulus), a.ps)


def is_irreducible(f: ReductionPoly) -> bool:
    """
    Rabin's irreducibility test.

    f of degree n is irreducible iff x^(2^n) = x (mod f) and gcd(x^(2^(n/q)) - x, f) = 1 for
    every prime q dividing n.

    Args:
        f: Monic polynomial to test

    Returns:
        True if f is irreducible over GF(2)
    """
    n = f.ps
    modulus = f.modulus
    x = _poly_mod(0b10, modulus)
    checkpoints = {n // q: q for q in _prime_factors(n)}
    frobenius = {}
    h = x
    for i in range(1, n + 1):
        h = _reduce(_square(h), f)
        if i in checkpoints:
            frobenius[i] = h
        # A factor of degree i divides x^(2^i) - x; finding one early ends the test.
        if i <= min(SMALL_FACTOR_DEGREE, n // 2) and _poly_gcd(h ^ x, modulus) != 1:
            return False
    if h != x:
        return False
    for i in checkpoints:
        if _poly_gcd(frobenius[i] ^ x, modulus) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def find_irreducible(ps: int) -> ReductionPoly:
    """
    Find a low-weight irreducible polynomial of degree `ps`.

    Trinomials x^ps + x^a + 1 are tried first, then pentanomials x^ps + x^a + x^b + x^c + 1 with a > b > c,
    smallest a first, then smallest b, then smallest c, so the result is deterministic. No trinomial of
    a degree divisible by 8 is irreducible, so those degrees go straight to pentanomials.

    Args:
        ps: Degree of the wanted polynomial

    Returns:
        The first irreducible candidate
    """
    for a in range(1, ps if ps % 8 else 0):
        candidate = ReductionPoly.from_exponents(ps, (a, 0))
        if is_irreducible(candidate):
            logger.debug("Found irreducible trinomial %s", candidate)
            return candidate
    for a in range(3, ps):
        for c, b in _ordered_pairs(a):
            candidate = ReductionPoly.from_exponents(ps, (a, b, c, 0))
            if is_irreducible(candidate):
                logger.debug("Found irreducible pentanomial %s", candidate)
                return candidate
    raise ConfigurationError(f"No low-weight irreducible polynomial of degree {ps} found")


def _ordered_pairs(a: int) -> Iterable[Tuple[int, int]]:
    for b in range(2, a):
        for c in range(1, b):
            yield c, b


def default_poly(ps: int, search: bool = True) -> ReductionPoly:
    """
    Return the reduction polynomial used for `ps` when none is supplied.

    Args:
        ps: Block size in bits
        search: Fall back to find_irreducible for sizes without a shipped polynomial

    Returns:
        The reduction polynomial
    """
    if ps in SHIPPED_POLYNOMIALS:
        return ReductionPoly.from_exponents(ps, SHIPPED_POLYNOMIALS[ps])
    if not search:
        raise ConfigurationError(f"No polynomial shipped for PS={ps}; one must be supplied")
    logger.info("Searching for an irreducible polynomial of degree %d", ps)
    return find_irreducible(ps)


def _clmul(a: int, b: int) -> int:
    if a.bit_count() > b.bit_count():
        a, b = b, a
    product = 0
    while a:
        low = a & -a
        product ^= b << (low.bit_length() - 1)
        a ^= low
    return product


def _square(a: int) -> int:
    # Squaring over GF(2) interleaves zero bits: read the binary digits as base-4 digits.
    return int(format(a, "b"), 4)


def _poly_divmod(a: int, b: int) -> Tuple[int, int]:
    if b == 0:
        raise ValueError("Polynomial division by zero")
    quotient = 0
    db = b.bit_length()
    while a.bit_length() >= db:
        shift = a.bit_length() - db
        quotient |= 1 << shift
        a ^= b << shift
    return quotient, a


def _poly_mod(a: int, b: int) -> int:
    return _poly_divmod(a, b)[1]


def _poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, _poly_mod(a, b)
    return a


def _reduce(a: int, f: ReductionPoly) -> int:
    # Folding the high half through the low coefficients converges in two passes when they are
    # short; dense polynomials fall back to long division.
    if f.low_bits.bit_length() * 2 > f.ps:
        return _poly_mod(a, f.modulus)
    mask = (1 << f.ps) - 1
    while a >> f.ps:
        a = (a & mask) ^ _clmul(a >> f.ps, f.low_bits)
    return a


def _prime_factors(n: int) -> List[int]:
    factors = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            factors.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        factors.append(n)
    return factors
