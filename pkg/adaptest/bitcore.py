"""Strings, keys, ordinals and the systematic code."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import cycle, islice
from math import comb
from typing import Callable, Collection, Iterable, Iterator, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

Key = int
"""A key is an integer in 1..m; the alias documents intent at call sites."""

# Exhaustive pairwise verification above this many codewords is skipped.
VERIFY_LIMIT = 4096

T = TypeVar("T")


class ShapeMismatch(ValueError):
    """Raised when strings or distributions disagree in length or alphabet."""


class CodeConstructionError(ValueError):
    """Raised when a systematic code cannot be built or fails its distance check."""


@dataclass(frozen=True, slots=True)
class SymString:
    """A fixed-length word over the alphabet ``0..alphabet_size-1``."""

    symbols: tuple[int, ...]
    alphabet_size: int = 2

    def __post_init__(self) -> None:
        symbols = tuple(int(symbol) for symbol in self.symbols)
        object.__setattr__(self, "symbols", symbols)
        if not symbols:
            raise ValueError("strings must have length at least 1")
        if self.alphabet_size < 2:
            raise ValueError(f"alphabet size must be at least 2, got {self.alphabet_size}")
        for symbol in symbols:
            if not 0 <= symbol < self.alphabet_size:
                raise ValueError(
                    f"symbol {symbol} outside alphabet of size {self.alphabet_size}"
                )

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[int]:
        return iter(self.symbols)

    def __getitem__(self, index: int) -> int:
        return self.symbols[index]

    def __add__(self, other: SymString) -> SymString:
        if other.alphabet_size != self.alphabet_size:
            raise ShapeMismatch("cannot concatenate strings over different alphabets")
        return word(self.symbols + other.symbols, self.alphabet_size)

    def slice(self, start: int, stop: int) -> SymString:
        """Zero-based half-open slice, kept as a string of the same alphabet."""
        return word(self.symbols[start:stop], self.alphabet_size)

    def __str__(self) -> str:
        if self.alphabet_size == 2:
            return "".join(str(symbol) for symbol in self.symbols)
        return " ".join(str(symbol) for symbol in self.symbols)

    @classmethod
    def from_text(cls, text: str, alphabet_size: int = 2) -> SymString:
        cleaned = text.strip()
        if alphabet_size <= 10 and " " not in cleaned:
            tokens: Iterable[str] = cleaned
        else:
            tokens = cleaned.split()
        try:
            symbols = tuple(int(token) for token in tokens)
        except ValueError as exc:
            raise ValueError(f"cannot parse string from {text!r}") from exc
        return word(symbols, alphabet_size)


@dataclass(frozen=True, slots=True)
class BitString(SymString):
    """A binary word; the unit every Huge Object sample is made of."""

    def __post_init__(self) -> None:
        SymString.__post_init__(self)
        if self.alphabet_size != 2:
            raise ValueError("bit strings are binary")

    @property
    def bits(self) -> tuple[int, ...]:
        return self.symbols


def word(symbols: Iterable[int], alphabet_size: int = 2) -> SymString:
    """Build the canonical string type for an alphabet (BitString when binary)."""

    if alphabet_size == 2:
        return BitString(tuple(symbols))
    return SymString(tuple(symbols), alphabet_size)


def zeros(n: int) -> BitString:
    return BitString((0,) * n)


def ones(n: int) -> BitString:
    return BitString((1,) * n)


def int_to_bits(value: int, length: int) -> tuple[int, ...]:
    """Most significant bit first."""
    return tuple((value >> (length - 1 - i)) & 1 for i in range(length))


def bits_to_int(bits: Iterable[int]) -> int:
    value = 0
    for bit in bits:
        value = (value << 1) | (bit & 1)
    return value


def prefix_length(m: int) -> int:
    """``ceil(log2 m)``, the length of the systematic prefix that names a key."""

    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    return (m - 1).bit_length()


def hamming(x: SymString, y: SymString) -> Fraction:
    """Normalized Hamming distance as an exact rational."""

    if len(x) != len(y):
        raise ShapeMismatch(f"length mismatch: {len(x)} != {len(y)}")
    if x.alphabet_size != y.alphabet_size:
        raise ShapeMismatch(
            f"alphabet mismatch: {x.alphabet_size} != {y.alphabet_size}"
        )
    mismatches = sum(1 for a, b in zip(x.symbols, y.symbols) if a != b)
    return Fraction(mismatches, len(x))


@dataclass(frozen=True, slots=True)
class SystematicCode:
    """A code ``[m] -> {0,1}^n`` whose first ``L`` bits spell ``key - 1`` in binary."""

    m: int
    n: int
    L: int
    codewords: tuple[BitString, ...]

    def __post_init__(self) -> None:
        if len(self.codewords) != self.m:
            raise CodeConstructionError(
                f"expected {self.m} codewords, got {len(self.codewords)}"
            )
        if self.L != prefix_length(self.m):
            raise CodeConstructionError(f"prefix length {self.L} does not fit m={self.m}")
        if any(len(codeword) != self.n for codeword in self.codewords):
            raise CodeConstructionError(f"every codeword must have length {self.n}")

    def codeword(self, key: Key) -> BitString:
        if not 1 <= key <= self.m:
            raise ValueError(f"key {key} outside 1..{self.m}")
        return self.codewords[key - 1]

    def decode(self, x: SymString) -> Key:
        return key_of(x, self.m)

    def lines(self) -> list[str]:
        return [str(codeword) for codeword in self.codewords]


def parity_masks(L: int) -> list[int]:
    """Nonzero ``L``-bit masks, heaviest first, ties in ascending order."""

    return sorted(range(1, 1 << L), key=lambda mask: (-mask.bit_count(), mask))


def _encode_key(value: int, L: int, n: int, masks: Sequence[int]) -> BitString:
    prefix = int_to_bits(value, L)
    parity = tuple((value & mask).bit_count() & 1 for mask in islice(cycle(masks), n - L))
    return BitString(prefix + parity)


@lru_cache(maxsize=None)
def make_systematic_code(m: int, n: int, *, relaxed: bool = False) -> SystematicCode:
    """Build the Hadamard-padded systematic code and verify its distance.

    ``relaxed`` lifts the ``n >= m >= 10`` floor for small test codes and for
    layouts such as Par_k at k=2 where the key part is ``m - 1`` bits long; the
    distance check still applies.
    """

    if relaxed:
        if m < 2:
            raise CodeConstructionError(f"need at least two codewords, got m={m}")
    elif m < 10 or n < m:
        raise CodeConstructionError(f"need n >= m >= 10, got m={m}, n={n}")
    L = prefix_length(m)
    if n < L:
        raise CodeConstructionError(f"codeword length {n} shorter than prefix {L}")
    masks = parity_masks(L)
    codewords = tuple(_encode_key(value, L, n, masks) for value in range(m))
    code = SystematicCode(m=m, n=n, L=L, codewords=codewords)

    if m <= VERIFY_LIMIT:
        distance = verify_code_distance(code)
        if distance < Fraction(1, 3):
            raise CodeConstructionError(
                f"code (m={m}, n={n}) has minimum distance {distance} < 1/3"
            )
    else:
        logger.warning("skipping exhaustive distance check for m=%d", m)
    return code


def verify_code_distance(code: SystematicCode) -> Fraction:
    """Exact minimum pairwise normalized distance; 1 for a single codeword."""

    if code.m < 2:
        return Fraction(1)
    words = np.array([codeword.bits for codeword in code.codewords], dtype=np.uint8)
    best = code.n
    for index in range(code.m - 1):
        distances = np.count_nonzero(words[index + 1 :] != words[index], axis=1)
        best = min(best, int(distances.min()))
        if best == 0:
            break
    distance = Fraction(best, code.n)
    if distance < Fraction(1, 3):
        logger.debug("code (m=%d, n=%d) violates the 1/3 distance floor", code.m, code.n)
    return distance


def cpal_pairing() -> SystematicCode:
    """The two-bit pairing (0,1,2,3) -> (00,01,10,11)."""
    return make_systematic_code(4, 2, relaxed=True)


def key_of(x: SymString, m: int) -> Key:
    L = prefix_length(m)
    if len(x) < L:
        raise ShapeMismatch(f"string of length {len(x)} has no {L}-bit key prefix")
    return bits_to_int(x.symbols[:L]) % m + 1


def key_valid(x: SymString, code: SystematicCode) -> bool:
    if len(x) < code.n:
        raise ShapeMismatch(f"string of length {len(x)} shorter than codewords")
    return x.symbols[: code.n] == code.codeword(key_of(x, code.m)).bits


def ordinal(a: T, A: Collection[T]) -> int:
    """Rank of ``a`` inside ``A`` (1 for the smallest element)."""

    if a not in A:
        raise ValueError(f"{a!r} is not an element of the set")
    return sum(1 for other in A if other <= a)  # type: ignore[operator]


def colex_rank(subset: Sequence[int]) -> int:
    """Colexicographic rank of a set of 0-based integers."""

    ordered = sorted(subset)
    return sum(comb(element, position + 1) for position, element in enumerate(ordered))


def colex_unrank(rank: int, size: int) -> tuple[int, ...]:
    """Inverse of :func:`colex_rank` for subsets of the given size."""

    elements: list[int] = []
    for position in range(size, 0, -1):
        element = position - 1
        while comb(element + 1, position) <= rank:
            element += 1
        elements.append(element)
        rank -= comb(element, position)
    return tuple(reversed(elements))


def vectorize(fn: Callable[[int], T], domain: Iterable[int]) -> tuple[T, ...]:
    """``<fn(s) | s in domain>`` following the natural order on the domain."""
    return tuple(fn(element) for element in sorted(domain))


__all__ = [
    "BitString",
    "CodeConstructionError",
    "Key",
    "ShapeMismatch",
    "SymString",
    "SystematicCode",
    "bits_to_int",
    "colex_rank",
    "colex_unrank",
    "cpal_pairing",
    "hamming",
    "int_to_bits",
    "key_of",
    "key_valid",
    "make_systematic_code",
    "ones",
    "ordinal",
    "parity_masks",
    "prefix_length",
    "vectorize",
    "verify_code_distance",
    "word",
    "zeros",
]
