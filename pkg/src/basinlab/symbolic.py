"""Shift spaces, cylinders, Bernoulli measures and their interval models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from basinlab import _rng


@dataclass(frozen=True)
class Word:
    """Finite realized piece of a shift-space point.

    ``symbols[j]`` is the symbol at absolute index ``origin_offset + j``.  A
    one-sided word always has ``origin_offset == 0``; two-sided words may start
    at negative indices so that e.g. ``w[-1]`` is available.
    """

    symbols: tuple[int, ...]
    alphabet_size: int = 2
    origin_offset: int = 0
    two_sided: bool = False

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if self.alphabet_size < 1:
            raise ValueError("alphabet_size must be positive")
        bad = [s for s in self.symbols if not 0 <= s < self.alphabet_size]
        if bad:
            raise ValueError(f"symbols {bad} outside alphabet of size {self.alphabet_size}")
        if not self.two_sided and self.origin_offset != 0:
            raise ValueError("one-sided words have origin_offset 0")

    def __len__(self) -> int:
        return len(self.symbols)

    def __getitem__(self, i: int) -> int:
        j = i - self.origin_offset
        if not 0 <= j < len(self.symbols):
            raise IndexError(f"index {i} outside realized range {self.index_range}")
        return self.symbols[j]

    @property
    def index_range(self) -> tuple[int, int]:
        return self.origin_offset, self.origin_offset + len(self.symbols)

    def to_string(self) -> str:
        return "".join(str(s) for s in self.symbols)

    @classmethod
    def from_string(cls, text: str, alphabet_size: int = 2, origin_offset: int = 0,
                    two_sided: bool = False) -> "Word":
        return cls(tuple(int(c) for c in text.strip()), alphabet_size, origin_offset, two_sided)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.symbols, dtype=np.int64)

    def signs(self) -> tuple[int, ...]:
        """Binary word read as steps in {-1, +1} (0 -> -1, 1 -> +1)."""
        if self.alphabet_size != 2:
            raise ValueError("only binary words carry a sign reading")
        return tuple(2 * s - 1 for s in self.symbols)


@dataclass(frozen=True)
class Cylinder:
    fixed_symbols: Word

    @property
    def depth(self) -> int:
        return len(self.fixed_symbols)

    def __add__(self, other: "Cylinder") -> "Cylinder":
        a, b = self.fixed_symbols, other.fixed_symbols
        if a.alphabet_size != b.alphabet_size:
            raise ValueError("cannot concatenate cylinders over different alphabets")
        return Cylinder(Word(a.symbols + b.symbols, a.alphabet_size))

    def __str__(self) -> str:
        return "[" + ",".join(str(s) for s in self.fixed_symbols.symbols) + "]"

    @classmethod
    def of(cls, symbols: Sequence[int], alphabet_size: int = 2) -> "Cylinder":
        return cls(Word(tuple(symbols), alphabet_size))


@dataclass(frozen=True)
class BernoulliSpec:
    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if not probs or any(not 0.0 < p < 1.0 for p in probs):
            raise ValueError(f"Bernoulli probabilities must lie in (0,1): {probs}")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"Bernoulli probabilities must sum to 1: {probs}")

    @classmethod
    def binary(cls, p: float) -> "BernoulliSpec":
        """nu_p: probability p for symbol 0 and 1 - p for symbol 1."""
        return cls((p, 1.0 - p))

    @classmethod
    def uniform(cls, k: int) -> "BernoulliSpec":
        return cls(tuple([1.0 / k] * k))

    @property
    def alphabet_size(self) -> int:
        return len(self.probs)

    def cumulative(self) -> np.ndarray:
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        return cum


def shift_word(w: Word, steps: int) -> Word:
    """Apply the left shift ``steps`` times.

    One-sided words lose their first ``steps`` symbols; two-sided words keep
    every symbol and move the origin.
    """
    if w.two_sided:
        return Word(w.symbols, w.alphabet_size, w.origin_offset - steps, True)
    if steps < 0:
        raise ValueError("a one-sided word cannot be shifted by a negative amount")
    return Word(w.symbols[steps:], w.alphabet_size)


def cylinder_prob(spec: BernoulliSpec, c: Cylinder) -> float:
    if c.fixed_symbols.alphabet_size > spec.alphabet_size:
        raise ValueError("cylinder alphabet larger than the Bernoulli alphabet")
    prob = 1.0
    for a in c.fixed_symbols.symbols:
        prob *= spec.probs[a]
    return prob


class LazyWord:
    """A nu-distributed point of the one- or two-sided shift, realized on demand.

    Symbol ``i`` (any integer when two-sided) is a pure function of the seed and
    ``i``, so extending a prefix never changes symbols already read.
    """

    def __init__(self, spec: BernoulliSpec, seed: int, stream: int = _rng.STREAM_BASE,
                 index: int = 0, two_sided: bool = False):
        self.spec = spec
        self.two_sided = two_sided
        self.key = np.uint64(_rng.derive(_rng.as_seed(seed), np.uint64(stream), np.uint64(index)))
        self._cum = spec.cumulative()

    def block(self, start: int, n: int) -> np.ndarray:
        if start < 0 and not self.two_sided:
            raise IndexError("negative index on a one-sided word")
        return _rng.bernoulli_block(self.key, start, n, self._cum)

    def __getitem__(self, i: int) -> int:
        return int(self.block(i, 1)[0])

    def prefix(self, n: int, start: int = 0) -> Word:
        syms = tuple(self.block(start, n)) if n else ()
        return Word(syms, self.spec.alphabet_size, start if self.two_sided else 0, self.two_sided)


def sample_word(spec: BernoulliSpec, length: int, seed: int) -> Word:
    if length < 0:
        raise ValueError("length must be non-negative")
    return LazyWord(spec, seed).prefix(length)


def ep_apply(p: float, u):
    """Piecewise-linear model E_p of the one-sided Bernoulli shift."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0,1), got {p}")
    u = np.asarray(u, dtype=float)
    if np.any((u < 0.0) | (u > 1.0)):
        raise ValueError("u must lie in [0,1]")
    out = np.where(u < p, u / p, (u - p) / (1.0 - p))
    return float(out) if out.ndim == 0 else out


def baker_apply(p: float, w, y, direction: int = 1):
    """Baker map B_p (direction=+1) or its inverse (direction=-1) on [0,1)^2."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0,1), got {p}")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((w < 0) | (w >= 1) | (y < 0) | (y >= 1)):
        raise ValueError("(w, y) must lie in the unit square [0,1)^2")
    if direction == 1:
        left = w < p
        nw = np.where(left, w / p, (w - p) / (1.0 - p))
        ny = np.where(left, p * y, (1.0 - p) * y + p)
    else:
        low = y < p
        nw = np.where(low, p * w, p + (1.0 - p) * w)
        ny = np.where(low, y / p, (y - p) / (1.0 - p))
    # rounding can land exactly on 1.0
    nw = np.minimum(nw, np.nextafter(1.0, 0.0))
    ny = np.minimum(ny, np.nextafter(1.0, 0.0))
    if nw.ndim == 0:
        return float(nw), float(ny)
    return nw, ny


def binary_codec(u: float, n: int) -> Word:
    """First ``n`` binary digits of ``u`` in [0,1)."""
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0,1)")
    digits = []
    for _ in range(n):
        u *= 2.0
        d = int(u >= 1.0)
        digits.append(d)
        u -= d
    return Word(tuple(digits), 2)


def word_to_point(w: Word) -> float:
    """Left endpoint of the k-adic interval coded by a one-sided word."""
    k = w.alphabet_size
    x = 0.0
    for a in reversed(w.symbols):
        x = (x + a) / k
    return x
