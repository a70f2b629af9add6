"""
Deterministic stochastic-number codec.

Signed fixed-point values are turned into unary bitstreams whose native
lengths are coprime; extending both operands to the product of the native
lengths makes every bit of one operand meet every bit of the other exactly
once, so the AND-gate product is exact rather than statistical.
"""
from __future__ import annotations

import enum
import math
import numbers
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from errors import InvariantError, SimulatorError

POSITIVE = 1
NEGATIVE = -1
_SIGNS = (POSITIVE, NEGATIVE)
_SIGN_CHARS = {"+": POSITIVE, "-": NEGATIVE, "−": NEGATIVE}


class CodecError(SimulatorError):
    """Invalid value for the codec, or a corrupted stream."""


class Pairing(enum.Enum):
    """How the two operands are stretched to the common length."""
    REPEAT = "repeat"
    CLOCK_DIVISION = "clock_division"


@dataclass(frozen=True)
class CodecConfig:
    activation_levels: int = 11
    weight_levels: int = 4
    extended_length: int | None = None
    pairing: Pairing = Pairing.REPEAT

    def __post_init__(self):
        a, w = self.activation_levels, self.weight_levels
        if a < 1:
            raise InvariantError("activation_levels", f"must be >= 1, got {a}")
        if w < 1:
            raise InvariantError("weight_levels", f"must be >= 1, got {w}")
        if a == w:
            raise InvariantError("weight_levels", "must differ from activation_levels")
        if math.gcd(a, w) != 1:
            raise InvariantError(
                "weight_levels",
                f"gcd(activation_levels, weight_levels) must be 1, got gcd({a}, {w}) = {math.gcd(a, w)}",
            )
        if self.extended_length is None:
            object.__setattr__(self, "extended_length", a * w)
        elif self.extended_length != a * w:
            raise InvariantError(
                "extended_length",
                f"must equal activation_levels * weight_levels = {a * w}, got {self.extended_length}",
            )
        if not isinstance(self.pairing, Pairing):
            object.__setattr__(self, "pairing", Pairing(self.pairing))

    def hold_for(self, levels):
        """Clock periods each unary bit is held for at the given level count."""
        if self.pairing is Pairing.CLOCK_DIVISION and levels == self.weight_levels:
            return self.activation_levels
        return 1


@dataclass(frozen=True)
class SignedMagnitude:
    """A sign and a bounded magnitude, worth ``sign * magnitude / levels``."""
    sign: int
    magnitude: int
    levels: int

    def __post_init__(self):
        if self.sign not in _SIGNS:
            raise CodecError(f"sign must be +1 or -1, got {self.sign}")
        if self.levels < 1:
            raise CodecError(f"levels must be >= 1, got {self.levels}")
        if not 0 <= self.magnitude <= self.levels:
            raise CodecError(f"magnitude {self.magnitude} outside [0, {self.levels}]")

    @classmethod
    def from_signed(cls, value, levels):
        if isinstance(value, bool) or not isinstance(value, numbers.Integral):
            raise CodecError(f"signed magnitude must be an integer, got {value!r}")
        value = int(value)
        return cls(NEGATIVE if value < 0 else POSITIVE, abs(value), levels)

    @property
    def signed(self):
        return self.sign * self.magnitude

    @property
    def value(self):
        return self.signed / self.levels

    def equivalent(self, other):
        """Equality up to the sign of zero."""
        return self.levels == other.levels and self.signed == other.signed


@dataclass(frozen=True, eq=False)
class Bitstream:
    bits: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.bits)
        if raw.ndim != 1 or raw.size < 1:
            raise CodecError("bitstream must be a non-empty 1-D sequence")
        if not np.isin(raw, (0, 1)).all():
            raise CodecError("bitstream bits must be 0 or 1")
        bits = raw.astype(np.uint8)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def _trusted(cls, bits):
        # bits is already a read-only uint8 array of 0/1
        stream = object.__new__(cls)
        object.__setattr__(stream, "bits", bits)
        return stream

    @property
    def length(self):
        return int(self.bits.size)

    @property
    def ones(self):
        return int(np.count_nonzero(self.bits))

    @property
    def value(self):
        return self.ones / self.length

    def __eq__(self, other):
        if not isinstance(other, Bitstream):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def __str__(self):
        return "".join("1" if b else "0" for b in self.bits)


@dataclass(frozen=True)
class StochasticNumber:
    sign: int
    stream: Bitstream
    native_length: int
    hold: int = 1

    def __post_init__(self):
        if self.sign not in _SIGNS:
            raise CodecError(f"sign must be +1 or -1, got {self.sign}")
        if self.native_length < 1 or self.hold < 1:
            raise CodecError("native_length and hold must be >= 1")
        if self.stream.length % self.period:
            raise CodecError(
                f"stream length {self.stream.length} is not a multiple of the period {self.period}"
            )

    @property
    def period(self):
        return self.native_length * self.hold

    @property
    def ones(self):
        return self.stream.ones

    def window_counts(self):
        return self.stream.bits.reshape(-1, self.period).sum(axis=1)

    def is_periodic(self):
        counts = self.window_counts()
        return bool((counts == counts[0]).all())


@lru_cache(maxsize=None)
def _pattern(magnitude, levels, hold, length):
    unary = np.zeros(levels, dtype=np.uint8)
    unary[:magnitude] = 1
    bits = np.tile(np.repeat(unary, hold), length // (levels * hold))
    bits.setflags(write=False)
    return bits


def encode(v, cfg):
    """Left-aligned unary pattern of ``v`` stretched to ``cfg.extended_length``."""
    if v.levels not in (cfg.activation_levels, cfg.weight_levels):
        raise CodecError(
            f"levels {v.levels} is neither activation ({cfg.activation_levels}) nor weight ({cfg.weight_levels}) levels"
        )
    hold = cfg.hold_for(v.levels)
    if cfg.extended_length % (v.levels * hold):
        raise CodecError(f"levels {v.levels} does not divide extended length {cfg.extended_length}")
    bits = _pattern(v.magnitude, v.levels, hold, cfg.extended_length)
    sign = POSITIVE if v.magnitude == 0 else v.sign
    return StochasticNumber(sign, Bitstream._trusted(bits), v.levels, hold)


def decode(s):
    if not s.is_periodic():
        raise CodecError(f"corrupted stream: window ones-counts differ {s.window_counts().tolist()}")
    numerator = s.ones * s.native_length
    if numerator % s.stream.length:
        raise CodecError(
            f"{s.ones} ones in {s.stream.length} bits is not a multiple of 1/{s.native_length}"
        )
    return SignedMagnitude(s.sign, numerator // s.stream.length, s.native_length)


@lru_cache(maxsize=None)
def _covers(native_a, hold_a, native_b, hold_b, length):
    positions = np.arange(length)
    index_a = (positions // hold_a) % native_a
    index_b = (positions // hold_b) % native_b
    met = set(zip(index_a.tolist(), index_b.tolist()))
    return len(met) == native_a * native_b


def coverage_check(a, b):
    """True iff every bit of ``a``'s unary pattern meets every bit of ``b``'s."""
    if a.stream.length != b.stream.length:
        return False
    return _covers(a.native_length, a.hold, b.native_length, b.hold, a.stream.length)


def sc_multiply(a, b):
    """Position-wise AND of two paired streams; the sign is the sign product."""
    if a.stream.length != b.stream.length:
        raise CodecError(f"length mismatch: {a.stream.length} vs {b.stream.length}")
    if not coverage_check(a, b):
        raise CodecError(
            f"native lengths {a.native_length} and {b.native_length} do not pair at length {a.stream.length}"
        )
    bits = np.bitwise_and(a.stream.bits, b.stream.bits)
    bits.setflags(write=False)
    return StochasticNumber(a.sign * b.sign, Bitstream._trusted(bits), a.stream.length)


def sc_scaled_add(a, b, cfg):
    """MUX-gate scaled addition ``(a + b) / 2`` of two activation-level streams.

    The select line is the half-ones weight-level stream, which pairs with
    the activation period the same way a weight operand does.
    """
    for operand in (a, b):
        if operand.native_length != cfg.activation_levels or operand.hold != 1:
            raise CodecError("scaled addition takes activation-level operands")
        if operand.stream.length != cfg.extended_length:
            raise CodecError(f"operand length {operand.stream.length} != {cfg.extended_length}")
    if cfg.weight_levels % 2:
        raise CodecError(f"select stream needs an even weight_levels, got {cfg.weight_levels}")
    signs = {operand.sign for operand in (a, b) if operand.ones}
    if len(signs) > 1:
        raise CodecError("scaled addition of mixed-sign operands")
    select = encode(SignedMagnitude(POSITIVE, cfg.weight_levels // 2, cfg.weight_levels), cfg)
    bits = np.where(select.stream.bits == 1, a.stream.bits, b.stream.bits).astype(np.uint8)
    bits.setflags(write=False)
    sign = signs.pop() if signs else POSITIVE
    return StochasticNumber(sign, Bitstream._trusted(bits), cfg.extended_length)


def format_stream(s):
    return ("+" if s.sign == POSITIVE else "-") + str(s.stream)


def parse_stream(text, native_length, hold=1):
    text = text.strip()
    if not text or text[0] not in _SIGN_CHARS:
        raise CodecError(f"stream text must start with a sign character, got {text[:1]!r}")
    body = text[1:]
    if not body or set(body) - {"0", "1"}:
        raise CodecError(f"stream body must be a non-empty run of '0'/'1', got {body!r}")
    bits = np.frombuffer(body.encode("ascii"), dtype=np.uint8) - ord("0")
    return StochasticNumber(_SIGN_CHARS[text[0]], Bitstream(bits), native_length, hold)


def iter_operand_pairs(cfg):
    """Every (activation, weight) magnitude pair under all four sign pairs."""
    for a_sign in _SIGNS:
        for w_sign in _SIGNS:
            for a_mag in range(cfg.activation_levels + 1):
                for w_mag in range(cfg.weight_levels + 1):
                    yield (
                        SignedMagnitude(a_sign, a_mag, cfg.activation_levels),
                        SignedMagnitude(w_sign, w_mag, cfg.weight_levels),
                    )
