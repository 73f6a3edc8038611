"""Working-precision policy for the multiprecision evaluators.

Every evaluator in the package is written as a function of the working
precision in bits that returns ``(value, magnitude)``, where ``magnitude``
is the largest absolute term that went into the value.  :func:`adaptive`
runs it under increasing precision until the number of bits lost to
cancellation is covered and two successive runs agree.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import mpmath
from mpmath import mp

from .errors import DomainError, PrecisionExhausted

GUARD_BITS = 24


@dataclass(frozen=True)
class PrecisionContext:
    bits: int = 128
    series_tol: float = 1e-30
    adaptive: bool = True
    max_doublings: int = 16
    sector_eps: float = 0.1

    def __post_init__(self):
        if self.bits < 53:
            raise DomainError("working precision below 53 bits")
        if not self.series_tol > 0:
            raise DomainError("series_tol must be positive")
        if self.max_doublings < 0:
            raise DomainError("max_doublings must be non-negative")

    def with_bits(self, bits: int) -> "PrecisionContext":
        return PrecisionContext(bits, self.series_tol, self.adaptive,
                                self.max_doublings, self.sector_eps)

    def tol_bits(self, prec: int) -> int:
        """Bits of absolute accuracy asked of truncations at ``prec``."""
        return max(prec, int(-mpmath.log(self.series_tol, 2)) + 1)


DEFAULT = PrecisionContext()


def resolve(ctx: PrecisionContext | None) -> PrecisionContext:
    return DEFAULT if ctx is None else ctx


def cancellation_bits(value, magnitude) -> int:
    """Bits lost when ``value`` is a sum of terms of size up to ``magnitude``."""
    if magnitude == 0:
        return 0
    a = abs(value)
    if a == 0:
        # a true zero is handled by callers; treat a computed zero as total loss
        return 10 ** 9
    return max(0, int(mpmath.ceil(mpmath.log(magnitude / a, 2))))


def _agree(a, b, ctx: PrecisionContext) -> bool:
    d = abs(a - b)
    return d <= ctx.series_tol or d <= abs(b) * mpmath.ldexp(1, 4 - ctx.bits)


Evaluator = Callable[[int], Tuple[object, object]]


def adaptive(fn: Evaluator, ctx: PrecisionContext | None = None) -> Tuple[object, int]:
    """Evaluate ``fn`` until its result is trustworthy; return ``(value, prec)``."""
    ctx = resolve(ctx)
    prec = ctx.bits + GUARD_BITS
    ceiling = prec << ctx.max_doublings
    prev = None
    # doublings are capped by max_doublings; the cheaper jumps to a
    # cancellation estimate only by the ceiling, each adding >= prec/4
    doublings = 0
    while prec <= ceiling:
        with mp.workprec(prec):
            value, magnitude = fn(prec)
        if value == 0 and magnitude != 0:
            # everything cancelled: no estimate of the loss, so just double
            need = 2 * prec
        else:
            need = ctx.bits + GUARD_BITS + cancellation_bits(value, magnitude)
        if prec >= need:
            if not ctx.adaptive or (prev is not None and _agree(prev, value, ctx)):
                return value, prec
            prev = value
            doublings += 1
            if doublings > ctx.max_doublings:
                break
            prec *= 2
        else:
            prev = None
            prec = -(-(need + prec // 4) // 32) * 32
    raise PrecisionExhausted(f"no stable value within {ceiling} bits")
