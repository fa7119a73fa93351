"""Complex scalars in log form: (log magnitude, phase).

Partition-function values decay exponentially with system size, so every
scalar produced by a contraction is carried as log|z| plus a phase.
Multiplication adds componentwise; addition pivots on the larger magnitude
(log-sum-exp).  Exact zeros are marked with log_magnitude = -inf.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

# relative magnitude below which a sum is declared cancelled to zero
_CANCEL_EPS = 1e-14


def _wrap(phase: float) -> float:
    return (phase + math.pi) % (2 * math.pi) - math.pi


@dataclass(frozen=True)
class LogComplex:
    log_magnitude: float
    phase: float = 0.0

    @classmethod
    def zero(cls) -> "LogComplex":
        return cls(-math.inf, 0.0)

    @classmethod
    def one(cls) -> "LogComplex":
        return cls(0.0, 0.0)

    @classmethod
    def from_complex(cls, z: complex, log_scale: float = 0.0) -> "LogComplex":
        mag = abs(z)
        if mag == 0.0:
            return cls.zero()
        return cls(math.log(mag) + log_scale, _wrap(cmath.phase(z)))

    def is_zero(self) -> bool:
        return self.log_magnitude == -math.inf

    def to_complex(self) -> complex:
        if self.is_zero():
            return 0j
        return cmath.exp(complex(self.log_magnitude, self.phase))

    def __mul__(self, other: "LogComplex") -> "LogComplex":
        if self.is_zero() or other.is_zero():
            return LogComplex.zero()
        return LogComplex(
            self.log_magnitude + other.log_magnitude, _wrap(self.phase + other.phase)
        )

    def __truediv__(self, other: "LogComplex") -> "LogComplex":
        if other.is_zero():
            raise ZeroDivisionError("division by a zero LogComplex")
        if self.is_zero():
            return LogComplex.zero()
        return LogComplex(
            self.log_magnitude - other.log_magnitude, _wrap(self.phase - other.phase)
        )

    def __add__(self, other: "LogComplex") -> "LogComplex":
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        big, small = (self, other) if self.log_magnitude >= other.log_magnitude else (other, self)
        rest = cmath.exp(
            complex(small.log_magnitude - big.log_magnitude, small.phase - big.phase)
        )
        z = 1.0 + rest
        if abs(z) < _CANCEL_EPS:
            return LogComplex.zero()
        return LogComplex(big.log_magnitude + math.log(abs(z)), _wrap(big.phase + cmath.phase(z)))

    def conjugate(self) -> "LogComplex":
        return LogComplex(self.log_magnitude, _wrap(-self.phase))

    def abs(self) -> "LogComplex":
        return LogComplex(self.log_magnitude, 0.0)

    def scaled(self, log_factor: float) -> "LogComplex":
        if self.is_zero():
            return self
        return LogComplex(self.log_magnitude + log_factor, self.phase)

    @property
    def real_sign_cos(self) -> float:
        """cos(phase): the real part is exp(log_magnitude) * cos(phase)."""
        return math.cos(self.phase)
