"""Quantum numbers, degeneracies and single-state rate algebra of the Dicke triangle.

Everything here is a pure function of its arguments. Half-integer quantum
numbers are carried as :class:`HalfInt` (twice the value stored as an int) so
that bookkeeping never touches floating point; degeneracies are exact Python
integers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import NamedTuple, Union

__all__ = [
    "HalfInt",
    "DickeIndex",
    "RateSet",
    "StateDerivatives",
    "NO_BOUNDARY",
    "enumerate_dicke_space",
    "dicke_space_size",
    "degeneracy_Dj",
    "degeneracy_dm",
    "ladder_coefficient",
    "emission_rate",
    "state_derivatives",
    "derivative_coefficients",
    "boundary_j",
    "delay_time_pure",
    "incoherent_time",
    "dephasing_threshold",
]


@dataclass(frozen=True, order=True)
class HalfInt:
    """An integer or half-integer, stored as ``doubled = 2 * value``."""

    doubled: int

    def __post_init__(self):
        if not isinstance(self.doubled, int) or isinstance(self.doubled, bool):
            raise TypeError(f"doubled must be an int, got {self.doubled!r}")

    @classmethod
    def of(cls, value: "HalfLike") -> "HalfInt":
        """Exact conversion from int, Fraction, HalfInt, a string such as ``"49/2"``,
        or a float that is a multiple of 1/2."""
        if isinstance(value, HalfInt):
            return value
        if isinstance(value, str):
            try:
                value = Fraction(value.strip())
            except ValueError:
                raise ValueError(f"not a half-integer: {value!r}") from None
        if isinstance(value, Rational):
            twice = Fraction(value) * 2
        elif isinstance(value, float):
            if not math.isfinite(value):
                raise ValueError(f"not a half-integer: {value!r}")
            twice = Fraction(value) * 2
        else:
            raise TypeError(f"cannot interpret {value!r} as a half-integer")
        if twice.denominator != 1:
            raise ValueError(f"not a half-integer: {value!r}")
        return cls(int(twice))

    @property
    def value(self) -> Fraction:
        return Fraction(self.doubled, 2)

    @property
    def is_integer(self) -> bool:
        return self.doubled % 2 == 0

    def __float__(self) -> float:
        return self.doubled / 2

    def __neg__(self) -> "HalfInt":
        return HalfInt(-self.doubled)

    def __add__(self, other):
        other = HalfInt.of(other)
        return HalfInt(self.doubled + other.doubled)

    __radd__ = __add__

    def __sub__(self, other):
        other = HalfInt.of(other)
        return HalfInt(self.doubled - other.doubled)

    def __rsub__(self, other):
        return HalfInt.of(other) - self

    def __abs__(self) -> "HalfInt":
        return HalfInt(abs(self.doubled))

    def __str__(self) -> str:
        if self.is_integer:
            return str(self.doubled // 2)
        return f"{self.doubled}/2"

    def __repr__(self) -> str:
        return f"HalfInt({self})"


HalfLike = Union[HalfInt, int, Fraction, float, str]


@dataclass(frozen=True, order=True)
class DickeIndex:
    """A point (j, m) of the Dicke triangle.

    Validity with respect to a system size is checked by :meth:`validate`,
    not at construction, since the same pair can be valid for several N.
    """

    j: HalfInt
    m: HalfInt

    @classmethod
    def of(cls, j: HalfLike, m: HalfLike) -> "DickeIndex":
        return cls(HalfInt.of(j), HalfInt.of(m))

    def is_valid(self, N: int) -> bool:
        tj, tm = self.j.doubled, self.m.doubled
        return (
            tj >= 0
            and tj <= N
            and (N - tj) % 2 == 0
            and abs(tm) <= tj
            and (tj - tm) % 2 == 0
        )

    def validate(self, N: int) -> "DickeIndex":
        _check_N(N)
        if not self.is_valid(N):
            raise ValueError(f"({self.j}, {self.m}) is not a Dicke state for N={N}")
        return self

    @property
    def doubled(self) -> tuple[int, int]:
        """Serialization form used in every file output: (2j, 2m)."""
        return self.j.doubled, self.m.doubled

    def __iter__(self):
        yield float(self.j)
        yield float(self.m)

    def __str__(self) -> str:
        return f"|{self.j}, {self.m}>"


@dataclass(frozen=True)
class RateSet:
    """Scattering rates of the three channels plus the transition frequency."""

    gamma_S: float = 0.0
    gamma_L: float = 0.0
    gamma_D: float = 0.0
    omega_0: float = 0.0

    def __post_init__(self):
        for name in ("gamma_S", "gamma_L", "gamma_D"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite non-negative rate, got {value}")
        if not math.isfinite(self.omega_0):
            raise ValueError("omega_0 must be finite")

    @property
    def any_dissipation(self) -> bool:
        return self.gamma_S > 0 or self.gamma_L > 0 or self.gamma_D > 0

    def require_evolution(self) -> "RateSet":
        if not self.any_dissipation:
            raise ValueError("at least one of gamma_S, gamma_L, gamma_D must be positive")
        return self

    def as_dict(self) -> dict:
        return {
            "gamma_S": self.gamma_S,
            "gamma_L": self.gamma_L,
            "gamma_D": self.gamma_D,
            "omega_0": self.omega_0,
        }


def _check_N(N) -> int:
    if isinstance(N, bool) or not isinstance(N, int):
        raise TypeError(f"N must be an int, got {N!r}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return N


def enumerate_dicke_space(N: int) -> list[DickeIndex]:
    """All (j, m) pairs for N two-level systems, descending j then descending m."""
    _check_N(N)
    out = []
    for tj in range(N, -1, -2):
        for tm in range(tj, -tj - 1, -2):
            out.append(DickeIndex(HalfInt(tj), HalfInt(tm)))
    return out


def dicke_space_size(N: int) -> int:
    """Number of (j, m) pairs, equal to the sum of (2j+1) over j."""
    _check_N(N)
    return sum(tj + 1 for tj in range(N, -1, -2))


def degeneracy_Dj(N: int, j: HalfLike) -> int:
    """Number of copies (values of alpha) of each state of the j ladder.

    ``N! (2j+1) / ((N/2+j+1)! (N/2-j)!)``, evaluated with integer arithmetic.
    """
    _check_N(N)
    tj = HalfInt.of(j).doubled
    if tj < 0 or tj > N or (N - tj) % 2:
        raise ValueError(f"j={HalfInt(tj)} is not a cooperation number for N={N}")
    a = (N + tj) // 2 + 1  # N/2 + j + 1
    b = (N - tj) // 2  # N/2 - j
    # N!/((a-1)! b!) is a binomial; the remaining (2j+1)/a is exact by theory
    num = math.comb(N, b) * (tj + 1)
    value, rem = divmod(num, a)
    assert rem == 0
    return value


def degeneracy_dm(N: int, m: HalfLike) -> int:
    """Number of product states with energy quantum number m: C(N, N/2+m)."""
    _check_N(N)
    tm = HalfInt.of(m).doubled
    if abs(tm) > N or (N - tm) % 2:
        raise ValueError(f"m={HalfInt(tm)} is not an energy quantum number for N={N}")
    return math.comb(N, (N + tm) // 2)


def ladder_coefficient(j, m, direction: str) -> float:
    """Matrix element of J+ (``'+'``) or J- (``'-'``) between neighbouring Dicke states.

    Steps leaving the ladder return 0.
    """
    j, m = float(j), float(m)
    if direction == "+":
        val = (j - m) * (j + m + 1)
    elif direction == "-":
        val = (j + m) * (j - m + 1)
    else:
        raise ValueError(f"direction must be '+' or '-', got {direction!r}")
    return math.sqrt(val) if val > 0 else 0.0


def emission_rate(j, m, gamma_S: float) -> float:
    """Photon emission rate from |j, m>: gamma_S (j^2 + j - m^2 + m)."""
    j, m = float(j), float(m)
    return gamma_S * (j * j + j - m * m + m)


class StateDerivatives(NamedTuple):
    """Drift of (m, j) evaluated on a single Dicke state, split by channel."""

    dm_dt: float
    dj_dt: float
    dm_S: float
    dm_L: float
    dj_D: float
    dj_L: float


def derivative_coefficients(j, m, N):
    """Per-unit-rate drift coefficients ``(dm_S, dm_L, dj_D, dj_L)`` of |j, m>.

    Pure arithmetic, so the number type of the inputs is kept: HalfInt or
    Fraction arguments give exact Fractions, sympy symbols give expressions.
    """
    if isinstance(j, HalfInt):
        j = j.value
    if isinstance(m, HalfInt):
        m = m.value
    if isinstance(N, int):
        N = Fraction(N)
    two_j1 = 2 * j + 1
    dm_S = -(j * j + j - m * m + m)
    dm_L = -(m + N / 2)
    dj_D = -(j * j + j - m * m - N / 2) / two_j1
    dj_L = -(j * j + j + (N - 1) * m + m * m - N) / two_j1
    return dm_S, dm_L, dj_D, dj_L


def state_derivatives(j, m, rates: RateSet, N: int) -> StateDerivatives:
    cS, cLm, cD, cLj = derivative_coefficients(float(j), float(m), float(N))
    dm_S = rates.gamma_S * cS
    dm_L = rates.gamma_L * cLm
    dj_D = rates.gamma_D * cD
    dj_L = rates.gamma_L * cLj
    return StateDerivatives(dm_S + dm_L, dj_D + dj_L, dm_S, dm_L, dj_D, dj_L)


NO_BOUNDARY = None
"""Returned by :func:`boundary_j` when no real j >= 0 makes dj/dt vanish."""


def boundary_j(m, rates: RateSet, N: int):
    """Continuous j at which dj/dt changes sign for the given m.

    Solves ``j^2 + j = [gD (m^2 + N/2) + gL (N - (N-1) m - m^2)] / (gD + gL)``
    for its non-negative root. Returns :data:`NO_BOUNDARY` when the right-hand
    side is negative.
    """
    g = rates.gamma_D + rates.gamma_L
    if g <= 0:
        raise ValueError("boundary undefined without dephasing or loss")
    m = float(m)
    rhs = (rates.gamma_D * (m * m + N / 2) + rates.gamma_L * (N - (N - 1) * m - m * m)) / g
    if rhs < 0:
        return NO_BOUNDARY
    return (-1.0 + math.sqrt(1.0 + 4.0 * rhs)) / 2.0


def delay_time_pure(N, gamma_S: float) -> float:
    """Ideal superfluorescence delay ln(N) / (N gamma_S)."""
    if N < 2:
        raise ValueError("delay time needs N >= 2")
    if gamma_S <= 0:
        raise ValueError("gamma_S must be positive")
    return math.log(N) / (N * gamma_S)


def incoherent_time(rates: RateSet) -> float:
    """Single-emitter decay time 1 / (gamma_S + gamma_L)."""
    g = rates.gamma_S + rates.gamma_L
    if g <= 0:
        raise ValueError("incoherent time needs gamma_S + gamma_L > 0")
    return 1.0 / g


def dephasing_threshold(N, gamma_S: float) -> float:
    """Critical dephasing rate gamma_S N / sqrt(ln N) separating collective from incoherent decay."""
    if N < 2:
        raise ValueError("threshold needs N >= 2")
    return gamma_S * N / math.sqrt(math.log(N))
