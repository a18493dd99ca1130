"""
Exact phases in units of π, and linear phase expressions used by rewrite rules.
"""
from __future__ import annotations

import re
from fractions import Fraction
from functools import total_ordering
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

PhaseLike = Union["Phase", Fraction, int, str]

_TERM = re.compile(r"\s*([+-]?)\s*(\d+(?:/\d+)?)?\s*\*?\s*([A-Za-z_]\w*)?\s*")


@total_ordering
class Phase:
    """A rational multiple of π, kept reduced in [0, 2)."""

    __slots__ = ("_value",)

    def __init__(self, value: Union[Fraction, int] = 0) -> None:
        self._value: Fraction = Fraction(value) % 2

    @property
    def value(self) -> Fraction:
        return self._value

    @classmethod
    def parse(cls, text: PhaseLike) -> Phase:
        if isinstance(text, Phase):
            return text
        if isinstance(text, (Fraction, int)):
            return cls(text)
        try:
            return cls(Fraction(str(text).strip() or "0"))
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"Not a rational phase: {text!r}") from e

    @property
    def is_zero(self) -> bool:
        return self._value == 0

    @property
    def is_clifford_t(self) -> bool:
        """Multiple of π/4, i.e. representable in the exact ring."""
        return 4 % self._value.denominator == 0

    @property
    def eighths(self) -> int:
        """Exponent j with e^{iπ·value} = ω^j; only for multiples of π/4."""
        if not self.is_clifford_t:
            raise ValueError(f"Phase {self} is not a multiple of 1/4")
        return int(self._value * 4) % 8

    def __add__(self, other: PhaseLike) -> Phase:
        return Phase(self._value + Phase.parse(other).value)

    def __sub__(self, other: PhaseLike) -> Phase:
        return Phase(self._value - Phase.parse(other).value)

    def __neg__(self) -> Phase:
        return Phase(-self._value)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Phase):
            return self._value == other.value
        if isinstance(other, (Fraction, int)):
            return self._value == Fraction(other) % 2
        return NotImplemented

    def __lt__(self, other: Phase) -> bool:
        return self._value < other.value

    def __hash__(self) -> int:
        return hash(self._value)

    def __repr__(self) -> str:
        return f"Phase({self})"

    def __str__(self) -> str:
        return str(self._value)


class PhaseExpr:
    """Constant plus an integer combination of phase variables, read mod 2."""

    __slots__ = ("constant", "coeffs")

    def __init__(self, constant: PhaseLike = 0, coeffs: Optional[Mapping[str, int]] = None) -> None:
        self.constant: Phase = Phase.parse(constant)
        self.coeffs: Dict[str, int] = {v: c for v, c in sorted((coeffs or {}).items()) if c != 0}

    @classmethod
    def parse(cls, text: Union[str, PhaseLike, None]) -> PhaseExpr:
        """Parse strings such as ``"a+b"``, ``"-a"``, ``"a+1/2"`` or ``"3/4"``."""
        if text is None:
            return cls()
        if isinstance(text, (Phase, Fraction, int)):
            return cls(text)
        source = str(text).strip()
        if not source:
            return cls()
        constant = Fraction(0)
        coeffs: Dict[str, int] = {}
        pos = 0
        while pos < len(source):
            m = _TERM.match(source, pos)
            if not m or m.end() == pos or not (m.group(2) or m.group(3)):
                raise ValueError(f"Cannot parse phase expression {source!r}")
            sign = -1 if m.group(1) == "-" else 1
            number = Fraction(m.group(2)) if m.group(2) else None
            var = m.group(3)
            if pos > 0 and not m.group(1):
                raise ValueError(f"Missing operator in phase expression {source!r}")
            if var:
                if number is not None and number.denominator != 1:
                    raise ValueError(f"Variable coefficients must be integers in {source!r}")
                coeffs[var] = coeffs.get(var, 0) + sign * int(number if number is not None else 1)
            else:
                constant += sign * number
            pos = m.end()
        return cls(constant, coeffs)

    @property
    def variables(self) -> Tuple[str, ...]:
        return tuple(self.coeffs)

    @property
    def is_constant(self) -> bool:
        return not self.coeffs

    def evaluate(self, assignment: Mapping[str, Phase]) -> Phase:
        value = self.constant.value
        for var, coeff in self.coeffs.items():
            if var not in assignment:
                raise KeyError(f"Unbound phase variable {var!r}")
            value += coeff * assignment[var].value
        return Phase(value)

    def substitute(self, assignment: Mapping[str, Phase]) -> PhaseExpr:
        constant = self.constant.value
        coeffs = {}
        for var, coeff in self.coeffs.items():
            if var in assignment:
                constant += coeff * assignment[var].value
            else:
                coeffs[var] = coeff
        return PhaseExpr(constant, coeffs)

    def negated(self) -> PhaseExpr:
        return PhaseExpr(-self.constant, {v: -c for v, c in self.coeffs.items()})

    def unify(self, phase: Phase, assignment: Mapping[str, Phase]) -> Optional[Dict[str, Phase]]:
        """Extend ``assignment`` so that this expression evaluates to ``phase``.

        Returns None when no extension exists or when more than one variable is unbound.
        """
        partial = self.substitute(assignment)
        if partial.is_constant:
            return dict(assignment) if partial.constant == phase else None
        if len(partial.coeffs) > 1:
            return None
        (var, coeff), = partial.coeffs.items()
        if coeff not in (1, -1):
            return None
        solved = Phase(coeff * (phase.value - partial.constant.value))
        return {**assignment, var: solved}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PhaseExpr):
            return NotImplemented
        return self.constant == other.constant and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash((self.constant, tuple(self.coeffs.items())))

    def __repr__(self) -> str:
        return f"PhaseExpr({str(self)!r})"

    def __str__(self) -> str:
        parts = []
        for var, coeff in self.coeffs.items():
            if coeff == 1:
                term = var
            elif coeff == -1:
                term = f"-{var}"
            else:
                term = f"{coeff}{var}"
            parts.append(term if not parts or term.startswith("-") else f"+{term}")
        if not self.constant.is_zero or not parts:
            c = str(self.constant)
            parts.append(c if not parts else f"+{c}")
        return "".join(parts)


def parse_phases(values: Iterable[PhaseLike]) -> Tuple[Phase, ...]:
    return tuple(Phase.parse(v) for v in values)
