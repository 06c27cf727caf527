"""Exact sparse polynomial arithmetic over paired Boolean variables.

Variables come in pairs (x_i, ~x_i), both meant to range over {0, 1} with
~x_i = 1 - x_i.  The pairing is enforced only modulo the ideal generated by
the axioms x_i^2 - x_i, ~x_i^2 - ~x_i and x_i + ~x_i - 1; raw polynomials may
mention both members of a pair freely and to any power.

Representation:

    Var      = (kind, index)      kind 0 = basic, 1 = complement; index >= 1
    Monomial = ((var, exp), ...)  sorted by var, all exponents >= 1, () is 1
    Polynomial._terms : dict Monomial -> Fraction, zero coefficients dropped

Coefficients are exact rationals; floats never enter this module.  The
canonical term order used for printing and bases is graded lexicographic
with basic variables before complements, ascending index.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Dict, Iterable, Iterator, Mapping, Sequence, Tuple

BASIC = 0
TWIN = 1

Var = Tuple[int, int]
Monomial = Tuple[Tuple[Var, int], ...]

ONE_MONOMIAL: Monomial = ()

Coefficient = Fraction


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"coefficients must be exact rationals, got {type(value).__name__}")


def monomial_degree(mono: Monomial) -> int:
    return sum(e for _, e in mono)


def monomial_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    exps: Dict[Var, int] = dict(a)
    for var, e in b:
        exps[var] = exps.get(var, 0) + e
    return tuple(sorted(exps.items()))


def monomial_is_multilinear(mono: Monomial) -> bool:
    return all(e == 1 for _, e in mono)


def monomial_sort_key(mono: Monomial):
    """Graded lex key: higher degree first, then lex on the variable order."""
    return (-monomial_degree(mono), tuple((var, -e) for var, e in mono))


def monomial_str(mono: Monomial) -> str:
    if not mono:
        return "1"
    parts = []
    for (kind, idx), e in mono:
        name = f"x{idx}" if kind == BASIC else f"~x{idx}"
        parts.append(name if e == 1 else f"{name}^{e}")
    return "*".join(parts)


class Polynomial:
    """Immutable sparse polynomial with exact rational coefficients."""

    __slots__ = ("nvars", "_terms", "_degree")

    def __init__(self, nvars: int, terms: Mapping[Monomial, Coefficient] | None = None):
        if nvars < 0:
            raise ValueError("nvars must be >= 0")
        self.nvars = nvars
        clean: Dict[Monomial, Fraction] = {}
        if terms:
            for mono, coeff in terms.items():
                c = _as_fraction(coeff)
                if c == 0:
                    continue
                for (kind, idx), e in mono:
                    if not 1 <= idx <= nvars:
                        raise ValueError(f"variable index {idx} out of range [1, {nvars}]")
                    if kind not in (BASIC, TWIN) or e < 1:
                        raise ValueError(f"malformed monomial entry {((kind, idx), e)}")
                clean[mono] = c
        self._terms = clean
        self._degree = max((monomial_degree(m) for m in clean), default=None)

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, value) -> "Polynomial":
        return cls(nvars, {ONE_MONOMIAL: _as_fraction(value)})

    @classmethod
    def one(cls, nvars: int) -> "Polynomial":
        return cls.constant(nvars, 1)

    @classmethod
    def variable(cls, nvars: int, index: int, twin: bool = False) -> "Polynomial":
        kind = TWIN if twin else BASIC
        return cls(nvars, {(((kind, index), 1),): Fraction(1)})

    @classmethod
    def from_monomial(cls, nvars: int, mono: Monomial, coeff=1) -> "Polynomial":
        return cls(nvars, {mono: _as_fraction(coeff)})

    # -- basic queries -----------------------------------------------------

    @property
    def terms(self) -> Mapping[Monomial, Fraction]:
        return self._terms

    @property
    def degree(self):
        """Total degree, or None for the zero polynomial."""
        return self._degree

    @property
    def size(self) -> int:
        """Number of stored terms (monomials with nonzero coefficient)."""
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_multilinear(self) -> bool:
        return all(monomial_is_multilinear(m) for m in self._terms)

    def coefficient(self, mono: Monomial) -> Fraction:
        return self._terms.get(mono, Fraction(0))

    @property
    def constant_term(self) -> Fraction:
        return self._terms.get(ONE_MONOMIAL, Fraction(0))

    def support_vars(self) -> set:
        out = set()
        for mono in self._terms:
            for var, _ in mono:
                out.add(var)
        return out

    def sorted_terms(self) -> Iterator[Tuple[Monomial, Fraction]]:
        for mono in sorted(self._terms, key=monomial_sort_key):
            yield mono, self._terms[mono]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __repr__(self) -> str:
        return f"Polynomial({self.nvars}, {self!s})"

    # -- arithmetic --------------------------------------------------------

    def _check_compatible(self, other: "Polynomial") -> None:
        if self.nvars != other.nvars:
            raise ValueError(f"variable count mismatch: {self.nvars} vs {other.nvars}")

    def __add__(self, other) -> "Polynomial":
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.nvars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_compatible(other)
        out = dict(self._terms)
        for mono, coeff in other._terms.items():
            new = out.get(mono, Fraction(0)) + coeff
            if new == 0:
                out.pop(mono, None)
            else:
                out[mono] = new
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.nvars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "Polynomial":
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.nvars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Polynomial":
        return (-self) + other

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, Fraction)):
            c = _as_fraction(other)
            if c == 0:
                return Polynomial.zero(self.nvars)
            return Polynomial(self.nvars, {m: c * v for m, v in self._terms.items()})
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_compatible(other)
        out: Dict[Monomial, Fraction] = {}
        for ma, ca in self._terms.items():
            for mb, cb in other._terms.items():
                mono = monomial_mul(ma, mb)
                new = out.get(mono, Fraction(0)) + ca * cb
                if new == 0:
                    out.pop(mono, None)
                else:
                    out[mono] = new
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "Polynomial":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = Polynomial.one(self.nvars)
        base = self
        e = exponent
        while e:
            if e & 1:
                result = result * base
            base = base * base if e > 1 else base
            e >>= 1
        return result

    def scale(self, value) -> "Polynomial":
        return self * _as_fraction(value)

    # -- Boolean-ideal operations -----------------------------------------

    def multilinearize(self) -> "Polynomial":
        """Collapse every exponent >= 2 to 1; complements are kept."""
        out: Dict[Monomial, Fraction] = {}
        for mono, coeff in self._terms.items():
            flat = tuple(sorted((var, 1) for var, _ in mono))
            new = out.get(flat, Fraction(0)) + coeff
            if new == 0:
                out.pop(flat, None)
            else:
                out[flat] = new
        return Polynomial(self.nvars, out)

    def normal_form(self) -> "Polynomial":
        """Canonical representative modulo the Boolean ideal.

        Substitutes ~x_i by 1 - x_i and collapses powers, giving a
        multilinear polynomial over basic variables only.  Two polynomials
        are congruent modulo the ideal exactly when their normal forms are
        identical.
        """
        out: Dict[Monomial, Fraction] = {}
        for mono, coeff in self._terms.items():
            basics = frozenset(idx for (kind, idx), _ in mono if kind == BASIC)
            twins = [idx for (kind, idx), _ in mono if kind == TWIN]
            # expand the product of (1 - x_i) over the complement indices
            partial: Dict[frozenset, Fraction] = {basics: coeff}
            for idx in twins:
                nxt: Dict[frozenset, Fraction] = {}
                for sup, c in partial.items():
                    for sup2, c2 in ((sup, c), (sup | {idx}, -c)):
                        acc = nxt.get(sup2, Fraction(0)) + c2
                        if acc == 0:
                            nxt.pop(sup2, None)
                        else:
                            nxt[sup2] = acc
                partial = nxt
            for sup, c in partial.items():
                key = tuple(((BASIC, i), 1) for i in sorted(sup))
                acc = out.get(key, Fraction(0)) + c
                if acc == 0:
                    out.pop(key, None)
                else:
                    out[key] = acc
        return Polynomial(self.nvars, out)

    def restrict(self, index: int, bit: int) -> "Polynomial":
        """Assign x_index = bit and ~x_index = 1 - bit."""
        if not 1 <= index <= self.nvars:
            raise ValueError(f"variable index {index} out of range [1, {self.nvars}]")
        if bit not in (0, 1):
            raise ValueError("bit must be 0 or 1")
        out: Dict[Monomial, Fraction] = {}
        for mono, coeff in self._terms.items():
            dead = False
            kept = []
            for (kind, idx), e in mono:
                if idx != index:
                    kept.append(((kind, idx), e))
                    continue
                value = bit if kind == BASIC else 1 - bit
                if value == 0:
                    dead = True
                    break
            if dead:
                continue
            key = tuple(kept)
            acc = out.get(key, Fraction(0)) + coeff
            if acc == 0:
                out.pop(key, None)
            else:
                out[key] = acc
        return Polynomial(self.nvars, out)

    def evaluate(self, bits: Sequence[int]) -> Fraction:
        """Evaluate at a consistent Boolean point (bits[i-1] is x_i)."""
        if len(bits) != self.nvars:
            raise ValueError(f"expected {self.nvars} bits, got {len(bits)}")
        total = Fraction(0)
        for mono, coeff in self._terms.items():
            value = coeff
            for (kind, idx), _ in mono:
                bit = bits[idx - 1] if kind == BASIC else 1 - bits[idx - 1]
                if bit == 0:
                    value = Fraction(0)
                    break
            total += value
        return total

    # -- printing ----------------------------------------------------------

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        pieces = []
        for mono, coeff in self.sorted_terms():
            sign = "-" if coeff < 0 else "+"
            mag = abs(coeff)
            if not mono:
                body = str(mag)
            elif mag == 1:
                body = monomial_str(mono)
            else:
                body = f"{mag}*{monomial_str(mono)}"
            pieces.append((sign, body))
        first_sign, first_body = pieces[0]
        text = ("-" if first_sign == "-" else "") + first_body
        for sign, body in pieces[1:]:
            text += f" {sign} {body}"
        return text


def equal_mod_ideal(p: Polynomial, q: Polynomial) -> bool:
    """True iff p and q agree modulo the Boolean ideal."""
    if p.nvars != q.nvars:
        raise ValueError(f"variable count mismatch: {p.nvars} vs {q.nvars}")
    return p.normal_form() == q.normal_form()


def all_assignments(nvars: int) -> Iterator[Tuple[int, ...]]:
    """All 2^nvars Boolean points, in binary counting order."""
    for code in range(1 << nvars):
        yield tuple((code >> i) & 1 for i in range(nvars))


# -- textual syntax ---------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>\d+(?:/\d+)?)"
    r"|(?P<var>~?x\d+)"
    r"|(?P<pow>\^)"
    r"|(?P<mul>\*)"
    r"|(?P<sign>[+\-−])"
    r")"
)


class PolyParseError(ValueError):
    pass


def parse_poly(text: str, nvars: int) -> Polynomial:
    """Parse the textual polynomial syntax.

    Terms are joined by '+'/'-', coefficients are integers or 'a/b'
    rationals, variables are 'x3' and '~x3', powers use '^'.  The '*'
    between factors is optional and whitespace is ignored.  Inverse of
    str() on canonical forms.
    """
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == m.start():
            trailing = text[pos:].strip()
            if not trailing:
                break
            raise PolyParseError(f"unexpected input at {trailing[:20]!r}")
        pos = m.end()
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))

    result: Dict[Monomial, Fraction] = {}
    i = 0

    def flush(coeff: Fraction, exps: Dict[Var, int]) -> None:
        mono = tuple(sorted(exps.items()))
        acc = result.get(mono, Fraction(0)) + coeff
        if acc == 0:
            result.pop(mono, None)
        else:
            result[mono] = acc

    if not tokens:
        raise PolyParseError("empty polynomial text")

    while i < len(tokens):
        sign = Fraction(1)
        while i < len(tokens) and tokens[i][0] == "sign":
            if tokens[i][1] in ("-", "−"):
                sign = -sign
            i += 1
        if i >= len(tokens):
            raise PolyParseError("dangling sign")
        coeff = sign
        exps: Dict[Var, int] = {}
        saw_factor = False
        while i < len(tokens) and tokens[i][0] in ("num", "var", "mul"):
            kind, value = tokens[i]
            if kind == "mul":
                i += 1
                continue
            if kind == "num":
                coeff *= Fraction(value)
                i += 1
            else:
                twin = value.startswith("~")
                idx = int(value[2:] if twin else value[1:])
                var = (TWIN if twin else BASIC, idx)
                e = 1
                i += 1
                if i + 1 < len(tokens) and tokens[i][0] == "pow":
                    if tokens[i + 1][0] != "num" or "/" in tokens[i + 1][1]:
                        raise PolyParseError("exponent must be an integer")
                    e = int(tokens[i + 1][1])
                    if e < 1:
                        raise PolyParseError("exponent must be >= 1")
                    i += 2
                elif i < len(tokens) and tokens[i][0] == "pow":
                    raise PolyParseError("dangling '^'")
                exps[var] = exps.get(var, 0) + e
            saw_factor = True
        if not saw_factor:
            raise PolyParseError(f"expected a term near token {i}")
        flush(coeff, exps)
    return Polynomial(nvars, result)
