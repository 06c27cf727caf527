"""Exact manipulation of sums of squares with rational coefficients.

Two primitives keep every certificate inside the plain list-of-roots model:

* scaling a sum of squares by a positive rational, via Lagrange four-square
  decompositions (w = a/b turns one root r into at most four roots c_k/b * r
  with c_1^2 + ... + c_4^2 = a*b);

* absorbing a small multilinear polynomial with a strictly positive constant
  part into extra squares, using the identities m == m^2 and
  1 - m == (1 - m)^2 modulo the Boolean ideal, with high-degree monomials
  split as c*m0*m1 = w*(m0 +- m1)^2 - w*(m0^2 + m1^2) to respect the root
  degree budget.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import List, Tuple

from sympy import isprime
from sympy.ntheory.residue_ntheory import sqrt_mod

from .poly import BASIC, Monomial, Polynomial, monomial_degree


def _two_squares_prime(p: int) -> Tuple[int, int]:
    """Write a prime p == 2 or p % 4 == 1 as a sum of two squares."""
    if p == 2:
        return (1, 1)
    x = int(sqrt_mod(p - 1, p))
    a, b = p, x
    while b * b > p:
        a, b = b, a % b
    return (b, a % b)


def four_squares(n: int) -> Tuple[int, int, int, int]:
    """Four integers whose squares sum to n (Rabin-Shallit style descent)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return (0, 0, 0, 0)
    shift = 0
    while n % 4 == 0:
        n //= 4
        shift += 1
    mult = 1 << shift
    extra = 0
    m = n
    if n % 8 == 7:
        extra = 1
        m = n - 1
    for x in range(math.isqrt(m), -1, -1):
        rem = m - x * x
        if rem == 0:
            return (mult * x, mult * extra, 0, 0)
        s = math.isqrt(rem)
        if s * s == rem:
            return (mult * x, mult * s, mult * extra, 0)
        if rem % 2 == 0:
            half = rem // 2
            sh = math.isqrt(half)
            if sh * sh == half:
                return (mult * x, mult * sh, mult * sh, mult * extra)
            if half % 4 == 1 and isprime(half):
                a, b = _two_squares_prime(half)
                return (mult * x, mult * (a + b), mult * abs(a - b), mult * extra)
        elif rem % 4 == 1 and isprime(rem):
            a, b = _two_squares_prime(rem)
            return (mult * x, mult * a, mult * b, mult * extra)
    raise ArithmeticError(f"four-square decomposition not found for {n}")


def scale_roots(roots: List[Polynomial], weight: Fraction) -> List[Polynomial]:
    """Roots r' with sum r'^2 = weight * sum r^2, for a positive rational weight."""
    weight = Fraction(weight)
    if weight < 0:
        raise ValueError("weight must be nonnegative")
    if weight == 0:
        return []
    a, b = weight.numerator, weight.denominator
    root_ab = math.isqrt(a * b)
    if root_ab * root_ab == a * b:
        factor = Fraction(root_ab, b)
        return [r * factor for r in roots if not r.is_zero()]
    parts = [c for c in four_squares(a * b) if c]
    out = []
    for r in roots:
        if r.is_zero():
            continue
        for c in parts:
            out.append(r * Fraction(c, b))
    return out


class AbsorptionError(ValueError):
    """The polynomial cannot be swallowed: its constant slack is exhausted."""


def absorb_into_squares(p: Polynomial, root_degree: int) -> List[Polynomial]:
    """Roots whose squares sum to p modulo the Boolean ideal.

    Requires p multilinear over basic variables of degree <= 2*root_degree.
    Works monomial by monomial; negative coefficients and split monomials
    drain the constant term, which must stay strictly positive throughout
    (raises AbsorptionError otherwise).
    """
    for mono in p.terms:
        for (kind, _), e in mono:
            if kind != BASIC or e != 1:
                raise ValueError("absorption expects a multilinear basic-variable polynomial")
    n = p.nvars
    weighted: List[Tuple[Fraction, Polynomial]] = []
    pending = {m: c for m, c in p.terms.items() if m}
    constant = p.constant_term
    while pending:
        mono, coeff = pending.popitem()
        deg = monomial_degree(mono)
        if deg > 2 * root_degree:
            raise ValueError(f"monomial degree {deg} exceeds budget {2 * root_degree}")
        if deg <= root_degree:
            if coeff > 0:
                # m == m^2 mod ideal
                weighted.append((coeff, Polynomial.from_monomial(n, mono)))
            else:
                # c*m == |c|*(1-m)^2 - |c| mod ideal
                weighted.append((-coeff, Polynomial.one(n) - Polynomial.from_monomial(n, mono)))
                constant += coeff
            continue
        # split m = m0*m1 and use c*m = w*(m0 +- m1)^2 - w*m0^2 - w*m1^2
        half = deg - root_degree
        left = Polynomial.from_monomial(n, mono[:half])
        right = Polynomial.from_monomial(n, mono[half:])
        w = abs(coeff) / 2
        root = left + right if coeff > 0 else left - right
        weighted.append((w, root))
        for part in (mono[:half], mono[half:]):
            pending[part] = pending.get(part, Fraction(0)) - w
            if pending[part] == 0:
                del pending[part]
    if constant < 0:
        raise AbsorptionError(f"constant slack exhausted ({constant})")
    if constant > 0:
        weighted.append((constant, Polynomial.one(n)))
    roots: List[Polynomial] = []
    for w, root in weighted:
        roots.extend(scale_roots([root], w))
    return roots
