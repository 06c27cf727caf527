"""Certificates of nonnegativity for polynomial constraint systems.

A certificate for "target >= 0" from a system of inequalities q_1..q_l and
equalities p_1..p_m is an explicit polynomial identity

    target = sum of squares               (roots listed per subset J of [l])
           + sum_J (sum of squares) * prod_{j in J} q_j
           + sum_j multiplier_j * p_j
           + sum over Boolean axioms of ideal multipliers,

checked with exact rational arithmetic modulo the Boolean ideal.  Refutations
are certificates with target -1.  The ideal multipliers are bookkeeping: they
never count towards the size or degree measures and can always be recomputed,
so verification compares normal forms and ignores them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .poly import (
    BASIC,
    TWIN,
    Monomial,
    Polynomial,
    monomial_degree,
    parse_poly,
)
from .squares import scale_roots

# Boolean axiom keys: ("sq", i) is x_i^2 - x_i, ("sqt", i) is ~x_i^2 - ~x_i,
# ("lin", i) is x_i + ~x_i - 1.
AX_SQ = "sq"
AX_SQT = "sqt"
AX_LIN = "lin"
AxiomKey = Tuple[str, int]


def axiom_poly(key: AxiomKey, nvars: int) -> Polynomial:
    kind, i = key
    x = Polynomial.variable(nvars, i)
    t = Polynomial.variable(nvars, i, twin=True)
    if kind == AX_SQ:
        return x * x - x
    if kind == AX_SQT:
        return t * t - t
    if kind == AX_LIN:
        return x + t - 1
    raise ValueError(f"unknown axiom kind {kind!r}")


def axiom_keys(nvars: int) -> List[AxiomKey]:
    keys: List[AxiomKey] = []
    for kind in (AX_SQ, AX_SQT, AX_LIN):
        keys.extend((kind, i) for i in range(1, nvars + 1))
    return keys


class BooleanAxioms:
    """The 3n generators of the Boolean ideal for n variable pairs."""

    def __init__(self, n: int):
        self.n = n
        self.axioms = {key: axiom_poly(key, n) for key in axiom_keys(n)}

    def __iter__(self):
        return iter(self.axioms.items())


def ideal_decompose(p: Polynomial) -> Dict[AxiomKey, Polynomial]:
    """Write p as an explicit combination of Boolean axioms.

    Reduces p against the generators (squares first, then complement
    elimination) and returns the cofactors.  Raises ValueError when p is not
    in the ideal, i.e. when its normal form is nonzero.
    """
    n = p.nvars
    out: Dict[AxiomKey, Polynomial] = {}

    def credit(key: AxiomKey, cofactor: Polynomial) -> None:
        if key in out:
            out[key] = out[key] + cofactor
        else:
            out[key] = cofactor

    work = p
    while True:
        step = None
        for mono, coeff in work.terms.items():
            for (kind, idx), e in mono:
                if e >= 2:
                    rest = tuple(
                        entry if entry[0] != (kind, idx) else ((kind, idx), e - 2)
                        for entry in mono
                        if entry[0] != (kind, idx) or e > 2
                    )
                    rest = tuple(ent for ent in rest if ent[1] >= 1)
                    cof = Polynomial.from_monomial(n, rest, coeff)
                    key = (AX_SQ if kind == BASIC else AX_SQT, idx)
                    step = (key, cof)
                    break
            if step:
                break
            for (kind, idx), e in mono:
                if kind == TWIN:
                    rest = tuple(entry for entry in mono if entry[0] != (kind, idx))
                    cof = Polynomial.from_monomial(n, rest, coeff)
                    step = ((AX_LIN, idx), cof)
                    break
            if step:
                break
        if step is None:
            break
        key, cof = step
        credit(key, cof)
        work = work - cof * axiom_poly(key, n)
    if not work.is_zero():
        raise ValueError("polynomial is not in the Boolean ideal")
    return {k: v for k, v in out.items() if not v.is_zero()}


# ---------------------------------------------------------------------------
# constraint systems
# ---------------------------------------------------------------------------


class ConstraintSystem:
    """Indexed inequalities q_1..q_l >= 0 and equalities p_1..p_m = 0."""

    def __init__(self, n: int, ineqs: Sequence[Polynomial] = (), eqs: Sequence[Polynomial] = ()):
        self.n = n
        for poly in list(ineqs) + list(eqs):
            if poly.nvars != n:
                raise ValueError("constraint variable count differs from system")
        self.ineqs: Tuple[Polynomial, ...] = tuple(ineqs)
        self.eqs: Tuple[Polynomial, ...] = tuple(eqs)

    @property
    def ell(self) -> int:
        return len(self.ineqs)

    @property
    def m(self) -> int:
        return len(self.eqs)

    @property
    def k(self) -> int:
        """Largest constraint degree (0 when there are no constraints)."""
        degs = [p.degree for p in self.ineqs + self.eqs if p.degree is not None]
        return max(degs, default=0)

    def ineq(self, j: int) -> Polynomial:
        if not 1 <= j <= self.ell:
            raise IndexError(f"inequality index {j} out of range [1, {self.ell}]")
        return self.ineqs[j - 1]

    def eq(self, j: int) -> Polynomial:
        if not 1 <= j <= self.m:
            raise IndexError(f"equality index {j} out of range [1, {self.m}]")
        return self.eqs[j - 1]

    def restrict(self, index: int, bit: int) -> "ConstraintSystem":
        return ConstraintSystem(
            self.n,
            [q.restrict(index, bit) for q in self.ineqs],
            [p.restrict(index, bit) for p in self.eqs],
        )

    def satisfied_by(self, bits: Sequence[int]) -> bool:
        return all(q.evaluate(bits) >= 0 for q in self.ineqs) and all(
            p.evaluate(bits) == 0 for p in self.eqs
        )

    def __repr__(self) -> str:
        return f"ConstraintSystem(n={self.n}, ineqs={len(self.ineqs)}, eqs={len(self.eqs)})"

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "ineqs": [str(q) for q in self.ineqs],
            "eqs": [str(p) for p in self.eqs],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ConstraintSystem":
        n = int(data["n"])
        ineqs = [parse_poly(s, n) for s in data.get("ineqs", [])]
        eqs = [parse_poly(s, n) for s in data.get("eqs", [])]
        return cls(n, ineqs, eqs)


# ---------------------------------------------------------------------------
# cut-off rules
# ---------------------------------------------------------------------------


class CutoffViolation(ValueError):
    """A cut-off rule fell below its required lower bound at some index."""


def _deg0(p: Polynomial) -> int:
    return p.degree if p.degree is not None else 0


class CutoffRule:
    """Per-index degree budget charged to constraint products.

    The rule value at an inequality subset J must be at least the sum of the
    degrees of the q_j with j in J, and at an equality index j at least
    deg(p_j).  Violations are detected lazily, at evaluation.
    """

    def __init__(self, kind: str, value=None, table: Mapping | None = None):
        self.kind = kind
        self.value = value
        self.table = dict(table) if table else None

    @classmethod
    def constant(cls, value: int) -> "CutoffRule":
        return cls("constant", value=int(value))

    @classmethod
    def degree_sum_plus(cls, offset: int = 0) -> "CutoffRule":
        if offset < 0:
            raise ValueError("offset must be >= 0")
        return cls("degree_sum_plus", value=int(offset))

    @classmethod
    def explicit(cls, table: Mapping) -> "CutoffRule":
        return cls("explicit", table=table)

    def for_ineqs(self, system: ConstraintSystem, subset: FrozenSet[int]) -> int:
        base = sum(_deg0(system.ineq(j)) for j in subset)
        if self.kind == "constant":
            got = self.value
        elif self.kind == "degree_sum_plus":
            got = base + self.value
        else:
            got = self.table[frozenset(subset)]
        if got < base:
            raise CutoffViolation(
                f"cut-off {got} below degree sum {base} at subset {sorted(subset)}"
            )
        return got

    def for_eq(self, system: ConstraintSystem, j: int) -> int:
        base = _deg0(system.eq(j))
        if self.kind == "constant":
            got = self.value
        elif self.kind == "degree_sum_plus":
            got = base + self.value
        else:
            got = self.table[j]
        if got < base:
            raise CutoffViolation(f"cut-off {got} below degree {base} at equality {j}")
        return got

    def max_value(self, system: ConstraintSystem) -> int:
        """Largest value the rule takes over subsets of size <= l and all j."""
        if self.kind == "constant":
            return self.value
        if self.kind == "degree_sum_plus":
            ineq_total = sum(_deg0(q) for q in system.ineqs)
            eq_worst = max((_deg0(p) for p in system.eqs), default=0)
            return max(ineq_total, eq_worst) + self.value
        return max(self.table.values(), default=0)

    @classmethod
    def from_name(cls, name: str, system: ConstraintSystem, width: int = 1) -> "CutoffRule":
        """Named rules used by the command line: 'kw' or 'degsum'."""
        if name == "kw":
            return cls.constant(system.k * width)
        if name == "degsum":
            return cls.degree_sum_plus(0)
        raise ValueError(f"unknown cut-off rule {name!r}")


# ---------------------------------------------------------------------------
# proofs and measures
# ---------------------------------------------------------------------------


@dataclass
class ProofMeasures:
    valid: bool
    degree: int
    monomial_size: int
    product_width: int
    residual: Polynomial
    degree_mod_c: Optional[int] = None

    def to_json(self) -> dict:
        out = {
            "valid": self.valid,
            "degree": self.degree,
            "monomial_size": self.monomial_size,
            "product_width": self.product_width,
            "residual": str(self.residual),
        }
        if self.degree_mod_c is not None:
            out["degree_mod_c"] = self.degree_mod_c
        return out


class PsProof:
    """Explicit certificate: square roots per subset, multipliers, ideal part.

    squares maps frozen subsets of inequality indices (the empty set is
    allowed) to lists of square roots; multipliers maps equality indices to
    polynomials; ideal maps Boolean axiom keys to their cofactors.
    """

    def __init__(
        self,
        target: Polynomial,
        squares: Mapping[Iterable[int], Sequence[Polynomial]] | None = None,
        multipliers: Mapping[int, Polynomial] | None = None,
        ideal: Mapping[AxiomKey, Polynomial] | None = None,
    ):
        self.target = target
        self.nvars = target.nvars
        sq: Dict[FrozenSet[int], Tuple[Polynomial, ...]] = {}
        for subset, roots in (squares or {}).items():
            key = frozenset(subset)
            kept = tuple(r for r in roots if not r.is_zero())
            for r in kept:
                if r.nvars != self.nvars:
                    raise ValueError("square root variable count differs from target")
            if kept:
                sq[key] = sq.get(key, ()) + kept
        self.squares = sq
        mult: Dict[int, Polynomial] = {}
        for j, t in (multipliers or {}).items():
            if t.nvars != self.nvars:
                raise ValueError("multiplier variable count differs from target")
            if not t.is_zero():
                mult[int(j)] = t
        self.multipliers = mult
        idl: Dict[AxiomKey, Polynomial] = {}
        for key, u in (ideal or {}).items():
            if u.nvars != self.nvars:
                raise ValueError("ideal multiplier variable count differs from target")
            if not u.is_zero():
                idl[(str(key[0]), int(key[1]))] = u
        self.ideal = idl

    # -- measures (ideal multipliers never contribute) ----------------------

    def explicit_monomials(self) -> List[Monomial]:
        """All monomials of the roots and multipliers, with multiplicity."""
        out: List[Monomial] = []
        for roots in self.squares.values():
            for r in roots:
                out.extend(r.terms.keys())
        for t in self.multipliers.values():
            out.extend(t.terms.keys())
        return out

    @property
    def monomial_size(self) -> int:
        return len(self.explicit_monomials())

    @property
    def product_width(self) -> int:
        return max((len(J) for J in self.squares if J), default=0)

    def degree(self, system: ConstraintSystem) -> int:
        """Plain proof degree (products of constraints included)."""
        worst = _deg0(self.target)
        for subset, roots in self.squares.items():
            sq_deg = max(2 * _deg0(r) for r in roots)
            worst = max(worst, sq_deg + sum(_deg0(system.ineq(j)) for j in subset))
        for j, t in self.multipliers.items():
            worst = max(worst, _deg0(t) + _deg0(system.eq(j)))
        return worst

    def degree_mod(self, system: ConstraintSystem, cutoff: CutoffRule) -> int:
        worst = _deg0(self.target)
        for subset, roots in self.squares.items():
            sq_deg = max(2 * _deg0(r) for r in roots)
            if subset:
                worst = max(worst, cutoff.for_ineqs(system, subset) + sq_deg)
            else:
                worst = max(worst, sq_deg)
        for j, t in self.multipliers.items():
            worst = max(worst, cutoff.for_eq(system, j) + _deg0(t))
        return worst

    def is_multilinear(self) -> bool:
        return all(
            r.is_multilinear() for roots in self.squares.values() for r in roots
        ) and all(t.is_multilinear() for t in self.multipliers.values())

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "n": self.nvars,
            "target": str(self.target),
            "squares": [
                {"J": sorted(subset), "roots": [str(r) for r in roots]}
                for subset, roots in sorted(self.squares.items(), key=lambda kv: sorted(kv[0]))
            ],
            "multipliers": [
                {"j": j, "t": str(t)} for j, t in sorted(self.multipliers.items())
            ],
            "ideal": [
                {"axiom": str(axiom_poly(key, self.nvars)), "u": str(u)}
                for key, u in sorted(self.ideal.items())
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "PsProof":
        n = int(data["n"])
        target = parse_poly(data["target"], n)
        squares: Dict[FrozenSet[int], List[Polynomial]] = {}
        for entry in data.get("squares", []):
            key = frozenset(int(j) for j in entry["J"])
            squares.setdefault(key, []).extend(
                parse_poly(s, n) for s in entry["roots"]
            )
        multipliers = {
            int(entry["j"]): parse_poly(entry["t"], n)
            for entry in data.get("multipliers", [])
        }
        by_poly = {str(axiom_poly(key, n)): key for key in axiom_keys(n)}
        ideal: Dict[AxiomKey, Polynomial] = {}
        for entry in data.get("ideal", []):
            canonical = str(parse_poly(entry["axiom"], n))
            if canonical not in by_poly:
                raise ValueError(f"unrecognized Boolean axiom {entry['axiom']!r}")
            ideal[by_poly[canonical]] = parse_poly(entry["u"], n)
        return cls(target, squares, multipliers, ideal)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "PsProof":
        return cls.from_json(json.loads(text))


def _combination(system: ConstraintSystem, proof: PsProof) -> Polynomial:
    """The certificate's right-hand side without the ideal part."""
    n = system.n
    acc = Polynomial.zero(n)
    for subset, roots in proof.squares.items():
        s = Polynomial.zero(n)
        for r in roots:
            s = s + r * r
        prod = Polynomial.one(n)
        for j in sorted(subset):
            prod = prod * system.ineq(j)
        acc = acc + s * prod
    for j, t in proof.multipliers.items():
        acc = acc + t * system.eq(j)
    return acc


def _validate_indices(system: ConstraintSystem, proof: PsProof) -> None:
    if proof.nvars != system.n:
        raise ValueError(
            f"proof is over {proof.nvars} variable pairs, system over {system.n}"
        )
    for subset in proof.squares:
        for j in subset:
            if not 1 <= j <= system.ell:
                raise ValueError(f"dangling inequality index {j}")
    for j in proof.multipliers:
        if not 1 <= j <= system.m:
            raise ValueError(f"dangling equality index {j}")
    for key in proof.ideal:
        if not 1 <= key[1] <= system.n:
            raise ValueError(f"dangling axiom index {key[1]}")


def verify(system: ConstraintSystem, proof: PsProof) -> ProofMeasures:
    """Check the certificate identity modulo the Boolean ideal, exactly.

    The residual is target minus the explicit combination, in normal form;
    the proof is valid iff it is zero.  Ideal multipliers are ignored: they
    cannot change the residual and never count towards the measures.
    """
    _validate_indices(system, proof)
    residual = (_combination(system, proof) - proof.target).normal_form()
    return ProofMeasures(
        valid=residual.is_zero(),
        degree=proof.degree(system),
        monomial_size=proof.monomial_size,
        product_width=proof.product_width,
        residual=residual,
    )


def measures(
    system: ConstraintSystem, proof: PsProof, cutoff: CutoffRule | None = None
) -> ProofMeasures:
    """All five measures; degree mod c included when a cut-off rule is given."""
    report = verify(system, proof)
    if cutoff is not None:
        report.degree_mod_c = proof.degree_mod(system, cutoff)
    return report


def exact_residual(system: ConstraintSystem, proof: PsProof) -> Polynomial:
    """Target minus the full right-hand side, ideal part included, without
    reduction.  Zero exactly when the stored identity holds in the ring."""
    rhs = _combination(system, proof)
    for key, u in proof.ideal.items():
        rhs = rhs + u * axiom_poly(key, system.n)
    return proof.target - rhs


def recompute_ideal(system: ConstraintSystem, proof: PsProof) -> PsProof:
    """Replace the ideal multipliers so the identity holds in the ring.

    Always possible up to the mod-ideal residual: the difference between the
    gap and its normal form lies in the ideal by construction.
    """
    gap = proof.target - _combination(system, proof)
    ideal = ideal_decompose(gap - gap.normal_form())
    return PsProof(proof.target, proof.squares, proof.multipliers, ideal)


def restrict_proof(
    system: ConstraintSystem, proof: PsProof, index: int, bit: int
) -> Tuple[ConstraintSystem, PsProof]:
    """Assign x_index = bit throughout the system and the certificate."""
    if not verify(system, proof).valid:
        raise ValueError("refusing to restrict an invalid proof")
    restricted = system.restrict(index, bit)
    new_squares = {
        subset: [r.restrict(index, bit) for r in roots]
        for subset, roots in proof.squares.items()
    }
    new_mult = {j: t.restrict(index, bit) for j, t in proof.multipliers.items()}
    # axioms of the assigned pair vanish under the substitution
    new_ideal = {
        key: u.restrict(index, bit)
        for key, u in proof.ideal.items()
        if key[1] != index
    }
    new_proof = PsProof(
        proof.target.restrict(index, bit), new_squares, new_mult, new_ideal
    )
    return restricted, new_proof


def multilinearize_proof(system: ConstraintSystem, proof: PsProof) -> PsProof:
    """Collapse powers in every root and multiplier; still valid, not larger."""
    if not verify(system, proof).valid:
        raise ValueError("refusing to multilinearize an invalid proof")
    flattened = PsProof(
        proof.target,
        {
            subset: [r.multilinearize() for r in roots]
            for subset, roots in proof.squares.items()
        },
        {j: t.multilinearize() for j, t in proof.multipliers.items()},
        {},
    )
    return recompute_ideal(system, flattened)


@dataclass
class VariableChoice:
    """Outcome of scanning the explicit monomials for a frequent variable.

    large_count is the number of explicit monomials of degree >= the
    threshold; when it is zero there is nothing to select and index/assign
    are None ("no large monomials").
    """

    index: Optional[int]
    assign: Optional[int]
    large_count: int
    occurrences: int = 0


def select_variable(proof: PsProof, threshold: int) -> VariableChoice:
    """Pick the variable occurring most often among large explicit monomials.

    Large means degree >= threshold, counted with multiplicity.  Returns
    assign 0 for a basic variable and 1 for a complement (the value that
    kills the monomials it occurs in).  Ties break to the lowest index,
    basic before complement.
    """
    large = [m for m in proof.explicit_monomials() if monomial_degree(m) >= threshold]
    if not large:
        return VariableChoice(index=None, assign=None, large_count=0)
    counts: Dict[Tuple[int, int], int] = {}
    for mono in large:
        for var, _ in mono:
            counts[var] = counts.get(var, 0) + 1
    best = min(counts, key=lambda v: (-counts[v], v[1], v[0]))
    kind, index = best
    return VariableChoice(
        index=index,
        assign=0 if kind == BASIC else 1,
        large_count=len(large),
        occurrences=counts[best],
    )


def compose_refutations(
    system: ConstraintSystem,
    index: int,
    cert_lo: PsProof,
    eps: Fraction,
    cert_hi: PsProof,
    delta: Fraction,
    degree: Optional[int] = None,
    lo_is_twin: bool = False,
    allow_residual: bool = False,
) -> PsProof:
    """Combine two positivity certificates on a twin pair into a refutation.

    cert_lo proves x_index - eps >= 0 and cert_hi proves ~x_index - delta >= 0
    (roles swap when lo_is_twin).  The output proves -1 >= 0:

        -eps*delta = [ideal identity for -~x*x] + ~x^2 * cert_lo + eps * cert_hi

    divided through by eps*delta, so cert_lo's roots are lifted by ~x and
    scaled by 1/(eps*delta) while cert_hi's roots are scaled by 1/delta.  The
    degree grows by at most 2 over cert_lo and not at all over cert_hi.
    """
    eps = Fraction(eps)
    delta = Fraction(delta)
    if eps <= 0 or delta <= 0:
        raise ValueError("nonpositive margin")
    n = system.n
    x = Polynomial.variable(n, index)
    t = Polynomial.variable(n, index, twin=True)
    lift = x if lo_is_twin else t

    lo_meas = verify(system, cert_lo)
    hi_meas = verify(system, cert_hi)
    if not allow_residual and not (lo_meas.valid and hi_meas.valid):
        raise ValueError("certificate fails verification")
    lo_target = (x if not lo_is_twin else t) - Polynomial.constant(n, eps)
    hi_target = (t if not lo_is_twin else x) - Polynomial.constant(n, delta)
    if cert_lo.target != lo_target or cert_hi.target != hi_target:
        raise ValueError("certificate targets do not match the stated margins")
    if degree is not None:
        if cert_lo.degree(system) > degree - 2 or cert_hi.degree(system) > degree:
            raise ValueError("degree budget exceeded")

    squares: Dict[FrozenSet[int], List[Polynomial]] = {}
    inv_total = Fraction(1) / (eps * delta)
    inv_delta = Fraction(1) / delta
    for subset, roots in cert_lo.squares.items():
        lifted = [lift * r for r in roots]
        squares.setdefault(subset, []).extend(scale_roots(lifted, inv_total))
    for subset, roots in cert_hi.squares.items():
        squares.setdefault(subset, []).extend(scale_roots(list(roots), inv_delta))

    multipliers: Dict[int, Polynomial] = {}
    lift_sq = lift * lift
    for j, tj in cert_lo.multipliers.items():
        multipliers[j] = lift_sq * tj * inv_total
    for j, tj in cert_hi.multipliers.items():
        add = tj * (eps * inv_total)
        multipliers[j] = multipliers.get(j, Polynomial.zero(n)) + add
    multipliers = {j: tj for j, tj in multipliers.items() if not tj.is_zero()}

    combined = PsProof(Polynomial.constant(n, -1), squares, multipliers, {})
    result = recompute_ideal(system, combined)
    if degree is not None and result.degree(system) > degree:
        raise ValueError("degree budget exceeded")
    return result
