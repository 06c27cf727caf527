"""Benchmark instance generators and brute-force ground-truth oracles.

Families: parity (Tseitin) systems on multigraphs with one variable per
edge, knapsack equations 2*x_1 + ... + 2*x_n = k, and random XOR / clause
constraint-satisfaction instances with seeded, platform-independent sampling.
Constraint polynomials are exact and multilinear over basic variables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .poly import BASIC, Monomial, Polynomial, all_assignments
from .proofs import ConstraintSystem
from .rng import SplitMix64

EXHAUSTIVE_LIMIT = 24


@dataclass(frozen=True)
class Graph:
    """Multigraph with 0-based vertices; parallel edges and loops allowed."""

    nvertices: int
    edges: Tuple[Tuple[int, int], ...]

    def degree(self, v: int) -> int:
        total = 0
        for a, b in self.edges:
            if a == v:
                total += 1
            if b == v:
                total += 1
        return total

    def is_regular(self, d: int) -> bool:
        return all(self.degree(v) == d for v in range(self.nvertices))

    def connected_components(self) -> List[Tuple[int, ...]]:
        parent = list(range(self.nvertices))

        def find(v: int) -> int:
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for a, b in self.edges:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        groups: Dict[int, List[int]] = {}
        for v in range(self.nvertices):
            groups.setdefault(find(v), []).append(v)
        return [tuple(sorted(g)) for g in sorted(groups.values())]


def random_regular_graph(n: int, d: int, seed: int) -> Graph:
    """d-regular multigraph via the pairing model, deterministic per seed."""
    if n <= 0 or d <= 0:
        raise ValueError("n and d must be positive")
    if (n * d) % 2 != 0:
        raise ValueError("n*d must be even")
    points = [v for v in range(n) for _ in range(d)]
    rng = SplitMix64(seed)
    rng.shuffle(points)
    edges = tuple(
        (min(points[i], points[i + 1]), max(points[i], points[i + 1]))
        for i in range(0, len(points), 2)
    )
    return Graph(n, edges)


def gen_tseitin(graph: Graph, charges: Sequence[int]) -> ConstraintSystem:
    """Parity system: at each vertex u, prod over incident edges of
    (1 - 2*x_e) equals (-1)^charge(u).

    One variable per edge (edge i is x_{i+1}).  Equalities are stored in
    expanded multilinear form; a loop contributes its factor twice and thus
    cancels.  Unsatisfiable iff the total charge is odd.
    """
    if graph.nvertices == 0 or not graph.edges:
        raise ValueError("graph must have vertices and edges")
    if len(charges) != graph.nvertices:
        raise ValueError("one charge per vertex required")
    if any(c not in (0, 1) for c in charges):
        raise ValueError("charges are bits")
    nvars = len(graph.edges)
    eqs = []
    for v in range(graph.nvertices):
        prod = Polynomial.one(nvars)
        for e, (a, b) in enumerate(graph.edges):
            for endpoint in (a, b):
                if endpoint == v:
                    prod = prod * (1 - 2 * Polynomial.variable(nvars, e + 1))
        prod = prod.multilinearize()
        eqs.append(prod - Polynomial.constant(nvars, (-1) ** charges[v]))
    return ConstraintSystem(nvars, eqs=eqs)


def gen_knapsack(n: int, k: int) -> ConstraintSystem:
    """The single equality 2*x_1 + ... + 2*x_n - k = 0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    total = Polynomial.zero(n)
    for i in range(1, n + 1):
        total = total + 2 * Polynomial.variable(n, i)
    return ConstraintSystem(n, eqs=[total - k])


# ---------------------------------------------------------------------------
# CSP instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CspConstraint:
    """A single constraint: its variables, semantics and polynomial form.

    mode "xor" satisfied when the parity of the variables equals `parity`;
    mode "sat" is a clause whose literal i is negated when negated[i].
    poly is the unique multilinear polynomial over the constraint's own
    variables that is 1 on satisfying and 0 on falsifying assignments.
    """

    variables: Tuple[int, ...]
    mode: str
    parity: int = 0
    negated: Tuple[bool, ...] = ()
    poly: Polynomial = None

    def truth_value(self, bits: Sequence[int]) -> int:
        local = [bits[v - 1] for v in self.variables]
        if self.mode == "xor":
            return 1 if sum(local) % 2 == self.parity else 0
        if self.mode == "sat":
            return 1 if any(
                (1 - b) if neg else b for b, neg in zip(local, self.negated)
            ) else 0
        raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class CspInstance:
    n: int
    constraints: Tuple[CspConstraint, ...]

    @property
    def m(self) -> int:
        return len(self.constraints)

    def satisfied_count(self, bits: Sequence[int]) -> int:
        return sum(c.truth_value(bits) for c in self.constraints)


def interpolate_truth_table(
    nvars: int, variables: Sequence[int], table: Dict[Tuple[int, ...], int]
) -> Polynomial:
    """The unique multilinear polynomial matching a 0/1 truth table.

    Moebius inversion over subsets of the constraint's variables: the
    coefficient of prod_{i in S} x_i is sum over T <= S of (-1)^{|S|-|T|}
    f(indicator of T).
    """
    arity = len(variables)
    terms: Dict[Monomial, Fraction] = {}
    for sup in itertools.chain.from_iterable(
        itertools.combinations(range(arity), r) for r in range(arity + 1)
    ):
        coeff = 0
        for sub_size in range(len(sup) + 1):
            for sub in itertools.combinations(sup, sub_size):
                point = tuple(1 if i in sub else 0 for i in range(arity))
                coeff += (-1) ** (len(sup) - len(sub)) * table[point]
        if coeff:
            mono = tuple(((BASIC, variables[i]), 1) for i in sorted(sup))
            terms[mono] = Fraction(coeff)
    return Polynomial(nvars, terms)


def _xor_constraint(nvars: int, variables: Tuple[int, ...], parity: int) -> CspConstraint:
    arity = len(variables)
    table = {
        point: 1 if sum(point) % 2 == parity else 0
        for point in itertools.product((0, 1), repeat=arity)
    }
    poly = interpolate_truth_table(nvars, variables, table)
    return CspConstraint(variables=variables, mode="xor", parity=parity, poly=poly)


def _sat_constraint(
    nvars: int, variables: Tuple[int, ...], negated: Tuple[bool, ...]
) -> CspConstraint:
    # 1 - prod over literals of (literal falsified)
    prod = Polynomial.one(nvars)
    for v, neg in zip(variables, negated):
        x = Polynomial.variable(nvars, v)
        prod = prod * (x if neg else (1 - x))
    poly = Polynomial.one(nvars) - prod
    return CspConstraint(variables=variables, mode="sat", negated=negated, poly=poly)


def gen_random_csp(n: int, m: int, arity: int, mode: str, seed: int) -> CspInstance:
    """m uniform independent constraints on n variables, seed-reproducible.

    Variable tuples are sorted distinct samples; polarities (clause
    negations, XOR parity) are uniform bits.
    """
    if arity > n:
        raise ValueError("arity exceeds variable count")
    if mode not in ("xor", "sat"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = SplitMix64(seed)
    constraints = []
    for _ in range(m):
        variables = tuple(sorted(v + 1 for v in rng.sample_distinct(n, arity)))
        if mode == "xor":
            constraints.append(_xor_constraint(n, variables, rng.bit()))
        else:
            negated = tuple(bool(rng.bit()) for _ in range(arity))
            constraints.append(_sat_constraint(n, variables, negated))
    return CspInstance(n=n, constraints=tuple(constraints))


def objective_polynomial(inst: CspInstance) -> Polynomial:
    """The satisfied fraction (1/m) * sum_j p_j as a polynomial."""
    total = Polynomial.zero(inst.n)
    for c in inst.constraints:
        total = total + c.poly
    return total * Fraction(1, inst.m)


def encode_maxcsp(
    inst: CspInstance, gamma: Fraction, formulation: str
) -> Tuple[ConstraintSystem, Polynomial]:
    """Encodings of "at least a gamma fraction of constraints holds".

    direct:     no constraints; the objective (1/m) sum_j p_j is returned
                to be bounded from above.
    withvars:   equalities p_j(x) = y_j over n+m variable pairs; objective
                (1/m) sum_j y_j.
    refutation: the withvars equalities plus the inequality
                (1/m) sum_j y_j - gamma >= 0; refuting it certifies that no
                assignment satisfies a gamma fraction.
    """
    gamma = Fraction(gamma)
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    if formulation == "direct":
        return ConstraintSystem(inst.n), objective_polynomial(inst)
    if formulation not in ("withvars", "refutation"):
        raise ValueError(f"unknown formulation {formulation!r}")
    total = inst.n + inst.m
    eqs = []
    mean_y = Polynomial.zero(total)
    for j, c in enumerate(inst.constraints):
        lifted = Polynomial(total, dict(c.poly.terms))
        yj = Polynomial.variable(total, inst.n + j + 1)
        eqs.append(lifted - yj)
        mean_y = mean_y + yj
    mean_y = mean_y * Fraction(1, inst.m)
    if formulation == "withvars":
        return ConstraintSystem(total, eqs=eqs), mean_y
    system = ConstraintSystem(total, ineqs=[mean_y - gamma], eqs=eqs)
    return system, mean_y


def opt_brute_force(inst: CspInstance, limit: int = EXHAUSTIVE_LIMIT) -> Fraction:
    """Exact optimum of the satisfied fraction, by enumeration."""
    if inst.n > limit:
        raise ValueError(f"n={inst.n} exceeds exhaustive limit {limit}")
    best = 0
    for bits in all_assignments(inst.n):
        best = max(best, inst.satisfied_count(bits))
        if best == inst.m:
            break
    return Fraction(best, inst.m)


def maxcsp_refutation_satisfiable(inst: CspInstance, gamma: Fraction) -> bool:
    """Satisfiability of the refutation encoding at threshold gamma.

    Every satisfying assignment must set y_j = p_j(x), so the encoding is
    satisfiable exactly when some x satisfies at least a gamma fraction.
    """
    return opt_brute_force(inst) >= Fraction(gamma)


def brute_force_satisfiable(
    system: ConstraintSystem, limit: int = 20
) -> Optional[Tuple[int, ...]]:
    """A satisfying Boolean point of the system, or None. Exponential in n."""
    if system.n > limit:
        raise ValueError(f"n={system.n} exceeds exhaustive limit {limit}")
    for bits in all_assignments(system.n):
        if system.satisfied_by(bits):
            return bits
    return None


def instance_to_json(kind: str, system: ConstraintSystem, meta: dict | None = None) -> dict:
    out = {"family": kind, "system": system.to_json()}
    if meta:
        out["meta"] = meta
    return out
