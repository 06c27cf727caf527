"""Degree-bounded provability as semidefinite feasibility.

A polynomial p has a width-w, degree-mod-c <= 2d certificate from Q exactly
when a block-PSD system is feasible: one Gram block per enumerated subset J
of inequalities, free coefficient vectors for the equality multipliers, and
one linear equality per multilinear monomial of degree <= 2d matching the
coefficients of the identity.  The solver maximizes r subject to p - r being
certifiable, capped so the problem stays bounded; the dual vector is (up to
sign and normalization) a linear functional on monomials -- a
pseudo-expectation -- and at the optimum the two sides meet: the best
certified bound equals the least pseudo-expectation value.

An instance is refutable at this degree exactly when no pseudo-expectation
exists, which surfaces as the bound hitting the cap; both sides are then
reported as +infinity and a refutation can be extracted from the primal
blocks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .poly import BASIC, Monomial, Polynomial, monomial_degree, monomial_str, parse_poly
from .proofs import ConstraintSystem, CutoffRule, PsProof, ProofMeasures, verify
from .proofs import _combination as _proof_combination
from .sdpcore import BlockProblem, BlockSolution, solve_block_sdp
from .squares import AbsorptionError, absorb_into_squares

DEFAULT_TOL = 1e-8
DEFAULT_SUBSET_CAP = 4096
DEFAULT_BASIS_CAP = 4000
DEFAULT_DENOM_CAP = 10**6


class SolverFailure(RuntimeError):
    """The interior-point solver did not reach the requested accuracy."""

    def __init__(self, status: str, detail: str = ""):
        self.status = status
        super().__init__(f"solver failure ({status}) {detail}".strip())


def _basis_key(mono: Monomial):
    return (monomial_degree(mono), mono)


def moment_basis(nvars: int, degree: int) -> List[Monomial]:
    """Multilinear basic-variable monomials of degree <= degree, canonical order."""
    if degree < 0:
        return []
    out: List[Monomial] = []
    for size in range(0, min(degree, nvars) + 1):
        for combo in itertools.combinations(range(1, nvars + 1), size):
            out.append(tuple(((BASIC, i), 1) for i in combo))
    out.sort(key=_basis_key)
    return out


def _enumerate_subsets(ell: int, width: int, cap: int) -> List[frozenset]:
    subsets: List[frozenset] = []
    for size in range(1, min(width, ell) + 1):
        for combo in itertools.combinations(range(1, ell + 1), size):
            subsets.append(frozenset(combo))
            if len(subsets) > cap:
                raise ValueError(f"subset enumeration exceeds cap {cap}")
    return subsets


@dataclass
class SquareBlock:
    subset: frozenset
    basis: List[Monomial]
    product: Polynomial  # normal form of the product of the subset's inequalities


@dataclass
class SdpProblem:
    """Assembled feasibility/bound problem plus the maps needed to read
    certificates and pseudo-expectations back out of a solution."""

    system: ConstraintSystem
    half_degree: int
    width: int
    cutoff: CutoffRule
    target: Polynomial
    rows: List[Monomial]
    row_index: Dict[Monomial, int]
    sq_blocks: List[SquareBlock]
    t_columns: List[Tuple[int, Monomial]]
    r_column: int
    cap: float
    block_problem: BlockProblem

    @property
    def moment_side(self) -> int:
        return len(self.sq_blocks[0].basis)


@dataclass
class SdpSolution:
    status: str
    refutable: bool
    bound: float
    raw: BlockSolution

    @property
    def optimal(self) -> bool:
        return self.raw.optimal


@dataclass
class PseudoExpectation:
    """Linear functional on multilinear monomials of degree <= degree."""

    nvars: int
    degree: int
    values: Dict[Monomial, float]
    provenance: str = ""

    def value(self, mono: Monomial) -> float:
        return self.values[mono]

    def evaluate(self, p: Polynomial) -> float:
        total = 0.0
        for mono, coeff in p.normal_form().terms.items():
            total += float(coeff) * self.values[mono]
        return total

    @classmethod
    def from_point(cls, bits: Sequence[int], degree: int) -> "PseudoExpectation":
        n = len(bits)
        values = {
            mono: float(Polynomial.from_monomial(n, mono).evaluate(bits))
            for mono in moment_basis(n, min(degree, n))
        }
        return cls(n, degree, values, provenance="point evaluation")

    @classmethod
    def uniform(cls, nvars: int, degree: int) -> "PseudoExpectation":
        values = {
            mono: 0.5 ** monomial_degree(mono)
            for mono in moment_basis(nvars, min(degree, nvars))
        }
        return cls(nvars, degree, values, provenance="uniform measure")

    def to_json(self) -> dict:
        return {
            "n": self.nvars,
            "degree": self.degree,
            "values": {monomial_str(m): v for m, v in sorted(self.values.items())},
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "PseudoExpectation":
        n = int(data["n"])
        values = {}
        for key, v in data["values"].items():
            poly = parse_poly(key, n)
            (mono,) = poly.terms.keys()
            values[mono] = float(v)
        return cls(n, int(data["degree"]), values, data.get("provenance", ""))


def build_sdp(
    system: ConstraintSystem,
    half_degree: int,
    width: int = 1,
    cutoff: Optional[CutoffRule] = None,
    bound_target: Optional[Polynomial] = None,
    subset_cap: int = DEFAULT_SUBSET_CAP,
    basis_cap: int = DEFAULT_BASIS_CAP,
) -> SdpProblem:
    """Assemble the bound problem: maximize r with target - r certifiable.

    bound_target None means the refutation membership check (target -1).
    One PSD block per subset J with |J| <= width and budget 2d - c(J) >= 0;
    each equality j contributes a free coefficient vector of degree
    2d - c(j).  Equality rows range over all multilinear monomials of degree
    <= 2d; the r variable is capped at one plus the target's coefficient
    norm so the maximization is always bounded.
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    if half_degree < 0:
        raise ValueError("half degree must be >= 0")
    n = system.n
    if cutoff is None:
        cutoff = CutoffRule.constant(system.k * width)
    target = (
        bound_target if bound_target is not None else Polynomial.constant(n, -1)
    )
    if target.nvars != n:
        raise ValueError("target variable count differs from system")
    target_nf = target.normal_form()
    two_d = 2 * half_degree
    if (target_nf.degree or 0) > two_d:
        raise ValueError("target degree exceeds 2d")

    rows = moment_basis(n, min(two_d, n))
    if len(rows) > basis_cap * 4:
        raise ValueError(f"row count {len(rows)} exceeds cap")
    row_index = {m: i for i, m in enumerate(rows)}
    nrows = len(rows) + 1  # final row caps r
    cap_row = len(rows)

    sq_blocks: List[SquareBlock] = [
        SquareBlock(frozenset(), moment_basis(n, min(half_degree, n)), Polynomial.one(n))
    ]
    for subset in _enumerate_subsets(system.ell, width, subset_cap):
        budget = two_d - cutoff.for_ineqs(system, subset)
        if budget < 0:
            continue
        product = Polynomial.one(n)
        for j in sorted(subset):
            product = product * system.ineq(j)
        sq_blocks.append(
            SquareBlock(subset, moment_basis(n, min(budget // 2, n)), product.normal_form())
        )
    if any(len(bl.basis) > basis_cap for bl in sq_blocks):
        raise ValueError(f"moment basis exceeds cap {basis_cap}")

    block_sizes = [len(bl.basis) for bl in sq_blocks] + [1]
    A_blocks = [np.zeros((nrows, s, s)) for s in block_sizes]
    for bi, bl in enumerate(sq_blocks):
        basis = bl.basis
        for a in range(len(basis)):
            pa = Polynomial.from_monomial(n, basis[a])
            for b in range(a, len(basis)):
                prod = (pa * Polynomial.from_monomial(n, basis[b]) * bl.product).normal_form()
                for mono, coeff in prod.terms.items():
                    r = row_index[mono]
                    A_blocks[bi][r, a, b] += float(coeff)
                    if a != b:
                        A_blocks[bi][r, b, a] += float(coeff)
    A_blocks[-1][cap_row, 0, 0] = 1.0  # slack for the cap on r

    t_columns: List[Tuple[int, Monomial]] = []
    col_vectors: List[np.ndarray] = []
    for j in range(1, system.m + 1):
        budget = two_d - cutoff.for_eq(system, j)
        if budget < 0:
            continue
        pj = system.eq(j)
        for mono in moment_basis(n, min(budget, n)):
            prod = (Polynomial.from_monomial(n, mono) * pj).normal_form()
            if prod.is_zero():
                continue
            col = np.zeros(nrows)
            for mm, coeff in prod.terms.items():
                col[row_index[mm]] = float(coeff)
            t_columns.append((j, mono))
            col_vectors.append(col)

    cap = float(sum(abs(c) for c in target_nf.terms.values())) + 2.0
    r_col = np.zeros(nrows)
    r_col[row_index[()]] = 1.0
    r_col[cap_row] = 1.0
    col_vectors.append(r_col)
    B = np.stack(col_vectors, axis=1) if col_vectors else np.zeros((nrows, 0))
    c_free = np.zeros(B.shape[1])
    c_free[-1] = -1.0  # maximize r

    b = np.zeros(nrows)
    for mono, coeff in target_nf.terms.items():
        b[row_index[mono]] = float(coeff)
    b[cap_row] = cap

    block_problem = BlockProblem(
        block_sizes=block_sizes,
        A_blocks=A_blocks,
        C_blocks=[np.zeros((s, s)) for s in block_sizes],
        b=b,
        B=B,
        c_free=c_free,
    )
    return SdpProblem(
        system=system,
        half_degree=half_degree,
        width=width,
        cutoff=cutoff,
        target=target,
        rows=rows,
        row_index=row_index,
        sq_blocks=sq_blocks,
        t_columns=t_columns,
        r_column=B.shape[1] - 1,
        cap=cap,
        block_problem=block_problem,
    )


# Solutions better than this are still usable for bound/refutability
# decisions even when the solver falls short of the requested tolerance;
# degenerate instances (no strict complementarity) routinely stall around
# 1e-6..1e-5 in double precision.
USABLE_ACCURACY = 1e-5


def _merit(raw) -> float:
    return max(raw.primal_infeas, raw.dual_infeas, raw.rel_gap)


def solve_sdp(
    prob: SdpProblem, tol: float = DEFAULT_TOL, max_iter: int = 200
) -> SdpSolution:
    """Solve the assembled problem; refutable means the bound hit its cap."""
    raw = solve_block_sdp(prob.block_problem, tol=tol, max_iter=max_iter)
    bound = float(raw.u[prob.r_column]) if raw.u.size else float("nan")
    usable = raw.optimal or _merit(raw) <= USABLE_ACCURACY
    refutable = usable and bound > prob.cap - 1.0
    return SdpSolution(status=raw.status, refutable=refutable, bound=bound, raw=raw)


@dataclass
class DualityResult:
    best_bound: float
    min_pseudoexpectation: float
    gap: float
    refutable: bool
    pexp: Optional[PseudoExpectation]
    problem: SdpProblem
    solution: SdpSolution


def extract_pseudoexpectation(prob: SdpProblem, sol: SdpSolution) -> PseudoExpectation:
    """Read the functional off the dual vector, normalized to E(1) = 1."""
    y = sol.raw.y
    e_one = -float(y[prob.row_index[()]])
    if abs(e_one) < 1e-12:
        raise SolverFailure(sol.status, "dual normalization vanished")
    values = {mono: -float(y[idx]) / e_one for mono, idx in prob.row_index.items()}
    return PseudoExpectation(
        nvars=prob.system.n,
        degree=2 * prob.half_degree,
        values=values,
        provenance=f"dual of degree-{2 * prob.half_degree} bound problem",
    )


def duality_eval(
    system: ConstraintSystem,
    p: Polynomial,
    half_degree: int,
    width: int = 1,
    cutoff: Optional[CutoffRule] = None,
    tol: float = DEFAULT_TOL,
) -> DualityResult:
    """Best certified lower bound on p versus least pseudo-expectation of p.

    Both sides are +infinity exactly when the system is refutable at this
    degree (no pseudo-expectation exists); otherwise the reported gap is the
    difference between the solver's primal and dual values.
    """
    prob = build_sdp(system, half_degree, width, cutoff, bound_target=p)
    sol = solve_sdp(prob, tol=tol)
    if not sol.optimal and _merit(sol.raw) > USABLE_ACCURACY:
        raise SolverFailure(sol.status, f"at degree {2 * half_degree}")
    if sol.refutable:
        return DualityResult(
            best_bound=math.inf,
            min_pseudoexpectation=math.inf,
            gap=0.0,
            refutable=True,
            pexp=None,
            problem=prob,
            solution=sol,
        )
    pexp = extract_pseudoexpectation(prob, sol)
    value = pexp.evaluate(p)
    return DualityResult(
        best_bound=sol.bound,
        min_pseudoexpectation=value,
        gap=abs(sol.bound - value),
        refutable=False,
        pexp=pexp,
        problem=prob,
        solution=sol,
    )


# ---------------------------------------------------------------------------
# certificate extraction
# ---------------------------------------------------------------------------


@dataclass
class CertificateExtraction:
    proof: PsProof
    measures: ProofMeasures
    residual_norm: float
    rationalized: bool
    error: Optional[str] = None


def _float_fraction(x: float) -> Fraction:
    return Fraction(x).limit_denominator(10**15)


def _round_fraction(x: float, denom: int) -> Fraction:
    return Fraction(round(x * denom), denom)


def _block_roots(
    prob: SdpProblem, gram: np.ndarray, basis: List[Monomial], round_denom: Optional[int]
) -> List[Polynomial]:
    """Factor one Gram block into square roots over its monomial basis."""
    n = prob.system.n
    gram = 0.5 * (gram + gram.T)
    lam, vec = np.linalg.eigh(gram)
    clip = max(lam.max(initial=0.0), 0.0) * 1e-12 + 1e-14
    roots = []
    for i in range(len(lam) - 1, -1, -1):
        if lam[i] <= clip:
            continue
        coeffs = np.sqrt(lam[i]) * vec[:, i]
        terms = {}
        for mono, c in zip(basis, coeffs):
            if round_denom is None:
                frac = _float_fraction(float(c))
            else:
                frac = _round_fraction(float(c), round_denom)
            if frac:
                terms[mono] = terms.get(mono, Fraction(0)) + frac
        poly = Polynomial(n, terms)
        if not poly.is_zero():
            roots.append(poly)
    return roots


def _raw_parts(prob: SdpProblem, sol: SdpSolution, round_denom: Optional[int]):
    squares = {}
    for bl, gram in zip(prob.sq_blocks, sol.raw.X):
        roots = _block_roots(prob, gram, bl.basis, round_denom)
        if roots:
            squares[bl.subset] = roots
    multipliers: Dict[int, Polynomial] = {}
    n = prob.system.n
    for (j, mono), value in zip(prob.t_columns, sol.raw.u):
        if round_denom is None:
            frac = _float_fraction(float(value))
        else:
            frac = _round_fraction(float(value), round_denom)
        if not frac:
            continue
        add = Polynomial.from_monomial(n, mono, frac)
        multipliers[j] = multipliers.get(j, Polynomial.zero(n)) + add
    return squares, {j: t for j, t in multipliers.items() if not t.is_zero()}


def _scale_parts(squares, multipliers, factor: Fraction):
    # squares scale by factor, so their roots scale by sqrt(factor); this is
    # only used on numeric (float-derived) certificates
    root_factor = _float_fraction(math.sqrt(float(factor)))
    scaled_squares = {
        subset: [r * root_factor for r in roots] for subset, roots in squares.items()
    }
    scaled_mult = {j: t * factor for j, t in multipliers.items()}
    return scaled_squares, scaled_mult


def extract_certificate(
    prob: SdpProblem,
    sol: SdpSolution,
    rationalize: bool = False,
    denom_cap: int = DEFAULT_DENOM_CAP,
    bound_value: Optional[Fraction] = None,
    margin: float = 1e-6,
) -> CertificateExtraction:
    """Turn the primal blocks into an explicit certificate.

    For a refutable problem the output proves -1 >= 0; otherwise it proves
    target - bound_value >= 0 (bound_value defaults to the solver bound, or
    slightly below it when rationalizing, to leave absorption slack).  With
    rationalize set, all coefficients are rounded to denominator denom_cap
    and the exact residual is folded into extra squares; this only succeeds
    when a strictly positive constant slack remains, otherwise the numeric
    certificate is returned with the failure recorded.
    """
    if not sol.optimal:
        raise SolverFailure(sol.status, "no certificate")
    n = prob.system.n
    refutation = sol.refutable and prob.target == Polynomial.constant(n, -1)

    def assemble(round_denom, value: Optional[Fraction]):
        squares, multipliers = _raw_parts(prob, sol, round_denom)
        if refutation:
            target = Polynomial.constant(n, -1)
            if round_denom is None:
                # parts prove about -(1 + r*); scale back to -1
                factor = Fraction(1) / (1 + _float_fraction(sol.bound))
                squares, multipliers = _scale_parts(squares, multipliers, factor)
        else:
            claim = value if value is not None else _float_fraction(sol.bound)
            target = prob.target - Polynomial.constant(n, claim)
        return PsProof(target, squares, multipliers, {}), target

    if not rationalize:
        proof, _ = assemble(None, bound_value)
        report = verify(prob.system, proof)
        res_norm = float(
            max((abs(c) for c in report.residual.terms.values()), default=0)
        )
        return CertificateExtraction(
            proof=proof,
            measures=report,
            residual_norm=res_norm,
            rationalized=False,
        )

    # rationalizing: pick the claimed bound strictly below the solver bound
    if bound_value is None and not refutation:
        bound_value = Fraction(sol.bound - margin).limit_denominator(denom_cap)
    try:
        proof, target = assemble(denom_cap, bound_value)
        combination_gap = (target - _proof_combination(prob.system, proof)).normal_form()
        extra_roots = absorb_into_squares(combination_gap, prob.half_degree)
        squares = dict(proof.squares)
        squares[frozenset()] = list(squares.get(frozenset(), ())) + extra_roots
        exact = PsProof(target, squares, proof.multipliers, {})
        report = verify(prob.system, exact)
        if not report.valid:
            raise AbsorptionError("residual after absorption nonzero")
        return CertificateExtraction(
            proof=exact,
            measures=report,
            residual_norm=0.0,
            rationalized=True,
        )
    except (AbsorptionError, ValueError, ArithmeticError) as exc:
        fallback = extract_certificate(
            prob, sol, rationalize=False, bound_value=bound_value
        )
        fallback.error = f"rationalization failed: {exc}"
        return fallback


# ---------------------------------------------------------------------------
# pseudo-expectation checking and degree search
# ---------------------------------------------------------------------------


def check_pseudoexpectation(
    pexp: PseudoExpectation,
    system: ConstraintSystem,
    half_degree: int,
    width: int = 1,
    cutoff: Optional[CutoffRule] = None,
    tol: float = 1e-7,
    subset_cap: int = DEFAULT_SUBSET_CAP,
) -> Tuple[bool, Dict[str, float]]:
    """Independent feasibility check of a pseudo-expectation.

    Verifies normalization, positive semidefiniteness of the moment matrix
    and of every localized matrix for enumerated inequality products within
    budget, and vanishing on equality multiples.  PSD tolerance is relative:
    smallest eigenvalue >= -tol * (1 + trace).
    """
    n = system.n
    if cutoff is None:
        cutoff = CutoffRule.constant(system.k * width)
    two_d = 2 * half_degree

    def expectation(poly: Polynomial) -> float:
        total = 0.0
        for mono, coeff in poly.normal_form().terms.items():
            if mono not in pexp.values:
                raise ValueError(f"functional undefined on {monomial_str(mono)}")
            total += float(coeff) * pexp.values[mono]
        return total

    report: Dict[str, float] = {}
    ok = True

    norm_err = abs(pexp.values.get((), float("nan")) - 1.0)
    report["normalization"] = norm_err
    if not norm_err <= tol:
        ok = False

    basis0 = moment_basis(n, min(half_degree, n))
    mat = np.zeros((len(basis0), len(basis0)))
    for a in range(len(basis0)):
        pa = Polynomial.from_monomial(n, basis0[a])
        for b in range(a, len(basis0)):
            mat[a, b] = mat[b, a] = expectation(pa * Polynomial.from_monomial(n, basis0[b]))
    moment_min = float(np.linalg.eigvalsh(mat).min()) if len(basis0) else 0.0
    report["moment_min_eig"] = moment_min
    if moment_min < -tol * (1.0 + abs(np.trace(mat))):
        ok = False

    worst_localized = 0.0
    for subset in _enumerate_subsets(system.ell, width, subset_cap):
        budget = two_d - cutoff.for_ineqs(system, subset)
        if budget < 0:
            continue
        product = Polynomial.one(n)
        for j in sorted(subset):
            product = product * system.ineq(j)
        basis = moment_basis(n, min(budget // 2, n))
        side = len(basis)
        loc = np.zeros((side, side))
        for a in range(side):
            pa = Polynomial.from_monomial(n, basis[a])
            for b in range(a, side):
                loc[a, b] = loc[b, a] = expectation(
                    pa * Polynomial.from_monomial(n, basis[b]) * product
                )
        min_eig = float(np.linalg.eigvalsh(loc).min()) if side else 0.0
        worst_localized = min(worst_localized, min_eig)
        if min_eig < -tol * (1.0 + abs(np.trace(loc))):
            ok = False
    report["localized_min_eig"] = worst_localized

    worst_eq = 0.0
    for j in range(1, system.m + 1):
        budget = two_d - cutoff.for_eq(system, j)
        if budget < 0:
            continue
        pj = system.eq(j)
        for mono in moment_basis(n, min(budget, n)):
            value = abs(expectation(Polynomial.from_monomial(n, mono) * pj))
            worst_eq = max(worst_eq, value)
    report["equality_max"] = worst_eq
    if worst_eq > tol:
        ok = False

    return ok, report


@dataclass
class MinDegreeResult:
    degree: Optional[int]
    certificate: Optional[CertificateExtraction]
    scanned: List[Tuple[int, bool]] = field(default_factory=list)


def min_refutation_degree(
    system: ConstraintSystem,
    width: int = 1,
    cutoff: Optional[CutoffRule] = None,
    d_max: int = 8,
    tol: float = DEFAULT_TOL,
    rationalize: bool = False,
    denom_cap: int = DEFAULT_DENOM_CAP,
) -> MinDegreeResult:
    """Smallest even degree at which a refutation exists, by upward scan.

    Returns None when every even degree up to d_max still admits a
    pseudo-expectation.  At the first refutable degree the certificate is
    extracted from the primal blocks.
    """
    if d_max % 2 != 0 or d_max < 2:
        raise ValueError("d_max must be a positive even degree")
    scanned: List[Tuple[int, bool]] = []
    for two_d in range(2, d_max + 1, 2):
        prob = build_sdp(system, two_d // 2, width, cutoff)
        sol = solve_sdp(prob, tol=tol)
        if not sol.optimal and _merit(sol.raw) > USABLE_ACCURACY:
            raise SolverFailure(sol.status, f"at degree {two_d}")
        scanned.append((two_d, sol.refutable))
        if sol.refutable:
            cert = extract_certificate(
                prob, sol, rationalize=rationalize, denom_cap=denom_cap
            )
            return MinDegreeResult(degree=two_d, certificate=cert, scanned=scanned)
    return MinDegreeResult(degree=None, certificate=None, scanned=scanned)
