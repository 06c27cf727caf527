"""Size-to-degree trade-off: bound formulas and the reduction procedure.

A refutation with s monomials over n variable pairs can be traded for one of
degree about 4*sqrt(2(n+1)*ln s) + k*w + 4.  The procedure multilinearizes
the proof, fixes the threshold d0 = floor(sqrt(2(n+1)*ln s)) + 1, and walks
down one branch: at each level it picks a variable occurring in many
explicit monomials of degree >= d0, restricts it to the value that kills
them, and tracks how the count of large monomials shrinks.  In constructive
mode the final refutation is assembled at the root by composing two
positivity certificates (x_i >= eps and ~x_i >= delta at staggered degrees)
obtained from the semidefinite side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

from .poly import Polynomial
from .proofs import (
    ConstraintSystem,
    CutoffRule,
    PsProof,
    compose_refutations,
    multilinearize_proof,
    restrict_proof,
    select_variable,
    verify,
)
from .lasserre import (
    DEFAULT_TOL,
    SolverFailure,
    build_sdp,
    duality_eval,
    extract_certificate,
    solve_sdp,
)


class GuaranteeViolation(RuntimeError):
    """Constructive mode could not realize a certificate the bound promises."""


def tradeoff_bound(n: int, s: float, k: int, w: int) -> int:
    """Degree achievable by any refutation of size s: the ceiling of
    4*sqrt(2(n+1)*ln s) + k*w + 4 (natural log)."""
    if n < 0 or s < 1 or k < 0 or w < 1:
        raise ValueError("need n >= 0, s >= 1, k >= 0, w >= 1")
    value = 4.0 * math.sqrt(2.0 * (n + 1) * math.log(s)) + k * w + 4
    # guard against one-ulp float noise lifting an exact integer
    return math.ceil(value - 1e-9)


def size_lower_bound(n: int, d: int, k: int, w: int) -> float:
    """Least size of a refutation when the minimum degree is d:
    exp((d - k*w - 4)^2 / (32(n+1)))."""
    if d < k * w + 4:
        raise ValueError("criterion not applicable: d < k*w + 4")
    return math.exp((d - k * w - 4) ** 2 / (32.0 * (n + 1)))


@dataclass
class ReductionLevel:
    """One step of the walk: the chosen variable, the large-monomial count t,
    the shrunken count s' = t(1 - d0/2n), and the two branch degree budgets
    implied by the recursion (the killed branch one lower)."""

    index: Optional[int]
    assign: Optional[int]
    large_count: int
    threshold: int
    pairs: int
    size_bound: float
    s_prime: Optional[float]
    level_degree: int
    branch_killed: int
    branch_other: int
    closed: bool
    eps: Optional[Fraction] = None
    delta: Optional[Fraction] = None

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "assign": self.assign,
            "large_count": self.large_count,
            "threshold": self.threshold,
            "pairs": self.pairs,
            "size_bound": self.size_bound,
            "s_prime": self.s_prime,
            "level_degree": self.level_degree,
            "branch_killed": self.branch_killed,
            "branch_other": self.branch_other,
            "closed": self.closed,
            "eps": str(self.eps) if self.eps is not None else None,
            "delta": str(self.delta) if self.delta is not None else None,
        }


@dataclass
class ReductionTrace:
    threshold: int
    tail_degree: int
    levels: List[ReductionLevel] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "tail_degree": self.tail_degree,
            "levels": [lvl.to_json() for lvl in self.levels],
        }


@dataclass
class ReduceResult:
    degree_bound: int
    trace: ReductionTrace
    proof: Optional[PsProof] = None
    proof_residual_norm: Optional[float] = None


def _dyadic_square_below(x: float) -> Fraction:
    """Largest 4^-k not exceeding x; a perfect square, so certificates scale
    by it without leaving the rational-root model."""
    if x <= 0:
        raise ValueError("margin must be positive")
    value = Fraction(1)
    while value > x:
        value /= 4
    return value


def _positivity_certificate(
    system: ConstraintSystem,
    index: int,
    twin: bool,
    half_degree: int,
    width: int,
    cutoff: CutoffRule,
    tol: float,
    denom_cap: int,
) -> Tuple[PsProof, Fraction, float]:
    """Certificate that the variable (or its complement) is at least some
    eps > 0, realized from the bound problem at the stated half degree.
    Returns (proof, eps, residual_norm); residual is zero when the
    rationalization succeeded."""
    var = Polynomial.variable(system.n, index, twin=twin)
    result = duality_eval(system, var, half_degree, width, cutoff, tol)
    if result.refutable:
        # everything is certifiable here, so any margin works; the solver
        # bound sits at the cap and leaves plenty of absorption slack
        eps = Fraction(1, 4)
    else:
        gamma = result.best_bound
        if gamma <= tol:
            raise GuaranteeViolation(
                f"margin below tolerance for {'~' if twin else ''}x{index} "
                f"at degree {2 * half_degree} (bound {gamma:.2e})"
            )
        eps = _dyadic_square_below(gamma / 2)
    cert = extract_certificate(
        result.problem,
        result.solution,
        rationalize=True,
        denom_cap=denom_cap,
        bound_value=eps,
    )
    if cert.error:
        report = verify(system, cert.proof)
        norm = float(max((abs(c) for c in report.residual.terms.values()), default=0))
        return cert.proof, eps, norm
    return cert.proof, eps, 0.0


def reduce_degree(
    system: ConstraintSystem,
    proof: PsProof,
    cutoff: Optional[CutoffRule] = None,
    mode: str = "bound_only",
    tol: float = DEFAULT_TOL,
    denom_cap: int = 10**6,
) -> ReduceResult:
    """Convert a refutation's size into a degree bound, optionally realizing
    a low-degree refutation.

    bound_only walks the killed branch and reports the degree budget along
    with the per-level trace.  constructive additionally emits a refutation:
    the multilinearized input itself when every explicit monomial is already
    small, and otherwise a composition of two semidefinite positivity
    certificates at the root; failure to realize a certificate at the
    promised degree raises GuaranteeViolation.
    """
    if mode not in ("bound_only", "constructive"):
        raise ValueError(f"unknown mode {mode!r}")
    meas = verify(system, proof)
    if not meas.valid:
        raise ValueError("input proof does not verify")
    if proof.target != Polynomial.constant(system.n, -1):
        raise ValueError("degree reduction expects a refutation (target -1)")
    width = max(1, proof.product_width)
    if cutoff is None:
        cutoff = CutoffRule.constant(system.k * width)

    flat = multilinearize_proof(system, proof)
    total_size = flat.monomial_size
    n = system.n
    threshold = int(math.isqrt(int(2 * (n + 1) * math.log(max(total_size, 1))))) + 1
    max_cut = cutoff.max_value(system)
    tail = max(1, -(-max_cut // 2))  # ceil(max_cut / 2)

    trace = ReductionTrace(threshold=threshold, tail_degree=2 * tail)
    cur_system, cur_proof = system, flat
    pairs = n
    size_bound = float(max(total_size, 1))
    root_degree: Optional[int] = None
    root_choice = None

    while True:
        choice = select_variable(cur_proof, threshold)
        if choice.large_count == 0 or pairs == 0:
            closing = 2 * (threshold - 1) + 2 * tail if choice.large_count == 0 else 2 * tail
            trace.levels.append(
                ReductionLevel(
                    index=None,
                    assign=None,
                    large_count=choice.large_count,
                    threshold=threshold,
                    pairs=pairs,
                    size_bound=size_bound,
                    s_prime=None,
                    level_degree=closing,
                    branch_killed=closing,
                    branch_other=closing,
                    closed=True,
                )
            )
            if root_degree is None:
                root_degree = closing
            break
        t = choice.large_count
        s_prime = t * (1.0 - threshold / (2.0 * pairs))
        level_degree = threshold + int(
            math.floor(2.0 * (pairs + 1) * math.log(size_bound) / threshold)
        )
        branch_other = threshold + int(
            math.floor(2.0 * pairs * math.log(size_bound) / threshold)
        )
        if s_prime >= 1.0:
            branch_killed = threshold + int(
                math.floor(2.0 * pairs * math.log(s_prime) / threshold)
            )
        else:
            branch_killed = threshold - 1
        # the recursion's arithmetic: killed branch strictly cheaper
        if not branch_killed <= level_degree - 1:
            raise AssertionError("killed branch exceeded its degree budget")
        if not branch_other <= level_degree:
            raise AssertionError("surviving branch exceeded its degree budget")
        trace.levels.append(
            ReductionLevel(
                index=choice.index,
                assign=choice.assign,
                large_count=t,
                threshold=threshold,
                pairs=pairs,
                size_bound=size_bound,
                s_prime=s_prime,
                level_degree=2 * level_degree + 2 * tail,
                branch_killed=2 * branch_killed + 2 * tail,
                branch_other=2 * branch_other + 2 * tail,
                closed=False,
            )
        )
        if root_degree is None:
            root_degree = 2 * level_degree + 2 * tail
            root_choice = choice
        cur_system, cur_proof = restrict_proof(
            cur_system, cur_proof, choice.index, choice.assign
        )
        pairs -= 1
        size_bound = max(s_prime, 0.0)
        if size_bound < 1.0:
            break

    result = ReduceResult(degree_bound=root_degree, trace=trace)
    if mode == "bound_only":
        return result

    first = trace.levels[0]
    if first.closed:
        out = flat
        result.proof = out
        result.proof_residual_norm = 0.0
        return result

    # realize the two positivity certificates at the root and compose
    index, assign = root_choice.index, root_choice.assign
    half_hi = root_degree // 2
    half_lo = half_hi - 1
    killed_twin = assign == 1  # the killed branch's variable form
    cert_lo, eps, res_lo = _positivity_certificate(
        system, index, killed_twin, half_lo, width, cutoff, tol, denom_cap
    )
    cert_hi, delta, res_hi = _positivity_certificate(
        system, index, not killed_twin, half_hi, width, cutoff, tol, denom_cap
    )
    first.eps = eps
    first.delta = delta
    allow = res_lo > 0 or res_hi > 0
    composed = compose_refutations(
        system,
        index,
        cert_lo,
        eps,
        cert_hi,
        delta,
        degree=root_degree,
        lo_is_twin=killed_twin,
        allow_residual=allow,
    )
    report = verify(system, composed)
    norm = float(max((abs(c) for c in report.residual.terms.values()), default=0))
    if not allow and not report.valid:
        raise GuaranteeViolation("composed refutation failed exact verification")
    result.proof = composed
    result.proof_residual_norm = norm
    return result
