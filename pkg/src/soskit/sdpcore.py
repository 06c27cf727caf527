"""Dense primal-dual interior-point solver for block semidefinite programs.

Solves problems of the form

    minimize    sum_k <C_k, X_k> + c_free . u
    subject to  sum_k A_k(X_k) + B u = b,      X_k psd,  u free,

whose dual is

    maximize    b . y
    subject to  Z_k = C_k - sum_i y_i A_{i,k} psd,   B^T y = c_free.

The method is infeasible-start path following with Nesterov-Todd scaling:
at each iterate the scaling matrix W_k with W_k Z_k W_k = X_k is computed
from Cholesky factors and an SVD, the Newton system is reduced to the dense
Schur complement M_ij = sum_k <A_i, W_k A_j W_k> (bordered by the free-variable
columns), and the centering parameter follows Mehrotra's heuristic from an
affine predictor step.  Everything is dense; intended problem sizes are a few
hundred rows with blocks up to a few dozen.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max_iter"
STATUS_ERROR = "numerical_error"


@dataclass
class BlockProblem:
    """Problem data; A_blocks[k] has shape (nrows, s_k, s_k), symmetric slices."""

    block_sizes: List[int]
    A_blocks: List[np.ndarray]
    C_blocks: List[np.ndarray]
    b: np.ndarray
    B: Optional[np.ndarray] = None
    c_free: Optional[np.ndarray] = None

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        nrows = self.b.shape[0]
        self.A_blocks = [np.asarray(a, dtype=float) for a in self.A_blocks]
        self.C_blocks = [np.asarray(c, dtype=float) for c in self.C_blocks]
        for a, c, s in zip(self.A_blocks, self.C_blocks, self.block_sizes):
            if a.shape != (nrows, s, s) or c.shape != (s, s):
                raise ValueError("inconsistent block shapes")
        if self.B is None:
            self.B = np.zeros((nrows, 0))
        self.B = np.asarray(self.B, dtype=float)
        if self.c_free is None:
            self.c_free = np.zeros(self.B.shape[1])
        self.c_free = np.asarray(self.c_free, dtype=float)
        if self.B.shape != (nrows, self.c_free.shape[0]):
            raise ValueError("free-variable shapes inconsistent")

    @property
    def nrows(self) -> int:
        return self.b.shape[0]

    @property
    def nfree(self) -> int:
        return self.B.shape[1]


@dataclass
class BlockSolution:
    status: str
    X: List[np.ndarray]
    Z: List[np.ndarray]
    y: np.ndarray
    u: np.ndarray
    primal_obj: float
    dual_obj: float
    primal_infeas: float
    dual_infeas: float
    rel_gap: float
    iterations: int

    @property
    def optimal(self) -> bool:
        return self.status == STATUS_OPTIMAL


def _nt_scaling(X: np.ndarray, Z: np.ndarray):
    """W with W Z W = X, via W = R R^T, R = chol(X) V diag(sv)^-1/2."""
    lx = np.linalg.cholesky(X)
    lz = np.linalg.cholesky(Z)
    _, sv, vt = np.linalg.svd(lz.T @ lx)
    r = lx @ vt.T @ np.diag(1.0 / np.sqrt(sv))
    return r @ r.T


def _min_eig_step(L: np.ndarray, delta: np.ndarray) -> float:
    """Largest alpha with X + alpha*delta psd, given L = chol(X)."""
    y = np.linalg.solve(L, delta)
    y = np.linalg.solve(L, y.T).T
    lam = np.linalg.eigvalsh(0.5 * (y + y.T)).min()
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


def _sym(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def solve_block_sdp(
    prob: BlockProblem,
    tol: float = 1e-8,
    max_iter: int = 200,
    verbose: bool = False,
) -> BlockSolution:
    """Solve with a conservative starting radius; on a poor finish, retry
    once from a larger one (a different trajectory often dodges the
    degenerate endgame)."""
    first = _solve_once(prob, tol, max_iter, verbose, radius=0.3)
    if first.optimal:
        return first
    second = _solve_once(prob, tol, max_iter, verbose, radius=10.0)
    if second.optimal:
        return second
    first_merit = max(first.primal_infeas, first.dual_infeas, first.rel_gap)
    second_merit = max(second.primal_infeas, second.dual_infeas, second.rel_gap)
    return first if first_merit <= second_merit else second


def _solve_once(
    prob: BlockProblem,
    tol: float,
    max_iter: int,
    verbose: bool,
    radius: float,
) -> BlockSolution:
    nblocks = len(prob.block_sizes)
    nrows = prob.nrows
    nfree = prob.nfree
    A2 = [a.reshape(nrows, -1) for a in prob.A_blocks]
    cone_dim = max(sum(prob.block_sizes), 1)

    scale = max(
        1.0,
        float(np.max(np.abs(prob.b))) if nrows else 1.0,
        max((float(np.max(np.abs(c))) if c.size else 0.0) for c in prob.C_blocks),
    )
    X = [radius * scale * np.eye(s) for s in prob.block_sizes]
    Z = [radius * scale * np.eye(s) for s in prob.block_sizes]
    y = np.zeros(nrows)
    u = np.zeros(nfree)

    norm_b = 1.0 + np.linalg.norm(prob.b)
    norm_c = 1.0 + max(
        (np.linalg.norm(c) for c in prob.C_blocks), default=0.0
    ) + np.linalg.norm(prob.c_free)

    def residuals():
        rp = prob.b - prob.B @ u
        for k in range(nblocks):
            rp -= A2[k] @ X[k].ravel()
        rd = []
        for k in range(nblocks):
            aty = (y[None, :] @ A2[k]).reshape(prob.block_sizes[k], prob.block_sizes[k])
            rd.append(prob.C_blocks[k] - aty - Z[k])
        rdu = prob.c_free - prob.B.T @ y
        return rp, rd, rdu

    def objectives():
        pobj = float(prob.c_free @ u)
        for k in range(nblocks):
            pobj += float(np.sum(prob.C_blocks[k] * X[k]))
        dobj = float(prob.b @ y)
        return pobj, dobj

    def metrics(rp, rd, rdu):
        pinf = (np.linalg.norm(rp) + np.linalg.norm(rdu)) / norm_b
        dinf = max((np.linalg.norm(r) for r in rd), default=0.0) / norm_c
        pobj, dobj = objectives()
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return pinf, dinf, gap, pobj, dobj

    # Gram matrix of the constraint rows, for the final least-squares
    # re-projection of the primal iterate onto the equality manifold
    AAT = prob.B @ prob.B.T
    for k in range(nblocks):
        AAT = AAT + A2[k] @ A2[k].T
    try:
        L_aat = np.linalg.cholesky(AAT + 1e-12 * (1.0 + np.trace(AAT) / nrows) * np.eye(nrows))
    except np.linalg.LinAlgError:
        L_aat = None

    def project_primal():
        """Absorb the leftover primal residual; the interior-point endgame
        floors out around machine precision times the scaling spread."""
        if L_aat is None:
            return
        nonlocal u
        rp = prob.b - prob.B @ u
        for k in range(nblocks):
            rp -= A2[k] @ X[k].ravel()
        lam = np.linalg.solve(L_aat.T, np.linalg.solve(L_aat, rp))
        for _ in range(2):
            err = rp - AAT @ lam
            lam += np.linalg.solve(L_aat.T, np.linalg.solve(L_aat, err))
        for k in range(nblocks):
            X[k] = _sym(X[k] + (A2[k].T @ lam).reshape(X[k].shape))
        u = u + prob.B.T @ lam

    status = STATUS_MAX_ITER
    iteration = 0
    best_merit = np.inf
    best_state = None
    stall = 0
    for iteration in range(1, max_iter + 1):
        rp, rd, rdu = residuals()
        pinf, dinf, gap, pobj, dobj = metrics(rp, rd, rdu)
        mu = sum(float(np.sum(X[k] * Z[k])) for k in range(nblocks)) / cone_dim
        if verbose:
            print(
                f"iter {iteration:3d} pinf {pinf:9.2e} dinf {dinf:9.2e} "
                f"gap {gap:9.2e} mu {mu:9.2e} pobj {pobj:+.6e}"
            )
        merit = max(pinf, dinf, gap)
        if merit < best_merit:
            if merit < 0.9 * best_merit:
                stall = 0
            best_merit = merit
            best_state = ([x.copy() for x in X], [z.copy() for z in Z], y.copy(), u.copy())
        else:
            stall += 1
        if pinf <= tol and dinf <= tol and gap <= tol:
            status = STATUS_OPTIMAL
            break
        if stall >= 8:
            # no progress; the best iterate so far is as good as it gets
            break

        try:
            W = [_nt_scaling(X[k], Z[k]) for k in range(nblocks)]
            Lx = [np.linalg.cholesky(X[k]) for k in range(nblocks)]
            Lz = [np.linalg.cholesky(Z[k]) for k in range(nblocks)]
            Zinv = [
                np.linalg.solve(Lz[k].T, np.linalg.solve(Lz[k], np.eye(prob.block_sizes[k])))
                for k in range(nblocks)
            ]

            # Schur complement of the Newton system
            M = np.zeros((nrows, nrows))
            WAW2 = []
            for k in range(nblocks):
                waw = W[k][None, :, :] @ prob.A_blocks[k] @ W[k][None, :, :]
                waw2 = waw.reshape(nrows, -1)
                WAW2.append(waw2)
                M += A2[k] @ waw2.T
            M = _sym(M)

            jitter = 0.0
            for _ in range(4):
                try:
                    Lm = np.linalg.cholesky(M + jitter * np.eye(nrows))
                    break
                except np.linalg.LinAlgError:
                    jitter = max(jitter * 100.0, 1e-13 * (1.0 + np.trace(M) / nrows))
            else:
                raise np.linalg.LinAlgError("Schur complement not positive definite")

            def msolve(rhs):
                return np.linalg.solve(Lm.T, np.linalg.solve(Lm, rhs))

            if nfree:
                S = prob.B.T @ msolve(prob.B)
                S += 1e-12 * (1.0 + np.trace(S) / max(nfree, 1)) * np.eye(nfree)

            def saddle_solve(r1, r2):
                """Solve [[M, B], [B^T, 0]] [dy, du] = [r1, r2] by block
                elimination, with iterative refinement of the bordered
                residual: M turns badly conditioned near the optimum."""

                def once(a1, a2):
                    mia1 = msolve(a1)
                    if nfree:
                        duu = np.linalg.solve(S, prob.B.T @ mia1 - a2)
                        dyy = msolve(a1 - prob.B @ duu)
                    else:
                        duu = np.zeros(0)
                        dyy = mia1
                    return dyy, duu

                dy, du = once(r1, r2)
                for _ in range(2):
                    e1 = r1 - (M @ dy + prob.B @ du)
                    e2 = r2 - prob.B.T @ dy
                    cy, cu = once(e1, e2)
                    dy = dy + cy
                    du = du + cu
                return dy, du

            def solve_direction(rc_list, rp_vec, rd_list, rdu_vec):
                # r1 = rp - sum_k A_k(Rc_k - W Rd_k W)
                r1 = rp_vec.copy()
                for k in range(nblocks):
                    wrw = W[k] @ rd_list[k] @ W[k]
                    r1 -= A2[k] @ (rc_list[k] - wrw).ravel()
                dy, du = saddle_solve(r1, rdu_vec)
                dZ = []
                dX = []
                for k in range(nblocks):
                    aty = (dy[None, :] @ A2[k]).reshape(
                        prob.block_sizes[k], prob.block_sizes[k]
                    )
                    dz = rd_list[k] - aty
                    dz = _sym(dz)
                    dx = _sym(rc_list[k] - W[k] @ dz @ W[k])
                    dZ.append(dz)
                    dX.append(dx)
                return dX, dZ, dy, du

            def step_lengths(dX, dZ):
                ap = 1.0
                ad = 1.0
                for k in range(nblocks):
                    ap = min(ap, 0.98 * _min_eig_step(Lx[k], dX[k]))
                    ad = min(ad, 0.98 * _min_eig_step(Lz[k], dZ[k]))
                return max(ap, 0.0), max(ad, 0.0)

            def direction_error(dX, du):
                err = rp - prob.B @ du
                for k in range(nblocks):
                    err = err - A2[k] @ dX[k].ravel()
                return np.linalg.norm(err)

            # predictor (affine scaling)
            rc_aff = [-X[k] for k in range(nblocks)]
            dXa, dZa, _, _ = solve_direction(rc_aff, rp, rd, rdu)
            ap, ad = step_lengths(dXa, dZa)
            mu_aff = sum(
                float(np.sum((X[k] + ap * dXa[k]) * (Z[k] + ad * dZa[k])))
                for k in range(nblocks)
            ) / cone_dim
            sigma = min(1.0, max((max(mu_aff, 0.0) / mu) ** 3, 1e-6))

            # combined centering step
            rc = [sigma * mu * Zinv[k] - X[k] for k in range(nblocks)]
            dX, dZ, dy, du = solve_direction(rc, rp, rd, rdu)
            allowance = max(0.01 * np.linalg.norm(rp), 1e-7 * norm_b)
            err = direction_error(dX, du)
            if err > allowance:
                # ill-conditioned Newton system; fall back to a damped pure
                # centering step and keep the injected infeasibility small
                rc = [mu * Zinv[k] - X[k] for k in range(nblocks)]
                dX, dZ, dy, du = solve_direction(rc, rp, rd, rdu)
                ap, ad = step_lengths(dX, dZ)
                damp = 0.7 * min(1.0, 10.0 * allowance / max(direction_error(dX, du), 1e-300))
                ap, ad = damp * ap, damp * ad
            else:
                ap, ad = step_lengths(dX, dZ)
            if min(ap, ad) < 1e-10:
                status = STATUS_ERROR
                break
            for k in range(nblocks):
                X[k] = _sym(X[k] + ap * dX[k])
                Z[k] = _sym(Z[k] + ad * dZ[k])
            y = y + ad * dy
            u = u + ap * du
        except np.linalg.LinAlgError:
            status = STATUS_ERROR
            break
    else:
        iteration = max_iter

    rp, rd, rdu = residuals()
    pinf, dinf, gap, pobj, dobj = metrics(rp, rd, rdu)
    if best_state is not None and best_merit < max(pinf, dinf, gap):
        X, Z, y, u = best_state
    if status != STATUS_OPTIMAL:
        project_primal()
    rp, rd, rdu = residuals()
    pinf, dinf, gap, pobj, dobj = metrics(rp, rd, rdu)
    if pinf <= tol and dinf <= tol and gap <= tol:
        status = STATUS_OPTIMAL
    return BlockSolution(
        status=status,
        X=X,
        Z=Z,
        y=y,
        u=u,
        primal_obj=pobj,
        dual_obj=dobj,
        primal_infeas=pinf,
        dual_infeas=dinf,
        rel_gap=gap,
        iterations=iteration,
    )
