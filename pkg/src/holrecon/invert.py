"""Regularized inversion of F = E q: Tikhonov and smoothed total variation.

Real-q mode stacks real and imaginary parts, A = [Re E; Im E], b = [Re F; Im F],
so ‖Eq - F‖² = ‖Aq - b‖² for real q and every solve stays real.

All solves reduce to (A^H A + L) q = A^H b with L sparse. Small problems use a
dense Cholesky factorization. When the pixel count N' is large and the data
count M is small, the equivalent dual form

    q = L⁻¹ A^H (I + A L⁻¹ A^H)⁻¹ b

needs only sparse solves with L and an M×M dense factorization. Before that,
the data term is compressed with a thin SVD: singular values of E below
roundoff are dropped, so M becomes the numerical rank of E (about a hundred
for band-limited frequency sets) without changing the minimizer.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import weakref

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, ConvergenceError, LinearSolveError, ShapeError
from .fourier_op import FourierData, ForwardFourierOperator, PixelGrid

DENSE_LIMIT = 6000


# ---------------------------------------------------------------------------
# regularizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RegularizerStack:
    identity: sp.csr_matrix
    dx: sp.csr_matrix
    dy: sp.csr_matrix

    @property
    def gamma(self) -> sp.csr_matrix:
        return sp.vstack([self.identity, self.dx, self.dy]).tocsr()

    @property
    def gradient(self) -> sp.csr_matrix:
        return sp.vstack([self.dx, self.dy]).tocsr()


def _difference(pg: PixelGrid, dm: int, dn: int) -> sp.csr_matrix:
    lookup = -np.ones((pg.nx, pg.ny), dtype=np.int64)
    lookup[pg.cells[:, 0], pg.cells[:, 1]] = np.arange(pg.n_kept)
    m, n = pg.cells[:, 0] + dm, pg.cells[:, 1] + dn
    inside = (m < pg.nx) & (n < pg.ny)
    nb = np.full(pg.n_kept, -1)
    nb[inside] = lookup[m[inside], n[inside]]
    src = np.flatnonzero(nb >= 0)
    dst = nb[src]
    rows = np.repeat(np.arange(len(src)), 2)
    cols = np.column_stack([src, dst]).ravel()
    vals = np.tile([-1.0 / pg.h, 1.0 / pg.h], len(src))
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(src), pg.n_kept))


def build_regularizer(pg: PixelGrid) -> RegularizerStack:
    """Γ = [Id; D_x; D_y] with forward differences between kept neighbours."""
    return RegularizerStack(sp.identity(pg.n_kept, format="csr"), _difference(pg, 1, 0), _difference(pg, 0, 1))


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class ReconstructionResult:
    q_pixels: np.ndarray
    lam: float
    method: str
    residual: float
    regularizer: float
    iteration_log: list = field(default_factory=list)
    normal_residual: float = float("nan")
    info: dict = field(default_factory=dict)

    def metadata(self) -> dict:
        return {
            "method": self.method,
            "lambda": self.lam,
            "residual": self.residual,
            "regularizer": self.regularizer,
            "normal_residual": self.normal_residual,
            "iterations": len(self.iteration_log),
            **self.info,
        }


def _values(op: ForwardFourierOperator, F) -> np.ndarray:
    values = F.values if isinstance(F, FourierData) else np.asarray(F)
    if values.shape != (op.shape[0],):
        raise ShapeError(f"expected {op.shape[0]} Fourier values, got {values.shape}")
    return values


_REDUCTIONS: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _system(op: ForwardFourierOperator, F, real: bool, reduce: bool):
    """(B, c) describing the data term ‖Bq - c‖² (+ const) in real or complex mode."""
    values = _values(op, F)
    if not reduce:
        if real:
            return np.concatenate([op.matrix.real, op.matrix.imag]), np.concatenate([values.real, values.imag])
        return op.matrix, values
    cache = _REDUCTIONS.setdefault(op, {})
    if real not in cache:
        A = np.concatenate([op.matrix.real, op.matrix.imag]) if real else op.matrix
        U, s, Vt = la.svd(A, full_matrices=False, lapack_driver="gesdd", check_finite=False)
        del A
        keep = s > max(op.shape) * np.finfo(float).eps * s[0]
        cache[real] = (s[keep, None] * Vt[keep], np.ascontiguousarray(U[:, keep].conj().T))
    B, UH = cache[real]
    b = np.concatenate([values.real, values.imag]) if real else values
    return B, UH @ b


def _normal_gradient(op, values, q, L, real):
    """Gradient of ‖Eq - F‖² + q^H L q (halved) and the reference norm ‖E^H F‖."""
    EH = op.matrix.conj().T
    g = EH @ (op.matrix @ q - values)
    ref = EH @ values
    if real:
        g, ref = g.real, ref.real
    return g + L @ q, float(np.linalg.norm(ref))


def data_residual(op: ForwardFourierOperator, q, F) -> float:
    values = F.values if isinstance(F, FourierData) else np.asarray(F)
    return float(np.linalg.norm(op.matrix @ q - values))


# ---------------------------------------------------------------------------
# linear algebra kernels
# ---------------------------------------------------------------------------

class _SparseInverse:
    """Solves with a sparse symmetric L, optionally singular with nullspace span{1}.

    With a constant nullspace, L is replaced by L + μ c cᵀ (c = 1/√N), which is
    nonsingular and solved exactly by pinning one unknown.
    """

    def __init__(self, L: sp.spmatrix, constant_nullspace: bool = False, mu: float = 1.0):
        self.n = L.shape[0]
        self.null = constant_nullspace
        self.mu = mu
        L = sp.csc_matrix(L)
        if constant_nullspace:
            L = L[1:, :][:, 1:]
        try:
            self.lu = spla.splu(sp.csc_matrix(L), permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise LinearSolveError(f"regularizer factorization failed: {exc}") from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs)
        if not self.null:
            return self._lu_solve(rhs)
        mean = rhs.mean(axis=0)
        perp = rhs - mean
        z = np.zeros_like(perp)
        z[1:] = self._lu_solve(perp[1:])
        z -= z.mean(axis=0)
        # along c = 1/√n the inverse is 1/μ: (cᵀx/μ) c = mean(x)/μ
        return z + mean / self.mu

    def _lu_solve(self, rhs):
        if np.iscomplexobj(rhs):
            return self.lu.solve(np.ascontiguousarray(rhs.real)) + 1j * self.lu.solve(np.ascontiguousarray(rhs.imag))
        return self.lu.solve(np.asfortranarray(rhs) if rhs.ndim == 2 else rhs)


def _reflect(M, v):
    """Q M Q for the Householder reflection Q = I - 2vvᵀ/‖v‖²."""
    tau = 2.0 / (v @ v)
    p = tau * (M @ v)
    k = p - 0.5 * tau * (v @ p) * v
    return M - np.outer(v, k) - np.outer(k, v)


def _reflect_vec(x, v):
    return x - (2.0 / (v @ v)) * v * (v @ x)


class QuadraticSolver:
    """Minimizer of ‖Bq - c‖² + q^H L q via (B^H B + L) q = B^H c.

    Dense Cholesky when N is small, otherwise the dual form with sparse
    solves on L. Either way a few steps of iterative refinement bring the
    normal-equations residual to roundoff level.
    """

    def __init__(self, B, L, constant_nullspace=False, dense_limit=DENSE_LIMIT):
        self.B, self.L = B, sp.csr_matrix(L)
        N = B.shape[1]
        self.dense = N <= dense_limit or B.shape[0] >= N
        if self.dense:
            H = B.conj().T @ B
            Ld = self.L.toarray()
            self.house = None
            if constant_nullspace:
                # rotate 1/√N onto e₀ so L's null direction is exactly zero
                v = -np.full(N, 1.0 / np.sqrt(N))
                v[0] += 1.0
                self.house = v
                H, Ld = _reflect(H, v), _reflect(Ld, v)
                Ld[0, :] = 0.0
                Ld[:, 0] = 0.0
            H += Ld
            try:
                self.chol = la.cho_factor(H, lower=True, overwrite_a=True, check_finite=False)
            except la.LinAlgError as exc:
                raise LinearSolveError("regularized normal matrix is not positive definite") from exc
            return
        if constant_nullspace:
            self.c = np.full(N, 1.0 / np.sqrt(N))
            self.mu = float(np.linalg.norm(B @ self.c) ** 2)
            if self.mu == 0:
                raise LinearSolveError("data do not see constants and the regularizer is singular")
        else:
            self.c, self.mu = None, 1.0
        self.Linv = _SparseInverse(L, constant_nullspace, self.mu)
        BH = B.conj().T
        self.Y = self.Linv.solve(BH)  # (N, r)
        G = B @ self.Y
        G[np.diag_indices_from(G)] += 1.0
        self.G = la.lu_factor(G, check_finite=False)
        if self.c is not None:
            z2 = self._woodbury(self.c[:, None])[:, 0]
            self.z2 = z2
            self.sm_denom = 1.0 - self.mu * np.vdot(self.c, z2)

    def _woodbury(self, V):
        # (B^H B + L')⁻¹ V with L' = L (+ μ c cᵀ when L is singular)
        Z = self.Linv.solve(V)
        return Z - self.Y @ la.lu_solve(self.G, self.B @ Z, check_finite=False)

    def _apply_inverse(self, v):
        if self.dense:
            if self.house is None:
                return la.cho_solve(self.chol, v, check_finite=False)
            return _reflect_vec(la.cho_solve(self.chol, _reflect_vec(v, self.house), check_finite=False), self.house)
        z1 = self._woodbury(v[:, None])[:, 0]
        if self.c is None:
            return z1
        return z1 + self.mu * self.z2 * (np.vdot(self.c, z1) / self.sm_denom)

    def apply(self, q):
        return self.B.conj().T @ (self.B @ q) + self.L @ q

    def solve(self, rhs, x0=None, max_refine: int = 5, rtol: float = 1e-13):
        rhs = np.asarray(rhs)
        ref = np.linalg.norm(rhs)
        q = self._apply_inverse(rhs)
        r = rhs - self.apply(q)
        rn = np.linalg.norm(r)
        if x0 is not None:
            # warm start only if it is the better point
            q1 = np.array(x0, dtype=q.dtype)
            q1 = q1 + self._apply_inverse(rhs - self.apply(q1))
            r1 = rhs - self.apply(q1)
            if np.linalg.norm(r1) < rn:
                q, r, rn = q1, r1, np.linalg.norm(r1)
        for _ in range(max_refine):
            if rn <= rtol * ref:
                break
            trial = q + self._apply_inverse(r)
            r_trial = rhs - self.apply(trial)
            rn_trial = np.linalg.norm(r_trial)
            if not rn_trial < rn:
                break
            q, r, rn = trial, r_trial, rn_trial
        return q


# ---------------------------------------------------------------------------
# Tikhonov
# ---------------------------------------------------------------------------

def tikhonov_solve(op: ForwardFourierOperator, F, lam: float, stack: RegularizerStack | None = None, real: bool = True, dense_limit: int = DENSE_LIMIT) -> ReconstructionResult:
    """argmin ‖Eq - F‖² + λ‖Γq‖², Γ = [Id; D_x; D_y].

    In real mode q is real; otherwise the Hermitian normal equations are solved
    for complex q.
    """
    if not lam > 0:
        raise ConfigurationError("lambda must be positive")
    if stack is None:
        stack = build_regularizer(op.pixel_grid)
    values = _values(op, F)
    B, c = _system(op, F, real, reduce=op.shape[1] > dense_limit)
    gamma = stack.gamma
    L = (lam * (gamma.T @ gamma)).tocsr()
    solver = QuadraticSolver(B, L, dense_limit=dense_limit)
    q = solver.solve(B.conj().T @ c)
    if real:
        q = np.real(q)
    grad, ref = _normal_gradient(op, values, q, L, real)
    return ReconstructionResult(
        q_pixels=q,
        lam=lam,
        method="tikhonov",
        residual=data_residual(op, q, F),
        regularizer=float(np.linalg.norm(gamma @ q) ** 2),
        normal_residual=float(np.linalg.norm(grad) / ref) if ref > 0 else 0.0,
        info={"data_rank": int(B.shape[0])},
    )


# ---------------------------------------------------------------------------
# total variation
# ---------------------------------------------------------------------------

def tv_value(D, q, beta) -> float:
    """Smoothed TV: Σ √((Dq)_i² + β²)."""
    t = D @ q
    return float(np.sum(np.sqrt(np.abs(t) ** 2 + beta**2)))


def tv_solve(op: ForwardFourierOperator, F, lam: float, beta: float | None = None, max_iter: int = 100, tol: float = 1e-5, stack: RegularizerStack | None = None, dense_limit: int = DENSE_LIMIT, q0=None) -> ReconstructionResult:
    """argmin ‖Eq - F‖² + λ Σ √((∂q)_i² + β²) over real q, by lagged diffusivity.

    Each outer step minimizes the quadratic majorant
    ‖Aq - b‖² + (λ/2) Σ w_i (Dq)_i², w_i = 1/√((Dq_k)_i² + β²),
    so the objective can only decrease; an increase beyond roundoff raises
    ConvergenceError. ``beta`` defaults to 1e-6 × max|D q_init|.
    """
    if not lam > 0:
        raise ConfigurationError("lambda must be positive")
    if beta is not None and not beta > 0:
        raise ConfigurationError("beta must be positive")
    if stack is None:
        stack = build_regularizer(op.pixel_grid)
    B, c = _system(op, F, real=True, reduce=op.shape[1] > dense_limit)
    rhs = B.T @ c
    D = stack.gradient
    DT = D.T.tocsr()

    def quad_solve(w, x0=None):
        L = (0.5 * lam) * (DT @ sp.diags(w) @ D)
        return np.real(QuadraticSolver(B, L, constant_nullspace=True, dense_limit=dense_limit).solve(rhs, x0))

    if q0 is None:
        q = quad_solve(np.ones(D.shape[0]))
    else:
        q = np.asarray(q0, dtype=float)
    if beta is None:
        beta = 1e-6 * max(float(np.max(np.abs(D @ q))), 1e-12)

    def objective(q):
        return float(np.linalg.norm(B @ q - c) ** 2) + lam * tv_value(D, q, beta)

    J = objective(q)
    log = [{"iter": 0, "objective": J, "change": float("nan")}]
    for it in range(1, max_iter + 1):
        w = 1.0 / np.sqrt((D @ q) ** 2 + beta**2)
        q_new = quad_solve(w, q)
        J_new = objective(q_new)
        change = float(np.linalg.norm(q_new - q) / max(np.linalg.norm(q_new), 1e-300))
        log.append({"iter": it, "objective": J_new, "change": change})
        if J_new > J * (1 + 1e-9) + 1e-300:
            raise ConvergenceError(f"TV objective increased at iteration {it}: {J} -> {J_new}", log)
        q, J = q_new, J_new
        if change <= tol:
            break
    return ReconstructionResult(
        q_pixels=q,
        lam=lam,
        method="tv",
        residual=data_residual(op, q, F),
        regularizer=tv_value(D, q, beta),
        iteration_log=log,
        info={"beta": beta, "converged": log[-1]["change"] <= tol},
    )


# ---------------------------------------------------------------------------
# utilities
# ---------------------------------------------------------------------------

def lambda_ladder(op: ForwardFourierOperator, F, lambdas, method: str = "tikhonov", **kw):
    """Solve over a list of λ; returns [(λ, residual, regularizer, result)] (L-curve data)."""
    out = []
    for lam in lambdas:
        if method == "tikhonov":
            res = tikhonov_solve(op, F, lam, **kw)
        elif method == "tv":
            res = tv_solve(op, F, lam, **kw)
        else:
            raise ConfigurationError(f"unknown method {method!r}")
        out.append((lam, res.residual, res.regularizer, res))
    return out


def l2_error(q_rec, q_true, pg: PixelGrid) -> float:
    """Discrete L²(Ω) norm h·‖q_rec - q_true(centers)‖₂.

    ``q_rec`` may be a ReconstructionResult or a pixel vector; ``q_true`` a
    callable potential or a pixel vector.
    """
    rec = q_rec.q_pixels if isinstance(q_rec, ReconstructionResult) else np.asarray(q_rec)
    ref = q_true(pg.centers) if callable(q_true) else np.asarray(q_true)
    return float(pg.h * np.linalg.norm(rec - ref))


def relative_l2_error(q_rec, q_true, pg: PixelGrid) -> float:
    ref = q_true(pg.centers) if callable(q_true) else np.asarray(q_true)
    return l2_error(q_rec, ref, pg) / float(pg.h * np.linalg.norm(ref))
