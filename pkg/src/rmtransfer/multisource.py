"""Multi-source fine-tuning: objective coefficients and the mixing solver.

With T fixed source classifiers stacked as columns of W, the fine-tuned
mixture's asymptotic accuracy is a monotone function of

    g(alpha) = (a1 + alpha'v1) / sqrt(a2 + alpha'v2 + alpha'M alpha)

where the scalars/vectors depend only on the target-side context, the
inner products W'mu_target and the Gram matrix W'W.  The denominator is
the predicted decision variance, so the maximizer solves the gradient
root

    2*(a2 + alpha'v2 + alpha'M alpha)*v1
        - (a1 + alpha'v1)*(v2 + 2*M*alpha) = 0

(the factor 2 comes from differentiating the square root).  With M
positive definite and positive variance this system is solved by a damped
Newton iteration with multistart; for T = 1 its root coincides with the
scalar closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DegenerateSpecError, RegimeError
from .theory import ProblemSpec, ScalarContext, SourceSummary

MAX_NEWTON_ITERS = 100
MAX_HALVINGS = 40
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class MultiSourceCoeffs:
    """Coefficients of the multi-source accuracy objective (see module doc)."""

    a1: float
    v1: np.ndarray
    a2: float
    v2: np.ndarray
    m_tilde: np.ndarray

    def __post_init__(self):
        v1 = np.asarray(self.v1, dtype=np.float64).reshape(-1)
        v2 = np.asarray(self.v2, dtype=np.float64).reshape(-1)
        mt = np.asarray(self.m_tilde, dtype=np.float64)
        t = v1.shape[0]
        if v2.shape != (t,) or mt.shape != (t, t):
            raise ValueError("inconsistent coefficient shapes")
        sym_err = np.linalg.norm(mt - mt.T)
        if sym_err > 1e-12 * max(1.0, np.linalg.norm(mt)):
            raise ValueError("curvature matrix must be symmetric")
        if not (self.a2 > 0.0):
            raise RegimeError(f"baseline variance a2 = {self.a2} must be positive")
        for arr in (v1, v2, mt):
            arr.setflags(write=False)
        object.__setattr__(self, "v1", v1)
        object.__setattr__(self, "v2", v2)
        object.__setattr__(self, "m_tilde", 0.5 * (mt + mt.T))

    @property
    def n_sources(self) -> int:
        return self.v1.shape[0]

    def mean(self, alpha: np.ndarray) -> float:
        return self.a1 + float(alpha @ self.v1)

    def var(self, alpha: np.ndarray) -> float:
        return self.a2 + float(alpha @ self.v2) + float(alpha @ self.m_tilde @ alpha)

    def objective(self, alpha: np.ndarray) -> float:
        """Predicted margin g(alpha); the accuracy is a monotone map of it."""
        alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
        d = self.var(alpha)
        if d <= 0.0:
            raise RegimeError(f"nonpositive variance {d} at alpha={alpha}")
        return self.mean(alpha) / np.sqrt(d)


def multi_source_coeffs(
    ctx: ScalarContext,
    spec: ProblemSpec,
    inners: np.ndarray,
    gram: np.ndarray,
) -> MultiSourceCoeffs:
    """Build the objective coefficients from source summaries.

    ``inners`` holds <w_t, mu_target> and ``gram`` the T x T matrix W'W.
    Only the target-side fields of ``spec`` (norm_mu_beta, gamma, p, n)
    enter the formulas.  The linear and quadratic denominators are the
    second-moment coefficients minus the squared-mean completion, which
    keeps the T = 1 case identical to the scalar closed forms.
    """
    inners = np.asarray(inners, dtype=np.float64).reshape(-1)
    gram = np.asarray(gram, dtype=np.float64)
    t = inners.shape[0]
    if gram.shape != (t, t):
        raise ValueError(f"gram must be {t} x {t}")
    if np.linalg.norm(gram - gram.T) > 1e-10 * max(1.0, np.linalg.norm(gram)):
        raise ValueError("gram matrix must be symmetric")
    eigs = np.linalg.eigvalsh(gram)
    if eigs.min() < -1e-10 * max(1.0, eigs.max()):
        raise ValueError("gram matrix must be positive semidefinite")
    mub2 = spec.norm_mu_beta**2
    bound = np.sqrt(np.clip(np.diag(gram), 0.0, None)) * spec.norm_mu_beta
    if np.any(np.abs(inners) > bound * (1.0 + 1e-8) + 1e-300):
        raise ValueError("inner products violate Cauchy-Schwarz against the Gram diagonal")

    g = spec.gamma * (1.0 + ctx.delta_Q)
    lq, h = ctx.lambda_Q, ctx.h
    psi = 1.0 / (1.0 + g) ** 2
    a1 = mub2 / lq
    v1 = g / lq * inners
    # scalar T1 and the per-unit-inner slope of T2 (source-independent)
    t1 = mub2 / (h * lq) * ((mub2 + 1.0) / lq - 2.0 * (1.0 - h)) + (1.0 - h) / h
    t2_slope = 2.0 * g / (h * lq) * ((mub2 + 1.0) / lq - (1.0 - h))
    a2 = t1 - a1 * a1
    v2 = (t2_slope - 2.0 * a1 * g / lq) * inners
    outer = np.outer(inners, inners)
    m_second = g * g / h * (outer / lq**2 + psi * (gram + (mub2 / lq - 2.0) * outer / lq))
    m_tilde = m_second - np.outer(v1, v1)
    if not (a2 > 0.0):
        raise RegimeError(f"baseline variance a2 = {a2} <= 0")
    return MultiSourceCoeffs(a1=a1, v1=v1, a2=a2, v2=v2, m_tilde=m_tilde)


def coeffs_from_summary(
    ctx: ScalarContext, spec: ProblemSpec, src: SourceSummary
) -> MultiSourceCoeffs:
    """T = 1 coefficients from a single source summary (cross-check path)."""
    return multi_source_coeffs(
        ctx, spec, np.array([src.inner]), np.array([[src.norm_sq]])
    )


def stationarity_residual(coeffs: MultiSourceCoeffs, alpha: np.ndarray) -> np.ndarray:
    """Gradient-root residual of the objective (zero exactly at stationary
    points of g)."""
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
    d = coeffs.var(alpha)
    grad_d = coeffs.v2 + 2.0 * coeffs.m_tilde @ alpha
    return 2.0 * d * coeffs.v1 - coeffs.mean(alpha) * grad_d


def _residual_jacobian(coeffs: MultiSourceCoeffs, alpha: np.ndarray) -> np.ndarray:
    grad_d = coeffs.v2 + 2.0 * coeffs.m_tilde @ alpha
    return (
        2.0 * np.outer(coeffs.v1, grad_d)
        - np.outer(grad_d, coeffs.v1)
        - 2.0 * coeffs.mean(alpha) * coeffs.m_tilde
    )


def _newton(coeffs: MultiSourceCoeffs, start: np.ndarray, tol: float):
    alpha = start.astype(np.float64).copy()
    res = stationarity_residual(coeffs, alpha)
    best = (np.linalg.norm(res), alpha.copy())
    for _ in range(MAX_NEWTON_ITERS):
        norm = np.linalg.norm(res)
        if norm <= tol:
            return alpha, norm
        jac = _residual_jacobian(coeffs, alpha)
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        scale = 1.0
        for _ in range(MAX_HALVINGS):
            cand = alpha + scale * step
            if coeffs.var(cand) > 0.0:
                cand_res = stationarity_residual(coeffs, cand)
                if np.linalg.norm(cand_res) < norm:
                    alpha, res = cand, cand_res
                    break
            scale *= 0.5
        else:
            break  # no productive step found
        if np.linalg.norm(res) < best[0]:
            best = (np.linalg.norm(res), alpha.copy())
    return best[1], best[0]


def _componentwise_seed(coeffs: MultiSourceCoeffs) -> np.ndarray:
    """Decoupled starting point: solve each coordinate's scalar stationarity
    using the diagonal curvature, ignoring cross terms."""
    a1, a2 = coeffs.a1, coeffs.a2
    seed = np.zeros(coeffs.n_sources)
    diag = np.diag(coeffs.m_tilde)
    for t in range(coeffs.n_sources):
        den = coeffs.v1[t] * coeffs.v2[t] - 2.0 * a1 * diag[t]
        if den != 0.0:
            seed[t] = (a1 * coeffs.v2[t] - 2.0 * coeffs.v1[t] * a2) / den
    return seed


def solve_multi_alpha(coeffs: MultiSourceCoeffs, tol: float | None = None) -> np.ndarray:
    """Accuracy-maximizing mixing vector.

    Damped Newton on the stationarity residual, started from zero and from
    a componentwise decoupled seed; among converged roots the one with the
    best objective is returned, and it must not lose to alpha = 0.
    Deterministic given the inputs.
    """
    if tol is None:
        tol = RESIDUAL_TOL * (1.0 + np.linalg.norm(coeffs.v1))
    eigs = np.linalg.eigvalsh(coeffs.m_tilde)
    if eigs.min() <= 0.0:
        raise DegenerateSpecError(
            f"curvature matrix not positive definite (min eigenvalue {eigs.min()}); "
            "objective is degenerate or unbounded"
        )
    starts = [np.zeros(coeffs.n_sources), _componentwise_seed(coeffs)]
    solutions = []
    best_iterate = None
    for start in starts:
        if coeffs.var(start) <= 0.0:
            start = np.zeros(coeffs.n_sources)
        alpha, res_norm = _newton(coeffs, start, tol)
        if best_iterate is None or res_norm < best_iterate[0]:
            best_iterate = (res_norm, alpha)
        if res_norm <= tol and coeffs.var(alpha) > 0.0:
            solutions.append((coeffs.objective(alpha), alpha))
    if not solutions:
        raise ConvergenceError(
            "stationarity solve did not converge",
            best=best_iterate[1],
            residual=best_iterate[0],
        )
    obj, alpha = max(solutions, key=lambda t: t[0])
    base = coeffs.objective(np.zeros(coeffs.n_sources))
    if obj < base - 1e-12 * (1.0 + abs(base)):
        raise ConvergenceError(
            "converged stationary point loses to the no-transfer mixture",
            best=alpha,
            residual=float(np.linalg.norm(stationarity_residual(coeffs, alpha))),
        )
    return alpha
