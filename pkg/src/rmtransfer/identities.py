"""Closed-form identity suite for the deterministic-equivalent matrices.

Every identity compares an explicit-matrix evaluation at finite p against a
scalar closed form.  Two families:

* structural identities (bilinear forms, commutators, trace formulas): these
  are exact rank-one algebra, so the closed forms below include the exact
  finite-size terms and agree to rounding error (tolerance 1e-9 is generous);
* fixed-point identities (the defining quadratic of each trace fixed point,
  and the trace-vs-fixed-point consistency): these hold only at the true
  fixed point, which is what makes the suite sensitive to a corrupted delta
  (the negative-control property).

The asymptotic p -> infinity limits of the trace identities (which drop the
rank-one parts) are reported informationally as ``asymptotic_gap``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gmm import MeanPair, MixingMode, mu_beta
from .theory import ProblemSpec, build_context, det_equiv_matrices, fixed_point_residual


@dataclass(frozen=True)
class IdentityResult:
    """One identity row; ``err`` is relative for nonzero targets and
    absolute for zero targets (residuals, commutators)."""

    name: str
    matrix_value: float
    closed_form: float
    err: float
    tol: float
    passed: bool
    asymptotic_gap: float | None = None


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b), 1e-30)
    return abs(a - b) / scale


def evaluate_identities(
    spec: ProblemSpec,
    means: MeanPair,
    mode: MixingMode,
    delta_shift: float = 0.0,
) -> list[IdentityResult]:
    """Evaluate the full identity list; ``delta_shift`` perturbs the fixed
    points used to build the explicit matrices (negative control)."""
    ctx = build_context(spec)
    dq = ctx.delta_Q + delta_shift
    dr = ctx.delta_R + delta_shift
    qbar, rbar = det_equiv_matrices(spec, means, mode, delta_shift=delta_shift)
    p, n, N = spec.p, spec.n, spec.N
    gam, gt = spec.gamma, spec.gamma_tilde
    mu = means.mu
    mb = mu_beta(means, spec.beta, mode)
    mu2 = float(mu @ mu)
    mub2 = float(mb @ mb)
    inner = float(mu @ mb)  # = beta*||mu||^2 for exactly orthogonal means
    lam_q = mub2 + 1.0 + gam * (1.0 + dq)
    lam_r = mu2 + 1.0 + gt * (1.0 + dr)
    cq = (1.0 + dq) / (1.0 + gam * (1.0 + dq))
    cr = (1.0 + dr) / (1.0 + gt * (1.0 + dr))

    out: list[IdentityResult] = []

    def add(name, matrix_value, closed_form, tol, asymptotic=None):
        if closed_form == 0.0:
            err = abs(matrix_value)
        else:
            err = _rel(matrix_value, closed_form)
        gap = None if asymptotic is None else abs(matrix_value - asymptotic)
        out.append(
            IdentityResult(
                name=name,
                matrix_value=float(matrix_value),
                closed_form=float(closed_form),
                err=err,
                tol=tol,
                passed=err <= tol,
                asymptotic_gap=gap,
            )
        )

    # fixed-point residuals: the only rows that depend on delta being the
    # true root of its quadratic
    res_q = fixed_point_residual(dq, ctx.eta, gam)
    add("delta_Q quadratic residual", res_q, 0.0, 1e-12 * (1.0 + ctx.eta))
    res_r = fixed_point_residual(dr, ctx.eta_tilde, gt)
    add("delta_R quadratic residual", res_r, 0.0, 1e-12 * (1.0 + ctx.eta_tilde))

    # trace self-consistency: (1/n)Tr Qbar equals the fixed point minus an
    # exact rank-one term.  The matrix trace is cq*(p - ||mu_b||^2/lam_q)/n
    # for ANY delta, but cq*eta == delta only at the true root, so this row
    # (like the residual rows) fails under a corrupted delta.
    tr_q = float(np.trace(qbar))
    add(
        "(1/n) Tr Qbar vs fixed point",
        tr_q / n,
        dq - cq * mub2 / (n * lam_q),
        1e-10,
        asymptotic=dq,
    )
    tr_r = float(np.trace(rbar))
    add(
        "(1/N) Tr Rbar vs fixed point",
        tr_r / N,
        dr - cr * mu2 / (N * lam_r),
        1e-10,
        asymptotic=dr,
    )

    # bilinear-form identities (exact rank-one algebra)
    add("mu_b' Qbar mu_b", float(mb @ qbar @ mb), (1.0 + dq) * mub2 / lam_q, 1e-9)
    add(
        "mu_b' Qbar^2 mu_b",
        float(mb @ qbar @ qbar @ mb),
        ((1.0 + dq) / lam_q) ** 2 * mub2,
        1e-9,
    )
    add("mu' Rbar mu", float(mu @ rbar @ mu), (1.0 + dr) * mu2 / lam_r, 1e-9)
    add(
        "mu' Rbar^2 mu",
        float(mu @ rbar @ rbar @ mu),
        ((1.0 + dr) / lam_r) ** 2 * mu2,
        1e-9,
    )
    add(
        "mu' Rbar Qbar mu_b",
        float(mu @ rbar @ qbar @ mb),
        (1.0 + dr) * (1.0 + dq) * inner / (lam_r * lam_q),
        1e-9,
    )
    add(
        "mu' Rbar Qbar^2 mu_b",
        float(mu @ rbar @ qbar @ qbar @ mb),
        (1.0 + dr) / lam_r * ((1.0 + dq) / lam_q) ** 2 * inner,
        1e-9,
    )
    # the cross second-moment form; its mean-overlap bracket carries
    # inner^2*||mu_b||^2, quadratic in the overlap
    add(
        "mu' Rbar Qbar^2 Rbar mu",
        float(mu @ rbar @ qbar @ qbar @ rbar @ mu),
        ((1.0 + dr) * (1.0 + dq) / ((1.0 + gam * (1.0 + dq)) * lam_r)) ** 2
        * (mu2 + inner**2 * mub2 / lam_q**2 - 2.0 * inner**2 / lam_q),
        1e-9,
    )

    # commutators
    sig_b = np.outer(mb, mb) + np.eye(p)
    sig = np.outer(mu, mu) + np.eye(p)
    qs = qbar @ sig_b
    comm_q = np.linalg.norm(qs - sig_b @ qbar)
    add("||[Qbar, Sigma_b]||_F", comm_q, 0.0, 1e-10 * np.linalg.norm(qs))
    rs = rbar @ sig
    comm_r = np.linalg.norm(rs - sig @ rbar)
    add("||[Rbar, Sigma]||_F", comm_r, 0.0, 1e-10 * np.linalg.norm(rs))

    # trace identities, exact finite-size closed forms.  Since
    # Sigma_b = (1+dq)(Qbar^{-1} - gamma I), the normalized square trace is
    # (1/n) Tr (I - gamma Qbar)^2 with exact closed traces of Qbar, Qbar^2.
    tr_q2 = cq * cq * (p - mub2 * (2.0 * lam_q - mub2) / lam_q**2)
    lhs = float(np.trace((sig_b @ qbar) @ (sig_b @ qbar))) / (n * (1.0 + dq) ** 2)
    closed = (p - 2.0 * gam * (cq * p - cq * mub2 / lam_q) + gam * gam * tr_q2) / n
    add(
        "(1/n) Tr (Sigma_b Qbar)^2 / (1+dQ)^2",
        lhs,
        closed,
        1e-9,
        asymptotic=ctx.eta / (1.0 + gam * (1.0 + dq)) ** 2,
    )
    tr_r2 = cr * cr * (p - mu2 * (2.0 * lam_r - mu2) / lam_r**2)
    lhs = float(np.trace((sig @ rbar) @ (sig @ rbar))) / (N * (1.0 + dr) ** 2)
    closed = (p - 2.0 * gt * (cr * p - cr * mu2 / lam_r) + gt * gt * tr_r2) / N
    add(
        "(1/N) Tr (Sigma Rbar)^2 / (1+dR)^2",
        lhs,
        closed,
        1e-9,
        asymptotic=ctx.eta_tilde / (1.0 + gt * (1.0 + dr)) ** 2,
    )
    # (1/N) Tr(Rbar^2 Qbar^2): both squares are scalar + rank-one
    u = mu2 / lam_r**2 - 2.0 / lam_r
    v = mub2 / lam_q**2 - 2.0 / lam_q
    lhs = float(np.trace(rbar @ rbar @ qbar @ qbar)) / N
    closed = cr * cr * cq * cq * (p + u * mu2 + v * mub2 + u * v * inner**2) / N
    add(
        "(1/N) Tr (Rbar^2 Qbar^2)",
        lhs,
        closed,
        1e-9,
        asymptotic=ctx.eta_tilde * (cr * cq) ** 2,
    )
    return out
