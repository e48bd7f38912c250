"""Asymptotic performance theory for alpha-scaled ridge transfer.

Everything here is driven by two scalar fixed points: the normalized traces
``delta_Q`` (target side, ratio eta = p/n, regularizer gamma) and ``delta_R``
(source side, ratio eta_tilde = p/N, regularizer gamma_tilde), each the
nonnegative root of

    gamma * delta^2 + (1 + gamma - eta) * delta - eta = 0.

From these, a handful of derived scalars (lambda_Q, lambda_R, h, h_tilde)
parameterize every closed form: the decision function of the fine-tuned
classifier on a fresh test point is asymptotically Gaussian with mean
``+/- m_alpha`` and variance ``nu_alpha - m_alpha^2`` where ``nu_alpha`` is
quadratic in alpha, and the test accuracy, optimal scaling ``alpha_star``
and accuracy-nullifying scaling ``alpha_bar`` all follow in closed form.

Variance-coefficient variants
-----------------------------
The alpha^2 coefficient of ``nu_alpha`` carries a contribution from the
squared norm of the source classifier.  Several groupings of that term
circulate that drop parts of it (the 1/h_tilde amplification and/or the
quadratic completion of the norm term, or rescale it by the signal ratio).
All are implemented as named variants; Monte Carlo calibration across
sampling regimes (see tests) shows only the complete form tracks the
empirical variance (within ~1% where the others err by up to ~2x at large
alpha), so ``"full"`` is the default and the selection recorded in result
metadata everywhere.

The "full" form is exactly the arbitrary-source second moment evaluated at
the closed-form moments of a ridge-trained source:

    <E w_src, mu_mix>  = beta*||mu||^2 / lambda_R
    E ||w_src||^2      = ||mu||^2/lambda_R^2
                         + (1-h_tilde)/h_tilde
                           * ((1 - ||mu||^2/lambda_R)^2 + ||mu||^2/lambda_R^2)

which keeps the two consistent by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import DegenerateSpecError, RegimeError
from .gmm import MeanPair, MixingMode, mixed_norm_sq, mu_beta

T3_VARIANTS = ("full", "no-quadratic", "no-quadratic-no-gain", "signal-scaled-tail")
DEFAULT_T3_VARIANT = "full"


# ---------------------------------------------------------------------------
# problem description and derived scalar context
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    """All scalar model parameters defining one theory instance.

    p: feature dimension; n: target samples; N: source samples.
    norm_mu / norm_mu_beta: Euclidean norms of the source and target means.
    beta: alignment, <mu_target, mu_source> = beta * ||mu_source||^2.
    gamma / gamma_tilde: target / source ridge regularizers (both > 0).
    """

    p: int
    n: int
    N: int
    norm_mu: float
    norm_mu_beta: float
    beta: float
    gamma: float
    gamma_tilde: float

    def __post_init__(self):
        if min(self.p, self.n, self.N) < 1:
            raise ValueError("p, n, N must be positive integers")
        if self.norm_mu < 0 or self.norm_mu_beta < 0:
            raise ValueError("mean norms must be nonnegative")
        if self.gamma <= 0 or self.gamma_tilde <= 0:
            raise ValueError("gamma and gamma_tilde must be positive")
        # Cauchy-Schwarz on the orthogonal decomposition of the target mean
        if abs(self.beta) * self.norm_mu > self.norm_mu_beta * (1 + 1e-10) + 1e-15:
            raise ValueError(
                "inconsistent spec: |beta|*||mu|| exceeds ||mu_beta||"
            )

    @classmethod
    def from_means(
        cls,
        p: int,
        n: int,
        N: int,
        means: MeanPair,
        beta: float,
        mode: MixingMode,
        gamma: float,
        gamma_tilde: float,
    ) -> "ProblemSpec":
        return cls(
            p=p,
            n=n,
            N=N,
            norm_mu=float(np.linalg.norm(means.mu)),
            norm_mu_beta=math.sqrt(mixed_norm_sq(means, beta, mode)),
            beta=beta,
            gamma=gamma,
            gamma_tilde=gamma_tilde,
        )


@dataclass(frozen=True)
class ScalarContext:
    """Derived scalars shared by every closed form (see module docstring)."""

    eta: float
    eta_tilde: float
    delta_Q: float
    delta_R: float
    lambda_Q: float
    lambda_R: float
    h: float
    h_tilde: float


def delta_fixed_point(eta: float, gamma: float) -> float:
    """Nonnegative root of gamma*d^2 + (1+gamma-eta)*d - eta = 0.

    The root scales like eta/gamma, so a plain double-precision closed form
    cannot keep the (absolutely scaled) residual below 1e-12*(1+eta) at
    small gamma.  The cancellation-free branch is therefore evaluated in
    extended precision and polished with one Newton step before rounding.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    e = np.longdouble(eta)
    g = np.longdouble(gamma)
    b = e - g - 1.0
    s = np.sqrt(b * b + 4.0 * e * g)
    if b <= 0.0:
        d = 2.0 * e / (s - b) if s - b > 0 else np.longdouble(0.0)
    else:
        d = (b + s) / (2.0 * g)
    slope = 2.0 * g * d + (1.0 + g - e)
    if slope != 0.0:
        d -= (g * d * d + (1.0 + g - e) * d - e) / slope
    return float(max(d, 0.0))


def fixed_point_residual(delta: float, eta: float, gamma: float) -> float:
    """Defining-quadratic residual, evaluated in extended precision so that
    the reported value reflects the root, not evaluation rounding; scaled
    tolerance is 1e-12*(1+eta)."""
    d = np.longdouble(delta)
    e = np.longdouble(eta)
    g = np.longdouble(gamma)
    return float(g * d * d + (1.0 + g - e) * d - e)


def build_context(spec: ProblemSpec) -> ScalarContext:
    """Evaluate the fixed points and derived scalars for one spec."""
    eta = spec.p / spec.n
    eta_tilde = spec.p / spec.N
    dq = delta_fixed_point(eta, spec.gamma)
    dr = delta_fixed_point(eta_tilde, spec.gamma_tilde)
    lam_q = spec.norm_mu_beta**2 + 1.0 + spec.gamma * (1.0 + dq)
    lam_r = spec.norm_mu**2 + 1.0 + spec.gamma_tilde * (1.0 + dr)
    h = 1.0 - eta / (1.0 + spec.gamma * (1.0 + dq)) ** 2
    h_tilde = 1.0 - eta_tilde / (1.0 + spec.gamma_tilde * (1.0 + dr)) ** 2
    # h > 0 holds identically at the exact fixed point; a violation means the
    # inputs were not finite or the context was constructed by hand
    if not (h > 0.0):
        raise RegimeError(f"h = {h} <= 0: variance formulas undefined")
    if not (h_tilde > 0.0):
        raise RegimeError(f"h_tilde = {h_tilde} <= 0: variance formulas undefined")
    for d, e, g, nm in ((dq, eta, spec.gamma, "target"), (dr, eta_tilde, spec.gamma_tilde, "source")):
        if d < 0 or abs(fixed_point_residual(d, e, g)) > 1e-12 * (1.0 + e):
            raise RegimeError(f"{nm} fixed point failed its residual check")
    return ScalarContext(
        eta=eta,
        eta_tilde=eta_tilde,
        delta_Q=dq,
        delta_R=dr,
        lambda_Q=lam_q,
        lambda_R=lam_r,
        h=h,
        h_tilde=h_tilde,
    )


# ---------------------------------------------------------------------------
# decision-function statistics (ridge-trained source)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecisionStats:
    """Asymptotic mean and second moment of the decision function.

    The score on a class-a test point is Gaussian with mean (+/-) m_alpha
    and variance nu_alpha - m_alpha^2 (positive in any valid regime).
    """

    m_alpha: float
    nu_alpha: float
    variance: float

    def __post_init__(self):
        if not (self.variance > 0.0):
            raise RegimeError(
                f"nonpositive predicted variance {self.variance}; "
                "spec is outside the valid regime"
            )


@dataclass(frozen=True)
class SourceSummary:
    """The two scalars a fixed source classifier contributes to the theory:
    inner = <w_src, mu_target>, norm_sq = ||w_src||^2."""

    inner: float
    norm_sq: float

    def __post_init__(self):
        if self.norm_sq < 0:
            raise ValueError("norm_sq must be nonnegative")


def t_coefficients(
    ctx: ScalarContext, spec: ProblemSpec, variant: str = DEFAULT_T3_VARIANT
) -> tuple[float, float, float]:
    """Coefficients (T1, T2, T3) of nu_alpha = T1 + alpha*T2 + alpha^2*T3."""
    mu2 = spec.norm_mu**2
    mub2 = spec.norm_mu_beta**2
    beta = spec.beta
    g = spec.gamma * (1.0 + ctx.delta_Q)
    lq, lr, h, ht = ctx.lambda_Q, ctx.lambda_R, ctx.h, ctx.h_tilde
    t1 = mub2 / (h * lq) * ((mub2 + 1.0) / lq - 2.0 * (1.0 - h)) + (1.0 - h) / h
    t2 = 2.0 * g * beta * mu2 / (lr * lq) * (1.0 - g / (h * lq))
    # psi = (1-h)/eta continued to eta = 0 (it equals 1/(1+g)^2 identically)
    psi = 1.0 / (1.0 + g) ** 2
    x = mu2 / lr        # signal ratio of the source problem
    y = mu2 / lr**2
    main = y * (beta**2 * mu2 / lq**2
                + psi * (1.0 + beta**2 * mu2 * mub2 / lq**2 - 2.0 * beta**2 * mu2 / lq))
    gain = (1.0 - ht) / ht
    if variant == "full":
        extra = psi * gain * ((1.0 - x) ** 2 + y)
    elif variant == "no-quadratic":
        extra = psi * gain * (1.0 - 2.0 * x)
    elif variant == "no-quadratic-no-gain":
        extra = psi * (1.0 - ht) * (1.0 - 2.0 * x)
    elif variant == "signal-scaled-tail":
        extra = y * psi * (1.0 - ht) * (1.0 - 2.0 * x)
    else:
        raise ValueError(f"unknown T3 variant {variant!r}; choose from {T3_VARIANTS}")
    t3 = g * g / h * (main + extra)
    # the full form is a sum of nonnegative pieces; the truncated variants
    # can go negative in extreme regimes, which poisons every quadratic
    if t3 < 0.0 or (t3 == 0.0 and mu2 > 0.0):
        raise RegimeError(
            f"nonpositive quadratic variance coefficient {t3} under variant {variant!r}"
        )
    return t1, t2, t3


def decision_stats(
    ctx: ScalarContext,
    spec: ProblemSpec,
    alpha: float,
    variant: str = DEFAULT_T3_VARIANT,
) -> DecisionStats:
    """Asymptotic decision-function statistics at scaling ``alpha``."""
    mub2 = spec.norm_mu_beta**2
    g = spec.gamma * (1.0 + ctx.delta_Q)
    m = (mub2 + alpha * spec.beta * g * spec.norm_mu**2 / ctx.lambda_R) / ctx.lambda_Q
    t1, t2, t3 = t_coefficients(ctx, spec, variant)
    nu = t1 + alpha * t2 + alpha * alpha * t3
    return DecisionStats(m_alpha=m, nu_alpha=nu, variance=nu - m * m)


def gaussian_upper_tail(x: float) -> float:
    """P(Z > x) for standard normal Z, via the complementary error function
    (absolute error well below 1e-12 over the whole real line)."""
    return 0.5 * erfc(x / math.sqrt(2.0))


def theoretical_accuracy(stats: DecisionStats) -> float:
    """Asymptotic test accuracy 1 - P(Z > m/sqrt(var))."""
    if not (stats.variance > 0.0):
        raise RegimeError("variance must be positive")
    return 1.0 - gaussian_upper_tail(stats.m_alpha / math.sqrt(stats.variance))


def accuracy_at(
    ctx: ScalarContext,
    spec: ProblemSpec,
    alpha: float,
    variant: str = DEFAULT_T3_VARIANT,
) -> float:
    return theoretical_accuracy(decision_stats(ctx, spec, alpha, variant))


def optimal_alpha(
    ctx: ScalarContext, spec: ProblemSpec, variant: str = DEFAULT_T3_VARIANT
) -> float:
    """Accuracy-maximizing scaling.

    Returns 0.0 when beta*||mu|| == 0 (an unaligned or empty source carries
    no transferable signal, so not fine-tuning is optimal).
    """
    if spec.beta == 0.0 or spec.norm_mu == 0.0:
        return 0.0
    mu2 = spec.norm_mu**2
    mub2 = spec.norm_mu_beta**2
    g = spec.gamma * (1.0 + ctx.delta_Q)
    t1, t2, t3 = t_coefficients(ctx, spec, variant)
    num = ctx.lambda_R * t2 * mub2 - 2.0 * spec.beta * g * t1 * mu2
    den = spec.beta * g * t2 * mu2 - 2.0 * ctx.lambda_R * t3 * mub2
    if den == 0.0 or abs(den) < 1e-300:
        raise DegenerateSpecError("optimal alpha denominator vanishes")
    return num / den


def worst_alpha(ctx: ScalarContext, spec: ProblemSpec) -> float:
    """Scaling that drives the decision mean to zero (accuracy 1/2)."""
    if spec.beta == 0.0 or spec.norm_mu == 0.0 or spec.norm_mu_beta == 0.0:
        raise DegenerateSpecError(
            "worst-case scaling undefined when beta*||mu||*||mu_beta|| = 0"
        )
    g = spec.gamma * (1.0 + ctx.delta_Q)
    return -ctx.lambda_R * spec.norm_mu_beta**2 / (spec.beta * g * spec.norm_mu**2)


# ---------------------------------------------------------------------------
# arbitrary (fixed) source classifier
# ---------------------------------------------------------------------------

def _check_source(src: SourceSummary, spec: ProblemSpec) -> None:
    bound = src.norm_sq * spec.norm_mu_beta**2
    if src.inner**2 > bound * (1.0 + 1e-10) + 1e-300:
        raise ValueError(
            "source summary violates Cauchy-Schwarz: inner^2 > ||w||^2*||mu_beta||^2"
        )


def t_coefficients_arbitrary(
    ctx: ScalarContext, spec: ProblemSpec, src: SourceSummary
) -> tuple[float, float, float]:
    """Second-moment coefficients for a fixed source classifier, given only
    its inner product with the target mean and its squared norm."""
    _check_source(src, spec)
    mub2 = spec.norm_mu_beta**2
    g = spec.gamma * (1.0 + ctx.delta_Q)
    lq, h = ctx.lambda_Q, ctx.h
    s, q = src.inner, src.norm_sq
    psi = 1.0 / (1.0 + g) ** 2  # == (1-h)/eta, valid down to eta = 0
    t1 = mub2 / (h * lq) * ((mub2 + 1.0) / lq - 2.0 * (1.0 - h)) + (1.0 - h) / h
    t2 = 2.0 * g * s / (h * lq) * ((mub2 + 1.0) / lq - (1.0 - h))
    t3 = g * g / h * (s * s / lq**2 + psi * q + psi * s * s / lq * (mub2 / lq - 2.0))
    return t1, t2, t3


def decision_stats_arbitrary(
    ctx: ScalarContext, spec: ProblemSpec, src: SourceSummary, alpha: float
) -> DecisionStats:
    """Decision statistics when fine-tuning a fixed source classifier."""
    g = spec.gamma * (1.0 + ctx.delta_Q)
    m = (spec.norm_mu_beta**2 + alpha * g * src.inner) / ctx.lambda_Q
    t1, t2, t3 = t_coefficients_arbitrary(ctx, spec, src)
    nu = t1 + alpha * t2 + alpha * alpha * t3
    return DecisionStats(m_alpha=m, nu_alpha=nu, variance=nu - m * m)


def optimal_alpha_arbitrary(
    ctx: ScalarContext, spec: ProblemSpec, src: SourceSummary
) -> float:
    """Accuracy-maximizing scaling for a fixed source classifier.

    Algebraically this is the unique root of the (linear-in-alpha)
    stationarity of m/sqrt(nu - m^2); the compact closed form below, with
    the target-side lambda_Q scalar, matches the direct stationary solve to
    rounding error (checked by the finite-difference tests).
    """
    _check_source(src, spec)
    s, q = src.inner, src.norm_sq
    if s == 0.0:
        return 0.0
    mub2 = spec.norm_mu_beta**2
    g = spec.gamma * (1.0 + ctx.delta_Q)
    lq = ctx.lambda_Q
    den = g * (lq * mub2 * q - (lq - ctx.eta) * s * s)
    if den == 0.0:
        raise DegenerateSpecError("optimal alpha denominator vanishes")
    return ctx.eta * (1.0 + g) * s / den


def worst_alpha_arbitrary(
    ctx: ScalarContext, spec: ProblemSpec, src: SourceSummary
) -> float:
    """Scaling that zeroes the decision mean for a fixed source."""
    if src.inner == 0.0:
        raise DegenerateSpecError(
            "worst-case scaling undefined for a source orthogonal to the target mean"
        )
    g = spec.gamma * (1.0 + ctx.delta_Q)
    return -spec.norm_mu_beta**2 / (g * src.inner)


def ridge_source_summary(ctx: ScalarContext, spec: ProblemSpec) -> SourceSummary:
    """Closed-form moments of a ridge-trained source classifier.

    Plugging this summary into the arbitrary-source statistics reproduces
    the ridge-source theory exactly (the consistency is structural for the
    default variance variant).
    """
    x = spec.norm_mu**2 / ctx.lambda_R
    y = spec.norm_mu**2 / ctx.lambda_R**2
    gain = (1.0 - ctx.h_tilde) / ctx.h_tilde
    return SourceSummary(
        inner=spec.beta * spec.norm_mu**2 / ctx.lambda_R,
        norm_sq=y + gain * ((1.0 - x) ** 2 + y),
    )


# ---------------------------------------------------------------------------
# explicit deterministic-equivalent matrices (test/validation utility)
# ---------------------------------------------------------------------------

def det_equiv_matrices(
    spec: ProblemSpec,
    means: MeanPair,
    mode: MixingMode,
    delta_shift: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Explicit p x p deterministic equivalents of the two train-data
    resolvents; intended for the identity/property suite at small p.

    ``delta_shift`` perturbs both fixed points (negative-control hook for
    the identity suite's sensitivity check).
    """
    p = means.p
    if p > 2000:
        raise ValueError("det_equiv_matrices is a small-p utility")
    ctx = build_context(spec)
    dq = ctx.delta_Q + delta_shift
    dr = ctx.delta_R + delta_shift
    mb = mu_beta(means, spec.beta, mode)
    eye = np.eye(p)
    qbar = np.linalg.inv((np.outer(mb, mb) + eye) / (1.0 + dq) + spec.gamma * eye)
    rbar = np.linalg.inv(
        (np.outer(means.mu, means.mu) + eye) / (1.0 + dr) + spec.gamma_tilde * eye
    )
    return qbar, rbar
