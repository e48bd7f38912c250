"""Synthetic two-class Gaussian mixture data.

Samples live in R^p with identity noise covariance; the two classes sit at
+/- one common mean vector and carry labels +/-1.  A target task mean is a
mix of a reference direction ``mu`` and an orthogonal component ``mu_perp``,
with an alignment coefficient ``beta`` such that <mu_mix, mu> = beta*||mu||^2
in both supported mixing conventions.

Randomness contract: every sampling routine takes an explicit
``numpy.random.Generator``.  Use :func:`substream` to derive independent,
schedule-insensitive streams from a root seed and an index path; two calls
with the same seed and path always yield the same data regardless of how
many other streams were consumed in between.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


def substream(seed: int, *path: int) -> np.random.Generator:
    """Derive a reproducible generator from a root seed and an index path.

    The rule is ``SeedSequence(seed, spawn_key=path)``: e.g. trial ``t`` of
    experiment seed ``s`` uses ``substream(s, t)``.  Parallel workers can
    draw their own streams without any shared state.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=path))


class MixingMode(enum.Enum):
    """How the target mean combines the reference and orthogonal directions.

    ADDITIVE:        mu_mix = beta*mu + mu_perp
    SPHERICAL:       mu_mix = beta*mu + sqrt(1-beta^2)*mu_perp, |beta| <= 1,
                     which preserves the norm when ||mu|| == ||mu_perp||.
    """

    ADDITIVE = "additive"
    SPHERICAL = "spherical"


@dataclass(frozen=True)
class MeanPair:
    """A reference mean and an exactly orthogonal companion vector."""

    mu: np.ndarray
    mu_perp: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        perp = np.asarray(self.mu_perp, dtype=np.float64)
        if mu.ndim != 1 or perp.shape != mu.shape:
            raise ValueError("mu and mu_perp must be 1-d vectors of equal length")
        # scale-free cosine check; a vector whose norm underflows is
        # numerically zero and orthogonal to everything
        nm = np.linalg.norm(mu)
        nperp = np.linalg.norm(perp)
        if nm > 0.0 and nperp > 0.0:
            cosine = float((mu / nm) @ (perp / nperp))
            if abs(cosine) > 1e-10:
                raise ValueError("mu and mu_perp are not orthogonal")
        mu.setflags(write=False)
        perp.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "mu_perp", perp)

    @property
    def p(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class LabeledDataset:
    """Dense feature matrix (p rows = dimensions, m columns = samples)
    plus +/-1 labels, one per column.  Immutable after construction."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.float64).reshape(-1)
        if feats.ndim != 2:
            raise ValueError("features must be a p x m matrix")
        if feats.shape[1] != labels.shape[0]:
            raise ValueError(
                f"feature columns ({feats.shape[1]}) != labels ({labels.shape[0]})"
            )
        if not np.all(np.abs(labels) == 1.0):
            raise ValueError("labels must be exactly -1 or +1")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite entries")
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def p(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]


def make_orthogonal_means(
    p: int, norm_mu: float, norm_perp: float, rng: np.random.Generator
) -> MeanPair:
    """Draw random directions and Gram-Schmidt them into a MeanPair with the
    requested norms.  A zero norm yields the zero vector for that slot."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if norm_mu < 0 or norm_perp < 0:
        raise ValueError("norms must be nonnegative")
    if p == 1 and norm_mu > 0 and norm_perp > 0:
        raise ValueError("cannot build two orthogonal nonzero vectors in dimension 1")

    def _unit(v: np.ndarray) -> np.ndarray:
        return v / np.linalg.norm(v)

    mu = np.zeros(p)
    if norm_mu > 0:
        d1 = _unit(rng.standard_normal(p))
        mu = norm_mu * d1
    perp = np.zeros(p)
    if norm_perp > 0:
        while True:
            v = rng.standard_normal(p)
            if norm_mu > 0:
                # two projection passes keep the residual inner product at
                # rounding level even for nearly parallel draws
                v = v - (v @ d1) * d1
                v = v - (v @ d1) * d1
            if np.linalg.norm(v) > 1e-12:
                break
        perp = norm_perp * _unit(v)
    return MeanPair(mu=mu, mu_perp=perp)


def mu_beta(means: MeanPair, beta: float, mode: MixingMode) -> np.ndarray:
    """Mixed task mean.  In both modes <mu_beta, mu> = beta*||mu||^2."""
    if mode is MixingMode.ADDITIVE:
        return beta * means.mu + means.mu_perp
    if mode is MixingMode.SPHERICAL:
        if abs(beta) > 1:
            raise ValueError(f"spherical mixing requires |beta| <= 1, got {beta}")
        return beta * means.mu + np.sqrt(1.0 - beta * beta) * means.mu_perp
    raise ValueError(f"unknown mixing mode {mode!r}")


def mixed_norm_sq(means: MeanPair, beta: float, mode: MixingMode) -> float:
    """||mu_beta||^2 without materializing the vector (orthogonal parts)."""
    mu2 = float(means.mu @ means.mu)
    perp2 = float(means.mu_perp @ means.mu_perp)
    if mode is MixingMode.ADDITIVE:
        return beta * beta * mu2 + perp2
    if mode is MixingMode.SPHERICAL:
        if abs(beta) > 1:
            raise ValueError(f"spherical mixing requires |beta| <= 1, got {beta}")
        return beta * beta * mu2 + (1.0 - beta * beta) * perp2
    raise ValueError(f"unknown mixing mode {mode!r}")


def sample_class_data(
    m: int, class_mean: np.ndarray, rng: np.random.Generator
) -> LabeledDataset:
    """Sample a balanced two-class dataset around +/- ``class_mean``.

    The first ceil(m/2) columns carry label -1 (mean ``-class_mean``), the
    rest label +1; no shuffling is applied since downstream evaluation is
    permutation invariant.  Column i equals labels[i]*class_mean + z_i with
    z_i ~ N(0, I_p).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    mean = np.asarray(class_mean, dtype=np.float64).reshape(-1)
    p = mean.shape[0]
    n_neg = (m + 1) // 2
    labels = np.where(np.arange(m) < n_neg, -1.0, 1.0)
    features = mean[:, None] * labels[None, :] + rng.standard_normal((p, m))
    return LabeledDataset(features=features, labels=labels)
