"""Turn labeled datasets into theory inputs: standardization, class-mean
estimation with high-dimensional bias correction, alignment estimation, and
the plug-in optimal scaling.

Estimators (identity noise covariance assumed by the model):

* per-dataset mean:  mu_hat = (mean_+ - mean_-)/2 from class sample means;
* squared norm:      ||mu||^2_hat = ||mu_hat||^2 - (p/4)(1/m_+ + 1/m_-),
  removing the E||noise||^2 inflation (clamped at zero, flagged);
* alignment:         beta_hat = <mu_hat_src, mu_hat_tgt> / ||mu||^2_hat,
  a cross-dataset inner product so the two noise draws are independent and
  the numerator is unbiased.

When noise pushes |beta_hat|*||mu||_hat above ||mu_beta||_hat (equivalently
a negative orthogonal-component norm), beta_hat is shrunk to the boundary
and the estimate flagged; downstream treats fully clamped estimates as
no-transfer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gmm import LabeledDataset
from .theory import ProblemSpec, build_context, optimal_alpha

NO_TRANSFER_BETA = 0.01


@dataclass(frozen=True)
class TransformRecord:
    """Per-feature affine transform (x - shift)/scale fit on one dataset."""

    shift: np.ndarray
    scale: np.ndarray

    def apply(self, data: LabeledDataset) -> LabeledDataset:
        feats = (data.features - self.shift[:, None]) / self.scale[:, None]
        return LabeledDataset(features=feats, labels=data.labels)


def standardize(
    train: LabeledDataset, others: Sequence[LabeledDataset] = ()
) -> tuple[LabeledDataset, list[LabeledDataset], TransformRecord]:
    """Standard-scale using statistics of ``train`` only; constant features
    are centered but not rescaled (scale pinned to 1)."""
    if train.m == 0:
        raise ValueError("cannot standardize an empty training set")
    shift = train.features.mean(axis=1)
    std = train.features.std(axis=1)
    scale = np.where(std > 1e-12, std, 1.0)
    record = TransformRecord(shift=shift, scale=scale)
    return record.apply(train), [record.apply(d) for d in others], record


def _class_mean_estimate(data: LabeledDataset) -> tuple[np.ndarray, float, int, int]:
    pos = data.labels > 0
    m_pos = int(pos.sum())
    m_neg = data.m - m_pos
    if m_pos == 0 or m_neg == 0:
        raise ValueError("dataset must contain both classes")
    mu_hat = (data.features[:, pos].mean(axis=1) - data.features[:, ~pos].mean(axis=1)) / 2.0
    bias = data.p / 4.0 * (1.0 / m_pos + 1.0 / m_neg)
    return mu_hat, bias, m_pos, m_neg


@dataclass(frozen=True)
class EstimatedSpec:
    """Data-driven counterparts of the theory's mean geometry.

    ``inner_raw`` is the raw cross-dataset inner product <mu_hat_s, mu_hat_t>;
    ``clamped`` records that at least one bias-corrected squared norm hit the
    zero clamp; ``beta_clamped`` that beta_hat was shrunk to the
    Cauchy-Schwarz boundary.
    """

    p: int
    m_source: int
    m_target: int
    norm_mu_hat: float
    norm_mu_beta_hat: float
    beta_hat: float
    inner_raw: float
    clamped: bool
    beta_clamped: bool

    @property
    def no_transfer(self) -> bool:
        return self.clamped or abs(self.beta_hat) < NO_TRANSFER_BETA

    def to_problem_spec(
        self,
        gamma: float,
        gamma_tilde: float,
        n: int | None = None,
        N: int | None = None,
    ) -> ProblemSpec:
        """Theory spec at the estimated geometry.  ``n``/``N`` default to the
        estimation sample counts but can be overridden when training will
        use a different sample size than estimation did (the usual case
        when the geometry is estimated on a full corpus and fine-tuning
        subsamples it)."""
        return ProblemSpec(
            p=self.p,
            n=self.m_target if n is None else n,
            N=self.m_source if N is None else N,
            norm_mu=self.norm_mu_hat,
            norm_mu_beta=self.norm_mu_beta_hat,
            beta=self.beta_hat,
            gamma=gamma,
            gamma_tilde=gamma_tilde,
        )


def estimate_spec(source: LabeledDataset, target: LabeledDataset) -> EstimatedSpec:
    """Estimate ||mu||, ||mu_beta|| and the alignment from two datasets."""
    if source.p != target.p:
        raise ValueError("source and target dimension mismatch")
    mu_s, bias_s, *_ = _class_mean_estimate(source)
    mu_t, bias_t, *_ = _class_mean_estimate(target)
    mu2_raw = float(mu_s @ mu_s) - bias_s
    mub2_raw = float(mu_t @ mu_t) - bias_t
    inner = float(mu_s @ mu_t)
    clamped = mu2_raw <= 0.0 or mub2_raw <= 0.0
    mu2 = max(mu2_raw, 0.0)
    mub2 = max(mub2_raw, 0.0)
    beta_hat = inner / mu2 if mu2 > 0.0 else 0.0
    beta_clamped = False
    # keep |beta|*||mu|| <= ||mu_beta||: equivalent to clamping the implied
    # orthogonal component's squared norm at zero
    if mu2 > 0.0 and beta_hat**2 * mu2 > mub2:
        beta_hat = math.copysign(math.sqrt(mub2 / mu2), beta_hat)
        beta_clamped = True
    return EstimatedSpec(
        p=source.p,
        m_source=source.m,
        m_target=target.m,
        norm_mu_hat=math.sqrt(mu2),
        norm_mu_beta_hat=math.sqrt(mub2),
        beta_hat=beta_hat,
        inner_raw=inner,
        clamped=clamped,
        beta_clamped=beta_clamped,
    )


def plugin_optimal_alpha(
    source: LabeledDataset,
    target: LabeledDataset,
    gamma: float,
    gamma_tilde: float,
    n: int | None = None,
    N: int | None = None,
) -> tuple[float, EstimatedSpec]:
    """Plug the estimated spec into the optimal-scaling closed form.

    Sample counts default to the given datasets; pass ``n`` (and/or ``N``)
    when fine-tuning will see fewer samples than the estimation corpus.
    Falls back to alpha = 0 (no transfer) when the corrected norms clamp to
    zero or the estimated alignment is negligible.
    """
    est = estimate_spec(source, target)
    if est.no_transfer:
        return 0.0, est
    spec = est.to_problem_spec(gamma, gamma_tilde, n=n, N=N)
    ctx = build_context(spec)
    return optimal_alpha(ctx, spec), est
