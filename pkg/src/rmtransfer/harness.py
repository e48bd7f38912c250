"""Configuration-driven experiment runner.

One strict JSON document describes an experiment; every runner returns a
:class:`ResultTable` that serializes to CSV (header row, data rows, trailing
``# key=value`` metadata block) or to a single JSON object with the same
fields.  Runs are byte-reproducible: all randomness flows through
per-(seed, trial) substreams, so parallel and serial execution aggregate to
identical tables.

Experiment means are placed on coordinate axes (the data model is
rotation invariant, so this loses nothing and keeps runs deterministic
without a dedicated geometry seed).
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats as spstats

from . import dataio
from .errors import ConvergenceError, DegenerateSpecError, RegimeError
from .estimation import estimate_spec, standardize
from .gmm import LabeledDataset, MeanPair, MixingMode, mu_beta, sample_class_data, substream
from .multisource import multi_source_coeffs, solve_multi_alpha
from .ridge import (
    LinearClassifier,
    empirical_accuracy,
    fine_tune_direction,
    fine_tune_multi,
    train_ridge,
)
from .identities import evaluate_identities
from .theory import (
    DEFAULT_T3_VARIANT,
    T3_VARIANTS,
    ProblemSpec,
    build_context,
    decision_stats,
    optimal_alpha,
    theoretical_accuracy,
    worst_alpha,
)

KINDS = (
    "sweep-alpha",
    "distribution",
    "optimal-curve",
    "real-data",
    "multi-source",
    "identity-suite",
)


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to CLI exit code 2)."""


# ---------------------------------------------------------------------------
# result table
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    text = str(value)
    if "," in text or "\n" in text:
        raise ValueError(f"cell value may not contain commas/newlines: {text!r}")
    return text


@dataclass
class ResultTable:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} cells, got {len(values)}")
        self.rows.append(tuple(values))

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        lines += [",".join(_fmt(v) for v in row) for row in self.rows]
        lines += [f"# {k}={self.metadata[k]}" for k in sorted(self.metadata)]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "columns": list(self.columns),
            "rows": [[_fmt(v) for v in row] for row in self.rows],
            "metadata": {k: str(v) for k, v in sorted(self.metadata.items())},
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"

    def column(self, name: str) -> list:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_GRID_KEYS = {"min", "max", "step"}

_COMMON_REQUIRED = {"kind", "seeds"}
_REQUIRED = {
    "sweep-alpha": {"p", "n", "N", "norm_mu", "norm_mu_perp", "beta", "gamma",
                    "gamma_tilde", "alpha_grid", "trials"},
    "distribution": {"p", "n", "N", "norm_mu", "norm_mu_perp", "gamma",
                     "gamma_tilde", "alpha_values", "beta_values", "trials"},
    "optimal-curve": {"p_list", "n", "N", "norm_mu", "norm_mu_perp", "gamma",
                      "gamma_tilde", "beta_grid"},
    "real-data": {"source_path", "target_path", "n", "gamma", "gamma_tilde"},
    "multi-source": {"p", "n", "norm_mu_beta", "gamma", "gamma_tilde",
                     "sources", "trials"},
    "identity-suite": {"p", "n", "N", "norm_mu", "norm_mu_perp", "beta",
                       "gamma", "gamma_tilde"},
}
_OPTIONAL = {
    "sweep-alpha": {"mixing", "test_size", "t3_variant"},
    "distribution": {"mixing", "points_per_class", "bins", "t3_variant"},
    "optimal-curve": {"mixing", "t3_variant"},
    "real-data": {"scale_on", "t3_variant"},
    "multi-source": {"test_size", "t3_variant"},
    "identity-suite": {"mixing", "delta_shift"},
}
_SOURCE_KEYS = {"samples", "norm_mu", "align"}


@dataclass
class ExperimentConfig:
    kind: str
    raw: dict

    def __getitem__(self, key):
        return self.raw[key]

    def get(self, key, default=None):
        return self.raw.get(key, default)

    @property
    def seeds(self) -> list[int]:
        return list(self.raw["seeds"])

    @property
    def t3_variant(self) -> str:
        return self.raw.get("t3_variant", DEFAULT_T3_VARIANT)

    @property
    def mixing(self) -> MixingMode:
        name = self.raw.get("mixing", "spherical")
        try:
            return MixingMode(name)
        except ValueError:
            raise ConfigError(f"unknown mixing mode {name!r}") from None

    def sha256(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def grid_values(grid: dict) -> np.ndarray:
    lo, hi, step = grid["min"], grid["max"], grid["step"]
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def parse_config(text: str, expected_kind: str | None = None) -> ExperimentConfig:
    """Parse and strictly validate a config document.  Unknown keys are
    errors so a typo cannot silently drop a parameter from a sweep."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    if expected_kind is not None and kind != expected_kind:
        raise ConfigError(f"config kind {kind!r} does not match subcommand {expected_kind!r}")
    allowed = _COMMON_REQUIRED | _REQUIRED[kind] | _OPTIONAL[kind]
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys for {kind}: {sorted(unknown)}")
    missing = (_COMMON_REQUIRED | _REQUIRED[kind]) - set(raw)
    if missing:
        raise ConfigError(f"missing config keys for {kind}: {sorted(missing)}")

    seeds = raw["seeds"]
    if (not isinstance(seeds, list) or not seeds
            or not all(isinstance(s, int) for s in seeds)):
        raise ConfigError("seeds must be a nonempty list of integers")
    if "trials" in raw and (not isinstance(raw["trials"], int) or raw["trials"] < 1):
        raise ConfigError("trials must be an integer >= 1")
    for key in ("alpha_grid", "beta_grid"):
        if key in raw:
            grid = raw[key]
            if not isinstance(grid, dict) or set(grid) != _GRID_KEYS:
                raise ConfigError(f"{key} must be an object with keys {sorted(_GRID_KEYS)}")
            if grid["step"] <= 0:
                raise ConfigError(f"{key}.step must be > 0")
            if grid["max"] < grid["min"]:
                raise ConfigError(f"{key} is empty (max < min)")
    for key in ("alpha_values", "beta_values", "p_list"):
        if key in raw and (not isinstance(raw[key], list) or not raw[key]):
            raise ConfigError(f"{key} must be a nonempty list")
    if "t3_variant" in raw and raw["t3_variant"] not in T3_VARIANTS:
        raise ConfigError(f"t3_variant must be one of {T3_VARIANTS}")
    if "scale_on" in raw and raw["scale_on"] not in ("source", "target", "pooled", "none"):
        raise ConfigError("scale_on must be source|target|pooled|none")
    if kind == "multi-source":
        sources = raw["sources"]
        if not isinstance(sources, list) or not sources:
            raise ConfigError("sources must be a nonempty list")
        for i, src in enumerate(sources):
            if not isinstance(src, dict) or set(src) != _SOURCE_KEYS:
                raise ConfigError(
                    f"sources[{i}] must be an object with keys {sorted(_SOURCE_KEYS)}"
                )
            if src["samples"] < 1:
                raise ConfigError(f"sources[{i}].samples must be >= 1")
            if abs(src["align"]) > 1:
                raise ConfigError(f"sources[{i}].align must lie in [-1, 1]")
    if kind == "identity-suite" and raw["p"] > 500:
        raise ConfigError("identity-suite requires p <= 500")
    return ExperimentConfig(kind=kind, raw=raw)


def load_config(path, expected_kind: str | None = None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), expected_kind)


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _parallel_map(fn: Callable, items: Sequence, threads: int) -> list:
    """Order-preserving map; results (hence aggregates) are identical for
    any thread count because every task derives its own substream."""
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _axis_means(p: int, norm_mu: float, norm_perp: float) -> MeanPair:
    if p < 2 and norm_mu > 0 and norm_perp > 0:
        raise ConfigError("p must be >= 2 for a nonzero orthogonal component")
    mu = np.zeros(p)
    perp = np.zeros(p)
    if norm_mu > 0:
        mu[0] = norm_mu
    if norm_perp > 0:
        perp[1] = norm_perp
    return MeanPair(mu=mu, mu_perp=perp)


def _base_metadata(config: ExperimentConfig, **extra) -> dict:
    md = {
        "config_sha256": config.sha256(),
        "kind": config.kind,
        "seeds": ";".join(str(s) for s in config.seeds),
        "t3_variant": config.t3_variant if config.kind != "identity-suite" else "n/a",
        "generator": "rmtransfer 0.1.0",
    }
    md.update(extra)
    return md


def _default_test_size(n: int) -> int:
    # asymptotic-accuracy statements want a large fresh test set
    return max(10 * n, 10_000)


# ---------------------------------------------------------------------------
# sweep-alpha
# ---------------------------------------------------------------------------

def run_sweep_alpha(
    config: ExperimentConfig, threads: int = 1, fixed_source: bool = False
) -> ResultTable:
    """Theoretical and Monte Carlo accuracy on an alpha grid, with the
    closed-form optimum and null scaling appended as marked rows."""
    p, n, N = config["p"], config["n"], config["N"]
    means = _axis_means(p, config["norm_mu"], config["norm_mu_perp"])
    mode = config.mixing
    beta = config["beta"]
    spec = ProblemSpec.from_means(p, n, N, means, beta, mode,
                                  config["gamma"], config["gamma_tilde"])
    ctx = build_context(spec)
    variant = config.t3_variant
    test_size = config.get("test_size", _default_test_size(n))

    alphas = [round(float(a), 12) for a in grid_values(config["alpha_grid"])]
    markers: dict[float, set[str]] = {}

    def mark(value: float, tag: str):
        key = round(float(value), 12)
        markers.setdefault(key, set()).add(tag)
        if key not in alphas:
            alphas.append(key)

    mark(0.0, "zero")
    mark(1.0, "one")
    try:
        mark(optimal_alpha(ctx, spec, variant), "opt")
    except (DegenerateSpecError, RegimeError):
        pass
    try:
        mark(worst_alpha(ctx, spec), "worst")
    except (DegenerateSpecError, RegimeError):
        pass
    alphas = sorted(set(alphas))
    alpha_arr = np.array(alphas)

    mu_b = mu_beta(means, beta, mode)
    seeds = config.seeds
    trials = config["trials"]
    tasks = [(s, t) for s in seeds for t in range(trials)]
    fixed_w = None
    if fixed_source:
        src = sample_class_data(N, means.mu, substream(seeds[0], 0, 0))
        fixed_w = train_ridge(src, config["gamma_tilde"])

    def one_trial(task):
        seed, t = task
        if fixed_w is None:
            src = sample_class_data(N, means.mu, substream(seed, t, 0))
            w_src = train_ridge(src, config["gamma_tilde"])
        else:
            w_src = fixed_w
        target = sample_class_data(n, mu_b, substream(seed, t, 1))
        w0, direction = fine_tune_direction(target, config["gamma"], w_src)
        test = sample_class_data(test_size, mu_b, substream(seed, t, 2))
        s_base = w0.weights @ test.features
        s_dir = direction @ test.features
        scores = s_base[None, :] + alpha_arr[:, None] * s_dir[None, :]
        preds = np.where(scores >= 0.0, 1.0, -1.0)
        return (preds == test.labels[None, :]).mean(axis=1)

    acc = np.array(_parallel_map(one_trial, tasks, threads))  # (tasks, alphas)
    emp_mean = acc.mean(axis=0)
    emp_sd = acc.std(axis=0, ddof=1) if acc.shape[0] > 1 else np.zeros(len(alphas))
    emp_se = emp_sd / np.sqrt(acc.shape[0])

    table = ResultTable(
        columns=("alpha", "marker", "acc_theory", "m_theory", "var_theory",
                 "acc_emp_mean", "acc_emp_stderr", "trials", "status"),
        metadata=_base_metadata(
            config,
            test_size=test_size,
            fixed_source="true" if fixed_source else "false",
        ),
    )
    for i, a in enumerate(alphas):
        tag = "+".join(sorted(markers.get(round(a, 12), ())))
        try:
            st = decision_stats(ctx, spec, a, variant)
            table.add(a, tag, theoretical_accuracy(st), st.m_alpha, st.variance,
                      emp_mean[i], emp_se[i], acc.shape[0], "ok")
        except RegimeError:
            table.add(a, tag, None, None, None,
                      emp_mean[i], emp_se[i], acc.shape[0], "regime_error")
    return table


# ---------------------------------------------------------------------------
# distribution
# ---------------------------------------------------------------------------

def run_distribution(config: ExperimentConfig, threads: int = 1,
                     fixed_source: bool = False) -> ResultTable:
    """Class-conditional decision-score histograms with Gaussian overlay
    parameters and a Kolmogorov-Smirnov distance per (beta, alpha, class)."""
    p, n, N = config["p"], config["n"], config["N"]
    means = _axis_means(p, config["norm_mu"], config["norm_mu_perp"])
    mode = config.mixing
    variant = config.t3_variant
    alphas = [float(a) for a in config["alpha_values"]]
    betas = [float(b) for b in config["beta_values"]]
    pts = config.get("points_per_class", 100)
    nbins = config.get("bins", 41)
    seeds = config.seeds
    trials = config["trials"]

    specs = {
        b: ProblemSpec.from_means(p, n, N, means, b, mode,
                                  config["gamma"], config["gamma_tilde"])
        for b in betas
    }
    contexts = {b: build_context(specs[b]) for b in betas}

    fixed_w = None
    if fixed_source:
        src = sample_class_data(N, means.mu, substream(seeds[0], 0, 0))
        fixed_w = train_ridge(src, config["gamma_tilde"])

    tasks = [(bi, s, t) for bi in range(len(betas)) for s in seeds for t in range(trials)]

    def one_trial(task):
        bi, seed, t = task
        b = betas[bi]
        mu_b = mu_beta(means, b, mode)
        if fixed_w is None:
            src = sample_class_data(N, means.mu, substream(seed, bi, t, 0))
            w_src = train_ridge(src, config["gamma_tilde"])
        else:
            w_src = fixed_w
        target = sample_class_data(n, mu_b, substream(seed, bi, t, 1))
        w0, direction = fine_tune_direction(target, config["gamma"], w_src)
        test = sample_class_data(2 * pts, mu_b, substream(seed, bi, t, 2))
        out = {}
        for a in alphas:
            w = w0.weights + a * direction
            scores = w @ test.features
            out[a] = (scores[test.labels < 0], scores[test.labels > 0])
        return out

    results = _parallel_map(one_trial, tasks, threads)

    table = ResultTable(
        columns=("beta", "alpha", "class_label", "bin_lo", "bin_hi", "count",
                 "total", "m_theory", "var_theory", "ks_stat", "status"),
        metadata=_base_metadata(
            config,
            points_per_class=pts,
            bins=nbins,
            fixed_source="true" if fixed_source else "false",
        ),
    )
    for bi, b in enumerate(betas):
        for a in alphas:
            neg = np.concatenate([
                results[i][a][0] for i, task in enumerate(tasks) if task[0] == bi
            ])
            pos = np.concatenate([
                results[i][a][1] for i, task in enumerate(tasks) if task[0] == bi
            ])
            try:
                st = decision_stats(contexts[b], specs[b], a, variant)
                m, var = st.m_alpha, st.variance
                status = "ok"
            except RegimeError:
                m = var = None
                status = "regime_error"
            for label, samples in ((-1, neg), (1, pos)):
                if m is not None:
                    ks = float(spstats.kstest(
                        samples, "norm", args=(label * m, np.sqrt(var))
                    ).statistic)
                else:
                    ks = None
                lo, hi = float(samples.min()), float(samples.max())
                if hi <= lo:
                    hi = lo + 1e-9
                edges = np.linspace(lo, hi, nbins + 1)
                counts, _ = np.histogram(samples, bins=edges)
                for k in range(nbins):
                    table.add(b, a, label, edges[k], edges[k + 1],
                              int(counts[k]), samples.size,
                              None if m is None else label * m,
                              var, ks, status)
    return table


# ---------------------------------------------------------------------------
# optimal-curve
# ---------------------------------------------------------------------------

def run_optimal_curve(config: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Closed-form optimal scaling as a function of alignment, one curve per
    feature dimension; flags non-monotone curves."""
    del threads  # closed forms only
    n, N = config["n"], config["N"]
    betas = grid_values(config["beta_grid"])
    mode = config.mixing
    variant = config.t3_variant
    table = ResultTable(
        columns=("p", "beta", "alpha_star", "acc_at_star", "acc_at_zero",
                 "monotone_nondecreasing", "status"),
        metadata=_base_metadata(config),
    )
    for p in config["p_list"]:
        means = _axis_means(p, config["norm_mu"], config["norm_mu_perp"])
        rows = []
        for b in betas:
            try:
                spec = ProblemSpec.from_means(p, n, N, means, float(b), mode,
                                              config["gamma"], config["gamma_tilde"])
                ctx = build_context(spec)
                a_star = optimal_alpha(ctx, spec, variant)
                acc_star = theoretical_accuracy(decision_stats(ctx, spec, a_star, variant))
                acc_zero = theoretical_accuracy(decision_stats(ctx, spec, 0.0, variant))
                rows.append((float(b), a_star, acc_star, acc_zero, "ok"))
            except (RegimeError, DegenerateSpecError) as exc:
                rows.append((float(b), None, None, None, type(exc).__name__))
        stars = [r[1] for r in rows if r[1] is not None]
        monotone = all(b >= a - 1e-9 for a, b in zip(stars, stars[1:]))
        for b, a_star, acc_star, acc_zero, status in rows:
            table.add(p, b, a_star, acc_star, acc_zero, monotone, status)
    return table


# ---------------------------------------------------------------------------
# real-data
# ---------------------------------------------------------------------------

def run_real_data(config: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Standardize, estimate the mean geometry, then compare accuracies at
    alpha in {0, 1, plug-in optimum} over repeated target subsamples."""
    source = dataio.load_dataset(config["source_path"])
    target = dataio.load_dataset(config["target_path"])
    n = config["n"]
    if n >= target.m:
        raise ConfigError(f"n = {n} must be smaller than the target set ({target.m})")
    scale_on = config.get("scale_on", "source")
    if scale_on == "source":
        source, (target,), _ = standardize(source, [target])
    elif scale_on == "target":
        target, (source,), _ = standardize(target, [source])
    elif scale_on == "pooled":
        pooled = LabeledDataset(
            features=np.concatenate([source.features, target.features], axis=1),
            labels=np.concatenate([source.labels, target.labels]),
        )
        _, (source, target), _ = standardize(pooled, [source, target])

    est = estimate_spec(source, target)
    if est.no_transfer:
        a_star = 0.0
    else:
        # geometry from the full corpora, sample count from the actual
        # fine-tuning subsample size
        spec = est.to_problem_spec(config["gamma"], config["gamma_tilde"], n=n)
        a_star = optimal_alpha(build_context(spec), spec, config.t3_variant)
    w_src = train_ridge(source, config["gamma_tilde"])

    schemes = (("alpha=0", 0.0), ("alpha=1", 1.0), ("alpha=star", a_star))

    def one_seed(seed):
        rng = substream(seed, 0)
        idx = np.sort(rng.choice(target.m, size=n, replace=False))
        rest = np.setdiff1d(np.arange(target.m), idx)
        sub = LabeledDataset(features=target.features[:, idx],
                             labels=target.labels[idx])
        hold = LabeledDataset(features=target.features[:, rest],
                              labels=target.labels[rest])
        w0, direction = fine_tune_direction(sub, config["gamma"], w_src)
        accs = []
        for _, a in schemes:
            w = LinearClassifier(weights=w0.weights + a * direction)
            accs.append(empirical_accuracy(w, hold))
        return accs

    acc = np.array(_parallel_map(one_seed, config.seeds, threads))
    table = ResultTable(
        columns=("scheme", "alpha", "acc_mean", "acc_stderr", "n_seeds"),
        metadata=_base_metadata(
            config,
            beta_hat=repr(est.beta_hat),
            alpha_star=repr(a_star),
            norm_mu_hat=repr(est.norm_mu_hat),
            norm_mu_beta_hat=repr(est.norm_mu_beta_hat),
            no_transfer="true" if est.no_transfer else "false",
            scale_on=scale_on,
        ),
    )
    nseeds = acc.shape[0]
    sd = acc.std(axis=0, ddof=1) if nseeds > 1 else np.zeros(len(schemes))
    for j, (name, a) in enumerate(schemes):
        table.add(name, a, acc[:, j].mean(), sd[j] / np.sqrt(nseeds), nseeds)
    return table


# ---------------------------------------------------------------------------
# multi-source
# ---------------------------------------------------------------------------

def run_multi_source(config: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Fine-tune a mixture of independently trained source classifiers at
    the solved optimal mixing vector versus the all-ones and all-zeros
    baselines; one row per (trial, scheme)."""
    p, n = config["p"], config["n"]
    sources_cfg = config["sources"]
    T = len(sources_cfg)
    if p < 2 + T:
        raise ConfigError(f"p must be >= {2 + T} to hold {T} source directions")
    norm_mb = config["norm_mu_beta"]
    mu_b = np.zeros(p)
    mu_b[0] = norm_mb
    source_means = []
    for t, src in enumerate(sources_cfg):
        m = np.zeros(p)
        m[0] = src["align"] * src["norm_mu"]
        m[2 + t] = np.sqrt(max(0.0, 1.0 - src["align"] ** 2)) * src["norm_mu"]
        source_means.append(m)
    max_n = max(src["samples"] for src in sources_cfg)
    spec = ProblemSpec(p=p, n=n, N=max_n, norm_mu=0.0, norm_mu_beta=norm_mb,
                       beta=0.0, gamma=config["gamma"],
                       gamma_tilde=config["gamma_tilde"])
    ctx = build_context(spec)
    test_size = config.get("test_size", _default_test_size(n))
    seeds = config.seeds
    trials = config["trials"]
    tasks = [(s, t) for s in seeds for t in range(trials)]

    def one_trial(task):
        seed, t = task
        classifiers = []
        for k, (src, mean) in enumerate(zip(sources_cfg, source_means)):
            data = sample_class_data(src["samples"], mean, substream(seed, t, 10 + k))
            classifiers.append(train_ridge(data, config["gamma_tilde"]))
        W = np.column_stack([c.weights for c in classifiers])
        inners = W.T @ mu_b
        gram = W.T @ W
        target = sample_class_data(n, mu_b, substream(seed, t, 1))
        test = sample_class_data(test_size, mu_b, substream(seed, t, 2))
        try:
            coeffs = multi_source_coeffs(ctx, spec, inners, gram)
            solved = solve_multi_alpha(coeffs)
            status = "ok"
        except (RegimeError, DegenerateSpecError, ConvergenceError) as exc:
            solved = None
            status = type(exc).__name__
        rows = []
        for scheme, alphas in (("solved", solved),
                               ("ones", np.ones(T)),
                               ("zeros", np.zeros(T))):
            if alphas is None:
                rows.append((seed, t, scheme, tuple([None] * T), None, status))
                continue
            w = fine_tune_multi(classifiers, alphas, target, config["gamma"])
            rows.append((seed, t, scheme, tuple(float(a) for a in alphas),
                         empirical_accuracy(w, test), "ok"))
        return rows

    results = _parallel_map(one_trial, tasks, threads)
    table = ResultTable(
        columns=("seed", "trial", "scheme")
        + tuple(f"alpha_{k}" for k in range(T))
        + ("accuracy", "status"),
        metadata=_base_metadata(config, test_size=test_size, n_sources=T),
    )
    for rows in results:
        for seed, t, scheme, alphas, accv, status in rows:
            table.add(seed, t, scheme, *alphas, accv, status)
    return table


# ---------------------------------------------------------------------------
# identity-suite
# ---------------------------------------------------------------------------

def run_identity_suite(config: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Closed-form versus explicit-matrix evaluation of every supported
    identity; failures become rows, never aborts."""
    del threads
    p = config["p"]
    means = _axis_means(p, config["norm_mu"], config["norm_mu_perp"])
    mode = MixingMode(config.get("mixing", "additive"))
    spec = ProblemSpec.from_means(p, config["n"], config["N"], means,
                                  config["beta"], mode,
                                  config["gamma"], config["gamma_tilde"])
    results = evaluate_identities(spec, means, mode,
                                  delta_shift=config.get("delta_shift", 0.0))
    table = ResultTable(
        columns=("identity", "matrix_value", "closed_form", "err", "tol",
                 "passed", "asymptotic_gap"),
        metadata=_base_metadata(config, all_passed=all(r.passed for r in results)),
    )
    for r in results:
        table.add(r.name.replace(",", ";"), r.matrix_value, r.closed_form,
                  r.err, r.tol, r.passed, r.asymptotic_gap)
    return table


RUNNERS = {
    "sweep-alpha": run_sweep_alpha,
    "distribution": run_distribution,
    "optimal-curve": run_optimal_curve,
    "real-data": run_real_data,
    "multi-source": run_multi_source,
    "identity-suite": run_identity_suite,
}
