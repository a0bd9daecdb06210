"""Monte Carlo concentration experiments and the combinatorial failure bound.

Two workflows:

* concentration: for a guarded sup-inf ("kind") sentence with n universal
  and k existential variables, sample m-point substructures of a host space
  and tally how often the sentence value stays below epsilon.  Alongside the
  empirical curve, estimate the per-block witness probability p (the chance
  a fresh k-tuple witnesses a fresh n-tuple within epsilon) and report the
  analytic failure bound C(m, n) * (1 - p)^floor((m - n) / k).

* zero-one: for an arbitrary sentence, compare its value on random m-point
  substructures against its value on the full host and tally how often they
  agree within epsilon.

Every proportion carries a Wilson 95% interval.  Trials use per-(m, trial)
random substreams, so results are identical for any worker count.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from . import logic
from .generate import ApproximationParams, Sampler, build_approximation
from .logic import (
    Formula,
    KindSentenceSpec,
    classify,
    evaluate,
    evaluate_on_sample,
    kind_parts,
    quantifier_count,
    to_text,
)
from .rng import derive_seed
from .spaces import FiniteMetricSpace, extract_substructure

#: z for a 95% Wilson interval.
Z95 = 1.959963984540054

#: Exact evaluation is refused above this many quantifier assignments.
EXACT_ASSIGNMENT_BUDGET = 10**8

# Substream labels under the experiment master seed.
_STREAM_P = 1
_STREAM_TRIAL = 2
_STREAM_RHAT = 3
_STREAM_SAMPLED = 4


class ZeroVarianceWarning(UserWarning):
    """Estimated proportion hit 0 or 1; the Wilson interval is still valid."""


class EvalBudgetExceededError(RuntimeError):
    """Exact evaluation would exceed the assignment budget; use sampled mode."""


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (stable near 0 and 1)."""
    if trials < 1:
        raise ValueError("trials must be positive")
    if not (0 <= successes <= trials):
        raise ValueError("successes must lie in [0, trials]")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    margin = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    # At the extremes center == margin exactly; keep the endpoints exact.
    lo = 0.0 if successes == 0 else max(0.0, center - margin)
    hi = 1.0 if successes == trials else min(1.0, center + margin)
    return (lo, hi)


def holdout_bound_log(m: int, n: int, k: int, p: float) -> float:
    """Natural log of C(m, n) * (1 - p)^floor((m - n) / k), unclamped.

    Returns -inf when p = 1 and at least one whole block fits.
    """
    if not (1 <= n <= m):
        raise ValueError(f"need 1 <= n <= m, got n={n}, m={m}")
    if k < 1:
        raise ValueError(f"need k >= 1, got k={k}")
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"need p in [0, 1], got p={p}")
    q = (m - n) // k
    log_comb = math.log(math.comb(m, n))
    if p == 1.0:
        return log_comb if q == 0 else -math.inf
    return log_comb + q * math.log1p(-p)


def holdout_bound(m: int, n: int, k: int, p: float) -> float:
    """Probability bound on the bad event at tuple length m, clamped to [0, 1].

    C(m, n) counts the universal-variable subsets; each of the
    floor((m - n) / k) disjoint holdout blocks of existential candidates
    independently fails to witness with probability 1 - p.  Computed in log
    space; a value above 1 is vacuous and clamps to 1.
    """
    lb = holdout_bound_log(m, n, k, p)
    if lb >= 0.0:
        return 1.0
    return math.exp(lb)


@dataclass(frozen=True)
class BoundEstimate:
    """Witness-probability estimate and the failure-bound curve it induces.

    ``bound_at`` uses the Wilson lower endpoint, which makes the bound
    conservative (it is nonincreasing in p).
    """

    p_hat: float
    ci_lo: float
    ci_hi: float
    n: int
    k: int
    trials: int
    epsilon: float

    def bound_at(self, m: int) -> float:
        return holdout_bound(m, self.n, self.k, self.ci_lo)

    def bound_curve(self, m_values: Sequence[int]) -> dict:
        return {int(m): self.bound_at(int(m)) for m in m_values}


def _witness_hits(
    phi: Formula,
    x_vars: Sequence[str],
    y_vars: Sequence[str],
    sampler: Sampler,
    epsilon: float,
    trials: int,
) -> int:
    """Count trials where a fresh distinct (n+k)-tuple satisfies phi < epsilon."""
    host = sampler.host
    rows = host.dist.tolist()
    n, k = len(x_vars), len(y_vars)
    hits = 0
    for _ in range(trials):
        idx = sampler.sample_tuple(n + k)
        env = {x_vars[i]: int(idx[i]) for i in range(n)}
        env.update({y_vars[j]: int(idx[n + j]) for j in range(k)})
        if logic._eval(phi, rows, host.size, env) < epsilon:
            hits += 1
    return hits


def estimate_witness_probability(
    spec: KindSentenceSpec, sampler: Sampler, epsilon: float, trials: int
) -> BoundEstimate:
    """Estimate the per-block witness probability p for a kind sentence.

    p is the probability that, for a without-replacement draw of n + k
    distinct host points, the matrix evaluated with the first n as the
    universal block and the rest as the existential block is below epsilon.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    x_vars = [logic.x_var(i) for i in range(spec.n)]
    y_vars = [logic.y_var(j) for j in range(spec.k)]
    hits = _witness_hits(spec.matrix, x_vars, y_vars, sampler, epsilon, trials)
    p_hat = hits / trials
    ci_lo, ci_hi = wilson_interval(hits, trials)
    if p_hat in (0.0, 1.0):
        warnings.warn(
            ZeroVarianceWarning(f"witness-probability estimate hit {p_hat}; CI [{ci_lo}, {ci_hi}]")
        )
    return BoundEstimate(p_hat, ci_lo, ci_hi, spec.n, spec.k, trials, epsilon)


# ---------------------------------------------------------------------------
# Experiment configuration and result containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared parameters of both experiment workflows.

    ``eval_mode`` is "exact" or "sampled"; sampled mode restricts quantifier
    ranges to ``sample_size`` random points and is always reported as such.
    ``p_trials`` only matters for the concentration experiment.
    """

    sentence: Formula
    epsilon: float
    m_values: tuple
    trials: int
    host: ApproximationParams
    seed: int = 0
    eval_mode: str = "exact"
    sample_size: Union[int, None] = None
    p_trials: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "m_values", tuple(int(m) for m in self.m_values))
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.p_trials < 1:
            raise ValueError("p_trials must be positive")
        if not self.m_values:
            raise ValueError("m_values must be nonempty")
        if any(b <= a for a, b in zip(self.m_values, self.m_values[1:])):
            raise ValueError("m_values must be strictly increasing")
        if self.eval_mode not in ("exact", "sampled"):
            raise ValueError(f"eval_mode must be 'exact' or 'sampled', got {self.eval_mode!r}")
        if self.eval_mode == "sampled" and (self.sample_size is None or self.sample_size < 1):
            raise ValueError("sampled mode requires a positive sample_size")


@dataclass(frozen=True)
class TrialRow:
    """Per-m tally: good means the trial's sentence value met the target
    (below epsilon, or within epsilon of the reference value)."""

    m: int
    trials: int
    good: int
    bad: int
    fraction: float
    ci_lo: float
    ci_hi: float
    mean_sigma: float
    sd_sigma: float
    bound: Union[float, None] = None


CSV_HEADER = "m,trials,good,bad,fraction,ci_lo,ci_hi,mean_sigma,sd_sigma,bound"


@dataclass(frozen=True)
class TrialSeries:
    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    def to_csv_text(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            bound = "" if r.bound is None else repr(float(r.bound))
            lines.append(
                f"{r.m},{r.trials},{r.good},{r.bad},{repr(float(r.fraction))},"
                f"{repr(float(r.ci_lo))},{repr(float(r.ci_hi))},"
                f"{repr(float(r.mean_sigma))},{repr(float(r.sd_sigma))},{bound}"
            )
        return "\n".join(lines) + "\n"

    def fractions(self) -> list:
        return [r.fraction for r in self.rows]


@dataclass(frozen=True)
class ConcentrationResult:
    series: TrialSeries
    estimate: BoundEstimate
    host_size: int
    config: ExperimentConfig
    wall_time_s: float


@dataclass(frozen=True)
class ZeroOneResult:
    series: TrialSeries
    r_hat: float
    r_hat_mode: str
    host_size: int
    config: ExperimentConfig
    wall_time_s: float


def _map_in_order(fn: Callable, args: list, workers: int) -> list:
    """Apply fn over args, preserving order; worker count never changes the
    result because every task carries its own random substream."""
    if workers <= 1:
        return [fn(a) for a in args]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args))


def _check_exact_budget(total_assignments: float) -> None:
    if total_assignments > EXACT_ASSIGNMENT_BUDGET:
        raise EvalBudgetExceededError(
            f"exact evaluation needs ~{total_assignments:.3g} quantifier assignments "
            f"(budget {EXACT_ASSIGNMENT_BUDGET:.1g}); re-run in sampled mode"
        )


def _trial_sigma(config: ExperimentConfig, host: FiniteMetricSpace, m: int, t: int) -> float:
    """Sentence value on the substructure spanned by this trial's m-tuple."""
    sampler = Sampler(host, derive_seed(config.seed, _STREAM_TRIAL, m, t))
    idx = sampler.sample_tuple(m)
    sub = extract_substructure(host, idx)
    if config.eval_mode == "sampled":
        seed = derive_seed(config.seed, _STREAM_SAMPLED, m, t)
        return evaluate_on_sample(config.sentence, sub, config.sample_size, seed).value
    return evaluate(config.sentence, sub)


def _tally(
    config: ExperimentConfig,
    host: FiniteMetricSpace,
    good_test: Callable[[float], bool],
    bound_at: Union[Callable[[int], float], None],
    workers: int,
) -> TrialSeries:
    rows = []
    for m in config.m_values:
        sigmas = _map_in_order(
            lambda t: _trial_sigma(config, host, m, t), list(range(config.trials)), workers
        )
        good = sum(1 for v in sigmas if good_test(v))
        bad = config.trials - good
        ci_lo, ci_hi = wilson_interval(good, config.trials)
        arr = np.asarray(sigmas)
        sd = float(np.std(arr, ddof=1)) if config.trials > 1 else 0.0
        rows.append(
            TrialRow(
                m=m,
                trials=config.trials,
                good=good,
                bad=bad,
                fraction=good / config.trials,
                ci_lo=ci_lo,
                ci_hi=ci_hi,
                mean_sigma=float(np.mean(arr)),
                sd_sigma=sd,
                bound=None if bound_at is None else bound_at(m),
            )
        )
    return TrialSeries(tuple(rows))


def run_concentration_experiment(
    config: ExperimentConfig, workers: int = 1, host: Union[FiniteMetricSpace, None] = None
) -> ConcentrationResult:
    """Concentration of a kind sentence's value below epsilon on random
    m-point substructures, with the analytic failure-bound curve attached.

    ``host`` may carry a prebuilt space for config.host to avoid rebuilding
    it across experiments with the same parameters.
    """
    started = time.perf_counter()
    cls = classify(config.sentence)
    if not cls.is_kind:
        raise ValueError("the concentration experiment needs a kind sentence (guard included)")
    x_vars, y_vars, phi = kind_parts(config.sentence)
    n, k = len(x_vars), len(y_vars)
    if config.m_values[0] < n + k:
        raise ValueError(f"every m must be at least n + k = {n + k} for the bound comparison")

    if host is None:
        host = build_approximation(config.host)
    if config.eval_mode == "exact":
        q = quantifier_count(config.sentence)
        _check_exact_budget(sum(config.trials * float(m) ** q for m in config.m_values))

    sampler = Sampler(host, derive_seed(config.seed, _STREAM_P))
    hits = _witness_hits(phi, x_vars, y_vars, sampler, config.epsilon, config.p_trials)
    ci_lo, ci_hi = wilson_interval(hits, config.p_trials)
    p_hat = hits / config.p_trials
    if p_hat in (0.0, 1.0):
        warnings.warn(ZeroVarianceWarning(f"witness-probability estimate hit {p_hat}"))
    est = BoundEstimate(p_hat, ci_lo, ci_hi, n, k, config.p_trials, config.epsilon)

    series = _tally(config, host, lambda v: v < config.epsilon, est.bound_at, workers)
    return ConcentrationResult(
        series=series,
        estimate=est,
        host_size=host.size,
        config=config,
        wall_time_s=time.perf_counter() - started,
    )


def run_zero_one_experiment(
    config: ExperimentConfig, workers: int = 1, host: Union[FiniteMetricSpace, None] = None
) -> ZeroOneResult:
    """Concentration of an arbitrary sentence's value around its value on the
    full host (the large-host reference r_hat), tallied per tuple."""
    started = time.perf_counter()
    if host is None:
        host = build_approximation(config.host)
    q = quantifier_count(config.sentence)
    if config.eval_mode == "exact":
        total = float(host.size) ** q + sum(
            config.trials * float(m) ** q for m in config.m_values
        )
        _check_exact_budget(total)
        r_hat = evaluate(config.sentence, host)
        r_hat_mode = "exact"
    else:
        sv = evaluate_on_sample(
            config.sentence, host, config.sample_size, derive_seed(config.seed, _STREAM_RHAT)
        )
        r_hat = sv.value
        r_hat_mode = f"sampled s={sv.sample_size} seed={sv.seed}"

    series = _tally(config, host, lambda v: abs(v - r_hat) < config.epsilon, None, workers)
    return ZeroOneResult(
        series=series,
        r_hat=r_hat,
        r_hat_mode=r_hat_mode,
        host_size=host.size,
        config=config,
        wall_time_s=time.perf_counter() - started,
    )


# ---------------------------------------------------------------------------
# Serialization of results
# ---------------------------------------------------------------------------


def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "sentence": to_text(config.sentence),
        "epsilon": config.epsilon,
        "m_values": list(config.m_values),
        "trials": config.trials,
        "host": {
            "target_size": config.host.target_size,
            "max_base": config.host.max_base,
            "grid": config.host.grid,
            "seed": config.host.seed,
        },
        "seed": config.seed,
        "eval_mode": config.eval_mode,
        "sample_size": config.sample_size,
        "p_trials": config.p_trials,
    }


def _series_to_dicts(series: TrialSeries) -> list:
    return [
        {
            "m": r.m,
            "trials": r.trials,
            "good": r.good,
            "bad": r.bad,
            "fraction": r.fraction,
            "ci_lo": r.ci_lo,
            "ci_hi": r.ci_hi,
            "mean_sigma": r.mean_sigma,
            "sd_sigma": r.sd_sigma,
            "bound": r.bound,
        }
        for r in series.rows
    ]


def result_to_dict(result: Union[ConcentrationResult, ZeroOneResult]) -> dict:
    """JSON-ready envelope: config echo, estimates, series, host size, timing."""
    out = {
        "config": config_to_dict(result.config),
        "host_size": result.host_size,
        "seed": result.config.seed,
        "eval_mode": result.config.eval_mode,
        "wall_time_s": result.wall_time_s,
        "series": _series_to_dicts(result.series),
    }
    if isinstance(result, ConcentrationResult):
        est = result.estimate
        out["experiment"] = "concentration"
        out["p_hat"] = est.p_hat
        out["p_ci"] = [est.ci_lo, est.ci_hi]
        out["p_trials"] = est.trials
        out["n"] = est.n
        out["k"] = est.k
    else:
        out["experiment"] = "zero-one"
        out["r_hat"] = result.r_hat
        out["r_hat_mode"] = result.r_hat_mode
    return out
