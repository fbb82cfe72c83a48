"""Trial orchestration, aggregation, and summary statistics.

A trial samples one set of measurement directions per scenario, evaluates
every equivalent form of the inequality on the resulting probability table,
records the highest value, and, when that value is positive, the required
detection efficiency of the winning form.  Trials are embarrassingly
parallel: each one is a pure function of (config, trial index), workers own
disjoint chunks of a fixed chunk grid, and aggregation merges integer counts
and per-trial arrays in trial order, so results are bit-identical for any
worker count.

The per-trial evaluation is vectorized: settings for a whole chunk are drawn
from the counter-based generator in one shot, probabilities come from the
closed-form Bloch route, and all forms are evaluated as one coefficient
matrix product.  The exact operator route in `quantum`/`chsh` computes the
same numbers one trial at a time and serves as the independent cross-check
(see tests and the CLI verify command).
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import chsh, sampling
from .errors import NumericalConsistencyError
from .quantum import NoisyState

__all__ = [
    "SCENARIOS",
    "NAMED_ETAS",
    "CHUNK_TRIALS",
    "ScenarioConfig",
    "TrialOutcome",
    "EfficiencyHistogram",
    "ViolationCurve",
    "ExperimentResult",
    "SweepEntry",
    "ExperimentAborted",
    "run_trial",
    "run_experiment",
    "sweep",
    "wilson_interval",
]

SCENARIOS = ("rim", "rom", "rotm")

# Efficiency points quoted in the run summary.
NAMED_ETAS = (0.785, 0.828, 0.9, 1.0)

# Fixed chunk grid; must not depend on the worker count.
CHUNK_TRIALS = 1 << 16

_MASK64 = 0xFFFFFFFFFFFFFFFF

_WILSON_Z = 1.959963984540054  # 97.5th normal percentile


class ExperimentAborted(RuntimeError):
    """A trial error aborted the experiment; carries partial progress."""

    def __init__(self, message: str, completed_trials: int):
        super().__init__(message)
        self.partial = True
        self.completed_trials = completed_trials


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything that defines one experiment run."""

    scenario: str
    alpha_ratio: float = 1.0
    visibility: float = 1.0
    trials: int = 4_000_000
    master_seed: int = 0
    histogram_bins: int = 200
    eta_grid: tuple[float, float, float] = (0.60, 1.00, 0.001)
    selection_policy: str = "max-i"
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if not (self.alpha_ratio > 0) or not math.isfinite(self.alpha_ratio):
            raise ValueError("alpha_ratio must be positive and finite")
        if not (0.0 <= self.visibility <= 1.0):
            raise ValueError("visibility must be in [0, 1]")
        if int(self.trials) <= 0:
            raise ValueError("trials must be positive")
        if int(self.histogram_bins) <= 0:
            raise ValueError("histogram_bins must be positive")
        start, stop, step = self.eta_grid
        if not (start >= 0.6 and stop <= 1.0 and step > 0 and start < stop):
            raise ValueError("eta grid must satisfy 0.6 <= start < stop <= 1.0, step > 0")
        if self.selection_policy not in ("max-i", "min-eta"):
            raise ValueError(f"selection_policy must be 'max-i' or 'min-eta', got {self.selection_policy!r}")
        if int(self.workers) <= 0:
            raise ValueError("workers must be positive")
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "histogram_bins", int(self.histogram_bins))
        object.__setattr__(self, "master_seed", int(self.master_seed) & _MASK64)
        object.__setattr__(self, "workers", int(self.workers))

    @property
    def state(self) -> NoisyState:
        return NoisyState.from_ratio(self.alpha_ratio, self.visibility)

    @property
    def settings_per_party(self) -> int:
        return 3 if self.scenario == "rotm" else 2

    def eta_grid_points(self) -> np.ndarray:
        start, stop, step = self.eta_grid
        n = int(round((stop - start) / step)) + 1
        return np.round(start + step * np.arange(n), 12)

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "alpha_ratio": self.alpha_ratio,
            "visibility": self.visibility,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "histogram_bins": self.histogram_bins,
            "eta_grid": list(self.eta_grid),
            "selection_policy": self.selection_policy,
            "workers": self.workers,
        }


@dataclass(frozen=True)
class TrialOutcome:
    trial_index: int
    i_max: float
    violated: bool
    eta_req: float | None = None

    def __post_init__(self):
        if self.violated != (self.i_max > 0.0) or self.violated != (self.eta_req is not None):
            raise ValueError("violated must hold exactly when i_max > 0 and eta_req is set")


@dataclass(frozen=True)
class EfficiencyHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    total_trials: int
    violating_trials: int


@dataclass(frozen=True)
class ViolationCurve:
    etas: np.ndarray
    p_viol: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray


@dataclass(frozen=True)
class ExperimentResult:
    config: ScenarioConfig
    histogram: EfficiencyHistogram
    curve: ViolationCurve
    summary: dict


@dataclass(frozen=True)
class SweepEntry:
    config: ScenarioConfig
    result: ExperimentResult | None = None
    error: str | None = None


def wilson_interval(successes: int, total: int, z: float = _WILSON_Z):
    """95% Wilson score interval for a binomial proportion."""
    if total <= 0:
        raise ValueError("total must be positive")
    p = successes / total
    z2 = z * z
    denom = 1.0 + z2 / total
    center = (p + z2 / (2.0 * total)) / denom
    half = z * math.sqrt(p * (1.0 - p) / total + z2 / (4.0 * total * total)) / denom
    # the interval contains the point estimate analytically; enforce it
    # against the last-ulp rounding at p = 0 and p = 1
    low = min(max(0.0, center - half), p)
    high = max(min(1.0, center + half), p)
    return low, high


@lru_cache(maxsize=None)
def _form_tables(settings_per_party: int):
    forms = chsh.enumerate_forms(settings_per_party)
    return forms, chsh.form_coefficients(forms, settings_per_party)


_SETTINGS_FROM_UNIFORMS = {
    "rim": sampling.rim_settings_from_uniforms,
    "rom": sampling.rom_settings_from_uniforms,
    "rotm": sampling.rotm_settings_from_uniforms,
}


def _evaluate_chunk(config: ScenarioConfig, lo: int, hi: int):
    """Evaluate trials [lo, hi); returns (i_max, eta_req) arrays, eta NaN
    when the trial is not violated."""
    state = config.state
    s = config.settings_per_party
    _, (const, weights, n_const, n_a, n_b) = _form_tables(s)
    u = sampling.uniform_block(
        config.master_seed,
        np.arange(lo, hi, dtype=np.uint64),
        sampling.DRAWS_PER_TRIAL[config.scenario],
    )
    a_dirs, b_dirs = _SETTINGS_FROM_UNIFORMS[config.scenario](u)
    batch = hi - lo

    from .quantum import joint_outcome00, marginal_outcome0

    p00 = np.empty((batch, s, s))
    for x in range(s):
        for y in range(s):
            p00[:, x, y] = joint_outcome00(state, a_dirs[:, x], b_dirs[:, y])
    pa0 = marginal_outcome0(state, a_dirs, "A")
    pb0 = marginal_outcome0(state, b_dirs, "B")

    coords = np.concatenate([p00.reshape(batch, s * s), pa0, pb0], axis=1)
    values = coords @ weights + const
    rows = np.arange(batch)

    if config.selection_policy == "min-eta":
        n_all = n_const + pa0 @ n_a.T + pb0 @ n_b.T
        with np.errstate(divide="ignore", invalid="ignore"):
            eta_all = np.where(values > 0.0, n_all / (values + n_all), np.inf)
        any_viol = (values > 0.0).any(axis=1)
        winner = np.where(any_viol, np.argmin(eta_all, axis=1), np.argmax(values, axis=1))
    else:
        winner = np.argmax(values, axis=1)

    i_max = values[rows, winner]
    if not np.all(np.isfinite(i_max)):
        bad = lo + int(np.flatnonzero(~np.isfinite(i_max))[0])
        raise NumericalConsistencyError(f"non-finite inequality value at trial {bad}")
    n_win = (
        n_const[winner]
        + np.einsum("bx,bx->b", pa0, n_a[winner])
        + np.einsum("bx,bx->b", pb0, n_b[winner])
    )
    violated = i_max > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.where(violated, n_win / (i_max + n_win), np.nan)
    return i_max, eta


def run_trial(config: ScenarioConfig, trial_index: int) -> TrialOutcome:
    """Outcome of one trial; a pure function of (config, trial_index)."""
    if not (0 <= trial_index):
        raise ValueError("trial_index must be non-negative")
    try:
        i_max, eta = _evaluate_chunk(config, trial_index, trial_index + 1)
    except NumericalConsistencyError as exc:
        raise NumericalConsistencyError(f"trial {trial_index}: {exc}") from exc
    violated = bool(i_max[0] > 0.0)
    return TrialOutcome(
        trial_index=trial_index,
        i_max=float(i_max[0]),
        violated=violated,
        eta_req=float(eta[0]) if violated else None,
    )


def _chunk_grid(trials: int):
    return [(lo, min(lo + CHUNK_TRIALS, trials)) for lo in range(0, trials, CHUNK_TRIALS)]


def _collect_chunks(config: ScenarioConfig, progress=None):
    chunks = _chunk_grid(config.trials)
    results: list = [None] * len(chunks)
    started = time.perf_counter()
    done_trials = 0
    if config.workers == 1 or len(chunks) == 1:
        for k, (lo, hi) in enumerate(chunks):
            try:
                results[k] = _evaluate_chunk(config, lo, hi)
            except NumericalConsistencyError as exc:
                raise ExperimentAborted(str(exc), completed_trials=done_trials) from exc
            done_trials += hi - lo
            if progress is not None:
                progress(done_trials, config.trials, time.perf_counter() - started)
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = {
                pool.submit(_evaluate_chunk, config, lo, hi): k
                for k, (lo, hi) in enumerate(chunks)
            }
            try:
                for future in as_completed(futures):
                    k = futures[future]
                    try:
                        results[k] = future.result()
                    except NumericalConsistencyError as exc:
                        raise ExperimentAborted(str(exc), completed_trials=done_trials) from exc
                    lo, hi = chunks[k]
                    done_trials += hi - lo
                    if progress is not None:
                        progress(done_trials, config.trials, time.perf_counter() - started)
            except ExperimentAborted:
                for future in futures:
                    future.cancel()
                raise
    i_max = np.concatenate([r[0] for r in results])
    eta = np.concatenate([r[1] for r in results])
    return i_max, eta


def run_experiment(config: ScenarioConfig, progress=None) -> ExperimentResult:
    """Run all trials and aggregate the histogram, curve, and summary.

    `progress`, if given, is called as progress(done, total, elapsed_seconds)
    after each completed chunk.
    """
    started = time.perf_counter()
    i_max, eta = _collect_chunks(config, progress)
    violated = i_max > 0.0
    eta_violating = eta[violated]
    n_viol = int(violated.sum())

    if n_viol and (eta_violating.min() < 0.6 or eta_violating.max() >= 1.0):
        raise NumericalConsistencyError("required efficiency outside [0.6, 1)")

    edges = np.linspace(0.6, 1.0, config.histogram_bins + 1)
    counts, _ = np.histogram(eta_violating, bins=edges)
    histogram = EfficiencyHistogram(
        bin_edges=edges,
        counts=counts,
        total_trials=config.trials,
        violating_trials=n_viol,
    )

    grid = config.eta_grid_points()
    eta_sorted = np.sort(eta_violating)
    cum = np.searchsorted(eta_sorted, grid, side="right")
    p_viol = cum / config.trials
    ci = np.array([wilson_interval(int(k), config.trials) for k in cum])
    curve = ViolationCurve(
        etas=grid, p_viol=p_viol, ci_low=ci[:, 0], ci_high=ci[:, 1]
    )

    named_p = {}
    named_ci = {}
    for point in NAMED_ETAS:
        k = int(np.searchsorted(eta_sorted, point, side="right"))
        named_p[f"{point:g}"] = k / config.trials
        lo_ci, hi_ci = wilson_interval(k, config.trials)
        named_ci[f"{point:g}"] = [lo_ci, hi_ci]

    state = config.state
    summary = {
        "config": config.as_dict(),
        "state": {
            "alpha": state.pure.alpha,
            "beta": state.pure.beta,
            "concurrence": state.pure.concurrence,
        },
        "total_trials": config.trials,
        "violating_trials": n_viol,
        "p_viol": named_p,
        "wilson_ci_95": named_ci,
        "i_max_given_violation": (
            {
                "mean": float(i_max[violated].mean()),
                "median": float(np.median(i_max[violated])),
            }
            if n_viol
            else None
        ),
        "min_eta_req": float(eta_sorted[0]) if n_viol else None,
        "wall_time_s": time.perf_counter() - started,
    }
    return ExperimentResult(config=config, histogram=histogram, curve=curve, summary=summary)


def sweep(configs: list[ScenarioConfig], progress=None) -> list[SweepEntry]:
    """Run several configs, each on an independent trial-index space.

    The master seed of config k is offset by its ordinal, so a sweep over
    one config is identical to run_experiment on it.  Per-config failures
    are isolated; the remaining configs still run.
    """
    if not configs:
        raise ValueError("sweep needs at least one config")
    entries = []
    for ordinal, config in enumerate(configs):
        effective = replace(config, master_seed=(config.master_seed + ordinal) & _MASK64)
        try:
            result = run_experiment(effective, progress=progress)
            entries.append(SweepEntry(config=effective, result=result))
        except Exception as exc:  # noqa: BLE001 - isolation is the contract
            entries.append(SweepEntry(config=effective, error=str(exc)))
    if all(entry.result is None for entry in entries):
        raise ExperimentAborted("every sweep config failed", completed_trials=0)
    return entries
