"""Online statistics, invariance tests, and mixing-rate estimation.

Trajectory samples are dependent, so every z-score here uses an effective
sample size from the integrated autocorrelation time of the relevant series.
The 4-sigma thresholds keep the family-wise false-failure rate of a run with
dozens of checks well under 1%.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import SimConfig, Trajectory, evolve_ensemble
from .measure import MeasureParams, expected_tail_norm, sample_batch, tail_row_polys
from .sabra import SabraCoefficients
from .wick import GaussPoly

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class CheckRecord:
    name: str
    anchor: str
    statistic: float
    threshold: float
    verdict: str

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "anchor": self.anchor,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "verdict": self.verdict,
        }


@dataclass
class Report:
    checks: list[CheckRecord] = field(default_factory=list)

    def add(self, *args, **kwargs) -> CheckRecord:
        rec = CheckRecord(*args, **kwargs)
        self.checks.append(rec)
        return rec

    def extend(self, other: "Report"):
        self.checks.extend(other.checks)

    @property
    def verdict(self) -> str:
        verdicts = {c.verdict for c in self.checks}
        if FAIL in verdicts:
            return FAIL
        if INCONCLUSIVE in verdicts:
            return INCONCLUSIVE
        return PASS

    def passed(self) -> bool:
        return self.verdict == PASS


class MomentAccumulator:
    """Mergeable running central moments up to order 4, per component.

    Merging uses the pairwise update formulas, so sharded accumulation over
    trajectory pieces or ensemble members reproduces the single-pass result
    up to floating-point reordering.
    """

    def __init__(self, shape=()):
        self.shape = tuple(shape) if not isinstance(shape, tuple) else shape
        self.count = 0
        self.mean = np.zeros(self.shape)
        self.m2 = np.zeros(self.shape)
        self.m3 = np.zeros(self.shape)
        self.m4 = np.zeros(self.shape)

    def add_batch(self, x: np.ndarray):
        """Fold in a batch with leading sample axis."""
        x = np.asarray(x, dtype=float)
        nb = x.shape[0]
        if nb == 0:
            return self
        mean_b = x.mean(axis=0)
        d = x - mean_b
        other = MomentAccumulator(self.shape)
        other.count = nb
        other.mean = mean_b
        other.m2 = (d**2).sum(axis=0)
        other.m3 = (d**3).sum(axis=0)
        other.m4 = (d**4).sum(axis=0)
        return self.merge(other)

    def add(self, x):
        return self.add_batch(np.asarray(x)[None])

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean = other.count, other.mean.copy()
            self.m2, self.m3, self.m4 = other.m2.copy(), other.m3.copy(), other.m4.copy()
            return self
        na, nb = self.count, other.count
        n = na + nb
        delta = other.mean - self.mean
        d_n = delta / n
        m2 = self.m2 + other.m2 + delta * d_n * na * nb
        m3 = (
            self.m3 + other.m3
            + delta * d_n**2 * na * nb * (na - nb)
            + 3.0 * d_n * (na * other.m2 - nb * self.m2)
        )
        m4 = (
            self.m4 + other.m4
            + delta * d_n**3 * na * nb * (na**2 - na * nb + nb**2)
            + 6.0 * d_n**2 * (na**2 * other.m2 + nb**2 * self.m2)
            + 4.0 * d_n * (na * other.m3 - nb * self.m3)
        )
        self.count, self.mean = n, self.mean + d_n * nb
        self.m2, self.m3, self.m4 = m2, m3, m4
        return self

    def variance(self):
        return self.m2 / self.count

    def central_moment4(self):
        return self.m4 / self.count

    def excess_kurtosis(self):
        var = self.variance()
        return self.central_moment4() / np.where(var > 0, var**2, 1.0) - 3.0


@dataclass
class AutocorrEstimate:
    observable_id: str
    lags: np.ndarray
    values: np.ndarray
    stderrs: np.ndarray

    def __post_init__(self):
        if len(self.lags) > 1 and not np.all(np.diff(self.lags) > 0):
            raise ValueError("lags must be strictly increasing")


def normalized_acf(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Autocorrelation function via FFT, lags 0..max_lag."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    n = len(x)
    f = np.fft.rfft(x, 2 * n)
    acov = np.fft.irfft(f * np.conj(f))[: max_lag + 1] / n
    if acov[0] <= 0:
        return np.zeros(max_lag + 1)
    return acov / acov[0]


def integrated_autocorr_time(x: np.ndarray) -> float:
    """Windowed integrated autocorrelation time in units of the sample step.

    Window: 5x the first lag where the acf drops below 0.05.
    """
    n = len(x)
    if n < 4 or np.std(x) == 0:
        return 1.0
    max_lag = min(n // 2, 20000)
    rho = normalized_acf(x, max_lag)
    below = np.flatnonzero(rho[1:] < 0.05)
    window = min(5 * (int(below[0]) + 1), max_lag) if len(below) else max_lag
    tau = 1.0 + 2.0 * float(np.sum(rho[1 : window + 1]))
    return max(tau, 1.0)


def effective_sample_size(x: np.ndarray) -> float:
    return len(x) / integrated_autocorr_time(x)


def invariance_test(states: np.ndarray, params: MeasureParams, n_max: int | None = None,
                    time_ordered: bool = True) -> Report:
    """Per-mode variance and excess-kurtosis z-tests against the Gaussian
    measure; pass iff all |z| <= 4 on the autocorrelation-adjusted sample size.

    states: (K, M, 2) stationary snapshots (time-ordered for a trajectory,
    unordered for an i.i.d. ensemble).
    """
    states = np.asarray(states, dtype=float)
    M = params.spectral.M
    n_max = min(n_max or M, M)
    report = Report()
    for n in range(1, n_max + 1):
        target = params.component_variance(n)
        for i in (1, 2):
            series = states[:, n - 1, i - 1]
            ess = effective_sample_size(series**2) if time_ordered else float(len(series))
            name = f"mode({n},{i})"
            if ess < 30:
                report.add(f"{name} variance", "measure-variance", float("nan"), 4.0,
                           INCONCLUSIVE)
                continue
            centered = series - series.mean()
            s2 = float(np.mean(centered**2))
            m4 = float(np.mean(centered**4))
            se_var = np.sqrt(max(m4 - s2**2, 0.0) / ess)
            z_var = (s2 - target) / se_var if se_var > 0 else np.inf
            g2 = m4 / s2**2 - 3.0 if s2 > 0 else np.inf
            z_kurt = g2 / np.sqrt(24.0 / ess)
            report.add(f"{name} variance", "measure-variance", float(z_var), 4.0,
                       PASS if abs(z_var) <= 4.0 else FAIL)
            report.add(f"{name} kurtosis", "measure-gaussianity", float(z_kurt), 4.0,
                       PASS if abs(z_kurt) <= 4.0 else FAIL)
    return report


def accumulator_invariance_checks(acc: "MomentAccumulator", params: MeasureParams,
                                  n_max: int | None = None) -> Report:
    """Variance/kurtosis z-checks from a merged (M, 2) moment accumulator over
    i.i.d. draws; the sharded and single-pass paths give the same verdicts."""
    M = params.spectral.M
    n_max = min(n_max or M, M)
    ess = float(acc.count)
    report = Report()
    if ess < 30:
        report.add("ensemble size", "measure-variance", ess, 30.0, INCONCLUSIVE)
        return report
    var = acc.variance()
    m4 = acc.central_moment4()
    for n in range(1, n_max + 1):
        target = params.component_variance(n)
        for i in (1, 2):
            s2, mu4 = float(var[n - 1, i - 1]), float(m4[n - 1, i - 1])
            se_var = np.sqrt(max(mu4 - s2**2, 0.0) / ess)
            z_var = (s2 - target) / se_var if se_var > 0 else np.inf
            z_kurt = (mu4 / s2**2 - 3.0) / np.sqrt(24.0 / ess)
            report.add(f"mode({n},{i}) variance", "measure-variance", float(z_var), 4.0,
                       PASS if abs(z_var) <= 4.0 else FAIL)
            report.add(f"mode({n},{i}) kurtosis", "measure-gaussianity", float(z_kurt), 4.0,
                       PASS if abs(z_kurt) <= 4.0 else FAIL)
    return report


def autocorrelation(traj: Trajectory, observable, lags, observable_id: str = "phi",
                    n_batches: int = 20) -> AutocorrEstimate:
    """Normalized autocovariance of observable(states) at the given lag times.

    Standard errors come from batch means over contiguous trajectory pieces.
    """
    series = np.asarray(observable(traj.states), dtype=float)
    dt = traj.dt if traj.dt > 0 else float(traj.times[1] - traj.times[0])
    lags = np.asarray(sorted(lags), dtype=float)
    max_idx = int(round(lags[-1] / dt))
    if max_idx > len(series) // 10:
        raise ValueError("largest lag exceeds a tenth of the trajectory horizon")
    centered = series - series.mean()
    var = float(np.mean(centered**2))
    values, stderrs = [], []
    for lag in lags:
        L = int(round(lag / dt))
        if L == 0:
            values.append(1.0)
            stderrs.append(0.0)
            continue
        prod = centered[:-L] * centered[L:] / var
        usable = (len(prod) // n_batches) * n_batches
        batches = prod[:usable].reshape(n_batches, -1).mean(axis=1)
        values.append(float(np.mean(prod)))
        stderrs.append(float(np.std(batches, ddof=1) / np.sqrt(n_batches)))
    return AutocorrEstimate(observable_id, lags, np.array(values), np.array(stderrs))


def semigroup_decay_check(cfg: SimConfig, phi: GaussPoly, times, n_outer: int,
                          n_inner: int, seed) -> Report:
    """Nested Monte Carlo check of the spectral-gap decay bound:
    the measure-averaged squared deviation of the time-t conditional mean of
    phi must sit below exp(-lam_1 t) times the stationary variance of phi.

    Outer samples are stationary starts; inner replicas share the start but
    use independent noise.  The inner-averaging variance inflates the naive
    outer estimator, so its known bias is subtracted.
    """
    ss = np.random.SeedSequence(seed)
    outer_seed, inner_seed = ss.spawn(2)
    params = cfg.measure
    lam1 = params.spectral.eigenvalue(1)
    phibar = phi.expectation(params.variance_of)
    centered = phi - phibar
    var_phi = (centered * centered).expectation(params.variance_of)

    starts = sample_batch(params, n_outer, np.random.default_rng(outer_seed))
    batch = np.repeat(starts, n_inner, axis=0)
    steps = [int(round(t / cfg.dt)) for t in times]
    snaps = evolve_ensemble(cfg, batch, inner_seed, steps)

    report = Report()
    for t, snap in zip(times, snaps):
        vals = np.asarray(phi.evaluate(snap)).reshape(n_outer, n_inner)
        inner_mean = vals.mean(axis=1)
        inner_var = vals.var(axis=1, ddof=1) if n_inner > 1 else np.zeros(n_outer)
        per_outer = (inner_mean - phibar) ** 2 - inner_var / max(n_inner, 1)
        lhs = float(np.mean(per_outer))
        se = float(np.std(per_outer, ddof=1) / np.sqrt(n_outer))
        rhs = float(np.exp(-lam1 * t) * var_phi)
        if t == 0:
            verdict = PASS if abs(lhs - rhs) <= 4 * max(se, 1e-15) else FAIL
        elif lhs <= rhs + 4 * se:
            verdict = PASS
        elif se > 0.5 * max(rhs, 1e-300):
            verdict = INCONCLUSIVE
        else:
            verdict = FAIL
        report.add(f"decay bound at t={t}", "spectral-gap-decay",
                   lhs - rhs, 4 * se, verdict)
    return report


def tail_decay_report(coeffs: SabraCoefficients, params: MeasureParams, m_range,
                      mc_m: int | None = None, mc_samples: int = 0,
                      seed: int = 0, rate_tol: float = 0.05) -> tuple[Report, list[dict]]:
    """Tabulate the exact truncation-error second moments over a range of
    truncation levels and compare the fitted geometric rate with the
    predicted per-shell exponent (2 - 4*beta) * log(lam).

    Optionally cross-checks one level against Monte Carlo over mc_samples
    draws (needs mc_m + 2 <= M).
    """
    m_values = sorted(m_range)
    rows = []
    for m in m_values:
        rows.append({"m": m, "wick": expected_tail_norm(coeffs, params, m)})

    report = Report()
    log_vals = np.log([r["wick"] for r in rows])
    slope = float(np.polyfit(m_values, log_vals, 1)[0])
    expected = (2.0 - 4.0 * params.beta) * np.log(coeffs.lam)
    for r, lv in zip(rows, log_vals):
        r["log_wick"] = float(lv)
    if abs(expected) < 1e-12:
        verdict = PASS if abs(slope) <= 0.05 else FAIL
        report.add("tail rate (boundary, no decay)", "tail-decay-rate", slope, 0.05, verdict)
    else:
        rel_err = abs(slope - expected) / abs(expected)
        report.add("tail rate vs predicted exponent", "tail-decay-rate",
                   rel_err, rate_tol, PASS if rel_err <= rate_tol else FAIL)

    if mc_m is not None and mc_samples > 0:
        polys = list(tail_row_polys(coeffs, params.spectral, mc_m).values())
        rng = np.random.default_rng(seed)
        acc = MomentAccumulator(())
        remaining = mc_samples
        while remaining > 0:
            k = min(100_000, remaining)
            batch = sample_batch(params, k, rng)
            total = np.zeros(k)
            for poly in polys:
                total += np.asarray(poly.evaluate(batch)) ** 2
            acc.add_batch(total)
            remaining -= k
        est = float(acc.mean)
        se = float(np.sqrt(acc.variance() / acc.count))
        wick = expected_tail_norm(coeffs, params, mc_m)
        z = (est - wick) / se if se > 0 else np.inf
        report.add(f"tail MC vs exact at m={mc_m}", "tail-decay-mc", float(z), 4.0,
                   PASS if abs(z) <= 4.0 else FAIL)
    return report, rows


def holder_quotient(traj: Trajectory, delta: float, alpha: float = 0.0,
                    eigenvalues: np.ndarray | None = None) -> float:
    """Max over dyadic time separations of the increment quotient
    ||u(t+h)-u(t)||_alpha / h^delta; a path-continuity diagnostic.

    For alpha != 0 pass the spectral eigenvalue array for the norm weights.
    """
    states = traj.states
    dt = traj.dt if traj.dt > 0 else float(traj.times[1] - traj.times[0])
    if alpha != 0.0:
        if eigenvalues is None:
            raise ValueError("alpha != 0 needs the eigenvalue array")
        weights = np.asarray(eigenvalues) ** alpha
    best = 0.0
    L = 1
    while L < len(states):
        diff = states[L:] - states[:-L]
        if alpha == 0.0:
            norms = np.sqrt(np.sum(diff**2, axis=(1, 2)))
        else:
            norms = np.sqrt(np.sum(diff**2, axis=2) @ weights)
        best = max(best, float(np.max(norms)) / (L * dt) ** delta)
        L *= 2
    return best
