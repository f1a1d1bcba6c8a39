"""Command-line harness: experiment orchestration, persistence, reports.

Experiments are named subcommands.  Configuration is a flat key=value text
file plus repeatable --set overrides; every run emits report.ndjson (one
check per line, with a meta header line), summary.txt, and, where a run
produces trajectory or sample data, a delimited text file.

Exit status: 0 = all checks passed, 1 = any failure, 2 = inconclusive only.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .measure import MeasureParams, sample_batch
from .sabra import SabraCoefficients, beta_from_coefficients, bilinear_kernel
from .spectral import ShellState, SpectralParams
from .dynamics import SimConfig, Trajectory, energy, quadratic_invariant, simulate
from .statistics import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    MomentAccumulator,
    Report,
    accumulator_invariance_checks,
    autocorrelation,
    invariance_test,
    semigroup_decay_check,
    tail_decay_report,
)
from .wick import GaussPoly

EXPERIMENTS = (
    "verify-algebra",
    "sample-measure",
    "simulate",
    "invariance-test",
    "tail-decay",
    "semigroup-decay",
    "inviscid-conservation",
    "autocorr",
)

# key -> (parser, default); the reference parameter set gives beta = 1
_SCHEMA = {
    "k0": (float, 1.0),
    "lambda": (float, 2.0),
    "M": (int, 12),
    "a": (float, 1.0),
    "b": (float, -1.25),
    "beta": (float, None),        # optional; must match the derived value
    "nu": (float, 1.0),
    "dt": (float, 1e-4),
    "t_end": (float, 1.0),
    "epsilon": (float, 1.0),
    "scheme": (str, "expo_em"),
    "stride": (int, 1),
    "seed": (int, 0),
    "samples": (int, 100_000),
    "ensemble": (int, 200),
    "inner": (int, 100),
    "shards": (int, 1),
    "n_max": (int, 10),
    "m_min": (int, 4),
    "m_max": (int, 10),
    "times": (str, "0.1,0.5,1.0"),
    "lags": (str, "0.01,0.1,1.0"),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    values: dict = field(default_factory=dict)

    @property
    def spectral(self) -> SpectralParams:
        return SpectralParams(self.values["k0"], self.values["lambda"], self.values["M"])

    @property
    def coeffs(self) -> SabraCoefficients:
        return SabraCoefficients(self.values["a"], self.values["b"], self.values["lambda"])

    @property
    def measure(self) -> MeasureParams:
        return MeasureParams(self.coeffs.beta, self.values["nu"], self.spectral)

    def sim_config(self, **overrides) -> SimConfig:
        kw = dict(
            dt=self.values["dt"],
            t_end=self.values["t_end"],
            coeffs=self.coeffs,
            measure=self.measure,
            scheme=self.values["scheme"],
            epsilon=self.values["epsilon"],
            seed=self.values["seed"],
            stride=self.values["stride"],
        )
        kw.update(overrides)
        return SimConfig(**kw)

    def times_list(self) -> list[float]:
        return [float(t) for t in str(self.values["times"]).split(",") if t]

    def lags_list(self) -> list[float]:
        return [float(t) for t in str(self.values["lags"]).split(",") if t]


def _parse_kv(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def load_config(kind: str, path: str | None = None, overrides: list[str] = ()) -> ExperimentConfig:
    """Build a validated config from file + overrides; derived quantities are
    checked for cross-field consistency."""
    raw: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        raw.update(_parse_kv(p.read_text()))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()

    values = {}
    for key, text in raw.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        parse, _ = _SCHEMA[key]
        try:
            values[key] = parse(text)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: cannot parse {text!r}") from exc
    for key, (_, default) in _SCHEMA.items():
        values.setdefault(key, default)

    try:
        derived_beta = beta_from_coefficients(values["a"], values["b"], values["lambda"])
    except ValueError as exc:
        raise ConfigError(f"coefficients a={values['a']}, b={values['b']}: {exc}") from exc
    if values["beta"] is not None and abs(values["beta"] - derived_beta) > 1e-12:
        raise ConfigError(
            f"beta mismatch: explicit beta={values['beta']} but (a,b,lambda) give {derived_beta}"
        )
    values["beta"] = derived_beta
    if values["epsilon"] == 0 and kind in ("invariance-test", "semigroup-decay", "autocorr"):
        raise ConfigError("epsilon=0 is deterministic; noise-dependent experiments need epsilon>0")
    if values["scheme"] not in ("ou_exact", "expo_em", "rk4", "implicit_midpoint"):
        raise ConfigError(f"unknown scheme {values['scheme']!r}")
    return ExperimentConfig(kind, values)


# ---------------------------------------------------------------------------
# experiment bodies

def _spawned_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


def verify_algebra_residuals(coeffs: SabraCoefficients, spectral: SpectralParams,
                             n_triples: int, rng: np.random.Generator) -> dict:
    """Worst scaled conservation/antisymmetry residuals over random triples.

    Residuals are normalized by k_M-scaled norm products, since interaction
    entries carry wavenumber factors that grow with the truncation.
    """
    a, b, k = coeffs.a, coeffs.b, spectral.wavenumbers
    u, v, w =(rng.standard_normal((n_triples, spectral.M, 2)) for _ in range(3))
    bu_v = bilinear_kernel(u, v, a, b, k)
    bu_w = bilinear_kernel(u, w, a, b, k)
    bu_u = bilinear_kernel(u, u, a, b, k)
    norms = [np.sqrt(np.sum(s**2, axis=(1, 2))) for s in (u, v, w)]
    nu_, nv, nw = norms
    k_M = spectral.wavenumber(spectral.M)

    antisym = np.abs(np.sum(bu_v * w + bu_w * v, axis=(1, 2))) / (k_M * nu_ * nv * nw)
    energy_res = np.abs(np.sum(bu_v * v, axis=(1, 2))) / (k_M * nu_ * nv**2)
    weights = spectral.eigenvalues**coeffs.beta
    abeta_u = u * weights[:, None]
    sbeta = np.abs(np.sum(bu_u * abeta_u, axis=(1, 2))) / (
        k_M ** (1.0 + 2.0 * coeffs.beta) * nu_**3
    )
    return {
        "antisym": float(np.max(antisym)),
        "energy": float(np.max(energy_res)),
        "sbeta": float(np.max(sbeta)),
    }


def _exp_verify_algebra(cfg: ExperimentConfig) -> tuple[Report, dict]:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.values["seed"]))
    worst = verify_algebra_residuals(cfg.coeffs, cfg.spectral, cfg.values["samples"], rng)
    report = Report()
    report.add("antisymmetry residual", "interaction-antisymmetry", worst["antisym"], 1e-12,
               PASS if worst["antisym"] <= 1e-12 else FAIL)
    report.add("energy invariance residual", "energy-conservation", worst["energy"], 1e-12,
               PASS if worst["energy"] <= 1e-12 else FAIL)
    report.add("S_beta invariance residual", "enstrophy-conservation", worst["sbeta"], 1e-10,
               PASS if worst["sbeta"] <= 1e-10 else FAIL)
    return report, {}


def _exp_sample_measure(cfg: ExperimentConfig) -> tuple[Report, dict]:
    params = cfg.measure
    shards = max(cfg.values["shards"], 1)
    acc = MomentAccumulator((params.spectral.M, 2))
    per_shard = cfg.values["samples"] // shards
    sample_rows = None
    for seed_seq in _spawned_seeds(cfg.values["seed"], shards):
        rng = np.random.default_rng(seed_seq)
        remaining = per_shard
        while remaining > 0:
            k = min(100_000, remaining)
            batch = sample_batch(params, k, rng)
            if sample_rows is None:
                sample_rows = batch[: min(1000, k)]
            acc.add_batch(batch)
            remaining -= k
    report = accumulator_invariance_checks(acc, params, cfg.values["n_max"])
    return report, {"samples": sample_rows}


def _exp_simulate(cfg: ExperimentConfig) -> tuple[Report, dict]:
    traj = simulate(cfg.sim_config(), "mu")
    report = Report()
    report.add("trajectory finite", "simulation-wellposed", float(np.max(np.abs(traj.states))),
               float("inf"), PASS)
    return report, {"trajectory": traj}


def _exp_invariance(cfg: ExperimentConfig) -> tuple[Report, dict]:
    traj = simulate(cfg.sim_config(), "mu")
    report = invariance_test(traj.states, cfg.measure, cfg.values["n_max"])
    return report, {"trajectory": traj}


def _exp_tail_decay(cfg: ExperimentConfig) -> tuple[Report, dict]:
    m_hi = min(cfg.values["m_max"], cfg.spectral.M - 2)
    report, rows = tail_decay_report(
        cfg.coeffs, cfg.measure, range(cfg.values["m_min"], m_hi + 1),
        mc_m=m_hi, mc_samples=cfg.values["samples"], seed=cfg.values["seed"],
    )
    return report, {"table": rows}


def _exp_semigroup(cfg: ExperimentConfig) -> tuple[Report, dict]:
    x11 = GaussPoly.variable(1, 1)
    deg2 = GaussPoly.variable(1, 1) * GaussPoly.variable(2, 2) \
        + GaussPoly.variable(1, 2) * GaussPoly.variable(1, 2)
    sim = cfg.sim_config(t_end=max(cfg.times_list()))
    report = Report()
    for name, phi in (("x(1,1)", x11), ("degree-2", deg2)):
        sub = semigroup_decay_check(sim, phi, cfg.times_list(),
                                    n_outer=cfg.values["ensemble"],
                                    n_inner=cfg.values["inner"], seed=cfg.values["seed"])
        for chk in sub.checks:
            chk.name = f"{name}: {chk.name}"
        report.extend(sub)
    return report, {}


def _exp_inviscid(cfg: ExperimentConfig) -> tuple[Report, dict]:
    sim = cfg.sim_config(scheme="implicit_midpoint", epsilon=0.0)
    rng = np.random.default_rng(cfg.values["seed"])
    initial = ShellState(cfg.spectral, sample_batch(cfg.measure, 1, rng)[0])
    traj = simulate(sim, initial)
    beta = cfg.coeffs.beta
    e0 = energy(ShellState(cfg.spectral, traj.states[0]))
    s0 = quadratic_invariant(ShellState(cfg.spectral, traj.states[0]), beta)
    e_drift = max(abs(energy(ShellState(cfg.spectral, s)) - e0) for s in traj.states) / e0
    s_drift = max(abs(quadratic_invariant(ShellState(cfg.spectral, s), beta) - s0)
                  for s in traj.states) / s0
    report = Report()
    report.add("midpoint energy drift", "energy-conservation", e_drift, 1e-10,
               PASS if e_drift <= 1e-10 else FAIL)
    report.add("midpoint S_beta drift", "enstrophy-conservation", s_drift, 1e-10,
               PASS if s_drift <= 1e-10 else FAIL)
    return report, {"trajectory": traj}


def _exp_autocorr(cfg: ExperimentConfig) -> tuple[Report, dict]:
    traj = simulate(cfg.sim_config(), "mu")
    params = cfg.measure
    lags = cfg.lags_list()
    report = Report()
    table = []
    for n in range(1, min(cfg.values["n_max"], params.spectral.M) + 1):
        est = autocorrelation(traj, lambda s, n=n: s[:, n - 1, 0], lags,
                              observable_id=f"x({n},1)")
        table.append({"mode": n, "lags": list(est.lags), "values": list(est.values),
                      "stderrs": list(est.stderrs)})
        if cfg.values["scheme"] == "ou_exact":
            exact = np.exp(-params.nu * params.spectral.eigenvalue(n) * est.lags)
            z = np.max(np.abs(est.values - exact) / np.maximum(est.stderrs, 1e-12))
            report.add(f"mode({n},1) OU autocorrelation", "linear-mixing-rate", float(z), 4.0,
                       PASS if z <= 4.0 else FAIL)
        else:
            report.add(f"mode({n},1) decay (descriptive)", "mixing-report",
                       float(est.values[-1]), float("inf"), PASS)
    return report, {"table": table}


_RUNNERS = {
    "verify-algebra": _exp_verify_algebra,
    "sample-measure": _exp_sample_measure,
    "simulate": _exp_simulate,
    "invariance-test": _exp_invariance,
    "tail-decay": _exp_tail_decay,
    "semigroup-decay": _exp_semigroup,
    "inviscid-conservation": _exp_inviscid,
    "autocorr": _exp_autocorr,
}


# ---------------------------------------------------------------------------
# persistence

def _write_state_csv(path: Path, times, states):
    M = states.shape[1]
    header = "time," + ",".join(f"x_{n}_{i}" for n in range(1, M + 1) for i in (1, 2))
    flat = states.reshape(len(states), -1)
    data = np.column_stack([np.asarray(times), flat])
    np.savetxt(path, data, delimiter=",", header=header, comments="")


def write_outputs(out_dir: Path, cfg: ExperimentConfig, report: Report, extras: dict,
                  wall_clock: float):
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "type": "meta",
        "experiment": cfg.kind,
        "config": cfg.values,
        "config_hash": cfg.sim_config().config_hash() if cfg.kind != "tail-decay" else "",
        "seed": cfg.values["seed"],
        "version": __version__,
        "wall_clock_s": wall_clock,
        "verdict": report.verdict,
    }
    with open(out_dir / "report.ndjson", "w") as fh:
        fh.write(json.dumps(meta) + "\n")
        for chk in report.checks:
            fh.write(json.dumps(chk.to_record()) + "\n")

    lines = [f"experiment: {cfg.kind}   verdict: {report.verdict}   "
             f"wall clock: {wall_clock:.1f}s"]
    for chk in report.checks:
        lines.append(f"  [{chk.verdict:>12}] {chk.name}: statistic={chk.statistic:.6g} "
                     f"threshold={chk.threshold:.6g} ({chk.anchor})")
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")

    if "trajectory" in extras:
        traj: Trajectory = extras["trajectory"]
        _write_state_csv(out_dir / "trajectory.csv", traj.times, traj.states)
    if extras.get("samples") is not None:
        _write_state_csv(out_dir / "samples.csv",
                         np.arange(len(extras["samples"])), extras["samples"])
    if "table" in extras:
        (out_dir / "table.json").write_text(json.dumps(extras["table"], indent=2))


def run_experiment(cfg: ExperimentConfig, out_dir: Path) -> Report:
    t0 = time.time()
    report, extras = _RUNNERS[cfg.kind](cfg)
    write_outputs(out_dir, cfg, report, extras, time.time() - t0)
    return report


def replay(report_path: Path, out_dir: Path) -> tuple[Report, bool]:
    """Re-run the configuration stored in a report and compare verdicts."""
    with open(report_path) as fh:
        meta = json.loads(fh.readline())
        old = [json.loads(line) for line in fh if line.strip()]
    if meta.get("version") != __version__:
        raise ConfigError(
            f"report written by version {meta.get('version')}, this build is {__version__}; "
            "replay requires the same build"
        )
    cfg = ExperimentConfig(meta["experiment"], dict(meta["config"]))
    report = run_experiment(cfg, out_dir)
    same = [c.verdict for c in report.checks] == [c["verdict"] for c in old]
    return report, same


# ---------------------------------------------------------------------------
# entry point

def _exit_code(report: Report) -> int:
    return {PASS: 0, FAIL: 1, INCONCLUSIVE: 2}[report.verdict]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sabrakit",
        description="Shell-model simulation and invariant-measure verification harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENTS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", default=None)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default="out")
        sp.add_argument("--shards", type=int, default=None)
    rp = sub.add_parser("replay")
    rp.add_argument("report", help="path to a report.ndjson from a previous run")
    rp.add_argument("--out", default="out-replay")

    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            report, same = replay(Path(args.report), Path(args.out))
            if not same:
                print("replay verdicts DIFFER from original", file=sys.stderr)
                return 1
            print(f"replay verdict: {report.verdict} (matches original)")
            return _exit_code(report)
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if args.shards is not None:
            overrides.append(f"shards={args.shards}")
        cfg = load_config(args.command, args.config, overrides)
        report = run_experiment(cfg, Path(args.out))
        print((Path(args.out) / "summary.txt").read_text(), end="")
        return _exit_code(report)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
