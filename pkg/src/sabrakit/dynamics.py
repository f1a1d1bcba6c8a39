"""Time integration for the shell models.

Three regimes share one configuration type:
  * exact Ornstein-Uhlenbeck stepping for the linear stochastic equation,
  * exponential Euler-Maruyama for the nonlinear stochastic equation and its
    epsilon-scaled family (the linear part is integrated exactly per mode, so
    stiffness of the top shells never limits the step),
  * conservative integrators (rk4, implicit midpoint) for the inviscid
    deterministic equation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .measure import MeasureParams, sample_batch
from .sabra import SabraCoefficients, bilinear_kernel
from .spectral import ShellState

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is optional
    _njit = None

SCHEMES = ("ou_exact", "expo_em", "rk4", "implicit_midpoint")
STOCHASTIC_SCHEMES = ("ou_exact", "expo_em")

BLOWUP_FACTOR = 1e6


class TrajectoryDivergedError(RuntimeError):
    def __init__(self, t: float, norm: float):
        super().__init__(f"trajectory diverged at t={t:.6g} (norm {norm:.3g}); reduce dt")
        self.t = t
        self.norm = norm


class MidpointNonconvergenceError(RuntimeError):
    def __init__(self, iterations: int):
        super().__init__(f"midpoint iteration failed to converge in {iterations} steps; reduce dt")


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_end: float
    coeffs: SabraCoefficients
    measure: MeasureParams
    scheme: str = "expo_em"
    epsilon: float = 1.0
    seed: int = 0
    stride: int = 1

    def __post_init__(self):
        if not 0 < self.dt <= self.t_end:
            raise ValueError("need 0 < dt <= t_end")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.epsilon == 0 and self.scheme in STOCHASTIC_SCHEMES:
            raise ValueError("epsilon=0 is the deterministic inviscid regime; use rk4 or implicit_midpoint")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def nu(self) -> float:
        return self.measure.nu

    def config_hash(self) -> str:
        return hashlib.sha256(repr(self).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Trajectory:
    """Snapshots (times[j], states[j]) at the configured stride."""

    times: np.ndarray           # (K,)
    states: np.ndarray          # (K, M, 2)
    config_hash: str
    seed: int
    dt: float = field(default=0.0)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states length mismatch")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("snapshot times must be strictly increasing")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("trajectory contains non-finite states")

    def component_series(self, n: int, i: int) -> np.ndarray:
        return self.states[:, n - 1, i - 1]


def _ou_coefficients(measure: MeasureParams, dt: float, epsilon: float = 1.0):
    """Per-mode decay factor and exact transition noise std for one step.

    Rate nu*eps*lam_n; the increment variance (1 - decay^2)/(nu lam_n^beta)
    makes the per-mode stationary variance exactly the measure variance for
    every epsilon and dt.
    """
    lam = measure.spectral.eigenvalues
    decay = np.exp(-measure.nu * epsilon * lam * dt)
    sigma = np.sqrt((1.0 - decay**2) / (measure.nu * lam**measure.beta))
    return decay[:, None], sigma[:, None]


def ou_exact_step(z: ShellState, dt: float, params: MeasureParams,
                  noise: np.ndarray) -> ShellState:
    """One exact transition of the linear Ornstein-Uhlenbeck dynamics."""
    decay, sigma = _ou_coefficients(params, dt)
    return ShellState(z.params, decay * z.shells + sigma * np.asarray(noise))


def sde_step(u: ShellState, cfg: SimConfig, noise: np.ndarray) -> ShellState:
    """One exponential Euler-Maruyama step of the nonlinear stochastic equation."""
    if cfg.scheme != "expo_em":
        raise ValueError("sde_step requires scheme=expo_em")
    decay, sigma = _ou_coefficients(cfg.measure, cfg.dt, cfg.epsilon)
    x = _expo_em_step(u.shells, cfg, decay, sigma, np.asarray(noise))
    if not np.all(np.isfinite(x)):
        raise TrajectoryDivergedError(cfg.dt, float("inf"))
    return ShellState(u.params, x)


def _expo_em_step(x, cfg, decay, sigma, noise):
    bxx = bilinear_kernel(x, x, cfg.coeffs.a, cfg.coeffs.b,
                          cfg.measure.spectral.wavenumbers)
    return decay * (x - cfg.dt * bxx) + sigma * noise


def _expo_em_block_python(x, noise, decay, sigma, dt, a, b, k):
    """Advance one noise block; reference implementation of the jitted loop."""
    for j in range(noise.shape[0]):
        bxx = bilinear_kernel(x, x, a, b, k)
        x = decay * (x - dt * bxx) + sigma * noise[j]
    return x


if _njit is not None:

    @_njit(cache=True)
    def _expo_em_block_jit(x, noise, decay, sigma, dt, a, b, k):  # pragma: no cover
        M = x.shape[0]
        xp = np.zeros((M + 4, 2))
        w = np.zeros((M, 2))
        for s in range(noise.shape[0]):
            for j in range(M):
                xp[j + 2, 0] = x[j, 0]
                xp[j + 2, 1] = x[j, 1]
            for j in range(M):
                p = j + 2
                w[j, 0] = (
                    a * k[j + 2] * (-xp[p + 1, 1] * xp[p + 2, 0] + xp[p + 1, 0] * xp[p + 2, 1])
                    + b * k[j + 1] * (-xp[p - 1, 1] * xp[p + 1, 0] + xp[p - 1, 0] * xp[p + 1, 1])
                    + a * k[j] * (xp[p - 1, 1] * xp[p - 2, 0] + xp[p - 1, 0] * xp[p - 2, 1])
                    + b * k[j] * (xp[p - 2, 1] * xp[p - 1, 0] + xp[p - 2, 0] * xp[p - 1, 1])
                )
                w[j, 1] = (
                    -a * k[j + 2] * (xp[p + 1, 0] * xp[p + 2, 0] + xp[p + 1, 1] * xp[p + 2, 1])
                    - b * k[j + 1] * (xp[p - 1, 0] * xp[p + 1, 0] + xp[p - 1, 1] * xp[p + 1, 1])
                    - a * k[j] * (xp[p - 1, 0] * xp[p - 2, 0] - xp[p - 1, 1] * xp[p - 2, 1])
                    - b * k[j] * (xp[p - 2, 0] * xp[p - 1, 0] - xp[p - 2, 1] * xp[p - 1, 1])
                )
            for j in range(M):
                x[j, 0] = decay[j, 0] * (x[j, 0] - dt * w[j, 0]) + sigma[j, 0] * noise[s, j, 0]
                x[j, 1] = decay[j, 0] * (x[j, 1] - dt * w[j, 1]) + sigma[j, 0] * noise[s, j, 1]
        return x

else:
    _expo_em_block_jit = None


def _rhs(x, coeffs, wavenumbers):
    return -bilinear_kernel(x, x, coeffs.a, coeffs.b, wavenumbers)


def inviscid_step(u: ShellState, dt: float, coeffs: SabraCoefficients,
                  scheme: str) -> ShellState:
    if scheme == "rk4":
        return ShellState(u.params, _rk4_step(u.shells, dt, coeffs, u.params.wavenumbers))
    if scheme == "implicit_midpoint":
        return ShellState(u.params, _midpoint_step(u.shells, dt, coeffs, u.params.wavenumbers))
    raise ValueError(f"unknown inviscid scheme {scheme!r}")


def _rk4_step(x, dt, coeffs, k):
    f1 = _rhs(x, coeffs, k)
    f2 = _rhs(x + 0.5 * dt * f1, coeffs, k)
    f3 = _rhs(x + 0.5 * dt * f2, coeffs, k)
    f4 = _rhs(x + dt * f3, coeffs, k)
    return x + (dt / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)


def _midpoint_step(x, dt, coeffs, k, tol: float = 1e-13, max_iter: int = 100):
    """Implicit midpoint via fixed-point iteration, warm-started from an Euler
    predictor; conserves both quadratic invariants to iteration tolerance."""
    scale = max(float(np.max(np.abs(x))), 1e-300)
    x_new = x + dt * _rhs(x, coeffs, k)
    delta = np.inf
    for _ in range(max_iter):
        candidate = x + dt * _rhs(0.5 * (x + x_new), coeffs, k)
        new_delta = float(np.max(np.abs(candidate - x_new)))
        x_new = candidate
        if new_delta == 0.0 or new_delta >= delta:
            # converged or stalled at the rounding floor
            delta = min(delta, new_delta)
            break
        delta = new_delta
    if delta > tol * scale:
        raise MidpointNonconvergenceError(max_iter)
    return x_new


def simulate(cfg: SimConfig, initial: ShellState | str = "mu") -> Trajectory:
    """Run the configured stepper, recording every `stride`-th state.

    initial is either a state or the string "mu" for a stationary start drawn
    from the Gaussian measure.  Fully deterministic given cfg.seed.
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    spectral = cfg.measure.spectral
    if initial == "mu":
        x = sample_batch(cfg.measure, 1, rng)[0]
    elif isinstance(initial, ShellState):
        if initial.params != spectral:
            raise ValueError("initial state has mismatched spectral parameters")
        x = initial.shells.copy()
    else:
        raise ValueError("initial must be a ShellState or 'mu'")

    n_steps = int(round(cfg.t_end / cfg.dt))
    snaps = [x.copy()]
    times = [0.0]
    guard = BLOWUP_FACTOR * max(float(np.sqrt(np.sum(x**2))), 1.0)

    stochastic = cfg.scheme in STOCHASTIC_SCHEMES
    if stochastic:
        decay, sigma = _ou_coefficients(cfg.measure, cfg.dt, cfg.epsilon)
    a, b, k = cfg.coeffs.a, cfg.coeffs.b, spectral.wavenumbers

    def advance(x, count):
        if cfg.scheme == "ou_exact":
            noise = rng.standard_normal((count, spectral.M, 2))
            for j in range(count):
                x = decay * x + sigma * noise[j]
            return x
        if cfg.scheme == "expo_em":
            noise = rng.standard_normal((count, spectral.M, 2))
            if _expo_em_block_jit is not None:
                return _expo_em_block_jit(np.ascontiguousarray(x), noise,
                                          decay, sigma, cfg.dt, a, b, np.asarray(k))
            return _expo_em_block_python(x, noise, decay, sigma, cfg.dt, a, b, k)
        stepper = _rk4_step if cfg.scheme == "rk4" else _midpoint_step
        for _ in range(count):
            x = stepper(x, cfg.dt, cfg.coeffs, k)
        return x

    step = 0
    while step + cfg.stride <= n_steps:
        x = advance(x, cfg.stride)
        step += cfg.stride
        norm = float(np.sqrt(np.sum(x**2)))
        if not np.isfinite(norm) or norm > guard:
            raise TrajectoryDivergedError(step * cfg.dt, norm)
        snaps.append(x.copy())
        times.append(step * cfg.dt)
    if step < n_steps:
        # trailing partial interval: advance without recording
        x = advance(x, n_steps - step)
        if not np.all(np.isfinite(x)):
            raise TrajectoryDivergedError(n_steps * cfg.dt, float("inf"))
    return Trajectory(np.array(times), np.array(snaps), cfg.config_hash(), cfg.seed,
                      dt=cfg.dt * cfg.stride)


def evolve_ensemble(cfg: SimConfig, initial: np.ndarray, seed,
                    snapshot_steps: list[int]) -> np.ndarray:
    """Evolve a batch of states (K, M, 2) under independent noise paths.

    Returns an array (len(snapshot_steps), K, M, 2); snapshot step 0 is the
    initial batch.  Used for nested Monte Carlo semigroup estimates.
    """
    rng = np.random.default_rng(seed)
    x = np.array(initial, dtype=float)
    spectral = cfg.measure.spectral
    stochastic = cfg.scheme in STOCHASTIC_SCHEMES
    if stochastic:
        decay, sigma = _ou_coefficients(cfg.measure, cfg.dt, cfg.epsilon)
    wanted = sorted(set(snapshot_steps))
    out = np.empty((len(wanted), *x.shape))
    pos = 0
    if wanted[0] == 0:
        out[0] = x
        pos = 1
    for step in range(1, wanted[-1] + 1):
        if cfg.scheme == "ou_exact":
            x = decay * x + sigma * rng.standard_normal(x.shape)
        elif cfg.scheme == "expo_em":
            x = _expo_em_step(x, cfg, decay, sigma, rng.standard_normal(x.shape))
        else:
            raise ValueError("ensemble evolution supports stochastic schemes only")
        if pos < len(wanted) and step == wanted[pos]:
            if not np.all(np.isfinite(x)):
                raise TrajectoryDivergedError(step * cfg.dt, float("inf"))
            out[pos] = x
            pos += 1
    return out


def energy(state: ShellState) -> float:
    """E = |u|^2 / 2."""
    return 0.5 * float(np.sum(state.shells**2))


def quadratic_invariant(state: ShellState, beta: float) -> float:
    """S_beta = ||u||_beta^2 / 2 (the enstrophy when beta = 1)."""
    w = state.params.eigenvalues**beta
    return 0.5 * float(np.sum(w * np.sum(state.shells**2, axis=1)))
