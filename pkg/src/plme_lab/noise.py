"""Gaussian stationary noise models and their exact trajectory samplers.

All frequencies are in units of the Rabi frequency (angular), times in its
inverse.  The 1/f model has spectral density sigma^2 * 2*pi/|w| between the
cutoffs; its autocorrelation is 2*sigma^2*(Ci(w_h|t|) - Ci(w_l|t|)), which for
w_h -> infinity reduces to -2*sigma^2*Ci(w_l|t|) (divergent at t = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox, SeedSequence
from scipy.special import sici

QUASISTATIC = "quasistatic"
ORNSTEIN_UHLENBECK = "ornstein_uhlenbeck"
ONE_OVER_F = "one_over_f"
WHITE = "white"

KINDS = (QUASISTATIC, ORNSTEIN_UHLENBECK, ONE_OVER_F, WHITE)

#: Number of spectral-synthesis modes for 1/f trajectories.
ONE_OVER_F_MODES = 512
#: Default high-frequency cutoff for 1/f sampling when none is given.
DEFAULT_OMEGA_H = 1.0e3


def cosint(x):
    """Cosine integral Ci(x) = -int_x^inf dt cos(t)/t, for x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("cosint is defined for positive arguments only")
    return sici(x)[1]


def sinint(x):
    """Sine integral Si(x) = int_0^x dt sin(t)/t."""
    return sici(np.asarray(x, dtype=float))[0]


@dataclass(frozen=True)
class NoiseModel:
    """A zero-mean Gaussian stationary process, identified by its autocorrelation."""

    kind: str
    sigma: float = 0.0
    tau_c: float | None = None
    omega_l: float | None = None
    omega_h: float | None = None
    diffusion: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {KINDS}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.kind == ORNSTEIN_UHLENBECK:
            if self.tau_c is None or self.tau_c <= 0:
                raise ValueError("Ornstein-Uhlenbeck noise needs tau_c > 0")
        if self.kind == ONE_OVER_F:
            if self.omega_l is None or self.omega_l <= 0:
                raise ValueError("1/f noise needs omega_l > 0")
            if self.omega_h is not None and not self.omega_l < self.omega_h:
                raise ValueError("1/f noise needs omega_l < omega_h")
        if self.kind == WHITE and (self.diffusion is None or self.diffusion < 0):
            raise ValueError("white noise needs a nonnegative diffusion weight")

    @classmethod
    def quasistatic(cls, sigma: float) -> "NoiseModel":
        return cls(QUASISTATIC, sigma=sigma)

    @classmethod
    def ornstein_uhlenbeck(cls, sigma: float, tau_c: float) -> "NoiseModel":
        return cls(ORNSTEIN_UHLENBECK, sigma=sigma, tau_c=tau_c)

    @classmethod
    def one_over_f(cls, sigma: float, omega_l: float,
                   omega_h: float | None = None) -> "NoiseModel":
        """1/f model; ``omega_h=None`` selects the analytic large-cutoff form."""
        return cls(ONE_OVER_F, sigma=sigma, omega_l=omega_l, omega_h=omega_h)

    @classmethod
    def white(cls, diffusion: float) -> "NoiseModel":
        return cls(WHITE, diffusion=diffusion)

    @property
    def sampling_omega_h(self) -> float:
        """High cutoff actually used by the trajectory sampler."""
        return self.omega_h if self.omega_h is not None else DEFAULT_OMEGA_H

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for name in ("sigma", "tau_c", "omega_l", "omega_h", "diffusion"):
            val = getattr(self, name)
            if val is not None and not (name == "sigma" and self.kind == WHITE):
                out[name] = float(val)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseModel":
        known = {"kind", "sigma", "tau_c", "omega_l", "omega_h", "diffusion"}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown noise fields: {sorted(extra)}")
        return cls(**data)


def autocorr(model: NoiseModel, t):
    """Autocorrelation S(t); even in t.

    For 1/f with an infinite high cutoff the value diverges logarithmically at
    t = 0, which raises a ValueError.
    """
    t = np.asarray(t, dtype=float)
    at = np.abs(t)
    if model.kind == QUASISTATIC:
        return np.broadcast_to(model.sigma**2, at.shape).copy() if at.ndim else model.sigma**2
    if model.kind == ORNSTEIN_UHLENBECK:
        return model.sigma**2 * np.exp(-at / model.tau_c)
    if model.kind == ONE_OVER_F:
        if model.omega_h is None:
            if np.any(at == 0):
                raise ValueError("1/f autocorrelation diverges at t = 0 for an infinite high cutoff")
            return -2.0 * model.sigma**2 * cosint(model.omega_l * at)
        out = np.where(at == 0,
                       2.0 * model.sigma**2 * math.log(model.omega_h / model.omega_l),
                       2.0 * model.sigma**2 * (_ci_safe(model.omega_h * at) - _ci_safe(model.omega_l * at)))
        return out if out.ndim else float(out)
    # white: delta weight, only the t != 0 value is representable
    return np.where(at == 0, np.inf, 0.0) if at.ndim else (np.inf if at == 0 else 0.0)


def _ci_safe(x):
    x = np.asarray(x, dtype=float)
    return sici(np.where(x == 0, 1.0, x))[1]


@dataclass(frozen=True)
class NoiseTrajectory:
    """Samples of one noise realization on a time grid."""

    grid: np.ndarray
    values: np.ndarray
    seed: int
    stream: int

    def __post_init__(self):
        if len(self.values) != len(self.grid):
            raise ValueError("trajectory grid and values must have equal length")


def _substream(seed: int, stream: int) -> Generator:
    return Generator(Philox(SeedSequence(entropy=seed, spawn_key=(stream,))))


def _check_grid(grid: np.ndarray):
    if grid.size == 0:
        raise ValueError("empty trajectory grid")
    if grid[0] < 0:
        raise ValueError("trajectory grid must start at t >= 0")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("trajectory grid must be strictly increasing")


def _onef_bins(model: NoiseModel) -> tuple[np.ndarray, float]:
    """Log-spaced frequency bins and the common mode amplitude for 1/f synthesis.

    One mode per bin, drawn log-uniformly inside it, with the constant
    amplitude A^2 = 4 sigma^2 dln(w).  Averaged over the frequency draw, each
    bin contributes exactly 2 sigma^2 int_bin cos(w t) dw / w to the lagged
    covariance, so the ensemble autocorrelation matches
    2 sigma^2 (Ci(w_h|t|) - Ci(w_l|t|)) bin by bin (a fixed frequency comb
    instead leaves an aliasing residue from the top decades at short lags).
    """
    wl, wh = model.omega_l, model.sampling_omega_h
    m = ONE_OVER_F_MODES
    edges = wl * (wh / wl) ** (np.arange(m + 1) / m)
    dlog = math.log(wh / wl) / m
    amp = math.sqrt(4.0 * model.sigma**2 * dlog)
    return edges, amp


def sample_values_batch(model: NoiseModel, grid, seed: int, streams) -> np.ndarray:
    """Sample len(streams) trajectories on a common grid, one row per stream.

    Row i is bitwise identical to ``sample_trajectory(model, grid, seed,
    streams[i]).values``, whatever the batching.
    """
    grid = np.asarray(grid, dtype=float)
    _check_grid(grid)
    streams = np.asarray(streams, dtype=int)
    n, m = len(streams), len(grid)
    out = np.empty((n, m))
    if model.kind == QUASISTATIC:
        for i, s in enumerate(streams):
            out[i] = model.sigma * _substream(seed, int(s)).standard_normal()
    elif model.kind == ORNSTEIN_UHLENBECK:
        xi = np.empty((n, m))
        for i, s in enumerate(streams):
            xi[i] = _substream(seed, int(s)).standard_normal(m)
        steps = np.diff(grid)
        decay = np.exp(-steps / model.tau_c)
        kick = model.sigma * np.sqrt(1.0 - decay**2)
        out[:, 0] = model.sigma * xi[:, 0]
        for k in range(m - 1):
            out[:, k + 1] = out[:, k] * decay[k] + kick[k] * xi[:, k + 1]
    elif model.kind == ONE_OVER_F:
        edges, amp = _onef_bins(model)
        ratios = edges[1:] / edges[:-1]
        nm_ = ONE_OVER_F_MODES
        steps = np.diff(grid)
        uniform = m > 1 and np.abs(steps - steps[0]).max() < 1e-12 * max(steps[0], 1.0)
        chunk = 512 if uniform else max(1, int(2e7 / (nm_ * m)))
        for lo in range(0, n, chunk):
            hi = min(n, lo + chunk)
            draws = np.empty((hi - lo, 2, nm_))
            for i in range(lo, hi):
                # draw order per trajectory: phases first, then log-positions
                draws[i - lo] = _substream(seed, int(streams[i])).uniform(0.0, 1.0, (2, nm_))
            coef = amp * np.exp(2.0j * np.pi * draws[:, 0, :])   # amp * e^{i phi_k}
            omegas = edges[:-1] * ratios ** draws[:, 1, :]
            if uniform:
                # eta(t_j) = Re sum_k coef_k e^{i w_k t_j}, advanced by one
                # fixed phase factor per step (phase drift ~ n_steps * eps)
                carrier = np.exp(1j * omegas * grid[0])
                advance = np.exp(1j * omegas * steps[0])
                for j in range(m):
                    out[lo:hi, j] = np.einsum("nk,nk->n", coef, carrier).real
                    if j + 1 < m:
                        carrier *= advance
            else:
                phase = np.exp(1j * omegas[:, :, None] * grid[None, None, :])
                out[lo:hi] = np.einsum("nk,nkt->nt", coef, phase).real
    elif model.kind == WHITE:
        # discrete white noise: var D / dt_k from the local grid spacing
        dts = np.empty(m)
        if m == 1:
            raise ValueError("white-noise sampling needs at least two grid points to set a scale")
        dts[:-1] = np.diff(grid)
        dts[-1] = dts[-2]
        sd = np.sqrt(model.diffusion / dts)
        for i, s in enumerate(streams):
            out[i] = sd * _substream(seed, int(s)).standard_normal(m)
    else:  # pragma: no cover
        raise ValueError(model.kind)
    return out


def analytic_variant(model: NoiseModel) -> NoiseModel:
    """The large-high-cutoff form of a 1/f model (other kinds unchanged).

    Trajectory synthesis needs a finite omega_h; the analytic generator
    expressions take the cutoff to infinity.  At omega_h = 1e3 the two kernels
    differ at the 1e-3 relative level over drive-period lags.
    """
    if model.kind == ONE_OVER_F and model.omega_h is not None:
        return NoiseModel.one_over_f(model.sigma, model.omega_l, None)
    return model


def sample_trajectory(model: NoiseModel, grid, seed: int, stream: int = 0) -> NoiseTrajectory:
    """Draw one realization of the process on a strictly increasing grid.

    The (seed, stream) pair is a reproducibility contract: equal inputs give
    bitwise-equal values.  Distinct streams are statistically independent.
    """
    grid = np.asarray(grid, dtype=float)
    values = sample_values_batch(model, grid, seed, [stream])[0]
    return NoiseTrajectory(grid=grid, values=values, seed=seed, stream=stream)
