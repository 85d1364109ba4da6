"""Time evolution: generator propagation, exact stochastic trajectories,
Monte Carlo ensemble averaging, and the deterministic quadrature map for
quasistatic noise.

Maps are stored through their deviation from the identity, W = V - 1.  All
producers build W directly (the integrator solves dW = L (1 + W), the
averagers subtract the identity per realization before accumulating), so
differences of nearby maps keep full precision; this is what makes the
short-time error scalings resolvable at the 1e-14 level.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .noise import NoiseModel, NoiseTrajectory, sample_values_batch
from .plme import DriveProfile, interaction_A
from .qmath import (COLUMN_STACKING, IDENTITY_2, IDENTITY_4, SIGMA_X, SIGMA_Y, SIGMA_Z,
                    vec, unvec)

PLME2 = "PLME2"
PLME4 = "PLME4"
ZEROTH_ORDER = "ZerothOrder"
EXACT_ENSEMBLE = "ExactEnsemble"
EXACT_QUADRATURE = "ExactQuadrature"
EXACT_TRAJECTORY = "ExactTrajectory"


class PropagationError(RuntimeError):
    def __init__(self, message: str, t_reached: float):
        super().__init__(f"{message} (reached t = {t_reached:.6g})")
        self.t_reached = t_reached


@dataclass(frozen=True)
class QuantumMap:
    """A linear map on qubit density matrices at a fixed time.

    ``deviation`` is superop - identity in the column-stacking basis; ``se``
    (ensemble maps only) carries per-entry standard errors of the real and
    imaginary parts as se_re + 1j*se_im.
    """

    deviation: np.ndarray
    t: float
    provenance: str
    basis_convention: str = COLUMN_STACKING
    se: np.ndarray | None = None
    n_traj: int | None = None

    @property
    def superop(self) -> np.ndarray:
        return IDENTITY_4 + self.deviation

    def trace_preservation_defect(self) -> float:
        left = np.array([1.0, 0.0, 0.0, 1.0]) @ self.deviation
        return float(np.abs(left).max())


def identity_map(t: float = 0.0, provenance: str = EXACT_QUADRATURE) -> QuantumMap:
    return QuantumMap(np.zeros((4, 4), dtype=complex), t, provenance)


# ---------------------------------------------------------------------------
# Master-equation propagation
# ---------------------------------------------------------------------------

def propagate_generator(gen, t0: float, t1: float, tol: float = 1e-9, *,
                        t_eval=None, atol: float | None = None,
                        method: str = "RK45", provenance: str = PLME2):
    """Time-ordered solution of dV/dt = L(t) V with V(t0) = 1.

    Returns a single map at t1, or a list at the requested ``t_eval`` times.
    ``tol`` is the relative local error tolerance of the embedded
    Runge-Kutta integrator.
    """
    if atol is None:
        atol = tol * 1e-4

    def rhs(s, y):
        w = y.view(complex).reshape(4, 4)
        return (gen(s) @ (IDENTITY_4 + w)).ravel().view(float)

    eval_times = None if t_eval is None else np.asarray(t_eval, dtype=float)
    sol = solve_ivp(rhs, (t0, t1), np.zeros(32), method=method, rtol=tol, atol=atol,
                    t_eval=eval_times, dense_output=False)
    if not sol.success:
        raise PropagationError(f"generator propagation failed: {sol.message}",
                               float(sol.t[-1]) if len(sol.t) else t0)
    cols = np.ascontiguousarray(sol.y.T)
    devs = [cols[k].view(complex).reshape(4, 4).copy() for k in range(cols.shape[0])]
    if t_eval is None:
        return QuantumMap(devs[-1], t1, provenance)
    return [QuantumMap(d, float(tk), provenance) for d, tk in zip(devs, sol.t)]


# ---------------------------------------------------------------------------
# Exact per-realization propagation
# ---------------------------------------------------------------------------

def _voronoi_boundaries(grid: np.ndarray) -> np.ndarray:
    """Interval boundaries assigning each sample its surrounding interval.

    A uniform midpoint grid (k + 1/2) dt maps back to boundaries k dt.
    """
    if len(grid) == 1:
        return np.array([0.0, 2.0 * grid[0]])
    mids = 0.5 * (grid[:-1] + grid[1:])
    first = max(0.0, grid[0] - 0.5 * (grid[1] - grid[0]))
    last = grid[-1] + 0.5 * (grid[-1] - grid[-2])
    return np.concatenate([[first], mids, [last]])


def _step_unitaries(values: np.ndarray, thetas: np.ndarray, dts: np.ndarray) -> np.ndarray:
    """exp(-i eta_k dt_k A(theta_k)) for each step, batched over a leading axis."""
    ang = values * dts  # (..., nsteps)
    a_ops = (np.cos(thetas)[:, None, None] * SIGMA_Z
             + np.sin(thetas)[:, None, None] * SIGMA_Y)
    return (np.cos(ang)[..., None, None] * IDENTITY_2
            - 1.0j * np.sin(ang)[..., None, None] * a_ops)


def exact_trajectory(traj: NoiseTrajectory, drive: DriveProfile, t: float | None = None) -> QuantumMap:
    """Unitary-conjugation map for one noise realization.

    The noise is held constant on each sample's surrounding interval and every
    step uses the exact 2x2 exponential; with midpoint sampling the scheme is
    second order in the step size.  ``t`` must be one of the interval
    boundaries (default: the final one).
    """
    bounds = _voronoi_boundaries(np.asarray(traj.grid, dtype=float))
    if t is None:
        n_steps = len(traj.grid)
        t = float(bounds[-1])
    else:
        k = int(np.argmin(np.abs(bounds - t)))
        if abs(bounds[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t = {t} is not a step boundary of the trajectory grid")
        n_steps = k
        t = float(bounds[k])
    u = IDENTITY_2.copy()
    thetas = np.asarray(drive.theta(traj.grid), dtype=float)
    dts = np.diff(bounds)
    steps = _step_unitaries(traj.values[None, :], thetas, dts[None, :])[0]
    for k in range(n_steps):
        u = steps[k] @ u
    dev = np.kron(u.conj(), u) - IDENTITY_4
    return QuantumMap(dev, t, EXACT_TRAJECTORY)


@dataclass(frozen=True)
class EnsembleConfig:
    """Monte Carlo ensemble settings; ``grid`` times must sit on step boundaries."""

    n_traj: int
    dt: float
    seed: int
    grid: np.ndarray
    n_batches: int = 20
    threads: int = 1

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be at least 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        g = np.asarray(self.grid, dtype=float)
        if g.size == 0 or np.any(g < 0):
            raise ValueError("grid must be nonempty and nonnegative")
        object.__setattr__(self, "grid", g)


@dataclass(frozen=True)
class EnsembleResult:
    """Ensemble-averaged maps plus per-batch means for error estimation."""

    grid: np.ndarray
    maps: list
    batch_deviations: np.ndarray  # (n_batches, len(grid), 4, 4)
    n_traj: int
    seed: int

    def expectation_series(self, rho0: np.ndarray, observable: np.ndarray):
        """Mean and standard error of Re Tr(rho(t) O) over the ensemble."""
        v0 = vec(rho0)
        vecs = np.einsum("bkij,j->bki", IDENTITY_4 + self.batch_deviations, v0)
        rhos = vecs.reshape(*vecs.shape[:2], 2, 2).transpose(0, 1, 3, 2)  # unvec
        per_batch = np.einsum("bkij,ji->bk", rhos, np.asarray(observable)).real
        mean = per_batch.mean(axis=0)
        se = per_batch.std(axis=0, ddof=1) / math.sqrt(per_batch.shape[0])
        return mean, se


def default_output_grid(t_max: float, dt: float) -> np.ndarray:
    """All step boundaries 0, dt, ..., t_max."""
    n = int(round(t_max / dt))
    return np.arange(n + 1) * dt


def exact_ensemble(noise: NoiseModel, drive: DriveProfile, cfg: EnsembleConfig) -> EnsembleResult:
    """Average the per-realization conjugation maps over ``cfg.n_traj`` draws.

    Trajectory i always uses substream i of ``cfg.seed``, so results are
    bitwise reproducible regardless of batching or thread count.
    """
    t_max = float(np.max(cfg.grid))
    n_steps = int(round(t_max / cfg.dt))
    if abs(n_steps * cfg.dt - t_max) > 1e-9 * max(1.0, t_max):
        raise ValueError("grid end time must be a multiple of dt")
    midpoints = (np.arange(n_steps) + 0.5) * cfg.dt
    out_idx = np.rint(cfg.grid / cfg.dt).astype(int)
    if np.abs(out_idx * cfg.dt - cfg.grid).max() > 1e-9 * max(1.0, t_max):
        raise ValueError("every grid time must sit on a step boundary")
    thetas = np.asarray(drive.theta(midpoints), dtype=float) if n_steps else np.empty(0)

    bounds = np.array_split(np.arange(cfg.n_traj), cfg.n_batches)
    bounds = [b for b in bounds if len(b)]

    def run_batch(streams: np.ndarray) -> np.ndarray:
        nb = len(streams)
        acc = np.zeros((len(out_idx), 4, 4), dtype=complex)
        if noise.sigma == 0.0 and noise.kind != "white":
            return acc
        values = sample_values_batch(noise, midpoints, cfg.seed, streams) if n_steps else np.zeros((nb, 0))
        u = np.broadcast_to(IDENTITY_2, (nb, 2, 2)).copy()
        want = {int(k): pos for pos, k in enumerate(out_idx)}
        if 0 in want:
            acc[want[0]] = 0.0
        steps = _step_unitaries(values, thetas, np.full(n_steps, cfg.dt)[None, :]) if n_steps else None
        for k in range(n_steps):
            u = steps[:, k] @ u
            if (k + 1) in want:
                m = np.einsum("nij,nab->iajb", u.conj(), u).reshape(4, 4) / nb
                acc[want[k + 1]] = m - IDENTITY_4
        return acc

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            batch_devs = list(pool.map(run_batch, bounds))
    else:
        batch_devs = [run_batch(b) for b in bounds]
    batch_devs = np.array(batch_devs)  # (B, nout, 4, 4)
    weights = np.array([len(b) for b in bounds], dtype=float)
    mean = np.einsum("b,bkij->kij", weights, batch_devs) / weights.sum()
    nb = batch_devs.shape[0]
    if nb > 1:
        se = (batch_devs.real.std(axis=0, ddof=1)
              + 1j * batch_devs.imag.std(axis=0, ddof=1)) / math.sqrt(nb)
    else:
        se = np.full((len(out_idx), 4, 4), np.nan, dtype=complex)
    maps = [QuantumMap(mean[k], float(cfg.grid[k]), EXACT_ENSEMBLE,
                       se=se[k], n_traj=cfg.n_traj)
            for k in range(len(out_idx))]
    return EnsembleResult(grid=np.asarray(cfg.grid, dtype=float), maps=maps,
                          batch_deviations=batch_devs, n_traj=cfg.n_traj, seed=cfg.seed)


# ---------------------------------------------------------------------------
# Deterministic exact map for quasistatic noise
# ---------------------------------------------------------------------------

def quasistatic_exact_map(sigma: float, omega: float, t: float, nodes: int = 80) -> QuantumMap:
    """Gauss-Hermite average of the exact interaction-frame propagator.

    For quasistatic noise each realization has the closed-form propagator
    exp(+i omega t sx/2) exp(-i (omega sx / 2 + eta sz) t); the average over
    eta ~ N(0, sigma^2) is replaced by Gauss-Hermite quadrature, which
    converges to machine precision for sigma * t of order unity.
    """
    if nodes < 2:
        raise ValueError("need at least 2 quadrature nodes")
    xs, ws = np.polynomial.hermite_e.hermegauss(nodes)
    ws = ws / ws.sum()
    etas = sigma * xs
    half = 0.5 * omega
    a = np.sqrt(half**2 + etas**2)
    safe_a = np.where(a == 0, 1.0, a)
    u0 = math.cos(half * t) * IDENTITY_2 + 1.0j * math.sin(half * t) * SIGMA_X
    h = half * SIGMA_X[None, :, :] + etas[:, None, None] * SIGMA_Z[None, :, :]
    uf = (np.cos(a * t)[:, None, None] * IDENTITY_2
          - 1.0j * (np.sin(a * t) / safe_a)[:, None, None] * h)
    u = np.einsum("ij,njk->nik", u0, uf)
    dev = np.einsum("n,nij,nab->iajb", ws, u.conj(), u).reshape(4, 4) - IDENTITY_4
    return QuantumMap(dev, t, EXACT_QUADRATURE)


def quasistatic_exact_maps(sigma: float, omega: float, times, nodes: int = 80) -> list:
    return [quasistatic_exact_map(sigma, omega, float(t), nodes) for t in np.asarray(times)]


# ---------------------------------------------------------------------------
# States and expectation values
# ---------------------------------------------------------------------------

def evolve_state(qmap: QuantumMap, rho0: np.ndarray) -> np.ndarray:
    """Apply the map to a density matrix: rho(t) = unvec(superop vec(rho0))."""
    rho0 = np.asarray(rho0, dtype=complex)
    if abs(np.trace(rho0) - 1.0) > 1e-8:
        raise ValueError("initial state must have unit trace")
    if np.abs(rho0 - rho0.conj().T).max() > 1e-8:
        raise ValueError("initial state must be Hermitian")
    return unvec(qmap.superop @ vec(rho0))


def expectation(rho: np.ndarray, observable: np.ndarray) -> float:
    return float(np.real(np.trace(np.asarray(rho) @ np.asarray(observable))))


# ---------------------------------------------------------------------------
# Binary map cache
# ---------------------------------------------------------------------------

_MAGIC = "plme-map-cache"


def save_maps(path, maps: list, *, seed: int | None = None,
              batch_deviations: np.ndarray | None = None,
              extra: dict | None = None) -> None:
    """Serialize a map time series.

    Layout: one JSON header line (utf-8, newline-terminated), then the map
    blocks in grid order, then optional standard-error and per-batch blocks.
    Every block is a row-major 4x4 complex matrix as little-endian f64 with
    interleaved real/imaginary parts.
    """
    header = {
        "format": _MAGIC,
        "version": 1,
        "stored": "deviation_from_identity",
        "basis": maps[0].basis_convention,
        "provenance": maps[0].provenance,
        "t": [float(m.t) for m in maps],
        "seed": seed,
        "n_traj": maps[0].n_traj,
        "has_se": all(m.se is not None for m in maps),
        "n_batches": 0 if batch_deviations is None else int(batch_deviations.shape[0]),
    }
    if extra:
        header.update(extra)

    def block(m: np.ndarray) -> bytes:
        inter = np.empty((4, 4, 2))
        inter[..., 0] = m.real
        inter[..., 1] = m.imag
        return inter.astype("<f8").tobytes()

    buf = io.BytesIO()
    buf.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
    for m in maps:
        buf.write(block(m.deviation))
    if header["has_se"]:
        for m in maps:
            buf.write(block(m.se))
    if batch_deviations is not None:
        for b in range(batch_deviations.shape[0]):
            for k in range(batch_deviations.shape[1]):
                buf.write(block(batch_deviations[b, k]))
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_maps(path):
    """Inverse of :func:`save_maps`; returns (maps, batch_deviations, header)."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != _MAGIC:
            raise ValueError(f"{path} is not a map cache file")
        raw = fh.read()

    def read_block(offset: int) -> tuple[np.ndarray, int]:
        flat = np.frombuffer(raw, dtype="<f8", count=32, offset=offset).reshape(4, 4, 2)
        return flat[..., 0] + 1.0j * flat[..., 1], offset + 32 * 8

    times = header["t"]
    off = 0
    devs, ses = [], []
    for _ in times:
        d, off = read_block(off)
        devs.append(d)
    if header["has_se"]:
        for _ in times:
            s, off = read_block(off)
            ses.append(s)
    batches = None
    nb = header.get("n_batches", 0)
    if nb:
        batches = np.empty((nb, len(times), 4, 4), dtype=complex)
        for b in range(nb):
            for k in range(len(times)):
                batches[b, k], off = read_block(off)
    maps = [QuantumMap(devs[k], float(times[k]), header["provenance"],
                       basis_convention=header.get("basis", COLUMN_STACKING),
                       se=ses[k] if ses else None, n_traj=header.get("n_traj"))
            for k in range(len(times))]
    return maps, batches, header
