"""Cumulant engine for the driven qubit under Gaussian noise.

Provides the 2nd-order generator parameters (two signed dephasing rates, the
memory angle, and the coherent correction along x) by adaptive quadrature for
any model, closed forms for constant drive, the 4th-order correction
superoperator by nested quadrature over the ordered time simplex, and the
naive 0th-order generator used as a comparison baseline.

Gauge convention: the normalized rate amplitude is kept nonnegative and the
angle ``phi`` lives in (-pi, pi]; the jump-operator pair absorbs the sign.
With that choice gamma_plus >= 0 >= gamma_minus always, and
gamma_plus + gamma_minus = (gamma_plus - gamma_minus) * cos(phi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from . import noise as noise_mod
from .noise import NoiseModel, cosint, sinint
from .qmath import SIGMA_X, SIGMA_Y, SIGMA_Z, IDENTITY_2, commutator_superop, dissipator


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved tolerance {achieved:.3e})")
        self.achieved = achieved


@dataclass(frozen=True)
class DriveProfile:
    """Rabi drive: amplitude, accumulated angle, and coupling strength.

    ``omega`` is the constant amplitude when ``omega_fn`` is None; the
    accumulated angle defaults to omega * t.  ``g`` is the dimensionless
    noise-coupling strength (1 for the qubit model).
    """

    omega: float = 1.0
    omega_fn: Callable[[float], float] | None = None
    theta_fn: Callable[[float], float] | None = None
    g_fn: Callable[[float], float] | None = None

    @classmethod
    def constant(cls, omega: float) -> "DriveProfile":
        return cls(omega=omega)

    @property
    def is_constant(self) -> bool:
        return self.omega_fn is None and self.theta_fn is None and self.g_fn is None

    def omega_at(self, t: float) -> float:
        return self.omega_fn(t) if self.omega_fn is not None else self.omega

    def theta(self, t):
        if self.theta_fn is not None:
            return self.theta_fn(t)
        return self.omega * np.asarray(t, dtype=float)

    def g(self, t):
        if self.g_fn is not None:
            return self.g_fn(t)
        return np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else 1.0


def interaction_A(drive: DriveProfile, t):
    """Interaction-frame coupling operator cos(theta) sz + sin(theta) sy."""
    th = np.asarray(drive.theta(t), dtype=float)
    return (np.cos(th)[..., None, None] * SIGMA_Z
            + np.sin(th)[..., None, None] * SIGMA_Y) if th.ndim else (
        math.cos(th) * SIGMA_Z + math.sin(th) * SIGMA_Y)


@dataclass(frozen=True)
class PlmeParams:
    """Generator parameters of the pseudo-Lindblad equation at one time."""

    t: float
    gamma_plus: float
    gamma_minus: float
    phi: float
    h_ren_coeff: float
    theta: float
    gamma_x: float | None = None
    order: int = 2

    @property
    def theta_tilde(self) -> float:
        return 0.5 * self.phi + self.theta

    def rate_identity_residual(self) -> float:
        """|G+ + G- - (G+ - G-) cos(phi)|; zero by construction of the gauge."""
        return abs(self.gamma_plus + self.gamma_minus
                   - (self.gamma_plus - self.gamma_minus) * math.cos(self.phi))


def _params_from_components(t, theta, g_par, g_perp, gamma_x=None, order=2) -> PlmeParams:
    # g_par = Gtilde cos(phi), g_perp = Gtilde sin(phi); Gtilde >= 0 gauge.
    gt = math.hypot(g_par, g_perp)
    phi = math.atan2(g_perp, g_par) if gt > 0 else 0.0
    return PlmeParams(t=t, gamma_plus=g_par + gt, gamma_minus=g_par - gt, phi=phi,
                      h_ren_coeff=-g_perp, theta=theta, gamma_x=gamma_x, order=order)


# ---------------------------------------------------------------------------
# Generic second-order parameters by adaptive quadrature
# ---------------------------------------------------------------------------

def plme_params_quadrature(noise: NoiseModel, drive: DriveProfile, t: float,
                           tol: float = 1e-12) -> PlmeParams:
    """Second-order parameters from the memory integrals, by adaptive quadrature.

    Integrates S(t - t1) g(t1) (cos, sin)(theta(t1)) over [0, t] and projects
    onto the directions parallel and perpendicular to the instantaneous
    coupling operator.  The normalization integral never enters as a
    denominator, so the parameters stay well defined when it crosses zero.
    The logarithmic endpoint singularity of the large-cutoff 1/f kernel is
    removed by the substitution u = -log(omega_l (t - t1)).
    """
    if noise.kind == noise_mod.WHITE:
        g = drive.g(t)
        return _params_from_components(t, float(drive.theta(t)),
                                       0.5 * noise.diffusion * g * g, 0.0)
    if t == 0:
        return _params_from_components(0.0, float(drive.theta(0.0)), 0.0, 0.0)
    if t < 0:
        raise ValueError("time must be nonnegative")

    def trig_pair(t1):
        th = drive.theta(t1)
        return math.cos(th), math.sin(th)

    if noise.kind == noise_mod.ONE_OVER_F:
        # log substitution u = -ln(w_l (t - t1)) resolves the kernel's short-lag
        # structure (a log divergence for the infinite cutoff, a 1/omega_h-wide
        # shoulder otherwise) that defeats panel refinement in t1
        wl = noise.omega_l
        u0 = -math.log(wl * t)
        u1 = u0 + 42.0  # exp(-42) tail, below double precision relative to the bulk

        def integrand(u, comp):
            s = math.exp(-u) / wl
            t1 = t - s
            w = autocorr_scalar(noise, s) * s * float(drive.g(t1))
            return w * trig_pair(t1)[comp]

        nz = _quad_checked(lambda u: integrand(u, 0), u0, u1, tol)
        ny = _quad_checked(lambda u: integrand(u, 1), u0, u1, tol)
    else:
        def integrand(t1, comp):
            w = float(autocorr_scalar(noise, t - t1)) * float(drive.g(t1))
            return w * trig_pair(t1)[comp]

        nz = _quad_checked(lambda t1: integrand(t1, 0), 0.0, t, tol)
        ny = _quad_checked(lambda t1: integrand(t1, 1), 0.0, t, tol)

    theta_t = float(drive.theta(t))
    gt_now = float(drive.g(t))
    ct, st = math.cos(theta_t), math.sin(theta_t)
    g_par = gt_now * (ct * nz + st * ny)
    g_perp = gt_now * (-st * nz + ct * ny)
    return _params_from_components(t, theta_t, g_par, g_perp)


def autocorr_scalar(noise: NoiseModel, s: float) -> float:
    if noise.kind == noise_mod.QUASISTATIC:
        return noise.sigma**2
    if noise.kind == noise_mod.ORNSTEIN_UHLENBECK:
        return noise.sigma**2 * math.exp(-abs(s) / noise.tau_c)
    if noise.kind == noise_mod.ONE_OVER_F:
        hi = cosint(noise.omega_h * abs(s)) if noise.omega_h is not None else 0.0
        return 2.0 * noise.sigma**2 * (float(hi) - float(cosint(noise.omega_l * abs(s))))
    raise ValueError(f"no pointwise autocorrelation for kind {noise.kind!r}")


def _quad_checked(f, a, b, tol) -> float:
    val, abserr, info, *rest = quad(f, a, b, epsabs=tol, epsrel=tol,
                                    limit=500, full_output=True)
    if rest:  # message present => warning raised by QUADPACK
        if abserr > 100 * max(tol, 1e-15) * max(1.0, abs(val)):
            raise QuadratureError("memory-integral quadrature did not converge", abserr)
    return val


# ---------------------------------------------------------------------------
# Closed forms (constant drive)
# ---------------------------------------------------------------------------

def plme_params_closed(noise: NoiseModel, omega: float, t: float, *,
                       with_gamma_x: bool = False,
                       onef_exact_freqs: bool = False) -> PlmeParams:
    """Analytic second-order parameters for constant Rabi drive.

    For 1/f noise the default reproduces the large-cutoff expressions with the
    sideband frequencies Omega +- omega_l collapsed onto Omega;
    ``onef_exact_freqs=True`` keeps them distinct, which is exact for the
    large-cutoff kernel and matches the quadrature path to machine precision.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    kind = noise.kind
    gx = gamma_x_closed(noise, omega, t) if (with_gamma_x and kind != noise_mod.ONE_OVER_F) else None
    order = 4 if gx is not None else 2

    if kind == noise_mod.WHITE:
        return _params_from_components(t, omega * t, 0.5 * noise.diffusion, 0.0, gx, order)

    s2 = noise.sigma**2
    x = omega * t
    if kind == noise_mod.QUASISTATIC:
        if omega == 0.0:
            return _params_from_components(t, 0.0, s2 * t, 0.0, gx, order)
        g_par = s2 * math.sin(x) / omega
        g_perp = -s2 * (1.0 - math.cos(x)) / omega
        return _params_from_components(t, x, g_par, g_perp, gx, order)

    if kind == noise_mod.ORNSTEIN_UHLENBECK:
        tc = noise.tau_c
        u = math.exp(-t / tc)
        if omega == 0.0:
            return _params_from_components(t, 0.0, s2 * tc * (1.0 - u), 0.0, gx, order)
        y = omega * tc
        pref = s2 * tc / (y * y + 1.0)
        g_par = pref * (u * (y * math.sin(x) - math.cos(x)) + 1.0)
        g_perp = pref * (u * (y * math.cos(x) + math.sin(x)) - y)
        return _params_from_components(t, x, g_par, g_perp, gx, order)

    if kind == noise_mod.ONE_OVER_F:
        if omega <= 0.0:
            raise ValueError("1/f closed forms need a positive drive amplitude")
        gu, gv = _onef_g_functions(noise.omega_l, omega, t, exact_freqs=onef_exact_freqs)
        g_par = -2.0 * s2 * gu / omega
        g_perp = -2.0 * s2 * gv / omega
        return _params_from_components(t, x, g_par, g_perp, None, 2)

    raise ValueError(f"unsupported noise kind {kind!r}")


def _onef_g_functions(wl: float, omega: float, t: float, *, exact_freqs: bool):
    if t == 0.0:
        return 0.0, 0.0
    ci_l = float(cosint(wl * t))
    x = omega * t
    if not exact_freqs:
        gu = math.sin(x) * ci_l - float(sinint(x))
        gv = math.cos(x) * ci_l + math.log(omega / wl) - float(cosint(x))
    else:
        sp, sm = float(sinint((omega + wl) * t)), float(sinint((omega - wl) * t))
        cp, cm = float(cosint((omega + wl) * t)), float(cosint((omega - wl) * t))
        gu = math.sin(x) * ci_l - 0.5 * (sp + sm)
        gv = (math.cos(x) * ci_l + 0.5 * math.log((omega * omega - wl * wl) / (wl * wl))
              - 0.5 * (cp + cm))
    return gu, gv


def gamma_x_closed(noise: NoiseModel, omega: float, t: float) -> float:
    """Analytic 4th-order x-dephasing rate for constant drive.

    Not available in closed form for 1/f noise; use
    :func:`r4_superoperator` there.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    kind = noise.kind
    if kind == noise_mod.WHITE:
        return 0.0
    if kind == noise_mod.ONE_OVER_F:
        raise ValueError("no closed 4th-order x rate for 1/f noise; use r4_superoperator")
    if omega == 0.0:
        return 0.0
    x = omega * t
    if kind == noise_mod.QUASISTATIC:
        return (2.0 * noise.sigma**4 / omega**3) * (
            2.0 * x - 2.0 * x * math.cos(x) + math.sin(2.0 * x) - 2.0 * math.sin(x))
    if kind == noise_mod.ORNSTEIN_UHLENBECK:
        tc = noise.tau_c
        y2 = (omega * tc) ** 2
        b1 = (y2 * y2 - math.sin(2 * x) * (omega * tc) ** 3
              + omega**2 * (3.0 * math.cos(2 * x) + 2.0) * tc**2
              + 3.0 * math.sin(2 * x) * omega * tc - math.cos(2 * x) + 1.0)
        b2 = (y2 * (math.cos(x) * x + math.sin(x))
              + 2.0 * omega**2 * t * tc * math.sin(x)
              - x * math.cos(x) + math.sin(x))
        return 2.0 * noise.sigma**4 * (
            tc**5 * omega**2 * (y2 + 5.0) / (y2 + 1.0) ** 3
            - tc**3 * math.exp(-2.0 * t / tc) * b1 / (y2 + 1.0) ** 3
            - 2.0 * tc**2 * math.exp(-t / tc) * b2 / ((y2 + 1.0) ** 2 * omega))
    raise ValueError(f"unsupported noise kind {kind!r}")


# ---------------------------------------------------------------------------
# 4th-order correction superoperator
# ---------------------------------------------------------------------------

class R4ConvergenceError(RuntimeError):
    pass


def _simplex_nodes(t: float, nodes: int, cluster: bool):
    x, w = leggauss(nodes)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    if cluster:
        # cubic clustering toward x = 1 tames the logarithmic kernel faces
        y = x
        x = 1.0 - (1.0 - y) ** 3
        w = w * 3.0 * (1.0 - y) ** 2
    X1, X2, X3 = np.meshgrid(x, x, x, indexing="ij")
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    t1 = (t * X1).ravel()
    t2 = t1 * X2.ravel()
    t3 = t2 * X3.ravel()
    return t1, t2, t3, W * t * t1 * t2


def _comm_superop_batch(theta: np.ndarray) -> np.ndarray:
    """-i[A(theta), .] for an array of angles, shape (n, 4, 4)."""
    a = (np.cos(theta)[:, None, None] * SIGMA_Z
         + np.sin(theta)[:, None, None] * SIGMA_Y)
    eye = np.broadcast_to(IDENTITY_2, a.shape)
    left = np.einsum("nij,nab->niajb", eye, a).reshape(-1, 4, 4)
    right = np.einsum("nij,nab->niajb", np.transpose(a, (0, 2, 1)), eye).reshape(-1, 4, 4)
    return -1.0j * (left - right)


def r4_superoperator(noise: NoiseModel, drive: DriveProfile, t: float,
                     nodes: int = 24, *, check_nodes: int | None = None,
                     check_tol: float = 1e-8) -> np.ndarray:
    """4th-order cumulant superoperator at time t, by simplex quadrature.

    Tensorized Gauss-Legendre on the ordered simplex 0 <= t3 <= t2 <= t1 <= t;
    when ``check_nodes`` is given the result is re-evaluated at that node
    count and the two are required to agree within ``check_tol`` of the noise
    scale sigma^4 * max(t, 1).
    """
    val = _r4_eval(noise, drive, t, nodes)
    if check_nodes is not None:
        ref = _r4_eval(noise, drive, t, check_nodes)
        scale = max(noise.sigma**4 * max(t, 1.0), 1e-300)
        err = float(np.abs(val - ref).max()) / scale
        if err > check_tol:
            raise R4ConvergenceError(
                f"4th-order quadrature changed by {err:.3e} (relative to noise scale) "
                f"between {nodes} and {check_nodes} nodes")
    return val


def _r4_eval(noise: NoiseModel, drive: DriveProfile, t: float, nodes: int) -> np.ndarray:
    if t == 0.0 or noise.sigma == 0.0:
        return np.zeros((4, 4), dtype=complex)
    cluster = noise.kind == noise_mod.ONE_OVER_F
    t1, t2, t3, w = _simplex_nodes(t, nodes, cluster)
    L1 = _comm_superop_batch(np.asarray(drive.theta(t1)))
    L2 = _comm_superop_batch(np.asarray(drive.theta(t2)))
    L3 = _comm_superop_batch(np.asarray(drive.theta(t3)))
    S = lambda s: _autocorr_batch(noise, s)
    s02_13 = S(t - t2) * S(t1 - t3)
    s03_12 = S(t - t3) * S(t1 - t2)
    c12 = L1 @ L2 - L2 @ L1
    c23 = L2 @ L3 - L3 @ L2
    c13 = L1 @ L3 - L3 @ L1
    f = s02_13[:, None, None] * (c12 @ L3) + s03_12[:, None, None] * (L1 @ c23 + c13 @ L2)
    integral = np.einsum("n,nij->ij", w, f)
    lt = commutator_superop(interaction_A(drive, t))
    return lt @ integral


def _autocorr_batch(noise: NoiseModel, s: np.ndarray) -> np.ndarray:
    s = np.abs(np.asarray(s, dtype=float))
    if noise.kind == noise_mod.QUASISTATIC:
        return np.full(s.shape, noise.sigma**2)
    if noise.kind == noise_mod.ORNSTEIN_UHLENBECK:
        return noise.sigma**2 * np.exp(-s / noise.tau_c)
    if noise.kind == noise_mod.ONE_OVER_F:
        safe = np.where(s == 0, 1e-300, s)
        hi = cosint(noise.omega_h * safe) if noise.omega_h is not None else 0.0
        return 2.0 * noise.sigma**2 * (hi - cosint(noise.omega_l * safe))
    raise ValueError(f"no pointwise autocorrelation for kind {noise.kind!r}")


# ---------------------------------------------------------------------------
# Generator assembly
# ---------------------------------------------------------------------------

def jump_operators(params: PlmeParams) -> tuple[np.ndarray, np.ndarray]:
    """The rotated Pauli pair attached to (gamma_plus, gamma_minus)."""
    tt = params.theta_tilde
    tau_u = math.cos(tt) * SIGMA_Z + math.sin(tt) * SIGMA_Y
    tau_v = -math.sin(tt) * SIGMA_Z + math.cos(tt) * SIGMA_Y
    return tau_u, tau_v


def plme_liouvillian(params: PlmeParams) -> np.ndarray:
    """Assemble the generator from its parameters (column-stacking superop)."""
    tau_u, tau_v = jump_operators(params)
    gen = commutator_superop(params.h_ren_coeff * SIGMA_X)
    gen = gen + params.gamma_plus * dissipator(tau_u) + params.gamma_minus * dissipator(tau_v)
    if params.order >= 4 and params.gamma_x is not None:
        gen = gen + params.gamma_x * dissipator(SIGMA_X)
    return gen


def zeroth_order_rate(noise: NoiseModel, t: float) -> float:
    """Drive-independent dephasing rate of the naive comparison equation."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    kind = noise.kind
    if kind == noise_mod.QUASISTATIC:
        return 2.0 * noise.sigma**2 * t
    if kind == noise_mod.ORNSTEIN_UHLENBECK:
        return 2.0 * noise.sigma**2 * noise.tau_c * (1.0 - math.exp(-t / noise.tau_c))
    if kind == noise_mod.ONE_OVER_F:
        if t == 0.0:
            return 0.0
        x = noise.omega_l * t
        rate = 4.0 * noise.sigma**2 * t * (math.sin(x) / x - float(cosint(x)))
        if noise.omega_h is not None:
            xh = noise.omega_h * t
            rate -= 4.0 * noise.sigma**2 * t * (math.sin(xh) / xh - float(cosint(xh)))
        return rate
    if kind == noise_mod.WHITE:
        return noise.diffusion
    raise ValueError(f"unsupported noise kind {kind!r}")


def zeroth_order_liouvillian(noise: NoiseModel, drive: DriveProfile, t: float) -> np.ndarray:
    """Naive generator: undriven dephasing rate, drive only in the jump operator."""
    return zeroth_order_rate(noise, t) * dissipator(interaction_A(drive, t))


def plme2_generator(noise: NoiseModel, drive: DriveProfile, *,
                    quad_tol: float = 1e-12) -> Callable[[float], np.ndarray]:
    """Time-dependent 2nd-order generator, closed-form when available."""
    closed_ok = drive.is_constant and noise.kind in (
        noise_mod.QUASISTATIC, noise_mod.ORNSTEIN_UHLENBECK, noise_mod.WHITE)
    onef_closed = drive.is_constant and noise.kind == noise_mod.ONE_OVER_F \
        and noise.omega_h is None and drive.omega > 0

    def gen(t: float) -> np.ndarray:
        if closed_ok:
            p = plme_params_closed(noise, drive.omega, t)
        elif onef_closed:
            p = plme_params_closed(noise, drive.omega, t, onef_exact_freqs=True)
        else:
            p = plme_params_quadrature(noise, drive, t, tol=quad_tol)
        return plme_liouvillian(p)

    return gen


def plme4_generator(noise: NoiseModel, drive: DriveProfile, t_max: float, *,
                    grid_points: int = 321, nodes: int = 24,
                    quad_tol: float = 1e-12) -> Callable[[float], np.ndarray]:
    """2nd-order generator plus the spline-interpolated 4th-order correction."""
    base = plme2_generator(noise, drive, quad_tol=quad_tol)
    grid = np.linspace(0.0, t_max, grid_points)
    r4 = np.array([_r4_eval(noise, drive, t, nodes) for t in grid])
    spline = CubicSpline(grid, r4.reshape(len(grid), -1), axis=0)

    def gen(t: float) -> np.ndarray:
        if t > t_max * (1.0 + 1e-12) + 1e-12:
            raise ValueError(f"4th-order generator tabulated only up to t = {t_max}")
        return base(t) + spline(min(t, t_max)).reshape(4, 4)

    return gen


def params_series(noise: NoiseModel, drive: DriveProfile, times, *,
                  closed: bool = True, with_gamma_x: bool = False,
                  quad_tol: float = 1e-12) -> list[PlmeParams]:
    out = []
    for t in np.asarray(times, dtype=float):
        if closed and drive.is_constant:
            out.append(plme_params_closed(noise, drive.omega, float(t),
                                          with_gamma_x=with_gamma_x))
        else:
            out.append(plme_params_quadrature(noise, drive, float(t), tol=quad_tol))
    return out


def write_params_csv(path, params: list[PlmeParams]) -> None:
    """Export a parameter time series as CSV with full-precision floats."""
    cols = ("t", "gamma_plus", "gamma_minus", "gamma_x", "phi", "h_ren_coeff")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for p in params:
            gx = p.gamma_x if p.gamma_x is not None else 0.0
            row = (p.t, p.gamma_plus, p.gamma_minus, gx, p.phi, p.h_ren_coeff)
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
