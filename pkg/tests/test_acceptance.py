"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line with the measured margins.

Criteria 2 and 6 are implemented exactly as stated and are expected to fail
for a shared physical reason: the canonical rates of the exact evolution
carry 4th-order (noise-strength) corrections to both in-plane rates that
grow secularly -- reaching ~0.36 of the sigma^2 scale by two Rabi periods at
sigma = 0.05 (criterion 2's tolerance is 2%), and sitting ~9 standard errors
away from the 2nd-order closed forms for the 20000-trajectory ensemble at
the longest correlation time (criterion 6's tolerance is 3 s.e.).  The
companion test next to each pins the identical extraction against the
4th-order-corrected generator, where the stated statistical tolerances hold.
"""

import math

import numpy as np
import pytest

from plme_lab import channel, evolve, plme
from plme_lab.channel import (canonical_decompose, diamond_distance, match_rates,
                              one_norm_distance, process_matrix)
from plme_lab.evolve import propagate_generator, quasistatic_exact_map
from plme_lab.noise import NoiseModel
from plme_lab.plme import (DriveProfile, gamma_x_closed, jump_operators,
                           plme2_generator, plme_params_closed, plme_params_quadrature)
from plme_lab.qmath import SIGMA_X, unvec, vec

DRIVE = DriveProfile.constant(1.0)
RHO0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)


def report(num, name, passed, detail):
    print(f"[criterion {num}] {name}: {'PASS' if passed else 'FAIL'} ({detail})")


# ---------------------------------------------------------------------------
# 1. closed-form / quadrature equivalence
# ---------------------------------------------------------------------------

def test_criterion_1_closed_vs_quadrature():
    times = np.geomspace(1e-2, 20.0, 50)
    cases = [
        ("quasistatic", NoiseModel.quasistatic(0.05), {}),
        ("lorentzian", NoiseModel.ornstein_uhlenbeck(0.05, 1.0), {}),
        ("one_over_f", NoiseModel.one_over_f(0.01, 1e-3), {"onef_exact_freqs": True}),
    ]
    worst = 0.0
    for _, model, kw in cases:
        floor = model.sigma**2
        for t in times:
            pc = plme_params_closed(model, 1.0, float(t), **kw)
            pq = plme_params_quadrature(model, DRIVE, float(t))
            for name in ("gamma_plus", "gamma_minus", "h_ren_coeff"):
                rel = abs(getattr(pc, name) - getattr(pq, name)) / max(abs(getattr(pc, name)), floor)
                worst = max(worst, rel)
            worst = max(worst, abs(pc.phi - pq.phi) / max(abs(pc.phi), 1e-2))
    passed = worst < 1e-8
    report(1, "closed-form vs quadrature equivalence", passed,
           f"max relative deviation {worst:.2e}, tol 1e-8")
    assert passed


# ---------------------------------------------------------------------------
# 2. exact-rate agreement (verbatim; see module docstring)
# ---------------------------------------------------------------------------

def _extracted_rate_profile(sigma, times, dt_inst=1e-3 * 2 * math.pi):
    model = NoiseModel.quasistatic(sigma)
    out = np.empty((len(times), 3))
    for k, t in enumerate(times):
        gen = channel.instantaneous_generator(
            lambda s: quasistatic_exact_map(sigma, 1.0, s, nodes=100), float(t), dt_inst)
        can = canonical_decompose(gen, tol=1e-5)
        p = plme_params_closed(model, 1.0, float(t))
        tau_u, tau_v = jump_operators(p)
        out[k] = match_rates(can, (tau_u, tau_v, SIGMA_X))
    return out


CRIT2_TIMES = np.linspace(0.25, 4 * math.pi, 40)


def test_criterion_2_exact_rate_agreement_as_stated():
    sigma = 0.05
    model = NoiseModel.quasistatic(sigma)
    extracted = _extracted_rate_profile(sigma, CRIT2_TIMES)
    scale = sigma**2
    gx_peak = max(gamma_x_closed(model, 1.0, float(t)) for t in CRIT2_TIMES)
    err_pm, err_x = 0.0, 0.0
    for k, t in enumerate(CRIT2_TIMES):
        p = plme_params_closed(model, 1.0, float(t))
        err_pm = max(err_pm, abs(extracted[k, 0] - p.gamma_plus) / scale,
                     abs(extracted[k, 1] - p.gamma_minus) / scale)
        err_x = max(err_x, abs(extracted[k, 2] - gamma_x_closed(model, 1.0, float(t))) / gx_peak)
    passed = err_pm <= 0.02 and err_x <= 0.05
    report(2, "exact-rate agreement with 2nd-order closed forms", passed,
           f"max |d gamma_pm| = {err_pm:.3f} of sigma^2 (tol 0.02), "
           f"max |d gamma_x| = {err_x:.3f} of peak (tol 0.05); "
           "4th-order corrections to gamma_pm grow to ~0.36 sigma^2 by two Rabi periods")
    assert passed


def test_criterion_2_companion_fourth_order_reference(plme4_gen_sigma05):
    # same extraction, referenced to the 4th-order-corrected generator (the
    # remainder is the 6th-order truncation, measured at 0.032 sigma^2 near
    # two Rabi periods); plus the stated 2% bound against the plain closed
    # forms on the early window where it does hold
    sigma = 0.05
    model = NoiseModel.quasistatic(sigma)
    scale = sigma**2
    extracted = _extracted_rate_profile(sigma, CRIT2_TIMES)
    worst4 = 0.0
    for k, t in enumerate(CRIT2_TIMES):
        ref_gen = plme4_gen_sigma05(float(t))
        can = canonical_decompose(ref_gen, tol=1e-6)
        p = plme_params_closed(model, 1.0, float(t))
        tau_u, tau_v = jump_operators(p)
        ref_rates = match_rates(can, (tau_u, tau_v, SIGMA_X))
        worst4 = max(worst4, np.abs(extracted[k] - ref_rates).max() / scale)
    early = CRIT2_TIMES[CRIT2_TIMES <= 1.8]
    extracted_early = extracted[: len(early)]
    worst2 = 0.0
    for k, t in enumerate(early):
        p = plme_params_closed(model, 1.0, float(t))
        worst2 = max(worst2, abs(extracted_early[k, 0] - p.gamma_plus) / scale,
                     abs(extracted_early[k, 1] - p.gamma_minus) / scale)
    ok = worst4 <= 0.05 and worst2 <= 0.02
    report(2, "exact-rate agreement vs 4th-order reference (companion)", ok,
           f"max dev vs 4th-order rates {worst4:.4f} of sigma^2 over (0, 4pi] (tol 0.05, "
           f"6th-order remainder), vs 2nd-order closed forms {worst2:.4f} on (0, 1.8] (tol 0.02)")
    assert ok


# ---------------------------------------------------------------------------
# 3. error-threshold ordering
# ---------------------------------------------------------------------------

def _first_crossing(times, values, threshold=1e-3):
    above = np.where(values > threshold)[0]
    if len(above) == 0:
        return math.inf
    i = above[0]
    if i == 0:
        return float(times[0])
    x0, x1 = times[i - 1], times[i]
    y0, y1 = math.log(values[i - 1]), math.log(values[i])
    return float(x0 + (math.log(threshold) - y0) * (x1 - x0) / (y1 - y0))


def test_criterion_3_error_threshold_ordering(plme4_gen_sigma05):
    sigma = 0.05
    model = NoiseModel.quasistatic(sigma)
    times = np.linspace(0.2, 25.0, 125)
    maps2 = propagate_generator(plme2_generator(model, DRIVE), 0.0, 25.0, 1e-10,
                                t_eval=times)
    maps4 = propagate_generator(plme4_gen_sigma05, 0.0, 25.0, 1e-10, t_eval=times)
    maps0 = propagate_generator(
        lambda t: plme.zeroth_order_liouvillian(model, DRIVE, t), 0.0, 25.0, 1e-10,
        t_eval=times)
    eps = {"0th": [], "2nd": [], "4th": []}
    for k, t in enumerate(times):
        exact = quasistatic_exact_map(sigma, 1.0, float(t))
        eps["0th"].append(diamond_distance(exact, maps0[k], n_starts=16, seed=k))
        eps["2nd"].append(diamond_distance(exact, maps2[k], n_starts=16, seed=k))
        eps["4th"].append(diamond_distance(exact, maps4[k], n_starts=16, seed=k))
    crossings = {key: _first_crossing(times, np.array(vals)) for key, vals in eps.items()}
    targets = {"0th": 1.0, "2nd": 5.0, "4th": 17.0}
    ok = all(abs(crossings[k] / targets[k] - 1.0) <= 0.30 for k in targets)
    for probe in (2.0, 5.0, 10.0):
        k = int(np.argmin(np.abs(times - probe)))
        ok = ok and eps["4th"][k] < eps["2nd"][k] < eps["0th"][k]
    report(3, "error-threshold ordering", ok,
           "1e-3 crossings at Omega t = "
           + ", ".join(f"{k}: {crossings[k]:.2f} (target {targets[k]})" for k in targets))
    assert ok


# ---------------------------------------------------------------------------
# 4. short-time scaling
# ---------------------------------------------------------------------------

def test_criterion_4_short_time_scaling():
    sigma = 0.2
    model = NoiseModel.quasistatic(sigma)
    times = np.geomspace(1e-2, 1e-1, 9)
    maps2 = propagate_generator(plme2_generator(model, DRIVE), 0.0, 0.1, 1e-13,
                                t_eval=times, atol=1e-16, method="DOP853")
    maps0 = propagate_generator(
        lambda t: plme.zeroth_order_liouvillian(model, DRIVE, t), 0.0, 0.1, 1e-13,
        t_eval=times, atol=1e-16, method="DOP853")
    err2, err0 = [], []
    for k, t in enumerate(times):
        exact = quasistatic_exact_map(sigma, 1.0, float(t), nodes=60)
        err2.append(one_norm_distance(exact, maps2[k]))
        err0.append(one_norm_distance(exact, maps0[k]))
    lt = np.log(times)
    slope2 = np.polyfit(lt, np.log(err2), 1)[0]
    slope0 = np.polyfit(lt, np.log(err0), 1)[0]
    pref2 = math.exp(float(np.mean(np.log(err2) - 5.0 * lt)))
    pref0 = math.exp(float(np.mean(np.log(err0) - 3.0 * lt)))
    ratio2 = pref2 / ((2.0 / 15.0) * sigma**4)
    ratio0 = pref0 / ((2.0 / 3.0) * sigma**2)
    ok = (abs(slope2 - 5.0) <= 0.1 and abs(slope0 - 3.0) <= 0.1
          and abs(ratio2 - 1.0) <= 0.15 and abs(ratio0 - 1.0) <= 0.15)
    report(4, "short-time scaling", ok,
           f"2nd order: slope {slope2:.3f}, prefactor x{ratio2:.3f} of (2/15) sigma^4; "
           f"drive-blind: slope {slope0:.3f}, prefactor x{ratio0:.3f} of (2/3) sigma^2")
    assert ok


# ---------------------------------------------------------------------------
# 5. Lorentzian limits
# ---------------------------------------------------------------------------

def test_criterion_5_lorentzian_limits():
    sigma = 0.05
    msgs, ok = [], True
    # long-time plateau values
    worst = 0.0
    for y in (0.2, 1.0, 10.0):
        model = NoiseModel.ornstein_uhlenbeck(sigma, y)
        p = plme_params_closed(model, 1.0, 40.0 * y)
        s2tc = sigma**2 * y
        ref_p = s2tc * (1.0 / (y * y + 1) + 1.0 / math.sqrt(y * y + 1))
        ref_m = s2tc * (1.0 / (y * y + 1) - 1.0 / math.sqrt(y * y + 1))
        worst = max(worst, abs(p.gamma_plus / ref_p - 1.0), abs(p.gamma_minus / ref_m - 1.0))
    ok &= worst < 1e-6
    msgs.append(f"plateau rel err {worst:.2e}")
    # quasistatic recovery (relative, away from the rate zeros)
    model = NoiseModel.ornstein_uhlenbeck(sigma, 1e4)
    quasi = NoiseModel.quasistatic(sigma)
    worst = 0.0
    for t in (0.5, 3.0, 10.0, 15.5):
        po = plme_params_closed(model, 1.0, t)
        pq = plme_params_closed(quasi, 1.0, t)
        for name in ("gamma_plus", "gamma_minus", "h_ren_coeff"):
            ref = getattr(pq, name)
            worst = max(worst, abs(getattr(po, name) - ref) / max(abs(ref), 0.05 * sigma**2))
    ok &= worst < 1e-3
    msgs.append(f"quasistatic recovery {worst:.2e}")
    # Markov limit
    diffusion, tc = 0.2, 1e-3
    model = NoiseModel.ornstein_uhlenbeck(math.sqrt(diffusion / tc), tc)
    p = plme_params_closed(model, 1.0, 20.0 * tc)
    ratio = abs(p.gamma_minus) / p.gamma_plus
    ok &= ratio <= 1e-2
    msgs.append(f"|gamma_-|/gamma_+ = {ratio:.2e} in the Markov limit")
    report(5, "Lorentzian limits", bool(ok), "; ".join(msgs))
    assert ok


# ---------------------------------------------------------------------------
# 6. Monte Carlo consistency
# ---------------------------------------------------------------------------

def _refs_for(model):
    def refs(t):
        p = plme_params_closed(model, 1.0, t)
        tau_u, tau_v = jump_operators(p)
        return (tau_u, tau_v, SIGMA_X)

    return refs


def _jackknife_rates(result, model):
    return channel.ensemble_canonical_rates(result.batch_deviations, result.grid,
                                            _refs_for(model))


def _thinned_indices(times, lo=0.5, hi=15.0, n=25):
    sel = np.where((times >= lo) & (times <= hi))[0]
    return sel[:: max(1, len(sel) // n)]


def _mc_rate_margins(ou_ensembles, onef_ensemble, reference):
    """Worst z-scores of MC rates against ``reference(model, t, refs)``."""
    out = {}
    for tc, result in ou_ensembles.items():
        model = NoiseModel.ornstein_uhlenbeck(0.05, tc)
        times, mean, se = _jackknife_rates(result, model)
        worst = 0.0
        for k in _thinned_indices(times):
            t = float(times[k])
            ref = reference(model, t)
            for j in range(2):
                worst = max(worst, abs(mean[k, j] - ref[j]) / se[k, j])
        out[f"OU tc={tc:g}"] = worst
    # the 1/f comparison carries the stated 2% allowance for the collapsed
    # sideband frequencies in the closed forms
    model = NoiseModel.one_over_f(0.01, 1e-3)
    times, mean, se = _jackknife_rates(onef_ensemble, model)
    idx = _thinned_indices(times)
    scale = max(max(abs(plme_params_closed(model, 1.0, float(times[k])).gamma_plus),
                    abs(plme_params_closed(model, 1.0, float(times[k])).gamma_minus))
                for k in idx)
    worst = 0.0
    for k in idx:
        p = plme_params_closed(model, 1.0, float(times[k]))
        for j, closed in enumerate((p.gamma_plus, p.gamma_minus)):
            excess = abs(mean[k, j] - closed) - 0.02 * scale
            worst = max(worst, excess / se[k, j])
    out["1/f"] = worst
    return out


def test_criterion_6_monte_carlo_consistency_as_stated(ou_ensembles, onef_ensemble):
    # verbatim 3 s.e. tolerance against the 2nd-order closed forms; at 20000
    # trajectories the estimator resolves the 4th-order rate corrections for
    # the longest correlation time, which sits ~9 s.e. away
    def closed_ref(model, t):
        p = plme_params_closed(model, 1.0, t)
        return (p.gamma_plus, p.gamma_minus)

    margins = _mc_rate_margins(ou_ensembles, onef_ensemble, closed_ref)
    ok = all(z <= 3.0 for z in margins.values())
    report(6, "Monte Carlo rate consistency with 2nd-order closed forms", ok,
           "; ".join(f"{k}: max|z| = {z:.2f}" for k, z in margins.items()) + "; tol 3 s.e.")
    assert ok


def test_criterion_6_companion_fourth_order_reference(ou_ensembles, onef_ensemble):
    # identical protocol with the 4th-order correction added to the reference
    # rates: every ensemble then agrees within plain statistics
    def corrected_ref(model, t):
        gen = plme.plme_liouvillian(plme_params_closed(model, 1.0, t)) \
            + plme.r4_superoperator(model, DriveProfile.constant(1.0), t)
        can = canonical_decompose(gen, tol=1e-6)
        return match_rates(can, _refs_for(model)(t))

    margins = _mc_rate_margins(ou_ensembles, onef_ensemble, corrected_ref)
    ok = all(z <= 3.0 for z in margins.values())
    report(6, "Monte Carlo rate consistency vs 4th-order-corrected rates (companion)", ok,
           "; ".join(f"{k}: max z = {z:.2f}" for k, z in margins.items()) + "; tol 3 s.e.")
    assert ok


# ---------------------------------------------------------------------------
# 7. exactness limits
# ---------------------------------------------------------------------------

def test_criterion_7_exactness_limits():
    # undriven quasistatic: full map against the gaussian coherence decay
    sigma = 0.1
    model = NoiseModel.quasistatic(sigma)
    gen = plme2_generator(model, DriveProfile.constant(0.0))
    worst = 0.0
    for t in (0.5, 1.5, 3.0):
        m = propagate_generator(gen, 0.0, t, 1e-12, method="DOP853")
        rho0 = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
        rho = evolve.evolve_state(m, rho0)
        worst = max(worst, abs(rho[0, 1] - 0.5 * math.exp(-2 * sigma**2 * t * t)))
        ref = quasistatic_exact_map(sigma, 0.0, t)
        worst = max(worst, float(np.abs(m.deviation - ref.deviation).max()))
    ok = worst < 1e-8
    # white noise: generator path against a direct state-space integration
    from scipy.integrate import solve_ivp
    from plme_lab.qmath import SIGMA_Y, SIGMA_Z
    diffusion = 0.08
    gen_w = plme2_generator(NoiseModel.white(diffusion), DRIVE)
    m = propagate_generator(gen_w, 0.0, 3.0, 1e-11, method="DOP853")
    rho0 = np.array([[0.5, 0.5 - 0.2j], [0.5 + 0.2j, 0.5]], dtype=complex)

    def rhs(t, y):
        rho = y.view(complex).reshape(2, 2)
        a_op = math.cos(t) * SIGMA_Z + math.sin(t) * SIGMA_Y
        return (diffusion * (a_op @ rho @ a_op - rho)).ravel().view(float)

    sol = solve_ivp(rhs, (0.0, 3.0), rho0.ravel().view(float), rtol=1e-11, atol=1e-13)
    ref = sol.y[:, -1].view(complex).reshape(2, 2)
    worst_w = float(np.abs(evolve.evolve_state(m, rho0) - ref).max())
    ok = ok and worst_w < 1e-8
    report(7, "exactness limits", ok,
           f"undriven max dev {worst:.2e} (tol 1e-8), white-noise max dev {worst_w:.2e}")
    assert ok


# ---------------------------------------------------------------------------
# 8. positivity window
# ---------------------------------------------------------------------------

def test_criterion_8_positivity_window():
    sigma = 0.1
    model = NoiseModel.quasistatic(sigma)
    t_end = 3.0 * math.pi
    times = np.linspace(0.02, t_end, 380)
    maps = propagate_generator(plme2_generator(model, DRIVE), 0.0, t_end, 1e-10,
                               t_eval=times)
    mins = np.array([process_matrix(m).min_eigenvalue for m in maps])
    window = (times >= 2 * math.pi) & (times <= 2 * math.pi + 0.5)
    negative_in_window = bool(np.all(mins[window] < -1e-6))
    last_negative = times[mins < -1e-12][-1] if np.any(mins < -1e-12) else -math.inf
    recovers = bool(last_negative < 3.0 * math.pi)
    onset = times[mins < -1e-12][0] if np.any(mins < -1e-12) else math.inf
    # negativity magnitude bounded by the approximation error at the same time
    bound_ok, margin = True, math.inf
    for k in np.where(mins < -1e-6)[0][::12]:
        exact = quasistatic_exact_map(sigma, 1.0, float(times[k]))
        eps = diamond_distance(exact, maps[k], n_starts=16, seed=int(k))
        bound_ok &= abs(mins[k]) <= eps
        margin = min(margin, eps / abs(mins[k]))
    ok = negative_in_window and recovers and bound_ok
    report(8, "positivity window", ok,
           f"chi negative throughout [2pi, 2pi+0.5] (onset at Omega t = {onset:.2f}), "
           f"recovers at {last_negative:.2f} < 3pi, |neg| <= eps with margin x{margin:.1f}")
    assert ok


# ---------------------------------------------------------------------------
# 9. expectation-value traces
# ---------------------------------------------------------------------------

def _trace_dev(maps, result_or_exact, obs):
    if isinstance(result_or_exact, list):
        ref = np.array([evolve.expectation(evolve.evolve_state(m, RHO0), obs)
                        for m in result_or_exact])
        se = np.zeros_like(ref)
    else:
        ref, se = result_or_exact.expectation_series(RHO0, obs)
    got = np.array([evolve.expectation(evolve.evolve_state(m, RHO0), obs)
                    for m in maps])
    return got - ref, se


def test_criterion_9_expectation_traces(ou_ensembles, onef_ensemble):
    from plme_lab.qmath import SIGMA_Y, SIGMA_Z
    msgs, ok = [], True

    # quasistatic: deterministic exact reference, 0.02 absolute out to t = 20
    sigma = 0.05
    model = NoiseModel.quasistatic(sigma)
    times = np.linspace(0.0, 20.0, 161)
    maps2 = propagate_generator(plme2_generator(model, DRIVE), 0.0, 20.0, 1e-10,
                                t_eval=times)
    exact = [quasistatic_exact_map(sigma, 1.0, float(t)) for t in times]
    worst = 0.0
    for obs in (SIGMA_Y, SIGMA_Z):
        dev, _ = _trace_dev(maps2, exact, obs)
        worst = max(worst, float(np.abs(dev).max()))
    ok &= worst <= 0.02
    msgs.append(f"quasistatic max |dev| = {worst:.4f}")

    # colored noise: 3 s.e. + 0.02 against the Monte Carlo baseline
    cases = [(f"OU tc={tc:g}", NoiseModel.ornstein_uhlenbeck(0.05, tc), res)
             for tc, res in ou_ensembles.items()]
    cases.append(("1/f", NoiseModel.one_over_f(0.01, 1e-3), onef_ensemble))
    ratio_checked = False
    for label, model, result in cases:
        times = result.grid
        maps2 = [evolve.identity_map(0.0)] + propagate_generator(
            plme2_generator(model, DRIVE), 0.0, float(times[-1]), 1e-10,
            t_eval=times[1:])
        worst_excess = -math.inf
        for obs in (SIGMA_Y, SIGMA_Z):
            dev, se = _trace_dev(maps2, result, obs)
            worst_excess = max(worst_excess, float((np.abs(dev) - 3 * se - 0.02).max()))
        ok &= worst_excess <= 0.0
        msgs.append(f"{label} max(|dev|-3se-0.02) = {worst_excess:+.4f}")
        if label == "OU tc=10":
            maps0 = [evolve.identity_map(0.0)] + propagate_generator(
                lambda t: plme.zeroth_order_liouvillian(model, DRIVE, t), 0.0,
                float(times[-1]), 1e-10, t_eval=times[1:])
            d2 = max(float(np.abs(_trace_dev(maps2, result, obs)[0]).max())
                     for obs in (SIGMA_Y, SIGMA_Z))
            d0 = max(float(np.abs(_trace_dev(maps0, result, obs)[0]).max())
                     for obs in (SIGMA_Y, SIGMA_Z))
            ok &= d0 >= 2.0 * d2
            msgs.append(f"drive-blind dev {d0:.3f} >= 2x 2nd-order dev {d2:.3f}")
            ratio_checked = True
    ok &= ratio_checked
    report(9, "expectation-value traces", bool(ok), "; ".join(msgs))
    assert ok
