"""Named experiment scenarios: each one regenerates a benchmark data set
(rate comparisons, approximation-error curves, scaling fits, expectation
traces, positivity maps) as deterministic CSV files with a JSON sidecar.

All frequencies are in units of the Rabi amplitude; the drive is constant.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import channel, evolve, plme
from .cache import EnsembleCache
from .evolve import EnsembleConfig
from .noise import NoiseModel, analytic_variant
from .plme import DriveProfile
from .qmath import SIGMA_X, SIGMA_Y, SIGMA_Z

DEFAULT_DT = 2.0 * math.pi / 200.0
RHO0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)  # |0><0|


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


class ConfigError(ValueError):
    """Invalid experiment configuration; carries the offending fields."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class ExperimentConfig:
    scenario: str
    seed: int | None = None
    sigma_over_omega: float | None = None
    noise: NoiseModel | None = None
    n_traj: int = 20000
    t_max: float | None = None
    grid_points: int | None = None
    dt: float = DEFAULT_DT
    output_dir: str = "out"
    threads: int | None = None
    diamond_starts: int = 64
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError([f"unknown config fields: {sorted(unknown)}"])
        if isinstance(data.get("noise"), dict):
            try:
                data["noise"] = NoiseModel.from_dict(data["noise"])
            except ValueError as exc:
                raise ConfigError([f"noise: {exc}"]) from exc
        return cls(**data)

    def resolved(self) -> dict:
        spec = SCENARIOS.get(self.scenario)
        out = asdict(self)
        if isinstance(self.noise, NoiseModel):
            out["noise"] = self.noise.to_dict()
        else:
            out["noise"] = dict(self.noise) if self.noise is not None else None
        if spec is not None:
            for key, val in spec.defaults.items():
                if out.get(key) is None:
                    out[key] = val
            merged = dict(spec.params)
            merged.update(self.params)
            out["params"] = merged
        return out

    def config_hash(self) -> str:
        payload = self.resolved()
        payload.pop("output_dir", None)
        payload.pop("threads", None)
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    description: str
    defaults: dict
    params: dict
    needs_seed: bool
    runner: object


def validate(config: ExperimentConfig) -> dict:
    """Validation report: {'ok': bool, 'errors': [...], 'resolved': {...}}."""
    errors = []
    if config.scenario not in SCENARIOS:
        errors.append(f"scenario: unknown {config.scenario!r}; "
                      f"known: {sorted(SCENARIOS)}")
        return {"ok": False, "errors": errors, "resolved": None}
    spec = SCENARIOS[config.scenario]
    resolved = config.resolved()
    if spec.needs_seed and resolved.get("seed") is None:
        errors.append("seed: required for ensemble scenarios")
    if resolved["n_traj"] < 1:
        errors.append("n_traj: must be at least 1")
    if resolved["t_max"] is not None and resolved["t_max"] <= 0:
        errors.append("t_max: must be positive")
    if resolved["grid_points"] is not None and resolved["grid_points"] < 2:
        errors.append("grid_points: must be at least 2")
    if resolved["dt"] <= 0:
        errors.append("dt: must be positive")
    noise = resolved.get("noise")
    if noise is not None:
        try:
            NoiseModel.from_dict(noise)
        except ValueError as exc:
            errors.append(f"noise: {exc}")
    sigma = resolved.get("sigma_over_omega")
    if sigma is not None and sigma < 0:
        errors.append("sigma_over_omega: must be nonnegative")
    return {"ok": not errors, "errors": errors, "resolved": resolved}


def list_scenarios() -> list[dict]:
    """Catalog of scenarios with their default parameters."""
    return [{"name": s.name, "description": s.description,
             "defaults": dict(s.defaults), "params": dict(s.params),
             "needs_seed": s.needs_seed}
            for s in SCENARIOS.values()]


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _model_override(resolved: dict, default: NoiseModel) -> NoiseModel:
    """Honor an explicit noise block for single-model scenarios."""
    if resolved.get("noise") is not None:
        return NoiseModel.from_dict(resolved["noise"])
    return default


def _reference_ops(noise: NoiseModel, omega: float):
    """Jump-operator references (tau_u, tau_v, sx) used to label extracted rates."""

    def refs(t: float):
        p = plme.plme_params_closed(noise, omega, t)
        tau_u, tau_v = plme.jump_operators(p)
        return (tau_u, tau_v, SIGMA_X)

    return refs


def _mc_rates(result: evolve.EnsembleResult, noise: NoiseModel, omega: float):
    """Canonical rates of the ensemble mean map with jackknife errors."""
    refs = _reference_ops(noise, omega)
    return channel.ensemble_canonical_rates(result.batch_deviations, result.grid, refs)


def _ensemble(noise: NoiseModel, omega: float, resolved: dict,
              cache: EnsembleCache) -> evolve.EnsembleResult:
    drive = DriveProfile.constant(omega)
    grid = evolve.default_output_grid(resolved["t_max"], resolved["dt"])
    threads = resolved.get("threads") or os.cpu_count() or 1
    ecfg = EnsembleConfig(n_traj=resolved["n_traj"], dt=resolved["dt"],
                          seed=resolved["seed"], grid=grid, threads=threads)
    return cache.get_or_compute(noise, drive, ecfg)


def _plme2_maps(noise: NoiseModel, omega: float, times, tol: float = 1e-10):
    gen = plme.plme2_generator(noise, DriveProfile.constant(omega))
    return evolve.propagate_generator(gen, 0.0, float(np.max(times)), tol,
                                      t_eval=times, provenance=evolve.PLME2)


def _zeroth_maps(noise: NoiseModel, omega: float, times, tol: float = 1e-10):
    drive = DriveProfile.constant(omega)
    gen = lambda t: plme.zeroth_order_liouvillian(noise, drive, t)
    return evolve.propagate_generator(gen, 0.0, float(np.max(times)), tol,
                                      t_eval=times, provenance=evolve.ZEROTH_ORDER)


# ---------------------------------------------------------------------------
# Scenario runners
# ---------------------------------------------------------------------------

def _run_rates_quasistatic(resolved: dict, outdir: Path, tag: str, cache) -> list[Path]:
    sigma = resolved["sigma_over_omega"]
    noise = _model_override(resolved, NoiseModel.quasistatic(sigma))
    times = np.linspace(0.0, resolved["t_max"], resolved["grid_points"] + 1)[1:]
    dt_inst = resolved["params"]["inst_dt"]
    nodes = resolved["params"]["gh_nodes"]
    provider = lambda t: evolve.quasistatic_exact_map(sigma, 1.0, t, nodes)
    refs = _reference_ops(noise, 1.0)
    rows = []
    for t in times:
        p = plme.plme_params_closed(noise, 1.0, float(t), with_gamma_x=True)
        gen = channel.instantaneous_generator(provider, float(t), dt_inst)
        rates = channel.match_rates(channel.canonical_decompose(gen, tol=1e-5), refs(float(t)))
        rows.append((t, p.gamma_plus, p.gamma_minus, p.gamma_x, *rates))
    path = outdir / f"rates_quasistatic_{tag}.csv"
    write_csv(path, ["omega_t", "gamma_plus_plme", "gamma_minus_plme", "gamma_x_plme4",
                     "gamma_1_exact", "gamma_2_exact", "gamma_3_exact"], rows)
    return [path]


def _run_error_quasistatic(resolved: dict, outdir: Path, tag: str, cache) -> list[Path]:
    sigma = resolved["sigma_over_omega"]
    noise = _model_override(resolved, NoiseModel.quasistatic(sigma))
    t_max = resolved["t_max"]
    times = np.linspace(0.0, t_max, resolved["grid_points"] + 1)[1:]
    maps2 = _plme2_maps(noise, 1.0, times)
    gen4 = plme.plme4_generator(noise, DriveProfile.constant(1.0), t_max,
                                grid_points=resolved["params"]["r4_grid_points"],
                                nodes=resolved["params"]["r4_nodes"])
    maps4 = evolve.propagate_generator(gen4, 0.0, t_max, 1e-10, t_eval=times,
                                       provenance=evolve.PLME4)
    maps0 = _zeroth_maps(noise, 1.0, times)
    nodes = resolved["params"]["gh_nodes"]
    starts = resolved["diamond_starts"]
    rows = []
    for k, t in enumerate(times):
        exact = evolve.quasistatic_exact_map(sigma, 1.0, float(t), nodes)
        e2 = channel.diamond_distance(exact, maps2[k], n_starts=starts, seed=k)
        e4 = channel.diamond_distance(exact, maps4[k], n_starts=starts, seed=k)
        e0 = channel.diamond_distance(exact, maps0[k], n_starts=starts, seed=k)
        rows.append((t, e2, e4, e0))
    path = outdir / f"error_quasistatic_{tag}.csv"
    write_csv(path, ["omega_t", "eps_plme2", "eps_plme4", "eps_zeroth"], rows)
    return [path]


def _run_shorttime_scaling(resolved: dict, outdir: Path, tag: str, cache) -> list[Path]:
    sigma = resolved["sigma_over_omega"]
    noise = _model_override(resolved, NoiseModel.quasistatic(sigma))
    times = np.geomspace(resolved["params"]["t_min"], resolved["t_max"],
                         resolved["grid_points"])
    maps2 = _plme2_maps(noise, 1.0, times, tol=1e-13)
    maps0 = _zeroth_maps(noise, 1.0, times, tol=1e-13)
    nodes = resolved["params"]["gh_nodes"]
    rows = []
    for k, t in enumerate(times):
        exact = evolve.quasistatic_exact_map(sigma, 1.0, float(t), nodes)
        e2 = channel.one_norm_distance(exact, maps2[k])
        e0 = channel.one_norm_distance(exact, maps0[k])
        rows.append((t, e2, e0,
                     (2.0 / 15.0) * sigma**4 * t**5, (2.0 / 3.0) * sigma**2 * t**3))
    path = outdir / f"shorttime_scaling_{tag}.csv"
    write_csv(path, ["omega_t", "one_norm_plme2", "one_norm_zeroth",
                     "ref_plme2", "ref_zeroth"], rows)
    return [path]


def _colored_panel(noise: NoiseModel, resolved: dict, outdir: Path, name: str,
                   tag: str, cache) -> list[Path]:
    """Rates + error panel against a 20k-trajectory ensemble, for one model."""
    cfgd = resolved
    result = _ensemble(noise, 1.0, cfgd, cache)
    # generator-side curves use the analytic (large-cutoff) kernel variant
    gen_noise = analytic_variant(noise)
    times, mc_mean, mc_se = _mc_rates(result, gen_noise, 1.0)
    rows = []
    for k, t in enumerate(times):
        p = plme.plme_params_closed(gen_noise, 1.0, float(t))
        try:
            gx = plme.gamma_x_closed(gen_noise, 1.0, float(t))
        except ValueError:
            gx = float("nan")
        rows.append((t, p.gamma_plus, p.gamma_minus, gx, p.phi,
                     *mc_mean[k], *mc_se[k]))
    rates_path = outdir / f"{name}_rates_{tag}.csv"
    write_csv(rates_path,
              ["omega_t", "gamma_plus_plme", "gamma_minus_plme", "gamma_x_plme4", "phi",
               "rate_u_mc", "rate_v_mc", "rate_x_mc",
               "se_rate_u", "se_rate_v", "se_rate_x"], rows)

    stride = max(1, len(result.grid) // cfgd["params"]["error_points"])
    err_idx = np.arange(1, len(result.grid), stride)
    err_times = result.grid[err_idx]
    maps2 = _plme2_maps(gen_noise, 1.0, err_times)
    maps0 = _zeroth_maps(gen_noise, 1.0, err_times)
    starts = cfgd["diamond_starts"]
    err_rows = []
    for j, k in enumerate(err_idx):
        exact = result.maps[k]
        e2 = channel.diamond_distance(exact, maps2[j], n_starts=starts, seed=int(k))
        e0 = channel.diamond_distance(exact, maps0[j], n_starts=starts, seed=int(k))
        err_rows.append((result.grid[k], e2, e0))
    err_path = outdir / f"{name}_error_{tag}.csv"
    write_csv(err_path, ["omega_t", "eps_plme2", "eps_zeroth"], err_rows)
    return [rates_path, err_path]


def _run_lorentzian_panels(resolved: dict, outdir: Path, tag: str, cache) -> list[Path]:
    sigma = resolved["sigma_over_omega"]
    out = []
    for tau_c in resolved["params"]["tau_c_list"]:
        noise = NoiseModel.ornstein_uhlenbeck(sigma, tau_c)
        label = f"lorentzian_panels_tc{tau_c:g}".replace(".", "p")
        out.extend(_colored_panel(noise, resolved, outdir, label, tag, cache))
    return out


def _run_oneoverf_panels(resolved: dict, outdir: Path, tag: str, cache) -> list[Path]:
    sigma = resolved["sigma_over_omega"]
    noise = _model_override(resolved, NoiseModel.one_over_f(
        sigma, resolved["params"]["omega_l"], resolved["params"]["omega_h"]))
    return _colored_panel(noise, resolved, outdir, "oneoverf_panels", tag, cache)


def _expval_rows(times, series: dict) -> list[tuple]:
    keys = sorted(series)
    return [(t, *[series[k][i] for k in keys]) for i, t in enumerate(times)]


def _run_expvals(resolved: dict, outdir: Path, tag: str, cache) -> list[Path]:
    sigma = resolved["sigma_over_omega"]
    paths = []
    observables = {"sy": SIGMA_Y, "sz": SIGMA_Z}

    # quasistatic: deterministic exact baseline, includes the 4th-order curve
    noise = NoiseModel.quasistatic(sigma)
    t_max = resolved["t_max"]
    times = np.linspace(0.0, t_max, resolved["grid_points"])
    maps2 = _plme2_maps(noise, 1.0, times)
    gen4 = plme.plme4_generator(noise, DriveProfile.constant(1.0), t_max,
                                grid_points=resolved["params"]["r4_grid_points"],
                                nodes=resolved["params"]["r4_nodes"])
    maps4 = evolve.propagate_generator(gen4, 0.0, t_max, 1e-10, t_eval=times,
                                       provenance=evolve.PLME4)
    maps0 = _zeroth_maps(noise, 1.0, times)
    exact = evolve.quasistatic_exact_maps(sigma, 1.0, times,
                                          resolved["params"]["gh_nodes"])
    rows = []
    for k, t in enumerate(times):
        row = [t]
        for label, ms in (("plme2", maps2), ("plme4", maps4), ("zeroth", maps0),
                          ("exact", exact)):
            rho = evolve.evolve_state(ms[k], RHO0)
            row.extend(evolve.expectation(rho, obs) for obs in observables.values())
        rows.append(tuple(row))
    qpath = outdir / f"expvals_quasistatic_{tag}.csv"
    write_csv(qpath, ["omega_t",
                      "sy_plme2", "sz_plme2", "sy_plme4", "sz_plme4",
                      "sy_zeroth", "sz_zeroth", "sy_exact", "sz_exact"], rows)
    paths.append(qpath)

    # colored-noise cases: Monte Carlo exact baseline
    cases = [(f"lorentzian_tc{tc:g}".replace(".", "p"),
              NoiseModel.ornstein_uhlenbeck(sigma, tc))
             for tc in resolved["params"]["tau_c_list"]]
    cases.append(("oneoverf", NoiseModel.one_over_f(
        resolved["params"]["onef_sigma"], resolved["params"]["omega_l"],
        resolved["params"]["omega_h"])))
    for label, model in cases:
        result = _ensemble(model, 1.0, resolved, cache)
        gen_model = analytic_variant(model)
        times = result.grid
        maps2 = [evolve.identity_map(0.0)] + _plme2_maps(gen_model, 1.0, times[1:])
        maps0 = [evolve.identity_map(0.0)] + _zeroth_maps(gen_model, 1.0, times[1:])
        traces = {name: result.expectation_series(RHO0, obs)
                  for name, obs in observables.items()}
        rows = []
        for k, t in enumerate(times):
            row = [t]
            for ms in (maps2, maps0):
                rho = evolve.evolve_state(ms[k], RHO0)
                row.extend(evolve.expectation(rho, obs) for obs in observables.values())
            row.extend((traces["sy"][0][k], traces["sz"][0][k],
                        traces["sy"][1][k], traces["sz"][1][k]))
            rows.append(tuple(row))
        path = outdir / f"expvals_{label}_{tag}.csv"
        write_csv(path, ["omega_t", "sy_plme2", "sz_plme2", "sy_zeroth", "sz_zeroth",
                         "sy_exact", "sz_exact", "se_sy_exact", "se_sz_exact"], rows)
        paths.append(path)
    return paths


def _run_positivity_map(resolved: dict, outdir: Path, tag: str, cache) -> list[Path]:
    sigmas = np.asarray(resolved["params"]["sigma_list"], dtype=float)
    t_max = resolved["t_max"]
    times = np.linspace(0.0, t_max, resolved["grid_points"] + 1)[1:]
    rows = []
    maps_by_sigma = {}
    for s in sigmas:
        noise = NoiseModel.quasistatic(s)
        maps = _plme2_maps(noise, 1.0, times)
        maps_by_sigma[float(s)] = maps
        for k, t in enumerate(times):
            rows.append((s, t, channel.process_matrix(maps[k]).min_eigenvalue))
    path = outdir / f"positivity_map_{tag}.csv"
    write_csv(path, ["sigma_over_omega", "omega_t", "chi_min_eig"], rows)
    paths = [path]

    scan_t = resolved["params"]["scan_time"]
    res = resolved["params"]["scan_resolution"]
    k_scan = int(np.argmin(np.abs(times - scan_t)))
    for s in resolved["params"]["scan_sigmas"]:
        noise = NoiseModel.quasistatic(s)
        maps = maps_by_sigma.get(float(s))
        if maps is None:
            maps = _plme2_maps(noise, 1.0, times)
        scan = channel.nonphysical_state_scan(maps[k_scan], res)
        spath = outdir / f"positivity_patch_sigma{s:g}_{tag}.json".replace("0.", "0p")
        spath.write_text(scan.to_json(), encoding="utf-8")
        paths.append(spath)
    return paths


SCENARIOS: dict[str, ScenarioSpec] = {}


def _register(name, description, defaults, params, needs_seed, runner):
    SCENARIOS[name] = ScenarioSpec(name, description, defaults, params, needs_seed, runner)


_register(
    "rates_quasistatic",
    "Dephasing-rate comparison for quasistatic noise: closed-form generator rates "
    "(including the 4th-order x rate) against canonical rates extracted from the "
    "deterministic exact map.",
    {"sigma_over_omega": 0.05, "t_max": 4 * math.pi, "grid_points": 200},
    {"inst_dt": 1e-3 * 2 * math.pi, "gh_nodes": 80},
    False, _run_rates_quasistatic)

_register(
    "error_quasistatic",
    "Diamond-norm approximation error against the exact quasistatic map, for the "
    "2nd-order, 4th-order, and naive drive-blind generators.",
    {"sigma_over_omega": 0.05, "t_max": 22.0, "grid_points": 110},
    {"gh_nodes": 80, "r4_grid_points": 309, "r4_nodes": 24},
    False, _run_error_quasistatic)

_register(
    "shorttime_scaling",
    "Short-time error scaling at stronger noise: superoperator 1-norm error of the "
    "2nd-order and drive-blind generators with their analytic power-law references.",
    {"sigma_over_omega": 0.2, "t_max": 0.1, "grid_points": 13},
    {"t_min": 0.01, "gh_nodes": 60},
    False, _run_shorttime_scaling)

_register(
    "lorentzian_panels",
    "Rates, memory angle, and error curves for exponentially correlated noise at "
    "three correlation times, benchmarked against 20000-trajectory ensembles.",
    {"sigma_over_omega": 0.05, "t_max": 15.0, "grid_points": 200},
    {"tau_c_list": [10.0, 1.0, 0.2], "error_points": 30},
    True, _run_lorentzian_panels)

_register(
    "oneoverf_panels",
    "Rates, memory angle, and error curves for 1/f noise (sigma = 0.01, "
    "omega_l = 1e-3), benchmarked against a 20000-trajectory ensemble.",
    {"sigma_over_omega": 0.01, "t_max": 15.0, "grid_points": 200},
    {"omega_l": 1e-3, "omega_h": 1e3, "error_points": 30},
    True, _run_oneoverf_panels)

_register(
    "expvals",
    "Expectation-value traces <sy>(t), <sz>(t) from |0> for all noise models, "
    "comparing the 2nd-order (and, for quasistatic, 4th-order) generators and the "
    "drive-blind baseline with exact references.",
    {"sigma_over_omega": 0.05, "t_max": 15.0, "grid_points": 151},
    {"tau_c_list": [10.0, 1.0, 0.2], "onef_sigma": 0.01, "omega_l": 1e-3,
     "omega_h": 1e3, "gh_nodes": 80, "r4_grid_points": 309, "r4_nodes": 24},
    True, _run_expvals)

_register(
    "positivity_map",
    "Smallest process-matrix eigenvalue of the 2nd-order map over noise strength "
    "and time, with pure-state patch scans at flagged configurations.",
    {"sigma_over_omega": 0.1, "t_max": 3 * math.pi, "grid_points": 180},
    {"sigma_list": [0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2],
     "scan_sigmas": [0.05, 0.1, 0.2], "scan_time": 2 * math.pi + math.pi / 4,
     "scan_resolution": 36},
    False, _run_positivity_map)


def run(config: ExperimentConfig) -> list[Path]:
    """Run a scenario; returns the written files (CSV/JSON plus sidecar)."""
    report = validate(config)
    if not report["ok"]:
        raise ConfigError(report["errors"])
    resolved = report["resolved"]
    outdir = Path(resolved["output_dir"])
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError([f"output_dir: {exc}"]) from exc
    tag = config.config_hash()
    cache = EnsembleCache(os.environ.get("PLME_CACHE_DIR") or outdir / "cache")
    start = time.perf_counter()
    spec = SCENARIOS[config.scenario]
    paths = spec.runner(resolved, outdir, tag, cache)
    wall = time.perf_counter() - start
    sidecar = outdir / f"{config.scenario}_{tag}.json"
    sidecar.write_text(json.dumps({
        "config": resolved,
        "seed": resolved.get("seed"),
        "versions": {"plme_lab": __version__,
                     "numpy": np.__version__,
                     "scipy": __import__("scipy").__version__},
        "wall_time_s": wall,
        "outputs": [p.name for p in paths],
    }, indent=2, sort_keys=True), encoding="utf-8")
    return paths + [sidecar]
