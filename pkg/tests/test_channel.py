import json
import math

import numpy as np
import pytest

from plme_lab import channel, evolve, plme
from plme_lab.channel import (CanonicalGenerator, SingularMapError, canonical_decompose,
                              canonical_rates_series, channel_distance, choi,
                              diamond_distance, generator_series, instantaneous_generator,
                              match_rates, nonphysical_state_scan, one_norm_distance,
                              process_matrix)
from plme_lab.evolve import QuantumMap, identity_map, propagate_generator, quasistatic_exact_map
from plme_lab.noise import NoiseModel
from plme_lab.plme import DriveProfile, plme2_generator, plme_liouvillian, plme_params_closed
from plme_lab.qmath import (IDENTITY_2, IDENTITY_4, PAULI_BASIS, SIGMA_X, SIGMA_Y, SIGMA_Z,
                            dissipator, expm, hs_inner, vec, unvec)

DRIVE = DriveProfile.constant(1.0)


def unitary_map(u: np.ndarray, t: float = 0.0) -> QuantumMap:
    return QuantumMap(np.kron(u.conj(), u) - IDENTITY_4, t, evolve.EXACT_QUADRATURE)


# ---------------------------------------------------------------------------
# instantaneous generator
# ---------------------------------------------------------------------------

def test_instantaneous_generator_identity_evolution():
    gen = instantaneous_generator(lambda t: identity_map(t), 1.0, 1e-3)
    assert np.abs(gen).max() < 1e-12


def test_instantaneous_generator_recovers_constant_rate():
    gamma = 0.01
    lind = gamma * dissipator(SIGMA_Z)
    provider = lambda t: QuantumMap(expm(lind, t) - IDENTITY_4, t, evolve.PLME2)
    gen = instantaneous_generator(provider, 2.0, 1e-3 * 2 * math.pi)
    rates = canonical_decompose(gen).rates
    assert abs(rates[0] - gamma) < 1e-6 * gamma


def test_instantaneous_generator_condition_guard():
    heavy = QuantumMap(np.diag([0.0, -1 + 1e-9, -1 + 1e-9, 0.0]).astype(complex),
                       1.0, evolve.PLME2)
    with pytest.raises(SingularMapError):
        instantaneous_generator(lambda t: heavy, 1.0, 1e-3)


def test_generator_series_matches_provider_extraction():
    model = NoiseModel.quasistatic(0.05)
    gen_fn = plme2_generator(model, DRIVE)
    grid = np.linspace(0.0, 3.0, 151)
    maps = propagate_generator(gen_fn, 0.0, 3.0, 1e-11, t_eval=grid, method="DOP853")
    devs = np.array([m.deviation for m in maps])
    times, gens = generator_series(devs, grid)
    k = 100
    ref = gen_fn(float(times[k]))
    # O(h^2) extrapolation residual at h = 0.02 on the sigma^2 generator scale
    assert np.abs(gens[k] - ref).max() < 5e-6


# ---------------------------------------------------------------------------
# canonical decomposition
# ---------------------------------------------------------------------------

def test_canonical_decompose_pure_dephasing():
    gamma = 0.3
    can = canonical_decompose(gamma * dissipator(SIGMA_Z))
    assert np.allclose(sorted(can.rates), [0.0, 0.0, gamma], atol=1e-12)
    assert np.abs(can.hamiltonian).max() < 1e-12
    top = can.jump_ops[0]
    assert abs(abs(hs_inner(top, SIGMA_Z)) / 2.0 - 1.0) < 1e-12


def test_canonical_decompose_roundtrip_plme():
    p = plme_params_closed(NoiseModel.quasistatic(0.05), 1.0, 1.0, with_gamma_x=True)
    gen = plme_liouvillian(p)
    can = canonical_decompose(gen)
    assert np.abs(can.assemble() - gen).max() < 1e-10
    tau_u, tau_v = plme.jump_operators(p)
    rates = match_rates(can, (tau_u, tau_v, SIGMA_X))
    assert rates[0] == pytest.approx(p.gamma_plus, rel=1e-10)
    assert rates[1] == pytest.approx(p.gamma_minus, rel=1e-10)
    assert rates[2] == pytest.approx(p.gamma_x, rel=1e-8)
    # hamiltonian coefficient along sx matches the generator parameter
    assert hs_inner(can.hamiltonian, SIGMA_X).real / 2.0 == pytest.approx(p.h_ren_coeff, rel=1e-10)


def test_canonical_decompose_third_axis_rate():
    gen = 0.002 * dissipator(SIGMA_Z) + 0.0005 * dissipator(SIGMA_X)
    can = canonical_decompose(gen)
    rates = match_rates(can, (SIGMA_Z, SIGMA_Y, SIGMA_X))
    assert rates[0] == pytest.approx(0.002)
    assert rates[1] == pytest.approx(0.0, abs=1e-14)
    assert rates[2] == pytest.approx(0.0005)


def test_canonical_decompose_rejects_bad_generators():
    with pytest.raises(ValueError):
        canonical_decompose(np.eye(4))  # not trace-annihilating
    bad = 1j * dissipator(SIGMA_Z)
    with pytest.raises(ValueError):
        canonical_decompose(bad)  # not Hermiticity-preserving


def test_rates_sorted_by_magnitude():
    gen = 0.001 * dissipator(SIGMA_Z) - 0.004 * dissipator(SIGMA_Y)
    can = canonical_decompose(gen)
    assert abs(can.rates[0]) >= abs(can.rates[1]) >= abs(can.rates[2])
    assert can.rates[0] == pytest.approx(-0.004)


# ---------------------------------------------------------------------------
# channel representations
# ---------------------------------------------------------------------------

def test_choi_identity_channel():
    j = choi(identity_map())
    bell = vec(IDENTITY_2) / math.sqrt(2.0)  # |00> + |11>, as a 4-vector
    assert np.trace(j).real == pytest.approx(2.0)
    w = np.linalg.eigvalsh(j)
    assert w[-1] == pytest.approx(2.0, abs=1e-12)
    assert np.abs(w[:-1]).max() < 1e-12
    assert np.abs(j - 2.0 * np.outer(bell, bell.conj())).max() < 1e-12


def test_choi_completely_dephasing():
    superop = np.diag([1.0, 0.0, 0.0, 1.0]).astype(complex)  # rho -> diag(rho)
    j = choi(superop)
    assert np.allclose(j, np.diag([1.0, 0.0, 0.0, 1.0]), atol=1e-14)


def test_choi_cptp_positive():
    m = quasistatic_exact_map(0.1, 1.0, 5.0)
    w = np.linalg.eigvalsh(choi(m))
    assert w[0] > -1e-10


def test_process_matrix_identity():
    pm = process_matrix(identity_map())
    assert np.allclose(pm.chi, np.diag([1.0, 0.0, 0.0, 0.0]), atol=1e-14)
    assert pm.min_eigenvalue == pytest.approx(0.0, abs=1e-14)


def test_process_matrix_dephasing_channel():
    # rho -> (1-p) rho + p sz rho sz
    p = 0.3
    superop = (1 - p) * IDENTITY_4 + p * np.kron(SIGMA_Z.conj(), SIGMA_Z)
    pm = process_matrix(superop)
    assert pm.chi[0, 0].real == pytest.approx(1 - p)
    assert pm.chi[3, 3].real == pytest.approx(p)
    assert abs(pm.chi[1, 1]) + abs(pm.chi[2, 2]) < 1e-14
    assert pm.min_eigenvalue > -1e-14


def test_process_matrix_detects_nonphysical_plme_map():
    model = NoiseModel.quasistatic(0.1)
    gen = plme2_generator(model, DRIVE)
    m = propagate_generator(gen, 0.0, 2 * math.pi + 0.25, 1e-10, provenance=evolve.PLME2)
    assert process_matrix(m).min_eigenvalue < -1e-4


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def test_diamond_distance_basics():
    ident = identity_map()
    assert diamond_distance(ident, ident, n_starts=4) == pytest.approx(0.0, abs=1e-12)
    flip = unitary_map(SIGMA_X)
    assert diamond_distance(ident, flip, n_starts=8) == pytest.approx(2.0, abs=1e-7)
    alpha = math.pi / 3
    rot = unitary_map(expm(-0.5j * alpha * SIGMA_Z))
    assert diamond_distance(ident, rot, n_starts=8) == pytest.approx(
        2 * math.sin(alpha / 2), abs=1e-7)


def test_diamond_dominates_unstabilized_trace_distance():
    rng = np.random.default_rng(4)
    a = quasistatic_exact_map(0.1, 1.0, 4.0)
    gen = plme2_generator(NoiseModel.quasistatic(0.1), DRIVE)
    b = propagate_generator(gen, 0.0, 4.0, 1e-10)
    d = diamond_distance(a, b, n_starts=16)
    for _ in range(10):
        psi = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        psi /= np.linalg.norm(psi)
        rho = np.outer(psi, psi.conj())
        delta = unvec((a.deviation - b.deviation) @ vec(rho))
        tn = np.abs(np.linalg.eigvalsh(0.5 * (delta + delta.conj().T))).sum()
        assert d >= tn - 1e-9


def test_one_norm_examples():
    assert one_norm_distance(identity_map(), identity_map()) == 0.0
    d = np.zeros((4, 4), dtype=complex)
    d[0, 1], d[2, 1], d[3, 3] = 1.0, -2.0j, 0.5
    m = QuantumMap(d, 0.0, evolve.PLME2)
    assert one_norm_distance(m, identity_map()) == pytest.approx(3.0)


def test_one_norm_convention_mismatch():
    a = identity_map()
    b = QuantumMap(np.zeros((4, 4), dtype=complex), 0.0, evolve.PLME2,
                   basis_convention=PAULI_BASIS)
    with pytest.raises(ValueError):
        one_norm_distance(a, b)


def test_channel_distance_bundle():
    a = quasistatic_exact_map(0.05, 1.0, 3.0)
    gen = plme2_generator(NoiseModel.quasistatic(0.05), DRIVE)
    b = propagate_generator(gen, 0.0, 3.0, 1e-10)
    cd = channel_distance(a, b, n_starts=16)
    assert cd.t == 3.0
    assert 0 < cd.diamond < 2
    assert cd.one_norm > 0


# ---------------------------------------------------------------------------
# positivity scan
# ---------------------------------------------------------------------------

def test_scan_cptp_map_empty():
    m = quasistatic_exact_map(0.1, 1.0, 6.5)
    scan = nonphysical_state_scan(m, 12)
    assert scan.fraction == 0.0
    assert not scan.flagged.any()


def test_scan_flagged_plme_map_and_monotonicity():
    t_star = 2 * math.pi + math.pi / 4
    fractions = []
    for sigma in (0.2, 0.1, 0.05):
        gen = plme2_generator(NoiseModel.quasistatic(sigma), DRIVE)
        m = propagate_generator(gen, 0.0, t_star, 1e-10)
        scan = nonphysical_state_scan(m, 18)
        fractions.append(scan.fraction)
    assert fractions[1] > 0.0  # sigma = 0.1 patch is nonempty
    assert fractions[0] >= fractions[1] >= fractions[2]
    assert fractions[0] > fractions[2]


def test_scan_json_export():
    gen = plme2_generator(NoiseModel.quasistatic(0.1), DRIVE)
    m = propagate_generator(gen, 0.0, 2 * math.pi + 0.25, 1e-10)
    scan = nonphysical_state_scan(m, 10)
    data = json.loads(scan.to_json())
    assert data["n_theta"] == 10
    assert data["fraction"] == pytest.approx(scan.fraction)
    assert len(data["patch"]) == int(scan.flagged.sum())


# ---------------------------------------------------------------------------
# series extraction
# ---------------------------------------------------------------------------

def test_diagnostics_csv_export(tmp_path):
    from plme_lab.channel import ChannelDistance, write_diagnostics_csv
    path = tmp_path / "diag.csv"
    write_diagnostics_csv(path, [0.5, 1.0],
                          [(1e-3, -2e-4, 1e-6), (2e-3, -3e-4, 2e-6)],
                          [ChannelDistance(0.01, 0.02, 0.5),
                           ChannelDistance(0.03, 0.04, 1.0)],
                          [-1e-5, 2e-5])
    lines = path.read_text().splitlines()
    assert lines[0] == "t,gamma_1,gamma_2,gamma_3,diamond,one_norm,chi_min_eig"
    assert len(lines) == 3
    assert float(lines[2].split(",")[4]) == 0.03


def test_canonical_rates_series_constant_lindblad():
    gamma = 0.02
    lind = gamma * dissipator(SIGMA_Z)
    grid = np.linspace(0.0, 1.0, 21)
    devs = np.array([expm(lind, t) - IDENTITY_4 for t in grid])
    times, rates = canonical_rates_series(devs, grid, lambda t: (SIGMA_Z, SIGMA_Y, SIGMA_X))
    assert np.abs(rates[:, 0] - gamma).max() < 1e-6
    assert np.abs(rates[:, 1:]).max() < 1e-8
