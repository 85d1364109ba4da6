"""Channel diagnostics: instantaneous generators, canonical rate
decomposition, Choi and process matrices, and channel distances.

The diamond norm is computed by direct maximization over stabilized pure
inputs (system plus one ancilla qubit): alternating between the optimal
measurement (sign of the output operator) and the optimal input (top
eigenvector of the back-propagated sign operator) is monotone in the
objective, and multi-start makes the local search reliable at this dimension.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .evolve import QuantumMap, evolve_state
from .qmath import (COLUMN_STACKING, IDENTITY_2, IDENTITY_4, NORMALIZED_PAULIS, PAULIS,
                    SIGMA_X, SIGMA_Y, SIGMA_Z, herm_eig, commutator_superop, dissipator,
                    hs_inner)


class SingularMapError(RuntimeError):
    pass


def _superop_of(obj) -> np.ndarray:
    if isinstance(obj, QuantumMap):
        return obj.superop
    return np.asarray(obj, dtype=complex)


def _deviation_of(obj) -> np.ndarray:
    if isinstance(obj, QuantumMap):
        return obj.deviation
    return np.asarray(obj, dtype=complex) - IDENTITY_4


def _convention_of(obj) -> str:
    return obj.basis_convention if isinstance(obj, QuantumMap) else COLUMN_STACKING


# ---------------------------------------------------------------------------
# Instantaneous generator
# ---------------------------------------------------------------------------

def instantaneous_generator(maps, t: float, dt: float, *, richardson: bool = True,
                            cond_limit: float = 1e8) -> np.ndarray:
    """Logarithmic derivative of the evolution map at time t.

    ``maps`` is a callable returning the map at a requested time.  The
    forward difference (V(t+d) V(t)^{-1} - 1)/d is extrapolated over d and
    d/2, removing the first-order error.
    """
    v_inv = _checked_inverse(_superop_of(maps(t)), cond_limit)

    def estimate(d: float) -> np.ndarray:
        vp = _superop_of(maps(t + d))
        return (vp @ v_inv - IDENTITY_4) / d

    if not richardson:
        return estimate(dt)
    return 2.0 * estimate(dt / 2.0) - estimate(dt)


def _checked_inverse(v: np.ndarray, cond_limit: float) -> np.ndarray:
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularMapError(f"evolution map is ill-conditioned (cond = {cond:.3e})")
    return np.linalg.inv(v)


#: extrapolation weights per accuracy order: combination of the forward
#: estimates at steps h, 2h, 4h that cancels the error terms below O(h^order)
_EXTRAP_WEIGHTS = {1: (1.0,), 2: (2.0, -1.0), 3: (8.0 / 3.0, -2.0, 1.0 / 3.0)}


def generator_series(deviations: np.ndarray, grid: np.ndarray, *, order: int = 2,
                     cond_limit: float = 1e8):
    """Instantaneous generators from a uniformly-gridded map series.

    Forward differences with steps h, 2h (and 4h for ``order=3``) are combined
    to an O(h^order)-accurate estimate; the trailing grid points consumed by
    the largest step carry no output.  Returns (times, generators).
    """
    if order not in _EXTRAP_WEIGHTS:
        raise ValueError("order must be 1, 2 or 3")
    grid = np.asarray(grid, dtype=float)
    h = grid[1] - grid[0]
    if np.abs(np.diff(grid) - h).max() > 1e-9 * max(h, 1.0):
        raise ValueError("generator_series needs a uniform grid")
    weights = _EXTRAP_WEIGHTS[order]
    strides = [2**j for j in range(len(weights))]
    n = len(grid)
    last = n - strides[-1]
    gens = np.empty((last, 4, 4), dtype=complex)
    for k in range(last):
        v_inv = _checked_inverse(IDENTITY_4 + deviations[k], cond_limit)
        acc = np.zeros((4, 4), dtype=complex)
        for w, s in zip(weights, strides):
            est = ((IDENTITY_4 + deviations[k + s]) @ v_inv - IDENTITY_4) / (s * h)
            acc += w * est
        gens[k] = acc
    return grid[:last], gens


# ---------------------------------------------------------------------------
# Canonical (Lindblad-like) decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CanonicalGenerator:
    """Unique Hamiltonian plus diagonalized dissipative part of a generator.

    Jump operators are Pauli-normalized (X^2 = 1 for unit Bloch vectors), so
    the attached rates read directly as dephasing rates: the generator is
    -i[H, .] + sum_i rates[i] D[jump_ops[i]].
    """

    hamiltonian: np.ndarray
    kossakowski: np.ndarray
    rates: np.ndarray
    jump_ops: tuple

    def assemble(self) -> np.ndarray:
        gen = commutator_superop(self.hamiltonian)
        for rate, op in zip(self.rates, self.jump_ops):
            gen = gen + rate * dissipator(op)
        return gen


# flattened projectors: row 4a+b holds conj(kron(G_b^T, G_a)) so that
# c[a, b] = Tr(kron(G_b^T, G_a)^dag L) is one matrix-vector product
_GKS_PROJ = np.array([np.kron(gb.T, ga).conj().ravel()
                      for ga in NORMALIZED_PAULIS for gb in NORMALIZED_PAULIS])
_CHI_PROJ = np.array([np.kron(pm.T, pn).conj().ravel() / 4.0
                      for pn in PAULIS for pm in PAULIS])


def gks_matrix(superop: np.ndarray) -> np.ndarray:
    """Coefficients c with L(rho) = sum_ab c[a,b] G_a rho G_b over {I,sx,sy,sz}/sqrt2."""
    s = np.asarray(superop, dtype=complex)
    return (_GKS_PROJ @ s.ravel()).reshape(4, 4)


def canonical_decompose(superop: np.ndarray, tol: float = 1e-8) -> CanonicalGenerator:
    """Bring a trace- and Hermiticity-preserving generator to canonical form."""
    s = np.asarray(superop, dtype=complex)
    scale = max(1.0, float(np.abs(s).max()))
    trace_defect = float(np.abs(np.array([1, 0, 0, 1]) @ s).max())
    if trace_defect > tol * scale:
        raise ValueError(f"generator is not trace-preserving (defect {trace_defect:.2e})")
    c = gks_matrix(s)
    herm_defect = float(np.abs(c - c.conj().T).max())
    if herm_defect > tol * scale:
        raise ValueError(f"generator is not Hermiticity-preserving (defect {herm_defect:.2e})")
    c = 0.5 * (c + c.conj().T)

    b_op = sum(c[j, 0] * NORMALIZED_PAULIS[j] for j in (1, 2, 3)) / math.sqrt(2.0)
    ham = 0.5j * (b_op - b_op.conj().T)

    k = c[1:, 1:]
    lam, vecs = herm_eig(k, tol=max(tol, 1e-12) * 10)
    order = np.argsort(-np.abs(lam))
    rates = lam[order] / 2.0
    ops = []
    for idx in order:
        v = vecs[:, idx]
        pivot = int(np.argmax(np.abs(v)))
        phase = v[pivot] / abs(v[pivot]) if abs(v[pivot]) > 0 else 1.0
        v = v / phase
        op = v[0] * SIGMA_X + v[1] * SIGMA_Y + v[2] * SIGMA_Z
        ops.append(op)
    return CanonicalGenerator(hamiltonian=ham, kossakowski=k,
                              rates=np.asarray(rates, dtype=float), jump_ops=tuple(ops))


def match_rates(canonical: CanonicalGenerator, references) -> np.ndarray:
    """Order the canonical rates by jump-operator overlap with reference operators.

    Returns rates[i] assigned to references[i]; the assignment maximizes the
    summed absolute Hilbert-Schmidt overlaps over all permutations.
    """
    refs = [np.asarray(r) for r in references]
    n = len(refs)
    overlaps = np.zeros((n, n))
    for i, op in enumerate(canonical.jump_ops[:n]):
        for j, ref in enumerate(refs):
            overlaps[i, j] = abs(hs_inner(op, ref)) / (np.linalg.norm(op) * np.linalg.norm(ref))
    best, best_perm = -1.0, None
    for perm in permutations(range(n)):
        total = sum(overlaps[i, perm[i]] for i in range(n))
        if total > best:
            best, best_perm = total, perm
    out = np.empty(n)
    for i in range(n):
        out[best_perm[i]] = canonical.rates[i]
    return out


def canonical_rates_series(deviations: np.ndarray, grid: np.ndarray, reference_ops, *,
                           order: int = 3, cond_limit: float = 1e8):
    """Matched canonical rates along a map series.

    ``reference_ops`` is a callable t -> sequence of reference jump operators
    (one slot per extracted rate).  Returns (times, rates) with rates of
    shape (len(times), n_refs).
    """
    times, gens = generator_series(deviations, grid, order=order,
                                   cond_limit=cond_limit)
    refs0 = reference_ops(float(times[0]))
    out = np.empty((len(times), len(refs0)))
    for k, t in enumerate(times):
        can = canonical_decompose(gens[k], tol=1e-5)
        out[k] = match_rates(can, reference_ops(float(t)))
    return times, out


def ensemble_canonical_rates(batch_deviations: np.ndarray, grid: np.ndarray,
                             reference_ops, *, order: int = 3,
                             cond_limit: float = 1e8):
    """Canonical rates of an ensemble with jackknife standard errors.

    Rates are extracted from the full-ensemble mean map (extracting per batch
    and averaging instead would bias nearly degenerate rates apart, because
    batch-level noise in the Kossakowski matrix exceeds small eigenvalue
    gaps); the standard error comes from leave-one-batch-out replicates.
    Returns (times, rates, se).
    """
    b = batch_deviations.shape[0]
    full = batch_deviations.mean(axis=0)
    times, rates = canonical_rates_series(full, grid, reference_ops, order=order,
                                          cond_limit=cond_limit)
    reps = np.empty((b,) + rates.shape)
    for i in range(b):
        loo = (full * b - batch_deviations[i]) / (b - 1)
        reps[i] = canonical_rates_series(loo, grid, reference_ops, order=order,
                                         cond_limit=cond_limit)[1]
    se = np.sqrt((b - 1) / b * ((reps - reps.mean(axis=0)) ** 2).sum(axis=0))
    return times, rates, se


# ---------------------------------------------------------------------------
# Channel representations
# ---------------------------------------------------------------------------

def _phi_tensor(superop: np.ndarray) -> np.ndarray:
    """P[s, c, i, j] = Phi(|i><j|)[s, c] from a column-stacking superoperator."""
    return np.asarray(superop).reshape(2, 2, 2, 2).transpose(1, 0, 3, 2)


def choi(qmap) -> np.ndarray:
    """Choi matrix J = sum_ij |i><j| (x) Phi(|i><j|); trace 2 when trace-preserving."""
    p = _phi_tensor(_superop_of(qmap))
    return p.transpose(2, 0, 3, 1).reshape(4, 4)


@dataclass(frozen=True)
class ProcessMatrix:
    """Channel coefficients over the Pauli basis {I, sx, sy, sz}."""

    chi: np.ndarray
    min_eigenvalue: float


def process_matrix(qmap) -> ProcessMatrix:
    """chi with Phi(rho) = sum_nm chi[n,m] P_n rho P_m; PSD iff the map is CP."""
    s = _superop_of(qmap)
    chi = (_CHI_PROJ @ s.ravel()).reshape(4, 4)
    chi = 0.5 * (chi + chi.conj().T)
    w, _ = herm_eig(chi, tol=1e-6)
    return ProcessMatrix(chi=chi, min_eigenvalue=float(w[0]))


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelDistance:
    diamond: float
    one_norm: float
    t: float


def one_norm_distance(map_a, map_b) -> float:
    """Maximum absolute column sum of the superoperator difference."""
    if _convention_of(map_a) != _convention_of(map_b):
        raise ValueError("maps use different basis conventions")
    delta = _deviation_of(map_a) - _deviation_of(map_b)
    return float(np.abs(delta).sum(axis=0).max())


def diamond_distance(map_a, map_b, *, n_starts: int = 64, tol: float = 1e-6,
                     max_iters: int = 400, seed: int = 0) -> float:
    """Diamond norm of the difference map by stabilized-input maximization.

    Maximizes the trace norm of ((Phi_a - Phi_b) (x) id)(|psi><psi|) over pure
    states of system plus ancilla, alternating measurement and input updates
    (each step is monotone), from ``n_starts`` random starts.
    """
    delta = _deviation_of(map_a) - _deviation_of(map_b)
    choi_delta = _phi_tensor(delta).transpose(2, 0, 3, 1).reshape(4, 4)
    if np.abs(choi_delta - choi_delta.conj().T).max() > 1e-8 * max(1.0, np.abs(choi_delta).max()):
        raise ValueError("diamond_distance needs Hermiticity-preserving maps")
    p = _phi_tensor(delta)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_starts):
        psi = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        psi /= np.linalg.norm(psi)
        prev = -1.0
        for _ in range(max_iters):
            m = np.einsum("scij,ia,jb->sacb", p, psi, psi.conj(), optimize=True).reshape(4, 4)
            m = 0.5 * (m + m.conj().T)
            lam, u = np.linalg.eigh(m)
            val = float(np.abs(lam).sum())
            if abs(val - prev) < tol * max(1.0, val):
                break
            prev = val
            sign_op = ((u * np.sign(lam)) @ u.conj().T).reshape(2, 2, 2, 2)
            h = np.einsum("csij,sacb->iajb", p.conj(), sign_op, optimize=True).reshape(4, 4)
            h = 0.5 * (h + h.conj().T)
            _, uh = np.linalg.eigh(h)
            psi = uh[:, -1].reshape(2, 2)
        best = max(best, val)
    return best


def channel_distance(map_a, map_b, *, t: float | None = None, **kwargs) -> ChannelDistance:
    if t is None:
        t = map_a.t if isinstance(map_a, QuantumMap) else 0.0
    return ChannelDistance(diamond=diamond_distance(map_a, map_b, **kwargs),
                           one_norm=one_norm_distance(map_a, map_b), t=float(t))


# ---------------------------------------------------------------------------
# Positivity analysis
# ---------------------------------------------------------------------------

def write_diagnostics_csv(path, times, rates, distances, chi_min_eigs) -> None:
    """Export a diagnostics time series as CSV.

    ``rates`` has one row of three canonical rates per time; ``distances`` is
    a sequence of :class:`ChannelDistance`.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,gamma_1,gamma_2,gamma_3,diamond,one_norm,chi_min_eig\n")
        for t, r, d, c in zip(times, rates, distances, chi_min_eigs):
            row = (t, r[0], r[1], r[2], d.diamond, d.one_norm, c)
            fh.write(",".join(f"{float(v):.17g}" for v in row) + "\n")


@dataclass(frozen=True)
class BlochScan:
    """Pure-state grid scan flagging nonphysical images under a map."""

    thetas: np.ndarray
    phis: np.ndarray
    min_eigs: np.ndarray   # (len(thetas), len(phis))
    flagged: np.ndarray
    threshold: float

    @property
    def fraction(self) -> float:
        """Solid-angle fraction of flagged initial states."""
        w = np.sin(self.thetas)
        total = w.sum() * len(self.phis)
        if total == 0:
            return 0.0
        return float((self.flagged * w[:, None]).sum() / total)

    def to_json(self) -> str:
        patch = [{"theta": float(self.thetas[i]), "phi": float(self.phis[j]),
                  "min_eig": float(self.min_eigs[i, j])}
                 for i, j in zip(*np.nonzero(self.flagged))]
        return json.dumps({"threshold": self.threshold, "fraction": self.fraction,
                           "n_theta": len(self.thetas), "n_phi": len(self.phis),
                           "patch": patch}, indent=2)


def nonphysical_state_scan(qmap, grid_resolution: int = 36, *,
                           threshold: float = -1e-12) -> BlochScan:
    """Scan pure initial states for negative output eigenvalues under the map."""
    thetas = (np.arange(grid_resolution) + 0.5) * np.pi / grid_resolution
    phis = np.arange(2 * grid_resolution) * np.pi / grid_resolution
    min_eigs = np.empty((len(thetas), len(phis)))
    for i, th in enumerate(thetas):
        for j, ph in enumerate(phis):
            psi = np.array([math.cos(th / 2.0),
                            complex(math.cos(ph), math.sin(ph)) * math.sin(th / 2.0)])
            rho = np.outer(psi, psi.conj())
            out = evolve_state(qmap, rho)
            min_eigs[i, j] = float(np.linalg.eigvalsh(0.5 * (out + out.conj().T))[0])
    flagged = min_eigs < threshold
    return BlochScan(thetas=thetas, phis=phis, min_eigs=min_eigs,
                     flagged=flagged, threshold=threshold)
