"""Dense complex linear algebra for 2x2 operators and 4x4 superoperators.

Vectorization convention used throughout the package: column stacking in the
computational basis, vec(X)[r + 2*c] = X[r, c], so that
vec(A X B) = kron(B.T, A) @ vec(X).  Superoperators produced here are 4x4
matrices acting on such vectors.  The alternative normalized-Pauli basis is
available through :func:`to_pauli_basis`.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

COLUMN_STACKING = "column-stacking computational basis"
PAULI_BASIS = "normalized-Pauli basis"

IDENTITY_2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULIS = (IDENTITY_2, SIGMA_X, SIGMA_Y, SIGMA_Z)

IDENTITY_4 = np.eye(4, dtype=complex)
#: vec(I), the left null vector of every trace-preserving generator.
VEC_IDENTITY = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex)

#: Orthonormal Hermitian operator basis {I, sx, sy, sz}/sqrt(2).
NORMALIZED_PAULIS = tuple(P / np.sqrt(2.0) for P in PAULIS)


def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(matrix).T.reshape(-1)


def unvec(vector: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vec` for 2x2 matrices."""
    return np.asarray(vector).reshape(2, 2).T


def hs_inner(x: np.ndarray, y: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product Tr(X^dag Y)."""
    return complex(np.trace(np.asarray(x).conj().T @ np.asarray(y)))


def hs_norm(x: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(x)))


def is_hermitian(m: np.ndarray, tol: float = 1e-10) -> bool:
    m = np.asarray(m)
    return bool(np.abs(m - m.conj().T).max() <= tol)


def left_mult(a: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> a @ rho."""
    return np.kron(IDENTITY_2, a)


def right_mult(b: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> rho @ b."""
    return np.kron(np.asarray(b).T, IDENTITY_2)


def dissipator(x: np.ndarray) -> np.ndarray:
    """Superoperator of the Lindblad dissipator D[X]rho = X rho X^dag - {X^dag X, rho}/2."""
    x = np.asarray(x, dtype=complex)
    xdx = x.conj().T @ x
    return (np.kron(x.conj(), x)
            - 0.5 * (left_mult(xdx) + right_mult(xdx)))


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> -i [H, rho] for Hermitian H."""
    h = np.asarray(h, dtype=complex)
    asym = np.abs(h - h.conj().T).max()
    if asym > 1e-10:
        raise ValueError(f"commutator_superop requires Hermitian input (asymmetry {asym:.2e})")
    return -1.0j * (left_mult(h) - right_mult(h))


def expm(m: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Matrix exponential exp(scale * M).

    2x2 inputs use the closed form (exact Pauli rotation for anti-Hermitian
    exponents); larger matrices go through scipy's scaling-and-squaring.
    """
    a = scale * np.asarray(m, dtype=complex)
    if a.shape == (2, 2):
        return _expm_2x2(a)
    return scipy.linalg.expm(a)


def _expm_2x2(a: np.ndarray) -> np.ndarray:
    # exp(A) = e^{mu} (cosh(d) I + sinh(d)/d (A - mu I)), mu = tr/2, d^2 = mu^2 - det
    mu = 0.5 * np.trace(a)
    b = a - mu * IDENTITY_2
    d2 = b[0, 0] * b[0, 0] + b[0, 1] * b[1, 0]  # = -det(B)
    d = np.sqrt(d2) if d2 != 0 else 0.0
    if abs(d) < 1e-30:
        f = 1.0
    else:
        f = np.sinh(d) / d
    return np.exp(mu) * (np.cosh(d) * IDENTITY_2 + f * b)


def pauli_rotation(angle: float | np.ndarray, axis: np.ndarray) -> np.ndarray:
    """exp(-i * angle * (n . sigma)) for a Bloch axis with n.n = 1.

    ``angle`` may be an array; the result is then stacked along leading axes.
    """
    h = axis[..., 0, None, None] * SIGMA_X + axis[..., 1, None, None] * SIGMA_Y \
        + axis[..., 2, None, None] * SIGMA_Z
    ang = np.asarray(angle)[..., None, None]
    return np.cos(ang) * IDENTITY_2 - 1.0j * np.sin(ang) * h


def herm_eig(m: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Returns (eigenvalues, eigenvectors); columns of the second factor are the
    eigenvectors.  Rejects inputs whose anti-Hermitian part exceeds ``tol``.
    """
    m = np.asarray(m, dtype=complex)
    asym = np.abs(m - m.conj().T).max()
    if asym > tol:
        raise ValueError(f"herm_eig requires Hermitian input (asymmetry {asym:.2e})")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return w, v


def conjugation_superop(u: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> U rho U^dag."""
    u = np.asarray(u, dtype=complex)
    return np.kron(u.conj(), u)


def is_trace_preserving_generator(superop: np.ndarray, tol: float = 1e-12) -> bool:
    """True when vec(I)^dag L = 0, i.e. the generator annihilates the trace."""
    return bool(np.abs(VEC_IDENTITY.conj() @ np.asarray(superop)).max() <= tol)


def to_pauli_basis(superop: np.ndarray) -> np.ndarray:
    """Rewrite a column-stacking superoperator in the normalized-Pauli basis.

    Entry (a, b) is <G_a, Phi(G_b)> with G = {I, sx, sy, sz}/sqrt(2); real for
    Hermiticity-preserving maps.
    """
    s = np.asarray(superop)
    out = np.empty((4, 4), dtype=complex)
    for b, gb in enumerate(NORMALIZED_PAULIS):
        img = unvec(s @ vec(gb))
        for a, ga in enumerate(NORMALIZED_PAULIS):
            out[a, b] = hs_inner(ga, img)
    return out
