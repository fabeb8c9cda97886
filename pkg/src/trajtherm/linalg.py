"""Dense complex linear algebra for small Hilbert spaces (d <= ~16).

States follow two conventions used throughout the package:

* a pure state is a 1-D complex vector of unit Euclidean norm,
* a mixed state is a 2-D Hermitian, unit-trace, positive matrix.

Everything is plain ``numpy`` arrays; no sparsity, the systems of interest
are a handful of levels at most.
"""

from __future__ import annotations

import numpy as np

from . import tolerances as tol
from .errors import DimMismatch, NonHermitianInput

# Pauli matrices and ladder operators in the computational basis
# |0> = (1, 0), |1> = (0, 1); sigma_z |0> = +|0>.
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |0><1|
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)   # |1><0|


def adjoint(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose. Involutive: adjoint(adjoint(m)) == m."""
    return np.asarray(m).conj().T


def is_hermitian(m: np.ndarray, atol: float = tol.HERMITICITY_TOL) -> bool:
    return np.max(np.abs(m - adjoint(m))) <= atol


def expectation(op: np.ndarray, state: np.ndarray) -> complex:
    """<psi|op|psi> for a ket, tr[op rho] for a density matrix."""
    op = np.asarray(op)
    state = np.asarray(state)
    if state.ndim == 1:
        if op.shape[0] != state.shape[0]:
            raise DimMismatch(f"operator dim {op.shape[0]} vs state dim {state.shape[0]}")
        return complex(np.vdot(state, op @ state))
    if op.shape[0] != state.shape[0]:
        raise DimMismatch(f"operator dim {op.shape[0]} vs state dim {state.shape[0]}")
    return complex(np.trace(op @ state))


def projector(ket: np.ndarray) -> np.ndarray:
    """|ket><ket| (ket assumed normalised)."""
    return np.outer(ket, ket.conj())


def check_density_matrix(rho: np.ndarray) -> None:
    """Raise when rho is not Hermitian / unit trace / positive within tolerance."""
    rho = np.asarray(rho)
    if not is_hermitian(rho, atol=1e-12 * max(1.0, float(np.max(np.abs(rho))))):
        if np.max(np.abs(rho - adjoint(rho))) > tol.HERMITICITY_TOL:
            raise NonHermitianInput("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol.TRACE_TOL:
        raise ValueError(f"density matrix trace {np.trace(rho).real} != 1")
    w = np.linalg.eigvalsh(0.5 * (rho + adjoint(rho)))
    if w.min() < tol.PSD_FLOOR:
        raise ValueError(f"density matrix has eigenvalue {w.min()} below {tol.PSD_FLOOR}")


def hermitian_eigendecomposition(m: np.ndarray):
    """Spectral decomposition of a Hermitian matrix with degeneracy merging.

    Returns a list of ``(eigenvalue, projector)`` pairs sorted by descending
    eigenvalue.  Eigenvalues closer than ``EIGEN_MERGE_GAP`` are merged into a
    single higher-rank projector (the sum of the rank-1 projectors), which
    pins down degenerate-subspace handling deterministically.
    """
    m = np.asarray(m, dtype=complex)
    if np.max(np.abs(m - adjoint(m))) > tol.HERMITICITY_TOL:
        raise NonHermitianInput("input exceeds Hermiticity tolerance")
    w, v = np.linalg.eigh(0.5 * (m + adjoint(m)))
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    out = []
    i = 0
    d = m.shape[0]
    while i < d:
        j = i + 1
        while j < d and abs(w[j] - w[j - 1]) < tol.EIGEN_MERGE_GAP:
            j += 1
        block = v[:, i:j]
        out.append((float(np.mean(w[i:j])), block @ block.conj().T))
        i = j
    return out


def resolved_projectors(m: np.ndarray):
    """Rank-1 resolution of the spectral decomposition of a Hermitian matrix.

    Each merged eigenspace is split into rank-1 projectors along a basis
    obtained by projecting the computational basis into the eigenspace
    (Gram-Schmidt in index order), so ties are broken the same way on every
    run.  Returns a list of ``(eigenvalue, rank1_projector)`` pairs, again in
    descending eigenvalue order.
    """
    out = []
    d = np.asarray(m).shape[0]
    for lam, proj in hermitian_eigendecomposition(m):
        rank = int(round(np.trace(proj).real))
        if rank == 1:
            out.append((lam, proj))
            continue
        basis = []
        for idx in range(d):
            if len(basis) == rank:
                break
            vec = proj[:, idx].copy()
            for b in basis:
                vec -= b * np.vdot(b, vec)
            n = np.linalg.norm(vec)
            if n > 1e-7:
                basis.append(vec / n)
        if len(basis) != rank:  # pathological projector; fall back to eigh basis
            w, v = np.linalg.eigh(proj)
            basis = [v[:, k] for k in range(d) if w[k] > 0.5]
        out.extend((lam, projector(b)) for b in basis)
    return out


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """(1/2) sum |eig(a - b)| for two density matrices of equal dimension."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimMismatch(f"shapes {a.shape} vs {b.shape}")
    w = np.linalg.eigvalsh(0.5 * ((a - b) + adjoint(a - b)))
    return float(0.5 * np.sum(np.abs(w)))


def gibbs_state(hamiltonian: np.ndarray, temperature: float) -> np.ndarray:
    """exp(-H/T)/Z, computed through the eigenbasis."""
    w, v = np.linalg.eigh(hamiltonian)
    x = np.exp(-(w - w.min()) / temperature)
    x /= x.sum()
    return (v * x) @ v.conj().T


def von_neumann_entropy(rho: np.ndarray) -> float:
    w = np.linalg.eigvalsh(rho)
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log(w)))
