"""Dense complex linear algebra: norms, spectral decompositions, polar factors, quasimodes."""
from dataclasses import dataclass

import numpy as np

from .errors import (ClusterEmptyError, ContractError, DimensionError,
                     NotNormalError, SingularityError)

HERM_TOL = 1e-10
NORMAL_TOL = 1e-8
CLUSTER_TOL = 1e-8
SINGULAR_TOL = 1e-12
# gaps at least this (relative to |A|) are split directly in normal_eig
SPLIT_GAP = 1e-3


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    basis: np.ndarray


@dataclass(frozen=True)
class QuasimodeResult:
    lam: complex
    bound: float
    unit_vector: np.ndarray
    cluster_dim: int
    projection_error: float

    @property
    def lambda_(self):
        return self.lam


def as_matrix(A):
    """Validate and return A as a square finite complex array."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ContractError("matrix has non-finite entries")
    return A


def dag(A):
    return np.conj(A).T


def comm(A, B):
    return A @ B - B @ A


def operator_norm(A):
    """Largest singular value, via the top eigenvalue of A*A."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if A.size == 0:
        return 0.0
    G = dag(A) @ A
    G = (G + dag(G)) / 2
    top = np.linalg.eigvalsh(G)[-1]
    return float(np.sqrt(max(top, 0.0)))


def hermitian_eig(A, tol=HERM_TOL):
    """Real ascending eigenvalues and an orthonormal eigenbasis of Hermitian A."""
    A = as_matrix(A)
    nA = operator_norm(A)
    if operator_norm(A - dag(A)) > tol * max(nA, np.finfo(float).tiny):
        raise ContractError("matrix is not Hermitian within tolerance")
    w, V = np.linalg.eigh((A + dag(A)) / 2)
    return SpectralDecomposition(w, V)


def _clusters(w, thresh):
    """Split a sorted array into runs whose consecutive gaps are below thresh."""
    groups, start = [], 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > thresh:
            groups.append(slice(start, i))
            start = i
    return groups


def _refine(parts, Q, thresh, good):
    # Q spans a joint cluster. Cut at gaps >= good where some Hermitian part has them,
    # otherwise bisect at the widest gap above thresh; eigenvector error stays ~ eps / gap.
    if Q.shape[1] == 1:
        return [Q]
    best = (0.0, None, None)
    for P in parts:
        w, V = np.linalg.eigh(dag(Q) @ P @ Q)
        gaps = np.diff(w)
        cuts = np.nonzero(gaps >= good)[0]
        QV = Q @ V
        if cuts.size:
            edges = [0, *(cuts + 1), len(w)]
            return [B for a, b in zip(edges, edges[1:]) for B in _refine(parts, QV[:, a:b], thresh, good)]
        i = int(np.argmax(gaps))
        if gaps[i] > best[0]:
            best = (gaps[i], i, QV)
    gap, i, QV = best
    if gap <= thresh:
        return [Q]
    return _refine(parts, QV[:, :i + 1], thresh, good) + _refine(parts, QV[:, i + 1:], thresh, good)


def _lex_order(lam, thresh):
    """Indices sorting by real part, runs of real parts within thresh sorted by imaginary part."""
    order = np.argsort(lam.real, kind="stable")
    out, run = [], [order[0]]
    for j in order[1:]:
        if lam[j].real - lam[run[-1]].real <= thresh:
            run.append(j)
        else:
            out += sorted(run, key=lambda i: lam[i].imag)
            run = [j]
    return np.array(out + sorted(run, key=lambda i: lam[i].imag))


def normal_eig(A, tol_normal=NORMAL_TOL, cluster_tol=CLUSTER_TOL):
    """Joint diagonalization of the Hermitian parts of a normal matrix.

    Eigenvalues come out sorted by real part, ties (within cluster_tol*|A|)
    broken by imaginary part.
    """
    A = as_matrix(A)
    nA = operator_norm(A)
    n = A.shape[0]
    if nA == 0:
        return SpectralDecomposition(np.zeros(n, complex), np.eye(n, dtype=complex))
    if operator_norm(A @ dag(A) - dag(A) @ A) > tol_normal * nA**2:
        raise NotNormalError("commutator with the adjoint exceeds tolerance")
    H1 = (A + dag(A)) / 2
    H2 = (A - dag(A)) / 2j
    thresh = cluster_tol * nA
    parts = [H1, H2, (H1 + H2) / np.sqrt(2), (H1 - H2) / np.sqrt(2)]
    blocks = _refine(parts, np.eye(n, dtype=complex), thresh, max(thresh, SPLIT_GAP * nA))
    Q = np.hstack(blocks)
    lam = np.einsum("ij,ij->j", np.conj(Q), A @ Q)
    idx = _lex_order(lam, thresh)
    return SpectralDecomposition(lam[idx], Q[:, idx])


def polar(A, tol=SINGULAR_TOL):
    """Left polar decomposition A = P U from the spectrum of A A*."""
    A = as_matrix(A)
    w, V = np.linalg.eigh((A @ dag(A) + dag(A @ dag(A))) / 2)
    s = np.sqrt(np.clip(w, 0.0, None))
    smin, smax = s[0], s[-1]
    if smax == 0 or smin <= tol * smax:
        raise SingularityError(f"matrix is singular: sigma_min = {smin:.3e}", smin)
    P = (V * s) @ dag(V)
    U = (V / s) @ dag(V) @ A
    return (P + dag(P)) / 2, U


def quasimode(A, v, alpha, delta, decomposition=None):
    """Spectral consequences of a near-eigenvector v of the normal matrix A.

    Returns the eigenvalue nearest alpha and the normalized projection of v
    onto the eigenvectors within delta of alpha.
    """
    v = np.asarray(v, dtype=complex)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ContractError("quasimode vector must be nonzero")
    if delta <= 0:
        raise ContractError("delta must be positive")
    if decomposition is None:
        decomposition = normal_eig(A)
    A = np.asarray(A, dtype=complex)
    w = A @ v - alpha * v
    bound = float(np.linalg.norm(w) / nv)
    dist = np.abs(decomposition.eigenvalues - alpha)
    j = int(np.argmin(dist))
    mask = dist < delta
    if not mask.any():
        raise ClusterEmptyError(
            f"no eigenvalue within {delta} of {alpha}; nearest at {dist[j]:.3e}", float(dist[j]))
    B = decomposition.basis[:, mask]
    p = B @ (dag(B) @ v)
    npj = np.linalg.norm(p)
    if npj == 0:
        raise ClusterEmptyError("vector is orthogonal to the cluster", float(dist[j]))
    e = p / npj
    err = float(np.linalg.norm(v - nv * e))
    return QuasimodeResult(complex(decomposition.eigenvalues[j]), bound, e, int(mask.sum()), err)
