"""Compact Lie algebras, almost representations, the almost-Casimir and Newton correction."""
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import numpy as np

from .errors import ContractError, DivergenceError, ReducibilityError, ValidationError
from .linalg import comm, dag, hermitian_eig, operator_norm
from .su2 import build_exact_su2

REDUCIBLE_TOL = 1e-10


@dataclass(frozen=True)
class LieAlgebraData:
    n: int
    structure: np.ndarray

    def bracket_images(self, images, j, k):
        """t({e_j, e_k}) = sum_l c[j][k][l] t(e_l)."""
        return np.tensordot(self.structure[j, k], np.asarray(images), axes=1)


def killing_form(c):
    return np.einsum("ail,bli->ab", c, c)


def make_lie_algebra(structure, tol_jacobi=1e-12, tol_killing=1e-10):
    """Validate structure constants; the basis must be Killing-orthonormal: K = -I."""
    c = np.asarray(structure, dtype=float)
    if c.ndim != 3 or not (c.shape[0] == c.shape[1] == c.shape[2]):
        raise ValidationError(f"structure tensor must be n x n x n, got {c.shape}")
    n = c.shape[0]
    asym = np.abs(c + c.transpose(1, 0, 2))
    if asym.max() > 0:
        i, j, l = np.unravel_index(np.argmax(asym), asym.shape)
        raise ValidationError(f"antisymmetry fails at ({i},{j},{l})")
    # Jacobi: {e_i,{e_j,e_k}} + cyclic = 0
    cc = np.einsum("jkm,iml->ijkl", c, c)
    jac = cc + cc.transpose(1, 2, 0, 3) + cc.transpose(2, 0, 1, 3)
    if np.abs(jac).max() > tol_jacobi:
        i, j, k, _ = np.unravel_index(np.argmax(np.abs(jac)), jac.shape)
        raise ValidationError(f"Jacobi identity fails at ({i},{j},{k})")
    K = killing_form(c)
    bad = np.abs(K + np.eye(n))
    if bad.max() > tol_killing:
        a, b = np.unravel_index(np.argmax(bad), bad.shape)
        raise ValidationError(
            f"Killing form is not -identity: K[{a},{b}] = {K[a, b]:.6g}")
    return LieAlgebraData(n, c)


def su2_algebra():
    """su(2) with e_i = L_i/sqrt(2), so the Killing form is -identity."""
    eps = np.zeros((3, 3, 3))
    for i, j, k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        eps[i, j, k], eps[j, i, k] = 1.0, -1.0
    return make_lie_algebra(eps / np.sqrt(2))


def su_basis(n):
    """HS-orthonormal basis of traceless skew-Hermitian n x n matrices (i * Gell-Mann / sqrt 2)."""
    out = []
    for j in range(n):
        for k in range(j + 1, n):
            S = np.zeros((n, n), complex)
            S[j, k] = S[k, j] = 1
            A = np.zeros((n, n), complex)
            A[j, k], A[k, j] = -1j, 1j
            out += [S, A]
    for l in range(1, n):
        D = np.zeros((n, n), complex)
        D[np.arange(l), np.arange(l)] = 1
        D[l, l] = -l
        out.append(D * np.sqrt(2 / (l * (l + 1))))
    return np.array([1j * L / np.sqrt(2) for L in out]).reshape(len(out), n, n)


@dataclass(frozen=True)
class CasimirOperator:
    dim_space: int
    matrix: np.ndarray
    basis: np.ndarray

    def coords(self, sigma):
        return np.real(np.einsum("aij,ij->a", np.conj(self.basis), sigma))

    def from_coords(self, y):
        return np.tensordot(y, self.basis, axes=1)

    def apply(self, sigma):
        return self.from_coords(self.matrix @ self.coords(sigma))

    @cached_property
    def spectrum(self):
        return np.linalg.eigh(self.matrix)

    def solve(self, sigma):
        w, V = self.spectrum
        if w[0] <= REDUCIBLE_TOL:
            raise ReducibilityError(f"almost-Casimir is singular (lambda1 = {w[0]:.3e})")
        return self.from_coords(V @ ((V.T @ self.coords(sigma)) / w))


def gamma_apply(images, sigma):
    """Gamma(sigma) = -sum_i [[sigma, x_i], x_i]."""
    return -sum(comm(comm(sigma, x), x) for x in images)


class AlmostRep:
    """Images t(e_i) of a Killing-orthonormal basis in traceless skew-Hermitian matrices."""

    def __init__(self, algebra, images, check=True):
        self.algebra = algebra
        self.images = [np.asarray(x, dtype=complex) for x in images]
        if len(self.images) != algebra.n:
            raise ContractError(f"need {algebra.n} images, got {len(self.images)}")
        if check:
            for x in self.images:
                s = max(1.0, operator_norm(x))
                if operator_norm(x + dag(x)) > 1e-10 * s or abs(np.trace(x)) > 1e-10 * s * len(x):
                    raise ContractError("images must be traceless skew-Hermitian")

    @property
    def dim(self):
        return self.images[0].shape[0]

    @cached_property
    def casimir(self):
        return almost_casimir(self)

    @cached_property
    def stats(self):
        return mu_K_eps(self)


def defect_tensor(t):
    """alpha[j][k] = t({e_j,e_k}) - [t(e_j), t(e_k)]."""
    n, x = t.algebra.n, t.images
    d = t.dim
    alpha = np.zeros((n, n, d, d), complex)
    for j in range(n):
        for k in range(j + 1, n):
            a = t.algebra.bracket_images(x, j, k) - comm(x[j], x[k])
            alpha[j, k], alpha[k, j] = a, -a
    return alpha


def almost_casimir(t):
    """Gamma as a real symmetric matrix in the su_basis coordinates."""
    d = t.dim
    B = su_basis(d)
    I = np.eye(d)
    sup = np.zeros((d * d, d * d), complex)
    for x in t.images:
        x2 = x @ x
        # vec(A S B) = (A kron B^T) vec(S), row-major
        sup -= np.kron(I, x2.T) - 2 * np.kron(x, x.T) + np.kron(x2, I)
    Bv = B.reshape(len(B), -1)
    G = np.real(np.conj(Bv) @ sup @ Bv.T)
    G = (G + G.T) / 2
    return CasimirOperator(len(B), G, B)


def _traceless(S):
    return S - np.trace(S) / len(S) * np.eye(len(S))


def gamma_inverse_norm(cas, iters=20, seeds=16):
    """(lower, upper) bounds on the op-to-op norm of Gamma^{-1}."""
    w, V = cas.spectrum
    if w[0] <= REDUCIBLE_TOL:
        raise ReducibilityError(f"almost-Casimir is singular (lambda1 = {w[0]:.3e})")
    d = cas.basis.shape[1]
    ratio = lambda s: operator_norm(cas.solve(s)) / operator_norm(s)
    cands = list(cas.basis) + [cas.from_coords(V[:, 0])]
    start = sorted(cands, key=ratio, reverse=True)[:seeds]
    best = 0.0
    for s in start:
        for _ in range(iters):
            r = ratio(s)
            best = max(best, r)
            tau = cas.solve(s)
            Uu, sv, Vh = np.linalg.svd(tau)
            g = cas.solve(_traceless((np.outer(Uu[:, 0], Vh[0]) - np.outer(Vh[0].conj(), Uu[:, 0].conj())) / 2))
            h, Q = np.linalg.eigh((g / 1j + dag(g / 1j)) / 2)
            s_new = _traceless(1j * (Q * np.sign(h)) @ dag(Q))
            if operator_norm(s_new) < 1e-14:
                break
            s = s_new / operator_norm(s_new)
        best = max(best, ratio(s))
    upper = np.sqrt(d * d - 1) / w[0]
    return best, max(upper, best)


def mu_K_eps(t):
    """(mu, K, eps); mu is the certified lower bound from gamma_inverse_norm."""
    mu, _ = gamma_inverse_norm(t.casimir)
    K = max(operator_norm(x) for x in t.images)
    alpha = defect_tensor(t)
    n = t.algebra.n
    eps = max((operator_norm(alpha[j, k]) for j in range(n) for k in range(j + 1, n)), default=0.0)
    return mu, K, eps


def newton_correction(t):
    """a(e_j) = -sum_i Gamma^{-1}[alpha(e_j, e_i), x_i]; returns (a, t + a)."""
    cas = t.casimir
    alpha = defect_tensor(t)
    x = t.images
    n = t.algebra.n
    a = [-cas.solve(sum(comm(alpha[j, i], x[i]) for i in range(n))) for j in range(n)]
    nxt = []
    for xj, aj in zip(x, a):
        y = xj + aj
        y = (y - dag(y)) / 2
        nxt.append(_traceless(y))
    return a, AlmostRep(t.algebra, nxt, check=False)


def newton_stabilize(t, tol=1e-12, max_iter=30, gamma=0.01):
    """Iterate the Newton correction until eps < tol; returns (rep, history of (mu, K, eps))."""
    history = [t.stats]
    cur = t
    while history[-1][2] >= tol:
        if len(history) > max_iter:
            raise DivergenceError(
                f"no convergence in {max_iter} steps (eps = {history[-1][2]:.3e})", history)
        _, cur = newton_correction(cur)
        st = cur.stats
        if not np.isfinite(st[2]) or st[2] > 1e6 * max(history[0][2], 1.0):
            history.append(st)
            raise DivergenceError(f"defect blew up to {st[2]:.3e}", history)
        history.append(st)
    return cur, history


def newton_precondition(stats, gamma=0.01):
    mu, K, eps = stats
    return eps <= gamma * min(1 / (mu * K) ** 2, 1 / mu, 1.0)


def rep_distance(t, rep):
    return max(operator_norm(a - b) for a, b in zip(t.images, rep.images))


def projector_identity_check(t, P, tol=1e-10):
    """(lhs, rhs) with lhs = -tr(Gamma(Pt) Pt), Pt the traceless part of iP,
    and rhs = 2 sum_i |(1-P) x_i P|_HS^2 (equal to sum_i |[x_i, P]|_HS^2)."""
    P = np.asarray(P, dtype=complex)
    if operator_norm(P - dag(P)) > tol or operator_norm(P @ P - P) > tol:
        raise ContractError("P is not an orthogonal projector")
    Pt = _traceless(1j * P)
    lhs = float(-np.real(np.trace(gamma_apply(t.images, Pt) @ Pt)))
    Q = np.eye(len(P)) - P
    rhs = float(2 * sum(np.linalg.norm(Q @ x @ P) ** 2 for x in t.images))
    return lhs, rhs


def _leak(images, P):
    Q = np.eye(len(P)) - P
    return max(operator_norm(Q @ x @ P) for x in images)


def irreducibility_magnitude(t):
    """(lambda1, mu, d_upper); d_upper is a heuristic upper bound on d(X)."""
    cas = t.casimir
    w, V = cas.spectrum
    lam1 = float(w[0])
    try:
        mu = gamma_inverse_norm(cas)[0]
    except ReducibilityError:
        mu = np.inf
    d = t.dim
    A = cas.from_coords(V[:, 0])
    dec = hermitian_eig((A / 1j + dag(A / 1j)) / 2)
    cands = []
    for j in range(1, d):
        E = dec.basis[:, j:]
        cands.append(E @ dag(E))
    if d <= 4:
        for r in range(1, d):
            for S in combinations(range(d), r):
                P = np.zeros((d, d), complex)
                P[list(S), list(S)] = 1
                cands.append(P)
    d_up = min(_leak(t.images, P) for P in cands) if cands else 0.0
    return lam1, mu, float(d_up)


def su2_almost_rep(n, noise=0.0, rng=None):
    """Spin-(n-1)/2 images X_j/sqrt(2), optionally with traceless skew noise of norm `noise`."""
    alg = su2_algebra()
    X = [M / np.sqrt(2) for M in build_exact_su2(n).X]
    if noise:
        rng = np.random.default_rng(0) if rng is None else rng
        out = []
        for M in X:
            G = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            S = _traceless((G - dag(G)) / 2)
            out.append(M + S * (noise / operator_norm(S)))
        X = out
    return AlmostRep(alg, X)


def direct_sum(t, s):
    imgs = []
    for a, b in zip(t.images, s.images):
        M = np.zeros((len(a) + len(b),) * 2, complex)
        M[:len(a), :len(a)], M[len(a):, len(a):] = a, b
        imgs.append(M)
    return AlmostRep(t.algebra, imgs)
