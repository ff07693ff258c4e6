"""Clock/shift representations of the quantum torus, their stabilizer and intertwiners."""
from dataclasses import dataclass, field

import numpy as np

from .errors import (ChainBreakError, ClusterEmptyError, DimensionError,
                     InconsistencyError, NotEquivalentError)
from .linalg import dag, normal_eig, operator_norm, polar, quasimode


@dataclass(frozen=True)
class TorusIrrep:
    n: int
    theta1: float
    theta2: float
    X1: np.ndarray
    X2: np.ndarray
    basis: np.ndarray = None

    @property
    def X(self):
        return (self.X1, self.X2)


@dataclass(frozen=True)
class TorusPair:
    x1: np.ndarray
    x2: np.ndarray
    k: int
    c: float = 0.0

    @property
    def x(self):
        return (self.x1, self.x2)

    @property
    def dim(self):
        return self.x1.shape[0]

    @classmethod
    def from_irrep(cls, rep, k=None, c=0.0):
        return cls(rep.X1, rep.X2, rep.n if k is None else k, c)


@dataclass
class TorusStabilizationReport:
    rep: TorusIrrep
    distances: tuple
    residual_R1: float
    residual_R2: float
    theta_extracted: float
    chain_eigenvalues: np.ndarray
    drift: float = 0.0
    extra: dict = field(default_factory=dict)


def clock_shift(n, theta1=0.0, theta2=0.0):
    m = np.arange(n)
    X1 = np.diag(np.exp(2j * np.pi * (theta1 + m) / n))
    X2 = np.roll(np.eye(n, dtype=complex), 1, axis=0) * np.exp(2j * np.pi * theta2 / n)
    return X1, X2


def build_exact_qtorus(n, theta1=0.0, theta2=0.0):
    """Clock X1 = diag(e^{2 pi i (theta1+m)/n}), shift X2 e_m = e^{2 pi i theta2/n} e_{m+1}."""
    if n < 1:
        raise DimensionError("quantum torus irrep needs n >= 1")
    X1, X2 = clock_shift(n, theta1, theta2)
    return TorusIrrep(n, float(theta1), float(theta2), X1, X2, np.eye(n, dtype=complex))


def qtorus_defects(t):
    k, c, n = t.k, t.c, t.dim
    I = np.eye(n)
    r1 = k**3 * max(operator_norm(x @ dag(x) - I) for x in t.x)
    q = np.exp(2j * np.pi / (k + c))
    r2 = k**3 * operator_norm(t.x1 @ t.x2 - q * t.x2 @ t.x1)
    return r1, r2, n


def unitarize(t):
    """Replace each generator by its polar unitary factor; drift = max_j |x_j - U_j|."""
    us = [polar(x)[1] for x in t.x]
    drift = max(operator_norm(x - u) for x, u in zip(t.x, us))
    return TorusPair(us[0], us[1], t.k, t.c), drift


def _near_half_integer(c, tol=0.05):
    return abs((c % 1.0) - 0.5) < tol


def stabilize_qtorus(t, delta=None):
    """Exact clock/shift pair close to t, built from the x1 eigen-chain driven by x2."""
    n, k, c = t.dim, t.k, t.c
    if n > 2 * (k + c) - 1:
        raise InconsistencyError(f"dim {n} violates dim < 2(k+c) = {2 * (k + c)}")
    if delta is None:
        delta = np.pi / (2 * k)
    r1, r2, _ = qtorus_defects(t)
    u, drift = unitarize(t)
    dec = normal_eig(u.x1)
    evals = dec.eigenvalues
    step_phase = np.exp(2j * np.pi / (k + c))
    target = int(round(k + c))
    exact = n == target and not _near_half_integer(c)

    i0 = int(np.argmin(np.abs(evals - 1.0)))
    e0 = dec.basis[:, i0]
    e0 = e0 * (np.abs(e0).max() / e0[np.argmax(np.abs(e0))])
    claimed = np.zeros(n, bool)
    claimed[i0] = True
    vecs, lams = [e0], [complex(evals[i0])]
    for step in range(1, target if exact else n):
        alpha = lams[-1] * step_phase
        try:
            q = quasimode(u.x1, u.x2 @ vecs[-1], alpha, delta, decomposition=dec)
        except ClusterEmptyError as err:
            if exact:
                raise ChainBreakError(f"chain broke at step {step}: {err}", step) from err
            break
        mask = np.abs(evals - alpha) < delta
        if q.cluster_dim > 1:
            raise InconsistencyError(f"eigenvalue cluster of multiplicity {q.cluster_dim} at step {step}",
                                     evals[~(claimed | mask)].tolist())
        if (claimed & mask).any():
            if exact:
                raise InconsistencyError(f"chain revisits a cluster at step {step}",
                                         evals[~claimed].tolist())
            break
        claimed |= mask
        vecs.append(q.unit_vector)
        lams.append(q.lam)
    orphans = evals[~claimed].tolist()
    if not exact or orphans:
        if _near_half_integer(c):
            why = f"c = {c} is within 0.05 of a half-integer"
        elif n != target:
            why = f"dim {n} != round(k+c) = {target}"
        else:
            why = "eigenvalues left unclaimed by the chain"
        raise InconsistencyError(why, orphans)

    E = np.column_stack(vecs)
    theta = float(np.angle(np.vdot(E[:, 0], u.x2 @ E[:, -1])))
    m = np.arange(n)
    F = E * np.exp(-1j * theta * m / n)
    lam0 = lams[0] / abs(lams[0])
    D1 = np.diag(lam0 * np.exp(2j * np.pi * m / n))
    S = np.roll(np.eye(n, dtype=complex), 1, axis=0) * np.exp(1j * theta / n)
    X1 = F @ D1 @ dag(F)
    X2 = F @ S @ dag(F)
    theta1 = (n * np.angle(lam0) / (2 * np.pi)) % n
    theta2 = (theta / (2 * np.pi)) % n
    rep = TorusIrrep(n, float(theta1), float(theta2), X1, X2, F)
    dists = (operator_norm(t.x1 - X1), operator_norm(t.x2 - X2))
    return TorusStabilizationReport(rep, dists, r1, r2, theta % (2 * np.pi),
                                    np.array(lams), drift)


def lattice_operator(rep, m1, m2):
    """U_{m1,m2} = X1^{-m2} X2^{m1}; conjugation multiplies X_j by e^{2 pi i m_j/n}."""
    return (np.linalg.matrix_power(dag(rep.X1), m2 % rep.n)
            @ np.linalg.matrix_power(rep.X2, m1 % rep.n))


def _spectral_shift(A, B, n):
    """Phase p in (-1/2n, 1/2n] with spectrum(B) = e^{2 pi i p} spectrum(A), least-squares refined."""
    la = normal_eig(A).eigenvalues
    lb = normal_eig(B).eigenvalues
    w = 2 * np.pi / n
    p = np.angle(lb[0] / la) % w
    p = np.where(p > w / 2, p - w, p)
    p = float(p[np.argmin(np.abs(p))])
    # refinement: average the residual phase over all matched pairs
    rot = la * np.exp(1j * p)
    match = lb[np.argmin(np.abs(rot[:, None] - lb[None, :]), axis=1)]
    p += float(np.mean(np.angle(match / rot)))
    return (p / (2 * np.pi)) % 1.0


def _chain(X1, X2, mu):
    dec = normal_eig(X1)
    i = int(np.argmin(np.abs(dec.eigenvalues - mu)))
    v = dec.basis[:, i]
    vecs = [v]
    for _ in range(X1.shape[0] - 1):
        v = X2 @ v
        vecs.append(v / np.linalg.norm(v))
    return np.column_stack(vecs)


def _lattice_scores(U0, a):
    """|tr(L_m U0)|/n for every lattice operator L_m, via one FFT per m1."""
    n = a.n
    mu = normal_eig(a.X1).eigenvalues[0]
    E = _chain(a.X1, a.X2, mu)
    M = dag(E) @ U0 @ E
    kappa = np.vdot(E[:, 0], a.X2 @ E[:, -1])
    i = np.arange(n)
    scores = np.empty((n, n))
    for m1 in range(n):
        j = (i - m1) % n
        c = M[j, i] * np.where(j + m1 >= n, kappa, 1.0)
        scores[m1] = np.abs(np.fft.fft(c)) / n
    return scores


def align_qtorus(a, b, tol=1e-8, absorb=True):
    """Translation p and unitary U with b.X_j = e^{2 pi i p_j} U* a.X_j U.

    With absorb=True the returned U also includes the lattice operator that
    absorbs the multiple of 1/n in p, so |b.X_j - U* a.X_j U| = O(1/n).
    Residuals are reported for the returned U, phases included when absorb=False.
    """
    if a.n != b.n:
        raise DimensionError(f"dimensions differ: {a.n} vs {b.n}")
    n = a.n
    p0 = np.array([_spectral_shift(A, B, n) for A, B in zip(a.X, b.X)])
    ph = np.exp(2j * np.pi * p0)
    mu = normal_eig(b.X1).eigenvalues[0]
    Ea = _chain(ph[0] * a.X1, ph[1] * a.X2, mu)
    Eb = _chain(b.X1, b.X2, mu)
    U0 = Ea @ dag(Eb)
    # every intertwiner is L_m U0 with p = p0 - m/n; keep the one nearest the identity
    scores = _lattice_scores(U0, a)
    m1, m2 = np.unravel_index(np.argmax(scores), scores.shape)
    if scores[m1, m2] < 0.5:
        m1 = m2 = 0
    U = lattice_operator(a, int(m1), int(m2)) @ U0
    p = (p0 - np.array([m1, m2]) / n) % 1.0
    ph = np.exp(2j * np.pi * p)
    fit = max(operator_norm(B - f * dag(U) @ A @ U) for A, B, f in zip(a.X, b.X, ph))
    if fit > tol:
        raise NotEquivalentError(f"no intertwiner found (residual {fit:.3e})")
    if absorb:
        mj = np.rint(n * p).astype(int)
        U = lattice_operator(a, int(mj[0]), int(mj[1])) @ U
        ph = (1.0, 1.0)
    g = U[0, 0]
    if abs(g) > 1e-14:
        U = U * (abs(g) / g)
    res = tuple(operator_norm(B - f * dag(U) @ A @ U) for A, B, f in zip(a.X, b.X, ph))
    p = np.where(p > 0.5, p - 1.0, p)
    return U, (float(p[0]), float(p[1])), res


def random_hermitian(n, rng, scale=1.0):
    G = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    H = (G + dag(G)) / 2
    return H * (scale / operator_norm(H))


def perturbed_pair(n, k, eta, rng, c=0.0, theta1=0.0, theta2=0.0):
    """x_j = X_j exp(i A_j / k^2) with independent Hermitian A_j of norm eta."""
    rep = build_exact_qtorus(n, theta1, theta2)
    xs = []
    for X in rep.X:
        w, V = np.linalg.eigh(random_hermitian(n, rng, eta))
        xs.append(X @ ((V * np.exp(1j * w / k**2)) @ dag(V)))
    return TorusPair(xs[0], xs[1], k, c)
