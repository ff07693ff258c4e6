"""Exact su(2) irreps, defect measurement and recovery of an irrep from an almost-representation."""
from dataclasses import dataclass, field

import numpy as np

from .errors import ChainBreakError, ClusterEmptyError, DimensionError, InconsistencyError
from .linalg import dag, comm, hermitian_eig, operator_norm, quasimode


@dataclass(frozen=True)
class Su2Irrep:
    n: int
    X1: np.ndarray
    X2: np.ndarray
    X3: np.ndarray
    basis: np.ndarray

    @property
    def X(self):
        return (self.X1, self.X2, self.X3)


@dataclass(frozen=True)
class Su2Triple:
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    k: int
    c: float = 0.0

    @property
    def x(self):
        return (self.x1, self.x2, self.x3)

    @property
    def dim(self):
        return self.x1.shape[0]

    @classmethod
    def from_irrep(cls, rep, k=None, c=0.0):
        return cls(rep.X1, rep.X2, rep.X3, rep.n if k is None else k, c)


@dataclass
class Su2StabilizationReport:
    inferred_dim_ok: bool
    rep: Su2Irrep
    distances: tuple
    chain_eigenvalues: np.ndarray
    residual_R1: float
    residual_R2: float
    norm_window: tuple
    extra: dict = field(default_factory=dict)


def _chain_ops(n):
    """X3, Y+, Y- in the chain basis, columns ordered e_1..e_n."""
    X3 = np.zeros((n, n), complex)
    Yp = np.zeros((n, n), complex)
    Ym = np.zeros((n, n), complex)
    cas = (n * n - 1) / 4
    for m in range(n):
        j = n - 1 - m                       # column of e_{n-m}
        lam = (n - 1) / 2 - m
        X3[j, j] = 1j * lam
        if j - 1 >= 0:
            Ym[j - 1, j] = np.sqrt(max(cas - lam * lam + lam, 0.0))
        if j + 1 < n:
            Yp[j + 1, j] = -np.sqrt(max(cas - lam * lam - lam, 0.0))
    return X3, Yp, Ym


def build_exact_su2(n):
    """Dimension-n irrep in its canonical chain basis."""
    if n < 1:
        raise DimensionError("su(2) irrep needs n >= 1")
    X3, Yp, Ym = _chain_ops(n)
    X1 = 1j * (Ym - Yp) / 2
    X2 = (Ym + Yp) / 2
    return Su2Irrep(n, X1, X2, X3, np.eye(n, dtype=complex))


def casimir(X1, X2, X3):
    return X1 @ X1 + X2 @ X2 + X3 @ X3


def su2_defects(t):
    """(r1, r2, dim) of the axiom checker."""
    n = t.dim
    k, c = t.k, t.c
    r1 = operator_norm(casimir(*t.x) + (k * k / 4 + k * c / 2) * np.eye(n))
    x = t.x
    r2 = k * max(operator_norm(comm(x[j], x[(j + 1) % 3]) - x[(j + 2) % 3]) for j in range(3))
    return r1, r2, n


def ladder(t):
    """(y_plus, y_minus) with y_pm = +-i x1 + x2."""
    return 1j * t.x1 + t.x2, -1j * t.x1 + t.x2


def su2_distance(t, rep):
    if t.dim != rep.n:
        raise DimensionError(f"triple dim {t.dim} vs irrep dim {rep.n}")
    return max(operator_norm(a - b) for a, b in zip(t.x, rep.X))


def _fix_phase(v):
    j = int(np.argmax(np.abs(v)))
    return v * (np.abs(v[j]) / v[j])


def _near_half_integer(c, tol=0.05):
    return abs((c % 1.0) - 0.5) < tol


def stabilize_su2(t, delta=0.5):
    """Recover an exact irrep close to the triple t by descending the y_- chain."""
    n, k, c = t.dim, t.k, t.c
    if n > 2 * (k + c) - 1:
        raise InconsistencyError(f"dim {n} violates dim < 2(k+c) = {2 * (k + c)}")
    r1, r2, _ = su2_defects(t)
    if not (np.isfinite(r1) and np.isfinite(r2)):
        raise InconsistencyError("defects are not finite")
    H = -1j * t.x3
    H = (H + dag(H)) / 2
    dec = hermitian_eig(H)
    evals = dec.eigenvalues
    _, ym = ladder(t)
    target = int(round(k + c))
    exact = n == target and not _near_half_integer(c)

    top = np.abs(evals - evals[-1]) < delta
    if top.sum() > 1:
        raise InconsistencyError(f"top eigenvalue cluster has multiplicity {int(top.sum())}",
                                 evals[:-1].tolist())
    claimed = np.zeros(n, bool)
    claimed[-1] = True
    vecs = [_fix_phase(dec.basis[:, -1])]
    lams = [float(evals[-1])]
    for step in range(1, n):
        v = ym @ vecs[-1]
        try:
            if np.linalg.norm(v) == 0:
                raise ClusterEmptyError("ladder image vanished", np.inf)
            q = quasimode(H, v, lams[-1] - 1, delta, decomposition=dec)
        except ClusterEmptyError as err:
            if exact:
                raise ChainBreakError(f"chain broke at step {step}: {err}", step) from err
            break
        mask = np.abs(evals - (lams[-1] - 1)) < delta
        if q.cluster_dim > 1:
            raise InconsistencyError(f"eigenvalue cluster of multiplicity {q.cluster_dim} at step {step}",
                                     evals[~(claimed | mask)].tolist())
        if (claimed & mask).any():
            if exact:
                raise InconsistencyError(f"overlapping cluster at step {step}",
                                         evals[~claimed].tolist())
            break
        claimed |= mask
        vecs.append(q.unit_vector)
        lams.append(float(q.lam.real))
    orphans = evals[~claimed].tolist()
    if not exact or orphans:
        if _near_half_integer(c):
            why = f"c = {c} is within 0.05 of a half-integer"
        elif n != target:
            why = f"dim {n} != round(k+c) = {target}"
        else:
            why = "eigenvalues left unclaimed by the chain"
        raise InconsistencyError(why, orphans)

    # columns e_1..e_n, with e_n the top of the chain
    E = np.column_stack(vecs[::-1])
    can = build_exact_su2(n)
    X = [E @ M @ dag(E) for M in can.X]
    rep = Su2Irrep(n, X[0], X[1], X[2], E)
    dists = tuple(operator_norm(a - b) for a, b in zip(t.x, rep.X))
    norms = [operator_norm(a) for a in t.x]
    return Su2StabilizationReport(
        inferred_dim_ok=True, rep=rep, distances=dists,
        chain_eigenvalues=np.array(lams), residual_R1=r1, residual_R2=r2,
        norm_window=(min(norms), max(norms)))


def random_skew(n, rng, scale=1.0):
    """Skew-Hermitian matrix of operator norm `scale`."""
    G = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    S = (G - dag(G)) / 2
    return S * (scale / operator_norm(S))


def perturbed_triple(n, k, eps, rng, c=0.0):
    """Exact dimension-n irrep plus independent skew noise of norm eps on each generator."""
    rep = build_exact_su2(n)
    x = [X + random_skew(n, rng, eps) for X in rep.X]
    return Su2Triple(x[0], x[1], x[2], k, c)


def conjugate_triple(t, V):
    x = [dag(V) @ a @ V for a in t.x]
    return Su2Triple(x[0], x[1], x[2], t.k, t.c)
