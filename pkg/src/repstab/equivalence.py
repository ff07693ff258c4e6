"""Unitary equivalence of two quantizations through stabilized generator images."""
from dataclasses import dataclass, field

import numpy as np

from .cmx import to_dict
from .errors import DimensionError, FitError, ModeUnsupportedError, ValidationError
from .linalg import dag, operator_norm
from .qtorus import TorusPair, align_qtorus, stabilize_qtorus
from .quantization import (EXACT_FLOOR, SphereFunction, TorusFunction, harmonic_basis,
                           moyal_normal_form, order_fit)
from .su2 import Su2Triple, stabilize_su2

# k^3 times the refined-relation defect must stay below this for the three_halves mode
REFINED_BOUND = 100.0
MODES = ("standard", "three_halves")
# residual scans that never leave this band are exact conjugations up to roundoff
ROUNDOFF_BAND = 1e-10


@dataclass
class EquivalenceResult:
    manifold: str
    mode: str
    ks: list
    function_ids: list
    unitaries: dict
    residuals: dict
    translations: dict = None
    slopes: dict = field(default_factory=dict)
    fitted_order: object = None
    diagnostics: dict = field(default_factory=dict)

    def rows(self):
        return [(k, fid, self.residuals[(k, fid)]) for k in self.ks for fid in self.function_ids]

    def to_dict(self):
        out = {
            "manifold": self.manifold, "mode": self.mode, "ks": list(self.ks),
            "functions": list(self.function_ids),
            "residuals": [{"k": k, "f": fid, "residual": r} for k, fid, r in self.rows()],
            "slopes": dict(self.slopes), "fitted_order": self.fitted_order,
            "unitaries": {str(k): to_dict(U) for k, U in self.unitaries.items()},
        }
        if self.translations is not None:
            out["translations"] = {str(k): list(p) for k, p in self.translations.items()}
        return out


def _phase_fix(U):
    g = U[0, 0]
    return U * (abs(g) / g) if abs(g) > 1e-14 else U


def _check_dims(T, Q, k):
    if T.manifold != Q.manifold:
        raise ValidationError(f"manifolds differ: {T.manifold} vs {Q.manifold}")
    if T.dim(k) != Q.dim(k):
        raise DimensionError(f"dim H_k differ at k={k}: {T.dim(k)} vs {Q.dim(k)}")


def sphere_triple(Q, k):
    """x_j = (ik/2)(k/(k - c)) T_k(u_j)."""
    c = Q.c
    if k <= c:
        raise DimensionError(f"k = {k} must exceed c = {c}")
    s = 0.5j * k * k / (k - c)
    x = [s * Q(k, SphereFunction.u(j)) for j in (1, 2, 3)]
    return Su2Triple(x[0], x[1], x[2], k, c)


def torus_pair(Q, k):
    return TorusPair(Q(k, TorusFunction.u(1)), Q(k, TorusFunction.u(2)), k, Q.c)


def find_equivalence_sphere(T, Q, k):
    """U with U* Q_k(u_j) U close to T_k(u_j), from the two canonical chain bases."""
    _check_dims(T, Q, k)
    if T.manifold != "sphere":
        raise ValidationError("find_equivalence_sphere needs sphere quantizations")
    rT = stabilize_su2(sphere_triple(T, k))
    rQ = stabilize_su2(sphere_triple(Q, k))
    U = _phase_fix(rQ.rep.basis @ dag(rT.rep.basis))
    gens = [operator_norm(dag(U) @ Q(k, SphereFunction.u(j)) @ U - T(k, SphereFunction.u(j)))
            for j in (1, 2, 3)]
    return U, {"generator_residuals": gens, "distances_T": rT.distances,
               "distances_Q": rQ.distances, "R1": (rT.residual_R1, rQ.residual_R1)}


def refined_defect(N, k):
    """k^3 max(|x_j x_j^* - 1|, |x1 x2 - e^{i pi/(k+c)} N(u1 u2)|) for a normalized quantization."""
    u1, u2 = TorusFunction.u(1), TorusFunction.u(2)
    x1, x2 = N(k, u1), N(k, u2)
    n = N.dim(k)
    I = np.eye(n)
    d = max(operator_norm(x1 @ dag(x1) - I), operator_norm(x2 @ dag(x2) - I),
            operator_norm(x1 @ x2 - np.exp(1j * np.pi / (k + N.c)) * N(k, u1 * u2)))
    return k**3 * d


def _wrap(p):
    p = np.asarray(p, float) % 1.0
    return tuple(float(x) for x in np.where(p > 0.5, p - 1.0, p))


def find_equivalence_torus(T, Q, k, order="standard"):
    """(U, p, diag) with U* Q_k(tau_{-p}^* f) U close to T_k(f).

    p is the translation carried by Q relative to T, so Q(f) = T(tau_p^* f)
    recovers p.  In standard mode U also absorbs the lattice part of p and the
    generator residuals are O(1/k) without translating.
    """
    if order not in MODES:
        raise ValidationError(f"order must be one of {MODES}")
    _check_dims(T, Q, k)
    if T.manifold != "torus":
        raise ValidationError("find_equivalence_torus needs torus quantizations")
    diag = {}
    if order == "three_halves":
        NT, NQ = moyal_normal_form(T), moyal_normal_form(Q)
        dT, dQ = refined_defect(NT, k), refined_defect(NQ, k)
        diag["refined_defect"] = (dT, dQ)
        if max(dT, dQ) > REFINED_BOUND:
            raise ModeUnsupportedError(
                f"refined relations fail at k={k}: k^3 defect {max(dT, dQ):.3g} > {REFINED_BOUND}")
        sT, sQ = torus_pair(NT, k), torus_pair(NQ, k)
    else:
        sT, sQ = torus_pair(T, k), torus_pair(Q, k)
    rT, rQ = stabilize_qtorus(sT), stabilize_qtorus(sQ)
    U, p_al, res = align_qtorus(rQ.rep, rT.rep, tol=1e-8, absorb=(order == "standard"))
    p = _wrap(-np.asarray(p_al))
    shift = (0.0, 0.0) if order == "standard" else _wrap(-np.asarray(p))
    gens = [operator_norm(dag(U) @ Q(k, TorusFunction.u(j).translate(shift)) @ U
                          - T(k, TorusFunction.u(j))) for j in (1, 2)]
    diag.update({"generator_residuals": gens, "align_residuals": res,
                 "distances_T": rT.distances, "distances_Q": rQ.distances, "shift": shift})
    return U, p, diag


def sphere_family(nmax=6):
    fs = [SphereFunction.u(j) for j in (1, 2, 3)] + [harmonic_basis(n) for n in range(1, nmax + 1)]
    ids = ["u1", "u2", "u3"] + [f"f{n}" for n in range(1, nmax + 1)]
    return fs, ids


def torus_family(box=4):
    fs, ids = [], []
    for n in range(-box, box + 1):
        for m in range(-box, box + 1):
            if (n, m) != (0, 0):
                fs.append(TorusFunction.monomial(n, m))
                ids.append(f"F({n},{m})")
    return fs, ids


def _slope(ks, res):
    try:
        return order_fit(ks, res)[0]
    except FitError:
        return "exact" if max(res) <= ROUNDOFF_BAND else None


def residual_scan(T, Q, unitaries, fs, ks, fids=None, shifts=None, mode="standard",
                  translations=None):
    """|U_k* Q_k(tau_s^* f) U_k - T_k(f)| per (k, f), per-f slopes and worst slope."""
    fids = list(fids) if fids is not None else [f"f{i}" for i in range(len(fs))]
    residuals = {}
    for k in ks:
        U = unitaries[k]
        s = None if shifts is None else shifts[k]
        for f, fid in zip(fs, fids):
            g = f.translate(s) if s is not None else f
            residuals[(k, fid)] = operator_norm(dag(U) @ Q(k, g) @ U - T(k, f))
    slopes = {fid: _slope(ks, [residuals[(k, fid)] for k in ks]) for fid in fids}
    numeric = [s for s in slopes.values() if isinstance(s, float)]
    if numeric:
        worst = max(numeric)
    elif all(s == "exact" for s in slopes.values()):
        worst = "exact"
    else:
        worst = None
    return EquivalenceResult(T.manifold, mode, list(ks), fids, dict(unitaries), residuals,
                             translations, slopes, worst)


def equivalence_scan(T, Q, ks, fs=None, fids=None, mode="standard"):
    """find_equivalence at every k, then residual_scan on the function family."""
    if fs is None:
        fs, fids = sphere_family() if T.manifold == "sphere" else torus_family()
    Us, trans, shifts, diags = {}, {}, {}, {}
    for k in ks:
        if T.manifold == "sphere":
            if mode != "standard":
                raise ModeUnsupportedError("three_halves mode is defined for the torus only")
            U, d = find_equivalence_sphere(T, Q, k)
        else:
            U, p, d = find_equivalence_torus(T, Q, k, mode)
            trans[k] = p
            shifts[k] = d["shift"]
        Us[k], diags[k] = U, d
    res = residual_scan(T, Q, Us, fs, ks, fids, shifts if shifts else None, mode,
                        trans if T.manifold == "torus" else None)
    res.diagnostics = diags
    return res


def polynomial_bound_fit(ns, residuals, k):
    """(alpha, M) with residual(f_n) <= alpha n^M / k, M from a log-log fit in n."""
    ns = np.asarray(ns, float)
    r = np.asarray(residuals, float) * k
    M = order_fit(ns, r, floor=EXACT_FLOOR * k)[0]
    alpha = float(np.max(r / ns**M))
    return alpha, float(M)


def translation_error(p, q):
    """Distance between two points of the torus R^2 / Z^2 (max over coordinates)."""
    d = (np.asarray(p, float) - np.asarray(q, float)) % 1.0
    return float(np.max(np.minimum(d, 1.0 - d)))
