"""Quantizations of the sphere and torus: function algebras, closed-form models, quadrature oracles."""
import ast
from dataclasses import dataclass
from functools import lru_cache
from math import factorial, gamma, lgamma

import numpy as np

from .errors import (ContractError, DimensionError, FitError, ModeUnsupportedError,
                     ResolutionError, ValidationError)
from .linalg import comm, dag, operator_norm
from .qtorus import clock_shift
from .su2 import build_exact_su2

SUP_STEP = 1e-3
TORUS_GRID = 2048
TERM_CUTOFF = 1e-16
EXACT_FLOOR = 1e-12


def _clean(d):
    return {key: complex(v) for key, v in d.items() if v != 0}


def _freeze(d):
    return tuple(sorted((key, (v.real, v.imag)) for key, v in d.items()))


class _Poly:
    """Sparse coefficient map with the ring operations shared by both manifolds."""
    manifold = None

    def __init__(self, coeffs=None):
        self.coeffs = self._canonical(_clean(dict(coeffs or {})))

    @classmethod
    def _canonical(cls, d):
        return d

    @classmethod
    def _mulkey(cls, a, b):
        raise NotImplementedError

    @classmethod
    def constant(cls, v=1.0):
        return cls({cls._one: v})

    def _coerce(self, other):
        if isinstance(other, _Poly):
            if type(other) is not type(self):
                raise ValidationError(f"mixed manifolds: {self.manifold} vs {other.manifold}")
            return other
        if np.isscalar(other):
            return type(self).constant(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        d = dict(self.coeffs)
        for key, v in other.coeffs.items():
            d[key] = d.get(key, 0) + v
        return type(self)(d)

    __radd__ = __add__

    def __neg__(self):
        return type(self)({key: -v for key, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return type(self)({key: other * v for key, v in self.coeffs.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        d = {}
        for ka, va in self.coeffs.items():
            for kb, vb in other.coeffs.items():
                key = self._mulkey(ka, kb)
                d[key] = d.get(key, 0) + va * vb
        return type(self)(d)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (1.0 / s)

    def __pow__(self, e):
        if int(e) != e or e < 0:
            raise ValidationError("only non-negative integer powers")
        out = type(self).constant(1.0)
        for _ in range(int(e)):
            out = out * self
        return out

    def __eq__(self, other):
        try:
            diff = self - other
        except ValidationError:
            return False
        return all(abs(v) < 1e-12 for v in diff.coeffs.values())

    def __hash__(self):
        return hash((self.manifold, _freeze(self.coeffs)))

    def __repr__(self):
        return f"{type(self).__name__}({self.coeffs})"

    @property
    def key(self):
        return _freeze(self.coeffs)

    def constant_term(self):
        return self.coeffs.get(self._one, 0.0)

    def is_zero(self, tol=1e-14):
        return all(abs(v) <= tol for v in self.coeffs.values())


class SphereFunction(_Poly):
    """Polynomial in u1, u2, u3 restricted to the unit sphere; u3 powers reduced below 2."""
    manifold = "sphere"
    _one = (0, 0, 0)

    @classmethod
    def _canonical(cls, d):
        while any(key[2] >= 2 for key in d):
            out = {}
            for (a, b, c), v in d.items():
                if c >= 2:
                    for key, s in (((a, b, c - 2), 1), ((a + 2, b, c - 2), -1), ((a, b + 2, c - 2), -1)):
                        out[key] = out.get(key, 0) + s * v
                else:
                    out[(a, b, c)] = out.get((a, b, c), 0) + v
            d = out
        return _clean(d)

    @classmethod
    def _mulkey(cls, a, b):
        return (a[0] + b[0], a[1] + b[1], a[2] + b[2])

    @classmethod
    def u(cls, j):
        key = [0, 0, 0]
        key[j - 1] = 1
        return cls({tuple(key): 1.0})

    @property
    def degree(self):
        return max((sum(key) for key in self.coeffs), default=0)

    def conj(self):
        return SphereFunction({key: np.conj(v) for key, v in self.coeffs.items()})

    def is_real(self, tol=1e-14):
        return all(abs(v.imag) <= tol for v in self.coeffs.values())

    def derivative(self, j):
        d = {}
        for key, v in self.coeffs.items():
            if key[j] > 0:
                new = list(key)
                new[j] -= 1
                d[tuple(new)] = d.get(tuple(new), 0) + key[j] * v
        return SphereFunction._raw(d)

    @classmethod
    def _raw(cls, d):
        # ambient polynomial without canonicalization, used by the derivation rule
        obj = cls.__new__(cls)
        obj.coeffs = _clean(d)
        return obj

    def evaluate(self, x1, x2, x3):
        x1, x2, x3 = np.broadcast_arrays(*(np.asarray(x, float) for x in (x1, x2, x3)))
        out = np.zeros(x1.shape, complex)
        cache = {}

        def pw(j, x, e):
            if (j, e) not in cache:
                cache[(j, e)] = x**e
            return cache[(j, e)]

        for (a, b, c), v in self.coeffs.items():
            out += v * pw(0, x1, a) * pw(1, x2, b) * pw(2, x3, c)
        return out

    def evaluate_angles(self, theta, phi):
        st = np.sin(theta)
        return self.evaluate(st * np.cos(phi), st * np.sin(phi), np.cos(theta))


class TorusFunction(_Poly):
    """Finite Fourier series sum c[n, m] u1^n u2^m with u_j = exp(2 pi i q_j)."""
    manifold = "torus"
    _one = (0, 0)

    @classmethod
    def _mulkey(cls, a, b):
        return (a[0] + b[0], a[1] + b[1])

    @classmethod
    def monomial(cls, n, m, v=1.0):
        return cls({(int(n), int(m)): v})

    @classmethod
    def u(cls, j):
        return cls.monomial(1, 0) if j == 1 else cls.monomial(0, 1)

    @property
    def box(self):
        return max((max(abs(n), abs(m)) for n, m in self.coeffs), default=0)

    def conj(self):
        return TorusFunction({(-n, -m): np.conj(v) for (n, m), v in self.coeffs.items()})

    def is_real(self, tol=1e-14):
        return all(abs(v - np.conj(self.coeffs.get((-n, -m), 0))) <= tol
                   for (n, m), v in self.coeffs.items())

    def translate(self, p):
        """tau_p^* f: coefficient (n, m) times exp(2 pi i (n p1 + m p2))."""
        p1, p2 = p
        return TorusFunction({(n, m): v * np.exp(2j * np.pi * (n * p1 + m * p2))
                              for (n, m), v in self.coeffs.items()})

    def derivative(self, j):
        return TorusFunction({key: 2j * np.pi * key[j] * v for key, v in self.coeffs.items()})

    def evaluate(self, q1, q2):
        q1, q2 = np.broadcast_arrays(np.asarray(q1, float), np.asarray(q2, float))
        out = np.zeros(q1.shape, complex)
        for (n, m), v in self.coeffs.items():
            out += v * np.exp(2j * np.pi * (n * q1 + m * q2))
        return out


# ---------------------------------------------------------------- brackets

_SPHERE_PAIRS = {(0, 1): 2, (1, 2): 0, (2, 0): 1}


def poisson_bracket(f, g):
    """{f, g}: sphere from {u_j, u_j+1} = -2 u_j+2, torus from {u1, u2} = 2 pi u1 u2."""
    if type(f) is not type(g) or not isinstance(f, _Poly):
        raise ValidationError("poisson_bracket needs two functions on the same manifold")
    if isinstance(f, SphereFunction):
        out = SphereFunction()
        df = [f.derivative(j) for j in range(3)]
        dg = [g.derivative(j) for j in range(3)]
        for (i, j), l in _SPHERE_PAIRS.items():
            w = -2 * SphereFunction.u(l + 1)
            out = out + (df[i] * dg[j] - df[j] * dg[i]) * w
        return SphereFunction(out.coeffs)
    d = {}
    for (n, m), a in f.coeffs.items():
        for (p, q), b in g.coeffs.items():
            key = (n + p, m + q)
            d[key] = d.get(key, 0) + 2 * np.pi * (n * q - m * p) * a * b
    return TorusFunction(d)


def harmonic_basis(n):
    """f_1 = -(u1 + i u2), f_{j+1} = sqrt((2j+3)/(2j+2)) f_1 f_j."""
    if n < 1:
        raise ValidationError("harmonic index must be >= 1")
    f1 = -(SphereFunction.u(1) + 1j * SphereFunction.u(2))
    f = f1
    for j in range(1, n):
        f = np.sqrt((2 * j + 3) / (2 * j + 2)) * (f1 * f)
    return f


def moyal_weyl_c2(f, g):
    """Second-order symmetric Moyal coefficient; on monomials -(pi^2/2)(n m' - m n')^2."""
    if not (isinstance(f, TorusFunction) and isinstance(g, TorusFunction)):
        raise ValidationError("moyal_weyl_c2 takes torus functions")
    d = {}
    for (n, m), a in f.coeffs.items():
        for (p, q), b in g.coeffs.items():
            key = (n + p, m + q)
            d[key] = d.get(key, 0) - (np.pi**2 / 2) * (n * q - m * p) ** 2 * a * b
    return TorusFunction(d)


# ---------------------------------------------------------------- sup norms and integrals

_sup_cache = {}


def sup_norm(f, step=SUP_STEP):
    """max |f|: step-spaced patches around coarse-grid maxima on the sphere, TORUS_GRID^2 FFT grid on the torus."""
    key = (f.manifold, f.key, step)
    if key in _sup_cache:
        return _sup_cache[key]
    if isinstance(f, TorusFunction):
        N = TORUS_GRID
        if f.box >= N // 2:
            raise ResolutionError(f"Fourier box {f.box} exceeds grid {N}")
        A = np.zeros((N, N), complex)
        for (n, m), v in f.coeffs.items():
            A[n % N, m % N] += v
        val = float(np.abs(np.fft.ifft2(A) * N * N).max())
    else:
        val = _sphere_sup(f, step)
    _sup_cache[key] = val
    return val


def _sphere_sup(f, step, coarse=0.02, candidates=32):
    # coarse lat-long grid, then step-spaced patches around the best coarse points
    th = np.linspace(0, np.pi, int(np.ceil(np.pi / coarse)) + 1)
    ph = np.arange(int(np.ceil(2 * np.pi / coarse))) * (2 * np.pi / np.ceil(2 * np.pi / coarse))
    vals = np.abs(f.evaluate_angles(th[:, None], ph[None, :]))
    best = float(vals.max())
    flat = np.argsort(vals, axis=None)[::-1][:candidates]
    off = np.arange(-coarse, coarse + step / 2, step)
    for idx in flat:
        i, j = np.unravel_index(idx, vals.shape)
        pt = np.clip(th[i] + off, 0, np.pi)
        pp = ph[j] + off
        best = max(best, float(np.abs(f.evaluate_angles(pt[:, None], pp[None, :])).max()))
    return best


def mean_value(f):
    """Integral of f against omega / 2pi (both surfaces have volume 2 pi)."""
    if isinstance(f, TorusFunction):
        return complex(f.coeffs.get((0, 0), 0.0))
    # exact monomial moments on the unit sphere, normalized to total mass 1
    tot = 0.0
    for (a, b, c), v in f.coeffs.items():
        if a % 2 or b % 2 or c % 2:
            continue
        al, be, ga = (a + 1) / 2, (b + 1) / 2, (c + 1) / 2
        mom = 2 * gamma(al) * gamma(be) * gamma(ga) / gamma(al + be + ga)
        tot += v * mom / (4 * np.pi)
    return complex(tot)


def sphere_l2_norm(f, nodes=64):
    """L2 norm with respect to omega / 2 pi, by Gauss-Legendre x uniform quadrature."""
    deg = 2 * f.degree + 2
    n = max(nodes, deg)
    t, w = np.polynomial.legendre.leggauss(n)
    phi = np.arange(2 * n) * (np.pi / n)
    th = np.arccos(t)[:, None]
    vals = np.abs(f.evaluate_angles(th, phi[None, :])) ** 2
    area = float((w[:, None] * vals).sum() * (np.pi / n))
    # omega / 2 pi is the area measure divided by 4 pi
    return np.sqrt(area / (4 * np.pi))


# ---------------------------------------------------------------- the Quantization value

@dataclass(frozen=True)
class Quantization:
    manifold: str
    backend: str
    c: int
    evaluator: object
    name: str = ""
    normal_form: tuple = None

    def dim(self, k):
        return k + self.c

    def __call__(self, k, f):
        want = SphereFunction if self.manifold == "sphere" else TorusFunction
        if np.isscalar(f):
            f = want.constant(f)
        if not isinstance(f, want):
            raise ValidationError(f"{self.name or self.backend} quantizes {self.manifold} functions")
        if self.dim(k) < 1:
            raise DimensionError(f"dim H_k = {self.dim(k)} at k = {k}")
        return self.evaluator(k, f)

    T = __call__


def _with_constant(f, n, body):
    # the constant term is quantized to an exact multiple of the identity
    f0 = f.constant_term()
    rest = f - f0
    M = body(rest) if rest.coeffs else np.zeros((n, n), complex)
    return M + f0 * np.eye(n)


# ---------------------------------------------------------------- sphere: spin model

@lru_cache(maxsize=64)
def _spin(n):
    rep = build_exact_su2(n)
    return tuple(-1j * X for X in rep.X)


@lru_cache(maxsize=4096)
def _spin_word_sum(n, a, b, e):
    # sum of all words with a letters S1, b letters S2, e letters S3
    if a == b == e == 0:
        return np.eye(n, dtype=complex)
    S = _spin(n)
    M = np.zeros((n, n), complex)
    for j, rest in enumerate(((a - 1, b, e), (a, b - 1, e), (a, b, e - 1))):
        if min(rest) >= 0:
            M = M + S[j] @ _spin_word_sum(n, *rest)
    M.setflags(write=False)
    return M


def _spin_monomial(n, a, b, e):
    """Symmetrically ordered S1^a S2^b S3^e; Hermitian since word reversal permutes the sum."""
    d = a + b + e
    return _spin_word_sum(n, a, b, e) * (factorial(a) * factorial(b) * factorial(e) / factorial(d))


def spin_scale(k, c=1):
    """s_k with T_k(u_j) = s_k S_j; it matches the quadrature oracle at degree k + c - 1."""
    return 2.0 / (k + c + 1)


def sphere_spin_quantization(c=1):
    """Spin model: T_k(u_j) = s_k S_j, monomials by symmetric ordering of the S_j."""
    def ev(k, f):
        n = k + c
        s = spin_scale(k, c)

        def body(g):
            M = np.zeros((n, n), complex)
            for (a, b, e), v in g.coeffs.items():
                M = M + v * s ** (a + b + e) * _spin_monomial(n, a, b, e)
            return M

        return _with_constant(f, n, body)
    return Quantization("sphere", "closed-form", int(c), ev, f"sphere-spin(c={c})")


# ---------------------------------------------------------------- sphere: quadrature oracle

@lru_cache(maxsize=16)
def _sphere_radial(d, nt):
    t, w = np.polynomial.legendre.leggauss(nt)
    j = np.arange(d + 1)[:, None]
    # section j: cos^j(theta/2) sin^(d-j)(theta/2) e^{i (d-j) phi}; this orientation gives {u1,u2} = -2 u3.
    # sqrt(binomial) weights only condition the Gram matrix; it is still computed by quadrature.
    logc = 0.5 * (lgamma(d + 1) - np.array([lgamma(i + 1) + lgamma(d - i + 1) for i in range(d + 1)]))
    R = np.exp(logc[:, None] + j * np.log((1 + t) / 2)[None, :] / 2
               + (d - j) * np.log((1 - t) / 2)[None, :] / 2)
    R.setflags(write=False)
    return t, w, R


def _azimuthal_coeffs(a, b, nphi):
    # cos^a sin^b (phi) = sum_q h[q] e^{i q phi}, exact on a uniform grid of nphi > 2(a+b) nodes
    phi = np.arange(nphi) * (2 * np.pi / nphi)
    return np.fft.fft(np.cos(phi) ** a * np.sin(phi) ** b) / nphi


def _banded_quadrature(R, wt, G):
    # M[i, i+q] = 2 pi sum_t w R_i R_{i+q} G_q(t) for every offset q in G
    n = R.shape[0]
    M = np.zeros((n, n), complex)
    for q, g in G.items():
        if abs(q) >= n:
            continue
        if q >= 0:
            vals = np.einsum("it,it->i", R[:n - q] * (wt * g), R[q:])
            M[np.arange(n - q), np.arange(q, n)] = 2 * np.pi * vals
        else:
            vals = np.einsum("it,it->i", R[-q:] * (wt * g), R[:n + q])
            M[np.arange(-q, n), np.arange(n + q)] = 2 * np.pi * vals
    return M


def sphere_toeplitz_quadrature(k, f, grid=None, c=1):
    """<s_i, f s_j> over holomorphic sections of degree k + c - 1, orthonormalized by the Gram matrix.

    Gauss-Legendre in cos(theta) with `grid` nodes (at least 2k+8), FFT-exact in phi.
    """
    d = k + c - 1
    if d < 0:
        raise DimensionError(f"degree {d} < 0")
    need = 2 * k + 8
    nt = need + f.degree if grid is None else int(grid)
    if nt < need:
        raise ResolutionError(f"{nt} polar nodes < 2k+8 = {need}")
    t, w, R = _sphere_radial(d, nt)
    n = d + 1
    nphi = 2 * f.degree + 2
    st = np.sqrt(1 - t * t)
    Gram = _banded_quadrature(R, w, {0: np.ones_like(t)})
    g = np.real(np.diag(Gram))
    scale = 1 / np.sqrt(g)

    def body(h):
        G = {}
        for (a, b, e), v in h.coeffs.items():
            hq = _azimuthal_coeffs(a, b, nphi)
            radial = st ** (a + b) * t ** e
            for q in range(-(a + b), a + b + 1):
                if abs(hq[q]) > 1e-15:
                    # conj(e_i) f e_j survives the phi integral when q = j - i
                    G[q] = G.get(q, 0) + v * hq[q] * radial
        M = _banded_quadrature(R, w, G)
        return scale[:, None] * M * scale[None, :]
    return _with_constant(f, n, body)


def sphere_quadrature_quantization(c=1, grid=None):
    def ev(k, f):
        return sphere_toeplitz_quadrature(k, f, grid=grid, c=c)
    return Quantization("sphere", "quadrature", int(c), ev, f"sphere-quadrature(c={c})")


# ---------------------------------------------------------------- torus: theta model

def theta_gaussian(k, n, m):
    """g_k(n, m) = exp(-pi (n^2 + m^2) / 2k)."""
    return np.exp(-np.pi * (n * n + m * m) / (2 * k))


def theta_phase(k, n, m):
    return np.exp(-1j * np.pi * n * m / k)


def _clock_shift_word(k, n, m):
    V1, V2 = clock_shift(k)
    diag = np.diag(V1) ** n
    P = np.roll(np.eye(k, dtype=complex), m, axis=0)
    return diag[:, None] * P


def torus_theta_quantization():
    """T_k(u1^n u2^m) = g_k(n, m) exp(-i pi n m / k) V1^n V2^m on C^k."""
    def ev(k, f):
        def body(g):
            M = np.zeros((k, k), complex)
            for (n, m), v in g.coeffs.items():
                M = M + v * theta_gaussian(k, n, m) * theta_phase(k, n, m) * _clock_shift_word(k, n, m)
            return M
        return _with_constant(f, k, body)
    return Quantization("torus", "closed-form", 0, ev, "torus-theta",
                        normal_form=(MOYAL_D1, MOYAL_D2))


# ---------------------------------------------------------------- torus: quadrature oracle

def _theta_element_table(k, n, m):
    # entries <psi_a, u1^n u2^m psi_b> for all b; psi_j = sum_l e^{2 pi i (j+kl) q2} G(q1 - (j+kl)/k)
    M = 64 + 16 * int(np.ceil(np.sqrt(k))) + 2 * abs(n)
    q = np.arange(M) / M
    b = np.arange(k)
    a = (b + m) % k
    r = (b + m - a) // k
    L = int(np.ceil(np.sqrt(-np.log(TERM_CUTOFF) / (np.pi * k)) + abs(m) / k)) + 2
    norm = np.sqrt(2 * k)
    acc = np.zeros((k, M), complex)
    for l in range(-L, L + 1):
        xa = (a + k * (r + l)) / k
        xb = (b + k * l) / k
        term = norm * np.exp(-np.pi * k * ((q[None, :] - xa[:, None]) ** 2
                                           + (q[None, :] - xb[:, None]) ** 2))
        term[term < TERM_CUTOFF] = 0.0
        acc += term
    vals = (acc * np.exp(2j * np.pi * n * q)[None, :]).mean(axis=1)
    return a, b, vals


def torus_toeplitz_quadrature(k, f):
    """Multiply-then-project in the level-k theta basis, q1 integrals by periodic trapezoid."""
    if k < 1:
        raise DimensionError("k must be >= 1")

    def body(g):
        M = np.zeros((k, k), complex)
        for (n, m), v in g.coeffs.items():
            a, b, vals = _theta_element_table(k, n, m)
            M[a, b] += v * vals
        return M
    return _with_constant(f, k, body)


def torus_quadrature_quantization():
    return Quantization("torus", "quadrature", 0, torus_toeplitz_quadrature, "torus-quadrature",
                        normal_form=(MOYAL_D1, MOYAL_D2))


# ---------------------------------------------------------------- change of variable

class FourierMultiplier:
    """Translation-invariant operator on torus functions: u1^n u2^m -> symbol(n, m) u1^n u2^m."""

    def __init__(self, symbol, name=""):
        self.symbol = symbol
        self.name = name

    def __call__(self, f):
        return TorusFunction({key: self.symbol(*key) * v for key, v in f.coeffs.items()})

    def __add__(self, other):
        return FourierMultiplier(lambda n, m: self.symbol(n, m) + other.symbol(n, m),
                                 f"{self.name}+{other.name}")

    def __mul__(self, s):
        return FourierMultiplier(lambda n, m: s * self.symbol(n, m), f"{s}*{self.name}")

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def _lap(n, m):
    return -4 * np.pi**2 * (n * n + m * m)


LAPLACIAN = FourierMultiplier(_lap, "laplacian")
BILAPLACIAN = FourierMultiplier(lambda n, m: _lap(n, m) ** 2, "bilaplacian")
# The theta model is Weyl quantization after exp(laplacian / 8 pi k); these undo it to second order,
# so that the corrected generators obey the Weyl relations up to O(1/k^3).
INDEX_SQUARED = FourierMultiplier(lambda n, m: float(n * n + m * m), "N")
INDEX_SQUARED_2 = FourierMultiplier(lambda n, m: float(n * n + m * m) ** 2, "N^2")
MOYAL_D1 = FourierMultiplier(lambda n, m: -_lap(n, m) / (8 * np.pi), "moyal-d1")
MOYAL_D2 = FourierMultiplier(lambda n, m: _lap(n, m) ** 2 / (128 * np.pi**2), "moyal-d2")


def change_of_variable(Q, D, order=1):
    """T^D_k(f) = T_k(f + k^-order D f); D must annihilate constants."""
    if order not in (1, 2):
        raise ContractError("order must be 1 or 2")
    one = (SphereFunction if Q.manifold == "sphere" else TorusFunction).constant(1.0)
    if not D(one).is_zero(1e-14):
        raise ContractError("change of variable must satisfy D(1) = 0")

    def ev(k, f):
        return Q(k, f + D(f) * (float(k) ** -order))
    return Quantization(Q.manifold, Q.backend, Q.c, ev, f"{Q.name}^D{order}", None)


def moyal_normal_form(Q):
    """Apply the backend's shipped first and second order normalizers."""
    if Q.normal_form is None:
        raise ModeUnsupportedError(f"{Q.name} has no second-order normal form")
    D1, D2 = Q.normal_form
    return change_of_variable(change_of_variable(Q, D1, 1), D2, 2)


# ---------------------------------------------------------------- drifted and conjugated families

def _random_hermitian(n, rng, scale):
    G = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    H = (G + dag(G)) / 2
    return H * (scale / operator_norm(H))


@lru_cache(maxsize=64)
def drift_unitary(n, k, eta=1.0, seed=0):
    """exp(i A / k^2) with A random Hermitian of norm eta k, so the drift is eta / k."""
    rng = np.random.default_rng([int(seed), int(k), 7])
    A = _random_hermitian(n, rng, eta * k)
    w, V = np.linalg.eigh(A)
    U = (V * np.exp(1j * w / k**2)) @ dag(V)
    U.setflags(write=False)
    return U


def drifted_quantization(Q, p=(0.0, 0.0), a=0.0, b=0.0, eta=1.0, seed=0):
    """Q'_k(f) = V_k Q_k(tau_p^* (f + a N f / k + b N^2 f / k^2)) V_k^*, V_k = drift_unitary.

    N multiplies u1^n u2^m by n^2 + m^2.  With a = 0 the first-order data of Q
    is unchanged, and the second-order normal form is shifted by -b N^2.
    """
    if Q.manifold != "torus":
        raise ValidationError("drifted_quantization is defined for the torus")
    p = (float(p[0]), float(p[1]))
    normal = None
    if Q.normal_form is not None and a == 0:
        D1, D2 = Q.normal_form
        normal = (D1, D2 + (-b) * INDEX_SQUARED_2)

    def ev(k, f):
        g = f + INDEX_SQUARED(f) * (a / k) + INDEX_SQUARED_2(f) * (b / k**2)
        M = Q(k, g.translate(p))
        V = drift_unitary(Q.dim(k), k, eta, seed)
        return V @ M @ dag(V)
    name = f"drift({Q.name}, p={p}, a={a}, b={b}, eta={eta})"
    return Quantization(Q.manifold, Q.backend, Q.c, ev, name, normal)


def conjugated_quantization(Q, V_of_k, name=None):
    def ev(k, f):
        V = V_of_k(k)
        return V @ Q(k, f) @ dag(V)
    return Quantization(Q.manifold, Q.backend, Q.c, ev, name or f"conj({Q.name})", Q.normal_form)


# ---------------------------------------------------------------- fits, axioms, traces

def order_fit(ks, residuals, floor=EXACT_FLOOR):
    """(slope, intercept, r2) of log residual against log k; residuals below floor are dropped."""
    ks = np.asarray(ks, float)
    r = np.asarray(residuals, float)
    keep = r > floor
    if keep.sum() < 3:
        raise FitError(f"need >= 3 residuals above {floor}, got {int(keep.sum())}")
    x, y = np.log(ks[keep]), np.log(r[keep])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - ((y - A @ [slope, icpt]) ** 2).sum() / ss if ss > 0 else 1.0
    return float(slope), float(icpt), float(r2)


def _fit_or_exact(ks, res):
    try:
        return order_fit(ks, res)[0]
    except FitError:
        return "exact" if max(res) <= EXACT_FLOOR else None


def axiom_residuals(Q, k, f, g, sup_step=SUP_STEP):
    """(e1(f), e2(f, g), e3(f, g)) at level k."""
    Tf, Tg = Q(k, f), Q(k, g)
    e1 = abs(operator_norm(Tf) - sup_norm(f, sup_step))
    e2 = operator_norm(comm(Tf, Tg) - (1j / k) * Q(k, poisson_bracket(f, g)))
    e3 = operator_norm(Tf @ Tg - Q(k, f * g))
    return e1, e2, e3


def verify_axioms(Q, fs, ks, pairs=None, sup_step=SUP_STEP):
    """Residual rows (k, f, g, e1, e2, e3) and per-pair log-log slopes ("exact" at the floor)."""
    if len(ks) < 3:
        raise FitError("verify_axioms needs at least 3 values of k")
    fs = list(fs)
    if pairs is None:
        pairs = [(i, j) for i in range(len(fs)) for j in range(i, len(fs))]
    rows = []
    slopes = {}
    for i, j in pairs:
        res = np.array([axiom_residuals(Q, k, fs[i], fs[j], sup_step) for k in ks])
        for k, (e1, e2, e3) in zip(ks, res):
            rows.append((k, i, j, e1, e2, e3))
        slopes[(i, j)] = tuple(_fit_or_exact(ks, res[:, col]) for col in range(3))
    return rows, slopes


def trace_profile(Q, fs, ks):
    """tr T_k(f), k <f>, R_k(f) = tr/(k <f>), local R = k (R_k - 1) and a least-squares R per f."""
    rows, fits = [], []
    ks = list(ks)
    for idx, f in enumerate(fs):
        mean = mean_value(f)
        traces = [complex(np.trace(Q(k, f))) for k in ks]
        if abs(mean) < 1e-14:
            for k, tr in zip(ks, traces):
                rows.append((k, idx, tr, 0.0, None, None))
            fits.append({"f": idx, "indeterminate": True, "R": None, "local": None})
            continue
        Rk = [tr / (k * mean) for k, tr in zip(ks, traces)]
        local = [k * (r - 1) for k, r in zip(ks, Rk)]
        for k, tr, r, lo in zip(ks, traces, Rk, local):
            rows.append((k, idx, tr, k * mean, r, lo))
        inv = 1.0 / np.asarray(ks, float)
        if len(ks) >= 2:
            A = np.column_stack([inv, inv**2])
            coef, *_ = np.linalg.lstsq(A, np.real(np.asarray(Rk)) - 1, rcond=None)
            R = float(coef[0])
        else:
            R = float(np.real(local[0]))
        fits.append({"f": idx, "indeterminate": False, "R": R,
                     "local": [float(np.real(x)) for x in local]})
    dims = [Q.dim(k) - k for k in ks]
    return rows, fits, dims


# ---------------------------------------------------------------- function literals

_SAFE_FUNCS = ("F", "cos", "sin", "Y")


def parse_function(text, manifold):
    """Parse 'u1^2*u3 - 0.5' (sphere) or 'F(1,0)+F(-1,0)', 'cos(q1)' (torus)."""
    tree = ast.parse(text.replace("^", "**"), mode="eval")
    cls = SphereFunction if manifold == "sphere" else TorusFunction

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return node.value
        if isinstance(node, ast.Name):
            if node.id in ("u1", "u2") or (node.id == "u3" and cls is SphereFunction):
                return cls.u(int(node.id[1]))
            if node.id in ("pi",):
                return np.pi
            if node.id == "j" or node.id == "I":
                return 1j
            raise ValidationError(f"unknown name {node.id!r} for {manifold}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            l, r = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return l + r
            if isinstance(node.op, ast.Sub):
                return l - r
            if isinstance(node.op, ast.Mult):
                return l * r
            if isinstance(node.op, ast.Div) and np.isscalar(r):
                return l / r
            if isinstance(node.op, ast.Pow) and np.isscalar(r):
                if isinstance(l, TorusFunction) and r < 0 and len(l.coeffs) == 1:
                    (key, v), = l.coeffs.items()
                    return TorusFunction({(key[0] * int(r), key[1] * int(r)): v ** int(r)})
                return l ** r
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _SAFE_FUNCS:
            name = node.func.id
            if name in ("cos", "sin") and cls is TorusFunction:
                return _trig(name, node.args[0])
            args = [ev(a) for a in node.args]
            if name == "Y" and cls is SphereFunction:
                return harmonic_basis(int(args[0]))
            if cls is TorusFunction and name == "F":
                return TorusFunction.monomial(int(args[0]), int(args[1]))
        raise ValidationError(f"unsupported expression in {text!r}")

    out = ev(tree)
    return out if isinstance(out, _Poly) else cls.constant(out)


def _trig(name, arg):
    # cos(a q1 + b q2) means cos(2 pi (a q1 + b q2)) with integer a, b
    src = ast.unparse(arg)
    coef = {"q1": 0, "q2": 0}
    for term in src.replace(" ", "").replace("-", "+-").split("+"):
        if not term:
            continue
        sign = -1 if term.startswith("-") else 1
        term = term.lstrip("-")
        if "*" in term:
            num, var = term.split("*")
        else:
            num, var = "1", term
        if var not in coef or not num.isdigit():
            raise ValidationError(f"trig argument must be an integer combination of q1, q2: {src}")
        coef[var] += sign * int(num)
    n, m = coef["q1"], coef["q2"]
    if name == "cos":
        return TorusFunction({(n, m): 0.5, (-n, -m): 0.5})
    return TorusFunction({(n, m): -0.5j, (-n, -m): 0.5j})


def random_trig_polynomial(rng, box=3, terms=6):
    """Real trig polynomial with `terms` random Fourier pairs inside the box."""
    d = {}
    for _ in range(terms):
        n, m = (int(x) for x in rng.integers(-box, box + 1, size=2))
        v = complex(rng.normal(), rng.normal())
        d[(n, m)] = d.get((n, m), 0) + v
        d[(-n, -m)] = d.get((-n, -m), 0) + np.conj(v)
    d[(0, 0)] = d.get((0, 0), 0).real if (0, 0) in d else 0.0
    return TorusFunction(d)

