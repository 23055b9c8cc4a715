"""Algebraic and differential operators on polynomial tensor fields.

All operators are realized as dense matrices between monomial coefficient
spaces (see poly.py), so compositions, identity checks and DOF functionals
reduce to matrix algebra.

Value component conventions (Cartesian unless stated otherwise):
  scalar: 1     vec3: 3        mat3: 9 row-major (i,j) -> 3i+j
  mat3 sym/traceless subspaces are stored in fixed Frobenius-orthonormal
  bases (S: 6, T: 8, S cap T: 5).
On a face with frame (n, t1, t2), 2D values use frame coordinates:
  vec2: (v.t1, v.t2)   mat2: 4 row-major   mat2 sym-traceless: 2.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch
from .poly import (BaryPoly, PolySpace, Simplex, deriv_matrix, nmono,
                   restrict_matrix)

# ---------------------------------------------------------------------------
# constant tensor algebra
# ---------------------------------------------------------------------------

EPS = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    EPS[_i, _j, _k] = 1.0
    EPS[_i, _k, _j] = -1.0

_S2 = np.sqrt(2.0)


def _sym_pair(i, j, n=3):
    M = np.zeros((n, n))
    M[i, j] = M[j, i] = 1.0 / _S2
    return M


# symmetric-traceless basis (fixed, orthonormal under Frobenius inner product)
ST_BASIS = np.stack([
    np.diag([1.0, -1.0, 0.0]) / _S2,
    np.diag([1.0, 1.0, -2.0]) / np.sqrt(6.0),
    _sym_pair(0, 1),
    _sym_pair(0, 2),
    _sym_pair(1, 2),
])

S_BASIS = np.stack([
    np.diag([1.0, 0.0, 0.0]),
    np.diag([0.0, 1.0, 0.0]),
    np.diag([0.0, 0.0, 1.0]),
    _sym_pair(0, 1),
    _sym_pair(0, 2),
    _sym_pair(1, 2),
])

def _mskw(v):
    v = np.asarray(v, dtype=float)
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


T_BASIS = np.concatenate([
    ST_BASIS,
    np.stack([_mskw([1, 0, 0]) / _S2, _mskw([0, 1, 0]) / _S2,
              _mskw([0, 0, 1]) / _S2]),
])

ST2_BASIS = np.stack([
    np.diag([1.0, -1.0]) / _S2,
    np.array([[0.0, 1.0], [1.0, 0.0]]) / _S2,
])


def unpack_mat(basis: np.ndarray) -> np.ndarray:
    """(ncomp_full, nbasis) matrix sending basis coords to flattened entries."""
    return basis.reshape(basis.shape[0], -1).T


def pack_mat(basis: np.ndarray) -> np.ndarray:
    """Frobenius projection onto an orthonormal matrix basis."""
    return basis.reshape(basis.shape[0], -1)


U_ST, P_ST = unpack_mat(ST_BASIS), pack_mat(ST_BASIS)        # 9x5, 5x9
U_S, P_S = unpack_mat(S_BASIS), pack_mat(S_BASIS)            # 9x6, 6x9
U_T, P_T = unpack_mat(T_BASIS), pack_mat(T_BASIS)            # 9x8, 8x9
U_ST2, P_ST2 = unpack_mat(ST2_BASIS), pack_mat(ST2_BASIS)    # 4x2, 2x4

SYM9 = np.zeros((9, 9))
DEV9 = np.zeros((9, 9))
TRANS9 = np.zeros((9, 9))
TRACE9 = np.zeros((1, 9))
for _i in range(3):
    for _j in range(3):
        SYM9[3 * _i + _j, 3 * _i + _j] += 0.5
        SYM9[3 * _i + _j, 3 * _j + _i] += 0.5
        TRANS9[3 * _i + _j, 3 * _j + _i] = 1.0
        DEV9[3 * _i + _j, 3 * _i + _j] += 1.0
        if _i == _j:
            TRACE9[0, 3 * _i + _j] = 1.0
            for _a in range(3):
                DEV9[3 * _i + _j, 3 * _a + _a] -= 1.0 / 3.0

MSKW = np.zeros((9, 3))       # vec3 -> mat3
VSKW = np.zeros((3, 9))       # mat3 -> vec3, vskw = mskw^-1 skw
for _i in range(3):
    for _j in range(3):
        for _k in range(3):
            MSKW[3 * _i + _j, _k] = -EPS[_i, _j, _k]
            VSKW[_k, 3 * _i + _j] = -0.5 * EPS[_i, _j, _k]


def left_mult(C) -> np.ndarray:
    """mat3 field -> mat3 field, A -> C A."""
    C = np.asarray(C, dtype=float)
    M = np.zeros((9, 9))
    for i in range(3):
        for j in range(3):
            for a in range(3):
                M[3 * i + j, 3 * a + j] = C[i, a]
    return M


def right_mult(C) -> np.ndarray:
    """mat3 field -> mat3 field, A -> A C."""
    C = np.asarray(C, dtype=float)
    M = np.zeros((9, 9))
    for i in range(3):
        for j in range(3):
            for a in range(3):
                M[3 * i + j, 3 * i + a] = C[a, j]
    return M


def mat_vec_right(v) -> np.ndarray:
    """mat3 field -> vec3 field, A -> A v."""
    v = np.asarray(v, dtype=float)
    M = np.zeros((3, 9))
    for i in range(3):
        for j in range(3):
            M[i, 3 * i + j] = v[j]
    return M


def vec_bilinear(a, b) -> np.ndarray:
    """mat3 field -> scalar field, A -> a^T A b."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.outer(a, b).reshape(1, 9)


def cross_left(n) -> np.ndarray:
    """A -> n x A (row-wise): n x A = -A mskw(n)."""
    return right_mult(-_mskw(n))


def cross_right(n) -> np.ndarray:
    """A -> A x n (column-wise): A x n = -mskw(n) A."""
    return left_mult(-_mskw(n))


def comp_op(C: np.ndarray, n: int) -> np.ndarray:
    """Lift a constant component map to a polynomial field of nmono = n."""
    return np.kron(np.asarray(C, dtype=float), np.eye(n))


# ---------------------------------------------------------------------------
# differential operators bound to a 3D simplex
# ---------------------------------------------------------------------------

class Ops3:
    """Differential-operator matrices for fields on one tetrahedron."""

    def __init__(self, tet: Simplex):
        if tet.sdim != 3:
            raise ShapeMismatch("Ops3 needs a tetrahedron")
        self.K = tet
        self._d = {}

    def d(self, degree: int, axis: int) -> np.ndarray:
        key = (degree, axis)
        if key not in self._d:
            e = np.zeros(3)
            e[axis] = 1.0
            self._d[key] = deriv_matrix(self.K, degree, e)
        return self._d[key]

    def ddir(self, degree: int, direction) -> np.ndarray:
        direction = np.asarray(direction, dtype=float)
        return sum(direction[a] * self.d(degree, a) for a in range(3))

    # scalar -> vec3
    def grad_s(self, p: int) -> np.ndarray:
        return np.vstack([self.d(p, a) for a in range(3)])

    # scalar -> mat3
    def hess_s(self, p: int) -> np.ndarray:
        n2 = nmono(3, max(p - 2, 0))
        out = np.zeros((9 * n2, nmono(3, p)))
        for i in range(3):
            for j in range(3):
                out[(3 * i + j) * n2:(3 * i + j + 1) * n2] = \
                    self.d(max(p - 1, 0), i) @ self.d(p, j)
        return out

    # vec3 -> mat3, (grad v)_(ij) = d_j v_i
    def grad_v(self, p: int) -> np.ndarray:
        n1, n0 = nmono(3, max(p - 1, 0)), nmono(3, p)
        out = np.zeros((9 * n1, 3 * n0))
        for i in range(3):
            for j in range(3):
                out[(3 * i + j) * n1:(3 * i + j + 1) * n1,
                    i * n0:(i + 1) * n0] = self.d(p, j)
        return out

    # vec3 -> vec3
    def curl_v(self, p: int) -> np.ndarray:
        n1, n0 = nmono(3, max(p - 1, 0)), nmono(3, p)
        out = np.zeros((3 * n1, 3 * n0))
        for j in range(3):
            for a in range(3):
                for b in range(3):
                    if EPS[j, a, b]:
                        out[j * n1:(j + 1) * n1, b * n0:(b + 1) * n0] += \
                            EPS[j, a, b] * self.d(p, a)
        return out

    # vec3 -> scalar
    def div_v(self, p: int) -> np.ndarray:
        n1, n0 = nmono(3, max(p - 1, 0)), nmono(3, p)
        out = np.zeros((n1, 3 * n0))
        for a in range(3):
            out[:, a * n0:(a + 1) * n0] = self.d(p, a)
        return out

    # mat3 -> mat3 (row-wise curl)
    def curl_m(self, p: int) -> np.ndarray:
        n1, n0 = nmono(3, max(p - 1, 0)), nmono(3, p)
        out = np.zeros((9 * n1, 9 * n0))
        for i in range(3):
            for j in range(3):
                for a in range(3):
                    for b in range(3):
                        if EPS[j, a, b]:
                            out[(3 * i + j) * n1:(3 * i + j + 1) * n1,
                                (3 * i + b) * n0:(3 * i + b + 1) * n0] += \
                                EPS[j, a, b] * self.d(p, a)
        return out

    # mat3 -> vec3 (row-wise div)
    def div_m(self, p: int) -> np.ndarray:
        n1, n0 = nmono(3, max(p - 1, 0)), nmono(3, p)
        out = np.zeros((3 * n1, 9 * n0))
        for i in range(3):
            for j in range(3):
                out[i * n1:(i + 1) * n1, (3 * i + j) * n0:(3 * i + j + 1) * n0] \
                    = self.d(p, j)
        return out

    # -- composites used by the complex -----------------------------------

    def dev_hess(self, p: int) -> np.ndarray:
        """scalar P_p -> S cap T coords at degree p-2."""
        n2 = nmono(3, max(p - 2, 0))
        return comp_op(P_ST @ DEV9, n2) @ self.hess_s(p)

    def sym_curl_st(self, p: int) -> np.ndarray:
        """S cap T -> S cap T, degree p -> p-1."""
        n1, n0 = nmono(3, max(p - 1, 0)), nmono(3, p)
        return (comp_op(P_ST @ SYM9, n1) @ self.curl_m(p) @ comp_op(U_ST, n0))

    def div_div_st(self, p: int) -> np.ndarray:
        """S cap T -> scalar, degree p -> p-2."""
        n0 = nmono(3, p)
        return (self.div_v(max(p - 1, 0)) @ self.div_m(p) @ comp_op(U_ST, n0))

    def sym_curl_t(self, p: int) -> np.ndarray:
        """T-valued -> S-valued (curl of traceless is not traceless-free;
        sym curl of T lands in S)."""
        n1, n0 = nmono(3, max(p - 1, 0)), nmono(3, p)
        return comp_op(P_S @ SYM9, n1) @ self.curl_m(p) @ comp_op(U_T, n0)

    def div_div_s(self, p: int) -> np.ndarray:
        n0 = nmono(3, p)
        return self.div_v(max(p - 1, 0)) @ self.div_m(p) @ comp_op(U_S, n0)

    def dev_grad_v(self, p: int) -> np.ndarray:
        """vec3 -> T coords, degree p -> p-1."""
        n1 = nmono(3, max(p - 1, 0))
        return comp_op(P_T @ DEV9, n1) @ self.grad_v(p)

    def vskw_field(self, p: int, ncomp_basis: np.ndarray) -> np.ndarray:
        """basis-packed matrix field -> vec3 (same degree)."""
        n = nmono(3, p)
        return comp_op(VSKW @ unpack_mat(ncomp_basis), n)


# ---------------------------------------------------------------------------
# surface calculus on a plane triangle with frame (n, t1, t2)
# ---------------------------------------------------------------------------

class FaceCalc:
    """In-plane differential operators in frame coordinates on a triangle."""

    def __init__(self, tri: Simplex, n, t1, t2):
        if tri.sdim != 2:
            raise ShapeMismatch("FaceCalc needs a triangle")
        self.F = tri
        self.n = np.asarray(n, dtype=float)
        self.t1 = np.asarray(t1, dtype=float)
        self.t2 = np.asarray(t2, dtype=float)
        self._d = {}

    def dt(self, degree: int, which: int) -> np.ndarray:
        key = (degree, which)
        if key not in self._d:
            self._d[key] = deriv_matrix(self.F, degree,
                                        self.t1 if which == 0 else self.t2)
        return self._d[key]

    # scalar -> vec2
    def gradF_s(self, p: int) -> np.ndarray:
        return np.vstack([self.dt(p, 0), self.dt(p, 1)])

    def curlF_s(self, p: int) -> np.ndarray:
        return np.vstack([-self.dt(p, 1), self.dt(p, 0)])

    # vec2 -> scalar
    def rotF_2(self, p: int) -> np.ndarray:
        n1, n0 = nmono(2, max(p - 1, 0)), nmono(2, p)
        out = np.zeros((n1, 2 * n0))
        out[:, n0:] = self.dt(p, 0)
        out[:, :n0] = -self.dt(p, 1)
        return out

    def divF_2(self, p: int) -> np.ndarray:
        n1, n0 = nmono(2, max(p - 1, 0)), nmono(2, p)
        out = np.zeros((n1, 2 * n0))
        out[:, :n0] = self.dt(p, 0)
        out[:, n0:] = self.dt(p, 1)
        return out

    # vec2 -> mat2 (row-wise): (gradF u)_(ab) = d_tb u_a
    def gradF_2(self, p: int) -> np.ndarray:
        n1, n0 = nmono(2, max(p - 1, 0)), nmono(2, p)
        out = np.zeros((4 * n1, 2 * n0))
        for a in range(2):
            for b in range(2):
                out[(2 * a + b) * n1:(2 * a + b + 1) * n1,
                    a * n0:(a + 1) * n0] = self.dt(p, b)
        return out

    # vec2 -> mat2 (row-wise curlF of each component)
    def curlF_2(self, p: int) -> np.ndarray:
        n1, n0 = nmono(2, max(p - 1, 0)), nmono(2, p)
        out = np.zeros((4 * n1, 2 * n0))
        for a in range(2):
            out[(2 * a + 0) * n1:(2 * a + 1) * n1, a * n0:(a + 1) * n0] = \
                -self.dt(p, 1)
            out[(2 * a + 1) * n1:(2 * a + 2) * n1, a * n0:(a + 1) * n0] = \
                self.dt(p, 0)
        return out

    # mat2 -> vec2 (row-wise rot)
    def rotF_m2(self, p: int) -> np.ndarray:
        n1, n0 = nmono(2, max(p - 1, 0)), nmono(2, p)
        out = np.zeros((2 * n1, 4 * n0))
        for a in range(2):
            out[a * n1:(a + 1) * n1, (2 * a + 1) * n0:(2 * a + 2) * n0] = \
                self.dt(p, 0)
            out[a * n1:(a + 1) * n1, (2 * a + 0) * n0:(2 * a + 1) * n0] += \
                -self.dt(p, 1)
        return out

    def rotrotF_m2(self, p: int) -> np.ndarray:
        return self.rotF_2(max(p - 1, 0)) @ self.rotF_m2(p)

    def sym_gradF_2(self, p: int) -> np.ndarray:
        n1 = nmono(2, max(p - 1, 0))
        return comp_op(SYM4, n1) @ self.gradF_2(p)

    def symgradF_curlF_s(self, p: int) -> np.ndarray:
        """scalar -> mat2 (symmetric, traceless): sym gradF curlF."""
        return self.sym_gradF_2(max(p - 1, 0)) @ self.curlF_s(p)

    def dev_curlF_curlF_s(self, p: int) -> np.ndarray:
        """scalar -> mat2: dev(curlF curlF q)."""
        n2 = nmono(2, max(p - 2, 0))
        return comp_op(DEV4, n2) @ self.curlF_2(max(p - 1, 0)) @ self.curlF_s(p)

    # -- 3D <-> frame conversions (constant maps) --------------------------

    def proj3(self) -> np.ndarray:
        """vec3 Cartesian comps -> vec2 frame comps (Pi_F)."""
        return np.vstack([self.t1, self.t2])

    def embed3(self) -> np.ndarray:
        """vec2 frame comps -> vec3 Cartesian comps (E_F)."""
        return self.proj3().T

    def mat3_to_mat2(self) -> np.ndarray:
        """A -> Pi_F A Pi_F (both-sided tangential projection), 4x9."""
        P = self.proj3()
        out = np.zeros((4, 9))
        for a in range(2):
            for b in range(2):
                out[2 * a + b] = np.outer(P[a], P[b]).reshape(9)
        return out


SYM4 = np.zeros((4, 4))
DEV4 = np.zeros((4, 4))
TRACE4 = np.zeros((1, 4))
for _a in range(2):
    for _b in range(2):
        SYM4[2 * _a + _b, 2 * _a + _b] += 0.5
        SYM4[2 * _a + _b, 2 * _b + _a] += 0.5
        DEV4[2 * _a + _b, 2 * _a + _b] += 1.0
        if _a == _b:
            TRACE4[0, 2 * _a + _b] = 1.0
            for _c in range(2):
                DEV4[2 * _a + _b, 2 * _c + _c] -= 0.5


# ---------------------------------------------------------------------------
# traces of volume fields on faces and edges
# ---------------------------------------------------------------------------

class FaceTrace:
    """Trace maps of tet fields onto one face, in the face's global frame.

    `keep` gives the positions of the face's (sorted) vertices inside the
    tet's vertex tuple, so restriction matrices land in the face's own
    monomial basis.
    """

    def __init__(self, tet: Simplex, keep, tri: Simplex, n, t1, t2):
        self.tet = tet
        self.keep = list(keep)
        self.calc = FaceCalc(tri, n, t1, t2)
        self.ops = Ops3(tet)
        self.n = np.asarray(n, dtype=float)
        self._r = {}

    def restrict_s(self, p: int) -> np.ndarray:
        if p not in self._r:
            self._r[p] = restrict_matrix(3, p, self.keep)
        return self._r[p]

    def restrict_c(self, p: int, ncomp: int) -> np.ndarray:
        return np.kron(np.eye(ncomp), self.restrict_s(p))

    # S cap T volume field -> face traces (frame coordinates)

    def tt(self, p: int) -> np.ndarray:
        """tangential-tangential part sym(Pi_F (tau x n) Pi_F): 4 comps."""
        C = SYM4 @ self.calc.mat3_to_mat2() @ cross_right(self.n) @ U_ST
        return self.restrict_c(p, 4) @ comp_op(C, nmono(3, p))

    def tt_st2(self, p: int) -> np.ndarray:
        """S2 cap T2 coordinates of the tangential-tangential trace."""
        return comp_op(P_ST2, nmono(2, p)) @ self.tt(p)

    def tn(self, p: int) -> np.ndarray:
        """tangential-normal part Pi_F(tau^T n): 2 comps."""
        C = self.calc.proj3() @ mat_vec_right(self.n) @ TRANS9 @ U_ST
        return self.restrict_c(p, 2) @ comp_op(C, nmono(3, p))

    def nn(self, p: int) -> np.ndarray:
        """n^T sigma n: scalar."""
        C = vec_bilinear(self.n, self.n) @ U_ST
        return self.restrict_s(p) @ comp_op(C, nmono(3, p))

    def sym_nxtau(self, p: int) -> np.ndarray:
        """Full 3x3 sym(n x tau) restricted to the face: 9 comps."""
        C = SYM9 @ cross_left(self.n) @ U_ST
        return self.restrict_c(p, 9) @ comp_op(C, nmono(3, p))

    def divdiv_trace(self, p: int) -> np.ndarray:
        """2 div_F(sigma n) + d_n (n^T sigma n): scalar of degree p-1."""
        n0 = nmono(3, p)
        sig_n = comp_op(mat_vec_right(self.n) @ U_ST, n0)       # 3 comps
        w_t1 = comp_op(self.calc.t1.reshape(1, 3), n0) @ sig_n
        w_t2 = comp_op(self.calc.t2.reshape(1, 3), n0) @ sig_n
        rF = self.restrict_s(p)
        divF = (self.calc.dt(p, 0) @ rF @ w_t1 + self.calc.dt(p, 1) @ rF @ w_t2)
        nn_vol = comp_op(vec_bilinear(self.n, self.n) @ U_ST, n0)
        dn = self.restrict_s(max(p - 1, 0)) @ self.ops.ddir(p, self.n) @ nn_vol
        return 2.0 * divF + dn


class EdgeTrace:
    """Trace maps of tet fields onto one edge, in the edge's global frame."""

    def __init__(self, tet: Simplex, keep, edge: Simplex, t, n1, n2):
        self.tet = tet
        self.keep = list(keep)
        self.edge = edge
        self.t = np.asarray(t, dtype=float)
        self.n1 = np.asarray(n1, dtype=float)
        self.n2 = np.asarray(n2, dtype=float)
        self.ops = Ops3(tet)
        self._r = {}

    def restrict_s(self, p: int) -> np.ndarray:
        if p not in self._r:
            self._r[p] = restrict_matrix(3, p, self.keep)
        return self._r[p]

    def ddt(self, p: int) -> np.ndarray:
        return deriv_matrix(self.edge, p, self.t)

    def ninj_st(self, p: int, i: int, j: int) -> np.ndarray:
        """n_i^T tau n_j restricted to the edge (tau in S cap T coords)."""
        ni = self.n1 if i == 1 else self.n2
        nj = self.n1 if j == 1 else self.n2
        C = vec_bilinear(ni, nj) @ U_ST
        return self.restrict_s(p) @ comp_op(C, nmono(3, p))

    def symcurl_ninj(self, p: int, i: int, j: int) -> np.ndarray:
        """n_i^T (sym curl tau) n_j on the edge, degree p-1."""
        ni = self.n1 if i == 1 else self.n2
        nj = self.n1 if j == 1 else self.n2
        sc = Ops3(self.tet).sym_curl_st(p)
        C = vec_bilinear(ni, nj) @ U_ST
        return self.restrict_s(max(p - 1, 0)) @ comp_op(C, nmono(3, max(p - 1, 0))) @ sc

    def curl_combo(self, p: int) -> np.ndarray:
        """n1^T curl(tau) n2 - d_t(t^T tau t) on the edge, degree p-1."""
        n0, n1m = nmono(3, p), nmono(3, max(p - 1, 0))
        curl = self.ops.curl_m(p) @ comp_op(U_ST, n0)
        term1 = self.restrict_s(max(p - 1, 0)) @ \
            comp_op(vec_bilinear(self.n1, self.n2), n1m) @ curl
        ttt = self.restrict_s(p) @ comp_op(vec_bilinear(self.t, self.t) @ U_ST, n0)
        term2 = self.ddt(p) @ ttt
        return term1 - term2


# ---------------------------------------------------------------------------
# identity / complex-property checks
# ---------------------------------------------------------------------------

def field(space: PolySpace, simplex: Simplex, coeffs) -> BaryPoly:
    return BaryPoly(space, simplex, coeffs)


def random_field(space: PolySpace, simplex: Simplex, rng) -> BaryPoly:
    return BaryPoly(space, simplex, rng.standard_normal((space.ncomp, space.nmono)))


def sup_norm(poly: BaryPoly, npts: int = 40, rng=None) -> float:
    rng = rng or np.random.default_rng(0)
    lam = rng.dirichlet(np.ones(poly.space.sdim + 1), size=npts)
    vals = poly.eval_bary(lam)
    return float(np.abs(vals).max())


def apply_op(name: str, poly: BaryPoly, frame=None) -> BaryPoly:
    """Apply a named operator to a polynomial field (test/CLI convenience).

    3D fields use Cartesian component conventions; surface operators need
    `frame = (n, t1, t2)` and a field living on the face triangle.
    """
    K, p = poly.simplex, poly.degree
    nc = poly.space.ncomp
    c = poly.coeffs.ravel()

    def out(mat, ncomp_out, deg_out, simplex=None):
        return BaryPoly(PolySpace((simplex or K).sdim, deg_out, ncomp_out),
                        simplex or K, mat @ c)

    if K.sdim == 3:
        ops = Ops3(K)
        n0 = nmono(3, p)
        table3 = {
            ("sym", 9): (comp_op(SYM9, n0), 9, p),
            ("skw", 9): (comp_op(np.eye(9) - SYM9, n0), 9, p),
            ("dev", 9): (comp_op(DEV9, n0), 9, p),
            ("mskw", 3): (comp_op(MSKW, n0), 9, p),
            ("vskw", 9): (comp_op(VSKW, n0), 3, p),
            ("grad", 1): (ops.grad_s(p), 3, max(p - 1, 0)),
            ("grad", 3): (ops.grad_v(p), 9, max(p - 1, 0)),
            ("curl", 3): (ops.curl_v(p), 3, max(p - 1, 0)),
            ("curl", 9): (ops.curl_m(p), 9, max(p - 1, 0)),
            ("div", 3): (ops.div_v(p), 1, max(p - 1, 0)),
            ("div", 9): (ops.div_m(p), 3, max(p - 1, 0)),
            ("hess", 1): (ops.hess_s(p), 9, max(p - 2, 0)),
            ("dev_hess", 1): (ops.dev_hess(p), 5, max(p - 2, 0)),
            ("sym_curl", 5): (ops.sym_curl_st(p), 5, max(p - 1, 0)),
            ("div_div", 5): (ops.div_div_st(p), 1, max(p - 2, 0)),
        }
        key = (name, nc)
        if key in table3:
            M, no, dg = table3[key]
            return out(M, no, dg)
        raise ShapeMismatch(f"operator {name} undefined for ncomp={nc} in 3D")

    if frame is None:
        raise ShapeMismatch("surface operators need a frame")
    n, t1, t2 = frame
    calc = FaceCalc(K, n, t1, t2)
    table2 = {
        ("grad_F", 1): (calc.gradF_s(p), 2, max(p - 1, 0)),
        ("curl_F", 1): (calc.curlF_s(p), 2, max(p - 1, 0)),
        ("rot_F", 2): (calc.rotF_2(p), 1, max(p - 1, 0)),
        ("div_F", 2): (calc.divF_2(p), 1, max(p - 1, 0)),
        ("sym_grad_F", 2): (calc.sym_gradF_2(p), 4, max(p - 1, 0)),
        ("rot_F", 4): (calc.rotF_m2(p), 2, max(p - 1, 0)),
    }
    key = (name, nc)
    if key in table2:
        M, no, dg = table2[key]
        return out(M, no, dg)
    raise ShapeMismatch(f"operator {name} undefined for ncomp={nc} on a face")


def check_complex_property(which: str, simplex: Simplex, degree: int, rng) -> float:
    """Max residual of sym curl (dev hess u) or div div (sym curl tau)."""
    ops = Ops3(simplex)
    if which == "dev_hess->sym_curl":
        u = random_field(PolySpace(3, degree, 1), simplex, rng)
        comp = ops.sym_curl_st(degree - 2) @ ops.dev_hess(degree)
        resid = BaryPoly(PolySpace(3, degree - 3, 5), simplex, comp @ u.coeffs.ravel())
        return sup_norm(resid, rng=rng) / max(sup_norm(u, rng=rng), 1e-300)
    if which == "sym_curl->div_div":
        tau = random_field(PolySpace(3, degree, 5), simplex, rng)
        comp = ops.div_div_st(degree - 1) @ ops.sym_curl_st(degree)
        resid = BaryPoly(PolySpace(3, degree - 3, 1), simplex, comp @ tau.coeffs.ravel())
        return sup_norm(resid, rng=rng) / max(sup_norm(tau, rng=rng), 1e-300)
    raise ValueError(which)


# -- Green identities -------------------------------------------------------

def _l2(a: BaryPoly, b: BaryPoly) -> float:
    """Exact L^2 pairing of two fields on the same simplex."""
    prod_deg = a.degree + b.degree
    acc = 0.0
    for c in range(a.space.ncomp):
        pa = BaryPoly(PolySpace(a.space.sdim, a.degree, 1), a.simplex, a.coeffs[c])
        pb = BaryPoly(PolySpace(b.space.sdim, b.degree, 1), b.simplex, b.coeffs[c])
        acc += float((pa.product(pb)).integrate_exact())
    return acc


def green_divdiv_residual(mesh, ti: int, sigma: BaryPoly, v: BaryPoly):
    """Residual and scale of the div div Green identity on tet ti.

    sigma: S cap T coords (5), v: scalar, both volume fields on the tet.
    """
    K = mesh.tet_simplex(ti)
    ops = Ops3(K)
    p, q = sigma.degree, v.degree
    sc = sigma.coeffs.ravel()

    ddiv = BaryPoly(PolySpace(3, max(p - 2, 0), 1), K, ops.div_div_st(p) @ sc)
    lhs = _l2(ddiv, v)

    hessv = BaryPoly(PolySpace(3, max(q - 2, 0), 9), K, ops.hess_s(q) @ v.coeffs.ravel())
    sig9 = BaryPoly(PolySpace(3, p, 9), K, comp_op(U_ST, nmono(3, p)) @ sc)
    vol = _l2(sig9, hessv)

    face_terms = 0.0
    edge_terms = 0.0
    sorted_tet = sorted(mesh.tets[ti])
    for fi in mesh.tet_faces[ti]:
        fkey = mesh.faces[fi]
        keep = [mesh.tets[ti].index(vv) for vv in fkey]
        tri = mesh.face_simplex(fi)
        fr = mesh.face_frame(fi)
        n_out = mesh.outward_normal(ti, fi)
        tr = FaceTrace(K, keep, tri, n_out, fr.t1, fr.t2)

        nn = BaryPoly(PolySpace(2, p, 1), tri, tr.nn(p) @ sc)
        dvn = BaryPoly(PolySpace(2, max(q - 1, 0), 1), tri,
                       tr.restrict_s(max(q - 1, 0)) @ ops.ddir(q, n_out)
                       @ v.coeffs.ravel())
        trdd = BaryPoly(PolySpace(2, max(p - 1, 0), 1), tri, tr.divdiv_trace(p) @ sc)
        vF = BaryPoly(PolySpace(2, q, 1), tri, tr.restrict_s(q) @ v.coeffs.ravel())
        face_terms += _l2(nn, dvn) - _l2(trdd, vF)

        for (a, b), t_bd in fr.edge_tangents.items():
            n_bd = fr.edge_normals[(a, b)]
            eid = mesh.edge_index[(a, b)]
            e = mesh.edge_simplex(eid)
            keep_e = [mesh.tets[ti].index(a), mesh.tets[ti].index(b)]
            re_p = restrict_matrix(3, p, keep_e)
            re_q = restrict_matrix(3, q, keep_e)
            comb = BaryPoly(PolySpace(1, p, 1), e,
                            re_p @ comp_op(vec_bilinear(n_bd, n_out) @ U_ST,
                                           nmono(3, p)) @ sc)
            ve = BaryPoly(PolySpace(1, q, 1), e, re_q @ v.coeffs.ravel())
            edge_terms += _l2(comb, ve)

    rhs = vol - edge_terms - face_terms
    scale = abs(lhs) + abs(vol) + abs(edge_terms) + abs(face_terms)
    return abs(lhs - rhs), max(scale, 1e-300)


def green_symcurl_residual(mesh, ti: int, tau: BaryPoly, sigma: BaryPoly):
    """Residual and scale of the sym curl Green identity on tet ti.

    tau, sigma: S cap T coords, volume fields on the tet.
    """
    K = mesh.tet_simplex(ti)
    ops = Ops3(K)
    p, q = tau.degree, sigma.degree
    tc, sc = tau.coeffs.ravel(), sigma.coeffs.ravel()

    sct = BaryPoly(PolySpace(3, max(p - 1, 0), 5), K, ops.sym_curl_st(p) @ tc)
    lhs = _l2(sct, sigma)

    curls = BaryPoly(PolySpace(3, max(q - 1, 0), 9), K,
                     ops.curl_m(q) @ comp_op(U_ST, nmono(3, q)) @ sc)
    tau9 = BaryPoly(PolySpace(3, p, 9), K, comp_op(U_ST, nmono(3, p)) @ tc)
    vol = _l2(tau9, curls)

    face_terms = 0.0
    for fi in mesh.tet_faces[ti]:
        fkey = mesh.faces[fi]
        keep = [mesh.tets[ti].index(vv) for vv in fkey]
        tri = mesh.face_simplex(fi)
        fr = mesh.face_frame(fi)
        n_out = mesh.outward_normal(ti, fi)
        tr = FaceTrace(K, keep, tri, n_out, fr.t1, fr.t2)
        syms = BaryPoly(PolySpace(2, p, 9), tri, tr.sym_nxtau(p) @ tc)
        sig9F = BaryPoly(PolySpace(2, q, 9), tri,
                         tr.restrict_c(q, 9) @ comp_op(U_ST, nmono(3, q)) @ sc)
        face_terms += _l2(syms, sig9F)

    rhs = vol + face_terms
    scale = abs(lhs) + abs(vol) + abs(face_terms)
    return abs(lhs - rhs), max(scale, 1e-300)


def check_trace_diagrams(mesh, ti: int, u: BaryPoly | None = None,
                         tau: BaryPoly | None = None, fi: int | None = None):
    """Residuals of the commuting trace relations on faces of tet ti.

    With `u` given, checks the two relations tying dev hess u to the H^2
    traces; with `tau` given (S cap T coords), checks the two relations tying
    sigma = sym curl tau to the traces of tau.  For tau = dev hess u, sigma
    vanishes identically, so an independent tau is the meaningful input for
    the second pair.  Returns {face: {relation: relative residual}}.
    """
    K = mesh.tet_simplex(ti)
    ops = Ops3(K)
    faces = [fi] if fi is not None else mesh.tet_faces[ti]
    out = {f: {} for f in faces}

    for f in faces:
        fkey = mesh.faces[f]
        keep = [mesh.tets[ti].index(vv) for vv in fkey]
        tri = mesh.face_simplex(f)
        fr = mesh.face_frame(f)
        tr = FaceTrace(K, keep, tri, fr.n, fr.t1, fr.t2)
        calc = tr.calc

        if u is not None:
            p = u.degree
            uc = u.coeffs.ravel()
            tau_c = ops.dev_hess(p) @ uc
            pt = p - 2
            uF = tr.restrict_s(p) @ uc
            dnu = tr.restrict_s(p - 1) @ ops.ddir(p, fr.n) @ uc
            floor = _norm(tri, 1, p, uF)

            tt = tr.tt(pt) @ tau_c
            tt_ref = -calc.sym_gradF_2(p - 1) @ calc.curlF_s(p) @ uF
            out[f]["tt_vs_symgradF_curlF"] = _rel(tri, 4, pt, tt, p - 2,
                                                  tt_ref, floor)
            tn = tr.tn(pt) @ tau_c
            tn_ref = calc.gradF_s(p - 1) @ dnu
            out[f]["tn_vs_gradF_dn"] = _rel(tri, 2, pt, tn, p - 2, tn_ref,
                                            floor)

        if tau is not None:
            pt = tau.degree
            tau_c = tau.coeffs.ravel()
            sig_c = ops.sym_curl_st(pt) @ tau_c
            ps = pt - 1
            tt = tr.tt(pt) @ tau_c
            tn = tr.tn(pt) @ tau_c
            floor = _norm(tri, 4, pt, tt) + _norm(tri, 2, pt, tn)

            trdd = tr.divdiv_trace(ps) @ sig_c
            trdd_ref = -calc.rotrotF_m2(pt) @ tt
            out[f]["trdivdiv_vs_rotrot_tt"] = _rel(tri, 1, ps - 1, trdd,
                                                   pt - 2, trdd_ref, floor)
            nn = tr.nn(ps) @ sig_c
            nn_ref = calc.rotF_2(pt) @ tn
            out[f]["nn_vs_rot_tn"] = _rel(tri, 1, ps, nn, pt - 1, nn_ref,
                                          floor)
    return out


def _norm(tri: Simplex, ncomp: int, deg: int, c: np.ndarray) -> float:
    p = BaryPoly(PolySpace(2, deg, ncomp), tri, c)
    return float(np.sqrt(max(_l2(p, p), 0.0)))


def _rel(tri: Simplex, ncomp: int, deg_a: int, a: np.ndarray,
         deg_b: int, b: np.ndarray, floor: float = 0.0) -> float:
    pa = BaryPoly(PolySpace(2, deg_a, ncomp), tri, a)
    pb = BaryPoly(PolySpace(2, deg_b, ncomp), tri, b)
    diff = pa - pb
    na = np.sqrt(max(_l2(pa, pa), 0.0))
    nb = np.sqrt(max(_l2(pb, pb), 0.0))
    nd = np.sqrt(max(_l2(diff, diff), 0.0))
    return nd / max(na, nb, floor, 1e-300)
