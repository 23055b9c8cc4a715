"""Polynomial algebra in barycentric coordinates on 1-, 2-, 3-simplices.

Polynomials of total degree p are represented by their coefficients over the
homogeneous barycentric monomial basis {lambda^alpha : |alpha| = p}, which is
a genuine basis of P_p restricted to the simplex.  Vector/matrix values are
stored component-wise, coefficient layout (ncomp, nmono) flattened C-order.

Everything that the element constructions need reduces to small dense linear
maps between coefficient spaces: directional derivatives, restriction to
sub-simplices, multiplication by fixed polynomials, point evaluation, and
exact integration via the Dirichlet formula

    int_K prod lambda_i^{a_i} dV = d! |K| prod(a_i!) / (|a| + d)!
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import DegenerateTet, DimensionMismatch, InsufficientQuadratureDegree


# ---------------------------------------------------------------------------
# monomial bookkeeping
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def multiindices(sdim: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices alpha in N^{sdim+1} with |alpha| = degree, lex order."""
    if degree < 0:
        return ()

    def rec(nvars, total):
        if nvars == 1:
            yield (total,)
            return
        for head in range(total, -1, -1):
            for tail in rec(nvars - 1, total - head):
                yield (head,) + tail

    return tuple(rec(sdim + 1, degree))


@lru_cache(maxsize=None)
def mono_index(sdim: int, degree: int) -> dict:
    return {a: i for i, a in enumerate(multiindices(sdim, degree))}


def nmono(sdim: int, degree: int) -> int:
    if degree < 0:
        return 0
    return math.comb(degree + sdim, sdim)


@lru_cache(maxsize=None)
def _alpha_array(sdim: int, degree: int) -> np.ndarray:
    return np.array(multiindices(sdim, degree), dtype=np.int64).reshape(-1, sdim + 1)


# ---------------------------------------------------------------------------
# simplex geometry
# ---------------------------------------------------------------------------

class Simplex:
    """A d-simplex embedded in R^3 with cached barycentric calculus.

    `grads[i]` is the tangential gradient of lambda_i along the affine hull,
    so directional derivatives of barycentric monomials along any tangent
    vector are exact.
    """

    def __init__(self, vertices):
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] not in (2, 3):
            raise ValueError("vertices must be (m+1, 2|3)")
        if verts.shape[1] == 2:  # allow planar input, embed in R^3
            verts = np.hstack([verts, np.zeros((verts.shape[0], 1))])
        self.verts = verts
        self.sdim = verts.shape[0] - 1
        edges = verts[1:] - verts[0]             # (m, 3)
        gram = edges @ edges.T
        det = np.linalg.det(gram)
        if det <= 0 or not np.isfinite(det):
            raise DegenerateTet(f"degenerate {self.sdim}-simplex")
        self.measure = math.sqrt(det) / math.factorial(self.sdim)
        # tangential gradients: grad lambda_i = E G^-1 grad_u lambda_i
        gradu = np.vstack([-np.ones((1, self.sdim)), np.eye(self.sdim)])  # (m+1, m)
        self.grads = gradu @ np.linalg.solve(gram, edges)                 # (m+1, 3)
        diffs = verts[:, None, :] - verts[None, :, :]
        self.diameter = float(np.sqrt((diffs ** 2).sum(-1)).max())

    def barycentric(self, x) -> np.ndarray:
        """Barycentric coordinates of Cartesian points (affine in the hull)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lam = np.empty((x.shape[0], self.sdim + 1))
        rel = x - self.verts[0]
        lam_rest = rel @ self.grads[1:].T
        lam[:, 1:] = lam_rest
        lam[:, 0] = 1.0 - lam_rest.sum(axis=1)
        return lam if lam.shape[0] > 1 else lam[0]

    def point(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        return lam @ self.verts

    def centroid(self) -> np.ndarray:
        return self.verts.mean(axis=0)

    def sub(self, keep) -> "Simplex":
        """Sub-simplex spanned by the given local vertex indices."""
        return Simplex(self.verts[list(keep)])

    def scaled_to_unit_diameter(self) -> "Simplex":
        return Simplex(self.verts / self.diameter)


def reference_tet() -> Simplex:
    return Simplex([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


def reference_tri() -> Simplex:
    return Simplex([[0, 0, 0], [1, 0, 0], [0, 1, 0]])


# ---------------------------------------------------------------------------
# coefficient-space linear maps
# ---------------------------------------------------------------------------

def deriv_matrix(simplex: Simplex, degree: int, direction) -> np.ndarray:
    """Matrix of the directional derivative P_degree -> P_{degree-1}.

    Degree 0 maps to the zero polynomial of degree 0.
    """
    d = simplex.sdim
    if degree == 0:
        return np.zeros((1, 1))
    gdir = simplex.grads @ np.asarray(direction, dtype=float)  # (d+1,)
    src = multiindices(d, degree)
    dst = mono_index(d, degree - 1)
    D = np.zeros((len(dst), len(src)))
    for col, a in enumerate(src):
        for i in range(d + 1):
            if a[i] == 0:
                continue
            b = list(a)
            b[i] -= 1
            D[dst[tuple(b)], col] += a[i] * gdir[i]
    return D


def eval_matrix(sdim: int, degree: int, pts_bary) -> np.ndarray:
    """Vandermonde-type matrix: V[p, m] = lambda_p^alpha_m."""
    pts = np.atleast_2d(np.asarray(pts_bary, dtype=float))
    alphas = _alpha_array(sdim, degree)              # (n, sdim+1)
    # prod over coords of lam^alpha, vectorized
    V = np.ones((pts.shape[0], alphas.shape[0]))
    for i in range(sdim + 1):
        ai = alphas[:, i]
        amax = int(ai.max()) if ai.size else 0
        powers = np.ones((pts.shape[0], amax + 1))
        for p in range(1, amax + 1):
            powers[:, p] = powers[:, p - 1] * pts[:, i]
        V *= powers[:, ai]
    return V


def restrict_matrix(sdim_from: int, degree: int, keep) -> np.ndarray:
    """Restriction P_degree(simplex) -> P_degree(sub-simplex).

    `keep` lists the retained barycentric coordinates in the sub-simplex's own
    vertex order; monomials supported outside `keep` restrict to zero.
    """
    keep = list(keep)
    sub_dim = len(keep) - 1
    src = multiindices(sdim_from, degree)
    dst = mono_index(sub_dim, degree)
    R = np.zeros((len(dst), len(src)))
    keepset = set(keep)
    for col, a in enumerate(src):
        if any(a[i] > 0 and i not in keepset for i in range(sdim_from + 1)):
            continue
        b = tuple(a[i] for i in keep)
        R[dst[b], col] = 1.0
    return R


def mult_matrix(sdim: int, coeffs_q, degree_q: int, degree_p: int) -> np.ndarray:
    """Matrix of multiplication by the fixed polynomial q: P_p -> P_{p+q}."""
    coeffs_q = np.asarray(coeffs_q, dtype=float).ravel()
    qmono = multiindices(sdim, degree_q)
    src = multiindices(sdim, degree_p)
    dst = mono_index(sdim, degree_p + degree_q)
    M = np.zeros((len(dst), len(src)))
    for qi, beta in enumerate(qmono):
        c = coeffs_q[qi]
        if c == 0.0:
            continue
        for col, a in enumerate(src):
            g = tuple(a[i] + beta[i] for i in range(sdim + 1))
            M[dst[g], col] += c
    return M


@lru_cache(maxsize=None)
def integral_vector(sdim: int, degree: int) -> np.ndarray:
    """Exact integrals of the monomials over the unit-measure simplex."""
    alphas = multiindices(sdim, degree)
    fd = math.factorial(sdim)
    out = np.empty(len(alphas))
    for i, a in enumerate(alphas):
        num = fd
        for ai in a:
            num *= math.factorial(ai)
        out[i] = num / math.factorial(degree + sdim)
    return out


@lru_cache(maxsize=None)
def gram_matrix(sdim: int, degree: int) -> np.ndarray:
    """G[a, b] = integral of lambda^(a+b) over the unit-measure simplex."""
    alphas = multiindices(sdim, degree)
    n = len(alphas)
    idx2 = mono_index(sdim, 2 * degree)
    w2 = integral_vector(sdim, 2 * degree)
    G = np.empty((n, n))
    for i, a in enumerate(alphas):
        for j in range(i, n):
            b = alphas[j]
            g = w2[idx2[tuple(a[t] + b[t] for t in range(sdim + 1))]]
            G[i, j] = g
            G[j, i] = g
    return G


@lru_cache(maxsize=None)
def gram_chol(sdim: int, degree: int) -> np.ndarray:
    """Lower Cholesky factor of the unit-measure monomial Gram matrix."""
    return np.linalg.cholesky(gram_matrix(sdim, degree))


@lru_cache(maxsize=None)
def mixed_gram(sdim: int, deg_a: int, deg_b: int) -> np.ndarray:
    """G[a, b] = integral of lambda^(alpha_a + beta_b), |alpha|=deg_a, |beta|=deg_b."""
    A = multiindices(sdim, deg_a)
    B = multiindices(sdim, deg_b)
    idx = mono_index(sdim, deg_a + deg_b)
    w = integral_vector(sdim, deg_a + deg_b)
    G = np.empty((len(A), len(B)))
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            G[i, j] = w[idx[tuple(a[t] + b[t] for t in range(sdim + 1))]]
    return G


@lru_cache(maxsize=None)
def legendre_moment_rows(degree: int, nmoments: int) -> np.ndarray:
    """Moments of edge monomials against orthonormal Legendre polynomials.

    Row m is the functional q -> int_0^1 q(s) sqrt(2m+1) P_m(2s-1) ds acting
    on the edge monomial coefficients of a degree-`degree` polynomial, where
    s is the barycentric coordinate of the edge's second (higher-index)
    vertex.  The test family is orthonormal for the unit-measure integral.
    """
    from numpy.polynomial.legendre import legval
    rule = simplex_rule(1, degree + nmoments)
    s = rule.points[:, 1]
    V = eval_matrix(1, degree, rule.points)          # (npts, degree+1)
    rows = np.empty((nmoments, V.shape[1]))
    for m in range(nmoments):
        cvec = np.zeros(m + 1)
        cvec[m] = 1.0
        qm = math.sqrt(2 * m + 1) * legval(2 * s - 1, cvec)
        rows[m] = (rule.weights * qm) @ V
    return rows


# ---------------------------------------------------------------------------
# polynomial spaces and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolySpace:
    """Descriptor of P_degree(simplex; R^ncomp) in monomial coordinates."""

    sdim: int
    degree: int
    ncomp: int = 1

    @property
    def nmono(self) -> int:
        return nmono(self.sdim, self.degree)

    @property
    def dim(self) -> int:
        return self.ncomp * self.nmono

    # -- L^2 machinery (unit-measure simplex; physical measure is a global
    #    scalar factor that cancels in every rank/angle computation).

    def to_orth(self, A: np.ndarray) -> np.ndarray:
        """Map coefficient columns to L^2-orthonormal coordinates (L^T c)."""
        L = gram_chol(self.sdim, self.degree)
        A2 = np.asarray(A, dtype=float)
        single = A2.ndim == 1
        A3 = A2.reshape(self.ncomp, self.nmono, -1)
        out = np.einsum("ji,cjm->cim", L, A3).reshape(self.dim, -1)
        return out[:, 0] if single else out

    def from_orth(self, O: np.ndarray) -> np.ndarray:
        L = gram_chol(self.sdim, self.degree)
        O2 = np.asarray(O, dtype=float)
        single = O2.ndim == 1
        O3 = O2.reshape(self.ncomp, self.nmono, -1)
        out = np.empty_like(O3)
        for c in range(self.ncomp):
            out[c] = np.linalg.solve(L.T, O3[c])
        out = out.reshape(self.dim, -1)
        return out[:, 0] if single else out

    def functionals_to_orth(self, rows: np.ndarray) -> np.ndarray:
        """Re-express functional rows (acting on monomial coeffs) so they act
        on L^2-orthonormal coordinates: r_orth = r . L^{-T} per component."""
        L = gram_chol(self.sdim, self.degree)
        R = np.asarray(rows, dtype=float).reshape(-1, self.dim)
        out = np.empty_like(R)
        for c in range(self.ncomp):
            blk = R[:, c * self.nmono:(c + 1) * self.nmono]
            out[:, c * self.nmono:(c + 1) * self.nmono] = \
                np.linalg.solve(L, blk.T).T
        return out

    def gram_apply(self, A: np.ndarray) -> np.ndarray:
        G = gram_matrix(self.sdim, self.degree)
        A2 = np.asarray(A, dtype=float)
        single = A2.ndim == 1
        A3 = A2.reshape(self.ncomp, self.nmono, -1)
        out = np.einsum("ij,cjm->cim", G, A3).reshape(self.dim, -1)
        return out[:, 0] if single else out

    def inner(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Unit-measure L^2 inner products of coefficient columns."""
        A2 = np.asarray(A, dtype=float).reshape(self.dim, -1)
        return A2.T @ self.gram_apply(B)


class BaryPoly:
    """A polynomial field on a simplex: (space, simplex, coefficients)."""

    def __init__(self, space: PolySpace, simplex: Simplex, coeffs):
        self.space = space
        self.simplex = simplex
        self.coeffs = np.asarray(coeffs, dtype=float).reshape(space.ncomp, space.nmono)

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(space: PolySpace, simplex: Simplex) -> "BaryPoly":
        return BaryPoly(space, simplex, np.zeros((space.ncomp, space.nmono)))

    @staticmethod
    def affine(simplex: Simplex, const: float, linear) -> "BaryPoly":
        """The affine function const + linear . x as a degree-1 polynomial."""
        lin = np.asarray(linear, dtype=float)
        vals = const + simplex.verts @ lin        # value at each vertex
        space = PolySpace(simplex.sdim, 1, 1)
        idx = mono_index(simplex.sdim, 1)
        c = np.zeros(space.nmono)
        for i, v in enumerate(vals):
            e = tuple(1 if j == i else 0 for j in range(simplex.sdim + 1))
            c[idx[e]] = v
        return BaryPoly(space, simplex, c)

    @staticmethod
    def coordinate(simplex: Simplex, axis: int) -> "BaryPoly":
        e = np.zeros(3)
        e[axis] = 1.0
        return BaryPoly.affine(simplex, 0.0, e)

    # -- basic queries -----------------------------------------------------

    @property
    def degree(self) -> int:
        return self.space.degree

    def eval_bary(self, lam) -> np.ndarray:
        V = eval_matrix(self.space.sdim, self.degree, lam)
        out = V @ self.coeffs.T                  # (npts, ncomp)
        return out[0] if out.shape[0] == 1 else out

    def eval(self, x) -> np.ndarray:
        return self.eval_bary(self.simplex.barycentric(x))

    # -- algebra -----------------------------------------------------------

    def raise_degree(self, degree: int) -> "BaryPoly":
        """Re-express at a higher homogeneous degree (multiply by (sum lam)^m)."""
        if degree == self.degree:
            return self
        if degree < self.degree:
            raise ValueError("cannot lower degree")
        # multiply by (lam0+...+lamd) = 1 one step at a time
        cur = self.coeffs
        p = self.degree
        while p < degree:
            ones_lin = np.ones(nmono(self.space.sdim, 1))
            M1 = mult_matrix(self.space.sdim, ones_lin, 1, p)
            cur = (M1 @ cur.T).T
            p += 1
        return BaryPoly(PolySpace(self.space.sdim, degree, self.space.ncomp),
                        self.simplex, cur)

    def __add__(self, other: "BaryPoly") -> "BaryPoly":
        p = max(self.degree, other.degree)
        a, b = self.raise_degree(p), other.raise_degree(p)
        if a.space.ncomp != b.space.ncomp:
            raise ValueError("component mismatch")
        return BaryPoly(a.space, a.simplex, a.coeffs + b.coeffs)

    def __sub__(self, other: "BaryPoly") -> "BaryPoly":
        return self + (other * -1.0)

    def __mul__(self, s) -> "BaryPoly":
        if isinstance(s, BaryPoly):
            return self.product(s)
        return BaryPoly(self.space, self.simplex, self.coeffs * float(s))

    __rmul__ = __mul__

    def product(self, other: "BaryPoly") -> "BaryPoly":
        """Pointwise product; either factor must be scalar-valued."""
        if self.space.ncomp != 1 and other.space.ncomp != 1:
            raise ValueError("product needs a scalar factor")
        scal, vec = (self, other) if self.space.ncomp == 1 else (other, self)
        M = mult_matrix(vec.space.sdim, scal.coeffs[0], scal.degree, vec.degree)
        out = (M @ vec.coeffs.T).T
        return BaryPoly(PolySpace(vec.space.sdim, vec.degree + scal.degree,
                                  vec.space.ncomp), vec.simplex, out)

    def deriv(self, direction) -> "BaryPoly":
        D = deriv_matrix(self.simplex, self.degree, direction)
        out = (D @ self.coeffs.T).T
        return BaryPoly(PolySpace(self.space.sdim, max(self.degree - 1, 0),
                                  self.space.ncomp), self.simplex, out)

    # -- integration -------------------------------------------------------

    def integrate_exact(self) -> np.ndarray:
        """Dirichlet-formula integral over the simplex (physical measure)."""
        w = integral_vector(self.space.sdim, self.degree)
        val = self.coeffs @ w * self.simplex.measure
        return val[0] if self.space.ncomp == 1 else val


def integrate(poly: BaryPoly, rule: "QuadRule | None" = None) -> np.ndarray:
    """Quadrature integral of a polynomial field over its simplex.

    The rule must be exact at least to the polynomial's degree.
    """
    if rule is None:
        rule = simplex_rule(poly.space.sdim, poly.degree)
    if rule.degree < poly.degree:
        raise InsufficientQuadratureDegree(
            f"rule degree {rule.degree} < polynomial degree {poly.degree}")
    vals = eval_matrix(poly.space.sdim, poly.degree, rule.points) @ poly.coeffs.T
    out = rule.weights @ vals * poly.simplex.measure
    return out[0] if poly.space.ncomp == 1 else out


def differentiate(poly: BaryPoly, direction) -> BaryPoly:
    return poly.deriv(direction)


# ---------------------------------------------------------------------------
# quadrature (conical product / collapsed Gauss)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadRule:
    sdim: int
    degree: int
    points: np.ndarray    # (N, sdim+1) barycentric
    weights: np.ndarray   # (N,), sum to 1 (unit-measure simplex)


def _jacobi01(n: int, alpha: int):
    """Gauss-Jacobi nodes/weights on [0,1] for weight (1-x)^alpha."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def simplex_rule(sdim: int, degree: int) -> QuadRule:
    """Conical-product rule exact for polynomials of the given total degree."""
    degree = max(degree, 0)
    n = degree // 2 + 1
    if sdim == 1:
        x, w = _jacobi01(n, 0)
        pts = np.stack([1.0 - x, x], axis=1)
        return QuadRule(1, 2 * n - 1, pts, w)
    if sdim == 2:
        xi, wxi = _jacobi01(n, 1)
        eta, weta = _jacobi01(n, 0)
        L1 = np.repeat(xi, n)
        E = np.tile(eta, n)
        L2 = E * (1.0 - L1)
        L0 = (1.0 - L1) * (1.0 - E)
        w = 2.0 * np.repeat(wxi, n) * np.tile(weta, n)
        pts = np.stack([L0, L1, L2], axis=1)
        return QuadRule(2, 2 * n - 1, pts, w)
    if sdim == 3:
        xi, wxi = _jacobi01(n, 2)
        eta, weta = _jacobi01(n, 1)
        zeta, wz = _jacobi01(n, 0)
        XI, ETA, ZETA = np.meshgrid(xi, eta, zeta, indexing="ij")
        WW = (wxi[:, None, None] * weta[None, :, None] * wz[None, None, :])
        L1 = XI.ravel()
        L2 = (ETA * (1 - XI)).ravel()
        L3 = (ZETA * (1 - ETA) * (1 - XI)).ravel()
        L0 = 1.0 - L1 - L2 - L3
        w = 6.0 * WW.ravel()
        pts = np.stack([L0, L1, L2, L3], axis=1)
        return QuadRule(3, 2 * n - 1, pts, w)
    raise ValueError("sdim must be 1, 2 or 3")


# ---------------------------------------------------------------------------
# constrained subspaces
# ---------------------------------------------------------------------------

@dataclass
class SubspaceBasis:
    """An L^2-orthonormal basis of a subspace, columns in monomial coords."""

    space: PolySpace
    simplex: Simplex
    basis: np.ndarray            # (space.dim, dim)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def orth(self) -> np.ndarray:
        return self.space.to_orth(self.basis)

    def constraint_residual(self, rows: np.ndarray) -> float:
        """Max |constraint| over the basis, relative to row scale."""
        if rows.size == 0 or self.dim == 0:
            return 0.0
        r = rows @ self.basis
        scale = np.abs(rows).sum(axis=1).max()
        return float(np.abs(r).max() / max(scale, 1e-300))


RANK_RTOL = 1e-9


def nullspace_dim_split(rows_orth: np.ndarray, dim: int, rtol: float = RANK_RTOL):
    """Rank/nullspace of constraint rows given in orthonormal coordinates."""
    if rows_orth.shape[0] == 0:
        return 0, np.eye(dim)
    norms = np.linalg.norm(rows_orth, axis=1)
    keep = norms > rtol * max(norms.max(), 1e-300)
    R = rows_orth[keep] / norms[keep, None]
    if R.shape[0] == 0:
        return 0, np.eye(dim)
    _, s, Vt = np.linalg.svd(R, full_matrices=True)
    rank = int((s > rtol * s[0]).sum())
    return rank, Vt[rank:].T


def constrained_subspace(space: PolySpace, simplex: Simplex,
                         constraint_rows: np.ndarray,
                         expected_dim: int | None = None,
                         rtol: float = RANK_RTOL) -> SubspaceBasis:
    """Nullspace of linear functionals on a polynomial space.

    Constraint rows act on monomial coefficients.  The rank decision is made
    in L^2-orthonormal coordinates (relative singular-value threshold), and
    the returned basis is L^2-orthonormal.  DimensionMismatch signals a wrong
    constraint set or a violated dimension formula -- it is the failure
    signal of the verification harness.
    """
    rows = np.asarray(constraint_rows, dtype=float).reshape(-1, space.dim)
    if rows.shape[0]:
        rows_orth = space.functionals_to_orth(rows)
    else:
        rows_orth = np.zeros((0, space.dim))
    rank, null_orth = nullspace_dim_split(rows_orth, space.dim, rtol)
    got = null_orth.shape[1]
    if expected_dim is not None and got != expected_dim:
        raise DimensionMismatch(
            f"subspace of {space} has dim {got}, expected {expected_dim} "
            f"(constraint rank {rank})")
    return SubspaceBasis(space, simplex, space.from_orth(null_orth))


def span_basis(space: PolySpace, simplex: Simplex, vectors: np.ndarray,
               rtol: float = RANK_RTOL) -> SubspaceBasis:
    """L^2-orthonormal basis of the span of the given coefficient columns."""
    V = np.asarray(vectors, dtype=float).reshape(space.dim, -1)
    if V.shape[1] == 0:
        return SubspaceBasis(space, simplex, np.zeros((space.dim, 0)))
    O = space.to_orth(V)
    U, s, _ = np.linalg.svd(O, full_matrices=False)
    rank = int((s > rtol * s[0]).sum()) if s.size else 0
    return SubspaceBasis(space, simplex, space.from_orth(U[:, :rank]))


def orthogonal_complement_rows(space: PolySpace, against: np.ndarray) -> np.ndarray:
    """Constraint rows expressing L^2-orthogonality to given coefficient columns."""
    A = np.asarray(against, dtype=float).reshape(space.dim, -1)
    return space.gram_apply(A).T


def principal_angles(A: SubspaceBasis, B: SubspaceBasis) -> np.ndarray:
    """Principal angles (radians) between two subspaces in the L^2 geometry."""
    if A.space != B.space:
        raise ValueError("subspaces live in different ambient spaces")
    from scipy.linalg import subspace_angles
    if A.dim == 0 or B.dim == 0:
        return np.zeros(0)
    return subspace_angles(A.orth(), B.orth())


def rank_of(matrix: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Numerical rank with a relative singular-value threshold."""
    M = np.asarray(matrix, dtype=float)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int((s > rtol * s[0]).sum())
