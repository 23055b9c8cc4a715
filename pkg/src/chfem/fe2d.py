"""Trace-complex finite elements on triangles.

Implements the 2D conformal-strain elements (H^3, rot-rot conforming
S2 cap T2, L^2) and the 2D de Rham elements (H^2-plus, rot conforming R^2,
Hermite), their bubble spaces, unisolvency certificates and the bubble
complex exactness checks.  The vector/matrix fields use the face frame
(t1, t2) for components, so the same machinery serves the face DOFs of the
3D H(sym curl) element.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dofs import moment_rows, orthonormal_columns, vertex_jet_rows
from .errors import ExactnessFailure, UnisolvencyFailure
from .poly import (BaryPoly, PolySpace, Simplex, SubspaceBasis,
                   constrained_subspace, deriv_matrix, eval_matrix,
                   legendre_moment_rows, mono_index, mult_matrix, nmono,
                   orthogonal_complement_rows, principal_angles, rank_of,
                   restrict_matrix, span_basis)
from .tensor_ops import P_ST2, U_ST2, FaceCalc, comp_op

FAMILY_MIN_K = {"H3": 6, "RotRotST": 4, "L2scalar": 2,
                "H2plus": 5, "RotR2": 4, "Hermite": 3}

_EDGE_PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass
class EdgeCtx:
    pair: tuple
    simplex: Simplex
    t3: np.ndarray       # tangent, lower -> higher vertex (3D)
    n3: np.ndarray       # outward in-plane normal (3D)
    tf: np.ndarray       # tangent in frame coords (2,)
    nf: np.ndarray       # normal in frame coords (2,)


class TriGeom:
    """A triangle with its face frame and per-edge in-plane frames."""

    def __init__(self, tri: Simplex, n=None, t1=None, t2=None,
                 edge_tangents=None, edge_normals=None):
        self.tri = tri
        v = tri.verts
        if n is None:
            n = np.cross(v[1] - v[0], v[2] - v[0])
            n = n / np.linalg.norm(n)
            t1 = (v[1] - v[0]) / np.linalg.norm(v[1] - v[0])
            t2 = np.cross(n, t1)
        self.n, self.t1, self.t2 = n, t1, t2
        self.calc = FaceCalc(tri, n, t1, t2)
        centroid = v.mean(axis=0)
        self.edges = []
        for pair in _EDGE_PAIRS:
            a, b = pair
            if edge_tangents is not None:
                t3 = edge_tangents[pair]
                n3 = edge_normals[pair]
            else:
                t3 = v[b] - v[a]
                t3 = t3 / np.linalg.norm(t3)
                n3 = np.cross(t3, n)
                mid = (v[a] + v[b]) / 2.0
                if n3 @ (mid - centroid) < 0:
                    t3, n3 = -t3, -n3
            self.edges.append(EdgeCtx(
                pair=pair, simplex=tri.sub(pair), t3=t3, n3=n3,
                tf=np.array([t3 @ t1, t3 @ t2]),
                nf=np.array([n3 @ t1, n3 @ t2])))
        self.diameter = tri.diameter

    @staticmethod
    def from_mesh(mesh, fi: int) -> "TriGeom":
        fr = mesh.face_frame(fi)
        fkey = mesh.faces[fi]
        tans = {}
        nors = {}
        for pair in _EDGE_PAIRS:
            gk = (fkey[pair[0]], fkey[pair[1]])
            tans[pair] = fr.edge_tangents[gk]
            nors[pair] = fr.edge_normals[gk]
        return TriGeom(mesh.face_simplex(fi), fr.n, fr.t1, fr.t2, tans, nors)


def reference_geom() -> TriGeom:
    return TriGeom(Simplex([[0, 0, 0], [1, 0, 0], [0, 1, 0]]))


def _bilinear2(a, b) -> np.ndarray:
    """mat2 field -> scalar field, A -> a^T A b (frame coords)."""
    return np.outer(np.asarray(a), np.asarray(b)).reshape(1, 4)


# ---------------------------------------------------------------------------
# constraint rows for bubble spaces
# ---------------------------------------------------------------------------

def _jet_constraints(geom: TriGeom, space: PolySpace, order: int) -> np.ndarray:
    rows = []
    for vloc in range(3):
        r, _ = vertex_jet_rows(geom.calc.dt, space, order, 1.0, vloc)
        rows.append(r)
    return np.vstack(rows)


def _edge_vanish_constraints(geom: TriGeom, space: PolySpace,
                             order: int) -> np.ndarray:
    """D^beta q|_e = 0 for all |beta| <= order, all components, all edges."""
    rows = []
    p = space.degree
    for ec in geom.edges:
        for total in range(order + 1):
            for a in range(total, -1, -1):
                b = total - a
                D = np.eye(nmono(2, p))
                deg = p
                for axis, rep in ((0, a), (1, b)):
                    for _ in range(rep):
                        D = geom.calc.dt(deg, axis) @ D
                        deg = max(deg - 1, 0)
                R = restrict_matrix(2, deg, ec.pair) @ D
                for c in range(space.ncomp):
                    blk = np.zeros((R.shape[0], space.dim))
                    blk[:, c * space.nmono:(c + 1) * space.nmono] = R
                    rows.append(blk)
    return np.vstack(rows)


def bubble_scalar(geom: TriGeom, degree: int, r1: int, r2: int | None = None,
                  expected: int | None = None) -> SubspaceBasis:
    """B_degree^(r1)(F) or B_degree^(r1,r2)(F) by nullspace construction."""
    space = PolySpace(2, degree, 1)
    rows = [_jet_constraints(geom, space, r1)]
    if r2 is not None:
        rows.append(_edge_vanish_constraints(geom, space, r2))
    return constrained_subspace(space, geom.tri, np.vstack(rows), expected)


def explicit_bubble_scalar(geom: TriGeom, power: int, degsub: int) -> np.ndarray:
    """Coefficient columns of (lam0 lam1 lam2)^power P_degsub."""
    idx3 = mono_index(2, 3)
    bf = np.zeros(nmono(2, 3))
    bf[idx3[(1, 1, 1)]] = 1.0
    cur = np.zeros(nmono(2, 0))
    cur[0] = 1.0
    deg = 0
    for _ in range(power):
        cur = mult_matrix(2, bf, 3, deg) @ cur
        deg += 3
    M = mult_matrix(2, cur, deg, degsub)
    return M @ np.eye(nmono(2, degsub))


def p1plus_columns(geom: TriGeom, degree: int) -> np.ndarray:
    """{1, s, t, s^2 + t^2} in frame coordinates, raised to `degree`."""
    tri = geom.tri
    one = BaryPoly(PolySpace(2, 0, 1), tri, np.ones(1))
    s = BaryPoly.affine(tri, 0.0, geom.t1)
    t = BaryPoly.affine(tri, 0.0, geom.t2)
    rad = s * s + t * t
    cols = [p.raise_degree(degree).coeffs.ravel()
            for p in (one, s, t, rad)]
    return np.stack(cols, axis=1)


def bubble_rot_vec(geom: TriGeom, k: int,
                   expected: int | None = None) -> SubspaceBasis:
    """B_{k+1}^(2,0+)(rot_F, F; R^2): 2-jets at vertices, u and rot_F u
    vanish on all edges.  This is the bubble of the rot-conforming element."""
    space = PolySpace(2, k + 1, 2)
    rows = [_jet_constraints(geom, space, 2),
            _edge_vanish_constraints(geom, space, 0)]
    rot = geom.calc.rotF_2(k + 1)
    for ec in geom.edges:
        rows.append(restrict_matrix(2, k, ec.pair) @ rot)
    return constrained_subspace(space, geom.tri, np.vstack(rows), expected)


def _combo_edge_map(geom: TriGeom, ec: EdgeCtx, p: int) -> np.ndarray:
    """tau (ST2 coords, degree p) -> -d_t(n^T tau t) + t^T rot_F tau on edge."""
    n0 = nmono(2, p)
    unpack = comp_op(U_ST2, n0)
    ntt = comp_op(_bilinear2(ec.nf, ec.tf), n0) @ unpack
    term_a = deriv_matrix(ec.simplex, p, ec.t3) @ restrict_matrix(2, p, ec.pair) @ ntt
    rotm = geom.calc.rotF_m2(p) @ unpack
    t_rot = comp_op(ec.tf.reshape(1, 2), nmono(2, p - 1)) @ rotm
    term_b = restrict_matrix(2, p - 1, ec.pair) @ t_rot
    return term_b - term_a


def bubble_rotrot_st2(geom: TriGeom, k: int,
                      expected: int | None = None) -> SubspaceBasis:
    """B_{k+1}^(2,0)(rot_F rot_F, F; S2 cap T2): bubble of the rot-rot
    conforming element (2-jets, tau = 0 on edges, edge rot-combination = 0)."""
    space = PolySpace(2, k + 1, 2)
    rows = [_jet_constraints(geom, space, 2),
            _edge_vanish_constraints(geom, space, 0)]
    for ec in geom.edges:
        rows.append(_combo_edge_map(geom, ec, k + 1))
    return constrained_subspace(space, geom.tri, np.vstack(rows), expected)


def face_dof_space(kind: str, k: int, geom: TriGeom) -> SubspaceBasis:
    """Face DOF test spaces used by the 3D elements."""
    if kind == "rot_bubble":
        return bubble_rot_vec(geom, k)
    if kind == "rotrot_bubble":
        return bubble_rotrot_st2(geom, k)
    if kind == "B_k10":
        cols = explicit_bubble_scalar(geom, 1, k - 3)
        return span_basis(PolySpace(2, k, 1), geom.tri, cols)
    if kind == "B_km1_0":
        return bubble_scalar(geom, k - 1, 0)
    raise ValueError(kind)


# ---------------------------------------------------------------------------
# element construction
# ---------------------------------------------------------------------------

@dataclass
class Element2D:
    family: str
    k: int
    geom: TriGeom
    space: PolySpace
    rows: np.ndarray
    labels: list
    smin: float
    smax: float
    nodal: np.ndarray
    interior_test_groups: list = field(default_factory=list)

    @property
    def ndof(self) -> int:
        return self.rows.shape[0]

    def count_by_entity(self) -> dict:
        out: dict = {}
        for lab in self.labels:
            out[lab[0]] = out.get(lab[0], 0) + 1
        return out


def _finalize(family, k, geom, space, rows, labels, groups=None) -> Element2D:
    rows = np.vstack(rows)
    if rows.shape[0] != space.dim:
        raise UnisolvencyFailure(
            f"{family} k={k}: {rows.shape[0]} DOFs vs dim {space.dim}")
    rows_orth = space.functionals_to_orth(rows)
    s = np.linalg.svd(rows_orth, compute_uv=False)
    smin, smax = float(s[-1]), float(s[0])
    if smin < 1e-9 * smax:
        raise UnisolvencyFailure(f"{family} k={k}: sv ratio {smin / smax:.2e}")
    nodal = space.from_orth(np.linalg.inv(rows_orth))
    return Element2D(family, k, geom, space, rows, labels, smin, smax, nodal,
                     groups or [])


def _edge_scalar_moments(geom, ec, field_map, deg_field, nmom, label, labels,
                         scale=1.0):
    """Legendre moments on one edge of a derived scalar field."""
    if nmom <= 0:
        return None
    L = legendre_moment_rows(deg_field, nmom)
    rows = scale * (L @ restrict_matrix(2, deg_field, ec.pair) @ field_map)
    labels.extend([("edge", ec.pair, label, m) for m in range(nmom)])
    return rows


def build_element_2d(family: str, k: int, geom: TriGeom | None = None) -> Element2D:
    if family not in FAMILY_MIN_K:
        raise ValueError(f"unknown 2D family {family}")
    if k < FAMILY_MIN_K[family]:
        raise ValueError(f"{family} requires k >= {FAMILY_MIN_K[family]}")
    geom = geom or reference_geom()
    ell = geom.diameter
    builder = {"H3": _build_h3, "RotRotST": _build_rotrot,
               "L2scalar": _build_l2, "H2plus": _build_h2plus,
               "RotR2": _build_rot, "Hermite": _build_hermite}[family]
    return builder(k, geom, ell)


def _build_h3(k, geom, ell):
    space = PolySpace(2, k + 3, 1)
    p = k + 3
    rows, labels = [], []
    for vloc in range(3):
        r, lab = vertex_jet_rows(geom.calc.dt, space, 4, ell, vloc)
        rows.append(r)
        labels.extend([("vertex", vloc) + l[1:] for l in lab])
    ident = np.eye(space.nmono)
    for ec in geom.edges:
        r = _edge_scalar_moments(geom, ec, ident, p, k - 6, "value", labels)
        if r is not None:
            rows.append(r)
        dn = deriv_matrix(geom.tri, p, ec.n3)
        r = _edge_scalar_moments(geom, ec, dn, p - 1, k - 5, "dn", labels, ell)
        if r is not None:
            rows.append(r)
        dnn = deriv_matrix(geom.tri, p - 1, ec.n3) @ dn
        r = _edge_scalar_moments(geom, ec, dnn, p - 2, k - 4, "dnn", labels,
                                 ell ** 2)
        if r is not None:
            rows.append(r)
    tsp = PolySpace(2, k - 6, 1)
    rows.append(moment_rows(space, orthonormal_columns(tsp), tsp))
    labels.extend([("interior", i) for i in range(tsp.dim)])
    return _finalize("H3", k, geom, space, rows, labels)


def _build_rotrot(k, geom, ell):
    space = PolySpace(2, k + 1, 2)       # S2 cap T2 coords
    p = k + 1
    rows, labels = [], []
    for vloc in range(3):
        r, lab = vertex_jet_rows(geom.calc.dt, space, 2, ell, vloc)
        rows.append(r)
        labels.extend([("vertex", vloc) + l[1:] for l in lab])
    for ec in geom.edges:
        if k - 4 > 0:
            L = legendre_moment_rows(p, k - 4)
            R = restrict_matrix(2, p, ec.pair)
            for c in range(2):
                blk = np.zeros(((k - 4), space.dim))
                blk[:, c * space.nmono:(c + 1) * space.nmono] = L @ R
                rows.append(blk)
                labels.extend([("edge", ec.pair, "moment", c, m)
                               for m in range(k - 4)])
        combo = _combo_edge_map(geom, ec, p)
        L = legendre_moment_rows(p - 1, k - 3)
        rows.append(ell * (L @ combo))
        labels.extend([("edge", ec.pair, "rotcombo", m) for m in range(k - 3)])
    # interior: dev curlF curlF (B^(0)_{k-1} cap P1+^perp)  (+)  sym gradF curlF B^(4,2)_{k+3}
    groups = []
    sp0 = PolySpace(2, k - 1, 1)
    perp = orthogonal_complement_rows(sp0, p1plus_columns(geom, k - 1))
    b0 = constrained_subspace(sp0, geom.tri,
                              np.vstack([eval_matrix(2, k - 1, np.eye(3)), perp]))
    dcc = comp_op(P_ST2, nmono(2, k - 3)) @ geom.calc.dev_curlF_curlF_s(k - 1)
    q1sp = PolySpace(2, k - 3, 2)
    q1 = span_basis(q1sp, geom.tri, dcc @ b0.basis)
    rows.append(moment_rows(space, q1.basis, q1sp))
    labels.extend([("interior", "devcc", i) for i in range(q1.dim)])
    groups.append((q1.basis, q1sp))

    b42 = explicit_bubble_scalar(geom, 3, k - 6)
    sgc = comp_op(P_ST2, nmono(2, k + 1)) @ geom.calc.symgradF_curlF_s(k + 3)
    q2sp = PolySpace(2, k + 1, 2)
    q2 = span_basis(q2sp, geom.tri, sgc @ b42)
    rows.append(moment_rows(space, q2.basis, q2sp))
    labels.extend([("interior", "symgradcurl", i) for i in range(q2.dim)])
    groups.append((q2.basis, q2sp))
    return _finalize("RotRotST", k, geom, space, rows, labels, groups)


def _build_l2(k, geom, ell):
    space = PolySpace(2, k - 1, 1)
    rows, labels = [], []
    V = eval_matrix(2, k - 1, np.eye(3))
    rows.append(V)
    labels.extend([("vertex", v, "value") for v in range(3)])
    bub = bubble_scalar(geom, k - 1, 0)
    rows.append(moment_rows(space, bub.basis, space))
    labels.extend([("interior", i) for i in range(bub.dim)])
    return _finalize("L2scalar", k, geom, space, rows, labels)


def _build_h2plus(k, geom, ell):
    space = PolySpace(2, k + 2, 1)
    p = k + 2
    rows, labels = [], []
    for vloc in range(3):
        r, lab = vertex_jet_rows(geom.calc.dt, space, 3, ell, vloc)
        rows.append(r)
        labels.extend([("vertex", vloc) + l[1:] for l in lab])
    ident = np.eye(space.nmono)
    for ec in geom.edges:
        r = _edge_scalar_moments(geom, ec, ident, p, k - 5, "value", labels)
        if r is not None:
            rows.append(r)
        dn = deriv_matrix(geom.tri, p, ec.n3)
        r = _edge_scalar_moments(geom, ec, dn, p - 1, k - 4, "dn", labels, ell)
        if r is not None:
            rows.append(r)
    tsp = PolySpace(2, k - 4, 1)
    rows.append(moment_rows(space, orthonormal_columns(tsp), tsp))
    labels.extend([("interior", i) for i in range(tsp.dim)])
    return _finalize("H2plus", k, geom, space, rows, labels)


def _build_rot(k, geom, ell):
    space = PolySpace(2, k + 1, 2)       # frame components
    p = k + 1
    rows, labels = [], []
    for vloc in range(3):
        r, lab = vertex_jet_rows(geom.calc.dt, space, 2, ell, vloc)
        rows.append(r)
        labels.extend([("vertex", vloc) + l[1:] for l in lab])
    rot = geom.calc.rotF_2(p)
    for ec in geom.edges:
        if k - 4 > 0:
            L = legendre_moment_rows(p, k - 4)
            R = restrict_matrix(2, p, ec.pair)
            for c in range(2):
                blk = np.zeros(((k - 4), space.dim))
                blk[:, c * space.nmono:(c + 1) * space.nmono] = L @ R
                rows.append(blk)
                labels.extend([("edge", ec.pair, "moment", c, m)
                               for m in range(k - 4)])
        r = _edge_scalar_moments(geom, ec, rot, p - 1, k - 3, "rot", labels, ell)
        if r is not None:
            rows.append(r)
    groups = []
    qsp = PolySpace(2, k - 4, 2)
    curl = geom.calc.curlF_s(k - 3)
    q1 = span_basis(qsp, geom.tri, curl @ np.eye(nmono(2, k - 3)))
    rows.append(moment_rows(space, q1.basis, qsp))
    labels.extend([("interior", "curl", i) for i in range(q1.dim)])
    groups.append((q1.basis, qsp))
    b31 = explicit_bubble_scalar(geom, 2, k - 4)
    gsp = PolySpace(2, k + 1, 2)
    q2 = span_basis(gsp, geom.tri, geom.calc.gradF_s(k + 2) @ b31)
    rows.append(moment_rows(space, q2.basis, gsp))
    labels.extend([("interior", "grad", i) for i in range(q2.dim)])
    groups.append((q2.basis, gsp))
    return _finalize("RotR2", k, geom, space, rows, labels, groups)


def _build_hermite(k, geom, ell):
    space = PolySpace(2, k, 1)
    rows, labels = [], []
    for vloc in range(3):
        r, lab = vertex_jet_rows(geom.calc.dt, space, 1, ell, vloc)
        rows.append(r)
        labels.extend([("vertex", vloc) + l[1:] for l in lab])
    ident = np.eye(space.nmono)
    for ec in geom.edges:
        r = _edge_scalar_moments(geom, ec, ident, k, k - 3, "value", labels)
        if r is not None:
            rows.append(r)
    tsp = PolySpace(2, k - 3, 1)
    rows.append(moment_rows(space, orthonormal_columns(tsp), tsp))
    labels.extend([("interior", i) for i in range(tsp.dim)])
    return _finalize("Hermite", k, geom, space, rows, labels)


# ---------------------------------------------------------------------------
# bubble complex exactness
# ---------------------------------------------------------------------------

def verify_bubble_complex_2d(which: str, k: int,
                             geom: TriGeom | None = None) -> dict:
    """Rank checks for the exact 2D bubble complexes.

    conformal_strain: B^(4,2)_{k+3} -> B^(2,0)(rotrot; S2 cap T2) ->
                      B^(0)_{k-1} cap P1+^perp -> 0           (k >= 6)
    derham:           B^(3,1)_{k+2} -> B^(2,0+)(rot; R^2) ->
                      B^(1,0)_k cap P0^perp -> 0               (k >= 5)
    """
    geom = geom or reference_geom()
    calc = geom.calc
    tri = geom.tri

    if which == "conformal_strain":
        if k < 6:
            raise ValueError("conformal strain complex needs k >= 6")
        head_cols = explicit_bubble_scalar(geom, 3, k - 6)
        mid = bubble_rotrot_st2(geom, k)
        mid_sp = PolySpace(2, k + 1, 2)
        op1 = comp_op(P_ST2, nmono(2, k + 1)) @ calc.symgradF_curlF_s(k + 3)
        op2 = calc.rotrotF_m2(k + 1) @ comp_op(U_ST2, nmono(2, k + 1))
        tail_sp = PolySpace(2, k - 1, 1)
        perp = orthogonal_complement_rows(tail_sp, p1plus_columns(geom, k - 1))
        tail = constrained_subspace(
            tail_sp, tri,
            np.vstack([eval_matrix(2, k - 1, np.eye(3)), perp]))
    elif which == "derham":
        if k < 5:
            raise ValueError("de Rham bubble complex needs k >= 5")
        head_cols = explicit_bubble_scalar(geom, 2, k - 4)
        mid = bubble_rot_vec(geom, k)
        mid_sp = PolySpace(2, k + 1, 2)
        op1 = calc.gradF_s(k + 2)
        op2 = calc.rotF_2(k + 1)
        tail_sp = PolySpace(2, k, 1)
        ones = BaryPoly(PolySpace(2, 0, 1), tri, np.ones(1)).raise_degree(k)
        k10 = explicit_bubble_scalar(geom, 1, k - 3)
        tail = constrained_subspace(
            tail_sp, tri,
            np.vstack([orthogonal_complement_rows(
                tail_sp, span_basis(tail_sp, tri, k10).basis) * 0,
                eval_matrix(2, k, np.eye(3)),
                _edge_vanish_constraints(geom, tail_sp, 0),
                orthogonal_complement_rows(tail_sp,
                                           ones.coeffs.reshape(-1, 1))]))
    else:
        raise ValueError(which)

    img1 = span_basis(mid_sp, tri, op1 @ head_cols)
    head_dim = rank_of(PolySpace(2, head_cols.shape[0] // 1, 1).to_orth(head_cols)
                       if False else head_cols)
    # op1 injectivity on the head space
    head_dim = np.linalg.matrix_rank(head_cols, tol=1e-10)

    # composition
    comp = op2 @ op1 @ head_cols
    comp_norm = float(np.abs(comp).max() / max(np.abs(head_cols).max(), 1e-300))

    # image of op1 lies inside mid and equals kernel of op2 on mid
    ang_sub = principal_angles(img1, mid) if img1.dim else np.zeros(0)
    containment = float(ang_sub[img1.dim - mid.dim - 1]) if False else None
    # containment: largest principal angle between img1 and its projection
    # on mid should vanish only if img1 subset mid; use rank test instead
    joint = np.hstack([mid.basis, img1.basis])
    joint_rank = rank_of(mid_sp.to_orth(joint))
    contained = joint_rank == mid.dim

    rank2 = rank_of(tail_sp.to_orth(op2 @ mid.basis))
    img2 = span_basis(tail_sp, tri, op2 @ mid.basis)
    ang_tail = principal_angles(img2, tail) if img2.dim and tail.dim else np.zeros(0)

    report = {
        "which": which,
        "k": k,
        "dims": {"head": int(head_dim), "mid": mid.dim, "tail": tail.dim},
        "rank_op1": img1.dim,
        "rank_op2": rank2,
        "composition_residual": comp_norm,
        "op1_injective": img1.dim == head_dim,
        "image1_in_mid": contained,
        "kernel2_equals_image1": rank2 == mid.dim - img1.dim,
        "image2_equals_tail": (img2.dim == tail.dim
                               and (ang_tail.size == 0
                                    or float(ang_tail.max()) < 1e-9)),
    }
    ok = (report["op1_injective"] and report["image1_in_mid"]
          and report["kernel2_equals_image1"] and report["image2_equals_tail"]
          and comp_norm < 1e-11)
    report["pass"] = ok
    if not ok:
        raise ExactnessFailure(f"2D bubble complex {which} k={k}: {report}")
    return report
