"""Builders for degree-of-freedom functional rows.

Conventions shared by the 2D and 3D elements:
  - moment DOFs are taken against the *unit-measure* integral of the entity
    (edge/face/interior), with L^2-orthonormal test bases, so they are
    scale-free and deterministic given the entity's global data;
  - point-derivative DOFs are scaled by scale^|alpha| to keep DOF matrices
    well conditioned (scaling a functional does not change unisolvency).
"""

from __future__ import annotations

import numpy as np

from .poly import PolySpace, eval_matrix, mixed_gram, nmono


def graded_multiindices(nvars: int, max_order: int):
    """All derivative multi-indices with |alpha| <= max_order, graded-lex."""
    out = []
    for total in range(max_order + 1):
        def rec(prefix, left, slots):
            if slots == 1:
                out.append(tuple(prefix) + (left,))
                return
            for head in range(left, -1, -1):
                rec(prefix + [head], left - head, slots - 1)
        rec([], total, nvars)
    return out


def vertex_jet_rows(derivs, space: PolySpace, order: int, scale: float,
                    vloc: int):
    """Rows D^alpha(.)(x_vloc) for all |alpha| <= order and all components.

    `derivs(degree, axis)` returns the directional-derivative matrix for the
    ambient calculus (Cartesian axes in 3D, frame axes on a face).  Rows are
    ordered alpha-major (graded-lex), component-minor.
    """
    sdim, p, nc = space.sdim, space.degree, space.ncomp
    alphas = graded_multiindices(sdim, order)
    rows = np.zeros((len(alphas) * nc, space.dim))
    labels = []
    e = np.zeros((1, sdim + 1))
    for ai, alpha in enumerate(alphas):
        D = np.eye(nmono(sdim, p))
        deg = p
        for axis, rep in enumerate(alpha):
            for _ in range(rep):
                D = derivs(deg, axis) @ D
                deg = max(deg - 1, 0)
        ev = np.zeros((1, sdim + 1))
        ev[0, vloc] = 1.0
        row_s = (eval_matrix(sdim, deg, ev) @ D) * scale ** sum(alpha)
        for c in range(nc):
            rows[ai * nc + c, c * space.nmono:(c + 1) * space.nmono] = row_s
            labels.append(("vertex_deriv", alpha, c))
    return rows, labels


def moment_rows(field_space: PolySpace, test_coeffs: np.ndarray,
                test_space: PolySpace) -> np.ndarray:
    """Rows (f -> unit-measure L^2 inner product with each test column)."""
    Q = np.asarray(test_coeffs, dtype=float).reshape(test_space.dim, -1)
    m = Q.shape[1]
    if field_space.sdim != test_space.sdim or field_space.ncomp != test_space.ncomp:
        raise ValueError("field/test space mismatch")
    G = mixed_gram(field_space.sdim, test_space.degree, field_space.degree)
    Q3 = Q.reshape(test_space.ncomp, test_space.nmono, m)
    rows = np.einsum("cqm,qf->mcf", Q3, G)
    return rows.reshape(m, field_space.dim)


def orthonormal_columns(space: PolySpace) -> np.ndarray:
    """An L^2-orthonormal basis of the full space (deterministic)."""
    return space.from_orth(np.eye(space.dim))
