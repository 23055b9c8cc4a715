"""Tetrahedral mesh topology and deterministic geometric frames.

Frames are functions of global vertex indices and coordinates only, so any
two tets adjacent to a shared edge/face compute bit-identical frames; this is
what makes inter-element degrees of freedom single-valued.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DanglingIndex, DegenerateTet, NonManifoldFace
from .poly import Simplex

_AUX = np.array([0.48, 0.62, 0.62])
_AUX = _AUX / np.linalg.norm(_AUX)


@dataclass(frozen=True)
class EdgeFrame:
    t: np.ndarray
    n1: np.ndarray
    n2: np.ndarray


@dataclass(frozen=True)
class FaceFrame:
    n: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    # per boundary edge of the face (keyed by the edge's sorted vertex pair):
    # (t_bd, n_bd) with n_bd x t_bd = n and n_bd the outward in-plane normal
    edge_tangents: dict
    edge_normals: dict


def _signed_volume(pts) -> float:
    e = pts[1:] - pts[0]
    return float(np.linalg.det(e)) / 6.0


class MeshTopology:
    """Immutable tetrahedral mesh with full incidence tables."""

    def __init__(self, vertices, tets):
        self.vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
        nv = len(self.vertices)
        tets_in = [tuple(int(i) for i in t) for t in tets]
        if not tets_in:
            raise DegenerateTet("mesh must contain at least one tet")
        for t in tets_in:
            if len(set(t)) != 4:
                raise DanglingIndex(f"tet {t} repeats a vertex")
            if any(i < 0 or i >= nv for i in t):
                raise DanglingIndex(f"tet {t} out of range (0..{nv - 1})")

        self.tets = [self._normalize(t) for t in tets_in]

        edge_set, face_set = set(), set()
        face_count: dict = {}
        for t in self.tets:
            s = sorted(t)
            for i in range(4):
                for j in range(i + 1, 4):
                    edge_set.add((s[i], s[j]))
            for f in ((s[0], s[1], s[2]), (s[0], s[1], s[3]),
                      (s[0], s[2], s[3]), (s[1], s[2], s[3])):
                face_set.add(f)
                face_count[f] = face_count.get(f, 0) + 1
        for f, c in face_count.items():
            if c > 2:
                raise NonManifoldFace(f"face {f} shared by {c} tets")

        self.edges = sorted(edge_set)
        self.faces = sorted(face_set)
        self.edge_index = {e: i for i, e in enumerate(self.edges)}
        self.face_index = {f: i for i, f in enumerate(self.faces)}

        self.tet_edges = []          # per tet: 6 global edge ids (sorted keys asc)
        self.tet_faces = []          # per tet: 4 global face ids (sorted keys asc)
        self.face_tets = [[] for _ in self.faces]
        for ti, t in enumerate(self.tets):
            s = sorted(t)
            eids = [self.edge_index[(s[i], s[j])]
                    for i in range(4) for j in range(i + 1, 4)]
            fkeys = sorted([(s[0], s[1], s[2]), (s[0], s[1], s[3]),
                            (s[0], s[2], s[3]), (s[1], s[2], s[3])])
            fids = [self.face_index[f] for f in fkeys]
            self.tet_edges.append(eids)
            self.tet_faces.append(fids)
            for fi in fids:
                self.face_tets[fi].append(ti)

        self.boundary_faces = np.array([len(ts) == 1 for ts in self.face_tets])
        self._edge_frames: dict = {}
        self._face_frames: dict = {}
        self._simplices: list = [None] * len(self.tets)

    # -- construction helpers ----------------------------------------------

    def _normalize(self, t) -> tuple:
        """Even permutation of the sorted vertex list with positive volume."""
        s = tuple(sorted(t))
        pts = self.vertices[list(s)]
        vol = _signed_volume(pts)
        if abs(vol) < 1e-14 * max(np.abs(pts).max(), 1.0) ** 3:
            raise DegenerateTet(f"tet {t} has zero volume")
        if vol > 0:
            return s
        return (s[0], s[1], s[3], s[2])  # odd swap of an odd ordering

    # -- counts --------------------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    @property
    def num_tets(self) -> int:
        return len(self.tets)

    def euler_characteristic(self) -> int:
        return (self.num_vertices - self.num_edges
                + self.num_faces - self.num_tets)

    def mean_edge_length(self) -> float:
        acc = 0.0
        for a, b in self.edges:
            acc += float(np.linalg.norm(self.vertices[b] - self.vertices[a]))
        return acc / len(self.edges)

    # -- geometry ------------------------------------------------------------

    def tet_simplex(self, ti: int) -> Simplex:
        if self._simplices[ti] is None:
            self._simplices[ti] = Simplex(self.vertices[list(self.tets[ti])])
        return self._simplices[ti]

    def face_simplex(self, fi: int) -> Simplex:
        return Simplex(self.vertices[list(self.faces[fi])])

    def edge_simplex(self, ei: int) -> Simplex:
        return Simplex(self.vertices[list(self.edges[ei])])

    def barycentric(self, ti: int, x) -> np.ndarray:
        return self.tet_simplex(ti).barycentric(x)

    # -- frames ----------------------------------------------------------------

    def edge_frame(self, ei: int) -> EdgeFrame:
        """Deterministic orthonormal edge frame with n1 x n2 = t.

        t points from the lower to the higher global vertex index; n1 is the
        projection of a fixed auxiliary vector onto the t-orthogonal plane.
        """
        if ei in self._edge_frames:
            return self._edge_frames[ei]
        a, b = self.edges[ei]
        t = self.vertices[b] - self.vertices[a]
        t = t / np.linalg.norm(t)
        aux = _AUX if abs(_AUX @ t) <= 1.0 - 1e-8 else np.array([1.0, 0.0, 0.0])
        n1 = aux - (aux @ t) * t
        n1 = n1 / np.linalg.norm(n1)
        n2 = np.cross(t, n1)
        fr = EdgeFrame(t=t, n1=n1, n2=n2)
        self._edge_frames[ei] = fr
        return fr

    def face_frame(self, fi: int) -> FaceFrame:
        """Deterministic face frame with t1 x t2 = n.

        The normal sign follows the cyclic order of the sorted global indices
        and t1 lies along the lowest-index edge of the face.
        """
        if fi in self._face_frames:
            return self._face_frames[fi]
        i, j, k = self.faces[fi]
        vi, vj, vk = self.vertices[i], self.vertices[j], self.vertices[k]
        n = np.cross(vj - vi, vk - vi)
        n = n / np.linalg.norm(n)
        t1 = (vj - vi) / np.linalg.norm(vj - vi)
        t2 = np.cross(n, t1)
        centroid = (vi + vj + vk) / 3.0
        edge_tangents, edge_normals = {}, {}
        for (a, b) in ((i, j), (i, k), (j, k)):
            tb = self.vertices[b] - self.vertices[a]
            tb = tb / np.linalg.norm(tb)
            nb = np.cross(tb, n)
            mid = (self.vertices[a] + self.vertices[b]) / 2.0
            if nb @ (mid - centroid) < 0:
                tb, nb = -tb, -nb
            edge_tangents[(a, b)] = tb
            edge_normals[(a, b)] = nb
        fr = FaceFrame(n=n, t1=t1, t2=t2,
                       edge_tangents=edge_tangents, edge_normals=edge_normals)
        self._face_frames[fi] = fr
        return fr

    def face_edges(self, fi: int) -> list:
        i, j, k = self.faces[fi]
        return [self.edge_index[e] for e in ((i, j), (i, k), (j, k))]

    def outward_normal(self, ti: int, fi: int) -> np.ndarray:
        """Face normal oriented outward with respect to tet ti."""
        n = self.face_frame(fi).n
        fverts = self.faces[fi]
        opp = [v for v in self.tets[ti] if v not in fverts][0]
        centroid = self.vertices[list(fverts)].mean(axis=0)
        return n if n @ (centroid - self.vertices[opp]) > 0 else -n

    # -- i/o -----------------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({"vertices": self.vertices.tolist(),
                           "tets": [list(t) for t in self.tets]})

    @staticmethod
    def from_json(text: str) -> "MeshTopology":
        data = json.loads(text)
        return MeshTopology(data["vertices"], data["tets"])


def build_mesh(vertices, tets) -> MeshTopology:
    return MeshTopology(vertices, tets)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

_PERMS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))


def box(nx: int, ny: int, nz: int, lengths=(1.0, 1.0, 1.0)) -> MeshTopology:
    """Axis-aligned box split into 6 tets per cell (Kuhn/Freudenthal).

    Each cell is cut along the main diagonal; the pattern is identical in all
    cells, so shared faces receive the same diagonal from both sides.
    """
    nxv, nyv, nzv = nx + 1, ny + 1, nz + 1
    hx, hy, hz = lengths[0] / nx, lengths[1] / ny, lengths[2] / nz

    def vid(i, j, k):
        return i + nxv * (j + nyv * k)

    verts = np.zeros((nxv * nyv * nzv, 3))
    for k in range(nzv):
        for j in range(nyv):
            for i in range(nxv):
                verts[vid(i, j, k)] = (i * hx, j * hy, k * hz)

    tets = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                corner = np.array([i, j, k])
                for perm in _PERMS:
                    path = [corner.copy()]
                    for axis in perm:
                        nxt = path[-1].copy()
                        nxt[axis] += 1
                        path.append(nxt)
                    tets.append([vid(*p) for p in path])
    return MeshTopology(verts, tets)


def single_tet(vertices=None) -> MeshTopology:
    if vertices is None:
        vertices = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    return MeshTopology(vertices, [[0, 1, 2, 3]])


def two_tets() -> MeshTopology:
    """Two tets sharing the face {1,2,3}."""
    verts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]]
    return MeshTopology(verts, [[0, 1, 2, 3], [1, 2, 3, 4]])
