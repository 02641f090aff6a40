"""P1 finite elements on structured triangular meshes.

Node ordering is lexicographic by (y, x): node ``(i, j)`` of an
``(N+1) x (N+1)`` grid has index ``j * (N + 1) + i``. Each grid square is
split by its diagonal from lower-left to upper-right, giving triangles
``(p00, p10, p11)`` and ``(p00, p11, p01)``, both counterclockwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateTriangle, EmptyInactiveSet, UnsupportedElement


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray        # (V, 2)
    triangles: np.ndarray       # (T, 3), counterclockwise
    boundary_edges: np.ndarray  # (E_b, 2), oriented with the domain on the left

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    def areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges(self):
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def boundary_nodes(self):
        return np.unique(self.boundary_edges)

    def euler_characteristic(self):
        return self.n_vertices - len(self.edges()) + len(self.triangles)

    def check(self):
        """Raise ``DegenerateTriangle`` on non-positive areas; return self."""
        areas = self.areas()
        if np.any(areas <= 0):
            bad = int(np.argmin(areas))
            raise DegenerateTriangle(f"triangle {bad} has area {areas[bad]:.3e}")
        return self


def _grid(n_int, lo, hi, radial=False):
    s = np.linspace(lo, hi, n_int + 1)
    X, Y = np.meshgrid(s, s)  # rows follow y, so ravel() is (y, x) lexicographic
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((n_int + 1) ** 2).reshape(n_int + 1, n_int + 1)
    p00 = idx[:-1, :-1].ravel()
    p10 = idx[:-1, 1:].ravel()
    p01 = idx[1:, :-1].ravel()
    p11 = idx[1:, 1:].ravel()
    anti = np.zeros(p00.shape, dtype=bool)
    if radial:
        # squares in the 2nd/4th quadrants use the other diagonal
        cx = 0.5 * (verts[p00, 0] + verts[p11, 0])
        cy = 0.5 * (verts[p00, 1] + verts[p11, 1])
        anti = cx * cy < 0
    main = ~anti
    tris = np.concatenate([
        np.column_stack([p00, p10, p11])[main], np.column_stack([p00, p11, p01])[main],
        np.column_stack([p00, p10, p01])[anti], np.column_stack([p10, p11, p01])[anti],
    ])
    return verts, tris


def boundary_edges(triangles):
    """Edges used by exactly one triangle, keeping the triangle's orientation."""
    t = np.asarray(triangles)
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    keys = np.sort(directed, axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    return directed[counts[inverse.ravel()] == 1]


def _n_intervals(h, length):
    n = length / h
    if abs(n - round(n)) > 1e-9 or round(n) < 1:
        raise ValueError(f"h={h} does not divide the side length {length}")
    return int(round(n))


def structured_square_mesh(h) -> TriMesh:
    """Uniform triangulation of the unit square with spacing ``h``."""
    verts, tris = _grid(_n_intervals(h, 1.0), 0.0, 1.0)
    return TriMesh(verts, tris, boundary_edges(tris)).check()


def disc_mesh(h) -> TriMesh:
    """Structured mesh of [-1, 1]^2 (spacing ``h``) mapped radially onto the unit disc.

    The map ``v -> v * max(|x|, |y|) / |v|_2`` sends each square ring onto a
    circle, so boundary vertices land exactly on the unit circle. Diagonals
    point away from the origin in every quadrant (lower-left to upper-right
    in the 1st/3rd, upper-left to lower-right in the 2nd/4th) so that no
    triangle has all three vertices on the circle.
    """
    verts, tris = _grid(_n_intervals(h, 2.0), -1.0, 1.0, radial=True)
    r2 = np.linalg.norm(verts, axis=1)
    rinf = np.max(np.abs(verts), axis=1)
    scale = np.divide(rinf, r2, out=np.ones_like(r2), where=r2 > 0)
    mapped = verts * scale[:, None]
    return TriMesh(mapped, tris, boundary_edges(tris)).check()


@dataclass(frozen=True)
class FemOperators:
    M: sp.csr_matrix
    K: sp.csr_matrix
    L: sp.csr_matrix
    Q: sp.csr_matrix


_LOCAL_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0
_EDGE_MASS = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0


def assemble(mesh: TriMesh) -> FemOperators:
    """Mass, stiffness, ``L = K + M`` and boundary mass matrices (exact P1 integrals)."""
    areas = mesh.check().areas()
    t = mesh.triangles
    p = mesh.vertices[t]
    n = mesh.n_vertices
    # gradients of barycentric coordinates: grad phi_a = rot90(p_c - p_b) / (2 area)
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grads = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2.0 * areas[:, None, None])
    Ke = areas[:, None, None] * np.einsum("tad,tbd->tab", grads, grads)
    Me = areas[:, None, None] * _LOCAL_MASS[None]
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    M = sp.csr_matrix((Me.ravel(), (rows, cols)), shape=(n, n))
    K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(n, n))

    be = mesh.boundary_edges
    lengths = np.linalg.norm(mesh.vertices[be[:, 1]] - mesh.vertices[be[:, 0]], axis=1)
    Qe = lengths[:, None, None] * _EDGE_MASS[None]
    brows = np.repeat(be, 2, axis=1).ravel()
    bcols = np.tile(be, (1, 2)).ravel()
    Q = sp.csr_matrix((Qe.ravel(), (brows, bcols)), shape=(n, n))
    return FemOperators(M, K, (K + M).tocsr(), Q)


def mass_spectral_bounds(element_type="P1"):
    """Interval containing the spectrum of ``diag(M)^{-1} M`` for the element type."""
    if element_type.upper() not in ("P1", "P1-TRIANGLE", "P1_TRIANGLE"):
        raise UnsupportedElement(f"no mass-matrix bounds for element {element_type!r}")
    return (0.5, 2.0)


def interpolate(mesh: TriMesh, f):
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    return np.broadcast_to(np.asarray(f(x, y), dtype=float), x.shape).copy()


def active_set_disc(mesh: TriMesh, radius=0.5):
    """Nodes treated as active: distance at most ``radius`` from the origin."""
    return np.linalg.norm(mesh.vertices, axis=1) <= radius + 1e-12


def restrict_to_inactive(M, K, active):
    """``(M[i, :], M[i, i], K[i, i])`` over inactive nodes ``i``, in mesh order."""
    active = np.asarray(active, dtype=bool)
    inactive = np.flatnonzero(~active)
    if inactive.size == 0:
        raise EmptyInactiveSet("every node is active")
    M = sp.csr_matrix(M)
    K = sp.csr_matrix(K)
    M_rows = M[inactive]
    return M_rows.tocsr(), M_rows[:, inactive].tocsr(), K[inactive][:, inactive].tocsr()


def write_mesh(path, mesh: TriMesh):
    """ASCII format: section headers followed by one record per line."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        fh.write(f"triangles {len(mesh.triangles)}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")
        fh.write(f"boundary_edges {len(mesh.boundary_edges)}\n")
        for a, b in mesh.boundary_edges:
            fh.write(f"{a} {b}\n")
    return path


def read_mesh(path) -> TriMesh:
    lines = Path(path).read_text().split("\n")
    pos = 0
    sections = {}
    for name, dtype in (("vertices", float), ("triangles", int), ("boundary_edges", int)):
        head, count = lines[pos].split()
        if head != name:
            raise ValueError(f"expected section {name!r}, found {head!r}")
        count = int(count)
        block = lines[pos + 1: pos + 1 + count]
        sections[name] = np.array([[dtype(x) for x in ln.split()] for ln in block], dtype=dtype)
        pos += 1 + count
    width = {"vertices": 2, "triangles": 3, "boundary_edges": 2}
    for name, arr in sections.items():
        sections[name] = arr.reshape(-1, width[name])
    return TriMesh(sections["vertices"], sections["triangles"], sections["boundary_edges"])
