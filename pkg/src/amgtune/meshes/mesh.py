"""Polygonal (2D) and Cartesian box (3D) meshes on the unit square/cube.

Text format written by :func:`save_mesh` and read by :func:`load_mesh`::

    # any comment
    dim 2
    vertices <nv>
    x y            (one line per vertex; three coordinates when dim 3)
    cells <nc>
    k i_1 ... i_k  (vertex count then 0-based vertex ids, counter-clockwise)
    coefficients <nc>     (optional section)
    value          (one line per cell)

3D cells are axis-aligned boxes given by 8 vertex ids in the order
(x0y0z0, x1y0z0, x1y1z0, x0y1z0, x0y0z1, x1y0z1, x1y1z1, x0y1z1).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FAMILIES_2D = ("tri", "quad", "hex", "voro")
FAMILIES = FAMILIES_2D + ("cart3d",)
MAX_CELLS = 400_000

# local faces of a box cell, counter-clockwise seen from outside
_BOX_FACES = ((0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (2, 3, 7, 6), (0, 4, 7, 3), (1, 2, 6, 5))


class MeshError(ValueError):
    """Invalid mesh geometry or connectivity."""


@dataclass
class Faces:
    """Interfaces: ``right == -1`` on the boundary; normals point out of ``left``."""

    vertices: list
    left: np.ndarray
    right: np.ndarray
    normal: np.ndarray
    measure: np.ndarray

    @property
    def n(self) -> int:
        return self.left.size

    @property
    def boundary(self) -> np.ndarray:
        return self.right < 0


@dataclass
class PolyMesh:
    vertices: np.ndarray
    cells: list
    family: str = "custom"
    cell_values: np.ndarray | None = None
    _faces: Faces | None = field(default=None, repr=False)
    _geom: tuple | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def faces(self) -> Faces:
        if self._faces is None:
            self._faces = _build_faces_2d(self) if self.dim == 2 else _build_faces_3d(self)
        return self._faces

    def _geometry(self):
        if self._geom is None:
            if self.dim == 2:
                self._geom = _polygon_geometry(self)
            else:
                self._geom = _box_geometry(self)
        return self._geom

    @property
    def volumes(self) -> np.ndarray:
        return self._geometry()[0]

    @property
    def centroids(self) -> np.ndarray:
        return self._geometry()[1]

    @property
    def diameters(self) -> np.ndarray:
        return self._geometry()[2]

    def boundary_vertices(self) -> np.ndarray:
        fc = self.faces
        ids = [v for k in np.flatnonzero(fc.boundary) for v in fc.vertices[k]]
        return np.unique(np.asarray(ids, dtype=np.int64))

    def n_edges(self) -> int:
        return self.faces.n

    def validate(self) -> "PolyMesh":
        for k, cell in enumerate(self.cells):
            if len(set(cell.tolist())) != len(cell):
                raise MeshError(f"cell {k} repeats a vertex")
            if len(cell) < (3 if self.dim == 2 else 8):
                raise MeshError(f"cell {k} has too few vertices")
            if cell.min() < 0 or cell.max() >= self.n_vertices:
                raise MeshError(f"cell {k} references a missing vertex")
        vol = self.volumes
        bad = np.flatnonzero(~(vol > 0.0))
        if bad.size:
            raise MeshError(f"cell {int(bad[0])} has non-positive area/volume")
        self.faces  # connectivity checks
        return self


# --------------------------------------------------------------------------
# geometry
# --------------------------------------------------------------------------

def polygon_area_centroid(xy: np.ndarray):
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        return 0.0, xy.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return area, np.array([cx, cy])


def _diameter(pts: np.ndarray) -> float:
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


def _polygon_geometry(mesh):
    nc = mesh.n_cells
    vol = np.empty(nc)
    cen = np.empty((nc, 2))
    diam = np.empty(nc)
    for k, cell in enumerate(mesh.cells):
        pts = mesh.vertices[cell]
        vol[k], cen[k] = polygon_area_centroid(pts)
        diam[k] = _diameter(pts)
    return vol, cen, diam


def _box_geometry(mesh):
    nc = mesh.n_cells
    vol = np.empty(nc)
    cen = np.empty((nc, 3))
    diam = np.empty(nc)
    for k, cell in enumerate(mesh.cells):
        pts = mesh.vertices[cell]
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        ref = lo + (hi - lo) * np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                                         [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]])
        if not np.allclose(pts, ref, rtol=0, atol=1e-12 * max(1.0, float(np.abs(hi).max()))):
            raise MeshError(f"cell {k} is not an axis-aligned box in the expected vertex order")
        ext = hi - lo
        vol[k] = float(np.prod(ext))
        cen[k] = 0.5 * (lo + hi)
        diam[k] = float(np.linalg.norm(ext))
    return vol, cen, diam


def _build_faces_2d(mesh) -> Faces:
    seen = {}
    verts, left, right, normal, measure = [], [], [], [], []
    X = mesh.vertices
    for k, cell in enumerate(mesh.cells):
        c = cell.tolist()
        for a, b in zip(c, c[1:] + c[:1]):
            key = (a, b) if a < b else (b, a)
            if key in seen:
                f = seen[key]
                if right[f] != -1:
                    raise MeshError(f"edge {key} is shared by more than two cells")
                if verts[f] != [b, a]:
                    raise MeshError(f"cells {left[f]} and {k} have inconsistent orientation")
                right[f] = k
                continue
            seen[key] = len(left)
            d = X[b] - X[a]
            length = float(np.hypot(d[0], d[1]))
            if length == 0.0:
                raise MeshError(f"zero-length edge in cell {k}")
            verts.append([a, b])
            left.append(k)
            right.append(-1)
            normal.append([d[1] / length, -d[0] / length])
            measure.append(length)
    return Faces(verts, np.asarray(left), np.asarray(right), np.asarray(normal), np.asarray(measure))


def _build_faces_3d(mesh) -> Faces:
    seen = {}
    verts, left, right, normal, measure = [], [], [], [], []
    X = mesh.vertices
    for k, cell in enumerate(mesh.cells):
        for lf in _BOX_FACES:
            fv = [int(cell[i]) for i in lf]
            key = tuple(sorted(fv))
            if key in seen:
                f = seen[key]
                if right[f] != -1:
                    raise MeshError(f"face {key} is shared by more than two cells")
                right[f] = k
                continue
            seen[key] = len(left)
            p = X[fv]
            nrm = np.cross(p[1] - p[0], p[3] - p[0])
            area = float(np.linalg.norm(nrm))
            if area == 0.0:
                raise MeshError(f"degenerate face in cell {k}")
            verts.append(fv)
            left.append(k)
            right.append(-1)
            normal.append(nrm / area)
            measure.append(area)
    return Faces(verts, np.asarray(left), np.asarray(right), np.asarray(normal), np.asarray(measure))


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------

def cells_per_side(refinement: int, base: int = 4, growth: float = 2.0) -> int:
    return max(1, int(round(base * growth ** (refinement - 1))))


def generate_mesh(family: str, refinement: int, base: int = 4, growth: float = 2.0, seed: int = 0,
                  max_cells: int = MAX_CELLS) -> PolyMesh:
    """Built-in mesh of the unit square (cube for ``cart3d``).

    The side resolution is ``round(base * growth**(refinement - 1))`` cells,
    so the cell count grows geometrically with ``refinement``.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown mesh family '{family}'")
    if refinement < 1:
        raise ValueError("refinement must be a positive integer")
    N = cells_per_side(refinement, base, growth)
    expected = {"tri": 2 * N * N, "quad": N * N, "hex": N * N + N, "voro": N * N, "cart3d": N ** 3}[family]
    if expected > max_cells:
        raise ValueError(f"refinement {refinement} gives about {expected} cells, above the limit {max_cells}")
    if family == "quad":
        mesh = _quad_mesh(N)
    elif family == "tri":
        mesh = _tri_mesh(N)
    elif family == "hex":
        mesh = _hex_mesh(N)
    elif family == "voro":
        mesh = _voronoi_mesh(N, seed)
    else:
        mesh = _cart3d_mesh(N)
    mesh.family = family
    return mesh.validate()


def _grid_vertices(nx, ny):
    x = np.linspace(0.0, 1.0, nx + 1)
    y = np.linspace(0.0, 1.0, ny + 1)
    X, Y = np.meshgrid(x, y)
    return np.column_stack([X.ravel(), Y.ravel()])


def _quad_mesh(N):
    vid = lambda i, j: j * (N + 1) + i
    cells = [np.array([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
             for j in range(N) for i in range(N)]
    return PolyMesh(_grid_vertices(N, N), cells)


def _tri_mesh(N):
    vid = lambda i, j: j * (N + 1) + i
    cells = []
    for j in range(N):
        for i in range(N):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            cells.append(np.array([a, b, c]))
            cells.append(np.array([a, c, d]))
    return PolyMesh(_grid_vertices(N, N), cells)


def _hex_mesh(N):
    """Staggered brick rows whose long edges are bent into convex hexagons."""
    nx, ny = 2 * N, N
    hy = 1.0 / ny
    X = _grid_vertices(nx, ny).reshape(ny + 1, nx + 1, 2).copy()
    shift = 0.25 * hy
    for j in range(1, ny):
        for i in range(1, nx):
            # corner of the row above iff (i - j) is even
            X[j, i, 1] += shift if (i - j) % 2 == 0 else -shift
    vid = lambda i, j: j * (nx + 1) + i
    cells = []
    for j in range(ny):
        starts = list(range(j % 2, nx, 2))
        if starts[0] != 0:
            starts = [0] + starts
        bounds = starts + [nx]
        for a, b in zip(bounds[:-1], bounds[1:]):
            bottom = [vid(i, j) for i in range(a, b + 1)]
            top = [vid(i, j + 1) for i in range(b, a - 1, -1)]
            cells.append(np.array(bottom + top))
    return PolyMesh(X.reshape(-1, 2), cells)


def _voronoi_mesh(N, seed):
    """Voronoi cells of jittered grid seeds, clipped by mirroring across the four sides."""
    from scipy.spatial import Voronoi

    rng = np.random.default_rng(seed)
    h = 1.0 / N
    g = (np.arange(N) + 0.5) * h
    GX, GY = np.meshgrid(g, g)
    pts = np.column_stack([GX.ravel(), GY.ravel()])
    pts = pts + rng.uniform(-0.3 * h, 0.3 * h, size=pts.shape)
    mirrored = [pts,
                np.column_stack([-pts[:, 0], pts[:, 1]]),
                np.column_stack([2.0 - pts[:, 0], pts[:, 1]]),
                np.column_stack([pts[:, 0], -pts[:, 1]]),
                np.column_stack([pts[:, 0], 2.0 - pts[:, 1]])]
    vor = Voronoi(np.vstack(mirrored))
    V = np.clip(vor.vertices, 0.0, 1.0)
    tol = 1e-9 * h
    V[np.abs(V) < tol] = 0.0
    V[np.abs(V - 1.0) < tol] = 1.0
    keys = np.round(V / (1e-7 * h)).astype(np.int64)
    new_id, used = {}, []
    cells = []
    for i in range(pts.shape[0]):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or not region:
            raise MeshError("unbounded Voronoi region")
        poly = []
        for v in region:
            key = (int(keys[v, 0]), int(keys[v, 1]))
            if key not in new_id:
                new_id[key] = len(used)
                used.append(V[v])
            vid = new_id[key]
            if not poly or poly[-1] != vid:
                poly.append(vid)
        while len(poly) > 1 and poly[0] == poly[-1]:
            poly.pop()
        cells.append(poly)
    verts = np.asarray(used)
    out = []
    for poly in cells:
        arr = np.asarray(poly, dtype=np.int64)
        area, _ = polygon_area_centroid(verts[arr])
        out.append(arr if area > 0 else arr[::-1].copy())
    return PolyMesh(verts, out)


def _cart3d_mesh(N):
    x = np.linspace(0.0, 1.0, N + 1)
    Z, Y, X = np.meshgrid(x, x, x, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    vid = lambda i, j, k: (k * (N + 1) + j) * (N + 1) + i
    cells = []
    for k in range(N):
        for j in range(N):
            for i in range(N):
                cells.append(np.array([vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k),
                                       vid(i, j, k + 1), vid(i + 1, j, k + 1), vid(i + 1, j + 1, k + 1),
                                       vid(i, j + 1, k + 1)]))
    return PolyMesh(verts, cells)


# --------------------------------------------------------------------------
# text I/O
# --------------------------------------------------------------------------

def save_mesh(mesh: PolyMesh, path, cell_values=None) -> None:
    vals = mesh.cell_values if cell_values is None else np.asarray(cell_values, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(f"# mesh family {mesh.family}\n")
        fh.write(f"dim {mesh.dim}\n")
        fh.write(f"vertices {mesh.n_vertices}\n")
        for row in mesh.vertices.tolist():
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")
        fh.write(f"cells {mesh.n_cells}\n")
        for cell in mesh.cells:
            fh.write(f"{len(cell)} " + " ".join(str(int(v)) for v in cell) + "\n")
        if vals is not None:
            fh.write(f"coefficients {len(vals)}\n")
            for v in vals.tolist():
                fh.write(f"{v:.17g}\n")


def load_mesh(path) -> PolyMesh:
    """Read the text mesh format and validate connectivity and geometry."""
    with open(path, "r") as fh:
        lines = [ln.split("#", 1)[0].strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    it = iter(lines)

    def section(name):
        try:
            head = next(it).split()
        except StopIteration as exc:
            raise MeshError(f"{path}: missing '{name}' section") from exc
        if len(head) != 2 or head[0] != name:
            raise MeshError(f"{path}: expected '{name} <count>', got '{' '.join(head)}'")
        return int(head[1])

    dim = section("dim")
    if dim not in (2, 3):
        raise MeshError(f"{path}: dim must be 2 or 3")
    nv = section("vertices")
    try:
        verts = np.array([[float(t) for t in next(it).split()] for _ in range(nv)], dtype=np.float64)
    except (StopIteration, ValueError) as exc:
        raise MeshError(f"{path}: truncated or malformed vertex list") from exc
    if verts.shape != (nv, dim):
        raise MeshError(f"{path}: vertices must have {dim} coordinates")
    nc = section("cells")
    cells = []
    for k in range(nc):
        try:
            toks = [int(t) for t in next(it).split()]
        except (StopIteration, ValueError) as exc:
            raise MeshError(f"{path}: truncated or malformed cell list") from exc
        if not toks or toks[0] != len(toks) - 1:
            raise MeshError(f"{path}: cell {k} vertex count does not match")
        cells.append(np.asarray(toks[1:], dtype=np.int64))
    values = None
    rest = list(it)
    if rest:
        head = rest[0].split()
        if head[0] != "coefficients" or int(head[1]) != nc or len(rest) != nc + 1:
            raise MeshError(f"{path}: malformed coefficients section")
        values = np.array([float(t) for t in rest[1:]])
    mesh = PolyMesh(verts, cells, family="file", cell_values=values)
    if dim == 2:
        for k, cell in enumerate(mesh.cells):
            if len(set(cell.tolist())) != len(cell):
                raise MeshError(f"cell {k} repeats a vertex")
            if cell.min() < 0 or cell.max() >= nv:
                raise MeshError(f"cell {k} references a missing vertex")
            area, _ = polygon_area_centroid(verts[cell])
            if area < 0:
                mesh.cells[k] = cell[::-1].copy()
    return mesh.validate()
