"""Uniform triangulations of the unit square with face/skeleton connectivity.

Meshes are immutable after construction.  Faces carry the adjacency and
orientation conventions used by all skeleton integrals: the stored unit
normal points out of the face's first adjacent element.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Face:
    """A mesh edge together with its adjacency data.

    ``elements`` holds one index for boundary faces, two for interior ones.
    ``normal`` is the unit outward normal of ``elements[0]`` on this face.
    """

    vertices: tuple[int, int]
    elements: tuple[int, ...]
    normal: np.ndarray
    length: float

    @property
    def is_boundary(self) -> bool:
        return len(self.elements) == 1


class Mesh:
    """Conforming simplicial triangulation of [0, 1]^2.

    Stores vertices, positively oriented element triples, and the full face
    list; exposes flat numpy views used by vectorized assembly:

    - ``face_elems``: (nf, 2) int, second entry -1 on boundary faces
    - ``face_normals``: (nf, 2), outward w.r.t. ``face_elems[:, 0]``
    - ``face_lengths``, ``interior_mask``
    """

    def __init__(self, vertices, elements, level=0):
        vertices = np.asarray(vertices, dtype=float)
        elements = np.asarray(elements, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise ValueError("vertices must be an (nv, 2) array")
        if elements.ndim != 2 or elements.shape[1] != 3:
            raise ValueError("elements must be an (ne, 3) array")

        p = vertices[elements]              # (ne, 3, 2)
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        signed_area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        if np.any(signed_area <= 0.0):
            raise ValueError("all elements must be nondegenerate and positively oriented")

        self.vertices = vertices
        self.elements = elements
        self.level = int(level)
        self.element_areas = signed_area
        edge_vecs = np.stack([e1, e2, p[:, 2] - p[:, 1]], axis=1)
        self.element_diameters = np.linalg.norm(edge_vecs, axis=2).max(axis=1)

        self._build_faces()
        for arr in (self.vertices, self.elements, self.element_areas,
                    self.element_diameters, self.face_vertices, self.face_elems,
                    self.face_normals, self.face_lengths, self.interior_mask):
            arr.flags.writeable = False

    def _build_faces(self):
        by_key = {}                         # sorted vertex pair -> face record
        order = []
        verts = self.vertices
        for k, tri in enumerate(self.elements):
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (a, b) if a < b else (b, a)
                rec = by_key.get(key)
                if rec is None:
                    t = verts[b] - verts[a]
                    length = float(np.hypot(t[0], t[1]))
                    # CCW element orientation => outward normal is the
                    # clockwise rotation of the directed edge tangent.
                    normal = np.array([t[1], -t[0]]) / length
                    by_key[key] = [(int(a), int(b)), [k], normal, length]
                    order.append(key)
                elif len(rec[1]) == 1:
                    rec[1].append(k)
                else:
                    raise ValueError(f"edge {key} shared by more than two elements (nonconforming mesh)")

        nf = len(order)
        self.faces = []
        self.face_vertices = np.empty((nf, 2), dtype=np.int64)
        self.face_elems = np.full((nf, 2), -1, dtype=np.int64)
        self.face_normals = np.empty((nf, 2))
        self.face_lengths = np.empty(nf)
        self.interior_mask = np.zeros(nf, dtype=bool)
        for f, key in enumerate(order):
            vpair, elems, normal, length = by_key[key]
            self.faces.append(Face(vpair, tuple(elems), normal, length))
            self.face_vertices[f] = vpair
            self.face_elems[f, : len(elems)] = elems
            self.face_normals[f] = normal
            self.face_lengths[f] = length
            self.interior_mask[f] = len(elems) == 2

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def max_diameter(self) -> float:
        return float(self.element_diameters.max())


def build_criss_cross(n, diagonal="ne"):
    """Mesh the unit square with an n-by-n grid, each cell split by one diagonal.

    Produces 2*n^2 triangles on (n+1)^2 vertices.  ``diagonal`` selects the
    split direction: "ne" runs bottom-left to top-right, "nw" the other way.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if diagonal not in ("ne", "nw"):
        raise ValueError("diagonal must be 'ne' or 'nw'")

    coords = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    elements = []
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            if diagonal == "ne":
                elements.append((v00, v10, v11))
                elements.append((v00, v11, v01))
            else:
                elements.append((v00, v10, v01))
                elements.append((v10, v11, v01))
    return Mesh(vertices, elements, level=0)


def refine(mesh):
    """Uniform red refinement: each triangle splits into four via edge midpoints."""
    vertices = [tuple(v) for v in mesh.vertices]
    midpoint = {}

    def mid(a, b):
        key = (a, b) if a < b else (b, a)
        m = midpoint.get(key)
        if m is None:
            m = len(vertices)
            va, vb = mesh.vertices[a], mesh.vertices[b]
            vertices.append(((va[0] + vb[0]) / 2.0, (va[1] + vb[1]) / 2.0))
            midpoint[key] = m
        return m

    elements = []
    for a, b, c in mesh.elements:
        mab, mbc, mca = mid(a, b), mid(b, c), mid(c, a)
        elements.extend([(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)])
    return Mesh(np.array(vertices), elements, level=mesh.level + 1)


def skeleton(mesh):
    """Return the mesh's face list after re-validating its adjacency invariants."""
    counts = np.where(mesh.interior_mask, 2, 1)
    if counts.sum() != 3 * mesh.n_elements:
        raise ValueError("face/element adjacency is inconsistent (nonconforming mesh)")
    return mesh.faces


def dump_off(mesh) -> str:
    """Plain-text OFF-style listing: header, vertices, then element triples."""
    lines = ["OFF", f"{len(mesh.vertices)} {mesh.n_elements} 0"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.elements]
    return "\n".join(lines) + "\n"
