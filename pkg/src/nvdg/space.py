"""Discontinuous P1/P2 spaces on triangle meshes.

Provides nodal reference bases with value/gradient/Hessian tables,
quadrature on the reference triangle (Duffy-mapped Gauss-Legendre, exact to
any requested degree) and on faces, affine push-forwards, and the
element-major dof layout.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss


def iter_chunks(n, size=16384):
    """Slice [0, n) into contiguous chunks; keeps big skeleton tables bounded."""
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


# ---------------------------------------------------------------------------
# reference bases

class ReferenceBasis:
    """Lagrange basis on the reference triangle (0,0)-(1,0)-(0,1).

    Nodes sit at the vertices for degree 1 and at vertices plus edge
    midpoints for degree 2.
    """

    def __init__(self, degree):
        if degree not in (1, 2):
            raise ValueError(f"unsupported polynomial degree {degree}")
        self.degree = degree
        self.n_loc = (degree + 1) * (degree + 2) // 2
        if degree == 1:
            self.nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        else:
            self.nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0],
                                   [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])

    def values(self, points):
        """Shape function values, shaped (n_loc, n_points)."""
        x, y = self._split(points)
        lam = np.stack([1.0 - x - y, x, y])
        if self.degree == 1:
            return lam
        l0, l1, l2 = lam
        return np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                         4 * l0 * l1, 4 * l1 * l2, 4 * l0 * l2])

    def gradients(self, points):
        """Reference gradients, shaped (n_loc, n_points, 2)."""
        x, y = self._split(points)
        npts = x.size
        dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        if self.degree == 1:
            return np.broadcast_to(dlam[:, None, :], (3, npts, 2)).copy()
        lam = np.stack([1.0 - x - y, x, y])
        g = np.empty((6, npts, 2))
        for i in range(3):
            g[i] = (4 * lam[i] - 1)[:, None] * dlam[i]
        for i, (a, b) in enumerate(((0, 1), (1, 2), (0, 2))):
            g[3 + i] = 4 * (lam[a][:, None] * dlam[b] + lam[b][:, None] * dlam[a])
        return g

    def hessians(self, points):
        """Reference second derivatives, shaped (n_loc, n_points, 2, 2)."""
        x, _ = self._split(points)
        npts = x.size
        if self.degree == 1:
            return np.zeros((3, npts, 2, 2))
        dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        h = np.empty((6, npts, 2, 2))
        for i in range(3):
            h[i] = 4 * np.outer(dlam[i], dlam[i])
        for i, (a, b) in enumerate(((0, 1), (1, 2), (0, 2))):
            h[3 + i] = 4 * (np.outer(dlam[a], dlam[b]) + np.outer(dlam[b], dlam[a]))
        return h

    @staticmethod
    def _split(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts[:, 0], pts[:, 1]


@lru_cache(maxsize=None)
def reference_basis(degree) -> ReferenceBasis:
    return ReferenceBasis(degree)


def eval_basis(degree, points, deriv_order):
    """Evaluation tables of the reference basis at the given points.

    Returns (n_loc, n_points) values for order 0, (n_loc, n_points, 2)
    gradients for order 1, (n_loc, n_points, 2, 2) Hessians for order 2.
    """
    basis = reference_basis(degree)
    if deriv_order == 0:
        return basis.values(points)
    if deriv_order == 1:
        return basis.gradients(points)
    if deriv_order == 2:
        return basis.hessians(points)
    raise ValueError(f"deriv_order must be 0, 1 or 2, got {deriv_order}")


# ---------------------------------------------------------------------------
# quadrature

@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def interval_quadrature(degree) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1], exact for polynomials up to ``degree``."""
    n = max(1, (degree + 2) // 2)
    x, w = leggauss(n)
    return QuadratureRule((x + 1.0) / 2.0, w / 2.0, 2 * n - 1)


@lru_cache(maxsize=None)
def triangle_quadrature(degree) -> QuadratureRule:
    """Tensor Gauss rule mapped to the reference triangle by the Duffy transform.

    Exact for all bivariate polynomials of total degree <= ``degree`` (the
    collapsed direction needs one extra degree for the Jacobian factor).
    """
    n = max(1, (degree + 3) // 2)
    x, w = leggauss(n)
    x = (x + 1.0) / 2.0
    w = w / 2.0
    xi, eta = np.meshgrid(x, x, indexing="ij")
    wx, we = np.meshgrid(w, w, indexing="ij")
    pts = np.column_stack([(xi * (1.0 - eta)).ravel(), eta.ravel()])
    wts = (wx * we * (1.0 - eta)).ravel()
    return QuadratureRule(pts, wts, 2 * n - 2)


# ---------------------------------------------------------------------------
# dof layout

@dataclass(frozen=True)
class DofMap:
    """Element-major block layout: global dof = element * n_loc + local."""

    n_elements: int
    n_loc: int

    @property
    def n_dofs(self) -> int:
        return self.n_elements * self.n_loc

    def global_index(self, element, local):
        return element * self.n_loc + local


# ---------------------------------------------------------------------------
# affine mappings

def push_forward(mesh, element, degree, ref_points):
    """Physical values/gradients/Hessians of the basis on one element.

    Gradients transform with the inverse-transpose Jacobian and Hessians by
    the two-sided affine rule (no curvature terms on straight triangles).
    Returns (points, values, gradients, hessians).
    """
    basis = reference_basis(degree)
    ref_points = np.atleast_2d(np.asarray(ref_points, dtype=float))
    tri = mesh.vertices[mesh.elements[element]]
    jac = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    det = np.linalg.det(jac)
    if abs(det) < 1e-14:
        raise ValueError(f"element {element} has a degenerate Jacobian")
    jinv = np.linalg.inv(jac)

    points = tri[0] + ref_points @ jac.T
    values = basis.values(ref_points)
    gradients = np.einsum("dc,lqd->lqc", jinv, basis.gradients(ref_points))
    hessians = np.einsum("ca,db,lqcd->lqab", jinv, jinv, basis.hessians(ref_points))
    return points, values, gradients, hessians


def face_quadrature(mesh, face_index, degree):
    """Quadrature on one face, mapped into each neighbor's reference coordinates.

    Returns (points, weights, ref_coords) where ref_coords has one (nq, 2)
    array per adjacent element, all describing the same physical locations.
    """
    face = mesh.faces[face_index]
    rule = interval_quadrature(degree)
    va, vb = mesh.vertices[face.vertices[0]], mesh.vertices[face.vertices[1]]
    points = va + rule.points[:, None] * (vb - va)
    weights = rule.weights * face.length

    ref_coords = []
    for elem in face.elements:
        tri = mesh.vertices[mesh.elements[elem]]
        jac = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
        ref_coords.append((points - tri[0]) @ np.linalg.inv(jac).T)
    return points, weights, ref_coords


# ---------------------------------------------------------------------------
# the assembled space

class DGSpace:
    """Discontinuous P_k space with precomputed geometry and quadrature tables.

    All arrays are immutable after construction; heavyweight per-face trace
    tables are produced on demand in slices (see ``face_tables``) so large
    meshes never hold the full skeleton tables at once.
    """

    def __init__(self, mesh, degree, quad_degree=None):
        self.mesh = mesh
        self.degree = degree
        self.basis = reference_basis(degree)
        self.n_loc = self.basis.n_loc
        self.dof_map = DofMap(mesh.n_elements, self.n_loc)
        self.quad_degree = quad_degree if quad_degree is not None else 2 * degree + 2

        tri = mesh.vertices[mesh.elements]                    # (ne, 3, 2)
        self.jac = np.stack([tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]], axis=2)
        self.detj = self.jac[:, 0, 0] * self.jac[:, 1, 1] - self.jac[:, 0, 1] * self.jac[:, 1, 0]
        self.jinv = np.empty_like(self.jac)
        self.jinv[:, 0, 0] = self.jac[:, 1, 1] / self.detj
        self.jinv[:, 0, 1] = -self.jac[:, 0, 1] / self.detj
        self.jinv[:, 1, 0] = -self.jac[:, 1, 0] / self.detj
        self.jinv[:, 1, 1] = self.jac[:, 0, 0] / self.detj
        self.origin = tri[:, 0]

        rule = triangle_quadrature(self.quad_degree)
        self.elem_rule = rule
        self.ref_values = self.basis.values(rule.points)
        self.ref_gradients = self.basis.gradients(rule.points)
        self.ref_hessians = self.basis.hessians(rule.points)
        self.quad_points = self.origin[:, None, :] + np.einsum(
            "ecd,qd->eqc", self.jac, rule.points)
        self.quad_weights = rule.weights[None, :] * self.detj[:, None]

        self.face_rule = interval_quadrature(self.quad_degree)
        fv = mesh.vertices[mesh.face_vertices]                # (nf, 2, 2)
        t = self.face_rule.points
        self.face_points = fv[:, 0, None, :] + t[None, :, None] * (fv[:, 1] - fv[:, 0])[:, None, :]
        self.face_weights = self.face_rule.weights[None, :] * mesh.face_lengths[:, None]

        # reference mass matrix; physical mass is detj-scaled on affine cells
        self.ref_mass = np.einsum("q,iq,jq->ij", rule.weights, self.ref_values, self.ref_values)
        self.ref_mass_inv = np.linalg.inv(self.ref_mass)

    @property
    def n_dofs(self) -> int:
        return self.dof_map.n_dofs

    def element_gradients(self, sl=slice(None)):
        """Physical basis gradients at element quad points: (ne, n_loc, nq, 2)."""
        return np.einsum("edc,lqd->elqc", self.jinv[sl], self.ref_gradients)

    def element_hessians(self, sl=slice(None)):
        """Physical basis Hessians at element quad points: (ne, n_loc, nq, 2, 2)."""
        return np.einsum("eca,edb,lqcd->elqab", self.jinv[sl], self.jinv[sl], self.ref_hessians)

    def to_reference(self, elems, points):
        """Map physical points (..., 2) into the given elements' reference coords."""
        rel = points - self.origin[elems]
        return np.einsum("...dc,...c->...d", self.jinv[elems], rel)

    def face_tables(self, sl):
        """Trace tables for a slice of faces.

        Returns (values, gradients) with shapes (nfs, 2, n_loc, nqf) and
        (nfs, 2, n_loc, nqf, 2).  Sides follow ``mesh.face_elems`` order; on
        boundary faces side 1 duplicates side 0 and must be masked by the
        caller (``mesh.interior_mask``).
        """
        mesh = self.mesh
        elems = mesh.face_elems[sl]
        elems = np.where(elems < 0, elems[:, :1], elems)      # boundary: reuse side 0
        pts = self.face_points[sl]                            # (nfs, nqf, 2)
        nfs, nqf = pts.shape[0], pts.shape[1]

        ref = self.to_reference(elems[:, :, None], pts[:, None, :, :])
        flat = ref.reshape(-1, 2)
        vals = self.basis.values(flat).reshape(self.n_loc, nfs, 2, nqf)
        grads = self.basis.gradients(flat).reshape(self.n_loc, nfs, 2, nqf, 2)
        values = np.moveaxis(vals, 0, 2)
        gradients = np.einsum("esdc,lesqd->eslqc", self.jinv[elems], grads)
        return values, gradients

    def face_function_traces(self, coeffs, sl):
        """Values and physical gradients of a dof vector on both sides of a face slice.

        Returns (vv, vg) shaped (nfs, 2, nqf) and (nfs, 2, nqf, 2); on
        boundary faces side 1 duplicates side 0.
        """
        elems = self.mesh.face_elems[sl]
        elems = np.where(elems < 0, elems[:, :1], elems)
        val, grad = self.face_tables(sl)
        c = coeffs.reshape(self.mesh.n_elements, self.n_loc)[elems]
        vv = np.einsum("fsl,fslq->fsq", c, val)
        vg = np.einsum("fsl,fslqc->fsqc", c, grad)
        return vv, vg

    def interpolate(self, f):
        """Nodal interpolation of a callable f(points (n,2)) -> (n,); flat dof vector."""
        nodes = self.origin[:, None, :] + np.einsum("ecd,ld->elc", self.jac, self.basis.nodes)
        return np.asarray(f(nodes.reshape(-1, 2)), dtype=float).ravel()

    def eval_on_elements(self, coeffs, ref_points, deriv=0):
        """Evaluate a dof vector at the same reference points in every element.

        deriv=0 gives values (ne, npts); deriv=1 physical gradients
        (ne, npts, 2); deriv=2 physical Hessians (ne, npts, 2, 2).
        """
        c = coeffs.reshape(self.mesh.n_elements, self.n_loc)
        if deriv == 0:
            return np.einsum("el,lq->eq", c, self.basis.values(ref_points))
        if deriv == 1:
            g = self.basis.gradients(ref_points)
            return np.einsum("el,edc,lqd->eqc", c, self.jinv, g)
        h = self.basis.hessians(ref_points)
        return np.einsum("el,eca,edb,lqcd->eqab", c, self.jinv, self.jinv, h)

    def physical_points(self, ref_points):
        """Map reference points into every element: (ne, npts, 2)."""
        return self.origin[:, None, :] + np.einsum("ecd,qd->eqc", self.jac, np.atleast_2d(ref_points))
