"""Elementwise L2 projection onto the discontinuous P_k space.

The projection of any field is computable element by element (one small
mass solve per element), which is what keeps the eliminated system sparse.
"""

import numpy as np


class LocalProjector:
    """Per-element L2 projector backed by one reference mass factorization.

    On affine triangles the element mass matrix is det(J) times the
    reference mass matrix, so a single inverse serves every element.
    """

    def __init__(self, space):
        self.space = space

    def mass_matrix(self, element):
        return self.space.detj[element] * self.space.ref_mass

    def mass_inverse(self, element):
        detj = self.space.detj[element]
        if abs(detj) < 1e-14:
            raise ValueError(f"element {element} has a singular mass matrix")
        return self.space.ref_mass_inv / detj

    def project_scalar(self, element, field):
        """P_k coefficients of ``field`` on one element.

        Solves M c = b with b_i = int_K field * phi_i; the residual
        int_K (field - proj) * phi_i vanishes to quadrature accuracy.
        """
        space = self.space
        vals = np.asarray(field(space.quad_points[element]), dtype=float)
        b = np.einsum("q,iq,q->i", space.elem_rule.weights, space.ref_values, vals)
        return space.ref_mass_inv @ b

    def project_matrix_times_basis(self, element, coeff_field, j):
        """Coefficients of each entry of Pi(phi_j * A) on one element.

        Returns a (2, 2, n_loc) array; entry (m, n) projects the scalar
        field phi_j * A_mn.
        """
        space = self.space
        a_vals = coeff_field.matrix(space.quad_points[element])      # (nq, 2, 2)
        b = np.einsum("q,q,rq,qmn->mnr", space.elem_rule.weights,
                      space.ref_values[j], space.ref_values, a_vals)
        return np.einsum("sr,mnr->mns", space.ref_mass_inv, b)


def project_function(space, f):
    """L2 projection of a callable onto the whole space; flat dof vector."""
    vals = np.asarray(f(space.quad_points.reshape(-1, 2)), dtype=float)
    vals = vals.reshape(space.mesh.n_elements, -1)
    b = np.einsum("q,iq,eq->ei", space.elem_rule.weights, space.ref_values, vals)
    return np.einsum("sr,er->es", space.ref_mass_inv, b).ravel()


def project_piecewise_constant(space, f):
    """Elementwise means (projection onto P_0); used by diagnostics only."""
    vals = np.asarray(f(space.quad_points.reshape(-1, 2)), dtype=float)
    vals = vals.reshape(space.mesh.n_elements, -1)
    w = space.elem_rule.weights
    return (vals @ w) / w.sum()


def project_basis_matrix_field(space, a_vals, sl=slice(None)):
    """Projection coefficients of phi_i * A for every test index on a chunk.

    ``a_vals`` holds A at the chunk's quadrature points, (ne_c, nq, 2, 2).
    Returns c[e, i, r, m, n] with Pi(phi_i A_mn)|_K = sum_r c[...] phi_r;
    the det(J) factors cancel between the load vector and the mass inverse.
    """
    b = np.einsum("q,iq,rq,eqmn->eirmn", space.elem_rule.weights,
                  space.ref_values, space.ref_values, a_vals)
    return np.einsum("sr,eirmn->eismn", space.ref_mass_inv, b)
