"""Global assembly of the nonvariational DG system.

Two interchangeable forms are provided.  The eliminated form applies the
local projection identity

    B(u, Psi) = int D_h(Pi(Psi A)) . grad_h u
                - int_{E u bdry} theta [u] . {D_h Pi(Psi A)}
                - int_{E u bdry} [Pi(Psi A)] . {grad_h u}
                + int_{E u bdry} sigma/h [u].[Psi]

yielding a compact-stencil sparse matrix (each row couples an element with
at most its three face neighbors).  The mixed form keeps the discrete
Hessian as an explicit block unknown; eliminating it through the
block-diagonal mass inverse reproduces the eliminated matrix.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import CsrMatrix
from .projection import project_basis_matrix_field
from .space import DGSpace, iter_chunks


@dataclass
class BilinearFormConfig:
    sigma: float = 20.0
    theta: float = 1.0
    quad_degree: Optional[int] = None
    form: str = "eliminated"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.theta not in (-1.0, 1.0, -1, 1):
            raise ValueError("theta must be -1 or +1")
        if self.form not in ("eliminated", "mixed"):
            raise ValueError("form must be 'eliminated' or 'mixed'")


@dataclass
class SparsityStats:
    nonzeros: int
    max_row_bandwidth: int
    max_row_element_blocks: Optional[int] = None


@dataclass
class AssembledSystem:
    K: CsrMatrix
    rhs: np.ndarray
    stats: SparsityStats
    form: str
    blocks: Optional[dict] = None


def _sparsity_stats(K, n_loc=None) -> SparsityStats:
    indptr, indices = K.indptr, K.indices
    nonempty = indptr[:-1] < indptr[1:]
    row_ids = np.arange(K.n)[nonempty]
    starts = indptr[:-1][nonempty]
    cmax = np.maximum.reduceat(indices, starts)
    cmin = np.minimum.reduceat(indices, starts)
    bandwidth = int(np.maximum(np.abs(cmax - row_ids), np.abs(row_ids - cmin)).max())

    blocks = None
    if n_loc is not None:
        col_elem = indices // n_loc
        new_block = np.ones(len(indices), dtype=np.int64)
        new_block[1:] = col_elem[1:] != col_elem[:-1]
        new_block[indptr[1:-1]] = 1
        blocks = int(np.add.reduceat(new_block, starts).max())
    return SparsityStats(K.nnz, bandwidth, blocks)


def _pair_dofs(n_loc, e_i, e_j):
    """Raveled (row, col) dof indices for all (i, j) pairs on element pairs."""
    loc = np.arange(n_loc)
    shape = (len(e_i), n_loc, n_loc)
    rows = np.broadcast_to(e_i[:, None, None] * n_loc + loc[None, :, None], shape)
    cols = np.broadcast_to(e_j[:, None, None] * n_loc + loc[None, None, :], shape)
    return rows.ravel(), cols.ravel()


def _resolve_space(mesh, space, cfg):
    if cfg.quad_degree is not None and cfg.quad_degree != space.quad_degree:
        return DGSpace(mesh, space.degree, cfg.quad_degree)
    return space


def _penalty_weights(space, coeff_field, sl):
    """Per-face penalty weight: the largest eigenvalue of A over the face.

    Scales the jump penalty with the local coefficient strength so that
    sigma = 20 controls the form uniformly even where A is large; for A = I
    the weight is one and the plain sigma/h penalty is recovered.
    """
    pts = space.face_points[sl]
    if hasattr(coeff_field, "max_eigenvalue"):
        eig = coeff_field.max_eigenvalue(pts.reshape(-1, 2)).reshape(pts.shape[:2])
    else:
        a_vals = coeff_field.matrix(pts.reshape(-1, 2)).reshape(pts.shape[:2] + (2, 2))
        tr = a_vals[..., 0, 0] + a_vals[..., 1, 1]
        det = (a_vals[..., 0, 0] * a_vals[..., 1, 1]
               - a_vals[..., 0, 1] * a_vals[..., 1, 0])
        eig = 0.5 * (tr + np.sqrt(np.maximum(tr**2 - 4.0 * det, 0.0)))
    return eig.max(axis=1)


def _load_vector(space, f):
    rhs = np.empty(space.n_dofs)
    nl = space.n_loc
    for sl in iter_chunks(space.mesh.n_elements):
        pts = space.quad_points[sl]
        f_vals = np.asarray(f(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2])
        rhs[sl.start * nl:sl.stop * nl] = np.einsum(
            "e,q,eq,iq->ei", space.detj[sl], space.elem_rule.weights,
            f_vals, space.ref_values).ravel()
    return rhs


def assemble_eliminated(mesh, space, coeff_field, f, cfg) -> AssembledSystem:
    """Assemble the compact eliminated-form system K u = rhs."""
    if cfg.form != "eliminated":
        raise ValueError("config form must be 'eliminated'")
    space = _resolve_space(mesh, space, cfg)
    nl = space.n_loc
    w_ref = space.elem_rule.weights
    theta, sigma = cfg.theta, cfg.sigma

    rows, cols, vals = [], [], []
    proj = np.empty((mesh.n_elements, nl, nl, 2, 2))

    for sl in iter_chunks(mesh.n_elements):
        pts = space.quad_points[sl]
        nes, nq = pts.shape[0], pts.shape[1]
        a_vals = coeff_field.matrix(pts.reshape(-1, 2)).reshape(nes, nq, 2, 2)
        proj[sl] = project_basis_matrix_field(space, a_vals)
        grads = space.element_gradients(sl)
        dv = np.einsum("eismn,esqn->eiqm", proj[sl], grads)
        kvol = np.einsum("e,q,eiqm,ejqm->eij", space.detj[sl], w_ref, dv, grads)

        eids = np.arange(sl.start, sl.stop)
        r, c = _pair_dofs(nl, eids, eids)
        rows.append(r)
        cols.append(c)
        vals.append(kvol.ravel())

    for sl in iter_chunks(mesh.n_faces):
        interior = mesh.interior_mask[sl]
        elems = mesh.face_elems[sl]
        elems = np.where(elems < 0, elems[:, :1], elems)
        nrm = mesh.face_normals[sl]
        w = space.face_weights[sl]
        pen = sigma * _penalty_weights(space, coeff_field, sl) / mesh.face_lengths[sl]
        val, grad = space.face_tables(sl)
        avg = np.where(interior, 0.5, 1.0)

        for si in (0, 1):
            for sj in (0, 1):
                act = slice(None) if si == 0 and sj == 0 else interior
                e_i, e_j = elems[act, si], elems[act, sj]
                sign_i = 1.0 if si == 0 else -1.0
                sign_j = 1.0 if sj == 0 else -1.0
                n_i = sign_i * nrm[act]
                n_j = sign_j * nrm[act]
                csel = proj[e_i]
                wavg = w[act] * avg[act][:, None]

                dv = np.einsum("firmn,frqn->fiqm", csel, grad[act, si])
                t = -theta * np.einsum("fq,fjq,fm,fiqm->fij", wavg, val[act, sj], n_j, dv)
                vn = np.einsum("firmn,frq,fn->fiqm", csel, val[act, si], n_i)
                t -= np.einsum("fq,fiqm,fjqm->fij", wavg, vn, grad[act, sj])
                t += (sign_i * sign_j) * np.einsum(
                    "f,fq,fiq,fjq->fij", pen[act], w[act], val[act, si], val[act, sj])

                r, c = _pair_dofs(nl, e_i, e_j)
                rows.append(r)
                cols.append(c)
                vals.append(t.ravel())

    K = CsrMatrix.from_coo(space.n_dofs, np.concatenate(rows),
                           np.concatenate(cols), np.concatenate(vals))
    return AssembledSystem(K, _load_vector(space, f), _sparsity_stats(K, nl), "eliminated")


def assemble_mixed(mesh, space, coeff_field, f, cfg) -> AssembledSystem:
    """Assemble the block system over stacked unknowns (u, H).

    Layout: u dofs first, then one block per Hessian entry in row-major
    (0,0), (0,1), (1,0), (1,1) order.  The H rows impose the weak Hessian
    identity, the u rows the method itself.  Sub-blocks are retained on the
    returned system for the per-element Schur elimination check.
    """
    if cfg.form != "mixed":
        raise ValueError("config form must be 'mixed'")
    space = _resolve_space(mesh, space, cfg)
    nl = space.n_loc
    N = space.n_dofs
    w_ref = space.elem_rule.weights
    theta, sigma = cfg.theta, cfg.sigma

    def offset(m, n):
        return N * (1 + 2 * m + n)

    pen = [[], [], []]
    mass = [[], [], []]
    coup = {(m, n): [[], [], []] for m in range(2) for n in range(2)}
    lift = {(m, n): [[], [], []] for m in range(2) for n in range(2)}

    def push(dest, r, c, v):
        dest[0].append(r)
        dest[1].append(c)
        dest[2].append(v)

    for sl in iter_chunks(mesh.n_elements):
        pts = space.quad_points[sl]
        nes, nq = pts.shape[0], pts.shape[1]
        a_vals = coeff_field.matrix(pts.reshape(-1, 2)).reshape(nes, nq, 2, 2)
        gblk = np.einsum("e,q,iq,jq,eqmn->eijmn", space.detj[sl], w_ref,
                         space.ref_values, space.ref_values, a_vals)
        eids = np.arange(sl.start, sl.stop)
        r, c = _pair_dofs(nl, eids, eids)
        for m in range(2):
            for n in range(2):
                push(coup[m, n], r, c, gblk[..., m, n].ravel())

        mblk = np.broadcast_to(space.detj[sl, None, None] * space.ref_mass[None],
                               (nes, nl, nl))
        push(mass, r, c, mblk.ravel())

        if space.degree > 1:
            hp = space.element_hessians(sl)
            cvol = np.einsum("e,q,iq,ejqmn->eijmn", space.detj[sl], w_ref,
                             space.ref_values, hp)
            for m in range(2):
                for n in range(2):
                    push(lift[m, n], r, c, cvol[..., m, n].ravel())

    for sl in iter_chunks(mesh.n_faces):
        interior = mesh.interior_mask[sl]
        elems = mesh.face_elems[sl]
        elems = np.where(elems < 0, elems[:, :1], elems)
        nrm = mesh.face_normals[sl]
        w = space.face_weights[sl]
        pen_f = sigma * _penalty_weights(space, coeff_field, sl) / mesh.face_lengths[sl]
        val, grad = space.face_tables(sl)
        avg = np.where(interior, 0.5, 1.0)

        for si in (0, 1):
            for sj in (0, 1):
                both_zero = si == 0 and sj == 0
                act = slice(None) if both_zero else interior
                e_i, e_j = elems[act, si], elems[act, sj]
                sign_i = 1.0 if si == 0 else -1.0
                sign_j = 1.0 if sj == 0 else -1.0
                n_j = sign_j * nrm[act]
                wavg = w[act] * avg[act][:, None]
                r, c = _pair_dofs(nl, e_i, e_j)

                p = (sign_i * sign_j) * np.einsum(
                    "f,fq,fiq,fjq->fij", pen_f[act], w[act], val[act, si], val[act, sj])
                push(pen, r, c, p.ravel())

                cblk = theta * np.einsum("fq,fjq,fm,fiqn->fijmn", wavg,
                                         val[act, sj], n_j, grad[act, si])
                tensor = np.einsum("fq,fjqm,fn,fiq->fijmn", wavg, grad[act, sj],
                                   n_j, val[act, si])
                if both_zero:
                    tensor *= interior[:, None, None, None, None]
                cblk -= tensor
                for m in range(2):
                    for n in range(2):
                        push(lift[m, n], r, c, cblk[..., m, n].ravel())

    def build(parts):
        return CsrMatrix.from_coo(N, np.concatenate(parts[0]),
                                  np.concatenate(parts[1]), np.concatenate(parts[2]))

    penalty = build(pen)
    mass_mat = build(mass)
    coupling = {mn: build(parts) for mn, parts in coup.items()}
    lifting = {mn: build(parts) for mn, parts in lift.items()}

    big_r, big_c, big_v = [], [], []

    def place(matrix, row_off, col_off, scale):
        coo = matrix._sp.tocoo()
        big_r.append(coo.row + row_off)
        big_c.append(coo.col + col_off)
        big_v.append(scale * coo.data)

    place(penalty, 0, 0, 1.0)
    for m in range(2):
        for n in range(2):
            off = offset(m, n)
            place(coupling[m, n], 0, off, -1.0)
            place(lifting[m, n], off, 0, -1.0)
            place(mass_mat, off, off, 1.0)

    K = CsrMatrix.from_coo(5 * N, np.concatenate(big_r), np.concatenate(big_c),
                           np.concatenate(big_v))
    rhs = np.concatenate([_load_vector(space, f), np.zeros(4 * N)])
    blocks = {"penalty": penalty, "mass": mass_mat,
              "coupling": coupling, "lifting": lifting}
    return AssembledSystem(K, rhs, _sparsity_stats(K), "mixed", blocks=blocks)


def eliminate_mixed(system, space) -> AssembledSystem:
    """Schur-eliminate the H blocks of a mixed system via the block-diagonal
    mass inverse; the result matches the eliminated-form assembly."""
    if system.form != "mixed" or not system.blocks:
        raise ValueError("expected a mixed system with retained blocks")
    N = space.n_dofs
    nl = space.n_loc
    inv_blocks = space.ref_mass_inv[None, :, :] / space.detj[:, None, None]
    r, c = _pair_dofs(nl, np.arange(space.mesh.n_elements), np.arange(space.mesh.n_elements))
    minv = CsrMatrix.from_coo(N, r, c, inv_blocks.ravel())

    schur = system.blocks["penalty"]._sp.copy()
    for m in range(2):
        for n in range(2):
            schur = schur - (system.blocks["coupling"][m, n]._sp
                             @ minv._sp @ system.blocks["lifting"][m, n]._sp)
    schur = schur.tocsr()
    schur.sum_duplicates()
    schur.sort_indices()
    K = CsrMatrix(schur.indptr, schur.indices, schur.data, N)
    return AssembledSystem(K, system.rhs[:N].copy(), _sparsity_stats(K, nl), "eliminated")


def mixed_dof_permutation(space):
    """Element-interleaved ordering of the stacked (u, H) unknowns.

    Grouping each element's u dofs with its four Hessian blocks gives the
    incomplete factorization nonzero pivots (the field-blocked ordering
    leads with the penalty matrix, whose ILU(0) can break down).  Returns
    new-index -> old-index.
    """
    N = space.n_dofs
    nl = space.n_loc
    base = (np.arange(space.mesh.n_elements)[:, None] * nl + np.arange(nl)[None, :])
    groups = [N * (1 + b) + base for b in range(4)] + [base]
    return np.stack(groups, axis=1).ravel()


def solve_system(system, space=None, precond="ilu0", tol=1e-12, max_iter=None):
    """Solve an assembled system with BiCGSTAB, reordering mixed systems.

    Returns (solution, report); for mixed systems the solution is still in
    the public [u; H] layout.
    """
    from .linalg import bicgstab

    if system.form == "mixed":
        if space is None:
            raise ValueError("solving a mixed system requires the space")
        perm = mixed_dof_permutation(space)
        y, report = bicgstab(system.K.permuted(perm), system.rhs[perm],
                             precond=precond, tol=tol, max_iter=max_iter)
        x = np.empty_like(y)
        x[perm] = y
        return x, report
    return bicgstab(system.K, system.rhs, precond=precond, tol=tol, max_iter=max_iter)


def galerkin_orthogonality_residual(system, u_h) -> float:
    """Max-norm of B(u_h, Psi_i) - l(Psi_i) over all test basis functions."""
    return float(np.abs(system.K.matvec(u_h) - system.rhs).max())
