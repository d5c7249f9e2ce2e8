"""Discrete finite element Hessian of DG functions.

The primary path assembles H[v] from the primal form with interior-penalty
fluxes: for every test function Phi and entry (m, n),

    int H[v]_mn Phi = int (D^2_h v)_mn Phi
                      - int_E (grad-jump tensor)_mn {Phi}
                      + theta * int_{E u bdry} (jump v)_m ({grad Phi})_n,

followed by one block-diagonal mass solve per element.  The two-stage flux
system (lift the gradient, then lift the Hessian of the lifted field) is
kept as an independent oracle; both paths coincide for theta = +1.
"""

from dataclasses import dataclass, field

import numpy as np

from .space import iter_chunks


@dataclass(frozen=True)
class FluxChoice:
    """Interior-penalty flux rule for the Hessian lifting.

    The scalar flux is theta * {v} on interior faces; the vector flux is
    {grad_h v} everywhere.  ``boundary`` selects the scalar flux on the
    domain boundary: "zero" is the method's choice (homogeneous Dirichlet
    data enters weakly, so boundary traces of v are penalized into the
    lifting), while "trace" takes the one-sided trace of v itself, making
    the lifting a free-standing Hessian recovery whose boundary faces
    contribute nothing.
    """

    theta: float = 1.0
    boundary: str = "zero"

    def __post_init__(self):
        if self.theta not in (-1.0, 1.0, -1, 1):
            raise ValueError("theta must be -1 or +1")
        if self.boundary not in ("zero", "trace"):
            raise ValueError("boundary must be 'zero' or 'trace'")


@dataclass
class DiscreteHessian:
    """Four V_h coefficient vectors (one per matrix entry), stored (ne, n_loc, 2, 2)."""

    coeffs: np.ndarray
    source: np.ndarray = field(repr=False, default=None)

    def entry(self, m, n):
        """Flat dof vector of entry (m, n)."""
        return self.coeffs[:, :, m, n].ravel()

    def at_quad(self, space):
        """Values at the space's element quadrature points: (ne, nq, 2, 2)."""
        return np.einsum("elmn,lq->eqmn", self.coeffs, space.ref_values)

    def l2_norm(self, space):
        """Frobenius L2 norm over the domain."""
        sq = np.einsum("elmn,ermn,lr,e->", self.coeffs, self.coeffs,
                       space.ref_mass, space.detj)
        return float(np.sqrt(sq))


def _hessian_volume_rhs(space, vmat):
    """int_K (D^2_h v)_mn phi_i for all elements: (ne, n_loc, 2, 2)."""
    if space.degree == 1:
        return np.zeros((space.mesh.n_elements, space.n_loc, 2, 2))
    r = np.empty((space.mesh.n_elements, space.n_loc, 2, 2))
    for sl in iter_chunks(space.mesh.n_elements):
        hp = space.element_hessians(sl)
        hv = np.einsum("el,elqmn->eqmn", vmat[sl], hp)
        r[sl] = np.einsum("e,q,eqmn,iq->eimn", space.detj[sl],
                          space.elem_rule.weights, hv, space.ref_values)
    return r


def _mass_solve(space, rhs):
    """Per-element mass solve of stacked right-hand sides (ne, n_loc, ...)."""
    out = np.einsum("sr,er...->es...", space.ref_mass_inv, rhs)
    return out / space.detj.reshape((-1,) + (1,) * (out.ndim - 1))


def assemble_hessian(space, v, flux=None) -> DiscreteHessian:
    """Discrete Hessian H[v] via the primal form (primary code path)."""
    if flux is None:
        flux = FluxChoice()
    mesh = space.mesh
    if len(v) != space.n_dofs:
        raise ValueError(f"coefficient vector has length {len(v)}, expected {space.n_dofs}")
    vmat = v.reshape(mesh.n_elements, space.n_loc)
    r = _hessian_volume_rhs(space, vmat)

    wq = space.face_weights
    for sl in iter_chunks(mesh.n_faces):
        interior = mesh.interior_mask[sl]
        elems = np.where(mesh.face_elems[sl] < 0, mesh.face_elems[sl][:, :1], mesh.face_elems[sl])
        nrm = mesh.face_normals[sl]
        val, grad = space.face_tables(sl)
        vv = np.einsum("fsl,fslq->fsq", vmat[elems], val)
        vg = np.einsum("fsl,fslqc->fsqc", vmat[elems], grad)

        # jump quantities, oriented by the stored (side-0 outward) normal
        bdry_v = vv[:, 0] if flux.boundary == "zero" else 0.0
        jump_v = np.where(interior[:, None], vv[:, 0] - vv[:, 1], bdry_v)
        jump_g = np.where(interior[:, None, None], vg[:, 0] - vg[:, 1], 0.0)
        avg_fac = np.where(interior, 0.5, 1.0)

        for s in (0, 1):
            act = interior if s == 1 else slice(None)
            w = (wq[sl] * avg_fac[:, None])[act]
            contrib = (
                -np.einsum("fq,fqm,fn,flq->flmn", w, jump_g[act], nrm[act], val[act, s])
                + flux.theta * np.einsum("fq,fq,fm,flqn->flmn", w, jump_v[act],
                                         nrm[act], grad[act, s])
            )
            np.add.at(r, elems[act, s], contrib)

    return DiscreteHessian(_mass_solve(space, r), source=v)


def assemble_hessian_prescribed_flux(space, v, uhat, phat) -> DiscreteHessian:
    """Discrete Hessian with prescribed single-valued skeleton data.

    ``uhat(points)`` and ``phat(points)`` supply the scalar and vector flux
    at physical face points (exact traces in the consistency check).
    """
    mesh = space.mesh
    vmat = v.reshape(mesh.n_elements, space.n_loc)
    r = _hessian_volume_rhs(space, vmat)

    for sl in iter_chunks(mesh.n_faces):
        interior = mesh.interior_mask[sl]
        elems = np.where(mesh.face_elems[sl] < 0, mesh.face_elems[sl][:, :1], mesh.face_elems[sl])
        nrm = mesh.face_normals[sl]
        val, grad = space.face_tables(sl)
        vv = np.einsum("fsl,fslq->fsq", vmat[elems], val)
        vg = np.einsum("fsl,fslqc->fsqc", vmat[elems], grad)
        pts = space.face_points[sl]
        uh = np.asarray(uhat(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2])
        ph = np.asarray(phat(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape)
        w = space.face_weights[sl]

        for s in (0, 1):
            act = interior if s == 1 else slice(None)
            n_s = nrm[act] if s == 0 else -nrm[act]
            ws = w[act]
            contrib = (
                np.einsum("fq,flqn,fm->flmn", ws * (vv[act, s] - uh[act]), grad[act, s], n_s)
                + np.einsum("fq,fqm,flq,fn->flmn", ws, ph[act] - vg[act, s], val[act, s], n_s)
            )
            np.add.at(r, elems[act, s], contrib)

    return DiscreteHessian(_mass_solve(space, r), source=v)


def assemble_hessian_flux_form(space, v, flux=None) -> DiscreteHessian:
    """Two-stage flux-system oracle for the discrete Hessian.

    Stage one lifts v to a vector field p (discrete gradient with scalar
    flux theta*{v}, zero on the boundary); stage two lifts p rowwise with
    vector flux {grad_h v}.  Used to cross-check the primal path.
    """
    if flux is None:
        flux = FluxChoice()
    mesh = space.mesh
    vmat = v.reshape(mesh.n_elements, space.n_loc)
    w_ref = space.elem_rule.weights

    # stage 1:  int_K p_m q = -int_K v d_m q + int_dK Uhat q n_m
    vvol = np.einsum("el,lq->eq", vmat, space.ref_values)
    grads = space.element_gradients()
    rp = -np.einsum("e,q,eq,eiqm->eim", space.detj, w_ref, vvol, grads)
    face_vv = []
    face_vg = []
    for sl in iter_chunks(mesh.n_faces):
        interior = mesh.interior_mask[sl]
        elems = np.where(mesh.face_elems[sl] < 0, mesh.face_elems[sl][:, :1], mesh.face_elems[sl])
        nrm = mesh.face_normals[sl]
        val, grad = space.face_tables(sl)
        vv = np.einsum("fsl,fslq->fsq", vmat[elems], val)
        vg = np.einsum("fsl,fslqc->fsqc", vmat[elems], grad)
        face_vv.append(vv)
        face_vg.append(vg)
        bdry_u = 0.0 if flux.boundary == "zero" else vv[:, 0]
        uhat = np.where(interior[:, None], flux.theta * 0.5 * (vv[:, 0] + vv[:, 1]), bdry_u)
        w = space.face_weights[sl]
        for s in (0, 1):
            act = interior if s == 1 else slice(None)
            n_s = nrm[act] if s == 0 else -nrm[act]
            contrib = np.einsum("fq,flq,fm->flm", (w * uhat)[act], val[act, s], n_s)
            np.add.at(rp, elems[act, s], contrib)
    p = _mass_solve(space, rp)                                   # (ne, n_loc, 2)

    # stage 2:  int_K H_mn Phi = -int_K p_m d_n Phi + int_dK phat_m Phi n_n
    pvol = np.einsum("elm,lq->eqm", p, space.ref_values)
    r = -np.einsum("e,q,eqm,eiqn->eimn", space.detj, w_ref, pvol, grads)
    for ci, sl in enumerate(iter_chunks(mesh.n_faces)):
        interior = mesh.interior_mask[sl]
        elems = np.where(mesh.face_elems[sl] < 0, mesh.face_elems[sl][:, :1], mesh.face_elems[sl])
        nrm = mesh.face_normals[sl]
        val, _ = space.face_tables(sl)
        vg = face_vg[ci]
        phat = np.where(interior[:, None, None], 0.5 * (vg[:, 0] + vg[:, 1]), vg[:, 0])
        w = space.face_weights[sl]
        for s in (0, 1):
            act = interior if s == 1 else slice(None)
            n_s = nrm[act] if s == 0 else -nrm[act]
            contrib = np.einsum("fq,fqm,flq,fn->flmn", w[act], phat[act], val[act, s], n_s)
            np.add.at(r, elems[act, s], contrib)

    return DiscreteHessian(_mass_solve(space, r), source=v)


def hessian_consistency_residual(space, u, grad_u, hess_u) -> float:
    """L2 distance between H[Pi u] with exact-trace fluxes and Pi(D^2 u).

    With the skeleton data taken from the exact solution the lifting
    reproduces the projected Hessian up to quadrature error.
    """
    from .projection import project_function

    v = project_function(space, u)
    lifted = assemble_hessian_prescribed_flux(space, v, u, grad_u)

    target = np.empty_like(lifted.coeffs)
    hvals = np.asarray(hess_u(space.quad_points.reshape(-1, 2)), dtype=float)
    hvals = hvals.reshape(space.mesh.n_elements, -1, 2, 2)
    b = np.einsum("q,iq,eqmn->eimn", space.elem_rule.weights, space.ref_values, hvals)
    target = np.einsum("sr,ermn->esmn", space.ref_mass_inv, b)

    diff = lifted.coeffs - target
    sq = np.einsum("elmn,ermn,lr,e->", diff, diff, space.ref_mass, space.detj)
    return float(np.sqrt(max(sq, 0.0)))


def stability_bound_check(space, v, flux=None):
    """Both sides of the lifting stability bound, as squared quantities.

    Returns (lhs, rhs) with lhs = ||D^2_h v - H[v]||^2 and rhs the skeleton
    sum of h^-1 |grad jump|^2 + h^-3 |value jump|^2 over interior faces.
    The right-hand side only sees interior jumps, so the recovery flux
    (boundary traces taken from v itself) is the matching default.
    """
    mesh = space.mesh
    if flux is None:
        flux = FluxChoice(boundary="trace")
    hess = assemble_hessian(space, v, flux)
    vmat = v.reshape(mesh.n_elements, space.n_loc)

    lhs = 0.0
    for sl in iter_chunks(mesh.n_elements):
        broken = np.einsum("el,elqmn->eqmn", vmat[sl], space.element_hessians(sl))
        diff = broken - np.einsum("elmn,lq->eqmn", hess.coeffs[sl], space.ref_values)
        lhs += np.einsum("e,q,eqmn,eqmn->", space.detj[sl], space.elem_rule.weights, diff, diff)

    rhs = 0.0
    for sl in iter_chunks(mesh.n_faces):
        interior = mesh.interior_mask[sl]
        if not interior.any():
            continue
        elems = mesh.face_elems[sl]
        val, grad = space.face_tables(sl)
        vv = np.einsum("fsl,fslq->fsq", vmat[np.where(elems < 0, elems[:, :1], elems)], val)
        vg = np.einsum("fsl,fslqc->fsqc", vmat[np.where(elems < 0, elems[:, :1], elems)], grad)
        jv2 = (vv[:, 0] - vv[:, 1]) ** 2
        jg2 = ((vg[:, 0] - vg[:, 1]) ** 2).sum(axis=-1)
        h = mesh.face_lengths[sl]
        w = space.face_weights[sl]
        rhs += float((interior * ((w * jg2).sum(axis=1) / h
                                  + (w * jv2).sum(axis=1) / h**3)).sum())
    return float(lhs), rhs
