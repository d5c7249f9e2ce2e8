import math

import numpy as np
import pytest

from nvdg.mesh import build_criss_cross
from nvdg.space import (DGSpace, DofMap, eval_basis, face_quadrature,
                        interval_quadrature, push_forward, reference_basis,
                        triangle_quadrature)

RNG = np.random.default_rng(42)


def random_reference_points(n):
    # uniform in the reference triangle via folding the unit square
    p = RNG.random((n, 2))
    fold = p.sum(axis=1) > 1
    p[fold] = 1.0 - p[fold]
    return p


@pytest.mark.parametrize("k", [1, 2])
def test_partition_of_unity_and_gradient_sum(k):
    pts = random_reference_points(40)
    vals = eval_basis(k, pts, 0)
    grads = eval_basis(k, pts, 1)
    assert np.abs(vals.sum(axis=0) - 1.0).max() < 1e-13
    assert np.abs(grads.sum(axis=0)).max() < 1e-13


@pytest.mark.parametrize("k", [1, 2])
def test_monomial_reproduction(k):
    basis = reference_basis(k)
    pts = random_reference_points(30)
    for a in range(k + 1):
        for b in range(k + 1 - a):
            target = pts[:, 0] ** a * pts[:, 1] ** b
            nodal = basis.nodes[:, 0] ** a * basis.nodes[:, 1] ** b
            reproduced = nodal @ basis.values(pts)
            assert np.abs(reproduced - target).max() < 1e-12


def test_p1_barycenter_values():
    vals = eval_basis(1, [[1 / 3, 1 / 3]], 0)
    assert np.allclose(vals[:, 0], 1 / 3, atol=1e-14)


def test_p1_hessians_vanish():
    pts = random_reference_points(10)
    assert np.abs(eval_basis(1, pts, 2)).max() == 0.0


def test_p2_vertex_values_against_lagrange_system():
    # independent oracle: solve the 6x6 Lagrange node system for P2
    basis = reference_basis(2)
    nodes = basis.nodes

    def monomials(p):
        x, y = p[:, 0], p[:, 1]
        return np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], axis=1)

    V = monomials(nodes)
    target = np.array([[0.0, 0.0]])
    coeffs = np.linalg.solve(V.T, monomials(target).T).ravel()
    assert np.allclose(coeffs, basis.values(target)[:, 0], atol=1e-12)
    assert np.allclose(basis.values(target)[:, 0], np.eye(6)[0], atol=1e-13)


def test_unsupported_degree_rejected():
    with pytest.raises(ValueError):
        eval_basis(3, [[0.2, 0.2]], 0)
    with pytest.raises(ValueError):
        eval_basis(1, [[0.2, 0.2]], 3)


@pytest.mark.parametrize("degree", [2, 4, 6, 8, 10])
def test_triangle_quadrature_exactness(degree):
    rule = triangle_quadrature(degree)
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-13)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            got = (rule.weights * rule.points[:, 0] ** a * rule.points[:, 1] ** b).sum()
            assert got == pytest.approx(exact, abs=1e-13)


@pytest.mark.parametrize("degree", [1, 3, 5, 8])
def test_interval_quadrature_exactness(degree):
    rule = interval_quadrature(degree)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    for a in range(degree + 1):
        got = (rule.weights * rule.points**a).sum()
        assert got == pytest.approx(1.0 / (a + 1), abs=1e-13)


def test_push_forward_scaling():
    # gradients halve and Hessians quarter on a 2x-scaled element
    small = build_criss_cross(2)   # legs 1/2
    large = build_criss_cross(1)   # legs 1
    pts = random_reference_points(5)
    _, v_s, g_s, h_s = push_forward(small, 0, 2, pts)
    _, v_l, g_l, h_l = push_forward(large, 0, 2, pts)
    assert np.allclose(v_s, v_l, atol=1e-14)
    assert np.allclose(g_l, g_s / 2, atol=1e-13)
    assert np.allclose(h_l, h_s / 4, atol=1e-13)


def test_push_forward_reference_identity():
    from nvdg.mesh import Mesh

    mesh = Mesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)])
    pts = random_reference_points(6)
    basis = reference_basis(2)
    mapped, vals, grads, hess = push_forward(mesh, 0, 2, pts)
    assert np.allclose(mapped, pts, atol=1e-14)
    assert np.allclose(vals, basis.values(pts), atol=1e-14)
    assert np.allclose(grads, basis.gradients(pts), atol=1e-13)
    assert np.allclose(hess, basis.hessians(pts), atol=1e-13)


def test_interpolated_quadratic_has_exact_hessian():
    mesh = build_criss_cross(3)
    space = DGSpace(mesh, 2)
    coeffs = space.interpolate(lambda p: p[:, 0] ** 2)
    hess = space.eval_on_elements(coeffs, random_reference_points(4), deriv=2)
    expect = np.array([[2.0, 0.0], [0.0, 0.0]])
    assert np.abs(hess - expect).max() < 1e-11


def test_face_quadrature_constant_and_linear():
    mesh = build_criss_cross(1)
    # locate the bottom edge from (0,0) to (1,0)
    target = None
    for f, face in enumerate(mesh.faces):
        pts = mesh.vertices[list(face.vertices)]
        if np.allclose(sorted(pts[:, 1]), 0) and np.allclose(sorted(pts[:, 0]), [0, 1]):
            target = f
    pts, w, refs = face_quadrature(mesh, target, 4)
    assert w.sum() == pytest.approx(mesh.faces[target].length, abs=1e-14)
    assert (w * pts[:, 0]).sum() == pytest.approx(0.5, abs=1e-14)
    assert len(refs) == 1


def test_face_traces_match_for_continuous_function():
    mesh = build_criss_cross(3)
    space = DGSpace(mesh, 2)
    coeffs = space.interpolate(lambda p: p[:, 0] ** 2 + 2 * p[:, 0] * p[:, 1])
    vv, vg = space.face_function_traces(coeffs, slice(0, mesh.n_faces))
    interior = mesh.interior_mask
    assert np.abs(vv[interior, 0] - vv[interior, 1]).max() < 1e-12
    assert np.abs(vg[interior, 0] - vg[interior, 1]).max() < 1e-12

    f = int(np.nonzero(interior)[0][0])
    pts, _, refs = face_quadrature(mesh, f, space.quad_degree)
    for side, e in enumerate(mesh.faces[f].elements):
        mapped, _, _, _ = push_forward(mesh, e, 2, refs[side])
        assert np.allclose(mapped, pts, atol=1e-13)


def test_dof_map_layout():
    dm = DofMap(128, 3)
    assert dm.n_dofs == 384
    assert dm.global_index(5, 2) == 17
    seen = {dm.global_index(e, l) for e in range(dm.n_elements) for l in range(dm.n_loc)}
    assert len(seen) == dm.n_dofs


@pytest.mark.parametrize("k", [1, 2])
def test_l2_projection_reproduces_global_polynomials(k):
    from nvdg.projection import project_function

    mesh = build_criss_cross(4)
    space = DGSpace(mesh, k)

    def poly(p):
        out = (1.0 + 2 * p[:, 0] - p[:, 1])
        if k == 2:
            out = out + 0.5 * p[:, 0] * p[:, 1] - p[:, 1] ** 2
        return out

    projected = project_function(space, poly)
    interpolated = space.interpolate(poly)
    assert np.abs(projected - interpolated).max() < 1e-12
