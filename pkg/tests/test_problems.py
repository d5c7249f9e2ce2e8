import numpy as np
import pytest

from nvdg.problems import get_problem
from nvdg.problems import test1 as problem1
from nvdg.problems import test2 as problem2
from nvdg.problems import test3a as problem3a
from nvdg.problems import test3b as problem3b

RNG = np.random.default_rng(5)


def fd_hessian(u, points, h=1e-4):
    """Central finite differences of the exact solution, the f oracle."""
    points = np.atleast_2d(points)
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    out = np.empty(points.shape[:-1] + (2, 2))
    out[..., 0, 0] = (u(points + ex) - 2 * u(points) + u(points - ex)) / h**2
    out[..., 1, 1] = (u(points + ey) - 2 * u(points) + u(points - ey)) / h**2
    mixed = (u(points + ex + ey) - u(points + ex - ey)
             - u(points - ex + ey) + u(points - ex - ey)) / (4 * h**2)
    out[..., 0, 1] = mixed
    out[..., 1, 0] = mixed
    return out


def fd_gradient(u, points, h=1e-6):
    points = np.atleast_2d(points)
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    return np.stack([(u(points + ex) - u(points - ex)) / (2 * h),
                     (u(points + ey) - u(points - ey)) / (2 * h)], axis=-1)


def interior_points(n, margin=0.1):
    return margin + (1 - 2 * margin) * RNG.random((n, 2))


def boundary_points(n):
    t = np.linspace(0.0, 1.0, n)
    pts = np.concatenate([
        np.column_stack([t, np.zeros(n)]),
        np.column_stack([t, np.ones(n)]),
        np.column_stack([np.zeros(n), t]),
        np.column_stack([np.ones(n), t])])
    return pts


def test_test1_coefficient_value_on_spike_line():
    p = problem1()
    pts = np.column_stack([np.full(5, 0.5), np.linspace(0, 1, 5)])
    a_vals = p.coefficients.matrix(pts)[:, 1, 1]
    assert np.allclose(a_vals, -np.log(1e-10) + 1.0, atol=1e-12)
    assert a_vals[0] == pytest.approx(24.0259, abs=1e-4)


def test_test1_solution_and_forcing():
    p = problem1()
    assert p.u(np.array([[0.5, 0.5]]))[0] == pytest.approx(1.0, abs=1e-14)
    assert np.abs(p.u(boundary_points(30))).max() < 1e-12

    pts = interior_points(10)
    pts = pts[np.abs(pts[:, 0] - 0.5) > 0.05]
    hess = fd_hessian(p.u, pts)
    a_mat = p.coefficients.matrix(pts)
    f_fd = -np.einsum("pmn,pmn->p", a_mat, hess)
    f_val = p.f(pts)
    assert np.abs(f_fd - f_val).max() / np.abs(f_val).max() < 1e-6


def test_test2_coefficient_values():
    p = problem2()
    b = p.coefficients.b
    assert b(np.array([[1.0, 1.0]]))[0] == pytest.approx(1.0, abs=1e-14)
    assert np.abs(b(np.column_stack([np.zeros(5), np.linspace(0, 1, 5)]))).max() == 0.0

    eigmin = np.linalg.eigvalsh(p.coefficients.matrix(np.array([[1.0, 1.0]]))[0]).min()
    assert eigmin == pytest.approx((3 - np.sqrt(5)) / 2, abs=1e-12)


def test_test2_forcing_against_finite_differences():
    p = problem2()
    pts = interior_points(10)
    hess = fd_hessian(p.u, pts)
    a_mat = p.coefficients.matrix(pts)
    f_fd = -np.einsum("pmn,pmn->p", a_mat, hess)
    assert np.abs(f_fd - p.f(pts)).max() / np.abs(p.f(pts)).max() < 1e-6


def test_test2_forcing_finite_on_axes():
    p = problem2()
    pts = boundary_points(50)
    assert np.all(np.isfinite(p.f(pts)))


def test_test3a_center_value_and_interface():
    p = problem3a()
    assert p.u(np.array([[0.5, 0.5]]))[0] == pytest.approx(0.5, abs=1e-14)

    # u and grad u vanish on the circle |x - 1/2|^2 = 1/8
    t = np.linspace(0, 2 * np.pi, 40, endpoint=False)
    r = np.sqrt(1 / 8)
    circle = 0.5 + r * np.column_stack([np.cos(t), np.sin(t)])
    assert np.abs(p.u(circle)).max() < 1e-13
    assert np.abs(p.grad_u(circle)).max() < 1e-12

    outside = np.array([[0.05, 0.05], [0.95, 0.9], [0.5, 0.97]])
    assert np.abs(p.u(outside)).max() == 0.0
    assert np.abs(p.f(outside)).max() == 0.0


def test_test3a_forcing_against_finite_differences():
    p = problem3a()
    pts = interior_points(40)
    dist = np.sqrt(((pts - 0.5) ** 2).sum(axis=1))
    pts = pts[np.abs(dist - np.sqrt(1 / 8)) > 0.02]       # stay off the interface
    pts = pts[np.abs(pts[:, 0] - 0.5) > 0.05]
    hess = fd_hessian(p.u, pts)
    a_mat = p.coefficients.matrix(pts)
    f_fd = -np.einsum("pmn,pmn->p", a_mat, hess)
    scale = max(np.abs(p.f(pts)).max(), 1.0)
    assert np.abs(f_fd - p.f(pts)).max() / scale < 1e-5


def test_test3b_boundary_and_origin():
    p = problem3b()
    pts = boundary_points(30)
    pts = pts[(pts**2).sum(axis=1) > 0]
    assert np.abs(p.u(pts)).max() < 1e-12
    with pytest.raises(ValueError, match="origin"):
        p.u(np.array([[0.0, 0.0]]))


def test_test3b_forcing_against_finite_differences():
    p = problem3b()
    pts = interior_points(20, margin=0.25)
    hess = fd_hessian(p.u, pts, h=5e-5)
    a_mat = p.coefficients.matrix(pts)
    f_fd = -np.einsum("pmn,pmn->p", a_mat, hess)
    assert np.abs(f_fd - p.f(pts)).max() / np.abs(p.f(pts)).max() < 1e-5


@pytest.mark.parametrize("pid", ["1", "2", "3a", "3b"])
def test_pde_residual_at_random_points(pid):
    p = get_problem(pid)
    pts = interior_points(1000, margin=0.02)
    if pid == "3a":
        dist = np.sqrt(((pts - 0.5) ** 2).sum(axis=1))
        pts = pts[np.abs(dist - np.sqrt(1 / 8)) > 1e-3]
    a_mat = p.coefficients.matrix(pts)
    resid = p.f(pts) + np.einsum("pmn,pmn->p", a_mat, p.hess_u(pts))
    assert np.abs(resid).max() < 1e-9 * max(1.0, np.abs(p.f(pts)).max())


@pytest.mark.parametrize("pid", ["1", "2", "3a", "3b"])
def test_boundary_compliance(pid):
    p = get_problem(pid)
    pts = boundary_points(40)
    pts = pts[(pts**2).sum(axis=1) > 0]
    assert np.abs(p.u(pts)).max() < 1e-12


@pytest.mark.parametrize("pid", ["1", "2", "3a", "3b"])
def test_uniform_ellipticity_sampled(pid):
    p = get_problem(pid)
    gamma = p.coefficients.ellipticity_constant()
    assert gamma > 0
    if pid == "2":
        assert gamma > 0.38


def test_gradient_closures_against_finite_differences():
    for pid in ("1", "2", "3a", "3b"):
        p = get_problem(pid)
        pts = interior_points(15, margin=0.2)
        fd = fd_gradient(p.u, pts)
        assert np.abs(fd - p.grad_u(pts)).max() < 1e-8 * max(1.0, np.abs(fd).max())


def test_test1_divergence_free_coefficient():
    p = problem1()
    pts = interior_points(8)
    assert np.abs(p.coefficients.divergence(pts)).max() == 0.0


def test_test2_divergence_matches_fd():
    p = problem2()
    pts = interior_points(8, margin=0.3)
    b = p.coefficients.b
    h = 1e-6
    db_dx = (b(pts + [h, 0]) - b(pts - [h, 0])) / (2 * h)
    db_dy = (b(pts + [0, h]) - b(pts - [0, h])) / (2 * h)
    da = p.coefficients.divergence(pts)
    assert np.abs(da[:, 0] - db_dy).max() < 1e-7
    assert np.abs(da[:, 1] - db_dx).max() < 1e-7


def test_unknown_problem_id_rejected():
    with pytest.raises(ValueError):
        get_problem("4")
