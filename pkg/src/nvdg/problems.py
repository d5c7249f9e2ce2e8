"""Benchmark problems on the unit square.

Each problem prescribes the coefficient matrix A = [[1, b], [b, a]], an
exact solution u with homogeneous Dirichlet data, and the matching forcing
f = -A : D^2 u derived analytically.  All closures are vectorized over
point arrays of shape (n, 2).
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np


class CoefficientField:
    """Symmetric coefficient matrix A = [[1, b], [b, a]] built from closures.

    ``divergence`` returns the row vector DA (columnwise divergence of A)
    where it exists; ``ellipticity_constant`` samples the minimum eigenvalue
    on a uniform grid as a positivity witness.
    """

    def __init__(self, a, b, divergence=None, smoothness="coercive"):
        self.a = a
        self.b = b
        self._divergence = divergence
        self.smoothness = smoothness

    def matrix(self, points):
        points = np.atleast_2d(points)
        av = np.broadcast_to(self.a(points), points.shape[:-1]).astype(float)
        bv = np.broadcast_to(self.b(points), points.shape[:-1]).astype(float)
        out = np.empty(points.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 0, 1] = bv
        out[..., 1, 0] = bv
        out[..., 1, 1] = av
        return out

    def divergence(self, points):
        if self._divergence is None:
            raise ValueError("divergence of A is not available for this coefficient field")
        return self._divergence(np.atleast_2d(points))

    def max_eigenvalue(self, points):
        """Largest eigenvalue of A pointwise; sets the local penalty weight."""
        points = np.atleast_2d(points)
        av = np.broadcast_to(self.a(points), points.shape[:-1]).astype(float)
        bv = np.broadcast_to(self.b(points), points.shape[:-1]).astype(float)
        return 0.5 * ((1.0 + av) + np.sqrt((1.0 - av) ** 2 + 4.0 * bv**2))

    def ellipticity_constant(self, n=101):
        """Minimum eigenvalue of A over an n-by-n sample grid."""
        g = np.linspace(0.0, 1.0, n)
        xx, yy = np.meshgrid(g, g)
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        av = np.broadcast_to(self.a(pts), (pts.shape[0],)).astype(float)
        bv = np.broadcast_to(self.b(pts), (pts.shape[0],)).astype(float)
        eigmin = 0.5 * ((1.0 + av) - np.sqrt((1.0 - av) ** 2 + 4.0 * bv**2))
        return float(eigmin.min())


@dataclass
class BenchmarkProblem:
    id: str
    coefficients: CoefficientField
    u: Callable
    grad_u: Callable
    hess_u: Callable
    f: Callable
    regularity: str = "smooth"


def _sinsin(points):
    return np.sin(np.pi * points[..., 0]) * np.sin(np.pi * points[..., 1])


def _grad_sinsin(points):
    x, y = points[..., 0], points[..., 1]
    g = np.empty(points.shape)
    g[..., 0] = np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)
    g[..., 1] = np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)
    return g


def _hess_sinsin(points):
    x, y = points[..., 0], points[..., 1]
    ss = np.sin(np.pi * x) * np.sin(np.pi * y)
    cc = np.cos(np.pi * x) * np.cos(np.pi * y)
    h = np.empty(points.shape[:-1] + (2, 2))
    h[..., 0, 0] = -np.pi**2 * ss
    h[..., 1, 1] = -np.pi**2 * ss
    h[..., 0, 1] = np.pi**2 * cc
    h[..., 1, 0] = np.pi**2 * cc
    return h


def _log_coefficient(points):
    x = np.atleast_2d(points)[..., 0]
    return -np.log((x - 0.5) ** 2 + 1e-10) + 1.0


def test1() -> BenchmarkProblem:
    """Coercive operator: a = -ln((x1 - 1/2)^2 + 1e-10) + 1, b = 0."""
    A = CoefficientField(_log_coefficient, lambda p: 0.0,
                         divergence=lambda p: np.zeros(p.shape),
                         smoothness="coercive")

    def f(points):
        points = np.atleast_2d(points)
        return np.pi**2 * _sinsin(points) * (1.0 + _log_coefficient(points))

    return BenchmarkProblem("test1", A, _sinsin, _grad_sinsin, _hess_sinsin, f)


def test2() -> BenchmarkProblem:
    """Nondifferentiable operator: a = 2, b = (x1^2 x2^2)^(1/3)."""

    def b(points):
        points = np.atleast_2d(points)
        x, y = points[..., 0], points[..., 1]
        return np.cbrt(x * x * y * y)

    def divergence(points):
        # DA = (d_y b, d_x b); unbounded on the coordinate axes
        x, y = points[..., 0], points[..., 1]
        out = np.empty(points.shape)
        with np.errstate(divide="ignore"):
            out[..., 0] = (2.0 / 3.0) * np.cbrt(x * x / np.where(y > 0, y, np.inf))
            out[..., 1] = (2.0 / 3.0) * np.cbrt(y * y / np.where(x > 0, x, np.inf))
        return out

    A = CoefficientField(lambda p: 2.0, b, divergence=divergence,
                         smoothness="nondifferentiable")

    def f(points):
        points = np.atleast_2d(points)
        x, y = points[..., 0], points[..., 1]
        ss = np.sin(np.pi * x) * np.sin(np.pi * y)
        cc = np.cos(np.pi * x) * np.cos(np.pi * y)
        return np.pi**2 * (3.0 * ss - 2.0 * b(points) * cc)

    return BenchmarkProblem("test2", A, _sinsin, _grad_sinsin, _hess_sinsin, f)


def test3a() -> BenchmarkProblem:
    """H2-but-not-H3 solution: a compactly supported radial cosine bump."""
    A = test1().coefficients

    def _srad(points):
        d = np.atleast_2d(points) - 0.5
        return d, (d**2).sum(axis=-1)

    def u(points):
        _, s = _srad(points)
        return np.where(s <= 0.125, 0.25 * (np.cos(8.0 * np.pi * s) + 1.0), 0.0)

    def grad_u(points):
        d, s = _srad(points)
        inside = (s <= 0.125)[..., None]
        return np.where(inside, -4.0 * np.pi * np.sin(8.0 * np.pi * s)[..., None] * d, 0.0)

    def hess_u(points):
        d, s = _srad(points)
        cos = np.cos(8.0 * np.pi * s)
        sin = np.sin(8.0 * np.pi * s)
        h = -64.0 * np.pi**2 * cos[..., None, None] * (d[..., :, None] * d[..., None, :])
        h[..., 0, 0] -= 4.0 * np.pi * sin
        h[..., 1, 1] -= 4.0 * np.pi * sin
        return np.where((s <= 0.125)[..., None, None], h, 0.0)

    def f(points):
        points = np.atleast_2d(points)
        h = hess_u(points)
        return -(h[..., 0, 0] + _log_coefficient(points) * h[..., 1, 1])

    return BenchmarkProblem("test3a", A, u, grad_u, hess_u, f, regularity="H2 not H3")


def test3b() -> BenchmarkProblem:
    """H1-but-not-H2 solution: 100 x1(1-x1) x2(1-x2) / |x|, singular at the origin."""
    A = test1().coefficients

    def _parts(points):
        points = np.atleast_2d(points)
        r = np.sqrt((points**2).sum(axis=-1))
        if np.any(r == 0.0):
            raise ValueError("test3b data is singular at the origin")
        x, y = points[..., 0], points[..., 1]
        w = x * (1.0 - x) * y * (1.0 - y)
        dw = np.stack([(1.0 - 2.0 * x) * y * (1.0 - y),
                       x * (1.0 - x) * (1.0 - 2.0 * y)], axis=-1)
        return points, r, w, dw

    def u(points):
        _, r, w, _ = _parts(points)
        return 100.0 * w / r

    def grad_u(points):
        pts, r, w, dw = _parts(points)
        return 100.0 * (dw / r[..., None] - w[..., None] * pts / (r**3)[..., None])

    def hess_u(points):
        pts, r, w, dw = _parts(points)
        x, y = pts[..., 0], pts[..., 1]
        d2w = np.empty(pts.shape[:-1] + (2, 2))
        d2w[..., 0, 0] = -2.0 * y * (1.0 - y)
        d2w[..., 1, 1] = -2.0 * x * (1.0 - x)
        d2w[..., 0, 1] = (1.0 - 2.0 * x) * (1.0 - 2.0 * y)
        d2w[..., 1, 0] = d2w[..., 0, 1]
        r3 = (r**3)[..., None, None]
        r5 = (r**5)[..., None, None]
        cross = dw[..., :, None] * pts[..., None, :] + dw[..., None, :] * pts[..., :, None]
        eye = np.eye(2)
        h = (d2w / (r[..., None, None]) - cross / r3
             - w[..., None, None] * eye / r3
             + 3.0 * w[..., None, None] * (pts[..., :, None] * pts[..., None, :]) / r5)
        return 100.0 * h

    def f(points):
        points = np.atleast_2d(points)
        h = hess_u(points)
        return -(h[..., 0, 0] + _log_coefficient(points) * h[..., 1, 1])

    return BenchmarkProblem("test3b", A, u, grad_u, hess_u, f, regularity="H1 not H2")


_PROBLEMS = {"1": test1, "2": test2, "3a": test3a, "3b": test3b,
             "test1": test1, "test2": test2, "test3a": test3a, "test3b": test3b}


def get_problem(problem_id) -> BenchmarkProblem:
    key = str(problem_id).lower()
    if key not in _PROBLEMS:
        raise ValueError(f"unknown benchmark id {problem_id!r}; choose from 1, 2, 3a, 3b")
    return _PROBLEMS[key]()
