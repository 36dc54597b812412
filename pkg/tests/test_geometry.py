"""Geometry layer: Christoffels, curvature, Lie and covariant derivatives.

The Schwarzschild Christoffel symbols are checked against a symbolic
computation done from scratch with sympy, so a shared convention bug in the
numeric path cannot hide.
"""

import numpy as np
import pytest
import sympy as sp

from emtkit.catalog import (
    SPACETIMES,
    bump2_conformal_factor,
    random_tensor_field,
    random_vector_field,
    sample_points,
)
from emtkit.geometry import (
    DegenerateMetricError,
    MetricField,
    VectorField,
    covariant_derivative,
    curvature_commutator_residual,
    evaluate,
    geometry_at,
    killing_residual,
    lie_connection_tensor,
    lie_derivative,
    lie_nabla_commutator,
    lie_nabla_from_connection,
    tilde_gradient_commutator_residual,
    volume_lie_residual,
)
from emtkit.jets import jet_stack, lift
from emtkit.tensors import max_abs, value_array

SCHW = SPACETIMES["schwarzschild"]
MINK2 = SPACETIMES["minkowski2"]
BUMP2 = SPACETIMES["bump2"]

# A handful of interior Schwarzschild points, away from horizon and axis.
SCHW_PTS = np.array([
    [0.0, 5.0, 1.1, 0.7],
    [0.4, 3.2, 2.0, 4.1],
    [-0.8, 9.5, 0.9, 2.6],
])


def schw_frame(order=3):
    return geometry_at(SCHW.metric, SCHW_PTS, order)


def sympy_schwarzschild_gamma(point):
    """Christoffel symbols Gamma^b_{ca} at one point, computed symbolically."""
    t, r, th, ph = sp.symbols("t r theta phi", real=True)
    xs = (t, r, th, ph)
    f = 1 - 2 / r
    g = sp.diag(-f, 1 / f, r ** 2, r ** 2 * sp.sin(th) ** 2)
    ginv = g.inv()
    gamma = np.zeros((4, 4, 4))
    subs = dict(zip(xs, point))
    for b in range(4):
        for c in range(4):
            for a in range(4):
                expr = sum(
                    sp.Rational(1, 2) * ginv[b, d] * (
                        sp.diff(g[d, c], xs[a])
                        + sp.diff(g[d, a], xs[c])
                        - sp.diff(g[c, a], xs[d])
                    )
                    for d in range(4)
                )
                gamma[b, c, a] = float(expr.subs(subs))
    return gamma


def test_christoffel_matches_sympy():
    frame = schw_frame(order=2)
    got = value_array(frame.gamma)
    for i, pt in enumerate(SCHW_PTS):
        want = sympy_schwarzschild_gamma(pt)
        assert np.allclose(got[i], want, atol=1e-11), f"point {pt}"


def test_schwarzschild_is_ricci_flat():
    frame = schw_frame(order=2)
    assert np.max(np.abs(frame.ricci.components.data[0])) < 1e-10
    assert np.max(np.abs(frame.ricci_scalar.data[0])) < 1e-10


def test_bump2_ricci_scalar_closed_form():
    # For g = exp(2 phi) delta in two dimensions, R = -2 exp(-2 phi) lap(phi).
    pts = sample_points(BUMP2.box, 24, seed=3)
    frame = geometry_at(BUMP2.metric, pts, order=2)
    phi = bump2_conformal_factor(lift(pts, 2, 2))
    lap = phi.data[2][..., 0, 0] + phi.data[2][..., 1, 1]
    want = -2.0 * np.exp(-2.0 * phi.data[0]) * lap
    got = frame.ricci_scalar.data[0]
    assert np.allclose(got, want, atol=1e-11)


def test_metric_compatibility():
    frame = schw_frame(order=2)
    assert max_abs(covariant_derivative(frame.g, frame)) < 1e-12
    assert max_abs(covariant_derivative(frame.ginv, frame)) < 1e-12


def test_flat_lie_derivative_closed_form():
    # xi = (x1)^2 d_1 on the flat two dimensional metric:
    # (Lie_xi g)_11 = 2 d_1 xi_1 = 4 x1 and every other component vanishes.
    pts = np.array([[0.3, 1.5], [-0.2, 0.4]])
    frame = geometry_at(MINK2.metric, pts, order=2)

    def xi_fn(coords):
        t, x = coords
        return jet_stack([0.0 * x, x * x])

    xi = evaluate(VectorField(fn=xi_fn), frame)
    h = lie_derivative(frame.g, xi, frame)
    got = value_array(h)
    want = np.zeros_like(got)
    want[:, 1, 1] = 4.0 * pts[:, 1]
    assert np.allclose(got, want, atol=1e-13)


def test_lie_partial_and_covariant_forms_agree():
    pts = sample_points(SCHW.box, 8, seed=5)
    frame = geometry_at(SCHW.metric, pts, order=3)
    xi = evaluate(random_vector_field(SCHW.box, seed=21), frame)
    t = evaluate(random_tensor_field(("u", "d"), SCHW.box, seed=22), frame)
    a = lie_derivative(t, xi, frame)
    b = lie_derivative(t, xi, frame=None)
    assert max_abs(a - b) < 1e-10


def test_curvature_commutator_identity():
    frame = schw_frame(order=3)
    for variance in [("u",), ("d",), ("u", "d")]:
        t = evaluate(random_tensor_field(variance, SCHW.box, seed=31), frame)
        res = curvature_commutator_residual(t, frame)
        assert max_abs(res) < 1e-10, variance


def test_tilde_gradient_commutator_identity():
    frame = schw_frame(order=2)
    t = evaluate(random_tensor_field(("d", "u"), SCHW.box, seed=33), frame)
    res = tilde_gradient_commutator_residual(t, frame)
    assert max_abs(res) < 1e-11


def test_connection_tensor_two_forms_agree():
    frame = schw_frame(order=3)
    xi = evaluate(random_vector_field(SCHW.box, seed=41), frame)
    c_direct = lie_connection_tensor(xi, frame, form="direct")
    c_metric = lie_connection_tensor(xi, frame, form="metric")
    assert max_abs(c_direct - c_metric) < 1e-10


def test_lie_nabla_commutator_from_connection():
    frame = schw_frame(order=3)
    xi = evaluate(random_vector_field(SCHW.box, seed=43), frame)
    t = evaluate(random_tensor_field(("u", "d"), SCHW.box, seed=44), frame)
    direct = lie_nabla_commutator(t, xi, frame)
    C = lie_connection_tensor(xi, frame, form="direct")
    assert max_abs(direct - lie_nabla_from_connection(t, C)) < 1e-10


def test_killing_vectors_annihilate_metric():
    frame = schw_frame(order=2)
    for vf in SCHW.killing:
        xi = evaluate(vf, frame)
        assert max_abs(killing_residual(xi, frame)) < 1e-12, vf.name


def test_nonkilling_vector_fails_killing_residual():
    frame = schw_frame(order=2)
    xi = evaluate(random_vector_field(SCHW.box, seed=51), frame)
    assert max_abs(killing_residual(xi, frame)) > 1e-3


def test_volume_weight_flow_identity():
    pts = sample_points(BUMP2.box, 16, seed=6)
    frame = geometry_at(BUMP2.metric, pts, order=2)
    xi = evaluate(random_vector_field(BUMP2.box, seed=52), frame)
    res = volume_lie_residual(xi, frame)
    assert np.max(np.abs(res.data[0])) < 1e-12


def test_christoffel_against_finite_differences():
    # independent numeric check: central differences of the metric itself
    pt = np.array([0.0, 6.0, 1.3, 0.9])
    h = 1e-5
    n = 4

    def g_at(p):
        coords = lift(p[None, :], n, 0)
        return SCHW.metric.fn(coords).data[0][0]

    dg = np.zeros((n, n, n))  # [a, b, c] = d_c g_ab
    for c in range(n):
        e = np.zeros(n)
        e[c] = h
        dg[:, :, c] = (g_at(pt + e) - g_at(pt - e)) / (2 * h)
    ginv = np.linalg.inv(g_at(pt))
    want = np.zeros((n, n, n))
    for b in range(n):
        for c in range(n):
            for a in range(n):
                want[b, c, a] = 0.5 * sum(
                    ginv[b, d] * (dg[d, c, a] + dg[d, a, c] - dg[c, a, d])
                    for d in range(n)
                )
    frame = geometry_at(SCHW.metric, pt[None, :], 1)
    got = value_array(frame.gamma)[0]
    assert np.allclose(got, want, atol=1e-7)


def test_degenerate_metric_raises():
    def collapsing(coords):
        x, y = coords
        z = 0.0 * x
        return jet_stack([[x * x, z], [z, z + 1.0]])

    m = MetricField(name="pinch", n=2, signature=(1, 1), fn=collapsing)
    with pytest.raises(DegenerateMetricError):
        geometry_at(m, np.array([[0.0, 1.0]]), 1)


def test_too_few_coordinate_columns_rejected():
    with pytest.raises(ValueError):
        geometry_at(SCHW.metric, np.zeros((3, 2)), 1)
