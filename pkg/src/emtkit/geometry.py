"""Metric geometry over jets: connection, curvature, and Lie-derivative calculus.

Everything here is evaluated at a batch of sample points wrapped in a
:class:`Frame`: the metric and its exact coordinate derivatives (as jets),
the inverse metric, the volume factor sqrt|det g|, the Christoffel symbols,
and (lazily) the curvature tensors.

Index layout conventions used throughout:

* ``partial_tensor`` and ``covariant_derivative`` append the new covariant
  slot last, so ``(grad T)[..., a] = D_a T[...]``.
* ``gamma[b, c, a]`` holds Gamma^b_{ca}.
* ``riemann[e, c, a, b]`` holds R^e_{cab}, the convention fixed by
  ``(D_a D_b - D_b D_a) v^e = R^e_{cab} v^c``.
* ``ricci[c, b] = riemann[a, c, a, b]``.

The covariant derivative of an arbitrary tensor is computed through the
index-replacement map in one stroke:

    D_a T = d_a T + Gamma^b_{ca} (tilde T)^c_b

which reproduces the usual one-Gamma-per-slot prescription for every rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .jets import (
    Jet,
    constant_jet,
    differentiate,
    jabs,
    jet_einsum,
    jexp,
    jet_map,
    jsqrt,
    lift,
)
from .tensors import TensorValue, contract, tilde, transpose_slots

__all__ = [
    "DegenerateMetricError",
    "MetricField",
    "TensorField",
    "VectorField",
    "Frame",
    "geometry_at",
    "evaluate",
    "jet_matrix_inverse",
    "jet_det",
    "partial_tensor",
    "covariant_derivative",
    "covariant_divergence",
    "lie_derivative",
    "curvature_commutator_residual",
    "tilde_gradient_commutator_residual",
    "lie_nabla_commutator",
    "lie_nabla_from_connection",
    "lie_connection_tensor",
    "christoffel_deformation",
    "killing_residual",
    "parallel_residual",
    "volume_lie_residual",
]

_DEGENERATE_TOL = 1e-12


class DegenerateMetricError(RuntimeError):
    """Metric determinant too close to zero at a sample point."""


@dataclass(frozen=True)
class MetricField:
    """Coordinate chart plus a map from coordinate jets to metric components."""

    name: str
    n: int
    signature: tuple
    fn: Callable[[list[Jet]], Jet]
    coord_names: tuple = ()


@dataclass(frozen=True)
class TensorField:
    """Map from coordinate jets to tensor components of fixed variance."""

    variance: tuple
    fn: Callable[[list[Jet]], Jet]
    name: str = ""


@dataclass(frozen=True)
class VectorField:
    """Contravariant vector field, optionally claiming Killing/parallel status."""

    fn: Callable[[list[Jet]], Jet]
    name: str = ""
    claimed_killing: bool = False
    claimed_parallel: bool = False

    @property
    def variance(self):
        return ("u",)


def jet_matrix_inverse(g: Jet) -> Jet:
    """Inverse of a jet-valued matrix via the truncated Neumann series.

    Writing g = g0 (I + g0^-1 N) with N the derivative-only part, the series
    for (I + g0^-1 N)^-1 terminates exactly at the jet order because N has a
    vanishing value part.
    """
    a0 = g.data[0]
    inv0 = np.linalg.inv(a0)
    if g.order == 0:
        return Jet(g.nvars, 0, 2, [inv0])
    N = Jet(g.nvars, g.order, 2, [np.zeros(a0.shape), *g.data[1:]])
    B = jet_einsum("ij,jk->ik", -inv0, N)
    total = constant_jet(inv0, g.nvars, g.order, vdim=2)
    P = total
    for _ in range(g.order):
        P = jet_einsum("ij,jk->ik", B, P)
        total = total + P
    return total


def jet_det(g: Jet) -> Jet:
    """Determinant of a jet-valued matrix: det(g0) * exp(tr log(I + g0^-1 N))."""
    a0 = g.data[0]
    det0 = np.linalg.det(a0)
    if g.order == 0:
        return Jet(g.nvars, 0, 0, [det0])
    inv0 = np.linalg.inv(a0)
    N = Jet(g.nvars, g.order, 2, [np.zeros(a0.shape), *g.data[1:]])
    M = jet_einsum("ij,jk->ik", inv0, N)
    P = M
    series = None
    for k in range(1, g.order + 1):
        tr = jet_map("ii->", P)
        term = ((-1.0) ** (k - 1) / k) * tr
        series = term if series is None else series + term
        if k < g.order:
            P = jet_einsum("ij,jk->ik", P, M)
    return det0 * jexp(series)


def partial_tensor(t: TensorValue) -> TensorValue:
    """Coordinate partials as an extra covariant slot appended last."""
    if not isinstance(t.components, Jet):
        raise TypeError("partial_tensor needs jet-valued components")
    return TensorValue(t.variance + ("d",), t.n, differentiate(t.components, keep=t.n))


class Frame:
    """Geometry of one metric evaluated at a batch of sample points."""

    def __init__(self, metric: MetricField, coords: list[Jet], g: TensorValue):
        self.metric = metric
        self.n = metric.n
        self.coords = coords
        self.order = g.components.order
        self.g = g
        # plain determinant first: jet_det would invert the value part and
        # blow up with a linear-algebra error before we can diagnose anything
        if np.min(np.abs(np.linalg.det(g.components.data[0]))) <= _DEGENERATE_TOL:
            raise DegenerateMetricError(
                f"|det g| <= {_DEGENERATE_TOL} at a sample point of metric "
                f"'{metric.name}'"
            )
        self.det = jet_det(g.components)
        self.sqrt_g = jsqrt(jabs(self.det))
        self.ginv = TensorValue(("u", "u"), self.n, jet_matrix_inverse(g.components))
        self.gamma = self._christoffel()

    def _christoffel(self) -> TensorValue:
        dg = partial_tensor(self.g)          # [a, b, c] = d_c g_ab
        t1 = dg                               # [d, a, c] = d_c g_da
        t2 = transpose_slots(dg, (0, 2, 1))   # [d, a, c] -> d_a g_dc
        t3 = transpose_slots(dg, (2, 1, 0))   # [d, a, c] -> d_d g_ca
        X = t1 + t2 - t3
        comps = jet_einsum("bd,dac->bca", self.ginv.components, X.components)
        return TensorValue(("u", "d", "d"), self.n, _half(comps))

    @cached_property
    def riemann(self) -> TensorValue:
        dG = partial_tensor(self.gamma)       # [e, c, b, a] = d_a Gamma^e_{cb}
        r1 = transpose_slots(dG, (0, 1, 3, 2))  # [e, c, a, b] = d_a Gamma^e_{cb}
        r2 = dG                                 # [e, c, a, b] reading = d_b Gamma^e_{ca}
        gg1 = jet_einsum("eda,dcb->ecab", self.gamma.components, self.gamma.components)
        gg2 = jet_einsum("edb,dca->ecab", self.gamma.components, self.gamma.components)
        comps = r1.components - r2.components + gg1 - gg2
        return TensorValue(("u", "d", "d", "d"), self.n, comps)

    @cached_property
    def ricci(self) -> TensorValue:
        return contract(self.riemann, 0, 2)

    @cached_property
    def ricci_scalar(self) -> Jet:
        return jet_einsum("ab,ab->", self.ginv.components, self.ricci.components)


def _half(comps):
    return comps * 0.5 if isinstance(comps, Jet) else 0.5 * comps


def geometry_at(metric: MetricField, points: np.ndarray, order: int) -> Frame:
    """Evaluate the metric geometry at sample points.

    ``points`` has shape batch + (k,) with k >= metric.n; any extra columns
    become auxiliary differentiation variables (they never appear as tensor
    slots, only as extra derivative directions).
    """
    points = np.asarray(points, dtype=float)
    k = points.shape[-1]
    if k < metric.n:
        raise ValueError(f"points provide {k} coordinates, metric needs {metric.n}")
    coords = lift(points, k, order)
    comps = metric.fn(coords)
    g = TensorValue(("d", "d"), metric.n, comps)
    asym = np.max(np.abs(comps.data[0] - np.swapaxes(comps.data[0], -1, -2)))
    if asym > 1e-12:
        raise ValueError(f"metric '{metric.name}' returned non-symmetric components")
    return Frame(metric, coords, g)


def evaluate(fieldlike, frame: Frame) -> TensorValue:
    """Evaluate a TensorField/VectorField on a frame's coordinate jets.

    Fields only ever see the manifold coordinates; auxiliary differentiation
    variables riding along on the frame stay hidden from them.
    """
    comps = fieldlike.fn(frame.coords[: frame.n])
    return TensorValue(tuple(fieldlike.variance), frame.n, comps)


def covariant_derivative(t: TensorValue, frame: Frame) -> TensorValue:
    """Levi-Civita covariant derivative, new covariant slot appended last."""
    dt = partial_tensor(t)
    if t.rank == 0:
        return dt
    S = "".join(chr(ord("i") + k) for k in range(t.rank))
    tt = tilde(t)  # [S, x(up), y(down)]
    corr = jet_einsum(f"{S}xy,yxz->{S}z", tt.components, frame.gamma.components)
    return dt + TensorValue(t.variance + ("d",), t.n, corr)


def covariant_divergence(t: TensorValue, frame: Frame, slot: int = 0) -> TensorValue:
    """Contract the appended derivative slot of D T with the given up slot."""
    if t.variance[slot] != "u":
        raise ValueError("divergence needs a contravariant slot")
    dt = covariant_derivative(t, frame)
    return contract(dt, slot, dt.rank - 1)


def lie_derivative(t: TensorValue, xi: TensorValue, frame: Frame | None = None) -> TensorValue:
    """Lie derivative along xi through the index-replacement map.

    With a frame, uses covariant derivatives; without, coordinate partials.
    The two agree identically for the Levi-Civita connection.
    """
    if xi.variance != ("u",):
        raise ValueError("xi must be a contravariant vector")
    if frame is None:
        dt, dxi = partial_tensor(t), partial_tensor(xi)
    else:
        dt, dxi = covariant_derivative(t, frame), covariant_derivative(xi, frame)
    S = "".join(chr(ord("i") + k) for k in range(t.rank))
    term1 = jet_einsum(f"{S}a,a->{S}", dt.components, xi.components)
    tt = tilde(t)
    term2 = jet_einsum(f"{S}xy,yx->{S}", tt.components, dxi.components)
    return TensorValue(t.variance, t.n, term1 - term2)


def curvature_commutator_residual(t: TensorValue, frame: Frame) -> TensorValue:
    """(D_a D_b - D_b D_a) T minus its curvature expression R^d_{cab} (tilde T)^c_d."""
    d1 = covariant_derivative(t, frame)
    d2 = covariant_derivative(d1, frame)       # [S, b, a]
    r = t.rank
    perm = list(range(r)) + [r + 1, r]
    lhs = transpose_slots(d2, perm) - d2        # [S, a, b]: D_a D_b T - D_b D_a T
    S = "".join(chr(ord("i") + k) for k in range(r))
    tt = tilde(t)
    rhs = jet_einsum(f"{S}cd,dcab->{S}ab", tt.components, frame.riemann.components)
    return lhs - TensorValue(t.variance + ("d", "d"), t.n, rhs)


def tilde_gradient_commutator_residual(t: TensorValue, frame: Frame) -> TensorValue:
    """Residual of: tilde(D_e T)^a_b = D_e (tilde T)^a_b - delta^a_e D_b T."""
    r = t.rank
    lhs = tilde(covariant_derivative(t, frame))          # [S, e, a, b]
    rhs1 = covariant_derivative(tilde(t), frame)          # [S, a, b, e]
    perm = list(range(r)) + [r + 2, r, r + 1]
    rhs1 = transpose_slots(rhs1, perm)                    # [S, e, a, b]
    S = "".join(chr(ord("i") + k) for k in range(r))
    dt = covariant_derivative(t, frame)
    rhs2 = jet_einsum(f"{S}b,ae->{S}eab", dt.components, np.eye(t.n))
    rhs2 = TensorValue(t.variance + ("d", "u", "d"), t.n, rhs2)
    return lhs - rhs1 + rhs2


def lie_nabla_commutator(t: TensorValue, xi: TensorValue, frame: Frame) -> TensorValue:
    """[Lie_xi, D] T computed directly: Lie(D T) - D(Lie T), slot appended last."""
    a = lie_derivative(covariant_derivative(t, frame), xi, frame)
    b = covariant_derivative(lie_derivative(t, xi, frame), frame)
    return a - b


def lie_connection_tensor(xi: TensorValue, frame: Frame, form: str = "direct") -> TensorValue:
    """The tensor C^c_{ba} mediating [Lie_xi, D]; slots ordered [c, b, a].

    form='direct':  C^c_{ba} = R^c_{bda} xi^d + D_a D_b xi^c.
    form='metric':  C^d_{ab} = 1/2 g^{dc} (D_a h_bc + D_b h_ac - D_c h_ab)
    with h = Lie_xi g, transposed into the same [c, b, a] layout.
    """
    if form == "direct":
        rterm = jet_einsum("cbda,d->cba", frame.riemann.components, xi.components)
        ddxi = covariant_derivative(covariant_derivative(xi, frame), frame)  # [c, b, a]
        return TensorValue(("u", "d", "d"), frame.n, rterm) + ddxi
    if form == "metric":
        h = lie_derivative(frame.g, xi, frame)
        defo = christoffel_deformation(h, frame)      # [d, a, b]
        return transpose_slots(defo, (0, 2, 1))       # [d, b, a]
    raise ValueError(f"unknown form {form!r}")


def christoffel_deformation(h: TensorValue, frame: Frame) -> TensorValue:
    """Linearized Christoffel symbols for a metric perturbation h (slots [d, a, b]).

    delta Gamma^d_{ab} = 1/2 g^{dc} (D_a h_bc + D_b h_ac - D_c h_ab).
    """
    dh = covariant_derivative(h, frame)           # [x, y, e] = D_e h_xy
    t1 = transpose_slots(dh, (1, 2, 0))           # [c, a, b] = D_a h_bc
    t2 = transpose_slots(dh, (1, 0, 2))           # [c, a, b] = D_b h_ac
    t3 = transpose_slots(dh, (2, 0, 1))           # [c, a, b] = D_c h_ab
    W = t1 + t2 - t3
    comps = jet_einsum("dc,cab->dab", frame.ginv.components, W.components)
    return TensorValue(("u", "d", "d"), frame.n, _half(comps))


def lie_nabla_from_connection(t: TensorValue, C: TensorValue) -> TensorValue:
    """[Lie_xi, D] T from the connection tensor: D_{xi a} T = C^c_{ba} (tilde T)^b_c."""
    S = "".join(chr(ord("i") + k) for k in range(t.rank))
    tt = tilde(t)  # [S, b(up), c(down)]
    comps = jet_einsum(f"{S}bc,cba->{S}a", tt.components, C.components)
    return TensorValue(t.variance + ("d",), t.n, comps)


def killing_residual(xi: TensorValue, frame: Frame) -> TensorValue:
    return lie_derivative(frame.g, xi, frame)


def parallel_residual(xi: TensorValue, frame: Frame) -> TensorValue:
    return covariant_derivative(xi, frame)


def volume_lie_residual(xi: TensorValue, frame: Frame) -> Jet:
    """Residual of: Lie_xi sqrt|g| = sqrt|g| D_a xi^a, with the left side
    expanded as (1/2) sqrt|g| g^{ab} Lie_xi g_ab."""
    h = lie_derivative(frame.g, xi, frame)
    lhs = 0.5 * frame.sqrt_g * jet_einsum("ab,ab->", frame.ginv.components, h.components)
    div = contract(covariant_derivative(xi, frame), 0, 1)
    rhs = frame.sqrt_g * div.components
    return lhs - rhs
