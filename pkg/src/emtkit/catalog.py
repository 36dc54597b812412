"""Concrete spacetimes, symmetry vectors, and field scenarios used by the
verification suites.

Everything here is deterministic: random fields and sample points derive from
explicit seeds, and every claimed property (Killing vectors actually Killing,
on-shell scenarios actually solving their field equations) is re-checked
numerically by :func:`verify_spacetime_claims` / :func:`verify_scenario_claims`
before a suite trusts it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .jets import jsin, jcos, jexp, jlog, jreciprocal, jsqrt, jet_stack
from .geometry import (
    MetricField,
    TensorField,
    VectorField,
    evaluate,
    geometry_at,
    killing_residual,
    parallel_residual,
)
from .tensors import max_abs
from .fieldtheory import (
    FieldSpec,
    LagrangianTheory,
    evaluate_theory,
    maxwell_theory,
    scalar_theory,
)

__all__ = [
    "CatalogClaimError",
    "Spacetime",
    "Scenario",
    "SPACETIMES",
    "SCENARIOS",
    "spacetime",
    "scenario",
    "sample_points",
    "random_tensor_field",
    "random_vector_field",
    "bump_perturbation",
    "verify_spacetime_claims",
    "verify_scenario_claims",
]


class CatalogClaimError(RuntimeError):
    """A catalog entry failed the numerical check of its own claims."""


@dataclass(frozen=True)
class Spacetime:
    metric: MetricField
    box: tuple
    killing: tuple = ()

    @property
    def name(self):
        return self.metric.name

    @property
    def n(self):
        return self.metric.n


@dataclass(frozen=True)
class Scenario:
    name: str
    spacetime: str
    theory: LagrangianTheory
    fields: dict
    on_shell: bool
    gauge_field: str | None = None  # label of a one-form with gauge freedom


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


def _flat_fn(n):
    eta = np.diag([-1.0] + [1.0] * (n - 1))

    def fn(coords):
        z = coords[0] * 0.0
        return jet_stack([[(eta[i, j] + z if i == j else z) for j in range(n)]
                          for i in range(n)])

    return fn


def _schwarzschild_fn(mass):
    def fn(coords):
        t, r, th, ph = coords
        f = 1.0 - 2.0 * mass / r
        z = t * 0.0
        s2 = jsin(th) * jsin(th)
        return jet_stack([
            [-f, z, z, z],
            [z, jreciprocal(f), z, z],
            [z, z, r * r, z],
            [z, z, z, r * r * s2],
        ])
    return fn


BUMP_AMP = 0.3
BUMP_WIDTH = 1.5


def _bump2_fn(coords):
    # conformally flat Riemannian plane, e^{2 phi} delta_ij with a Gaussian phi
    x, y = coords
    phi = BUMP_AMP * jexp(-(x * x + y * y) / (BUMP_WIDTH ** 2))
    w = jexp(2.0 * phi)
    z = x * 0.0
    return jet_stack([[w, z], [z, w]])


def bump2_conformal_factor(coords):
    x, y = coords
    return BUMP_AMP * jexp(-(x * x + y * y) / (BUMP_WIDTH ** 2))


def _const_vec(n, i):
    def fn(coords):
        z = coords[0] * 0.0
        return jet_stack([z + 1.0 if k == i else z for k in range(n)])
    return VectorField(fn, name=f"translation-{i}", claimed_killing=True,
                       claimed_parallel=True)


def _mink_killing(n):
    vecs = [_const_vec(n, i) for i in range(n)]
    # rotations among spatial axes: x^i d_j - x^j d_i
    for i in range(1, n):
        for j in range(i + 1, n):
            def rot(coords, i=i, j=j):
                z = coords[0] * 0.0
                comps = [z] * n
                comps[j] = coords[i] + z
                comps[i] = -coords[j] + z
                return jet_stack(comps)
            vecs.append(VectorField(rot, name=f"rotation-{i}{j}", claimed_killing=True))
    # boosts: t d_i + x^i d_t
    for i in range(1, n):
        def boost(coords, i=i):
            z = coords[0] * 0.0
            comps = [z] * n
            comps[0] = coords[i] + z
            comps[i] = coords[0] + z
            return jet_stack(comps)
        vecs.append(VectorField(boost, name=f"boost-{i}", claimed_killing=True))
    return tuple(vecs)


def _schwarzschild_killing():
    def timelike(coords):
        z = coords[0] * 0.0
        return jet_stack([z + 1.0, z, z, z])

    def axial(coords):
        z = coords[0] * 0.0
        return jet_stack([z, z, z, z + 1.0])

    def rot_a(coords):
        t, r, th, ph = coords
        z = t * 0.0
        return jet_stack([z, z, jsin(ph), jcos(ph) * jcos(th) / jsin(th)])

    def rot_b(coords):
        t, r, th, ph = coords
        z = t * 0.0
        return jet_stack([z, z, jcos(ph), -jsin(ph) * jcos(th) / jsin(th)])

    return tuple(
        VectorField(fn, name=nm, claimed_killing=True)
        for fn, nm in [(timelike, "static-time"), (axial, "axial"),
                       (rot_a, "rotation-a"), (rot_b, "rotation-b")]
    )


def _bump2_killing():
    def rot(coords):
        x, y = coords
        return jet_stack([-y + x * 0.0, x + y * 0.0])
    return (VectorField(rot, name="rotation", claimed_killing=True),)


SPACETIMES = {
    "minkowski2": Spacetime(
        MetricField("minkowski2", 2, "mostly-plus", _flat_fn(2), ("t", "x")),
        box=((-2.0, 2.0), (-2.0, 2.0)),
        killing=_mink_killing(2),
    ),
    "minkowski4": Spacetime(
        MetricField("minkowski4", 4, "mostly-plus", _flat_fn(4), ("t", "x", "y", "z")),
        box=((-2.0, 2.0),) * 4,
        killing=_mink_killing(4),
    ),
    "schwarzschild": Spacetime(
        MetricField("schwarzschild", 4, "mostly-plus", _schwarzschild_fn(1.0),
                    ("t", "r", "theta", "phi")),
        box=((-1.0, 1.0), (4.0, 12.0), (0.4, math.pi - 0.4), (0.0, 2.0 * math.pi)),
        killing=_schwarzschild_killing(),
    ),
    "bump2": Spacetime(
        MetricField("bump2", 2, "euclidean", _bump2_fn, ("x", "y")),
        box=((-3.0, 3.0), (-3.0, 3.0)),
        killing=_bump2_killing(),
    ),
}


def spacetime(name: str) -> Spacetime:
    try:
        return SPACETIMES[name]
    except KeyError:
        raise KeyError(f"unknown spacetime '{name}' "
                       f"(have: {', '.join(sorted(SPACETIMES))})") from None


# --------------------------------------------------------------------------
# field scenarios
# --------------------------------------------------------------------------


def _plane_scalar(n, kvec, amp=1.0):
    kvec = np.asarray(kvec, float)

    def fn(coords):
        ph = kvec[0] * coords[0]
        for i in range(1, n):
            ph = ph + kvec[i] * coords[i]
        return amp * jsin(ph)

    return TensorField((), fn, name="plane-scalar")


def _plane_oneform(n, kvec, pol, amp=1.0, harmonic=1.0):
    kvec = np.asarray(kvec, float)
    pol = np.asarray(pol, float)

    def fn(coords):
        ph = kvec[0] * coords[0]
        for i in range(1, n):
            ph = ph + kvec[i] * coords[i]
        s = jsin(harmonic * ph)
        return jet_stack([amp * pol[i] * s for i in range(n)])

    return TensorField(("d",), fn, name="plane-oneform")


def _coulomb_oneform(charge=1.0):
    def fn(coords):
        t, x, y, z = coords
        r = jsqrt(x * x + y * y + z * z)
        zero = t * 0.0
        return jet_stack([charge / r, zero, zero, zero])
    return TensorField(("d",), fn, name="coulomb")


def _schwarzschild_coulomb(charge=1.0):
    def fn(coords):
        t, r, th, ph = coords
        zero = t * 0.0
        return jet_stack([charge / r, zero, zero, zero])
    return TensorField(("d",), fn, name="coulomb-radial")


def _schwarzschild_scalar(mass=1.0):
    def fn(coords):
        t, r, th, ph = coords
        return jlog(1.0 - 2.0 * mass / r)
    return TensorField((), fn, name="static-log")


def _gaussian_scalar():
    def fn(coords):
        t, x = coords
        return 0.8 * jexp(-(t * t + 0.5 * x * x)) + 0.1 * x
    return TensorField((), fn, name="gaussian-blob")


def _gradient_vector_theory():
    """Vector field with an unconstrained gradient kinetic term.

    Unlike the antisymmetrized field strength of electromagnetism, this
    Lagrangian feels the full covariant derivative, so its superpotential
    bracket is nonzero and the divergence subtraction in the metric tensor
    actually does work.  Used off shell.
    """

    def lag(ctx):
        dB = ctx.dpsi("B")                           # [b, a] = grad_a B_b
        X = ctx.einsum("ac,dc->ad", ctx.ginv, dB)    # grad^a B_d
        X2 = ctx.einsum("ad,bd->ab", X, ctx.ginv)    # grad^a B^b
        S = ctx.einsum("ba,ab->", dB, X2)
        return -0.5 * S

    return LagrangianTheory("gradient-vector", (FieldSpec("B", ("d",)),), lag)


def _gradient_vector_field():
    def fn(coords):
        t, x = coords
        return jet_stack([jsin(0.9 * x - 0.3 * t), jcos(0.7 * t + 0.4 * x)])
    return TensorField(("d",), fn, name="swirl")


_M2 = 0.5
_KX2 = 1.1
_SCALAR2_K = (math.sqrt(_KX2 * _KX2 + _M2 * _M2), -_KX2)

_M4 = 0.8
_K4_SP = (0.5, -0.7, 0.3)
_SCALAR4_K = (math.sqrt(sum(c * c for c in _K4_SP) + _M4 * _M4),) + _K4_SP

_EM_K1 = (1.0, 0.6, 0.8, 0.0)
_EM_E1 = (0.0, -0.8, 0.6, 0.5)
_EM_K2 = (1.0, 0.0, -0.6, 0.8)
_EM_E2 = (0.0, 1.0, 0.0, 0.0)


def _em_superposition():
    a = _plane_oneform(4, _EM_K1, _EM_E1)
    b = _plane_oneform(4, _EM_K2, _EM_E2, amp=0.7, harmonic=1.3)

    def fn(coords):
        return a.fn(coords) + b.fn(coords)

    return TensorField(("d",), fn, name="two-waves")


SCENARIOS = {
    "scalar-wave-2d": Scenario(
        "scalar-wave-2d", "minkowski2", scalar_theory(_M2),
        {"phi": _plane_scalar(2, _SCALAR2_K)}, on_shell=True),
    "scalar-wave-4d": Scenario(
        "scalar-wave-4d", "minkowski4", scalar_theory(_M4),
        {"phi": _plane_scalar(4, _SCALAR4_K)}, on_shell=True),
    "em-wave-4d": Scenario(
        "em-wave-4d", "minkowski4", maxwell_theory(),
        {"A": _plane_oneform(4, _EM_K1, _EM_E1)}, on_shell=True, gauge_field="A"),
    "em-two-waves-4d": Scenario(
        "em-two-waves-4d", "minkowski4", maxwell_theory(),
        {"A": _em_superposition()}, on_shell=True, gauge_field="A"),
    "coulomb-4d": Scenario(
        "coulomb-4d", "minkowski4", maxwell_theory(),
        {"A": _coulomb_oneform()}, on_shell=True, gauge_field="A"),
    "schwarzschild-scalar": Scenario(
        "schwarzschild-scalar", "schwarzschild", scalar_theory(0.0),
        {"phi": _schwarzschild_scalar()}, on_shell=True),
    "schwarzschild-coulomb": Scenario(
        "schwarzschild-coulomb", "schwarzschild", maxwell_theory(),
        {"A": _schwarzschild_coulomb()}, on_shell=True, gauge_field="A"),
    "scalar-blob-2d": Scenario(
        "scalar-blob-2d", "minkowski2", scalar_theory(0.6),
        {"phi": _gaussian_scalar()}, on_shell=False),
    "gradient-vector-2d": Scenario(
        "gradient-vector-2d", "minkowski2", _gradient_vector_theory(),
        {"B": _gradient_vector_field()}, on_shell=False),
}

_SCENARIO_BOXES = {
    # scenarios whose fields need a restricted sampling box inside the
    # spacetime's own box (singular loci excluded)
    "coulomb-4d": ((-1.0, 1.0), (1.0, 3.0), (1.0, 3.0), (1.0, 3.0)),
}


def scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario '{name}' "
                       f"(have: {', '.join(sorted(SCENARIOS))})") from None


def scenario_box(sc: Scenario):
    return _SCENARIO_BOXES.get(sc.name, spacetime(sc.spacetime).box)


# --------------------------------------------------------------------------
# deterministic sampling and random fields
# --------------------------------------------------------------------------


def sample_points(box, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return lo + (hi - lo) * rng.uniform(size=(count, len(box)))


def _poly_scalar_fn(box, rng, degree=3):
    """Random polynomial in box-centered scaled coordinates, O(1) on the box."""
    n = len(box)
    center = np.array([(b[0] + b[1]) / 2 for b in box])
    halfw = np.array([(b[1] - b[0]) / 2 for b in box])
    terms = []
    for total in range(degree + 1):
        for powers in _monomials(n, total):
            coef = rng.normal() / math.factorial(total + 1)
            terms.append((coef, powers))

    def fn(coords):
        u = [(coords[i] - center[i]) * (1.0 / halfw[i]) for i in range(n)]
        out = None
        for coef, powers in terms:
            t = None
            for i, p in enumerate(powers):
                for _ in range(p):
                    t = u[i] if t is None else t * u[i]
            t = coef if t is None else coef * t
            out = t if out is None else out + t
        return out + coords[0] * 0.0

    return fn


def _monomials(n, total):
    if n == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _monomials(n - 1, total - first):
            yield (first,) + rest


def random_tensor_field(variance, box, seed: int) -> TensorField:
    """Seeded polynomial tensor field with O(1) components on the box."""
    rng = np.random.default_rng(seed)
    n = len(box)
    rank = len(variance)

    def build(shape_left):
        if not shape_left:
            return _poly_scalar_fn(box, rng)
        return [build(shape_left[1:]) for _ in range(shape_left[0])]

    tree = build((n,) * rank)

    def fn(coords):
        def walk(node):
            if isinstance(node, list):
                return [walk(c) for c in node]
            return node(coords)
        return jet_stack(walk(tree)) if rank else tree(coords)

    return TensorField(tuple(variance), fn, name=f"random-{seed}")


def random_vector_field(box, seed: int) -> VectorField:
    t = random_tensor_field(("u",), box, seed)
    return VectorField(t.fn, name=f"random-xi-{seed}")


def bump_perturbation(box, seed: int, scale: float = 0.1,
                      width_frac: float = 0.18) -> TensorField:
    """Symmetric (0,2) perturbation with a Gaussian envelope that is
    negligible on the box boundary; suitable for compact-support variation."""
    rng = np.random.default_rng(seed)
    n = len(box)
    M = rng.normal(size=(n, n))
    M = scale * (M + M.T) / 2.0
    center = np.array([(b[0] + b[1]) / 2 for b in box])
    width = np.array([(b[1] - b[0]) * width_frac for b in box])

    def fn(coords):
        r2 = None
        for i in range(n):
            u = (coords[i] - center[i]) * (1.0 / width[i])
            r2 = u * u if r2 is None else r2 + u * u
        bump = jexp(-r2)
        return jet_stack([[M[i, j] * bump for j in range(n)] for i in range(n)])

    return TensorField(("d", "d"), fn, name=f"bump-{seed}")


# --------------------------------------------------------------------------
# claim verification
# --------------------------------------------------------------------------


def verify_spacetime_claims(st: Spacetime, seed: int = 0, count: int = 12,
                            tol: float = 1e-10):
    """Check every claimed Killing/parallel property at random points."""
    pts = sample_points(st.box, count, seed)
    fr = geometry_at(st.metric, pts, 2)
    for v in st.killing:
        xi = evaluate(v, fr)
        if v.claimed_killing:
            r = max_abs(killing_residual(xi, fr))
            if r > tol:
                raise CatalogClaimError(
                    f"{st.name}: vector '{v.name}' claims Killing, "
                    f"residual {r:.3e} > {tol:.1e}")
        if v.claimed_parallel:
            r = max_abs(parallel_residual(xi, fr))
            if r > tol:
                raise CatalogClaimError(
                    f"{st.name}: vector '{v.name}' claims parallel, "
                    f"residual {r:.3e} > {tol:.1e}")


def verify_scenario_claims(sc: Scenario, seed: int = 0, count: int = 12,
                           gate: float = 1e-7):
    """Check the scenario's on-shell claim at random points."""
    st = spacetime(sc.spacetime)
    pts = sample_points(scenario_box(sc), count, seed)
    fr = geometry_at(st.metric, pts, 3)
    tf = evaluate_theory(sc.theory, sc.fields, fr)
    r = tf.eom_max_residual()
    if sc.on_shell and r > gate:
        raise CatalogClaimError(
            f"scenario '{sc.name}' claims on-shell, equation-of-motion "
            f"residual {r:.3e} > {gate:.1e}")
    if not sc.on_shell and r <= gate:
        raise CatalogClaimError(
            f"scenario '{sc.name}' claims off-shell but satisfies the "
            f"field equations (residual {r:.3e})")
    return tf
