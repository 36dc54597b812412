"""Verification suites: named numerical checks of the tensor-calculus and
energy-momentum identities, grouped for the command line runner.

Each check measures a residual (or a required signal) over deterministic
sample points and compares it against a tolerance.  A check aggregates over
one or more targets (spacetimes or field scenarios); the report keeps the
worst value seen.  All randomness is seeded from the run configuration, so a
report is a pure function of its configuration.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import __version__
from .jets import Jet, jet_einsum
from .tensors import (
    TensorValue,
    contract,
    levi_civita,
    max_abs,
    tensor_product,
    tilde,
    transpose_slots,
    value_array,
)
from .geometry import (
    covariant_derivative,
    curvature_commutator_residual,
    evaluate,
    geometry_at,
    killing_residual,
    lie_connection_tensor,
    lie_derivative,
    lie_nabla_commutator,
    lie_nabla_from_connection,
    parallel_residual,
    partial_tensor,
    tilde_gradient_commutator_residual,
    volume_lie_residual,
)
from .fieldtheory import (
    OffShellError,
    alternative_current,
    broken_scalar_theory,
    canonical_divergence_terms,
    current_divergence,
    difference_current,
    evaluate_theory,
    gauge_shifted,
    current_gradient_pairing_residual,
    kinematic_lie_residual,
    lie_matter_current,
    master_identity_terms,
    metric_derivative_identity_terms,
    noether_current,
    variational_pair,
)
from .catalog import (
    SCENARIOS,
    SPACETIMES,
    bump_perturbation,
    random_tensor_field,
    random_vector_field,
    sample_points,
    scenario,
    scenario_box,
    spacetime,
    verify_scenario_claims,
    verify_spacetime_claims,
)

SCHEMA_VERSION = 1

SUITE_ORDER = (
    "tilde-algebra",
    "lie-calculus",
    "commutator",
    "kinematic-lagrangian",
    "emt-onshell",
    "gauge",
    "variational",
)

_TENSOR_RANKS = ((), ("u",), ("d",), ("u", "d"), ("d", "d"))


@dataclass(frozen=True)
class Check:
    id: str
    suite: str
    identity: str
    formula: str
    tolerance: float
    measure: str            # "abs" or "rel"
    mode: str               # "below" or "exceeds"
    description: str
    fn: object = None


@dataclass
class RunConfig:
    suites: tuple = SUITE_ORDER
    scenarios: tuple | None = None      # None: per-check defaults
    spacetimes: tuple | None = None
    points: int = 16
    seed: int = 7
    jet_order: int = 3
    xi_count: int = 16
    tolerances: dict = dc_field(default_factory=dict)
    grid_2d: tuple = (64, 64)
    grid_4d: tuple = (16, 16, 16, 16)

    def echo(self):
        return {
            "suites": list(self.suites),
            "scenarios": None if self.scenarios is None else list(self.scenarios),
            "spacetimes": None if self.spacetimes is None else list(self.spacetimes),
            "points": self.points,
            "seed": self.seed,
            "jet_order": self.jet_order,
            "xi_count": self.xi_count,
            "tolerances": dict(self.tolerances),
            "grid_2d": list(self.grid_2d),
            "grid_4d": list(self.grid_4d),
        }


@dataclass
class Target:
    name: str
    points: int
    value_abs: float
    value_rel: float


@dataclass
class CheckOutcome:
    check: Check
    targets: list
    elapsed: float

    @property
    def points(self):
        return int(sum(t.points for t in self.targets))

    @property
    def max_abs(self):
        return float(max((t.value_abs for t in self.targets), default=0.0))

    @property
    def max_rel(self):
        return float(max((t.value_rel for t in self.targets), default=0.0))

    def passed(self, tolerance):
        v = self.max_abs if self.check.measure == "abs" else self.max_rel
        if self.check.mode == "below":
            return v <= tolerance
        return v >= tolerance


class RunContext:
    """Caches frames and theory evaluations across the checks of one run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._frames = {}
        self._theories = {}
        self._claims_checked = set()

    def frame(self, st_name, order=None, box=None):
        st = spacetime(st_name)
        box = st.box if box is None else tuple(tuple(b) for b in box)
        order = self.cfg.jet_order if order is None else order
        key = (st_name, box, order)
        if key not in self._frames:
            pts = sample_points(box, self.cfg.points, self.cfg.seed)
            self._frames[key] = geometry_at(st.metric, pts, order)
        return self._frames[key]

    def theory_frame(self, scen_name):
        if scen_name not in self._theories:
            sc = scenario(scen_name)
            if scen_name not in self._claims_checked:
                verify_scenario_claims(sc, seed=self.cfg.seed)
                self._claims_checked.add(scen_name)
            fr = self.frame(sc.spacetime, box=scenario_box(sc))
            self._theories[scen_name] = evaluate_theory(sc.theory, sc.fields, fr)
        return self._theories[scen_name]

    def spacetime_names(self, default):
        return self.cfg.spacetimes if self.cfg.spacetimes else default

    def scenario_names(self, on_shell=None):
        if self.cfg.scenarios:
            return self.cfg.scenarios
        names = []
        for name, sc in SCENARIOS.items():
            if on_shell is None or sc.on_shell == on_shell:
                names.append(name)
        return tuple(names)

    def random_xis(self, st_name, count=None):
        st = spacetime(st_name)
        count = self.cfg.xi_count if count is None else count
        return [random_vector_field(st.box, self.cfg.seed + 1000 + k)
                for k in range(count)]


CHECKS: dict[str, Check] = {}


def _register(**kw):
    def deco(fn):
        check = Check(fn=fn, **kw)
        CHECKS[check.id] = check
        return fn
    return deco


def _arr(x):
    if isinstance(x, TensorValue):
        x = x.components
    if isinstance(x, Jet):
        x = x.data[0]
    return np.asarray(x)


def _stats(residual, scale) -> tuple:
    r = float(np.max(np.abs(_arr(residual)))) if _arr(residual).size else 0.0
    s = float(np.max(np.abs(_arr(scale)))) if _arr(scale).size else 0.0
    return r, r / max(s, 1e-300)


# --------------------------------------------------------------------------
# suite: tilde-algebra
# --------------------------------------------------------------------------


def _random_tensors(ctx, st_name, ranks=_TENSOR_RANKS, base_seed=0):
    st = spacetime(st_name)
    out = []
    for k, var in enumerate(ranks):
        out.append(random_tensor_field(var, st.box, ctx.cfg.seed + base_seed + k))
    return out


@_register(
    id="tilde-identity-map", suite="tilde-algebra",
    identity="index-replacement of the identity map vanishes",
    formula="til(delta)^a_b{}^c_d = 0",
    tolerance=1e-12, measure="abs", mode="below",
    description="The mixed identity tensor is inert under the index-replacement "
                "operator: its up-slot and down-slot contributions cancel exactly.")
def _chk_tilde_identity(ctx):
    for st_name in ctx.spacetime_names(("minkowski4", "schwarzschild")):
        n = spacetime(st_name).n
        eye = TensorValue(("u", "d"), n, np.eye(n))
        res = tilde(eye)
        r = float(np.max(np.abs(value_array(res))))
        yield Target(st_name, 1, r, r)


@_register(
    id="tilde-metric-closed-form", suite="tilde-algebra",
    identity="index-replacement of the metric",
    formula="til(g)_ab{}^c_d = -g_db delta^c_a - g_ad delta^c_b",
    tolerance=1e-12, measure="abs", mode="below",
    description="Applying the index-replacement operator to the metric gives "
                "minus two delta-weighted copies of the metric.")
def _chk_tilde_metric(ctx):
    for st_name in ctx.spacetime_names(("minkowski4", "schwarzschild", "bump2")):
        fr = ctx.frame(st_name)
        n = fr.n
        got = tilde(fr.g)
        eye = np.eye(n)
        t1 = jet_einsum("db,ca->abcd", fr.g.components, eye)
        t2 = jet_einsum("ad,cb->abcd", fr.g.components, eye)
        want = -(t1 + t2)
        res = got.components - want
        yield Target(st_name, ctx.cfg.points, *_stats(res, fr.g.components))


@_register(
    id="tilde-alternating-closed-form", suite="tilde-algebra",
    identity="index-replacement of the alternating symbol",
    formula="til(eps)_{a1..an}{}^c_d = -eps_{a1..an} delta^c_d",
    tolerance=1e-12, measure="abs", mode="below",
    description="The totally antisymmetric symbol reproduces itself (times "
                "-delta) under index replacement; a determinant-style identity.")
def _chk_tilde_eps(ctx):
    for st_name in ctx.spacetime_names(("minkowski2", "minkowski4")):
        n = spacetime(st_name).n
        eps = levi_civita(n)
        got = tilde(eps)
        S = "".join(chr(ord("i") + k) for k in range(n))
        want = -np.einsum(f"{S},cd->{S}cd", eps.components, np.eye(n))
        res = value_array(got) - want
        r = float(np.max(np.abs(res)))
        yield Target(st_name, 1, r, r)


@_register(
    id="tilde-trace-collapse", suite="tilde-algebra",
    identity="trace of the replacement slots",
    formula="til(T)^.._a{}^a_.. = (p - q) T",
    tolerance=1e-12, measure="abs", mode="below",
    description="Contracting the two new slots of the replaced tensor counts "
                "up-slots minus down-slots times the original tensor.")
def _chk_tilde_trace(ctx):
    for st_name in ctx.spacetime_names(("schwarzschild",)):
        fr = ctx.frame(st_name)
        worst = (0.0, 0.0)
        for fld in _random_tensors(ctx, st_name):
            t = evaluate(fld, fr)
            tt = tilde(t)
            tr = contract(tt, t.rank, t.rank + 1)
            p = sum(1 for v in t.variance if v == "u")
            q = t.rank - p
            res = tr - float(p - q) * t
            s = _stats(res, t)
            worst = max(worst, s)
        yield Target(st_name, ctx.cfg.points * len(_TENSOR_RANKS), *worst)


@_register(
    id="tilde-product-rule", suite="tilde-algebra",
    identity="replacement operator is a derivation over tensor products",
    formula="til(T ox S) = til(T) ox S + T ox til(S)  (new slots gathered last)",
    tolerance=1e-12, measure="abs", mode="below",
    description="The index-replacement operator satisfies the Leibniz rule on "
                "outer products, once the new slots are moved to the end.")
def _chk_tilde_leibniz(ctx):
    for st_name in ctx.spacetime_names(("minkowski4",)):
        fr = ctx.frame(st_name)
        flds = _random_tensors(ctx, st_name, ranks=(("u",), ("d",), ("u", "d")))
        worst = (0.0, 0.0)
        pts = 0
        for i in range(len(flds)):
            for j in range(len(flds)):
                t = evaluate(flds[i], fr)
                s = evaluate(flds[j], fr)
                lhs = tilde(tensor_product(t, s))
                term1 = tensor_product(tilde(t), s)
                rt = t.rank
                rs = s.rank
                # move the replacement slots of til(T) to the end
                perm1 = (tuple(range(rt)) + tuple(range(rt + 2, rt + 2 + rs))
                         + (rt, rt + 1))
                term2 = tensor_product(t, tilde(s))
                res = lhs - transpose_slots(term1, perm1) - term2
                worst = max(worst, _stats(res, lhs))
                pts += ctx.cfg.points
        yield Target(st_name, pts, *worst)


# --------------------------------------------------------------------------
# suite: lie-calculus
# --------------------------------------------------------------------------


@_register(
    id="lie-dual-forms", suite="lie-calculus",
    identity="derivative-agnostic form of the Lie derivative",
    formula="dT xi - til(T) dxi  ==  DT xi - til(T) Dxi",
    tolerance=1e-12, measure="abs", mode="below",
    description="The Lie derivative written through the index-replacement "
                "operator gives the same values with coordinate partials as "
                "with covariant derivatives: the connection terms cancel.")
def _chk_lie_dual(ctx):
    for st_name in ctx.spacetime_names(("minkowski4", "schwarzschild", "bump2")):
        fr = ctx.frame(st_name)
        xi = evaluate(ctx.random_xis(st_name, 1)[0], fr)
        worst = (0.0, 0.0)
        for fld in _random_tensors(ctx, st_name, base_seed=40):
            t = evaluate(fld, fr)
            a = lie_derivative(t, xi, None)
            b = lie_derivative(t, xi, fr)
            worst = max(worst, _stats(a - b, a))
        yield Target(st_name, ctx.cfg.points * len(_TENSOR_RANKS), *worst)


@_register(
    id="killing-metric-flow", suite="lie-calculus",
    identity="metric is invariant along its symmetry vectors",
    formula="(Lie_xi g)_ab = D_a xi_b + D_b xi_a = 0",
    tolerance=1e-10, measure="abs", mode="below",
    description="Every vector the catalog claims as a symmetry annihilates "
                "the metric under the Lie derivative.")
def _chk_killing(ctx):
    for st_name in ctx.spacetime_names(tuple(SPACETIMES)):
        st = spacetime(st_name)
        fr = ctx.frame(st_name)
        worst = (0.0, 0.0)
        cnt = 0
        for v in st.killing:
            if not v.claimed_killing:
                continue
            xi = evaluate(v, fr)
            res = killing_residual(xi, fr)
            worst = max(worst, _stats(res, fr.g))
            cnt += ctx.cfg.points
        yield Target(st_name, cnt, *worst)


@_register(
    id="parallel-claims", suite="lie-calculus",
    identity="claimed parallel vectors have vanishing covariant derivative",
    formula="D_a xi^b = 0",
    tolerance=1e-10, measure="abs", mode="below",
    description="Translation generators on flat charts are claimed to be "
                "covariantly constant; the claim is re-derived numerically.")
def _chk_parallel(ctx):
    for st_name in ctx.spacetime_names(tuple(SPACETIMES)):
        st = spacetime(st_name)
        fr = ctx.frame(st_name)
        worst = (0.0, 0.0)
        cnt = 0
        for v in st.killing:
            if not v.claimed_parallel:
                continue
            xi = evaluate(v, fr)
            res = parallel_residual(xi, fr)
            worst = max(worst, _stats(res, xi))
            cnt += ctx.cfg.points
        if cnt:
            yield Target(st_name, cnt, *worst)


@_register(
    id="volume-weight-flow", suite="lie-calculus",
    identity="Lie derivative of the metric volume factor",
    formula="1/2 sqrt|g| g^ab (Lie_xi g)_ab = sqrt|g| D_a xi^a",
    tolerance=1e-9, measure="abs", mode="below",
    description="The trace of the metric flow reproduces the divergence that "
                "differentiating sqrt|g| along xi must produce.")
def _chk_volume(ctx):
    for st_name in ctx.spacetime_names(("schwarzschild", "bump2")):
        fr = ctx.frame(st_name)
        worst = (0.0, 0.0)
        for v in ctx.random_xis(st_name, 3):
            xi = evaluate(v, fr)
            res = volume_lie_residual(xi, fr)
            worst = max(worst, _stats(res, fr.sqrt_g))
        yield Target(st_name, 3 * ctx.cfg.points, *worst)


# --------------------------------------------------------------------------
# suite: commutator
# --------------------------------------------------------------------------


@_register(
    id="curvature-commutator", suite="commutator",
    identity="second-derivative commutator equals the curvature action",
    formula="(D_a D_b - D_b D_a) T = R^d_{cab} til(T)^c_d",
    tolerance=1e-9, measure="abs", mode="below",
    description="For every tensor rank, the antisymmetrized double covariant "
                "derivative matches the curvature contracted with the "
                "index-replaced tensor.  This check fixes the curvature sign "
                "and slot conventions.")
def _chk_curv_comm(ctx):
    for st_name in ctx.spacetime_names(("schwarzschild", "bump2")):
        fr = ctx.frame(st_name)
        worst = (0.0, 0.0)
        for fld in _random_tensors(ctx, st_name, base_seed=60):
            t = evaluate(fld, fr)
            res = curvature_commutator_residual(t, fr)
            worst = max(worst, _stats(res, fr.riemann))
        yield Target(st_name, ctx.cfg.points * len(_TENSOR_RANKS), *worst)


@_register(
    id="tilde-gradient-commutator", suite="commutator",
    identity="index replacement past a covariant gradient",
    formula="til(D_e T)^a_b = D_e til(T)^a_b - delta^a_e D_b T",
    tolerance=1e-9, measure="abs", mode="below",
    description="Replacing indices after differentiation differs from "
                "differentiating the replaced tensor only by the gradient "
                "slot's own replacement term.")
def _chk_tilde_grad(ctx):
    for st_name in ctx.spacetime_names(("schwarzschild",)):
        fr = ctx.frame(st_name)
        worst = (0.0, 0.0)
        for fld in _random_tensors(ctx, st_name, base_seed=80):
            t = evaluate(fld, fr)
            res = tilde_gradient_commutator_residual(t, fr)
            scale = covariant_derivative(t, fr)
            worst = max(worst, _stats(res, scale))
        yield Target(st_name, ctx.cfg.points * len(_TENSOR_RANKS), *worst)


@_register(
    id="connection-tensor-dual-form", suite="commutator",
    identity="flow-connection tensor from curvature or from the metric flow",
    formula="R^c_{bda} xi^d + D_a D_b xi^c  ==  "
            "1/2 g^cd (D_b (Lg)_da + D_a (Lg)_db - D_d (Lg)_ba)",
    tolerance=1e-9, measure="abs", mode="below",
    description="The connection-deformation tensor of a flow can be built "
                "from second derivatives of xi plus curvature or from first "
                "derivatives of the metric flow; both constructions agree.")
def _chk_conn_dual(ctx):
    for st_name in ctx.spacetime_names(("schwarzschild", "bump2")):
        fr = ctx.frame(st_name)
        worst = (0.0, 0.0)
        for v in ctx.random_xis(st_name, 3):
            xi = evaluate(v, fr)
            a = lie_connection_tensor(xi, fr, form="direct")
            b = lie_connection_tensor(xi, fr, form="metric")
            worst = max(worst, _stats(a - b, a))
        yield Target(st_name, 3 * ctx.cfg.points, *worst)


@_register(
    id="lie-gradient-commutator", suite="commutator",
    identity="commutator of flow and covariant gradient",
    formula="(Lie_xi D - D Lie_xi) T = C^c_{ba} til(T)^b_c",
    tolerance=1e-9, measure="abs", mode="below",
    description="The failure of the Lie derivative to commute with the "
                "covariant gradient is exactly the connection-deformation "
                "tensor acting through index replacement.")
def _chk_lie_grad(ctx):
    for st_name in ctx.spacetime_names(("schwarzschild", "bump2")):
        fr = ctx.frame(st_name)
        worst = (0.0, 0.0)
        xi = evaluate(ctx.random_xis(st_name, 1)[0], fr)
        C = lie_connection_tensor(xi, fr, form="direct")
        for fld in _random_tensors(ctx, st_name, base_seed=90):
            t = evaluate(fld, fr)
            got = lie_nabla_commutator(t, xi, fr)
            want = lie_nabla_from_connection(t, C)
            worst = max(worst, _stats(got - want, got))
        yield Target(st_name, ctx.cfg.points * len(_TENSOR_RANKS), *worst)


@_register(
    id="killing-gradient-commute", suite="commutator",
    identity="symmetry flows commute with the covariant gradient",
    formula="Lie_xi (D T) = D (Lie_xi T)   for Killing xi",
    tolerance=1e-9, measure="abs", mode="below",
    description="Along a metric symmetry the connection deformation vanishes, "
                "so differentiation and flow commute on arbitrary tensors.")
def _chk_killing_commute(ctx):
    for st_name in ctx.spacetime_names(("schwarzschild", "minkowski4")):
        st = spacetime(st_name)
        fr = ctx.frame(st_name)
        worst = (0.0, 0.0)
        cnt = 0
        flds = _random_tensors(ctx, st_name, ranks=((), ("u",), ("d", "d")),
                               base_seed=110)
        for v in st.killing[:4]:
            xi = evaluate(v, fr)
            for fld in flds:
                t = evaluate(fld, fr)
                res = lie_nabla_commutator(t, xi, fr)
                scale = covariant_derivative(t, fr)
                worst = max(worst, _stats(res, scale))
                cnt += ctx.cfg.points
        yield Target(st_name, cnt, *worst)


# --------------------------------------------------------------------------
# suite: kinematic-lagrangian
# --------------------------------------------------------------------------


@_register(
    id="lagrangian-flow-chain-rule", suite="kinematic-lagrangian",
    identity="scalar Lagrangians flow by the chain rule",
    formula="dL/d(Dpsi) Lie(Dpsi) + dL/dpsi Lie(psi) + dL/dg Lie(g) = dL xi",
    tolerance=1e-9, measure="abs", mode="below",
    description="For a generally covariant scalar Lagrangian the Lie "
                "derivative distributes over its arguments; holds for any "
                "field configuration, on or off shell.")
def _chk_chain(ctx):
    for name in ctx.scenario_names():
        tf = ctx.theory_frame(name)
        sc = scenario(name)
        worst = (0.0, 0.0)
        for v in ctx.random_xis(sc.spacetime, 3):
            xi = evaluate(v, tf.frame)
            res = kinematic_lie_residual(tf, xi)
            worst = max(worst, _stats(res, tf.L))
        yield Target(name, 3 * ctx.cfg.points, *worst)


@_register(
    id="flow-chain-rule-negative-control", suite="kinematic-lagrangian",
    identity="explicit coordinate dependence breaks the chain rule",
    formula="residual of the flow chain rule for a non-covariant Lagrangian",
    tolerance=1e-3, measure="abs", mode="exceeds",
    description="A Lagrangian with bare coordinate dependence must fail the "
                "chain-rule identity; this guards the main check against "
                "silently measuring zero.")
def _chk_chain_negative(ctx):
    sc = scenario("scalar-wave-2d")
    fr = ctx.frame(sc.spacetime)
    tf = evaluate_theory(broken_scalar_theory(0.5), sc.fields, fr)
    worst = (0.0, 0.0)
    for v in ctx.random_xis(sc.spacetime, 3):
        xi = evaluate(v, fr)
        res = kinematic_lie_residual(tf, xi)
        worst = max(worst, _stats(res, tf.L))
    yield Target("broken-scalar", 3 * ctx.cfg.points, *worst)


# --------------------------------------------------------------------------
# suite: emt-onshell
# --------------------------------------------------------------------------


@_register(
    id="metric-emt-symmetry", suite="emt-onshell",
    identity="metric energy-momentum tensor is symmetric by construction",
    formula="T_M^ab = T_M^ba   (on or off shell)",
    tolerance=1e-9, measure="abs", mode="below",
    description="Symmetry of T_M needs no field equations: the derivative "
                "bracket it subtracts is built symmetric in its free slots.")
def _chk_tm_sym(ctx):
    for name in ctx.scenario_names():
        tf = ctx.theory_frame(name)
        tm = tf.emt_metric
        res = tm - transpose_slots(tm, (1, 0))
        yield Target(name, ctx.cfg.points, *_stats(res, tm))


@_register(
    id="superpotential-antisymmetry", suite="emt-onshell",
    identity="superpotential antisymmetry in its first two slots",
    formula="Theta^abc = -Theta^bac",
    tolerance=1e-12, measure="abs", mode="below",
    description="The three-term superpotential is antisymmetric under "
                "swapping its first slot pair, which is what makes its "
                "double divergence vanish.")
def _chk_theta_antisym(ctx):
    for name in ctx.scenario_names():
        tf = ctx.theory_frame(name)
        th = tf.theta
        res = th + transpose_slots(th, (1, 0, 2))
        scale = max(max_abs(th), 1.0)
        r = max_abs(res)
        yield Target(name, ctx.cfg.points, r, r / scale)


@_register(
    id="improved-equals-metric", suite="emt-onshell",
    identity="improved and metric tensors coincide on shell",
    formula="T_B^ab = T_M^ab   when the field equations hold",
    tolerance=1e-9, measure="abs", mode="below",
    description="Adding the superpotential divergence to the canonical "
                "tensor lands exactly on the metric tensor for solutions.")
def _chk_tb_tm(ctx):
    for name in ctx.scenario_names(on_shell=True):
        tf = ctx.theory_frame(name)
        tf.require_on_shell()
        res = tf.emt_belinfante - tf.emt_metric
        yield Target(name, ctx.cfg.points, *_stats(res, tf.emt_metric))


@_register(
    id="master-identity", suite="emt-onshell",
    identity="current divergence pairs with the metric flow",
    formula="D_a(T_B^ab xi_b) = 1/2 T_M^ab (Lie_xi g)_ab   for any xi",
    tolerance=1e-8, measure="abs", mode="below",
    description="The central exchange identity: for an arbitrary vector "
                "field, not only symmetries, the divergence of the improved "
                "current equals the metric tensor paired with the metric "
                "flow.  Checked with a family of seeded random vectors.")
def _chk_master(ctx):
    for name in ctx.scenario_names(on_shell=True):
        tf = ctx.theory_frame(name)
        tf.require_on_shell()
        sc = scenario(name)
        worst = (0.0, 0.0)
        for v in ctx.random_xis(sc.spacetime):
            xi = evaluate(v, tf.frame)
            lhs, rhs = master_identity_terms(tf, xi)
            worst = max(worst, _stats(lhs - rhs, lhs))
        yield Target(name, ctx.cfg.xi_count * ctx.cfg.points, *worst)


@_register(
    id="current-gradient-pairing", suite="emt-onshell",
    identity="current divergence pairs with the vector gradient",
    formula="D_a(T_B^ab xi_b) = T_M^ab D_a xi_b   for any xi",
    tolerance=1e-8, measure="abs", mode="below",
    description="Equivalent form of the exchange identity with the full "
                "(unsymmetrized) gradient of xi; works because T_M is "
                "symmetric.")
def _chk_110(ctx):
    for name in ctx.scenario_names(on_shell=True):
        tf = ctx.theory_frame(name)
        tf.require_on_shell()
        sc = scenario(name)
        worst = (0.0, 0.0)
        for v in ctx.random_xis(sc.spacetime, 4):
            xi = evaluate(v, tf.frame)
            res = current_gradient_pairing_residual(tf, xi)
            worst = max(worst, _stats(res, tf.emt_metric))
        yield Target(name, 4 * ctx.cfg.points, *worst)


@_register(
    id="symmetry-current-conservation", suite="emt-onshell",
    identity="conserved current along each metric symmetry",
    formula="D_a(T_B^ab xi_b) = 0   for Killing xi",
    tolerance=1e-8, measure="abs", mode="below",
    description="The improved current built from any catalog symmetry vector "
                "is divergence-free on shell.")
def _chk_noether(ctx):
    for name in ctx.scenario_names(on_shell=True):
        tf = ctx.theory_frame(name)
        tf.require_on_shell()
        sc = scenario(name)
        st = spacetime(sc.spacetime)
        worst = (0.0, 0.0)
        cnt = 0
        for v in st.killing:
            xi = evaluate(v, tf.frame)
            res = current_divergence(tf, noether_current(tf, xi))
            worst = max(worst, _stats(res, tf.emt_belinfante))
            cnt += ctx.cfg.points
        yield Target(name, cnt, *worst)


@_register(
    id="improved-divergence", suite="emt-onshell",
    identity="improved tensor is divergence-free on shell",
    formula="D_a T_B^ab = 0",
    tolerance=1e-8, measure="abs", mode="below",
    description="Slot-wise conservation of the improved tensor for "
                "solutions, on flat and curved backgrounds alike.")
def _chk_tb_div(ctx):
    for name in ctx.scenario_names(on_shell=True):
        tf = ctx.theory_frame(name)
        tf.require_on_shell()
        d = covariant_derivative(tf.emt_belinfante, tf.frame)
        res = contract(d, 0, 2)
        yield Target(name, ctx.cfg.points, *_stats(res, tf.emt_belinfante))


@_register(
    id="metric-emt-divergence", suite="emt-onshell",
    identity="metric tensor is divergence-free on shell",
    formula="D_a T_M^ab = 0",
    tolerance=1e-8, measure="abs", mode="below",
    description="Conservation of the metric tensor for solutions; follows "
                "from the exchange identity with arbitrary localized xi.")
def _chk_tm_div(ctx):
    for name in ctx.scenario_names(on_shell=True):
        tf = ctx.theory_frame(name)
        tf.require_on_shell()
        d = covariant_derivative(tf.emt_metric, tf.frame)
        res = contract(d, 0, 2)
        yield Target(name, ctx.cfg.points, *_stats(res, tf.emt_metric))


@_register(
    id="canonical-curvature-obstruction", suite="emt-onshell",
    identity="canonical tensor divergence equals a curvature pairing",
    formula="D_a T_C^ab = dL/d(D_a psi) R^b_{adc} til(psi)^cd",
    tolerance=1e-8, measure="abs", mode="below",
    description="On shell the canonical tensor is not conserved on curved "
                "backgrounds; its divergence is an explicit curvature term. "
                "Both sides are compared pointwise.")
def _chk_can_div(ctx):
    for name in ctx.scenario_names(on_shell=True):
        tf = ctx.theory_frame(name)
        lhs, rhs = canonical_divergence_terms(tf)
        res = lhs - rhs
        scale = max(max_abs(lhs), max_abs(rhs), max_abs(tf.emt_canonical))
        r = max_abs(res)
        yield Target(name, ctx.cfg.points, r, r / max(scale, 1e-300))


@_register(
    id="canonical-obstruction-magnitude", suite="emt-onshell",
    identity="the curvature obstruction is actually nonzero",
    formula="max |D_a T_C^ab| over a curved vector-field scenario",
    tolerance=1e-6, measure="abs", mode="exceeds",
    description="Guards the obstruction check against passing vacuously: on "
                "the curved electromagnetic scenario the canonical tensor "
                "must demonstrably fail to be conserved.")
def _chk_can_div_magnitude(ctx):
    name = "schwarzschild-coulomb"
    tf = ctx.theory_frame(name)
    lhs, rhs = canonical_divergence_terms(tf)
    v = min(max_abs(lhs), max_abs(rhs))
    yield Target(name, ctx.cfg.points, v, v)


@_register(
    id="superpotential-current-closure", suite="emt-onshell",
    identity="difference current is identically conserved",
    formula="D_a[(D_c Theta^cab) xi_b + Theta^cab D_c xi_b] = 0   for any xi",
    tolerance=1e-8, measure="abs", mode="below",
    description="The current formed from the superpotential alone is "
                "divergence-free without field equations for its xi-part: "
                "antisymmetry plus the symmetry of the Ricci tensor.")
def _chk_diff_current(ctx):
    for name in ctx.scenario_names(on_shell=True):
        tf = ctx.theory_frame(name)
        sc = scenario(name)
        worst = (0.0, 0.0)
        for v in ctx.random_xis(sc.spacetime, 4):
            xi = evaluate(v, tf.frame)
            res = current_divergence(tf, difference_current(tf, xi))
            worst = max(worst, _stats(res, tf.theta.components))
        yield Target(name, 4 * ctx.cfg.points, *worst)


@_register(
    id="current-decomposition", suite="emt-onshell",
    identity="improved current splits into canonical plus superpotential parts",
    formula="T_B^ab xi_b = [T_C^ab xi_b + Theta^cab D_c xi_b] - difference current",
    tolerance=1e-9, measure="abs", mode="below",
    description="The two ways of writing the conserved current differ by "
                "exactly the identically-conserved superpotential current.")
def _chk_current_decomp(ctx):
    for name in ctx.scenario_names(on_shell=True):
        tf = ctx.theory_frame(name)
        sc = scenario(name)
        worst = (0.0, 0.0)
        for v in ctx.random_xis(sc.spacetime, 4):
            xi = evaluate(v, tf.frame)
            a = noether_current(tf, xi)
            b = alternative_current(tf, xi)
            c = difference_current(tf, xi)
            res = a - b + c
            worst = max(worst, _stats(res, a))
        yield Target(name, 4 * ctx.cfg.points, *worst)


@_register(
    id="matter-flow-current", suite="emt-onshell",
    identity="conserved current from the matter flow along a symmetry",
    formula="D_a[dL/d(D_a psi) Lie_xi psi - L xi^a] = 0   for Killing xi",
    tolerance=1e-8, measure="abs", mode="below",
    description="A first-derivative current built from the field flow along "
                "a symmetry vector; conserved on shell.")
def _chk_matter_current(ctx):
    for name in ctx.scenario_names(on_shell=True):
        tf = ctx.theory_frame(name)
        tf.require_on_shell()
        sc = scenario(name)
        st = spacetime(sc.spacetime)
        worst = (0.0, 0.0)
        cnt = 0
        for v in st.killing:
            xi = evaluate(v, tf.frame)
            res = current_divergence(tf, lie_matter_current(tf, xi))
            worst = max(worst, _stats(res, tf.L))
            cnt += ctx.cfg.points
        yield Target(name, cnt, *worst)


@_register(
    id="metric-derivative-identity", suite="emt-onshell",
    identity="metric derivative of L from field gradients on shell",
    formula="2 dL/dg_ab = D_c(dL/d(D_c psi) til(psi)^ab) - dL/d(D_a psi) D^b psi",
    tolerance=1e-8, measure="abs", mode="below",
    description="On shell, the metric derivative of the Lagrangian can be "
                "rebuilt entirely from the field sector; the right side is "
                "secretly symmetric in its free slots.")
def _chk_ee(ctx):
    for name in ctx.scenario_names(on_shell=True):
        tf = ctx.theory_frame(name)
        lhs, rhs = metric_derivative_identity_terms(tf)
        res = lhs - rhs
        sym = rhs - transpose_slots(rhs, (1, 0))
        r1 = _stats(res, lhs)
        r2 = _stats(sym, lhs)
        worst = max(r1, r2)
        yield Target(name, ctx.cfg.points, *worst)


@_register(
    id="first-order-emt-closed-form", suite="emt-onshell",
    identity="bracket-free closed form for scalar and one-form gauge theories",
    formula="T_M^ab = 2 dL/dg_ab + g^ab L   when the derivative bracket vanishes",
    tolerance=1e-9, measure="abs", mode="below",
    description="For the built-in scalar and electromagnetic Lagrangians the "
                "superpotential bracket cancels identically, so T_M reduces "
                "to the bare metric-derivative form.")
def _chk_tm_closed(ctx):
    for name in ctx.scenario_names(on_shell=True):
        sc = scenario(name)
        if not sc.theory.name.startswith(("scalar", "maxwell")):
            continue
        tf = ctx.theory_frame(name)
        want = 2.0 * tf.dL_dg + tf._g_up_L
        res = tf.emt_metric - want
        yield Target(name, ctx.cfg.points, *_stats(res, tf.emt_metric))


@_register(
    id="em-field-strength-form", suite="emt-onshell",
    identity="electromagnetic energy-momentum in field-strength form",
    formula="T_M^ab = F^ac F^b_c + g^ab L",
    tolerance=1e-9, measure="abs", mode="below",
    description="On electromagnetic scenarios the machine-built T_M matches "
                "the textbook field-strength expression exactly.")
def _chk_em_form(ctx):
    for name in ctx.scenario_names(on_shell=True):
        sc = scenario(name)
        if sc.theory.name != "maxwell" or sc.gauge_field is None:
            continue
        tf = ctx.theory_frame(name)
        dA = tf.dpsi[sc.gauge_field]        # [b, a] = D_a A_b
        F = transpose_slots(dA, (1, 0)) - dA
        ginv = tf.frame.ginv.components
        Fup = jet_einsum("ac,cb->ab", ginv,
                         jet_einsum("cb,bd->cd", F.components, ginv))
        Fmix = jet_einsum("ac,cb->ab", ginv, F.components)
        want = jet_einsum("ac,bc->ab", Fup, Fmix) + \
            jet_einsum("ab,->ab", ginv, tf.L)
        res = tf.emt_metric.components - want
        yield Target(name, ctx.cfg.points, *_stats(res, tf.emt_metric))


# --------------------------------------------------------------------------
# suite: gauge
# --------------------------------------------------------------------------


def _gauge_pairs(ctx):
    for name in ctx.scenario_names(on_shell=True):
        sc = scenario(name)
        if sc.gauge_field is None:
            continue
        tf = ctx.theory_frame(name)
        st = spacetime(sc.spacetime)
        chi = random_tensor_field((), st.box, ctx.cfg.seed + 5000)
        shifted = dict(sc.fields)
        shifted[sc.gauge_field] = gauge_shifted(sc.fields[sc.gauge_field], chi)
        tf2 = evaluate_theory(sc.theory, shifted, tf.frame)
        yield name, tf, tf2


@_register(
    id="gauge-invariance-metric-emt", suite="gauge",
    identity="metric tensor is gauge invariant",
    formula="T_M[A + d chi] = T_M[A]",
    tolerance=1e-9, measure="abs", mode="below",
    description="Shifting the potential by an exact gradient leaves the "
                "metric energy-momentum tensor unchanged pointwise.")
def _chk_gauge_tm(ctx):
    for name, tf, tf2 in _gauge_pairs(ctx):
        res = tf2.emt_metric - tf.emt_metric
        yield Target(name, ctx.cfg.points, *_stats(res, tf.emt_metric))


@_register(
    id="gauge-invariance-improved-emt", suite="gauge",
    identity="improved tensor is gauge invariant",
    formula="T_B[A + d chi] = T_B[A]",
    tolerance=1e-9, measure="abs", mode="below",
    description="The superpotential correction removes the canonical "
                "tensor's gauge dependence entirely.")
def _chk_gauge_tb(ctx):
    for name, tf, tf2 in _gauge_pairs(ctx):
        res = tf2.emt_belinfante - tf.emt_belinfante
        yield Target(name, ctx.cfg.points, *_stats(res, tf.emt_belinfante))


@_register(
    id="gauge-variance-canonical-emt", suite="gauge",
    identity="canonical tensor is not gauge invariant",
    formula="max |T_C[A + d chi] - T_C[A]|  is bounded away from zero",
    tolerance=1e-4, measure="abs", mode="exceeds",
    description="Negative control: the canonical tensor must move under a "
                "gauge shift, demonstrating the invariance checks are not "
                "passing vacuously.")
def _chk_gauge_tc(ctx):
    for name, tf, tf2 in _gauge_pairs(ctx):
        res = tf2.emt_canonical - tf.emt_canonical
        v = max_abs(res)
        yield Target(name, ctx.cfg.points, v, v)


# --------------------------------------------------------------------------
# suite: variational
# --------------------------------------------------------------------------


def _variational_target(ctx, scen_name, grid, box, seed_offset=0):
    sc = scenario(scen_name)
    st = spacetime(sc.spacetime)
    h = bump_perturbation(box, ctx.cfg.seed + 9000 + seed_offset,
                          scale=0.1, width_frac=0.09)
    lhs, rhs = variational_pair(sc.theory, sc.fields, st.metric, h, box, grid)
    diff = abs(lhs - rhs)
    rel = diff / max(abs(lhs), abs(rhs), 1e-300)
    return Target(scen_name, int(np.prod(grid)), diff, rel)


@_register(
    id="variational-agreement-2d", suite="variational",
    identity="action derivative matches the tensor pairing, two dimensions",
    formula="d/d eps S[g + eps h] = 1/2 integral T_M^ab h_ab sqrt|g|",
    tolerance=1e-6, measure="rel", mode="below",
    description="Direct differentiation of the quadrature-evaluated action "
                "under a compact metric perturbation against the integrated "
                "pairing with T_M, scalar field on a two-dimensional chart.")
def _chk_var_2d(ctx):
    yield _variational_target(ctx, "scalar-wave-2d", ctx.cfg.grid_2d,
                              spacetime("minkowski2").box)


@_register(
    id="variational-agreement-4d", suite="variational",
    identity="action derivative matches the tensor pairing, four dimensions",
    formula="d/d eps S[g + eps h] = 1/2 integral T_M^ab h_ab sqrt|g|",
    tolerance=1e-3, measure="rel", mode="below",
    description="Same comparison for the electromagnetic field on a "
                "four-dimensional grid; coarser quadrature, looser tolerance.")
def _chk_var_4d(ctx):
    yield _variational_target(ctx, "em-wave-4d", ctx.cfg.grid_4d,
                              spacetime("minkowski4").box, seed_offset=1)


@_register(
    id="variational-superpotential-2d", suite="variational",
    identity="tensor pairing with a live superpotential bracket",
    formula="d/d eps S = 1/2 integral T_M^ab h_ab sqrt|g|, bracket nonzero",
    tolerance=1e-6, measure="rel", mode="below",
    description="The unconstrained-gradient vector theory has a nonvanishing "
                "derivative bracket, so this comparison exercises the "
                "divergence subtraction and integration by parts for real.")
def _chk_var_super(ctx):
    yield _variational_target(ctx, "gradient-vector-2d", ctx.cfg.grid_2d,
                              spacetime("minkowski2").box, seed_offset=2)


# --------------------------------------------------------------------------
# runner
# --------------------------------------------------------------------------


def checks_for(suites) -> list:
    wanted = list(suites)
    out = []
    for suite in SUITE_ORDER:
        if suite not in wanted:
            continue
        for check in CHECKS.values():
            if check.suite == suite:
                out.append(check)
    return out


def run_checks(cfg: RunConfig, emit=None) -> list:
    """Run the configured checks, returning a list of CheckOutcome."""
    unknown = [s for s in cfg.suites if s not in SUITE_ORDER]
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}")
    ctx = RunContext(cfg)
    for st_name in (cfg.spacetimes or SPACETIMES):
        verify_spacetime_claims(spacetime(st_name), seed=cfg.seed)
    outcomes = []
    for check in checks_for(cfg.suites):
        t0 = time.perf_counter()
        targets = list(check.fn(ctx))
        elapsed = time.perf_counter() - t0
        outcome = CheckOutcome(check, targets, elapsed)
        outcomes.append(outcome)
        if emit:
            emit(outcome, self_tolerance(cfg, check))
    return outcomes


def self_tolerance(cfg: RunConfig, check: Check) -> float:
    return float(cfg.tolerances.get(check.id, check.tolerance))


def build_report(cfg: RunConfig, outcomes) -> dict:
    rows = []
    passed = failed = 0
    for oc in outcomes:
        tol = self_tolerance(cfg, oc.check)
        ok = oc.passed(tol)
        passed += ok
        failed += not ok
        rows.append({
            "id": oc.check.id,
            "identity": oc.check.identity,
            "suite": oc.check.suite,
            "points": oc.points,
            "max_abs": oc.max_abs,
            "max_rel": oc.max_rel,
            "tolerance": tol,
            "measure": oc.check.measure,
            "mode": oc.check.mode,
            "passed": bool(ok),
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "engine_version": __version__,
        "config": cfg.echo(),
        "checks": rows,
        "summary": {
            "passed": int(passed),
            "failed": int(failed),
            # wall time is deliberately not recorded: reports are
            # byte-for-byte reproducible functions of their configuration
            "wall_ms": None,
        },
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
