"""Lagrangian field theory on a frame: functional derivatives, energy-momentum
tensors, and the conservation identities connecting them.

A theory is a Lagrangian density L(grad psi, psi, g) written against the small
algebra below (:class:`ArgTensor`), which forward-propagates derivatives of the
evaluation with respect to every component of every argument.  Each tensor
component of (grad psi, psi, g) is treated as an independent real; because the
carried coefficients are spacetime jets, the extracted partials dL/d(grad psi),
dL/dpsi and dL/dg come out as jet-valued tensors, ready for further covariant
differentiation.  dL/dg is symmetrized after extraction.

From these the module builds

* the canonical tensor      T_C^ab = -dL/d(grad_a psi) grad^b psi + g^ab L
* the metric tensor         T_M^ab = 2 dL/dg_ab
                                     - D_c(dL/d(grad_c psi) (tilde psi)^ab + Theta^cab)
                                     + g^ab L
* the improved tensor       T_B^ab = T_C^ab - D_c Theta^cab

with the superpotential

    Theta^abc = sum_l [ dL/d(grad_a psi) (tilde psi)^[cb]
                      + dL/d(grad_b psi) (tilde psi)^[ac]
                      + dL/d(grad_c psi) (tilde psi)^[ab] ]

(antisymmetric under a<->b), and checks the exact identities relating them,
chief among them, for any vector field xi and any solution of the field
equations:

    D_a(T_B^ab xi_b) - 1/2 T_M^ab (Lie_xi g)_ab = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .jets import (
    Jet,
    JetOrderError,
    constant_jet,
    differentiate,
    jet_einsum,
    lift,
    partial_in_var,
    zeros_jet,
    _free_letters,
)
from .tensors import (
    TensorValue,
    antisymmetrize_pair,
    contract,
    raise_slot,
    tilde,
    transpose_slots,
)
from .geometry import (
    Frame,
    MetricField,
    TensorField,
    covariant_derivative,
    evaluate,
    geometry_at,
    jet_matrix_inverse,
)

__all__ = [
    "OffShellError",
    "FieldSpec",
    "LagrangianTheory",
    "scalar_theory",
    "maxwell_theory",
    "broken_scalar_theory",
    "TheoryFrame",
    "evaluate_theory",
    "a_einsum",
    "variational_pair",
    "gauge_shifted",
]


class OffShellError(RuntimeError):
    """An on-shell identity was requested for a configuration violating the
    field equations beyond the gate tolerance."""


# --------------------------------------------------------------------------
# forward-derivative layer over the Lagrangian arguments
# --------------------------------------------------------------------------


class ArgTensor:
    """Tensor-valued expression carrying d(expression)/d(argument component).

    ``comps`` is the value (a Jet, or ndarray constant); ``grads`` maps an
    argument key to the derivative array whose leading axes are the argument's
    slots and whose trailing axes are this expression's slots.
    """

    __slots__ = ("variance", "n", "comps", "grads")

    def __init__(self, variance, n, comps, grads=None):
        self.variance = tuple(variance)
        self.n = n
        self.comps = comps
        self.grads = dict(grads or {})

    @property
    def rank(self):
        return len(self.variance)

    def __add__(self, other):
        if isinstance(other, ArgTensor):
            if other.variance != self.variance:
                raise ValueError("ArgTensor addition needs matching slots")
            grads = dict(self.grads)
            for k, v in other.grads.items():
                grads[k] = v if k not in grads else grads[k] + v
            return ArgTensor(self.variance, self.n, self.comps + other.comps, grads)
        return ArgTensor(self.variance, self.n, self.comps + other, self.grads)

    __radd__ = __add__

    def __neg__(self):
        return ArgTensor(self.variance, self.n, -self.comps,
                         {k: -v for k, v in self.grads.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        """Multiplication by an argument-independent scalar (number or Jet)."""
        if isinstance(c, ArgTensor):
            if self.rank == 0 and c.rank == 0:
                return a_einsum(",->", self, c)
            raise ValueError("use a_einsum for general ArgTensor products")
        return ArgTensor(self.variance, self.n, self.comps * c,
                         {k: v * c for k, v in self.grads.items()})

    __rmul__ = __mul__


_ARG_RANKS: dict = {}  # populated per evaluation; maps arg key -> slot count


def a_einsum(subs: str, x: ArgTensor, y: ArgTensor, ranks: dict | None = None) -> ArgTensor:
    """Bilinear einsum on ArgTensors with the product rule on argument grads."""
    ranks = _ARG_RANKS if ranks is None else ranks
    lhs, out = subs.split("->")
    sx, sy = lhs.split(",")
    comps = jet_einsum(subs, x.comps, y.comps)
    grads = {}
    for k, gx in x.grads.items():
        pre = "".join(_free_letters(set(subs), ranks[k]))
        grads[k] = jet_einsum(f"{pre}{sx},{sy}->{pre}{out}", gx, y.comps)
    for k, gy in y.grads.items():
        pre = "".join(_free_letters(set(subs), ranks[k]))
        term = jet_einsum(f"{sx},{pre}{sy}->{pre}{out}", x.comps, gy)
        grads[k] = term if k not in grads else grads[k] + term
    n_out = x.n if isinstance(x, ArgTensor) else y.n
    uplow = _infer_variance(subs, x, y)
    return ArgTensor(uplow, n_out, comps, grads)


def _infer_variance(subs, x, y):
    lhs, out = subs.split("->")
    sx, sy = lhs.split(",")
    lookup = {}
    for letter, v in zip(sx, x.variance):
        lookup[letter] = v
    for letter, v in zip(sy, y.variance):
        lookup[letter] = v
    return tuple(lookup[c] for c in out)


def a_transpose(x: ArgTensor, perm, ranks: dict | None = None) -> ArgTensor:
    ranks = _ARG_RANKS if ranks is None else ranks
    src = "".join(chr(ord("i") + k) for k in range(x.rank))
    dst = "".join(src[p] for p in perm)
    comps = jet_einsum(f"{src},->{dst}", x.comps, np.float64(1.0))
    grads = {}
    for k, g in x.grads.items():
        pre = "".join(_free_letters(set(src), ranks[k]))
        grads[k] = jet_einsum(f"{pre}{src},->{pre}{dst}", g, np.float64(1.0))
    return ArgTensor(tuple(x.variance[p] for p in perm), x.n, comps, grads)


def _seed_arg(key: str, variance, n: int, comps: Jet) -> ArgTensor:
    r = len(variance)
    if r == 0:
        ident = np.float64(1.0)
    else:
        ident = np.eye(n ** r).reshape((n,) * (2 * r))
    _ARG_RANKS[key] = r
    return ArgTensor(variance, n, comps, {key: ident})


def _inverse_metric_arg(g_arg: ArgTensor) -> ArgTensor:
    """g^-1 as an ArgTensor: value by exact jet inversion, gradient from
    d(g^-1)^ij/dg_pq = -g^ip g^qj."""
    inv = jet_matrix_inverse(g_arg.comps) if isinstance(g_arg.comps, Jet) else np.linalg.inv(g_arg.comps)
    grad = -jet_einsum("ip,qj->pqij", inv, inv)
    return ArgTensor(("u", "u"), g_arg.n, inv, {"g": grad})


@dataclass
class LagrangianContext:
    """What a Lagrangian callable sees: seeded arguments plus chart constants."""

    n: int
    _psi: dict
    _dpsi: dict
    g: ArgTensor
    ginv: ArgTensor
    coords: list

    def psi(self, label: str) -> ArgTensor:
        return self._psi[label]

    def dpsi(self, label: str) -> ArgTensor:
        return self._dpsi[label]

    def coord(self, i: int) -> Jet:
        return self.coords[i]

    def einsum(self, subs: str, x: ArgTensor, y: ArgTensor) -> ArgTensor:
        return a_einsum(subs, x, y)

    def transpose(self, x: ArgTensor, perm) -> ArgTensor:
        return a_transpose(x, perm)


# --------------------------------------------------------------------------
# theories
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldSpec:
    label: str
    variance: tuple


@dataclass(frozen=True)
class LagrangianTheory:
    name: str
    fields: tuple
    lagrangian: Callable[[LagrangianContext], ArgTensor]


def scalar_theory(mass: float = 0.0) -> LagrangianTheory:
    """L = -1/2 (g^ab grad_a phi grad_b phi + m^2 phi^2)."""

    def lag(ctx: LagrangianContext) -> ArgTensor:
        dphi = ctx.dpsi("phi")
        up = ctx.einsum("ab,b->a", ctx.ginv, dphi)
        kin = ctx.einsum("a,a->", dphi, up)
        out = -0.5 * kin
        if mass != 0.0:
            phi = ctx.psi("phi")
            out = out + (-0.5 * mass * mass) * ctx.einsum(",->", phi, phi)
        return out

    return LagrangianTheory(
        name=f"scalar(m={mass:g})",
        fields=(FieldSpec("phi", ()),),
        lagrangian=lag,
    )


def maxwell_theory() -> LagrangianTheory:
    """L = -1/4 F_ab F^ab with F_ab = grad_a A_b - grad_b A_a."""

    def lag(ctx: LagrangianContext) -> ArgTensor:
        dA = ctx.dpsi("A")                        # [b, a] = grad_a A_b
        F = ctx.transpose(dA, (1, 0)) - dA        # [a, b] = grad_a A_b - grad_b A_a
        Fmixed = ctx.einsum("ca,ab->cb", ctx.ginv, F)
        Fup = ctx.einsum("cb,db->cd", Fmixed, ctx.ginv)
        S = ctx.einsum("ab,ab->", F, Fup)
        return -0.25 * S

    return LagrangianTheory(
        name="maxwell",
        fields=(FieldSpec("A", ("d",)),),
        lagrangian=lag,
    )


def broken_scalar_theory(mass: float = 0.0, strength: float = 0.1) -> LagrangianTheory:
    """Scalar theory plus a bare-coordinate term; deliberately not generally
    covariant, used as a negative control for the kinematic identity."""

    base = scalar_theory(mass)

    def lag(ctx: LagrangianContext) -> ArgTensor:
        phi = ctx.psi("phi")
        extra = ctx.einsum(",->", phi, phi) * (strength * ctx.coord(0))
        return base.lagrangian(ctx) + extra

    return LagrangianTheory(
        name=f"broken-scalar(m={mass:g})",
        fields=base.fields,
        lagrangian=lag,
    )


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


def _dual(variance):
    return tuple("u" if v == "d" else "d" for v in variance)


def _slot_letters(r):
    return "".join(chr(ord("i") + k) for k in range(r))


class TheoryFrame:
    """A theory, a field configuration, and a frame, with every derived
    quantity computed lazily and cached."""

    def __init__(self, theory: LagrangianTheory, frame: Frame,
                 psi: dict, dpsi: dict, L: Jet,
                 dL_dpsi: dict, dL_ddpsi: dict, dL_dg: TensorValue):
        self.theory = theory
        self.frame = frame
        self.psi = psi
        self.dpsi = dpsi
        self.L = L
        self.dL_dpsi = dL_dpsi
        self.dL_ddpsi = dL_ddpsi
        self.dL_dg = dL_dg

    @property
    def n(self):
        return self.frame.n

    # -- field equations ------------------------------------------------

    @cached_property
    def eom_residual(self) -> dict:
        """D_a dL/d(grad_a psi) - dL/dpsi, per field label."""
        out = {}
        for spec in self.theory.fields:
            G = self.dL_ddpsi[spec.label]
            rS = G.rank - 1
            dG = covariant_derivative(G, self.frame)
            div = contract(dG, rS, rS + 1)
            out[spec.label] = div - self.dL_dpsi[spec.label]
        return out

    def eom_max_residual(self) -> float:
        worst = 0.0
        for t in self.eom_residual.values():
            arr = t.components.data[0] if isinstance(t.components, Jet) else t.components
            if arr.size:
                worst = max(worst, float(np.max(np.abs(arr))))
        return worst

    def require_on_shell(self, gate: float = 1e-7):
        r = self.eom_max_residual()
        if r > gate:
            raise OffShellError(
                f"configuration violates the field equations: max residual "
                f"{r:.3e} > gate {gate:.1e}"
            )

    # -- superpotential and energy-momentum tensors ----------------------

    @cached_property
    def _tilde_raised(self) -> dict:
        """(tilde psi)^ab per label: new up slot, then the raised new down slot."""
        out = {}
        for spec in self.theory.fields:
            t = tilde(self.psi[spec.label])
            r = t.rank - 2
            out[spec.label] = raise_slot(t, r + 1, self.frame.ginv)
        return out

    @cached_property
    def theta(self) -> TensorValue:
        """Theta^abc, antisymmetric in its first two slots."""
        n = self.n
        acc = None
        for spec in self.theory.fields:
            G = self.dL_ddpsi[spec.label]           # [S*, a]
            ttr = self._tilde_raised[spec.label]     # [S, u, v]
            r = ttr.rank - 2
            asym = antisymmetrize_pair(ttr, r, r + 1)
            S = _slot_letters(r)
            Y = jet_einsum(f"{S}a,{S}uv->auv", G.components, asym.components)
            Yt = TensorValue(("u", "u", "u"), n, Y)
            term = (
                transpose_slots(Yt, (0, 2, 1))      # [a,b,c] = Y[a,c,b]
                + transpose_slots(Yt, (1, 0, 2))    # [a,b,c] = Y[b,a,c]
                + transpose_slots(Yt, (1, 2, 0))    # [a,b,c] = Y[c,a,b]
            )
            acc = term if acc is None else acc + term
        if acc is None:
            raise ValueError("theory has no fields")
        return acc

    @cached_property
    def _g_up_L(self) -> TensorValue:
        comps = jet_einsum("ab,->ab", self.frame.ginv.components, self.L)
        return TensorValue(("u", "u"), self.n, comps)

    @cached_property
    def emt_canonical(self) -> TensorValue:
        """T_C^ab = -dL/d(grad_a psi) grad^b psi + g^ab L."""
        acc = None
        for spec in self.theory.fields:
            G = self.dL_ddpsi[spec.label]
            d = self.dpsi[spec.label]
            dup = raise_slot(d, d.rank - 1, self.frame.ginv)
            S = _slot_letters(d.rank - 1)
            term = jet_einsum(f"{S}a,{S}b->ab", G.components, dup.components)
            acc = term if acc is None else acc + term
        return TensorValue(("u", "u"), self.n, -acc) + self._g_up_L

    @cached_property
    def _bracket(self) -> TensorValue:
        """dL/d(grad_c psi) (tilde psi)^ab + Theta^cab, slots [c, a, b];
        symmetric in (a, b) by construction."""
        acc = self.theta  # Theta^cab in slots [c, a, b] is just theta itself
        for spec in self.theory.fields:
            G = self.dL_ddpsi[spec.label]
            ttr = self._tilde_raised[spec.label]
            r = ttr.rank - 2
            S = _slot_letters(r)
            term = jet_einsum(f"{S}c,{S}ab->cab", G.components, ttr.components)
            acc = acc + TensorValue(("u", "u", "u"), self.n, term)
        return acc

    @cached_property
    def emt_metric(self) -> TensorValue:
        """T_M^ab = 2 dL/dg_ab - D_c(bracket^cab) + g^ab L."""
        dbr = covariant_derivative(self._bracket, self.frame)
        div = contract(dbr, 0, 3)
        return 2.0 * self.dL_dg - div + self._g_up_L

    @cached_property
    def emt_belinfante(self) -> TensorValue:
        """T_B^ab = T_C^ab - D_c Theta^cab."""
        dth = covariant_derivative(self.theta, self.frame)
        div = contract(dth, 0, 3)
        return self.emt_canonical - div


def evaluate_theory(theory: LagrangianTheory, fields: dict, frame: Frame) -> TheoryFrame:
    """Evaluate the Lagrangian and its component-argument derivatives on a frame.

    ``fields`` maps each field label to a TensorField matching the theory's
    declared variance.
    """
    psi, dpsi = {}, {}
    for spec in theory.fields:
        fld = fields[spec.label]
        if tuple(fld.variance) != tuple(spec.variance):
            raise ValueError(
                f"field '{spec.label}' has variance {fld.variance}, "
                f"theory expects {spec.variance}"
            )
        psi[spec.label] = evaluate(fld, frame)
        dpsi[spec.label] = covariant_derivative(psi[spec.label], frame)

    _ARG_RANKS.clear()
    psi_args = {s.label: _seed_arg(f"psi:{s.label}", s.variance, frame.n,
                                   psi[s.label].components)
                for s in theory.fields}
    dpsi_args = {s.label: _seed_arg(f"dpsi:{s.label}", tuple(s.variance) + ("d",),
                                    frame.n, dpsi[s.label].components)
                 for s in theory.fields}
    g_arg = _seed_arg("g", ("d", "d"), frame.n, frame.g.components)
    ginv_arg = _inverse_metric_arg(g_arg)
    ctx = LagrangianContext(frame.n, psi_args, dpsi_args, g_arg, ginv_arg,
                            frame.coords[: frame.n])
    Larg = theory.lagrangian(ctx)
    if Larg.rank != 0:
        raise ValueError("Lagrangian must evaluate to a scalar")

    L = Larg.comps
    if not isinstance(L, Jet):
        L = constant_jet(np.asarray(L, float), frame.g.components.nvars,
                         frame.g.components.order - 1)

    def grad_tensor(key, arg_variance):
        r = len(arg_variance)
        g = Larg.grads.get(key)
        if g is None:
            z = zeros_jet(L.nvars, L.order, r, L.batch_shape + (frame.n,) * r)
            return TensorValue(_dual(arg_variance), frame.n, z)
        if not isinstance(g, Jet):
            g = constant_jet(np.asarray(g, float), L.nvars, L.order, vdim=r)
        return TensorValue(_dual(arg_variance), frame.n, g)

    dL_dpsi = {s.label: grad_tensor(f"psi:{s.label}", tuple(s.variance))
               for s in theory.fields}
    dL_ddpsi = {s.label: grad_tensor(f"dpsi:{s.label}", tuple(s.variance) + ("d",))
                for s in theory.fields}
    raw = grad_tensor("g", ("d", "d"))
    dL_dg = 0.5 * (raw + transpose_slots(raw, (1, 0)))
    return TheoryFrame(theory, frame, psi, dpsi, L, dL_dpsi, dL_ddpsi, dL_dg)


# --------------------------------------------------------------------------
# identity residuals
# --------------------------------------------------------------------------


def _scalar_values(j: Jet) -> np.ndarray:
    return j.data[0]


def _div_current(j: TensorValue, frame: Frame) -> Jet:
    dj = covariant_derivative(j, frame)
    return contract(dj, 0, 1).components


def _lower(xi: TensorValue, frame: Frame) -> TensorValue:
    return TensorValue(("d",), frame.n,
                       jet_einsum("ab,b->a", frame.g.components, xi.components))


def master_identity_terms(tf: TheoryFrame, xi: TensorValue):
    """(D_a(T_B^ab xi_b), 1/2 T_M^ab (Lie_xi g)_ab) as scalar jets."""
    from .geometry import lie_derivative

    xil = _lower(xi, tf.frame)
    j = TensorValue(("u",), tf.n,
                    jet_einsum("ab,b->a", tf.emt_belinfante.components, xil.components))
    lhs = _div_current(j, tf.frame)
    h = lie_derivative(tf.frame.g, xi, tf.frame)
    rhs = 0.5 * jet_einsum("ab,ab->", tf.emt_metric.components, h.components)
    return lhs, rhs


def current_gradient_pairing_residual(tf: TheoryFrame, xi: TensorValue) -> np.ndarray:
    """D_a(T_B^ab xi_b) - T_M^ab D_a xi_b."""
    xil = _lower(xi, tf.frame)
    j = TensorValue(("u",), tf.n,
                    jet_einsum("ab,b->a", tf.emt_belinfante.components, xil.components))
    lhs = _div_current(j, tf.frame)
    dxil = covariant_derivative(xil, tf.frame)   # [b, a] = D_a xi_b
    rhs = jet_einsum("ab,ba->", tf.emt_metric.components, dxil.components)
    return _scalar_values(lhs - rhs)


def noether_current(tf: TheoryFrame, xi: TensorValue) -> TensorValue:
    """j^a = T_B^ab xi_b."""
    xil = _lower(xi, tf.frame)
    return TensorValue(("u",), tf.n,
                       jet_einsum("ab,b->a", tf.emt_belinfante.components, xil.components))


def alternative_current(tf: TheoryFrame, xi: TensorValue) -> TensorValue:
    """j^a = T_C^ab xi_b + Theta^cab D_c xi_b."""
    xil = _lower(xi, tf.frame)
    t1 = jet_einsum("ab,b->a", tf.emt_canonical.components, xil.components)
    dxil = covariant_derivative(xil, tf.frame)   # [b, c] = D_c xi_b
    t2 = jet_einsum("cab,bc->a", tf.theta.components, dxil.components)
    return TensorValue(("u",), tf.n, t1 + t2)


def difference_current(tf: TheoryFrame, xi: TensorValue) -> TensorValue:
    """V^a = (D_c Theta^cab) xi_b + Theta^cab D_c xi_b; its divergence vanishes
    because Theta is antisymmetric in (c, a) and the Ricci tensor is symmetric."""
    xil = _lower(xi, tf.frame)
    dth = covariant_derivative(tf.theta, tf.frame)
    divth = contract(dth, 0, 3)                   # [a, b]
    t1 = jet_einsum("ab,b->a", divth.components, xil.components)
    dxil = covariant_derivative(xil, tf.frame)
    t2 = jet_einsum("cab,bc->a", tf.theta.components, dxil.components)
    return TensorValue(("u",), tf.n, t1 + t2)


def current_divergence(tf: TheoryFrame, current: TensorValue) -> np.ndarray:
    return _scalar_values(_div_current(current, tf.frame))


def lie_matter_current(tf: TheoryFrame, xi: TensorValue) -> TensorValue:
    """j^a = dL/d(grad_a psi) Lie_xi psi - L xi^a."""
    from .geometry import lie_derivative

    acc = None
    for spec in tf.theory.fields:
        G = tf.dL_ddpsi[spec.label]
        lpsi = lie_derivative(tf.psi[spec.label], xi, tf.frame)
        S = _slot_letters(G.rank - 1)
        term = jet_einsum(f"{S}a,{S}->a", G.components, lpsi.components)
        acc = term if acc is None else acc + term
    lterm = jet_einsum("a,->a", xi.components, tf.L)
    return TensorValue(("u",), tf.n, acc - lterm)


def canonical_divergence_terms(tf: TheoryFrame, gate: float = 1e-7):
    """On-shell: (D_a T_C^ab, dL/d(grad_a psi) R^b_adc (tilde psi)^cd).

    The right side vanishes identically for scalar fields and in flat space;
    in general the canonical tensor fails to be conserved by exactly this
    curvature term.
    """
    tf.require_on_shell(gate)
    dT = covariant_derivative(tf.emt_canonical, tf.frame)
    lhs = contract(dT, 0, 2)                     # [b]
    acc = None
    for spec in tf.theory.fields:
        G = tf.dL_ddpsi[spec.label]
        ttr = tf._tilde_raised[spec.label]
        r = ttr.rank - 2
        S = _slot_letters(r)
        X = jet_einsum(f"{S}a,{S}cd->acd", G.components, ttr.components)
        term = jet_einsum("acd,badc->b", X, tf.frame.riemann.components)
        acc = term if acc is None else acc + term
    rhs = TensorValue(("u",), tf.n, acc)
    return lhs, rhs


def metric_derivative_identity_terms(tf: TheoryFrame, gate: float = 1e-7):
    """On-shell: (2 dL/dg_ab, D_c(dL/d(grad_c psi) (tilde psi)^ab)
                           - dL/d(grad_a psi) grad^b psi), both (2,0)."""
    tf.require_on_shell(gate)
    lhs = 2.0 * tf.dL_dg
    acc = None
    for spec in tf.theory.fields:
        G = tf.dL_ddpsi[spec.label]
        ttr = tf._tilde_raised[spec.label]
        r = ttr.rank - 2
        S = _slot_letters(r)
        W = jet_einsum(f"{S}c,{S}ab->cab", G.components, ttr.components)
        Wt = TensorValue(("u", "u", "u"), tf.n, W)
        dW = covariant_derivative(Wt, tf.frame)
        div = contract(dW, 0, 3)
        d = tf.dpsi[spec.label]
        dup = raise_slot(d, d.rank - 1, tf.frame.ginv)
        Sd = _slot_letters(d.rank - 1)
        t2 = jet_einsum(f"{Sd}a,{Sd}b->ab", G.components, dup.components)
        term = div - TensorValue(("u", "u"), tf.n, t2)
        acc = term if acc is None else acc + term
    return lhs, acc


def kinematic_lie_residual(tf: TheoryFrame, xi: TensorValue) -> np.ndarray:
    """Chain-rule expansion of Lie_xi L minus grad_a L xi^a; identically zero
    for any generally covariant Lagrangian, on or off shell."""
    from .geometry import lie_derivative

    acc = None
    for spec in tf.theory.fields:
        G = tf.dL_ddpsi[spec.label]
        ldpsi = lie_derivative(tf.dpsi[spec.label], xi, tf.frame)
        S = _slot_letters(G.rank)
        t1 = jet_einsum(f"{S},{S}->", G.components, ldpsi.components)
        P = tf.dL_dpsi[spec.label]
        lpsi = lie_derivative(tf.psi[spec.label], xi, tf.frame)
        Sp = _slot_letters(P.rank)
        t2 = jet_einsum(f"{Sp},{Sp}->", P.components, lpsi.components)
        term = t1 + t2
        acc = term if acc is None else acc + term
    h = lie_derivative(tf.frame.g, xi, tf.frame)
    acc = acc + jet_einsum("ab,ab->", tf.dL_dg.components, h.components)
    dL = differentiate(tf.L, keep=tf.n)
    acc = acc - jet_einsum("a,a->", dL, xi.components)
    return _scalar_values(acc)


# --------------------------------------------------------------------------
# variational comparison
# --------------------------------------------------------------------------


def _midpoint_grid(box, shape):
    """Cell-center tensor grid over the box; returns (points, cell volume)."""
    axes = []
    vol = 1.0
    for (lo, hi), m in zip(box, shape):
        step = (hi - lo) / m
        axes.append(lo + step * (np.arange(m) + 0.5))
        vol *= step
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([x.ravel() for x in mesh], axis=-1)
    return pts, vol


def _boundary_mask(shape):
    idx = np.indices(shape)
    mask = np.zeros(shape, dtype=bool)
    for k, m in enumerate(shape):
        mask |= (idx[k] == 0) | (idx[k] == m - 1)
    return mask.ravel()


def variational_pair(theory, fields, metric: MetricField, h: TensorField,
                     box, shape, seed_chunk: int = 1024):
    """Compare the metric variation of the action against the T_M pairing.

    Returns (dS/d eps, 1/2 integral of T_M^ab h_ab sqrt|g|), both evaluated by
    the same midpoint rule on the given tensor grid, with the fields held
    fixed and g -> g + eps h.  h must be compactly supported inside the box.
    """
    n = metric.n
    pts, vol = _midpoint_grid(box, shape)
    npts = pts.shape[0]

    # compact-support guard: h must be negligible on the boundary cells
    probe = geometry_at(metric, pts, 1)
    hvals = evaluate(h, probe).components.data[0]
    hmax = np.max(np.abs(hvals.reshape(npts, -1)), axis=1)
    bmask = _boundary_mask(shape)
    interior = float(np.max(hmax))
    edge = float(np.max(hmax[bmask]))
    if interior == 0.0:
        pass
    elif edge > 1e-10 * interior:
        raise ValueError(
            "perturbation support touches the quadrature boundary "
            f"(edge/interior = {edge / interior:.2e})"
        )

    def eps_metric_fn(coords):
        base = metric.fn(coords[:n])
        hj = h.fn(coords[:n])
        return base + jet_einsum("ab,->ab", hj, coords[n])

    eps_metric = MetricField(metric.name + "+eps*h", n, metric.signature, eps_metric_fn)
    pts_ext = np.concatenate([pts, np.zeros((npts, 1))], axis=1)

    lhs_vals = np.empty(npts)
    rhs_vals = np.empty(npts)
    for lo in range(0, npts, seed_chunk):
        hi = min(lo + seed_chunk, npts)
        fr_eps = geometry_at(eps_metric, pts_ext[lo:hi], 2)
        tf_eps = evaluate_theory(theory, fields, fr_eps)
        integrand = tf_eps.L * fr_eps.sqrt_g
        lhs_vals[lo:hi] = partial_in_var(integrand, n).data[0]

        fr0 = geometry_at(metric, pts[lo:hi], 2)
        tf0 = evaluate_theory(theory, fields, fr0)
        hv = evaluate(h, fr0)
        dens = 0.5 * jet_einsum("ab,ab->", tf0.emt_metric.components, hv.components)
        rhs_vals[lo:hi] = (dens * fr0.sqrt_g).data[0]

    return vol * float(np.sum(lhs_vals)), vol * float(np.sum(rhs_vals))


# --------------------------------------------------------------------------
# gauge transformation helper
# --------------------------------------------------------------------------


def gauge_shifted(A: TensorField, chi: TensorField, name: str = "") -> TensorField:
    """The one-form field A + grad(chi) for a scalar field chi."""
    if tuple(A.variance) != ("d",):
        raise ValueError("gauge shift applies to a one-form field")

    def fn(coords):
        nv = coords[0].nvars
        order = coords[0].order
        pts = np.stack([np.broadcast_to(c.data[0], coords[0].batch_shape)
                        for c in coords], axis=-1)
        fine = lift(pts, nv, order + 1)
        chij = chi.fn(fine)
        dchi = differentiate(chij, keep=len(coords))
        base = A.fn(coords)
        return base + dchi

    return TensorField(("d",), fn, name=name or (A.name + "+grad chi"))
