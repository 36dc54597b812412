"""Dense tensor values with explicit slot variance and the index-replacement map.

A ``TensorValue`` is a concrete tensor at a point (or a broadcastable batch of
points): an ordered list of slots, each contravariant ('u') or covariant
('d'), over components stored either as a plain float array or as a
:class:`~emtkit.jets.Jet` whose value axes are the slots.  All index
gymnastics run through einsum so that batch axes and derivative tables
ride along untouched.

The central algebraic operation here is :func:`tilde`: it maps a tensor of
type (p, q) to type (p+1, q+1) by summing, over every slot, the copy of the
tensor with that slot's index replaced by the new one, weighted with a
Kronecker delta (plus sign for contravariant slots, minus for covariant).
A scalar maps to the zero (1,1) tensor.  The two new slots are appended at
the end of the slot list, contravariant first.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np

from .jets import Jet, jet_einsum, zeros_jet, _LETTERS, _free_letters

__all__ = [
    "TensorValue",
    "tilde",
    "tensor_product",
    "contract",
    "transpose_slots",
    "raise_slot",
    "lower_slot",
    "symmetrize_pair",
    "antisymmetrize_pair",
    "levi_civita",
    "max_abs",
    "value_array",
]

_UD = ("u", "d")


class TensorValue:
    """Components plus slot bookkeeping for one tensor at (a batch of) point(s)."""

    __slots__ = ("variance", "n", "components")

    def __init__(self, variance, n: int, components):
        variance = tuple(variance)
        if any(v not in _UD for v in variance):
            raise ValueError(f"variance entries must be 'u' or 'd', got {variance}")
        r = len(variance)
        if isinstance(components, Jet):
            if components.vdim != r:
                raise ValueError(f"component jet has vdim {components.vdim}, slots {r}")
            if components.vshape != (n,) * r:
                raise ValueError(f"component jet value shape {components.vshape} != {(n,)*r}")
        else:
            components = np.asarray(components, dtype=float)
            if components.ndim < r or components.shape[components.ndim - r:] != (n,) * r:
                raise ValueError("component array does not end in the slot axes")
        self.variance = variance
        self.n = n
        self.components = components

    @property
    def rank(self) -> int:
        return len(self.variance)

    @property
    def n_up(self) -> int:
        return sum(1 for v in self.variance if v == "u")

    @property
    def n_down(self) -> int:
        return sum(1 for v in self.variance if v == "d")

    def __repr__(self):
        return f"TensorValue(variance={self.variance}, n={self.n})"

    def __add__(self, other):
        if not isinstance(other, TensorValue):
            return NotImplemented
        if other.variance != self.variance or other.n != self.n:
            raise ValueError("tensor addition needs identical slot structure")
        return TensorValue(self.variance, self.n, self.components + other.components)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return TensorValue(self.variance, self.n, -self.components)

    def __mul__(self, scalar):
        if isinstance(scalar, (int, float, np.floating)):
            return TensorValue(self.variance, self.n, self.components * float(scalar))
        return NotImplemented

    __rmul__ = __mul__


def value_array(t: TensorValue) -> np.ndarray:
    """The value part of the components (derivatives dropped for jets)."""
    c = t.components
    return c.data[0] if isinstance(c, Jet) else c


def max_abs(t: TensorValue) -> float:
    return float(np.max(np.abs(value_array(t)))) if value_array(t).size else 0.0


def _zeros_like(t: TensorValue, variance) -> TensorValue:
    r = len(variance)
    c = t.components
    if isinstance(c, Jet):
        batch = c.batch_shape
        z = zeros_jet(c.nvars, c.order, r, batch + (t.n,) * r)
    else:
        batch = c.shape[: c.ndim - t.rank]
        z = np.zeros(batch + (t.n,) * r)
    return TensorValue(variance, t.n, z)


def tilde(t: TensorValue) -> TensorValue:
    """Index-replacement map: type (p,q) -> (p+1,q+1), appending slots (up, down).

    For each contravariant slot the summand is the tensor with that slot
    holding the new up index, times delta(old slot, new down index); for each
    covariant slot the summand is minus the tensor with that slot holding the
    new down index, times delta(new up index, old slot).  Scalars map to zero.
    """
    r = t.rank
    out_var = t.variance + ("u", "d")
    if r == 0:
        return _zeros_like(t, out_var)
    slots = list(_LETTERS[:r])
    A, B = _free_letters(set(slots), 2)
    eye = np.eye(t.n)
    acc = None
    for k, v in enumerate(t.variance):
        src = slots.copy()
        src[k] = A if v == "u" else B
        subs = f"{''.join(src)},{slots[k]}{B if v == 'u' else A}->{''.join(slots)}{A}{B}"
        term = jet_einsum(subs, t.components, eye)
        if v == "d":
            term = -term
        acc = term if acc is None else acc + term
    return TensorValue(out_var, t.n, acc)


def tensor_product(a: TensorValue, b: TensorValue) -> TensorValue:
    if a.n != b.n:
        raise ValueError("tensor product needs matching dimension")
    ra, rb = a.rank, b.rank
    la = _LETTERS[:ra]
    lb = "".join(_free_letters(set(la), rb))
    comps = jet_einsum(f"{la},{lb}->{la}{lb}", a.components, b.components)
    return TensorValue(a.variance + b.variance, a.n, comps)


def contract(t: TensorValue, i: int, j: int) -> TensorValue:
    """Contract slot i (up) with slot j (down), or vice versa."""
    if i == j:
        raise ValueError("cannot contract a slot with itself")
    if {t.variance[i], t.variance[j]} != {"u", "d"}:
        raise ValueError(
            f"contraction needs one up and one down slot, got "
            f"{t.variance[i]!r} at {i} and {t.variance[j]!r} at {j}"
        )
    slots = list(_LETTERS[: t.rank])
    slots[j] = slots[i]
    out = [c for k, c in enumerate(_LETTERS[: t.rank]) if k not in (i, j)]
    comps = jet_einsum(f"{''.join(slots)},->{''.join(out)}", t.components, np.float64(1.0))
    var = tuple(v for k, v in enumerate(t.variance) if k not in (i, j))
    return TensorValue(var, t.n, comps)


def transpose_slots(t: TensorValue, perm) -> TensorValue:
    """Reorder slots so that new slot k is old slot perm[k]."""
    perm = tuple(perm)
    if sorted(perm) != list(range(t.rank)):
        raise ValueError(f"perm {perm} is not a permutation of 0..{t.rank - 1}")
    src = _LETTERS[: t.rank]
    dst = "".join(src[p] for p in perm)
    comps = jet_einsum(f"{src},->{dst}", t.components, np.float64(1.0))
    var = tuple(t.variance[p] for p in perm)
    return TensorValue(var, t.n, comps)


def raise_slot(t: TensorValue, i: int, inverse_metric: TensorValue) -> TensorValue:
    if t.variance[i] != "d":
        raise ValueError(f"slot {i} is already contravariant")
    if inverse_metric.variance != ("u", "u"):
        raise ValueError("inverse metric must be type (2,0)")
    slots = _LETTERS[: t.rank]
    A, B = _free_letters(set(slots), 2)
    dst = slots[:i] + A + slots[i + 1:]
    comps = jet_einsum(f"{slots},{A}{slots[i]}->{dst}", t.components, inverse_metric.components)
    var = t.variance[:i] + ("u",) + t.variance[i + 1:]
    return TensorValue(var, t.n, comps)


def lower_slot(t: TensorValue, i: int, metric: TensorValue) -> TensorValue:
    if t.variance[i] != "u":
        raise ValueError(f"slot {i} is already covariant")
    if metric.variance != ("d", "d"):
        raise ValueError("metric must be type (0,2)")
    slots = _LETTERS[: t.rank]
    A, B = _free_letters(set(slots), 2)
    dst = slots[:i] + A + slots[i + 1:]
    comps = jet_einsum(f"{slots},{A}{slots[i]}->{dst}", t.components, metric.components)
    var = t.variance[:i] + ("d",) + t.variance[i + 1:]
    return TensorValue(var, t.n, comps)


def _pair_swapped(t: TensorValue, i: int, j: int) -> TensorValue:
    perm = list(range(t.rank))
    perm[i], perm[j] = perm[j], perm[i]
    return transpose_slots(t, perm)


def symmetrize_pair(t: TensorValue, i: int, j: int) -> TensorValue:
    if t.variance[i] != t.variance[j]:
        raise ValueError("can only (anti)symmetrize slots of equal variance")
    return (t + _pair_swapped(t, i, j)) * 0.5


def antisymmetrize_pair(t: TensorValue, i: int, j: int) -> TensorValue:
    if t.variance[i] != t.variance[j]:
        raise ValueError("can only (anti)symmetrize slots of equal variance")
    return (t - _pair_swapped(t, i, j)) * 0.5


def levi_civita(n: int) -> TensorValue:
    """Totally antisymmetric symbol with eps[0,1,...,n-1] = +1, type (0,n)."""
    eps = np.zeros((n,) * n)
    for perm in permutations(range(n)):
        inv = sum(1 for x in range(n) for y in range(x + 1, n) if perm[x] > perm[y])
        eps[perm] = -1.0 if inv % 2 else 1.0
    return TensorValue(("d",) * n, n, eps)
