"""Truncated multivariate Taylor (jet) arithmetic on dense numpy tables.

A jet stores the value of a quantity together with all of its partial
derivatives up to a fixed order with respect to ``nvars`` independent
variables.  Arithmetic on jets propagates derivatives exactly (truncated
Taylor/Leibniz rules), so identities between smooth expressions hold to
floating-point roundoff rather than to a finite-difference error.

Layout: ``data[m]`` is the order-m derivative table with shape

    batch_shape + value_shape + (nvars,)*m

The tables are symmetric in the derivative axes.  ``vdim`` counts the
value axes (0 for scalar jets); leading axes are broadcastable batch
axes, which lets a whole grid of sample points flow through one einsum.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np

__all__ = [
    "Jet",
    "JetOrderError",
    "jet_einsum",
    "jet_map",
    "jet_compose",
    "jexp",
    "jlog",
    "jsin",
    "jcos",
    "jsqrt",
    "jreciprocal",
    "jpow",
    "jabs",
    "jet_truncate",
    "differentiate",
    "partial_in_var",
    "lift",
    "constant_jet",
    "zeros_jet",
    "jet_stack",
]

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


class JetOrderError(RuntimeError):
    """An operation needed more derivative orders than its operand carries."""


class Jet:
    """Dense truncated Taylor expansion of an array-valued quantity."""

    __slots__ = ("nvars", "order", "vdim", "data")

    # keep numpy from absorbing Jet operands into object arrays; binary ops
    # with ndarrays then fall back to the Jet dunders below
    __array_ufunc__ = None

    def __init__(self, nvars: int, order: int, vdim: int, data):
        if order < 0:
            raise ValueError("jet order must be >= 0")
        data = [np.asarray(t, dtype=float) for t in data]
        if len(data) != order + 1:
            raise ValueError(f"expected {order + 1} derivative tables, got {len(data)}")
        if data[0].ndim < vdim:
            raise ValueError("value table has fewer axes than vdim")
        vshape = data[0].shape[data[0].ndim - vdim:] if vdim else ()
        batches = []
        for m, t in enumerate(data):
            trail = vdim + m
            if t.ndim < trail:
                raise ValueError(f"order-{m} table has too few axes")
            if m > 0 and t.shape[t.ndim - m:] != (nvars,) * m:
                raise ValueError(
                    f"order-{m} table derivative axes {t.shape[t.ndim - m:]} != {(nvars,) * m}"
                )
            if vdim and t.shape[t.ndim - trail:t.ndim - m] != vshape:
                raise ValueError("inconsistent value shape across derivative tables")
            batches.append(t.shape[: t.ndim - trail])
        common = np.broadcast_shapes(*batches)
        norm = []
        for m, t in enumerate(data):
            want = common + vshape + (nvars,) * m
            norm.append(t if t.shape == want else np.broadcast_to(t, want))
        self.nvars = nvars
        self.order = order
        self.vdim = vdim
        self.data = tuple(norm)

    # -- introspection -------------------------------------------------

    @property
    def value(self) -> np.ndarray:
        return self.data[0]

    @property
    def batch_shape(self) -> tuple:
        return self.data[0].shape[: self.data[0].ndim - self.vdim]

    @property
    def vshape(self) -> tuple:
        nd = self.data[0].ndim
        return self.data[0].shape[nd - self.vdim:] if self.vdim else ()

    def __repr__(self):
        return (
            f"Jet(nvars={self.nvars}, order={self.order}, vdim={self.vdim}, "
            f"batch={self.batch_shape}, vshape={self.vshape})"
        )

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        return _add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return _add(self, _neg(other))

    def __rsub__(self, other):
        return _add(_neg(self), other)

    def __neg__(self):
        return _neg(self)

    def __mul__(self, other):
        return _mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return _mul(self, jreciprocal(other))
        return _mul(self, 1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return _mul(jreciprocal(self), other)

    def __pow__(self, p):
        return jpow(self, p)


def _is_const(x) -> bool:
    return not isinstance(x, Jet)


def _neg(x):
    if _is_const(x):
        return -np.asarray(x, dtype=float)
    return Jet(x.nvars, x.order, x.vdim, [-t for t in x.data])


def _add(x, y):
    if _is_const(x) and _is_const(y):
        return np.asarray(x, dtype=float) + np.asarray(y, dtype=float)
    if _is_const(y):
        x, y = y, x
    if _is_const(x):
        c = np.asarray(x, dtype=float)
        return Jet(y.nvars, y.order, y.vdim, [y.data[0] + c, *y.data[1:]])
    if x.nvars != y.nvars:
        raise ValueError("jet addition needs matching nvars")
    if x.vdim != y.vdim:
        raise ValueError("jet addition needs matching vdim")
    order = min(x.order, y.order)
    return Jet(x.nvars, order, x.vdim, [x.data[m] + y.data[m] for m in range(order + 1)])


def _mul(x, y):
    """Elementwise product (scalar broadcast allowed on either side)."""
    if _is_const(x) and _is_const(y):
        return np.asarray(x, dtype=float) * np.asarray(y, dtype=float)
    if _is_const(y):
        x, y = y, x
    if _is_const(x):
        c = np.asarray(x, dtype=float)
        if c.ndim == 0:
            return Jet(y.nvars, y.order, y.vdim, [c * t for t in y.data])
        return _const_mul(c, y)
    vx, vy = _LETTERS[: x.vdim], _LETTERS[: y.vdim]
    if x.vdim == y.vdim:
        return jet_einsum(f"{vx},{vy}->{vx}", x, y)
    if x.vdim == 0:
        return jet_einsum(f",{vy}->{vy}", x, y)
    if y.vdim == 0:
        return jet_einsum(f"{vx},->{vx}", x, y)
    raise ValueError("elementwise product needs equal vdim or a scalar operand")


def _const_mul(c: np.ndarray, y: "Jet") -> "Jet":
    # constant array broadcast against batch+value axes; derivative axes ride along
    out = []
    for m, t in enumerate(y.data):
        out.append(c[(...,) + (None,) * m] * t)
    return Jet(y.nvars, y.order, y.vdim, out)


def _parse_subs(subs: str):
    lhs, out = subs.split("->")
    parts = lhs.split(",")
    return parts, out


def _free_letters(used, k):
    pool = [c for c in _LETTERS if c not in used]
    if len(pool) < k:
        raise ValueError("ran out of einsum letters")
    return pool[:k]


def jet_einsum(subs: str, x, y):
    """Bilinear einsum over value axes with the Leibniz rule on derivative axes.

    ``subs`` uses plain letters for the value axes, e.g. ``'ij,jk->ik'``.
    Batch axes broadcast implicitly.  Either operand may be a plain
    ndarray, treated as a derivative-free constant.
    """
    (sx, sy), so = _parse_subs(subs)
    xj, yj = isinstance(x, Jet), isinstance(y, Jet)
    if not (xj or yj):
        return np.einsum(f"...{sx},...{sy}->...{so}", np.asarray(x, float), np.asarray(y, float))
    if xj and yj:
        if x.nvars != y.nvars:
            raise ValueError("jet_einsum operands differ in nvars")
        order = min(x.order, y.order)
        dl = _free_letters(set(sx + sy + so), order)
        data = []
        for m in range(order + 1):
            acc = None
            for i in range(m + 1):
                for pos in combinations(range(m), i):
                    inpos = set(pos)
                    fl = "".join(dl[p] for p in pos)
                    gl = "".join(dl[p] for p in range(m) if p not in inpos)
                    term = np.einsum(
                        f"...{sx}{fl},...{sy}{gl}->...{so}{''.join(dl[:m])}",
                        x.data[i], y.data[m - i],
                    )
                    acc = term if acc is None else acc + term
            data.append(acc)
        return Jet(x.nvars, order, len(so), data)
    if xj:
        jet, const, sj, sc, jet_first = x, np.asarray(y, float), sx, sy, True
    else:
        jet, const, sj, sc, jet_first = y, np.asarray(x, float), sy, sx, False
    dl = _free_letters(set(sx + sy + so), jet.order)
    data = []
    for m in range(jet.order + 1):
        dm = "".join(dl[:m])
        if jet_first:
            t = np.einsum(f"...{sj}{dm},...{sc}->...{so}{dm}", jet.data[m], const)
        else:
            t = np.einsum(f"...{sc},...{sj}{dm}->...{so}{dm}", const, jet.data[m])
        data.append(t)
    return Jet(jet.nvars, jet.order, len(so), data)


def jet_map(subs: str, x, *consts):
    """Linear einsum on one jet operand plus constant ndarray factors.

    The jet must be the first operand in ``subs``.  Repeated output
    letters are not supported (plain einsum semantics).
    """
    parts, so = _parse_subs(subs)
    if len(parts) != 1 + len(consts):
        raise ValueError("operand count mismatch")
    if not isinstance(x, Jet):
        arrs = [np.asarray(x, float)] + [np.asarray(c, float) for c in consts]
        return np.einsum(",".join(f"...{p}" for p in parts) + f"->...{so}", *arrs)
    dl = _free_letters(set("".join(parts) + so), x.order)
    data = []
    carrs = [np.asarray(c, float) for c in consts]
    for m in range(x.order + 1):
        dm = "".join(dl[:m])
        ops = ",".join([f"...{parts[0]}{dm}"] + [f"...{p}" for p in parts[1:]])
        data.append(np.einsum(f"{ops}->...{so}{dm}", x.data[m], *carrs))
    return Jet(x.nvars, x.order, len(so), data)


def _set_partitions(m: int):
    """All partitions of {0..m-1} into nonempty blocks (tuples of sorted ints)."""
    if m == 0:
        return [[]]
    smaller = _set_partitions(m - 1)
    out = []
    for part in smaller:
        for i in range(len(part)):
            out.append(part[:i] + [part[i] + (m - 1,)] + part[i + 1:])
        out.append(part + [(m - 1,)])
    return out


def jet_compose(coeffs, f: Jet) -> Jet:
    """Apply a smooth scalar function to a jet via its derivative ladder.

    ``coeffs[k]`` is the k-th derivative of the outer function evaluated at
    ``f.value`` (an array broadcastable to batch+value shape).  Uses the
    multivariate chain rule over set partitions of the derivative slots.
    """
    K = f.order
    if len(coeffs) < K + 1:
        raise ValueError("need one coefficient per derivative order")
    vl = _LETTERS[: f.vdim]
    dl = _free_letters(set(vl), K)
    c0 = np.asarray(coeffs[0], dtype=float)
    data = [np.broadcast_to(c0, f.data[0].shape)]
    for m in range(1, K + 1):
        dm = "".join(dl[:m])
        acc = None
        for part in _set_partitions(m):
            arrs = []
            strs = []
            for block in part:
                arrs.append(f.data[len(block)])
                strs.append(f"...{vl}" + "".join(dl[i] for i in block))
            prod = np.einsum(",".join(strs) + f"->...{vl}{dm}", *arrs)
            cr = np.asarray(coeffs[len(part)], dtype=float)
            term = cr[(...,) + (None,) * m] * prod
            acc = term if acc is None else acc + term
        data.append(acc)
    return Jet(f.nvars, K, f.vdim, data)


def jexp(f: Jet) -> Jet:
    v = np.exp(f.data[0])
    return jet_compose([v] * (f.order + 1), f)


def jlog(f: Jet) -> Jet:
    v0 = f.data[0]
    if np.any(v0 <= 0):
        raise ValueError("jlog needs a strictly positive value part")
    coeffs = [np.log(v0)]
    for k in range(1, f.order + 1):
        coeffs.append(((-1.0) ** (k - 1)) * math.factorial(k - 1) * v0 ** (-k))
    return jet_compose(coeffs, f)


def jsin(f: Jet) -> Jet:
    v0 = f.data[0]
    cycle = [np.sin(v0), np.cos(v0), -np.sin(v0), -np.cos(v0)]
    return jet_compose([cycle[k % 4] for k in range(f.order + 1)], f)


def jcos(f: Jet) -> Jet:
    v0 = f.data[0]
    cycle = [np.cos(v0), -np.sin(v0), -np.cos(v0), np.sin(v0)]
    return jet_compose([cycle[k % 4] for k in range(f.order + 1)], f)


def jreciprocal(f: Jet) -> Jet:
    v0 = f.data[0]
    if np.any(v0 == 0):
        raise ZeroDivisionError("jet reciprocal of a zero value part")
    coeffs = [((-1.0) ** k) * math.factorial(k) * v0 ** (-(k + 1)) for k in range(f.order + 1)]
    return jet_compose(coeffs, f)


def _jpow_float(f: Jet, p: float) -> Jet:
    v0 = f.data[0]
    if np.any(v0 <= 0):
        raise ValueError("fractional powers need a strictly positive value part")
    coeffs = []
    fac = 1.0
    for k in range(f.order + 1):
        coeffs.append(fac * v0 ** (p - k))
        fac *= p - k
    return jet_compose(coeffs, f)


def jsqrt(f: Jet) -> Jet:
    return _jpow_float(f, 0.5)


def jpow(f: Jet, p) -> Jet:
    """Integer powers by repeated multiplication (any sign of the base),
    fractional powers through the derivative ladder (positive base only)."""
    if isinstance(p, (int, np.integer)):
        if p < 0:
            return jpow(jreciprocal(f), -p)
        acc = None
        base = f
        k = int(p)
        if k == 0:
            return constant_jet(np.ones(f.batch_shape + f.vshape), f.nvars, f.order)
        while k:
            if k & 1:
                acc = base if acc is None else _mul(acc, base)
            k >>= 1
            if k:
                base = _mul(base, base)
        return acc
    return _jpow_float(f, float(p))


def jabs(f: Jet) -> Jet:
    """|f| for a jet whose value part stays away from zero."""
    v0 = f.data[0]
    if np.any(v0 == 0):
        raise ValueError("jabs at a zero of the value part is not differentiable")
    sign = np.sign(v0)
    return _const_mul(sign, f)


def jet_truncate(f: Jet, order: int) -> Jet:
    if order > f.order:
        raise JetOrderError(f"cannot extend a jet of order {f.order} to {order}")
    return Jet(f.nvars, order, f.vdim, f.data[: order + 1])


def differentiate(f: Jet, keep: int | None = None) -> Jet:
    """Turn one derivative axis into a new trailing value axis.

    Returns the jet of partial derivatives: value shape grows by one axis of
    size ``keep`` (default ``nvars``), order drops by one.  With ``keep < nvars``
    only the first ``keep`` directions become components (used when auxiliary
    parameters ride along as extra differentiation variables).
    """
    if f.order == 0:
        raise JetOrderError("jet order exhausted: cannot differentiate an order-0 jet")
    keep = f.nvars if keep is None else keep
    nb = f.data[0].ndim - f.vdim
    out = []
    for m in range(f.order):
        t = np.moveaxis(f.data[m + 1], -1, nb + f.vdim)
        if keep != f.nvars:
            idx = (slice(None),) * (nb + f.vdim) + (slice(0, keep),)
            t = t[idx]
        out.append(t)
    return Jet(f.nvars, f.order - 1, f.vdim + 1, out)


def partial_in_var(f: Jet, var: int) -> Jet:
    """Partial derivative with respect to a single variable (order drops by one)."""
    if f.order == 0:
        raise JetOrderError("jet order exhausted: cannot differentiate an order-0 jet")
    return Jet(f.nvars, f.order - 1, f.vdim, [t[..., var] for t in f.data[1:]])


def lift(points: np.ndarray, nvars: int, order: int) -> list[Jet]:
    """Coordinate jets at sample points: one scalar jet per coordinate.

    ``points`` has shape batch + (k,) with k <= nvars; coordinate i carries
    first derivative e_i and vanishing higher derivatives.
    """
    points = np.asarray(points, dtype=float)
    k = points.shape[-1]
    if k > nvars:
        raise ValueError("more coordinates than jet variables")
    batch = points.shape[:-1]
    out = []
    for i in range(k):
        data = [points[..., i]]
        if order >= 1:
            e = np.zeros(batch + (nvars,))
            e[..., i] = 1.0
            data.append(e)
        for m in range(2, order + 1):
            data.append(np.zeros(batch + (nvars,) * m))
        out.append(Jet(nvars, order, 0, data))
    return out


def constant_jet(value, nvars: int, order: int, vdim: int | None = None) -> Jet:
    """A jet with the given value part and all derivatives zero."""
    value = np.asarray(value, dtype=float)
    vdim = value.ndim if vdim is None else vdim
    data = [value]
    for m in range(1, order + 1):
        data.append(np.zeros(value.shape + (nvars,) * m))
    return Jet(nvars, order, vdim, data)


def zeros_jet(nvars: int, order: int, vdim: int, shape: tuple) -> Jet:
    """All-zero jet with batch+value shape ``shape`` (value axes are the last vdim)."""
    data = [np.zeros(shape + (nvars,) * m) for m in range(order + 1)]
    return Jet(nvars, order, vdim, data)


def _leaves(nested):
    if isinstance(nested, (list, tuple)):
        for el in nested:
            yield from _leaves(el)
    else:
        yield nested


def jet_stack(nested) -> Jet:
    """Stack a nested list of scalar jets (or numbers) into an array-valued jet.

    The nesting depth becomes the number of value axes, in row-major order.
    """
    leaves = list(_leaves(nested))
    jets = [x for x in leaves if isinstance(x, Jet)]
    if not jets:
        raise ValueError("jet_stack needs at least one Jet leaf")
    nvars = jets[0].nvars
    order = min(j.order for j in jets)
    if any(j.nvars != nvars for j in jets):
        raise ValueError("jet_stack leaves differ in nvars")
    if any(j.vdim != 0 for j in jets):
        raise ValueError("jet_stack expects scalar leaves")
    batch = np.broadcast_shapes(*[j.batch_shape for j in jets])

    def norm(x):
        if not isinstance(x, Jet):
            x = constant_jet(np.asarray(x, dtype=float), nvars, order)
        else:
            x = jet_truncate(x, order)
        return [np.broadcast_to(x.data[m], batch + (nvars,) * m) for m in range(order + 1)]

    # normalize once per leaf to avoid repeated work
    cache = {}

    def build_cached(node, m):
        if isinstance(node, (list, tuple)):
            return np.stack([build_cached(el, m) for el in node], axis=len(batch))
        key = id(node)
        if key not in cache:
            cache[key] = norm(node)
        return cache[key][m]

    vdim_probe = 0
    probe = nested
    while isinstance(probe, (list, tuple)):
        vdim_probe += 1
        probe = probe[0]
    data = [build_cached(nested, m) for m in range(order + 1)]
    return Jet(nvars, order, vdim_probe, data)
