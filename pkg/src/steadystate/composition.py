"""Order-by-order assembly of the expansion inhomogeneities.

The coefficient grids z_nu(t) of the amplitude expansion satisfy, order
by order, the same linear dynamics with an inhomogeneity Phi_nu built
from lower orders. Order 1 is forced by the (unit-normalized) input
itself; higher orders are forced by the polynomial nonlinearity
composed with the partial sums, collected per total order.

For a monomial gamma (a multi-index over the 2n state components), the
order-nu coefficient of prod_i z_i(t)^{gamma_i} along the expansion is

    H[gamma, nu](t),

computed by peeling one factor at a time: with i the first component
gamma touches and gamma' = gamma - e_i,

    H[e_i, nu] = z^i_nu,
    H[gamma, nu] = sum_{a=|gamma'|}^{nu-1} H[gamma', a] * z^i_{nu-a},

and H[gamma, nu] = 0 whenever nu < |gamma| (each factor contributes at
least order one). Intermediate products are shared: every prefix
multi-index below the top degree is cached once per order and reused by
all monomials extending it, across all orders of one expansion run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, GridMismatch, OrderUnavailable
from .model import MechanicalSystem, PolynomialField

__all__ = [
    "CoefficientTensor",
    "CompositionCache",
    "assemble_H",
    "compose_field",
    "assemble_phi",
]


@dataclass
class CoefficientTensor:
    """Expansion coefficient grids, filled one order at a time.

    data has shape (state_dim, order_max, T); slot [:, nu-1, :] holds
    z_nu on the grid. Slots beyond the filled orders stay NaN so that an
    accidental read is loud. dt / t0 / pad_length describe the grid
    (t0 is the time of the first stored sample, pad included).
    """

    data: np.ndarray
    dt: float
    t0: float
    pad_length: int
    _filled: set = field(default_factory=set, repr=False)

    @classmethod
    def empty(cls, state_dim, order_max, length, dt, t0=0.0, pad_length=0):
        if order_max < 1:
            raise DimensionMismatch(f"order_max must be >= 1, got {order_max}")
        if length < 2:
            raise GridMismatch("grid needs at least 2 samples")
        data = np.full((state_dim, order_max, length), np.nan)
        return cls(data=data, dt=float(dt), t0=float(t0), pad_length=int(pad_length))

    @property
    def state_dim(self):
        return self.data.shape[0]

    @property
    def order_max(self):
        return self.data.shape[1]

    @property
    def length(self):
        return self.data.shape[2]

    @property
    def orders_complete(self):
        nu = 0
        while (nu + 1) in self._filled:
            nu += 1
        return nu

    def times(self):
        return self.t0 + self.dt * np.arange(self.length)

    def insert_slice(self, nu, grid):
        grid = np.asarray(grid)
        if not 1 <= nu <= self.order_max:
            raise OrderUnavailable(f"order {nu} outside 1..{self.order_max}")
        if grid.shape != (self.state_dim, self.length):
            raise GridMismatch(
                f"slice shape {grid.shape} != ({self.state_dim}, {self.length})"
            )
        self.data[:, nu - 1, :] = grid
        self._filled.add(nu)

    def order_slice(self, nu):
        if not 1 <= nu <= self.order_max or nu not in self._filled:
            raise OrderUnavailable(
                f"order {nu} not available (complete through {self.orders_complete})"
            )
        return self.data[:, nu - 1, :]

    def component(self, i, nu):
        """Row i of order nu; the lookup the composition recursion uses."""
        return self.order_slice(nu)[i]


@dataclass
class CompositionCache:
    """Shared H[gamma, nu] store for one expansion run.

    Only strict prefixes (|gamma| < max_degree) are kept: the top-degree
    products are consumed exactly once, so storing them would only cost
    memory. hits / misses count lookups of cacheable entries. A cache is
    tied to the coefficient grids it was filled from; never reuse one
    across tensors.
    """

    max_degree: int
    hits: int = 0
    misses: int = 0
    _store: dict = field(default_factory=dict, repr=False)

    def stats(self):
        return {"hits": self.hits, "misses": self.misses, "entries": len(self._store)}


def assemble_H(gamma, nu, component, length, cache, dtype=float):
    """Order-nu coefficient grid of the monomial gamma.

    component(i, m) must return the (length,) grid of state entry i at
    order m, for any 1 <= m <= nu - |gamma| + 1.
    """
    gamma = tuple(int(g) for g in gamma)
    degree = sum(gamma)
    if degree == 0:
        raise DimensionMismatch("monomial must have positive degree")
    if any(g < 0 for g in gamma):
        raise DimensionMismatch(f"negative exponent in {gamma}")
    if nu < degree:
        return np.zeros(length, dtype=dtype)
    pivot = next(i for i, g in enumerate(gamma) if g > 0)
    if degree == 1:
        return np.asarray(component(pivot, nu))

    cacheable = degree < cache.max_degree
    key = (gamma, nu)
    if cacheable:
        got = cache._store.get(key)
        if got is not None:
            cache.hits += 1
            return got
        cache.misses += 1

    rest = list(gamma)
    rest[pivot] -= 1
    rest = tuple(rest)
    out = np.zeros(length, dtype=dtype)
    for a in range(degree - 1, nu):
        out += assemble_H(rest, a, component, length, cache, dtype) * np.asarray(
            component(pivot, nu - a)
        )
    if cacheable:
        cache._store[key] = out
    return out


def compose_field(fld: PolynomialField, component, nu, length, cache, dtype=float):
    """Order-nu grid of fld evaluated along the expansion, shape (out_dim, length).

    No sign convention applied; callers add their own. Terms are visited
    in the field's stored (graded lexicographic) order, so the floating
    point result is deterministic.
    """
    out = np.zeros((fld.out_dim, length), dtype=dtype)
    for exponents, coeff in fld.terms:
        H = assemble_H(exponents, nu, component, length, cache, dtype)
        out += np.asarray(coeff)[:, None] * H[None, :]
    return out


def assemble_phi(
    system: MechanicalSystem,
    tensor: CoefficientTensor,
    nu: int,
    forcing_grid=None,
    cache: CompositionCache | None = None,
):
    """Inhomogeneity grid Phi_nu for a mechanical system, shape (2n, T).

    Order 1 is the normalized forcing itself: forcing_grid must be the
    (T, n) sample array with unit sup row norm, and the result is its
    transpose stacked over a zero lower block. For nu >= 2 the top block
    is minus the order-nu composition of the internal force field (the
    field enters the balance on the left-hand side), the lower block is
    identically zero, and orders 1..nu-1 of the tensor must be filled.
    """
    n = system.n
    if tensor.state_dim != 2 * n:
        raise DimensionMismatch(
            f"tensor state dim {tensor.state_dim} != system state dim {2 * n}"
        )
    T = tensor.length
    if nu == 1:
        if forcing_grid is None:
            raise DimensionMismatch("order 1 needs the forcing grid")
        g = np.asarray(forcing_grid, dtype=float)
        if g.shape != (T, n):
            raise GridMismatch(f"forcing grid shape {g.shape} != ({T}, {n})")
        out = np.zeros((2 * n, T))
        out[:n] = g.T
        return out
    if nu < 1:
        raise OrderUnavailable(f"order must be >= 1, got {nu}")
    if tensor.orders_complete < nu - 1:
        raise OrderUnavailable(
            f"order {nu} needs orders 1..{nu - 1}; tensor holds "
            f"{tensor.orders_complete}"
        )
    fld = system.nonlinearity
    if fld.n_terms == 0:
        return np.zeros((2 * n, T))
    if cache is None:
        cache = CompositionCache(max_degree=fld.max_degree)
    out = np.zeros((2 * n, T))
    out[:n] = -compose_field(fld, tensor.component, nu, T, cache)
    return out
