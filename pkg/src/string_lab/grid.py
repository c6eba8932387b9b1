"""Uniform arc-length grid, string states, and finite-difference operators.

Node 0 sits at the free end s = 0, node ``n_cells`` at the fixed end s = 1.
All spatial derivatives used elsewhere in the package go through
:class:`DiffOps` so the stencil order is chosen in exactly one place.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

MIN_CELLS = 8


def _solve_fraction(rows, rhs):
    """Gaussian elimination over the rationals (tiny Vandermonde systems)."""
    n = len(rhs)
    a = [list(r) + [rhs[i]] for i, r in enumerate(rows)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        pv = a[col][col]
        a[col] = [v / pv for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [vr - f * vc for vr, vc in zip(a[r], a[col])]
    return [a[r][n] for r in range(n)]


def fd_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at ``z`` on nodes ``x``.

    Fornberg's recursion; exact for polynomials of degree ``len(x) - 1``.
    Returns the weight vector ``w`` with ``f^(m)(z) ~= w @ f(x)``.
    """
    n = len(x)
    if m >= n:
        raise ValueError(f"need at least {m + 1} nodes for derivative {m}")
    c = np.zeros((n, m + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - z
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, 1] with ``n_cells + 1`` nodes."""

    n_cells: int
    nodes: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    def trapz(self, f: np.ndarray) -> float:
        """Composite trapezoid of a nodal field over [0, 1]."""
        return float(np.trapezoid(f, dx=self.h))

    def cumint(self, f: np.ndarray) -> np.ndarray:
        """Cumulative trapezoid F(s) = int_0^s f, F(0) = 0."""
        out = np.zeros_like(f)
        inc = 0.5 * self.h * (f[1:] + f[:-1])
        np.cumsum(inc, axis=0, out=out[1:])
        return out

    def integrate_from_fixed_end(self, u: np.ndarray) -> np.ndarray:
        """Antiderivative x(s) = -int_s^1 u vanishing at the fixed end s = 1."""
        cum = self.cumint(u)
        return cum - cum[-1]


def make_grid(n_cells: int) -> Grid:
    if n_cells < MIN_CELLS:
        raise ValueError(f"n_cells must be >= {MIN_CELLS}, got {n_cells}")
    nodes = np.linspace(0.0, 1.0, n_cells + 1)
    return Grid(n_cells=int(n_cells), nodes=nodes)


class DiffOps:
    """Finite-difference derivative operators of a declared order (2 or 4).

    Interior nodes use centered stencils, both ends use one-sided stencils of
    the same accuracy so boundary traces converge at full order.  ``dn``
    extends the same construction to higher derivatives (single wide stencil
    per node, never iterated, so truncation errors stay smooth in s).
    """

    def __init__(self, grid: Grid, order: int = 2):
        if order not in (2, 4):
            raise ValueError("differentiation order must be 2 or 4")
        self.grid = grid
        self.order = order
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _stencils(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-node index windows and weights for the k-th derivative.

        One-sided closures carry one extra point, spent on matching the
        leading truncation coefficient of the interior stencil, so the
        truncation error stays a smooth function of s across the ends instead
        of jumping there (iterated derivatives would amplify such a jump).
        Weights are solved in exact rational arithmetic.
        """
        if k in self._cache:
            return self._cache[k]
        n = self.grid.n_nodes
        h = self.grid.h
        # interior window: symmetric, smallest odd width giving the declared order
        p_int = k + self.order - 1
        if p_int % 2 == 0:
            p_int += 1
        q = p_int - k
        if q % 2 == 1:
            q += 1  # symmetry bonus of centered stencils
        p = k + q + 3  # one-sided width: 3 matched truncation moments
        if n < p:
            raise ValueError(f"grid too coarse for derivative {k} at order {self.order}")
        half = p_int // 2

        def exact_weights(offsets, mom):
            rows = [[Fraction(int(o)) ** d for o in offsets] for d in range(len(offsets))]
            return np.array([float(w) for w in _solve_fraction(rows, mom)])

        cent_mom = [Fraction(0)] * p_int
        cent_mom[k] = Fraction(math.factorial(k))
        cent_off = list(range(-half, half + 1))
        centered_frac = _solve_fraction(
            [[Fraction(o) ** d for o in cent_off] for d in range(p_int)], cent_mom)
        centered = np.array([float(w) for w in centered_frac])

        def cent_moment(d):
            return sum(w * Fraction(o) ** d for w, o in zip(centered_frac, cent_off))

        idx = np.empty((n, p), dtype=np.intp)
        wts = np.empty((n, p))
        for i in range(n):
            if half <= i <= n - 1 - half:
                lo = i - half
                idx[i, :p_int] = np.arange(lo, lo + p_int)
                wts[i, :p_int] = centered / h ** k
                idx[i, p_int:] = i
                wts[i, p_int:] = 0.0
            else:
                lo = min(max(i - half, 0), n - p)
                offsets = [j - i for j in range(lo, lo + p)]
                mom = [Fraction(0)] * p
                mom[k] = Fraction(math.factorial(k))
                for d in range(k + q, p):
                    mom[d] = cent_moment(d)
                idx[i] = np.arange(lo, lo + p)
                wts[i] = exact_weights(offsets, mom) / h ** k
        self._cache[k] = (idx, wts)
        return idx, wts

    def dn(self, f: np.ndarray, k: int) -> np.ndarray:
        """k-th s-derivative of a nodal field (scalar or per-node vectors)."""
        if k == 0:
            return np.array(f, dtype=float, copy=True)
        f = np.asarray(f, dtype=float)
        if len(f) != self.grid.n_nodes:
            raise ValueError(
                f"field length {len(f)} does not match grid ({self.grid.n_nodes} nodes)"
            )
        idx, wts = self._stencils(k)
        if f.ndim == 1:
            return np.einsum("ip,ip->i", wts, f[idx])
        return np.einsum("ip,ipc->ic", wts, f[idx])

    def d1(self, f: np.ndarray) -> np.ndarray:
        return self.dn(f, 1)

    def d2(self, f: np.ndarray) -> np.ndarray:
        return self.dn(f, 2)

    def deriv_at_fixed_end(self, f: np.ndarray, k: int, width: int | None = None) -> float:
        """One-sided k-th derivative trace at s = 1 with a stencil of ``width`` nodes."""
        f = np.asarray(f, dtype=float)
        p = width if width is not None else k + self.order
        p = min(p, len(f))
        xs = self.grid.nodes[-p:]
        w = fd_weights(1.0, xs, k)
        return float(w @ f[-p:])


def d1(f: np.ndarray, grid: Grid, ops: DiffOps | None = None) -> np.ndarray:
    """First derivative on the grid (module-level convenience wrapper)."""
    return (ops or DiffOps(grid)).d1(f)


def d2(f: np.ndarray, grid: Grid, ops: DiffOps | None = None) -> np.ndarray:
    """Second derivative on the grid."""
    return (ops or DiffOps(grid)).d2(f)


@dataclass
class StringState:
    """Positions and velocities of the string at one instant.

    ``x`` and ``v`` are (n_nodes, 3) arrays.  The fixed end carries x(1) = 0;
    the constraint |x'| = 1 is monitored (or enforced) by the dynamics layer,
    not assumed here.
    """

    x: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def copy(self) -> "StringState":
        return StringState(self.x.copy(), self.v.copy(), self.t)

    def validate(self, grid: Grid, constraint_tol: float | None = None,
                 ops: DiffOps | None = None) -> None:
        n = grid.n_nodes
        if self.x.shape != (n, 3) or self.v.shape != (n, 3):
            raise ValueError(f"state arrays must have shape ({n}, 3)")
        if not np.allclose(self.x[-1], 0.0, atol=1e-12):
            raise ValueError("fixed end violated: x(1) != 0")
        if constraint_tol is not None:
            drift = constraint_drift(self, grid, ops)
            if drift > constraint_tol:
                raise ValueError(
                    f"inextensibility violated: max ||x'|-1| = {drift:.3e} > {constraint_tol:.3e}"
                )

    def write_csv(self, path) -> None:
        grid_s = np.linspace(0.0, 1.0, len(self.x))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "x1", "x2", "x3", "v1", "v2", "v3"])
            for i, s in enumerate(grid_s):
                w.writerow([f"{val:.17g}" for val in
                            (s, *self.x[i], *self.v[i])])

    @classmethod
    def read_csv(cls, path, t: float = 0.0) -> "StringState":
        data = np.genfromtxt(path, delimiter=",", names=True)
        cols = ("x1", "x2", "x3", "v1", "v2", "v3")
        missing = [c for c in cols if c not in (data.dtype.names or ())]
        if missing:
            raise ValueError(f"state CSV missing columns: {missing}")
        x = np.column_stack([data["x1"], data["x2"], data["x3"]])
        v = np.column_stack([data["v1"], data["v2"], data["v3"]])
        return cls(x=x, v=v, t=t)


def constraint_drift(state: StringState, grid: Grid, ops: DiffOps | None = None) -> float:
    """max over nodes of | |x'(s_i)| - 1 |, the discrete inextensibility defect."""
    ops = ops or DiffOps(grid)
    xp = ops.d1(state.x)
    return float(np.max(np.abs(np.linalg.norm(xp, axis=1) - 1.0)))
