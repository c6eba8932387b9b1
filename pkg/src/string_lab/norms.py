"""Weighted Sobolev norms adapted to the degenerate free end.

The scale X^m carries weights s^j on the derivatives above order m/2, so
fields that are merely smooth in the interior but degenerate like the tension
at s = 0 still have finite norms.  All quadrature is composite trapezoid on
the grid nodes; the weights vanish at the degenerate node, so no singular
quadrature is needed.

Conventions: a field may be scalar (n,) or vector-valued (n, 3); vector norms
sum component squares.  Supported orders are m = 0..6.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, DiffOps

MAX_ORDER = 6


def _as_field(u, grid: Grid) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[0] != grid.n_nodes:
        raise ValueError(f"field length {u.shape[0]} does not match grid")
    return u


def _sq(f: np.ndarray) -> np.ndarray:
    """Pointwise squared magnitude, scalar or vector field."""
    return f * f if f.ndim == 1 else np.einsum("ic,ic->i", f, f)


def weighted_l2_sq(u, alpha: float, grid: Grid) -> float:
    """Squared weighted norm ||s^alpha u||_{L2}^2 by trapezoid."""
    u = _as_field(u, grid)
    w = grid.nodes ** alpha if alpha != 0.0 else 1.0
    return grid.trapz(_sq(u) * (w * w if alpha != 0.0 else 1.0))


def l2_norm(u, grid: Grid) -> float:
    return float(np.sqrt(weighted_l2_sq(u, 0.0, grid)))


def _check_order(m: int, grid: Grid) -> None:
    if not 0 <= m <= MAX_ORDER:
        raise ValueError(f"norm order must be in 0..{MAX_ORDER}, got {m}")
    if grid.n_cells < 4 * m:
        raise ValueError(f"grid too coarse for order {m}: need n_cells >= {4 * m}")


def xm_norm(u, m: int, grid: Grid, ops: DiffOps | None = None) -> float:
    """Weighted Sobolev norm ||u||_{X^m}.

    For m = 2k the square is ||u||_{H^k}^2 + sum_{j=1}^{k} ||s^j d^{k+j}u||^2,
    for m = 2k+1 it is ||u||_{H^k}^2 + sum_{j=1}^{k+1} ||s^{j-1/2} d^{k+j}u||^2.
    """
    _check_order(m, grid)
    u = _as_field(u, grid)
    ops = ops or DiffOps(grid)
    k = m // 2
    derivs = [u]
    for i in range(1, m + 1):
        derivs.append(ops.dn(u, i))
    total = sum(weighted_l2_sq(derivs[i], 0.0, grid) for i in range(k + 1))
    if m == 2 * k:
        for j in range(1, k + 1):
            total += weighted_l2_sq(derivs[k + j], float(j), grid)
    else:
        for j in range(1, k + 2):
            total += weighted_l2_sq(derivs[k + j], j - 0.5, grid)
    return float(np.sqrt(total))


def ym_norm(u, m: int, grid: Grid, ops: DiffOps | None = None) -> float:
    """Norm ||u||_{Y^m}, defined through ||U||_{X^{m+1}}^2 = ||U||_{L2}^2 + ||u||_{Y^m}^2
    for the antiderivative U(s) = -int_s^1 u vanishing at the fixed end."""
    _check_order(m + 1, grid)
    u = _as_field(u, grid)
    big_u = grid.integrate_from_fixed_end(u)
    total = xm_norm(big_u, m + 1, grid, ops) ** 2 - weighted_l2_sq(big_u, 0.0, grid)
    return float(np.sqrt(max(total, 0.0)))


def _linf(f: np.ndarray) -> float:
    return float(np.max(np.sqrt(_sq(f))))


def xeps_norm(u, k: int, eps: float, grid: Grid, ops: DiffOps | None = None) -> float:
    """Low-regularity norm ||u||_{X^k_eps} for k = 1, 2, 3 (discrete sup for L^inf)."""
    if k not in (1, 2, 3):
        raise ValueError(f"xeps order must be 1, 2, or 3, got {k}")
    u = _as_field(u, grid)
    ops = ops or DiffOps(grid)
    s = grid.nodes

    def wsup(f, alpha):
        w = s ** alpha
        return float(np.max(w * np.sqrt(_sq(f))))

    if k == 1:
        total = wsup(u, eps) ** 2 + weighted_l2_sq(ops.d1(u), 0.5 + eps, grid)
    elif k == 2:
        total = (_linf(u) ** 2
                 + weighted_l2_sq(ops.d1(u), eps, grid)
                 + weighted_l2_sq(ops.d2(u), 1.0 + eps, grid))
    else:
        total = (_linf(u) ** 2
                 + wsup(ops.d1(u), eps) ** 2
                 + weighted_l2_sq(ops.d2(u), 0.5 + eps, grid)
                 + weighted_l2_sq(ops.dn(u, 3), 1.5 + eps, grid))
    return float(np.sqrt(total))


def averaging(u, grid: Grid) -> np.ndarray:
    """Averaging operator (M u)(s) = (1/s) int_0^s u; limit value u(0) at s = 0."""
    u = _as_field(u, grid)
    cum = grid.cumint(u)
    out = np.empty_like(cum)
    s = grid.nodes if u.ndim == 1 else grid.nodes[:, None]
    out[1:] = cum[1:] / s[1:]
    out[0] = u[0]
    return out


# Cartesian derivatives of the disc lift w(x, y) = u(x^2 + y^2), expressed as
# coefficient(x, y) * u^(j)(s) with s = x^2 + y^2.  Keys are multi-indices.
_DISC_TERMS = {
    0: {(0, 0): [(0, lambda x, y: 1.0)]},
    1: {
        (1, 0): [(1, lambda x, y: 2 * x)],
        (0, 1): [(1, lambda x, y: 2 * y)],
    },
    2: {
        (2, 0): [(1, lambda x, y: 2.0 + 0 * x), (2, lambda x, y: 4 * x * x)],
        (1, 1): [(2, lambda x, y: 4 * x * y)],
        (0, 2): [(1, lambda x, y: 2.0 + 0 * x), (2, lambda x, y: 4 * y * y)],
    },
    3: {
        (3, 0): [(2, lambda x, y: 12 * x), (3, lambda x, y: 8 * x ** 3)],
        (2, 1): [(2, lambda x, y: 4 * y), (3, lambda x, y: 8 * x * x * y)],
        (1, 2): [(2, lambda x, y: 4 * x), (3, lambda x, y: 8 * x * y * y)],
        (0, 3): [(2, lambda x, y: 12 * y), (3, lambda x, y: 8 * y ** 3)],
    },
}


def disc_lift_norm(u, m: int, grid: Grid, ops: DiffOps | None = None,
                   n_theta: int = 64) -> float:
    """H^m norm on the unit disc of the lift u#(x1, x2) = u(x1^2 + x2^2).

    Tensor quadrature: the radial integral uses the substitution s = r^2
    (so the s-grid nodes are reused directly), the angular integral is the
    periodic trapezoid rule, exact for the trigonometric polynomials that
    appear for m <= 3.
    """
    if not 0 <= m <= 3:
        raise ValueError(f"disc lift supports m <= 3, got {m}")
    u = _as_field(u, grid)
    ops = ops or DiffOps(grid)
    comps = [u] if u.ndim == 1 else [u[:, c] for c in range(u.shape[1])]
    theta = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    root_s = np.sqrt(grid.nodes)
    x = root_s[:, None] * np.cos(theta)[None, :]
    y = root_s[:, None] * np.sin(theta)[None, :]
    total = 0.0
    for comp in comps:
        dus = [ops.dn(comp, j) if j else comp for j in range(4)]
        for order in range(m + 1):
            for terms in _DISC_TERMS[order].values():
                val = np.zeros_like(x)
                for j, coeff in terms:
                    val += coeff(x, y) * dus[j][:, None]
                # dA = r dr dtheta = (1/2) ds dtheta
                radial = np.trapezoid(val * val, dx=grid.h, axis=0)
                total += 0.5 * np.sum(radial) * (2 * np.pi / n_theta)
    return float(np.sqrt(total))


@dataclass
class NormReport:
    """Bundle of norm evaluations for one field, serializable to JSON."""

    xm: dict = field(default_factory=dict)
    ym: dict = field(default_factory=dict)
    xeps: dict = field(default_factory=dict)
    l2: float = 0.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "xm": {str(k): v for k, v in self.xm.items()},
                "ym": {str(k): v for k, v in self.ym.items()},
                "xeps": {f"{k}:{e}": v for (k, e), v in self.xeps.items()},
                "l2": self.l2,
            },
            indent=2,
        )


def norm_report(u, grid: Grid, orders=(0, 1, 2, 3, 4), y_orders=(0, 1, 2),
                eps_cases=((1, 0.25), (2, 0.25), (3, 0.25)),
                ops: DiffOps | None = None) -> NormReport:
    ops = ops or DiffOps(grid)
    rep = NormReport(l2=l2_norm(u, grid))
    for m in orders:
        if grid.n_cells >= 4 * m:
            rep.xm[m] = xm_norm(u, m, grid, ops)
    for m in y_orders:
        if grid.n_cells >= 4 * (m + 1):
            rep.ym[m] = ym_norm(u, m, grid, ops)
    for k, eps in eps_cases:
        rep.xeps[(k, eps)] = xeps_norm(u, k, eps, grid, ops)
    return rep
