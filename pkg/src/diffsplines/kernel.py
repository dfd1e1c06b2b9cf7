"""Reproducing kernel of the clamped second-order space on [0, 1].

The metric is the L2 product of second derivatives on functions vanishing
together with their first derivative at both endpoints.  Its kernel is the
Green's function of the clamped fourth-order problem and has a piecewise
cubic closed form: subtract from the base kernel

    k00(s, t) = integral_0^1 (s-u)_+ (t-u)_+ du

the rank-2 correction that enforces the clamped conditions at the right
endpoint.  Collecting terms,

    k(s, t) = min(s,t)^2 max(s,t)/2 - min(s,t)^3/6
              + (-1 + (s+t)/2 - s t/3) (s t)^2.

The ``paper`` variant adds the ambient affine part ``1 + s t`` on top; it
does not vanish at the boundary (k(s, 0) = 1) and is kept for comparison
runs only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

_VARIANT_CODES = {"clamped": 0, "paper": 1, "paper_formula": 1}


@dataclass(frozen=True)
class KernelModel:
    variant: str = "clamped"

    def __post_init__(self):
        if self.variant not in _VARIANT_CODES:
            raise ValueError(f"unknown variant {self.variant!r}; "
                             f"choose from {sorted(_VARIANT_CODES)}")

    @property
    def code(self) -> int:
        return _VARIANT_CODES[self.variant]


CLAMPED = KernelModel("clamped")
PAPER = KernelModel("paper")


def kernel_eval(model: KernelModel, s, t, ds_order: int = 0):
    """Evaluate d^ds_order/ds^ds_order k(s, t); broadcasts over arrays.

    Orders 0 and 1 are continuous across s = t, order 2 has a kink there
    (the third derivative jumps by -1).
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < -1e-12) or np.any(s > 1 + 1e-12) or np.any(t < -1e-12) or np.any(t > 1 + 1e-12):
        raise ValueError("kernel arguments must lie in [0, 1]")
    val = _kernel_values(s, t, ds_order)
    if model.code == 1:
        if ds_order == 0:
            val = val + 1.0 + s * t
        elif ds_order == 1:
            val = val + t
    if val.ndim == 0:
        return float(val)
    return val


def kernel_raw(s, t, ds_order, code):
    """Unvalidated evaluation for the stepping loops; the integrators run
    their own domain checks between steps."""
    val = _kernel_values(s, t, ds_order)
    if code == 1:
        if ds_order == 0:
            val = val + 1.0 + s * t
        elif ds_order == 1:
            val = val + t
    return val


def _kernel_values(s, t, ds_order):
    C = -1.0 + 0.5 * (s + t) - s * t / 3.0
    if ds_order == 0:
        lo = np.minimum(s, t)
        hi = np.maximum(s, t)
        return lo * lo * hi * 0.5 - lo ** 3 / 6.0 + C * (s * t) ** 2
    Cs = 0.5 - t / 3.0
    if ds_order == 1:
        base = np.where(s <= t, s * t - 0.5 * s * s, 0.5 * t * t)
        return base + Cs * (s * t) ** 2 + 2.0 * C * s * t * t
    if ds_order == 2:
        base = np.where(s <= t, t - s, 0.0)
        return base + 4.0 * Cs * s * t * t + 2.0 * C * t * t
    raise ValueError("ds_order must be 0, 1 or 2")


def kernel_matrix(model: KernelModel, points) -> np.ndarray:
    """Symmetric positive semidefinite Gram matrix k(q_i, q_j)."""
    q = np.asarray(points, dtype=float)
    if np.any(q <= 0.0) or np.any(q >= 1.0):
        raise ValueError("points must lie strictly inside (0, 1)")
    return kernel_eval(model, q[:, None], q[None, :], 0)


def velocity_field(model: KernelModel, state, x, dx_order: int = 0):
    """Velocity induced by atomic momenta: v(x) = sum_j k(x, q_j) p_j.

    dx_order selects spatial derivatives of v; for the clamped variant v
    and v' vanish at both endpoints.
    """
    x = np.asarray(x, dtype=float)
    kv = kernel_eval(model, x[..., None], state.q, ds_order=dx_order)
    out = kv @ state.p
    if out.ndim == 0:
        return float(out)
    return out


def kernel_oracle_biharmonic(s: float, t: float, n: int = 2001) -> float:
    """Independent check of the closed form: finite-difference Green's function.

    Solves u'''' = delta_s with clamped conditions on an n-node grid
    (second-order stencil, ghost-point boundary rows, hat-function load)
    and returns u(t).
    """
    if n < 201:
        raise ValueError("oracle grid too coarse; need n >= 201")
    h = 1.0 / (n - 1)
    m = n - 2
    ab = np.zeros((5, m))
    main = np.full(m, 6.0)
    main[0] += 1.0
    main[-1] += 1.0
    ab[0, 2:] = 1.0
    ab[1, 1:] = -4.0
    ab[2] = main
    ab[3, :-1] = -4.0
    ab[4, :-2] = 1.0
    rhs = np.zeros(m)
    j = int(np.floor(s / h))
    theta = s / h - j
    for idx, w in ((j, (1.0 - theta) / h), (j + 1, theta / h)):
        if 1 <= idx <= n - 2:
            rhs[idx - 1] += w
    rhs *= h ** 4
    u = solve_banded((2, 2), ab, rhs)
    full = np.zeros(n)
    full[1:-1] = u
    return float(np.interp(t, np.linspace(0.0, 1.0, n), full))
