"""Second-degree local polynomial (LOESS) smoothing with analytic derivatives.

Each evaluation point gets its own weighted quadratic fit in the centred
variable ``u = (t_i - t) / h``.  The fitted value is the local intercept;
derivatives are those of the fitted curve itself, i.e. the local slope and
curvature plus the contribution of the kernel weights moving with ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["SmoothedCurve", "loess_fit", "loess_eval", "DEFAULT_SPAN"]

DEFAULT_SPAN = 0.5

# Relative enlargement of the k-th neighbour distance so that all k
# neighbours carry positive tricube weight.
_BANDWIDTH_INFLATION = 1.01
_RCOND = 1e-10


def _tricube(u: np.ndarray) -> np.ndarray:
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1.0 - u**3) ** 3


@dataclass(frozen=True)
class SmoothedCurve:
    """A fitted LOESS curve, immutable after :func:`loess_fit`.

    Attributes
    ----------
    t, y : ndarray
        Source sample times (strictly increasing) and values.
    span : float
        Fraction of points in each local window.
    kernel : str
        Weight function identifier; only ``"tricube"`` is supported.
    """

    t: np.ndarray
    y: np.ndarray
    span: float = DEFAULT_SPAN
    kernel: str = "tricube"
    n_neighbors: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n_neighbors", math.ceil(self.span * len(self.t)))

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])

    def derivatives(self, at) -> np.ndarray:
        """Return an ``(m, 3)`` array of (value, first, second derivative)."""
        at = np.atleast_1d(np.asarray(at, dtype=float))
        lo, hi = self.domain
        if np.any(at < lo) or np.any(at > hi) or np.any(~np.isfinite(at)):
            raise ValueError(f"evaluation time outside curve domain [{lo}, {hi}]")
        return _local_fits(self.t, self.y, at, self.n_neighbors)

    def __call__(self, at, order: int = 0):
        return loess_eval(self, at, order)


def loess_fit(t, y, span: float = DEFAULT_SPAN) -> SmoothedCurve:
    """Fit a degree-2 LOESS curve to ``(t, y)`` samples.

    Raises
    ------
    ValueError
        If there are fewer than 3 points, the times are not strictly
        increasing, or ``span`` leaves fewer than 3 points per window.
    """
    t = np.array(t, dtype=float)
    y = np.array(y, dtype=float)
    if t.ndim != 1 or t.shape != y.shape:
        raise ValueError("t and y must be 1-d arrays of equal length")
    if len(t) < 3:
        raise ValueError(f"loess needs at least 3 points, got {len(t)}")
    if not np.all(np.isfinite(t)) or not np.all(np.isfinite(y)):
        raise ValueError("non-finite sample")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if not 0.0 < span <= 1.0:
        raise ValueError(f"span must lie in (0, 1], got {span}")
    if math.ceil(span * len(t)) < 3:
        raise ValueError(
            f"span {span} gives fewer than 3 points per window for n={len(t)}"
        )
    t.flags.writeable = False
    y.flags.writeable = False
    return SmoothedCurve(t, y, span)


def loess_eval(curve: SmoothedCurve, t, order: int = 0):
    """Evaluate the fitted value (order 0) or its 1st/2nd derivative.

    Returns a float for scalar ``t`` and an array otherwise.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    out = curve.derivatives(t)[:, order]
    return float(out[0]) if np.ndim(t) == 0 else out


def _tricube_derivs(u: np.ndarray):
    a = np.abs(u)
    inside = a < 1.0
    c = np.where(inside, 1.0 - a**3, 0.0)
    d1 = -9.0 * u * a * c**2
    d2 = -18.0 * a * c**2 + 54.0 * u**4 * c
    return np.where(inside, d1, 0.0), np.where(inside, d2, 0.0)


def _local_fits(ts: np.ndarray, ys: np.ndarray, at: np.ndarray, k: int) -> np.ndarray:
    """Value and exact first/second derivatives of the LOESS curve at ``at``.

    The local coefficients ``g`` solve ``A g = b`` in the basis
    ``(1, s/h, s^2/h^2)`` with ``s = t_i - t``.  Because the weights move
    with ``t``, the curve's derivatives add the terms ``g'`` and ``g''``
    obtained by differentiating ``A g = b``; they vanish for exact
    quadratic data.
    """
    dist = np.abs(ts[None, :] - at[:, None])
    kth = np.argpartition(dist, k - 1, axis=1)[:, k - 1]
    h = dist[np.arange(len(at)), kth] * _BANDWIDTH_INFLATION
    dh = _BANDWIDTH_INFLATION * np.sign(at - ts[kth])
    # A tie between the k-th distance and a neighbour on the other side is a
    # kink of h(t); take the symmetric derivative there (h' = 0 on average).
    idx = [k - 2, k - 1] + ([k] if k < len(ts) else [])
    part = np.partition(dist, idx, axis=1)
    dk = part[:, k - 1]
    tol = 1e-9 * np.maximum(dk, 1.0)
    tied = np.abs(part[:, k - 2] - dk) <= tol
    if k < len(ts):
        tied |= np.abs(part[:, k] - dk) <= tol
    dh[tied] = 0.0
    u = (ts[None, :] - at[:, None]) / h[:, None]
    w = _tricube(u)
    du = -(1.0 + u * dh[:, None]) / h[:, None]
    ddu = -2.0 * du * (dh / h)[:, None]
    t1, t2 = _tricube_derivs(u)
    dw = t1 * du
    ddw = t2 * du**2 + t1 * ddu

    basis = np.stack([np.ones_like(u), u, u * u], axis=-1)  # (m, n, 3)
    xtwx = np.einsum("mni,mn,mnj->mij", basis, w, basis)
    xtwy = np.einsum("mni,mn,n->mi", basis, w, ys)

    out = np.zeros((len(at), 3))
    sv = np.linalg.svd(xtwx, compute_uv=False)
    ok = sv[:, -1] > _RCOND * sv[:, 0]
    if np.any(ok):
        out[ok] = _curve_derivs(xtwx[ok], basis[ok], w[ok], dw[ok], ddw[ok], ys, h[ok], 3)
    for i in np.flatnonzero(~ok):
        p = _usable_order(xtwx[i])
        sl = (slice(i, i + 1), slice(None), slice(0, p))
        out[i] = _curve_derivs(
            xtwx[i : i + 1, :p, :p], basis[sl], w[i : i + 1], dw[i : i + 1], ddw[i : i + 1], ys, h[i : i + 1], p
        )[0]
    return out


def _curve_derivs(A, basis, w, dw, ddw, ys, h, p) -> np.ndarray:
    b = np.einsum("mni,mn,n->mi", basis, w, ys)
    g = np.linalg.solve(A, b[..., None])[..., 0]
    r = ys[None, :] - np.einsum("mni,mi->mn", basis, g)
    dg = np.linalg.solve(A, np.einsum("mni,mn->mi", basis, dw * r)[..., None])[..., 0]
    fitted_dg = np.einsum("mni,mi->mn", basis, dg)
    rhs = np.einsum("mni,mn->mi", basis, ddw * r - 2.0 * dw * fitted_dg)
    ddg = np.linalg.solve(A, rhs[..., None])[..., 0]
    g = np.pad(g, ((0, 0), (0, 3 - p)))
    dg = np.pad(dg, ((0, 0), (0, 3 - p)))
    return np.column_stack(
        [g[:, 0], g[:, 1] / h + dg[:, 0], 2.0 * g[:, 2] / h**2 + 2.0 * dg[:, 1] / h + ddg[:, 0]]
    )


def _usable_order(xtwx: np.ndarray) -> int:
    # Drop to degree 1, then 0, when the local normal equations are singular.
    for p in (2, 1):
        s = np.linalg.svd(xtwx[:p, :p], compute_uv=False)
        if s[0] > 0 and s[-1] > _RCOND * s[0]:
            return p
    raise np.linalg.LinAlgError("degenerate loess window: all weights zero")
