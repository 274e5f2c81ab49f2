"""Monotone rational-quadratic spline transforms.

The spline acts on [-bound, bound] and is the identity outside. It is
parameterized by unnormalized bin widths, heights and interior knot
slopes; normalization (softmax for widths/heights, softplus for slopes)
guarantees monotonicity. Boundary knot slopes are fixed to 1 so the map
is C1 across the interval edges. With all unnormalized inputs at zero
the transform is the identity, which is how coupling blocks start out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, concat

MIN_BIN_FRACTION = 1e-3   # relative floor for bin widths and heights
MIN_DERIVATIVE = 1e-3
# softplus(x + _SHIFT) + MIN_DERIVATIVE == 1 at x == 0, giving identity at init
_SHIFT = float(np.log(np.expm1(1.0 - MIN_DERIVATIVE)))


@dataclass
class RqSplineParams:
    """Unnormalized spline parameters, one K-vector set per transformed value.

    The arrays may be a single parameter set (shape ``(K,)`` etc.) applied
    to every input element, or one set per element with leading dimensions
    matching the input.
    """

    bin_count: int
    bound: float
    unnormalized_widths: Tensor
    unnormalized_heights: Tensor
    unnormalized_derivatives: Tensor

    def __post_init__(self):
        if self.bin_count < 1:
            raise ValueError(f"bin_count must be positive, got {self.bin_count}")
        if self.bound <= 0:
            raise ValueError(f"bound must be positive, got {self.bound}")
        self.unnormalized_widths = _as_tensor(self.unnormalized_widths)
        self.unnormalized_heights = _as_tensor(self.unnormalized_heights)
        self.unnormalized_derivatives = _as_tensor(self.unnormalized_derivatives)
        k = self.bin_count
        if self.unnormalized_widths.shape[-1] != k:
            raise ValueError(f"expected {k} unnormalized widths, "
                             f"got {self.unnormalized_widths.shape[-1]}")
        if self.unnormalized_heights.shape[-1] != k:
            raise ValueError(f"expected {k} unnormalized heights, "
                             f"got {self.unnormalized_heights.shape[-1]}")
        if self.unnormalized_derivatives.shape[-1] != k - 1:
            raise ValueError(f"expected {k - 1} interior derivatives, "
                             f"got {self.unnormalized_derivatives.shape[-1]}")


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _cumsum_last(x: Tensor) -> Tensor:
    # cumulative sum along the last axis as a matmul with upper-triangular ones
    k = x.shape[-1]
    tri = Tensor(np.triu(np.ones((k, k))))
    flat = x.reshape(-1, k)
    return flat.matmul(tri).reshape(x.shape)


def _normalize(params: RqSplineParams, n: int):
    """Expand parameters to one row per input element.

    Returns Tensors (knots_x, knots_y, widths, heights, derivs) with shapes
    (n, K+1), (n, K+1), (n, K), (n, K), (n, K+1). Derivatives include the
    fixed boundary slopes of 1.
    """
    k, b = params.bin_count, params.bound
    uw = params.unnormalized_widths.reshape(-1, k)
    uh = params.unnormalized_heights.reshape(-1, k)
    ud = params.unnormalized_derivatives.reshape(-1, k - 1)
    for label, t in (("widths", uw), ("heights", uh), ("derivatives", ud)):
        if not np.all(np.isfinite(t.data)):
            raise ValueError(f"non-finite unnormalized {label} in spline parameters")
    if uw.shape[0] == 1 and n > 1:
        uw = uw.broadcast_to((n, k))
        uh = uh.broadcast_to((n, k))
        ud = ud.broadcast_to((n, k - 1))
    elif uw.shape[0] != n:
        raise ValueError(
            f"got {uw.shape[0]} spline parameter sets for {n} input elements"
        )

    span = 2.0 * b
    rel_w = uw.softmax(axis=-1) * (1.0 - MIN_BIN_FRACTION * k) + MIN_BIN_FRACTION
    rel_h = uh.softmax(axis=-1) * (1.0 - MIN_BIN_FRACTION * k) + MIN_BIN_FRACTION
    widths = rel_w * span
    heights = rel_h * span
    left = Tensor(np.full((n, 1), -b))
    knots_x = concat([left, _cumsum_last(widths) - b], axis=-1)
    knots_y = concat([left, _cumsum_last(heights) - b], axis=-1)
    ones = Tensor(np.ones((n, 1)))
    interior = (ud + _SHIFT).softplus() + MIN_DERIVATIVE
    derivs = concat([ones, interior, ones], axis=-1)
    return knots_x, knots_y, widths, heights, derivs


def _locate_bins(values: np.ndarray, knots: np.ndarray, k: int) -> np.ndarray:
    # index of the bin containing each value; the final knot is excluded so
    # the right edge maps into the last bin
    idx = np.sum(values[:, None] >= knots[:, :-1], axis=1) - 1
    return np.clip(idx, 0, k - 1)


def _gather(values: Tensor, onehot: np.ndarray) -> Tensor:
    return (values * Tensor(onehot)).sum(axis=-1)


def rq_spline_forward(x, params: RqSplineParams):
    """Apply the spline elementwise; returns (y, log_det).

    `log_det` is the sum of log|dy/dx| over the last axis of `x` (over all
    elements when `x` is a vector). Out-of-interval elements pass through
    unchanged and contribute zero.
    """
    x = _as_tensor(x)
    shape = x.shape
    n = x.size
    k, b = params.bin_count, params.bound
    flat = x.reshape(n) if shape else x.reshape(1)
    knots_x, knots_y, widths, heights, derivs = _normalize(params, n)

    inside = (np.abs(flat.data) <= b).astype(np.float64)
    mask = Tensor(inside)
    x_safe = flat * mask  # clamp outside elements to 0 so the formula stays finite

    idx = _locate_bins(x_safe.data, knots_x.data, k)
    onehot = np.eye(k)[idx]
    xk = _gather(knots_x[:, :-1], onehot)
    yk = _gather(knots_y[:, :-1], onehot)
    wk = _gather(widths, onehot)
    hk = _gather(heights, onehot)
    d0 = _gather(derivs[:, :-1], onehot)
    d1 = _gather(derivs[:, 1:], onehot)

    s = hk / wk
    xi = (x_safe - xk) / wk
    xi1m = xi * (1.0 - xi)
    den = s + (d0 + d1 - 2.0 * s) * xi1m
    y_spline = yk + hk * (s * xi.square() + d0 * xi1m) / den
    deriv_num = s.square() * (d1 * xi.square() + 2.0 * s * xi1m + d0 * (1.0 - xi).square())
    log_deriv = (deriv_num.log() - 2.0 * den.log()) * mask

    y = y_spline * mask + flat * Tensor(1.0 - inside)
    y = y.reshape(shape)
    if len(shape) <= 1:
        log_det = log_deriv.sum()
    else:
        log_det = log_deriv.reshape(shape).sum(axis=-1)
    return y, log_det


def rq_spline_inverse(y, params: RqSplineParams):
    """Exact inverse of :func:`rq_spline_forward` (numpy in, numpy out).

    Solves the per-bin quadratic analytically. Returns (x, log_det) with
    ``log_det`` equal to minus the forward log-determinant at x.
    """
    y = np.asarray(y, dtype=np.float64)
    shape = y.shape
    n = y.size
    k, b = params.bin_count, params.bound
    flat = y.reshape(n) if shape else y.reshape(1)
    knots_x, knots_y, widths, heights, derivs = _normalize(params, n)
    kx, ky = knots_x.data, knots_y.data
    w, h, d = widths.data, heights.data, derivs.data

    inside = np.abs(flat) <= b
    y_safe = np.where(inside, flat, 0.0)
    idx = _locate_bins(y_safe, ky, k)
    rows = np.arange(n)
    xk, yk = kx[rows, idx], ky[rows, idx]
    wk, hk = w[rows, idx], h[rows, idx]
    d0, d1 = d[rows, idx], d[rows, idx + 1]

    s = hk / wk
    dy = y_safe - yk
    q = d0 + d1 - 2.0 * s
    a = hk * (s - d0) + dy * q
    bb = hk * d0 - dy * q
    c = -s * dy
    disc = np.maximum(bb * bb - 4.0 * a * c, 0.0)  # >= 0 for monotone params
    xi = 2.0 * c / (-bb - np.sqrt(disc))
    # one Newton polish pass sharpens the root to machine precision, which
    # keeps the inverse log-determinant the exact negative of the forward one
    for _ in range(2):
        xi1m = xi * (1.0 - xi)
        den = s + q * xi1m
        y_val = yk + hk * (s * xi * xi + d0 * xi1m) / den
        deriv = (s * s * (d1 * xi * xi + 2.0 * s * xi1m + d0 * (1.0 - xi) ** 2)
                 / (den * den))
        xi = np.clip(xi - (y_val - y_safe) / (deriv * wk), 0.0, 1.0)
    x = np.where(inside, xk + xi * wk, flat)

    xi1m = xi * (1.0 - xi)
    den = s + q * xi1m
    deriv_num = s * s * (d1 * xi * xi + 2.0 * s * xi1m + d0 * (1.0 - xi) ** 2)
    log_deriv = np.where(inside, np.log(deriv_num) - 2.0 * np.log(den), 0.0)

    x = x.reshape(shape)
    if len(shape) <= 1:
        log_det = -np.sum(log_deriv)
    else:
        log_det = -log_deriv.reshape(shape).sum(axis=-1)
    return x, log_det
