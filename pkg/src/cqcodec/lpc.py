"""Order-16 linear prediction: analysis, LSP conversion, residual and synthesis.

Sign convention: the predictor is ``s_hat[t] = sum_i a[i] * s[t - 1 - i]`` and
the inverse filter is ``A(z) = 1 - sum_i a[i] z^-(i+1)``.
"""

from dataclasses import dataclass, field

import numpy as np
import torch
from numpy.polynomial import chebyshev
from scipy import signal as sps

from . import dsp
from .validation import check_length

ORDER = 16
WHITE_NOISE_CORRECTION = 1.0001
REFLECTION_CLAMP = 0.9999
LSP_GRID = 512
LSP_TOL = 1e-10


class DegenerateFrameError(ValueError):
    """Raised when a frame carries no energy (``r[0] <= 0``)."""


class LspSearchError(ValueError):
    pass


@dataclass
class LpcCoeffs:
    a: np.ndarray
    gain_error: float = 0.0
    reflection: np.ndarray = field(default_factory=lambda: np.zeros(ORDER))
    clamped: bool = False
    degenerate: bool = False

    @classmethod
    def zeros(cls, order=ORDER, degenerate=False):
        return cls(np.zeros(order), 0.0, np.zeros(order), degenerate=degenerate)

    @property
    def inverse_filter(self):
        return np.concatenate([[1.0], -self.a])


def _coeff_array(coeffs):
    a = coeffs.a if isinstance(coeffs, LpcCoeffs) else np.asarray(coeffs, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError("LPC coefficients must be one-dimensional")
    return a


def autocorrelation(x, order=ORDER):
    """Biased autocorrelation ``r[k] = sum_t x[t] x[t+k]`` for ``k = 0..order``."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    return np.array([x[:n - k] @ x[k:] if k < n else 0.0 for k in range(order + 1)])


def levinson_durbin(r):
    """Solve the Toeplitz normal equations for the predictor coefficients.

    Returns an :class:`LpcCoeffs` whose ``gain_error`` is the final prediction
    error of the recursion. Reflection coefficients reaching magnitude one
    are clamped to ``REFLECTION_CLAMP`` and the result is flagged.
    """
    r = np.asarray(r, dtype=np.float64)
    order = r.size - 1
    if not r[0] > 0:
        raise DegenerateFrameError("degenerate frame: r[0] <= 0")
    a = np.zeros(order)
    k = np.zeros(order)
    err = r[0]
    clamped = False
    for i in range(order):
        ki = (r[i + 1] - a[:i] @ r[i:0:-1]) / err
        if abs(ki) >= 1.0:
            ki = np.sign(ki) * REFLECTION_CLAMP
            clamped = True
        prev = a[:i].copy()
        a[:i] = prev - ki * prev[::-1]
        a[i] = ki
        k[i] = ki
        err *= 1.0 - ki * ki
    return LpcCoeffs(a, float(err), k, clamped=clamped)


def lpc_analysis(frame, order=ORDER):
    """Window an analysis frame and return its LPC coefficients.

    Silent frames yield zero coefficients marked ``degenerate``.
    """
    windowed = dsp.apply_cross_frame_window(frame)
    r = autocorrelation(windowed, order)
    r[0] *= WHITE_NOISE_CORRECTION
    try:
        return levinson_durbin(r)
    except DegenerateFrameError:
        return LpcCoeffs.zeros(order, degenerate=True)


def _symmetric_factors(a):
    """Deflated sum/difference polynomials (ascending powers of z^-1)."""
    c = np.concatenate([[1.0], -a, [0.0]])
    rev = c[::-1]
    p, q = c + rev, c - rev
    n = a.size
    gp = np.zeros(n + 1)
    gq = np.zeros(n + 1)
    gp[0], gq[0] = p[0], q[0]
    for i in range(1, n + 1):
        gp[i] = p[i] - gp[i - 1]
        gq[i] = q[i] + gq[i - 1]
    return gp, gq


def _cheb_roots(g, grid):
    """Angles in (0, pi) where the symmetric polynomial ``g`` vanishes."""
    m = (g.size - 1) // 2
    cheb = np.concatenate([[g[m]], 2.0 * g[m - 1::-1]])

    def f(w):
        return chebyshev.chebval(np.cos(w), cheb)

    vals = f(grid)
    idx = np.nonzero(np.signbit(vals[:-1]) != np.signbit(vals[1:]))[0]
    lo, hi = grid[idx].copy(), grid[idx + 1].copy()
    flo = vals[idx]
    while lo.size and np.max(hi - lo) > LSP_TOL:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        left = np.signbit(fm) != np.signbit(flo)
        hi = np.where(left, mid, hi)
        lo = np.where(left, lo, mid)
        flo = np.where(left, flo, fm)
    return 0.5 * (lo + hi)


def lpc_to_lsp(coeffs):
    """Line spectral frequencies of ``A(z)``, strictly increasing in (0, pi).

    Roots are bracketed on a uniform grid and refined by bisection; the grid
    is refined once before giving up.
    """
    a = _coeff_array(coeffs)
    n = a.size
    gp, gq = _symmetric_factors(a)
    for points in (LSP_GRID, 8 * LSP_GRID):
        grid = np.linspace(0.0, np.pi, points + 1)
        rp, rq = _cheb_roots(gp, grid), _cheb_roots(gq, grid)
        if rp.size == n // 2 and rq.size == n // 2:
            omega = np.empty(n)
            omega[0::2], omega[1::2] = rp, rq
            if np.all(np.diff(omega) > 0) and omega[0] > 0 and omega[-1] < np.pi:
                return omega
    raise LspSearchError("LSP search failure")


def _poly_from_lsp(omega):
    p = np.array([1.0])
    q = np.array([1.0])
    for w in omega[0::2]:
        p = np.convolve(p, [1.0, -2.0 * np.cos(w), 1.0])
    for w in omega[1::2]:
        q = np.convolve(q, [1.0, -2.0 * np.cos(w), 1.0])
    p = np.convolve(p, [1.0, 1.0])
    q = np.convolve(q, [1.0, -1.0])
    return 0.5 * (p + q)


def lsp_to_lpc(omega):
    omega = np.asarray(omega, dtype=np.float64)
    if omega.ndim != 1 or omega.size % 2:
        raise ValueError("LSP vector must be one-dimensional with even length")
    if not (omega[0] > 0 and omega[-1] < np.pi and np.all(np.diff(omega) > 0)):
        raise ValueError("invalid LSP ordering")
    A = _poly_from_lsp(omega)
    return LpcCoeffs(-A[1:omega.size + 1])


# 50 Hz: keeps quantized filters' poles away from the unit circle
LSP_MIN_GAP = 2 * np.pi * 50.0 / 16000


def stabilize_lsp(omega, min_gap=None):
    """Force strict ordering with at least ``min_gap`` spacing inside (0, pi).

    The default gap is :data:`LSP_MIN_GAP`.
    """
    min_gap = LSP_MIN_GAP if min_gap is None else min_gap
    w = np.array(omega, dtype=np.float64)
    n = w.size
    w = np.clip(np.sort(w), min_gap, np.pi - min_gap)
    for i in range(1, n):
        w[i] = max(w[i], w[i - 1] + min_gap)
    for i in range(n - 1, -1, -1):
        upper = np.pi - min_gap * (n - i)
        if i < n - 1:
            upper = min(upper, w[i + 1] - min_gap)
        w[i] = min(w[i], upper)
    return w


def stabilize_lsp_torch(omega, min_gap=None):
    """Differentiable batch version of :func:`stabilize_lsp`.

    With ``t_i = w_i - i * min_gap`` the spacing constraint is ``t``
    non-decreasing, which a running maximum enforces.
    """
    min_gap = LSP_MIN_GAP if min_gap is None else min_gap
    n = omega.shape[-1]
    steps = min_gap * torch.arange(n, dtype=omega.dtype)
    w = torch.sort(omega, dim=-1).values.clamp(min_gap, np.pi - min_gap)
    t = torch.cummax(w - steps, dim=-1).values.clamp(max=np.pi - min_gap * n)
    return t + steps


def lsp_to_lpc_torch(omega):
    """Differentiable batch version of :func:`lsp_to_lpc` (no ordering check)."""
    cos = torch.cos(omega)
    batch = omega.shape[:-1]

    def product(cs):
        poly = torch.ones(*batch, 1, dtype=omega.dtype)
        for j in range(cs.shape[-1]):
            c = cs[..., j:j + 1]
            z = torch.zeros(*batch, 1, dtype=omega.dtype)
            ext = torch.cat([poly, z, z], dim=-1)
            poly = (ext
                    - 2.0 * c * torch.cat([z, poly, z], dim=-1)
                    + torch.cat([z, z, poly], dim=-1))
        return poly

    p = product(cos[..., 0::2])
    q = product(cos[..., 1::2])
    z = torch.zeros(*batch, 1, dtype=omega.dtype)
    p = torch.cat([p, z], -1) + torch.cat([z, p], -1)
    q = torch.cat([q, z], -1) - torch.cat([z, q], -1)
    A = 0.5 * (p + q)
    return -A[..., 1:omega.shape[-1] + 1]


def compute_residual(frame, coeffs):
    """Prediction residual of the middle 512 samples of an analysis frame.

    Each of the seven sub-frames is inverse-filtered with its true preceding
    samples as filter memory, windowed, and overlap-added.
    """
    samples = frame.samples if isinstance(frame, dsp.AnalysisFrame) else frame
    samples = check_length(samples, dsp.ANALYSIS_LEN)
    a = _coeff_array(coeffs)
    order = a.size
    c = np.concatenate([[1.0], -a])
    bank = dsp.window_bank()
    start = (dsp.ANALYSIS_LEN - dsp.CODING_LEN) // 2
    subs = []
    for o, w in zip(bank.sub_frame_offsets, bank.sub_frames):
        s0 = start + o
        seg = samples[s0 - order:s0 + dsp.SUBFRAME_LEN]
        subs.append(sps.lfilter(c, [1.0], seg)[order:] * w)
    return dsp.subframe_overlap_add(subs)


def synthesize(residual, coeffs, memory=None):
    """Run ``1/A(z)`` over a residual frame.

    ``memory`` holds the previous output samples, oldest first. Returns the
    synthesized frame and the updated memory.
    """
    residual = np.asarray(residual, dtype=np.float64)
    a = _coeff_array(coeffs)
    order = a.size
    memory = np.zeros(order) if memory is None else np.asarray(memory, dtype=np.float64)
    if memory.shape != (order,):
        raise ValueError(f"filter memory must have length {order}")
    den = np.concatenate([[1.0], -a])
    zi = sps.lfiltic([1.0], den, memory[::-1])
    out, _ = sps.lfilter([1.0], den, residual, zi=zi)
    return out, np.concatenate([memory, out])[-order:]
