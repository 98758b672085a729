"""Soft-to-hard scalar quantization with learnable centroids.

Functions accept torch tensors (and stay differentiable) or array-likes, in
which case they compute in float64 and hand back numpy arrays.
"""

import functools

import numpy as np
import torch

DEFAULT_ALPHA = 300.0
RESIDUAL_CENTROIDS = 32
LSP_CENTROIDS = 256


def _array_api(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        if any(isinstance(a, torch.Tensor) for a in args):
            return fn(*args, **kwargs)
        converted = [
            torch.as_tensor(np.asarray(a, dtype=np.float64)) if isinstance(a, (np.ndarray, list, tuple)) else a
            for a in args
        ]
        out = fn(*converted, **kwargs)
        if isinstance(out, torch.Tensor):
            out = out.detach().numpy()
            return out.item() if out.ndim == 0 else out
        return out
    return wrapper


class _SafeSqrt(torch.autograd.Function):
    # d/dx sqrt(x) is unbounded at 0, where softmax entries can underflow;
    # cap it so 0 * inf never reaches the chain rule.
    @staticmethod
    def forward(ctx, x):
        y = torch.sqrt(x)
        ctx.save_for_backward(y)
        return y

    @staticmethod
    def backward(ctx, grad):
        (y,) = ctx.saved_tensors
        return grad / (2.0 * y.clamp_min(1e-12))


@_array_api
def distance_matrix(h, b):
    """Squared distances ``D[..., i, j] = (h[..., i] - b[j])**2``.

    ``b`` may also be 2-D (one codebook per code position).
    """
    return (h.unsqueeze(-1) - b) ** 2


@_array_api
def soft_assign(D, alpha=DEFAULT_ALPHA):
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return torch.softmax(-alpha * D, dim=-1)


@_array_api
def hard_assign(D):
    """One-hot rows at the nearest centroid; ties go to the lowest index."""
    idx = torch.argmin(D, dim=-1)
    return torch.nn.functional.one_hot(idx, D.shape[-1]).to(D.dtype)


def nearest_indices(h, b):
    """Hard assignment as integer indices (numpy in, numpy out)."""
    h = np.asarray(h, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.argmin((h[..., None] - b) ** 2, axis=-1)


@_array_api
def assign(h, b, mode="soft", alpha=DEFAULT_ALPHA):
    D = distance_matrix(h, b)
    if mode == "soft":
        return soft_assign(D, alpha)
    if mode == "hard":
        return hard_assign(D)
    raise ValueError(f"unknown quantization mode {mode!r}")


@_array_api
def quantize(h, b, mode="hard", alpha=DEFAULT_ALPHA):
    """Quantized code ``A @ b`` for soft or hard assignments ``A``."""
    A = assign(h, b, mode, alpha)
    return (A * b).sum(-1)


@_array_api
def quant_penalty(A):
    """``sum_ij (sqrt(A_ij) - 1) / I``; equals ``1 - J`` for one-hot rows."""
    rows = A.reshape(-1, A.shape[-1])
    return (_SafeSqrt.apply(rows) - 1.0).sum() / rows.shape[0]


@_array_api
def entropy_estimate(A):
    """Entropy in bits of the centroid usage distribution of ``A``.

    Column sums are normalized by the row count so the usage probabilities
    sum to one.
    """
    rows = A.reshape(-1, A.shape[-1])
    p = rows.sum(0) / rows.shape[0]
    return -(p * torch.log2(p.clamp_min(1e-30))).sum()


@_array_api
def differential_encode(h):
    """First differences along the last axis; the first element is kept."""
    return torch.cat([h[..., :1], h[..., 1:] - h[..., :-1]], dim=-1)


@_array_api
def differential_decode(dh):
    return torch.cumsum(dh, dim=-1)


def dpcm_quantize(h, b, mode="soft", alpha=DEFAULT_ALPHA):
    """Closed-loop differential quantization along the last axis.

    Position ``i`` quantizes ``h[i] - h_hat[i-1]`` (with ``h_hat[-1] = 0``)
    and accumulates the result, so the reconstruction error at every
    position is just that position's quantization error. The quantized
    differences decode with :func:`differential_decode`.

    Parameters
    ----------
    h : torch.Tensor, shape (..., m)
    b : torch.Tensor, shape (J,)
    mode : {"soft", "hard", "straight_through"}
        ``"straight_through"`` reconstructs with hard assignments and
        differentiates the soft quantizer of each position with the
        feedback held constant. Gradients through the feedback loop
        multiply one slope per position and blow up over a long code,
        which this avoids. Differences beyond the codebook get no
        gradient, so the encoder cannot drift into overload.

    Returns
    -------
    h_hat : torch.Tensor, shape (..., m)
    A : torch.Tensor, shape (..., m, J)
        Assignment of each transmitted difference. In straight-through
        mode these are the soft assignments of the transmitted differences,
        with the feedback held constant, for use by the regularizers.
    """
    ste = mode == "straight_through"
    prev = h.new_zeros(h.shape[:-1])
    rows = []
    out = []
    for i in range(h.shape[-1]):
        if ste:
            # the feedback is a constant, so gradients stay local to position i
            soft = assign(h[..., i] - prev, b, "soft", alpha)
            hard = hard_assign(distance_matrix((h[..., i] - prev).detach(), b.detach()))
            rows.append(soft)
            q = (soft * b).sum(-1)
            q = q + ((hard * b).sum(-1) - q).detach()
            out.append(prev + q)
            prev = prev + q.detach()
        else:
            used = assign(h[..., i] - prev, b, mode, alpha)
            rows.append(used)
            prev = prev + (used * b).sum(-1)
            out.append(prev)
    h_hat = torch.stack(out, dim=-1)
    return h_hat, torch.stack(rows, dim=-2)


def uniform_codebook(values, n=RESIDUAL_CENTROIDS, coverage=(1.0, 99.0)):
    """Evenly spaced centroids over the central percentile range of ``values``."""
    lo, hi = np.percentile(np.asarray(values, dtype=np.float64), coverage)
    if hi - lo < 1e-6:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, n)


def quantile_codebook(values, n=LSP_CENTROIDS):
    """Centroids at ``n`` evenly spaced empirical quantiles of ``values``.

    With 2-D ``values`` (samples x positions) one codebook per position is
    returned.
    """
    values = np.asarray(values, dtype=np.float64)
    q = (np.arange(n) + 0.5) / n
    if values.ndim == 1:
        return np.quantile(values, q)
    return np.quantile(values, q, axis=0).T.copy()
