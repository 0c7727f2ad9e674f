"""
Complex-valued building blocks.

Every function here accepts arrays with arbitrary leading batch axes, so the
same code path drives a single filter or a stack of independent Monte-Carlo
realizations advancing in lockstep. Conjugate transposes are used wherever a
real-valued derivation would use a plain transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError, ParameterError

PIVOT_FLOOR = 1e-300


@dataclass(frozen=True)
class RegressorWindow:
    """Most-recent-first history of filter input samples.

    ``buffer[..., 0]`` is x(n), ``buffer[..., k]`` is x(n-k). Samples that
    precede the first push are zero.
    """

    buffer: np.ndarray

    @classmethod
    def zeros(cls, capacity: int, batch_shape: tuple = ()) -> RegressorWindow:
        if capacity < 1:
            raise ConfigurationError(f"window capacity must be >= 1, got {capacity}")
        return cls(np.zeros(tuple(batch_shape) + (capacity,), dtype=complex))

    @property
    def capacity(self) -> int:
        return self.buffer.shape[-1]


def push_sample(window: RegressorWindow, u) -> RegressorWindow:
    """Return a new window with ``u`` at position 0 and the oldest sample dropped."""
    buf = window.buffer
    u = np.broadcast_to(np.asarray(u, dtype=complex), buf.shape[:-1])
    out = np.empty_like(buf)
    out[..., 0] = u
    out[..., 1:] = buf[..., :-1]
    return RegressorWindow(out)


def regressor_matrix(window: RegressorWindow, M: int, L: int) -> np.ndarray:
    """Assemble the M x L signal matrix whose column j is x(n-j).

    Element ``[i, j]`` is x(n-i-j), so neighbouring columns are delayed
    copies sharing M-1 entries.
    """
    if M < 1 or L < 1:
        raise ConfigurationError(f"M and L must be >= 1, got M={M}, L={L}")
    if window.capacity < M + L - 1:
        raise ConfigurationError(
            f"window capacity {window.capacity} < M+L-1 = {M + L - 1}"
        )
    buf = window.buffer[..., : M + L - 1]
    # windows[..., j, i] = buf[..., j + i]
    windows = np.lib.stride_tricks.sliding_window_view(buf, M, axis=-1)
    return np.swapaxes(windows, -1, -2).copy()


def hermitian_part(A: np.ndarray) -> np.ndarray:
    """(A + A^H) / 2, exactly Hermitian in floating point."""
    return 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))


def gram(X: np.ndarray) -> np.ndarray:
    """X^H X as an exactly Hermitian matrix."""
    G = np.conj(np.swapaxes(X, -1, -2)) @ X
    return hermitian_part(G)


def regularized_gram(X: np.ndarray, eps: float) -> np.ndarray:
    """Return eps*I + X^H X."""
    if not eps > 0:
        raise ParameterError(f"regularization eps must be > 0, got {eps}")
    G = gram(X)
    idx = np.arange(G.shape[-1])
    G[..., idx, idx] += eps
    return G


def hermitian_pd_inverse(G: np.ndarray) -> np.ndarray:
    """Invert a (stack of) Hermitian positive definite matrices.

    Gauss-Jordan elimination with partial pivoting, vectorized over the
    leading axes. The result is symmetrized so it is exactly Hermitian.

    Raises
    ------
    NumericError
        If ``G`` contains non-finite entries or a pivot magnitude falls below
        ``PIVOT_FLOOR``.
    """
    G = np.asarray(G, dtype=complex)
    if G.shape[-1] != G.shape[-2]:
        raise ConfigurationError(f"matrix must be square, got {G.shape[-2:]}")
    if not np.all(np.isfinite(G)):
        raise NumericError("matrix has non-finite entries")
    n = G.shape[-1]
    batch = G.shape[:-2]
    A = G.reshape((-1, n, n)).copy()
    inv = np.broadcast_to(np.eye(n, dtype=complex), A.shape).copy()
    rows = np.arange(A.shape[0])
    for k in range(n):
        piv = k + np.argmax(np.abs(A[:, k:, k]), axis=1)
        pivval = A[rows, piv, k]
        if np.any(np.abs(pivval) < PIVOT_FLOOR):
            raise NumericError("matrix is numerically singular")
        swap = piv != k
        if np.any(swap):
            r = rows[swap]
            p = piv[swap]
            A[r, k], A[r, p] = A[r, p], A[r, k].copy()
            inv[r, k], inv[r, p] = inv[r, p], inv[r, k].copy()
        scale = 1.0 / A[:, k, k]
        A[:, k, :] *= scale[:, None]
        inv[:, k, :] *= scale[:, None]
        factor = A[:, :, k].copy()
        factor[:, k] = 0.0
        A -= factor[:, :, None] * A[:, k, None, :]
        inv -= factor[:, :, None] * inv[:, k, None, :]
    return hermitian_part(inv.reshape(batch + (n, n)))


def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent, reproducible generator for the pair (seed, stream_id)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def gaussian_complex(rng: np.random.Generator, variance: float, size=None):
    """Circularly symmetric complex Gaussian draws with E|v|^2 = variance."""
    if variance < 0:
        raise ParameterError(f"variance must be >= 0, got {variance}")
    z = rng.standard_normal(size=_pair_shape(size))
    out = np.sqrt(variance / 2.0) * (z[0] + 1j * z[1])
    return complex(out) if size is None else out


def _pair_shape(size):
    if size is None:
        return (2,)
    if np.isscalar(size):
        return (2, int(size))
    return (2,) + tuple(size)
