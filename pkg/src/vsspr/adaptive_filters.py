"""
Adaptive filters built on one generic update

    h(n+1) = h(n) + mu * X(n) W(n) e*(n),    e_j(n) = d(n-j) - h(n)^H x(n-j)

where X(n) stacks the L most recent regressors as columns and the L x L
weighting matrix W(n) selects the algorithm (LMS, NLMS, APA, R-APA). The
partial rank algorithm (PRA) applies the regularized affine projection update
only on block boundaries, and the variable step-size variants replace the fixed
``mu`` by

    mu(n) = mu_max * ||p(n)||^2 / (||p(n)||^2 + psi)

with ``p(n)`` an exponentially smoothed estimate of the projected error
direction. VSSPR is that rule combined with PRA scheduling.

All state arrays may carry leading batch axes; a batch of realizations is
stepped in lockstep with exactly the arithmetic of a single filter.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ConfigurationError, NumericError, ParameterError
from .numerics import (
    RegressorWindow,
    gram,
    hermitian_pd_inverse,
    push_sample,
    regressor_matrix,
    regularized_gram,
)

PSI_FLOOR = 1e-8


class Variant(str, enum.Enum):
    LMS = "LMS"
    NLMS = "NLMS"
    APA = "APA"
    RAPA = "R-APA"
    PRA = "PRA"
    VSS_NLMS = "VSS-NLMS"
    VSS_APA = "VSS-APA"
    VSSPR = "VSSPR"


_SINGLE_TAP = {Variant.LMS, Variant.NLMS, Variant.VSS_NLMS}
_VSS = {Variant.VSS_NLMS, Variant.VSS_APA, Variant.VSSPR}
_BLOCK_SCHEDULED = {Variant.PRA, Variant.VSS_APA, Variant.VSSPR}


@dataclass(frozen=True)
class PsiMode:
    """How the step-size regularizer psi is obtained.

    ``fixed`` uses ``value`` verbatim, ``snr`` uses L/SNR and ``adaptive``
    re-estimates L * sigma_v^2 * mean(1/||x(n-k)||^2) every iteration.
    """

    kind: str = "snr"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fixed", "snr", "adaptive"):
            raise ParameterError(f"unknown psi mode {self.kind!r}")
        if self.kind == "fixed" and not self.value > 0:
            raise ParameterError(f"fixed psi must be > 0, got {self.value}")

    @classmethod
    def fixed(cls, value: float) -> PsiMode:
        return cls("fixed", float(value))

    @classmethod
    def from_snr(cls) -> PsiMode:
        return cls("snr")

    @classmethod
    def adaptive(cls) -> PsiMode:
        return cls("adaptive")


@dataclass(frozen=True)
class AlgorithmSpec:
    """An algorithm variant with its parameters.

    Parameters
    ----------
    variant : Variant
    L : int
        Projection order. Forced to 1 for LMS, NLMS and VSS-NLMS.
    mu : float
        Fixed step size (non-VSS variants).
    mu_max : float
        Step-size ceiling of the VSS variants, restricted to (0, 2).
    eps : float
        Gram-matrix regularization; also guards the NLMS normalization.
    beta : float
        Smoothing factor of the projected-error estimate, in [0, 1].
    alpha : int
        Block factor; the weights are held for ``alpha * (L - 1)`` iterations
        between updates. Forced to 0 for VSS-APA.
    psi_mode : PsiMode
    name : str, optional
        Label used in reports; defaults to the variant name.
    """

    variant: Variant
    L: int = 1
    mu: float = 0.5
    mu_max: float = 1.0
    eps: float = 1e-4
    beta: float = 0.99
    alpha: int = 1
    psi_mode: PsiMode = PsiMode.from_snr()
    name: Optional[str] = None

    def __post_init__(self):
        try:
            variant = Variant(self.variant)
        except ValueError:
            raise ParameterError(f"unknown variant {self.variant!r}") from None
        object.__setattr__(self, "variant", variant)
        if variant in _SINGLE_TAP:
            object.__setattr__(self, "L", 1)
        if variant is Variant.VSS_APA:
            object.__setattr__(self, "alpha", 0)
        if int(self.L) != self.L or self.L < 1:
            raise ParameterError(f"L must be a positive integer, got {self.L}")
        if self.alpha not in (0, 1):
            raise ParameterError(f"alpha must be 0 or 1, got {self.alpha}")
        if variant in _VSS:
            if not 0 < self.mu_max < 2:
                raise ParameterError(
                    f"mu_max must lie in (0, 2) for update stability, got {self.mu_max}"
                )
            if not 0 <= self.beta <= 1:
                raise ParameterError(f"beta must lie in [0, 1], got {self.beta}")
        elif not self.mu > 0:
            raise ParameterError(f"mu must be > 0, got {self.mu}")
        if variant is not Variant.LMS and variant is not Variant.APA and not self.eps > 0:
            raise ParameterError(f"eps must be > 0 for {variant.value}, got {self.eps}")

    @property
    def label(self) -> str:
        return self.name or self.variant.value

    @property
    def is_vss(self) -> bool:
        return self.variant in _VSS

    @property
    def block_hold(self) -> int:
        """Number of iterations the weights are held after an update (L')."""
        if self.variant in _BLOCK_SCHEDULED:
            return self.alpha * (self.L - 1)
        return 0


@dataclass
class FilterState:
    """Everything a filter carries between iterations.

    ``psi`` and ``noise_variance`` are scalars or arrays broadcastable to the
    batch shape.
    """

    h: np.ndarray
    window: RegressorWindow
    d_history: np.ndarray
    p_hat: np.ndarray
    block_phase: int = 0
    psi: object = 1.0
    noise_variance: object = 0.0
    iteration: int = 0

    @property
    def M(self) -> int:
        return self.h.shape[-1]


@dataclass
class StepRecord:
    output: object
    prior_error: object
    mu_used: object
    updated: bool


@dataclass(frozen=True)
class SysIdScenario:
    """A known FIR system driven by white Gaussian input.

    ``h_true`` may carry leading axes to give every trial its own system.
    """

    h_true: np.ndarray
    input_variance: float = 1.0
    noise_variance: float = 0.0

    def __post_init__(self):
        h = np.asarray(self.h_true, dtype=complex)
        if not np.all(np.sum(np.abs(h) ** 2, axis=-1) > 0):
            raise ParameterError("h_true must be nonzero")
        object.__setattr__(self, "h_true", h)


def init_state(
    spec: AlgorithmSpec,
    M: int,
    batch_shape: tuple = (),
    snr_linear=None,
    noise_variance=None,
    h0=None,
) -> FilterState:
    """Zero-initialized filter state for ``spec`` with ``M`` taps.

    ``snr_linear`` is required for psi mode ``snr`` and ``noise_variance``
    for psi mode ``adaptive``.
    """
    if M < 1:
        raise ConfigurationError(f"M must be >= 1, got {M}")
    batch_shape = tuple(batch_shape)
    L = spec.L
    h = np.zeros(batch_shape + (M,), dtype=complex)
    if h0 is not None:
        h = h + np.asarray(h0, dtype=complex)
    psi = 1.0
    nv = 0.0 if noise_variance is None else noise_variance
    if spec.is_vss:
        mode = spec.psi_mode
        if mode.kind == "snr":
            if snr_linear is None:
                raise ConfigurationError("psi mode 'snr' needs snr_linear")
            psi = psi_value(mode, L, snr_linear=snr_linear)
        elif mode.kind == "adaptive":
            if noise_variance is None:
                raise ConfigurationError("psi mode 'adaptive' needs noise_variance")
            psi = PSI_FLOOR
        else:
            psi = mode.value
    return FilterState(
        h=h,
        window=RegressorWindow.zeros(M + L - 1, batch_shape),
        d_history=np.zeros(batch_shape + (L,), dtype=complex),
        p_hat=np.zeros(batch_shape + (M,), dtype=complex),
        block_phase=0,
        psi=psi,
        noise_variance=nv,
        iteration=0,
    )


def _herm(A):
    return np.conj(np.swapaxes(A, -1, -2))


def _matvec(A, v):
    return (A @ v[..., None])[..., 0]


def _expand(mu):
    return np.asarray(mu, dtype=float)[..., None]


def filter_output(h, x):
    """h^H x for regressor ``x``."""
    return np.sum(np.conj(h) * x, axis=-1)


def error_vector(d: np.ndarray, X: np.ndarray, h: np.ndarray) -> np.ndarray:
    """e = d - X^T conj(h); element j is d(n-j) minus the output h^H x(n-j)."""
    if X.shape[-1] != d.shape[-1] or X.shape[-2] != h.shape[-1]:
        raise ConfigurationError(
            f"shape mismatch: X {X.shape[-2:]}, d {d.shape[-1]}, h {h.shape[-1]}"
        )
    return d - np.conj(_matvec(_herm(X), h))


def weighting_matrix(spec: AlgorithmSpec, X: np.ndarray) -> np.ndarray:
    """W(n) for the fixed-weighting part of ``spec``.

    LMS uses 1, NLMS (and VSS-NLMS) 1/(eps + ||x||^2), APA (X^H X)^-1 and the
    regularized family (R-APA, PRA, VSS-APA, VSSPR) (eps I + X^H X)^-1.
    """
    v = spec.variant
    if v is Variant.LMS:
        return np.ones(X.shape[:-2] + (1, 1), dtype=complex)
    if v in (Variant.NLMS, Variant.VSS_NLMS):
        x = X[..., :, :1]
        energy = np.sum(np.abs(x) ** 2, axis=-2, keepdims=True)
        return (1.0 / (spec.eps + energy)).astype(complex)
    if v is Variant.APA:
        return hermitian_pd_inverse(gram(X))
    return hermitian_pd_inverse(regularized_gram(X, spec.eps))


def generic_update(h, X, W, e, mu) -> np.ndarray:
    """h + mu * X W conj(e).

    The conjugate makes the update the steepest-descent step for the output
    convention h^H x; with real data it is the plain h + mu X W e.
    """
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ParameterError("step size must be >= 0")
    return h + _expand(mu) * _matvec(X, _matvec(W, np.conj(e)))


def pra_update(state: FilterState, spec: AlgorithmSpec, X, e, mu, W=None) -> FilterState:
    """Block-scheduled regularized projection update.

    On a block boundary (``block_phase == 0``) the weights move by
    ``mu X (eps I + X^H X)^-1 e*`` and the phase restarts at L'; otherwise the
    phase counts down and the weights are held. With alpha = 0 every
    iteration is a boundary, which is R-APA.
    """
    if state.block_phase > 0:
        return replace(state, block_phase=state.block_phase - 1)
    if W is None:
        W = hermitian_pd_inverse(regularized_gram(X, spec.eps))
    h = generic_update(state.h, X, W, e, mu)
    return replace(state, h=h, block_phase=spec.block_hold)


def vss_p_hat(p_hat, X, e, beta: float, eps: float, W=None) -> np.ndarray:
    """beta * p_hat + (1 - beta) * X (eps I + X^H X)^-1 e*."""
    if not 0 <= beta <= 1:
        raise ParameterError(f"beta must lie in [0, 1], got {beta}")
    if W is None:
        W = hermitian_pd_inverse(regularized_gram(X, eps))
    return beta * p_hat + (1.0 - beta) * _matvec(X, _matvec(W, np.conj(e)))


def vss_mu(p_hat, psi, mu_max: float):
    """mu_max * ||p_hat||^2 / (||p_hat||^2 + psi), in [0, mu_max)."""
    psi = np.asarray(psi, dtype=float)
    if np.any(~(psi > 0)):
        raise ParameterError("psi must be > 0")
    power = np.sum(np.abs(p_hat) ** 2, axis=-1)
    return mu_max * power / (power + psi)


def psi_value(
    mode: PsiMode,
    L: int,
    snr_linear=None,
    sigma_v2=None,
    recent_norms=None,
):
    """Evaluate psi for the given mode.

    ``recent_norms`` holds squared regressor norms ||x(n-k)||^2 along the
    last axis. Zero norms are skipped in adaptive mode; when nothing is left
    (or the estimate is not positive) the result falls back to ``PSI_FLOOR``.
    """
    if mode.kind == "fixed":
        return mode.value
    if mode.kind == "snr":
        snr_linear = np.asarray(snr_linear, dtype=float)
        if np.any(~(snr_linear > 0)):
            raise ParameterError("snr_linear must be > 0")
        return L / snr_linear
    sigma_v2 = np.asarray(sigma_v2, dtype=float)
    if np.any(sigma_v2 < 0):
        raise ParameterError("sigma_v2 must be >= 0")
    norms = np.asarray(recent_norms, dtype=float)
    if norms.size == 0:
        raise ParameterError("adaptive psi needs at least one regressor norm")
    valid = norms > 0
    count = np.sum(valid, axis=-1)
    inv_sum = np.sum(np.where(valid, 1.0 / np.where(valid, norms, 1.0), 0.0), axis=-1)
    mean_inv = inv_sum / np.maximum(count, 1)
    psi = L * sigma_v2 * mean_inv
    return np.where((count > 0) & (psi > 0), psi, PSI_FLOOR)


def filter_step(state: FilterState, spec: AlgorithmSpec, x_new, d_new):
    """Advance the filter by one input/desired sample pair.

    Returns ``(StepRecord, FilterState)``. The output is h(n)^H x(n) and the
    prior error d(n) minus that output; both use the weights before this
    iteration's update.

    Raises
    ------
    NumericError
        On non-finite input; the passed state is never modified.
    """
    x_new = np.asarray(x_new, dtype=complex)
    d_new = np.asarray(d_new, dtype=complex)
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(d_new))):
        raise NumericError(f"non-finite sample at iteration {state.iteration}")
    M, L = state.M, spec.L
    window = push_sample(state.window, x_new)
    d_hist = np.empty_like(state.d_history)
    d_hist[..., 0] = d_new
    d_hist[..., 1:] = state.d_history[..., :-1]
    X = regressor_matrix(window, M, L)
    h = state.h
    e = error_vector(d_hist, X, h)
    output = filter_output(h, X[..., 0])
    e[..., 0] = d_new - output
    nxt = replace(state, window=window, d_history=d_hist, iteration=state.iteration + 1)

    variant = spec.variant
    boundary = state.block_phase == 0
    if not spec.is_vss:
        if variant is Variant.PRA:
            mu = spec.mu if boundary else 0.0
            nxt = pra_update(nxt, spec, X, e, spec.mu)
        else:
            mu = spec.mu
            W = weighting_matrix(spec, X)
            nxt.h = generic_update(h, X, W, e, mu)
    else:
        W = weighting_matrix(spec, X)
        p_hat = vss_p_hat(state.p_hat, X, e, spec.beta, spec.eps, W=W)
        psi = state.psi
        if spec.psi_mode.kind == "adaptive":
            norms = np.sum(np.abs(X) ** 2, axis=-2)
            psi = psi_value(spec.psi_mode, L, sigma_v2=state.noise_variance, recent_norms=norms)
        mu_n = vss_mu(p_hat, psi, spec.mu_max)
        nxt.p_hat = p_hat
        nxt.psi = psi
        if variant is Variant.VSS_NLMS:
            nxt.h = generic_update(h, X, W, e, mu_n)
            mu = mu_n
        else:
            nxt = pra_update(nxt, spec, X, e, mu_n, W=W)
            mu = mu_n if boundary else np.zeros_like(mu_n)
    if not np.all(np.isfinite(nxt.h)):
        raise NumericError(f"weights diverged at iteration {state.iteration}")
    record = StepRecord(
        output=output,
        prior_error=e[..., 0],
        mu_used=np.broadcast_to(np.asarray(mu, dtype=float), output.shape).copy(),
        updated=bool(boundary) if variant in _BLOCK_SCHEDULED else True,
    )
    return record, nxt


def optimal_mu_terms(eps_vec, X, W, sigma_v2):
    """Numerator, signal part of the denominator and psi of the optimal step.

    With B = X W and C = B X^H, returns ``(Re eps^H C eps, ||C eps||^2,
    sigma_v2 * Tr(B^H B))``. Averaging each term over an ensemble before
    forming the ratio gives the expectation-level optimum.
    """
    B = X @ W
    C = B @ _herm(X)
    Ce = _matvec(C, eps_vec)
    num = np.real(np.sum(np.conj(eps_vec) * Ce, axis=-1))
    den = np.sum(np.abs(Ce) ** 2, axis=-1)
    psi = sigma_v2 * np.real(np.trace(_herm(B) @ B, axis1=-2, axis2=-1))
    return num, den, psi


def oracle_optimal_mu(eps_vec, X, W, sigma_v2):
    """Single-sample plug-in of the MSD-optimal step size.

    Needs the true weight-error vector, so it only applies where the system is
    known. Returns 0 where the denominator vanishes.
    """
    num, den, psi = optimal_mu_terms(eps_vec, X, W, sigma_v2)
    total = den + psi
    safe = np.where(total > 0, total, 1.0)
    out = np.where(total > 0, num / safe, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def msd(h, h_true):
    """Squared Euclidean norm of the weight error h_true - h."""
    if isinstance(h_true, SysIdScenario):
        h_true = h_true.h_true
    diff = np.asarray(h_true) - np.asarray(h)
    return np.sum(np.abs(diff) ** 2, axis=-1)
