"""
Adaptive linear equalizer with a training phase followed by decision-directed
operation, plus Monte-Carlo drivers for learning curves, SER sweeps and the
system-identification harness used to check the optimal step-size analysis.

Realization ``r`` of an experiment draws its symbols and noise from
``rng_stream(base_seed, r)``. Every algorithm therefore sees identical data,
and SNR points of a sweep share the same unit-variance noise draws.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .adaptive_filters import (
    AlgorithmSpec,
    PsiMode,
    SysIdScenario,
    Variant,
    error_vector,
    filter_output,
    filter_step,
    generic_update,
    init_state,
    msd,
    oracle_optimal_mu,
    weighting_matrix,
)
from .comms import (
    PAPER_CHANNEL,
    add_scaled_noise,
    apply_channel,
    draw_symbols,
    make_constellation,
    slice_symbols,
    symbol_error_rate,
)
from .errors import ConfigurationError, NumericError
from .numerics import gaussian_complex, push_sample, regressor_matrix, rng_stream

CHUNK_SIZE = 50


def paper_algorithms(psi_mode: Optional[PsiMode] = None, beta: float = 0.99, eps: float = 1e-4):
    """NLMS, PRA, APA and VSSPR with the step sizes of the reference experiment."""
    if psi_mode is None:
        psi_mode = PsiMode.fixed(1e-4)
    return (
        AlgorithmSpec(Variant.NLMS, mu=0.4, eps=eps, name="NLMS"),
        AlgorithmSpec(Variant.PRA, L=4, mu=0.4, eps=eps, alpha=1, name="PRA"),
        AlgorithmSpec(Variant.RAPA, L=4, mu=0.06, eps=eps, name="APA"),
        AlgorithmSpec(
            Variant.VSSPR, L=4, mu_max=1.7, eps=eps, beta=beta, alpha=1,
            psi_mode=psi_mode, name="VSSPR",
        ),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """Equalization experiment; defaults reproduce the reference setup."""

    channel: tuple = PAPER_CHANNEL
    snr_db: float = 30.0
    M: int = 35
    delta: int = 15
    L: int = 4
    n_train: int = 500
    n_dd: int = 5000
    train_order: int = 4
    dd_order: int = 256
    realizations: int = 300
    base_seed: int = 2009
    algorithms: tuple = field(default_factory=paper_algorithms)

    def __post_init__(self):
        if self.M < 1:
            raise ConfigurationError(f"M must be >= 1, got {self.M}")
        if not 0 <= self.delta < self.n_train:
            raise ConfigurationError(
                f"delta must satisfy 0 <= delta < n_train, got delta={self.delta}, n_train={self.n_train}"
            )
        if self.n_dd < 0:
            raise ConfigurationError(f"n_dd must be >= 0, got {self.n_dd}")
        if self.realizations < 1:
            raise ConfigurationError(f"realizations must be >= 1, got {self.realizations}")
        taps = np.asarray(self.channel, dtype=complex)
        if taps.ndim != 1 or not np.any(taps != 0):
            raise ConfigurationError("channel needs at least one nonzero tap")
        make_constellation(self.train_order)
        make_constellation(self.dd_order)

    @property
    def length(self) -> int:
        return self.n_train + self.n_dd

    def algorithm(self, label: str) -> AlgorithmSpec:
        for spec in self.algorithms:
            if spec.label == label:
                return spec
        raise ConfigurationError(
            f"no algorithm labelled {label!r}; have {[a.label for a in self.algorithms]}"
        )


@dataclass
class RealizationTrace:
    """Per-iteration record of one realization (or a batch along leading axes).

    ``truth[n]`` is s(n - delta), zero before the delay has elapsed.
    """

    sq_error: np.ndarray
    mu_trace: np.ndarray
    decisions: np.ndarray
    truth: np.ndarray
    received: np.ndarray
    outputs: np.ndarray
    transmitted: np.ndarray
    noise_variance: np.ndarray

    def __len__(self):
        return self.sq_error.shape[-1]

    def realization(self, index) -> RealizationTrace:
        """Pick one element of a batched trace."""
        return RealizationTrace(
            *(np.asarray(getattr(self, f))[index] for f in self.__dataclass_fields__)
        )


@dataclass
class LearningCurve:
    """Trial-averaged squared error; ``mse_db`` is NaN before ``valid_from``."""

    mse: np.ndarray
    realizations: int
    valid_from: int = 0

    @property
    def mse_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            db = 10.0 * np.log10(self.mse)
        db[: self.valid_from] = np.nan
        return db

    def __len__(self):
        return len(self.mse)


@dataclass
class SerCurve:
    """SER versus SNR for one algorithm and decision-directed constellation.

    ``per_realization`` has shape (len(snr_db), realizations).
    """

    algorithm: str
    dd_order: int
    snr_db: np.ndarray
    per_realization: np.ndarray

    @property
    def ser(self) -> np.ndarray:
        return self.per_realization.mean(axis=-1)

    @property
    def standard_error(self) -> np.ndarray:
        r = self.per_realization.shape[-1]
        if r < 2:
            return np.zeros(len(self.snr_db))
        return self.per_realization.std(axis=-1, ddof=1) / np.sqrt(r)


def desired_signal(n: int, n_train: int, s_delayed, sliced_output):
    """Reference d(n): the delayed symbol while training, the decision afterwards.

    ``s_delayed`` must already be zero for n < delta.
    """
    return s_delayed if n < n_train else sliced_output


def generate_signals(cfg: ExperimentConfig, indices: Sequence[int]):
    """Symbols, noiseless channel output and unit noise for the given realizations.

    Returns arrays of shape (len(indices), length).
    """
    train_c = make_constellation(cfg.train_order)
    dd_c = make_constellation(cfg.dd_order)
    n = cfg.length
    s = np.empty((len(indices), n), dtype=complex)
    w = np.empty((len(indices), n), dtype=complex)
    for row, r in enumerate(indices):
        rng = rng_stream(cfg.base_seed, r)
        s[row, : cfg.n_train] = draw_symbols(train_c, cfg.n_train, rng)
        s[row, cfg.n_train :] = draw_symbols(dd_c, cfg.n_dd, rng)
        w[row] = gaussian_complex(rng, 1.0, n)
    y = apply_channel(s, np.asarray(cfg.channel, dtype=complex))
    return s, y, w


def _run_batch(cfg: ExperimentConfig, spec: AlgorithmSpec, s, x, sigma2, snr_db) -> RealizationTrace:
    """Step a batch of equalizers in lockstep.

    ``x`` has shape batch + (length,); ``s`` broadcasts against it.
    """
    batch = x.shape[:-1]
    n_total = x.shape[-1]
    M, delta, n_train = cfg.M, cfg.delta, cfg.n_train
    train_c = make_constellation(cfg.train_order)
    dd_c = make_constellation(cfg.dd_order)
    s = np.broadcast_to(s, x.shape)
    truth = np.zeros(x.shape, dtype=complex)
    truth[..., delta:] = s[..., : n_total - delta]

    snr_lin = np.broadcast_to(10.0 ** (np.asarray(snr_db, dtype=float) / 10.0), batch)
    state = init_state(spec, M, batch, snr_linear=snr_lin, noise_variance=sigma2)
    sq_error = np.empty(x.shape)
    mu_trace = np.empty(x.shape)
    decisions = np.empty(x.shape, dtype=complex)
    outputs = np.empty(x.shape, dtype=complex)
    xs = np.moveaxis(x, -1, 0)
    for n in range(n_total):
        x_new = xs[n]
        regressor = np.concatenate([x_new[..., None], state.window.buffer[..., : M - 1]], axis=-1)
        y = filter_output(state.h, regressor)
        const = train_c if n - delta < n_train else dd_c
        try:
            decision = slice_symbols(y, const)
            d = desired_signal(n, n_train, truth[..., n], decision)
            record, state = filter_step(state, spec, x_new, d)
        except NumericError as exc:
            raise NumericError(f"{spec.label}: {exc} (iteration {n})") from exc
        sq_error[..., n] = np.abs(record.prior_error) ** 2
        mu_trace[..., n] = record.mu_used
        decisions[..., n] = decision
        outputs[..., n] = record.output
    return RealizationTrace(
        sq_error=sq_error,
        mu_trace=mu_trace,
        decisions=decisions,
        truth=truth,
        received=x.copy(),
        outputs=outputs,
        transmitted=s.copy(),
        noise_variance=np.broadcast_to(sigma2, batch).copy(),
    )


def run_equalizer_batch(
    cfg: ExperimentConfig,
    spec: AlgorithmSpec,
    indices: Sequence[int],
    snr_db=None,
) -> RealizationTrace:
    """Run realizations ``indices`` at one SNR or a list of SNRs.

    With a scalar (or omitted) ``snr_db`` the batch shape is
    ``(len(indices),)``; with a sequence it is ``(len(snr_db), len(indices))``.
    """
    if snr_db is None:
        snr_db = cfg.snr_db
    s, y, w = generate_signals(cfg, indices)
    snr = np.asarray(snr_db, dtype=float)
    if snr.ndim == 0:
        x, sigma2 = add_scaled_noise(y, w, snr)
    else:
        x, sigma2 = add_scaled_noise(y[None], w[None], snr[:, None])
        s = s[None]
        snr = snr[:, None]
    return _run_batch(cfg, spec, s, x, sigma2, snr)


def run_equalizer_realization(cfg: ExperimentConfig, spec: AlgorithmSpec, index: int = 0) -> RealizationTrace:
    """A single realization; deterministic in (base_seed, index)."""
    trace = run_equalizer_batch(cfg, spec, [index])
    return trace.realization(0)


def _chunks(n: int, size: int = CHUNK_SIZE):
    return [list(range(a, min(a + size, n))) for a in range(0, n, size)]


def _map_chunks(fn, args_list, jobs: Optional[int]):
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *a) for a in args_list]
        return [f.result() for f in futures]


def _learning_chunk(cfg, spec, indices):
    t = run_equalizer_batch(cfg, spec, indices)
    return t.sq_error, t.mu_trace


def run_learning_experiment(cfg: ExperimentConfig, jobs: Optional[int] = None):
    """Squared-error and step-size traces for every configured algorithm.

    Returns ``{label: (sq_error, mu_trace)}`` with arrays of shape
    (realizations, length). Chunks are fixed-size and reassembled in index
    order, so the result does not depend on ``jobs``.
    """
    chunks = _chunks(cfg.realizations)
    out = {}
    for spec in cfg.algorithms:
        parts = _map_chunks(_learning_chunk, [(cfg, spec, c) for c in chunks], jobs)
        out[spec.label] = (
            np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]),
        )
    return out


def average_learning_curve(traces, valid_from: int = 0) -> LearningCurve:
    """Per-iteration mean of |e(n)|^2 over realizations.

    ``traces`` is a list of :class:`RealizationTrace` or an array of squared
    errors with realizations along the first axis.
    """
    if isinstance(traces, np.ndarray):
        sq = traces.reshape((-1, traces.shape[-1]))
    else:
        if len(traces) == 0:
            raise ConfigurationError("need at least one trace")
        lengths = {len(t) for t in traces}
        if len(lengths) != 1:
            raise ConfigurationError(f"trace lengths differ: {sorted(lengths)}")
        sq = np.stack([t.sq_error for t in traces])
    return LearningCurve(mse=sq.mean(axis=0), realizations=sq.shape[0], valid_from=valid_from)


def steady_state_db(sq_error: np.ndarray, window: int = 500):
    """Mean of the final ``window`` iterations in dB and its standard error.

    The standard error comes from the spread of per-realization means,
    propagated to dB to first order.
    """
    per_trial = sq_error[..., -window:].mean(axis=-1).reshape(-1)
    mean = per_trial.mean()
    se = per_trial.std(ddof=1) / np.sqrt(per_trial.size) if per_trial.size > 1 else 0.0
    return 10.0 * np.log10(mean), 10.0 / np.log(10.0) * se / mean


def convergence_iteration(mse_db: np.ndarray, steady_db: float, margin_db: float = 3.0, start: int = 0):
    """First iteration ``>= start`` at which the curve is within ``margin_db`` of ``steady_db``.

    Returns ``None`` if it never gets there.
    """
    hit = np.nonzero(mse_db[start:] <= steady_db + margin_db)[0]
    return int(hit[0]) + start if hit.size else None


def _ser_chunk(cfg, spec, indices, snr_list):
    t = run_equalizer_batch(cfg, spec, indices, snr_db=snr_list)
    return symbol_error_rate(t.decisions, t.truth, skip=cfg.n_train), t.mu_trace.max(), t.mu_trace.min()


def run_ser_sweep(cfg: ExperimentConfig, snr_list, dd_orders=None, jobs: Optional[int] = None):
    """SER against the true delayed symbols over the decision-directed segment.

    Returns ``{(dd_order, label): SerCurve}``. SNR points are sorted
    ascending. The ``mu_range`` attribute of each curve holds the extreme
    step sizes seen, for step-size safety checks.
    """
    snr = np.sort(np.asarray(snr_list, dtype=float))
    if snr.size == 0:
        raise ConfigurationError("need at least one SNR point")
    if dd_orders is None:
        dd_orders = (cfg.dd_order,)
    chunks = _chunks(cfg.realizations)
    out = {}
    for order in dd_orders:
        c = _replace_cfg(cfg, dd_order=int(order))
        for spec in c.algorithms:
            parts = _map_chunks(_ser_chunk, [(c, spec, idx, snr) for idx in chunks], jobs)
            curve = SerCurve(
                algorithm=spec.label,
                dd_order=int(order),
                snr_db=snr,
                per_realization=np.concatenate([p[0] for p in parts], axis=-1),
            )
            curve.mu_range = (min(p[2] for p in parts), max(p[1] for p in parts))
            out[(int(order), spec.label)] = curve
    return out


def _replace_cfg(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **changes)


def scatter_capture(trace: RealizationTrace, which: str, start: int, stop: int) -> np.ndarray:
    """Equalizer input (``"pre"``) or output (``"post"``) samples over [start, stop)."""
    n = len(trace)
    if not 0 <= start <= stop <= n:
        raise ConfigurationError(f"span [{start}, {stop}) outside trace of length {n}")
    if which == "pre":
        return trace.received[..., start:stop].copy()
    if which == "post":
        return trace.outputs[..., start:stop].copy()
    raise ConfigurationError(f"which must be 'pre' or 'post', got {which!r}")


@dataclass
class SysIdTrace:
    """System-identification run; ``msd[..., k]`` is the MSD before iteration k."""

    msd: np.ndarray
    mu: np.ndarray
    error: np.ndarray
    apriori_error: np.ndarray
    noise: np.ndarray


def run_sysid_validation(
    scenario: SysIdScenario,
    spec: AlgorithmSpec,
    n: int,
    rng: np.random.Generator,
    trials: int = 1,
    oracle: bool = False,
    h0=None,
) -> SysIdTrace:
    """Identify ``scenario.h_true`` from white Gaussian input.

    The desired signal is d(n) = h_true^H x(n) + v(n). With ``oracle=True``
    each iteration applies the generic update with the plug-in MSD-optimal
    step size computed from the true weight error; otherwise the filter runs
    through :func:`filter_step` with ``spec`` as configured.
    """
    h_true = scenario.h_true
    M, L = h_true.shape[-1], spec.L
    batch = (trials,)
    x = gaussian_complex(rng, scenario.input_variance, (trials, n))
    v = gaussian_complex(rng, scenario.noise_variance, (trials, n))
    signal_power = scenario.input_variance * np.sum(np.abs(h_true) ** 2, axis=-1)
    state = init_state(
        spec, M, batch, snr_linear=signal_power / max(scenario.noise_variance, 1e-300),
        noise_variance=scenario.noise_variance, h0=h0,
    )
    msd_out = np.empty((trials, n + 1))
    mu_out = np.empty((trials, n))
    e_out = np.empty((trials, n), dtype=complex)
    ea_out = np.empty((trials, n), dtype=complex)
    msd_out[:, 0] = msd(state.h, h_true)
    window = state.window
    d_hist = np.zeros(batch + (L,), dtype=complex)
    for k in range(n):
        h = state.h
        regressor = np.concatenate([x[:, k, None], state.window.buffer[:, : M - 1]], axis=-1)
        clean = filter_output(h_true, regressor)
        d = clean + v[:, k]
        ea_out[:, k] = clean - filter_output(h, regressor)
        if oracle:
            window = push_sample(state.window, x[:, k])
            d_hist = np.concatenate([d[:, None], d_hist[:, :-1]], axis=-1)
            X = regressor_matrix(window, M, L)
            e = error_vector(d_hist, X, h)
            W = weighting_matrix(spec, X)
            mu = oracle_optimal_mu(h_true - h, X, W, scenario.noise_variance)
            state.h = generic_update(h, X, W, e, np.maximum(mu, 0.0))
            state.window = window
            e_out[:, k] = e[:, 0]
            mu_out[:, k] = mu
        else:
            record, state = filter_step(state, spec, x[:, k], d)
            e_out[:, k] = record.prior_error
            mu_out[:, k] = record.mu_used
        msd_out[:, k + 1] = msd(state.h, h_true)
    return SysIdTrace(msd=msd_out, mu=mu_out, error=e_out, apriori_error=ea_out, noise=v)
