"""
Invariant checks behind ``vsspr validate``.

Each check returns a :class:`CheckResult`; the default sizes keep the whole
suite to well under a minute, and the acceptance tests call the same functions
with larger ensembles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adaptive_filters import (
    AlgorithmSpec,
    PsiMode,
    SysIdScenario,
    Variant,
    error_vector,
    filter_step,
    init_state,
    optimal_mu_terms,
    psi_value,
    vss_mu,
    weighting_matrix,
)
from .equalizer import ExperimentConfig, run_equalizer_batch, run_sysid_validation
from .errors import VssprError
from .numerics import (
    RegressorWindow,
    gaussian_complex,
    hermitian_pd_inverse,
    regressor_matrix,
    regularized_gram,
    rng_stream,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = ", ".join(f"{k}={_fmt(v)}" for k, v in self.details.items())
        return f"[{status}] {self.name}: {extra}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def scalar_lms(x, d, M, mu, normalize=False, eps=0.0):
    """Plain per-sample complex LMS/NLMS; returns the (n, M) weight trajectory."""
    h = np.zeros(M, dtype=complex)
    reg = np.zeros(M, dtype=complex)
    out = np.empty((len(x), M), dtype=complex)
    for n in range(len(x)):
        reg = np.concatenate(([x[n]], reg[:-1]))
        e = d[n] - np.vdot(h, reg)
        step = mu / (eps + np.vdot(reg, reg).real) if normalize else mu
        h = h + step * reg * np.conj(e)
        out[n] = h
    return out


def _trajectory(spec, x, d, M):
    state = init_state(spec, M)
    out = np.empty((len(x), M), dtype=complex)
    for n in range(len(x)):
        _, state = filter_step(state, spec, x[n], d[n])
        out[n] = state.h
    return out


def _sysid_stream(n, M, noise_variance, seed):
    rng = rng_stream(seed, 0)
    h_true = gaussian_complex(rng, 1.0 / M, M)
    x = gaussian_complex(rng, 1.0, n)
    v = gaussian_complex(rng, noise_variance, n)
    d = np.empty(n, dtype=complex)
    reg = np.zeros(M, dtype=complex)
    for k in range(n):
        reg = np.concatenate(([x[k]], reg[:-1]))
        d[k] = np.vdot(h_true, reg) + v[k]
    return x, d


def check_reductions(n_steps=2000, M=8, L=4, seed=1, tol=1e-12) -> CheckResult:
    """LMS/NLMS through the generic engine versus scalar loops; PRA(alpha=0) versus R-APA."""
    x, d = _sysid_stream(n_steps, M, 1e-3, seed)
    lms = _trajectory(AlgorithmSpec(Variant.LMS, mu=0.05), x, d, M)
    lms_ref = scalar_lms(x, d, M, 0.05)
    eps = 1e-4
    nlms = _trajectory(AlgorithmSpec(Variant.NLMS, mu=0.5, eps=eps), x, d, M)
    nlms_ref = scalar_lms(x, d, M, 0.5, normalize=True, eps=eps)
    rapa = _trajectory(AlgorithmSpec(Variant.RAPA, L=L, mu=0.3, eps=eps), x, d, M)
    pra0 = _trajectory(AlgorithmSpec(Variant.PRA, L=L, mu=0.3, eps=eps, alpha=0), x, d, M)
    dev = {
        "lms_dev": float(np.max(np.abs(lms - lms_ref))),
        "nlms_dev": float(np.max(np.abs(nlms - nlms_ref))),
        "pra0_rapa_dev": float(np.max(np.abs(pra0 - rapa))),
    }
    return CheckResult("reductions", all(v <= tol for v in dev.values()), {**dev, "steps": n_steps})


def check_projection(n_steps=1000, M=8, L=4, eps=1e-12, seed=2, tol=1e-6) -> CheckResult:
    """Noiseless affine projection with unit step zeroes the a-posteriori block error."""
    try:
        spec = AlgorithmSpec(Variant.RAPA, L=L, mu=1.0, eps=eps)
        x, d = _sysid_stream(n_steps, M, 0.0, seed)
        state = init_state(spec, M)
        worst = 0.0
        for n in range(n_steps):
            _, state = filter_step(state, spec, x[n], d[n])
            if n < L - 1:
                continue
            X = regressor_matrix(state.window, M, L)
            post = error_vector(state.d_history, X, state.h)
            worst = max(worst, np.linalg.norm(post) / np.linalg.norm(state.d_history))
    except VssprError as exc:
        return CheckResult("projection", False, {"error": f"{type(exc).__name__}: {exc}"})
    return CheckResult("projection", worst < tol, {"worst_relative_error": float(worst), "eps": eps})


def check_mu_bounds(realizations=10, n_dd=500, seed=3) -> CheckResult:
    """VSSPR step sizes stay in [0, mu_max) and the configuration gate rejects mu_max >= 2."""
    cfg = ExperimentConfig(realizations=realizations, n_dd=n_dd, base_seed=seed)
    spec = cfg.algorithm("VSSPR")
    mu = run_equalizer_batch(cfg, spec, range(realizations)).mu_trace
    in_range = bool(np.all(mu >= 0) and np.all(mu < spec.mu_max))
    gate = True
    for bad in (2.0, 2.5):
        try:
            AlgorithmSpec(Variant.VSSPR, L=4, mu_max=bad)
            gate = False
        except VssprError:
            pass
    p = np.linspace(0, 1e-2, 101)[:, None] * np.ones(3)
    monotone = bool(np.all(np.diff(vss_mu(p, 1e-4, spec.mu_max)) >= 0))
    return CheckResult(
        "mu_bounds",
        in_range and gate and monotone,
        {"mu_min": float(mu.min()), "mu_max_seen": float(mu.max()), "gate": gate, "monotone": monotone},
    )


def psi_estimates(draws=10_000, M=35, L=4, sigma_v2=1e-3, eps=1e-4, seed=4):
    """Adaptive-mode psi and the direct trace estimate over i.i.d. unit-variance input."""
    rng = rng_stream(seed, 0)
    buf = gaussian_complex(rng, 1.0, (draws, M + L - 1))
    X = regressor_matrix(RegressorWindow(buf), M, L)
    inv = hermitian_pd_inverse(regularized_gram(X, eps))
    direct = sigma_v2 * np.mean(np.real(np.trace(inv, axis1=-2, axis2=-1)))
    norms = np.sum(np.abs(X) ** 2, axis=-2)
    adaptive = np.mean(psi_value(PsiMode.adaptive(), L, sigma_v2=sigma_v2, recent_norms=norms))
    return float(adaptive), float(direct)


def check_psi(draws=10_000, tol=0.10, seed=4) -> CheckResult:
    adaptive, direct = psi_estimates(draws=draws, seed=seed)
    rel = abs(adaptive - direct) / direct
    from_snr = psi_value(PsiMode.from_snr(), 4, snr_linear=10 ** (30 / 10))
    ok = rel <= tol and from_snr == 0.004
    return CheckResult(
        "psi_monte_carlo",
        bool(ok),
        {"adaptive": adaptive, "direct": direct, "relative_gap": float(rel), "from_snr_30db": float(from_snr)},
    )


def optimal_mu_ensemble(trials=10_000, M=8, L=2, sigma_v2=0.05, eps=1e-4, seed=5, grid_step=1e-3):
    """Expectation-level optimal step versus grid maximization of the empirical MSD decrease.

    Returns ``(mu_formula, mu_grid)``. The grid side evaluates
    mean(||e||^2 - ||e - mu X W conj(err)||^2) literally for every grid point.
    """
    rng = rng_stream(seed, 0)
    spec = AlgorithmSpec(Variant.RAPA, L=L, mu=1.0, eps=eps)
    weight_err = gaussian_complex(rng, 1.0 / M, (trials, M))
    buf = gaussian_complex(rng, 1.0, (trials, M + L - 1))
    X = regressor_matrix(RegressorWindow(buf), M, L)
    W = weighting_matrix(spec, X)
    v = gaussian_complex(rng, sigma_v2, (trials, L))
    # err = d - h^H X with d = h_t^H X + v, so conj(err) = X^H (h_t - h) + conj(v)
    err_conj = (np.conj(np.swapaxes(X, -1, -2)) @ weight_err[..., None])[..., 0] + np.conj(v)
    direction = (X @ (W @ err_conj[..., None]))[..., 0]

    num, den, psi = optimal_mu_terms(weight_err, X, W, sigma_v2)
    mu_formula = num.mean() / (den.mean() + psi.mean())

    grid = np.arange(0.0, 2.0 + grid_step / 2, grid_step)
    before = np.sum(np.abs(weight_err) ** 2, axis=-1)
    decrease = np.empty(grid.size)
    for i, mu in enumerate(grid):
        after = np.sum(np.abs(weight_err - mu * direction) ** 2, axis=-1)
        decrease[i] = np.mean(before - after)
    return float(mu_formula), float(grid[np.argmax(decrease)])


def check_optimal_mu(trials=10_000, seed=5, grid_step=1e-3) -> CheckResult:
    mu_formula, mu_grid = optimal_mu_ensemble(trials=trials, seed=seed, grid_step=grid_step)
    dev = abs(mu_formula - mu_grid)
    return CheckResult(
        "optimal_mu_oracle",
        dev <= 2 * grid_step + 1e-12,
        {"mu_formula": mu_formula, "mu_grid": mu_grid, "deviation": dev, "grid_steps": dev / grid_step},
    )


def msd_descent(trials=500, n=200, M=8, L=2, noise_variance=1e-2, seed=6):
    """Trial-mean MSD under the oracle step and its standard error per iteration."""
    rng = rng_stream(seed, 0)
    h_true = gaussian_complex(rng_stream(seed, 1), 1.0 / M, (trials, M))
    scenario = SysIdScenario(h_true, input_variance=1.0, noise_variance=noise_variance)
    spec = AlgorithmSpec(Variant.RAPA, L=L, mu=1.0, eps=1e-4)
    trace = run_sysid_validation(scenario, spec, n, rng, trials=trials, oracle=True)
    mean = trace.msd.mean(axis=0)
    se = trace.msd.std(axis=0, ddof=1) / np.sqrt(trials)
    return mean, se


def check_msd_descent(trials=500, n=200, seed=6) -> CheckResult:
    mean, se = msd_descent(trials=trials, n=n, seed=seed)
    rises = np.diff(mean) - se[1:]
    worst = float(np.max(rises))
    return CheckResult(
        "msd_descent",
        worst <= 0,
        {"initial_msd": float(mean[0]), "final_msd": float(mean[-1]), "worst_rise_minus_se": worst},
    )


def run_validation(projection_eps=1e-12, quick=True):
    """Run every group; ``quick`` trims ensemble sizes for interactive use."""
    scale = 1 if quick else 5
    return [
        check_reductions(n_steps=2000 * scale),
        check_projection(eps=projection_eps),
        check_mu_bounds(),
        check_psi(),
        check_msd_descent(trials=500 * scale),
        check_optimal_mu(),
    ]
