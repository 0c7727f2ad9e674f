import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import crandn
from vsspr.adaptive_filters import (
    PSI_FLOOR,
    AlgorithmSpec,
    PsiMode,
    SysIdScenario,
    Variant,
    error_vector,
    filter_step,
    generic_update,
    init_state,
    msd,
    optimal_mu_terms,
    oracle_optimal_mu,
    pra_update,
    psi_value,
    vss_mu,
    vss_p_hat,
    weighting_matrix,
)
from vsspr.equalizer import run_sysid_validation
from vsspr.errors import ConfigurationError, NumericError, ParameterError
from vsspr.numerics import RegressorWindow, regressor_matrix, rng_stream
from vsspr.validation import check_projection, check_reductions, scalar_lms


def run(spec, x, d, M, **kw):
    state = init_state(spec, M, **kw)
    records, hs = [], []
    for n in range(len(x)):
        rec, state = filter_step(state, spec, x[n], d[n])
        records.append(rec)
        hs.append(state.h.copy())
    return records, np.array(hs), state


def sysid_data(rng, n, M, sigma=0.03):
    h_t = crandn(rng, M) / np.sqrt(M)
    x = crandn(rng, n)
    padded = np.concatenate([np.zeros(M - 1), x])
    d = np.array([np.vdot(h_t, padded[k : k + M][::-1]) for k in range(n)]) + sigma * crandn(rng, n)
    return h_t, x, d


class TestAlgorithmSpec:
    def test_single_tap_variants_force_L1(self):
        assert AlgorithmSpec(Variant.NLMS, L=4).L == 1

    def test_vss_apa_forces_alpha0(self):
        assert AlgorithmSpec(Variant.VSS_APA, L=3, mu_max=1.0).alpha == 0

    @pytest.mark.parametrize("mu_max", [0.0, 2.0, 2.5, -1.0])
    def test_mu_max_gate(self, mu_max):
        with pytest.raises(ParameterError, match="mu_max"):
            AlgorithmSpec(Variant.VSSPR, L=4, mu_max=mu_max)

    def test_bad_inputs(self):
        with pytest.raises(ParameterError):
            AlgorithmSpec("bogus")
        with pytest.raises(ParameterError):
            AlgorithmSpec(Variant.PRA, L=4, alpha=2)
        with pytest.raises(ParameterError):
            AlgorithmSpec(Variant.NLMS, mu=0.0)
        with pytest.raises(ParameterError, match="eps"):
            AlgorithmSpec(Variant.RAPA, L=2, eps=0.0)
        with pytest.raises(ParameterError):
            AlgorithmSpec(Variant.VSSPR, L=2, mu_max=1.0, beta=1.5)

    def test_plain_apa_allows_zero_eps(self):
        assert AlgorithmSpec(Variant.APA, L=2, eps=0.0).eps == 0.0

    def test_block_hold(self):
        assert AlgorithmSpec(Variant.PRA, L=4, alpha=1).block_hold == 3
        assert AlgorithmSpec(Variant.PRA, L=4, alpha=0).block_hold == 0
        assert AlgorithmSpec(Variant.RAPA, L=4).block_hold == 0

    def test_label(self):
        assert AlgorithmSpec(Variant.RAPA, L=2).label == "R-APA"
        assert AlgorithmSpec(Variant.RAPA, L=2, name="APA").label == "APA"

    def test_psi_mode_validation(self):
        with pytest.raises(ParameterError):
            PsiMode.fixed(0.0)
        with pytest.raises(ParameterError):
            PsiMode("other")


class TestErrorVector:
    def test_zero_weights(self, rng):
        d = crandn(rng, 3)
        np.testing.assert_array_equal(error_vector(d, crandn(rng, 5, 3), np.zeros(5)), d)

    def test_exact_model_gives_zero(self, rng):
        X, h = crandn(rng, 5, 3), crandn(rng, 5)
        d = np.array([np.vdot(h, X[:, j]) for j in range(3)])
        np.testing.assert_allclose(error_vector(d, X, h), 0, atol=1e-14)

    def test_element_loop_oracle(self, rng):
        X, h, d = crandn(rng, 7, 4), crandn(rng, 7), crandn(rng, 4)
        ref = [d[j] - sum(np.conj(h[i]) * X[i, j] for i in range(7)) for j in range(4)]
        np.testing.assert_allclose(error_vector(d, X, h), ref, rtol=1e-13)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ConfigurationError):
            error_vector(np.zeros(2), crandn(rng, 5, 3), np.zeros(5))


class TestWeightingMatrix:
    def test_lms_is_one(self, rng):
        np.testing.assert_array_equal(weighting_matrix(AlgorithmSpec(Variant.LMS), crandn(rng, 4, 1)), [[1]])

    def test_nlms_inverse_energy(self):
        X = np.array([[1.0], [1.0], [1.0], [1.0]], dtype=complex)
        W = weighting_matrix(AlgorithmSpec(Variant.NLMS, eps=1e-4), X)
        np.testing.assert_allclose(W, [[0.25]], rtol=1e-4)

    def test_rapa_matches_composed_inverse(self, rng):
        X = crandn(rng, 9, 3)
        eps = 1e-2
        G = np.array([[np.sum(np.conj(X[:, a]) * X[:, b]) for b in range(3)] for a in range(3)]) + eps * np.eye(3)
        W = weighting_matrix(AlgorithmSpec(Variant.RAPA, L=3, eps=eps), X)
        np.testing.assert_allclose(W @ G, np.eye(3), atol=1e-12)

    def test_apa_unregularized(self, rng):
        X = crandn(rng, 9, 3)
        W = weighting_matrix(AlgorithmSpec(Variant.APA, L=3, eps=0.0), X)
        np.testing.assert_allclose(W @ (X.conj().T @ X), np.eye(3), atol=1e-12)

    def test_apa_singular_cold_start(self):
        X = np.zeros((5, 2), dtype=complex)
        X[0, 0] = 1.0
        with pytest.raises(NumericError):
            weighting_matrix(AlgorithmSpec(Variant.APA, L=2, eps=0.0), X)


class TestGenericUpdate:
    def test_zero_error_keeps_weights(self, rng):
        h = crandn(rng, 4)
        out = generic_update(h, crandn(rng, 4, 2), np.eye(2), np.zeros(2), 0.7)
        np.testing.assert_array_equal(out, h)

    def test_lms_single_column(self, rng):
        h, x = crandn(rng, 4), crandn(rng, 4, 1)
        e = np.array([0.3 - 0.2j])
        out = generic_update(h, x, np.ones((1, 1)), e, 0.1)
        np.testing.assert_allclose(out, h + 0.1 * x[:, 0] * np.conj(e[0]), rtol=1e-15)

    def test_loop_oracle(self, rng):
        M, L = 6, 3
        h, X, e = crandn(rng, M), crandn(rng, M, L), crandn(rng, L)
        W = crandn(rng, L, L)
        ref = h.copy()
        for i in range(M):
            for a in range(L):
                for b in range(L):
                    ref[i] += 0.4 * X[i, a] * W[a, b] * np.conj(e[b])
        np.testing.assert_allclose(generic_update(h, X, W, e, 0.4), ref, rtol=1e-12)

    def test_negative_step(self, rng):
        with pytest.raises(ParameterError):
            generic_update(np.zeros(2), np.ones((2, 1)), np.ones((1, 1)), np.ones(1), -0.1)


class TestReductions:
    def test_lms_matches_scalar_loop(self, rng):
        h_t, x, d = sysid_data(rng, 400, 5)
        _, hs, _ = run(AlgorithmSpec(Variant.LMS, mu=0.05), x, d, 5)
        np.testing.assert_allclose(hs, scalar_lms(x, d, 5, 0.05), atol=1e-12)

    def test_nlms_matches_scalar_loop(self, rng):
        h_t, x, d = sysid_data(rng, 400, 5)
        _, hs, _ = run(AlgorithmSpec(Variant.NLMS, mu=0.4, eps=1e-3), x, d, 5)
        np.testing.assert_allclose(hs, scalar_lms(x, d, 5, 0.4, normalize=True, eps=1e-3), atol=1e-12)

    def test_pra_alpha0_is_rapa(self, rng):
        _, x, d = sysid_data(rng, 300, 6)
        _, a, _ = run(AlgorithmSpec(Variant.PRA, L=3, mu=0.3, alpha=0), x, d, 6)
        _, b, _ = run(AlgorithmSpec(Variant.RAPA, L=3, mu=0.3), x, d, 6)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_validation_group(self):
        assert check_reductions(n_steps=500).passed


class TestPraScheduling:
    def test_one_update_per_block(self, rng):
        _, x, d = sysid_data(rng, 40, 6)
        recs, hs, _ = run(AlgorithmSpec(Variant.PRA, L=4, mu=0.4, alpha=1), x, d, 6)
        prev = np.vstack([np.zeros((1, 6)), hs[:-1]])
        changed = np.any(hs != prev, axis=1)
        np.testing.assert_array_equal(changed, np.arange(40) % 4 == 0)
        np.testing.assert_array_equal([r.updated for r in recs], np.arange(40) % 4 == 0)
        np.testing.assert_array_equal([float(r.mu_used) for r in recs], np.where(np.arange(40) % 4 == 0, 0.4, 0.0))

    def test_update_value_on_boundary(self, rng):
        spec = AlgorithmSpec(Variant.PRA, L=2, mu=0.5, eps=1e-3)
        state = init_state(spec, 3)
        state.h = crandn(rng, 3)
        X, e = crandn(rng, 3, 2), crandn(rng, 2)
        new = pra_update(state, spec, X, e, 0.5)
        W = np.linalg.inv(1e-3 * np.eye(2) + X.conj().T @ X)
        np.testing.assert_allclose(new.h, state.h + 0.5 * X @ W @ np.conj(e), rtol=1e-12)
        assert new.block_phase == 1
        held = pra_update(new, spec, X, e, 0.5)
        np.testing.assert_array_equal(held.h, new.h)
        assert held.block_phase == 0


class TestVssPHat:
    def test_beta_one_freezes(self, rng):
        p = crandn(rng, 4)
        np.testing.assert_array_equal(vss_p_hat(p, crandn(rng, 4, 2), crandn(rng, 2), 1.0, 1e-4), p)

    def test_beta_zero_zero_error(self, rng):
        out = vss_p_hat(crandn(rng, 4), crandn(rng, 4, 2), np.zeros(2), 0.0, 1e-4)
        np.testing.assert_array_equal(out, 0)

    def test_unrolled_sum(self, rng):
        M, L, beta, eps, steps = 5, 2, 0.9, 1e-3, 50
        p0 = crandn(rng, M)
        Xs, es = crandn(rng, steps, M, L), crandn(rng, steps, L)
        p = p0
        for k in range(steps):
            p = vss_p_hat(p, Xs[k], es[k], beta, eps)
        ref = beta**steps * p0
        for k in range(steps):
            W = np.linalg.inv(eps * np.eye(L) + Xs[k].conj().T @ Xs[k])
            ref = ref + (1 - beta) * beta ** (steps - 1 - k) * (Xs[k] @ W @ np.conj(es[k]))
        np.testing.assert_allclose(p, ref, rtol=1e-10)

    def test_beta_range(self, rng):
        with pytest.raises(ParameterError):
            vss_p_hat(np.zeros(2), np.ones((2, 1)), np.ones(1), 1.2, 1e-4)


class TestVssMu:
    def test_zero_estimate(self):
        assert vss_mu(np.zeros(4), 1e-4, 1.7) == 0

    def test_half_at_psi(self):
        p = np.array([np.sqrt(1e-4), 0])
        assert vss_mu(p, 1e-4, 1.7) == pytest.approx(0.85, rel=1e-12)

    @given(st.lists(st.floats(0, 1e3), min_size=1, max_size=8), st.floats(1e-8, 10))
    def test_range(self, comps, psi):
        mu = vss_mu(np.array(comps, dtype=complex), psi, 1.7)
        assert 0 <= mu < 1.7

    @given(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(1e-8, 10))
    def test_monotone(self, a, b, psi):
        lo, hi = sorted((a, b))
        assert vss_mu(np.array([lo]), psi, 1.0) <= vss_mu(np.array([hi]), psi, 1.0)

    def test_nonpositive_psi(self):
        with pytest.raises(ParameterError):
            vss_mu(np.ones(2), 0.0, 1.0)


class TestPsi:
    def test_from_snr(self):
        assert psi_value(PsiMode.from_snr(), 4, snr_linear=1000.0) == 0.004

    def test_fixed(self):
        assert psi_value(PsiMode.fixed(1e-4), 4) == 1e-4

    def test_adaptive_formula(self):
        norms = np.array([2.0, 4.0, 0.0])
        expected = 3 * 0.1 * (0.5 + 0.25) / 2
        assert psi_value(PsiMode.adaptive(), 3, sigma_v2=0.1, recent_norms=norms) == pytest.approx(expected)

    def test_adaptive_floor(self):
        assert psi_value(PsiMode.adaptive(), 4, sigma_v2=0.1, recent_norms=np.zeros(4)) == PSI_FLOOR
        assert psi_value(PsiMode.adaptive(), 4, sigma_v2=0.0, recent_norms=np.ones(4)) == PSI_FLOOR

    def test_adaptive_tracks_trace_estimate(self):
        gen = np.random.default_rng(3)
        M, L, s2, eps, n = 35, 4, 1e-3, 1e-4, 4000
        buf = crandn(gen, n, M + L - 1)
        X = regressor_matrix(RegressorWindow(buf), M, L)
        direct = s2 * np.mean([np.trace(np.linalg.inv(eps * np.eye(L) + x.conj().T @ x)).real for x in X])
        norms = np.sum(np.abs(X) ** 2, axis=-2)
        adaptive = np.mean(psi_value(PsiMode.adaptive(), L, sigma_v2=s2, recent_norms=norms))
        assert abs(adaptive - direct) / direct <= 0.10

    def test_bad_inputs(self):
        with pytest.raises(ParameterError):
            psi_value(PsiMode.from_snr(), 4, snr_linear=0.0)
        with pytest.raises(ParameterError):
            psi_value(PsiMode.adaptive(), 4, sigma_v2=-1.0, recent_norms=np.ones(2))


def vsspr_by_hand(x, d, M, L, mu_max, beta, eps, psi):
    """Straight-line VSSPR: smoothing every sample, weights moved every L samples."""
    h = np.zeros(M, dtype=complex)
    p = np.zeros(M, dtype=complex)
    xbuf = np.zeros(M + L - 1, dtype=complex)
    dbuf = np.zeros(L, dtype=complex)
    hold = 0
    hs, mus = [], []
    for n in range(len(x)):
        xbuf = np.r_[x[n], xbuf[:-1]]
        dbuf = np.r_[d[n], dbuf[:-1]]
        X = np.column_stack([xbuf[j : j + M] for j in range(L)])
        e = np.array([dbuf[j] - np.vdot(h, X[:, j]) for j in range(L)])
        step = X @ np.linalg.solve(eps * np.eye(L) + X.conj().T @ X, np.conj(e))
        p = beta * p + (1 - beta) * step
        mu = mu_max * np.vdot(p, p).real / (np.vdot(p, p).real + psi)
        if hold == 0:
            h = h + mu * step
            hold = L - 1
            mus.append(mu)
        else:
            hold -= 1
            mus.append(0.0)
        hs.append(h.copy())
    return np.array(hs), np.array(mus)


class TestFilterStep:
    def test_zero_input(self):
        spec = AlgorithmSpec(Variant.VSSPR, L=3, mu_max=1.0, psi_mode=PsiMode.fixed(1e-3))
        recs, hs, _ = run(spec, np.zeros(10), np.zeros(10), 4)
        assert all(r.output == 0 and r.prior_error == 0 for r in recs)
        np.testing.assert_array_equal(hs, 0)

    def test_non_finite_input_leaves_state(self):
        spec = AlgorithmSpec(Variant.NLMS, mu=0.4)
        state = init_state(spec, 3)
        _, state = filter_step(state, spec, 1.0, 0.5)
        snapshot = (state.h.copy(), state.window.buffer.copy(), state.iteration)
        with pytest.raises(NumericError):
            filter_step(state, spec, np.nan, 0.5)
        with pytest.raises(NumericError):
            filter_step(state, spec, 1.0, np.inf)
        np.testing.assert_array_equal(state.h, snapshot[0])
        np.testing.assert_array_equal(state.window.buffer, snapshot[1])
        assert state.iteration == snapshot[2]

    def test_vsspr_against_straight_line_reference(self, rng):
        M, L, n = 4, 3, 10
        x, d = crandn(rng, n), crandn(rng, n)
        spec = AlgorithmSpec(Variant.VSSPR, L=L, mu_max=1.7, beta=0.9, eps=1e-2, psi_mode=PsiMode.fixed(1e-3))
        recs, hs, _ = run(spec, x, d, M)
        ref_h, ref_mu = vsspr_by_hand(x, d, M, L, 1.7, 0.9, 1e-2, 1e-3)
        np.testing.assert_allclose(hs, ref_h, rtol=1e-10, atol=1e-13)
        np.testing.assert_allclose([float(r.mu_used) for r in recs], ref_mu, rtol=1e-10, atol=1e-15)

    def test_prior_error_uses_weights_before_update(self, rng):
        spec = AlgorithmSpec(Variant.NLMS, mu=0.4)
        _, x, d = sysid_data(rng, 20, 3)
        state = init_state(spec, 3)
        reg = np.zeros(3, dtype=complex)
        for n in range(20):
            reg = np.r_[x[n], reg[:-1]]
            expected = d[n] - np.vdot(state.h, reg)
            rec, state = filter_step(state, spec, x[n], d[n])
            assert rec.prior_error == pytest.approx(expected, abs=1e-14)

    def test_batch_matches_individual(self, rng):
        spec = AlgorithmSpec(Variant.VSSPR, L=4, mu_max=1.5, psi_mode=PsiMode.adaptive())
        x, d = crandn(rng, 60, 3), crandn(rng, 60, 3)
        nv = np.array([0.01, 0.02, 0.03])
        _, hb, _ = run(spec, x, d, 5, batch_shape=(3,), noise_variance=nv)
        for b in range(3):
            _, hs, _ = run(spec, x[:, b], d[:, b], 5, noise_variance=nv[b])
            np.testing.assert_allclose(hb[:, b], hs, rtol=1e-12, atol=1e-15)

    def test_vss_nlms_updates_every_sample(self, rng):
        spec = AlgorithmSpec(Variant.VSS_NLMS, mu_max=1.0, psi_mode=PsiMode.fixed(1e-3))
        _, x, d = sysid_data(rng, 30, 3)
        recs, _, _ = run(spec, x, d, 3)
        assert all(r.updated for r in recs)
        assert all(float(r.mu_used) > 0 for r in recs[1:])

    def test_snr_psi_needs_snr(self):
        with pytest.raises(ConfigurationError):
            init_state(AlgorithmSpec(Variant.VSSPR, L=2, mu_max=1.0), 4)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_detected(self):
        spec = AlgorithmSpec(Variant.LMS, mu=10.0)
        state = init_state(spec, 2)
        with pytest.raises(NumericError, match="diverged"):
            for _ in range(2000):
                _, state = filter_step(state, spec, 100.0, 1.0)


class TestProjection:
    def test_unit_step_zeroes_a_posteriori_block(self):
        assert check_projection(n_steps=200).passed

    def test_zero_eps_reported(self):
        res = check_projection(n_steps=50, eps=0.0)
        assert not res.passed and "eps" in res.details["error"]


class TestOptimalMu:
    def test_zero_error(self, rng):
        X = crandn(rng, 5, 2)
        assert oracle_optimal_mu(np.zeros(5), X, np.eye(2), 0.1) == 0.0

    def test_noiseless_nlms_is_one(self, rng):
        x = crandn(rng, 6, 1)
        W = np.array([[1.0 / np.vdot(x, x).real]])
        eps = x[:, 0] * 0.7j  # error along the regressor
        assert oracle_optimal_mu(eps, x, W, 0.0) == pytest.approx(1.0, rel=1e-12)

    def test_terms_loop_oracle(self, rng):
        M, L = 4, 2
        eps, X, W = crandn(rng, M), crandn(rng, M, L), crandn(rng, L, L)
        B = [[sum(X[i, k] * W[k, j] for k in range(L)) for j in range(L)] for i in range(M)]
        C = [[sum(B[i][k] * np.conj(X[m, k]) for k in range(L)) for m in range(M)] for i in range(M)]
        Ce = [sum(C[i][m] * eps[m] for m in range(M)) for i in range(M)]
        num = sum(np.conj(eps[i]) * Ce[i] for i in range(M)).real
        den = sum(abs(c) ** 2 for c in Ce)
        psi = 0.3 * sum(abs(B[i][j]) ** 2 for i in range(M) for j in range(L))
        got = optimal_mu_terms(eps, X, W, 0.3)
        np.testing.assert_allclose(got, (num, den, psi), rtol=1e-12)

    def test_maximizes_single_sample_decrease(self, rng):
        M, L = 6, 2
        eps, X = crandn(rng, M), crandn(rng, M, L)
        W = np.linalg.inv(1e-4 * np.eye(L) + X.conj().T @ X)
        mu = oracle_optimal_mu(eps, X, W, 0.0)
        direction = X @ W @ (X.conj().T @ eps)
        grid = np.linspace(0, 2, 20001)
        dec = [np.sum(np.abs(eps) ** 2) - np.sum(np.abs(eps - m * direction) ** 2) for m in grid]
        assert abs(grid[int(np.argmax(dec))] - mu) <= 1e-4


class TestSysId:
    def test_msd_oracle(self, rng):
        h, ht = crandn(rng, 5), crandn(rng, 5)
        assert msd(h, ht) == pytest.approx(sum(abs(a - b) ** 2 for a, b in zip(h, ht)))
        assert msd(ht, SysIdScenario(ht)) == 0

    def test_noiseless_nlms_unit_step_monotone(self):
        gen = rng_stream(11, 0)
        h_t = crandn(np.random.default_rng(4), 4, 6)
        scen = SysIdScenario(h_t, noise_variance=0.0)
        tr = run_sysid_validation(scen, AlgorithmSpec(Variant.NLMS, mu=1.0, eps=1e-12), 200, gen, trials=4)
        assert np.all(np.diff(tr.msd, axis=-1) <= 1e-15)

    def test_error_decomposition(self):
        scen = SysIdScenario(crandn(np.random.default_rng(5), 6), noise_variance=1e-2)
        tr = run_sysid_validation(scen, AlgorithmSpec(Variant.NLMS, mu=0.5), 300, rng_stream(12, 0), trials=3)
        np.testing.assert_allclose(tr.error, tr.apriori_error + tr.noise, atol=1e-12)

    def test_start_at_truth_stays_near_noise_floor(self):
        s2 = 1e-3
        h_t = crandn(np.random.default_rng(6), 8) / np.sqrt(8)
        scen = SysIdScenario(h_t, noise_variance=s2)
        tr = run_sysid_validation(scen, AlgorithmSpec(Variant.NLMS, mu=0.5), 2000, rng_stream(13, 0), trials=20, h0=h_t)
        assert tr.msd[:, 0].max() == 0
        assert tr.msd.mean(axis=0).max() <= 10 * s2

    def test_oracle_step_beats_fixed_steps(self):
        trials, n, M, L, s2 = 300, 200, 8, 2, 1e-2
        h_t = crandn(np.random.default_rng(7), trials, M) / np.sqrt(M)
        scen = SysIdScenario(h_t, noise_variance=s2)
        spec = AlgorithmSpec(Variant.RAPA, L=L, mu=1.0)
        orc = run_sysid_validation(scen, spec, n, rng_stream(14, 0), trials=trials, oracle=True).msd[:, -1]
        for mu in np.arange(0.1, 1.01, 0.1):
            fixed = run_sysid_validation(
                scen, AlgorithmSpec(Variant.RAPA, L=L, mu=float(mu)), n, rng_stream(14, 0), trials=trials
            ).msd[:, -1]
            se = np.std(orc - fixed, ddof=1) / np.sqrt(trials)
            assert orc.mean() <= fixed.mean() + se, mu
