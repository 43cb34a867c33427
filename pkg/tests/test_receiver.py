import numpy as np
import pytest
from conftest import generator_for, random_frame, reference_receive

from dlcstc.channel import NoiseSpec, draw_realization, rng_for
from dlcstc.codegen import solve_amplifiers_crosstalk, build_generators_crosstalk
from dlcstc.config import DelayProfile, SchemeConfig
from dlcstc.modem import QPSK_POINTS, qpsk_modulate
from dlcstc.receiver import (
    EquivalentModel,
    assemble_destination,
    equivalent_model,
    ml_detect,
    mmse_dfe_detect,
)
from dlcstc.relaysim import RelayTrace

CFG = SchemeConfig.for_scheme("fd_crosstalk")
QUIET = NoiseSpec(0.0, 0.0)

ALL_SCHEMES = ["fd_crosstalk", "fd_loop", "hd", "self_coding", "direct", "fd_crosstalk_dl", "fd_loop_dl"]


def make_trace(seqs):
    return RelayTrace(transmitted=np.asarray(seqs), received_clean=np.zeros_like(np.asarray(seqs)))


class TestAssemble:
    def test_plain_superposition(self):
        ch = draw_realization(1)
        ch = type(ch)(**{**ch.__dict__, "dst_lags": np.zeros(2, dtype=np.int64)})
        t = np.vstack([np.ones(CFG.frame_len), 2 * np.ones(CFG.frame_len)]).astype(np.complex128)
        y = assemble_destination(make_trace(t), ch, QUIET, CFG, seed=0)
        expect = ch.h_rd[0] * 1 + ch.h_rd[1] * 2
        np.testing.assert_allclose(y[: CFG.frame_len], expect, atol=1e-12)
        np.testing.assert_allclose(y[CFG.frame_len :], 0, atol=1e-12)

    def test_lag_shifts_contribution(self):
        ch = draw_realization(2)
        ch = type(ch)(**{**ch.__dict__, "dst_lags": np.array([1, 0], dtype=np.int64)})
        t = np.zeros((2, CFG.frame_len), dtype=np.complex128)
        t[0, 0] = 1.0
        y = assemble_destination(make_trace(t), ch, QUIET, CFG, seed=0)
        assert y[0] == 0
        assert y[1] == pytest.approx(ch.h_rd[0])

    def test_energy_accounting(self):
        rng = rng_for(3, 0)
        t = np.vstack(
            [qpsk_modulate(rng.integers(0, 2, 2 * CFG.frame_len))[: CFG.frame_len] for _ in range(2)]
        )
        sigma2_d = 0.3
        total = 0.0
        n_trials = 10_000
        for i in range(n_trials):
            ch = draw_realization(i + 10)
            y = assemble_destination(make_trace(t), ch, NoiseSpec(0.0, sigma2_d), CFG, seed=i)
            total += np.sum(np.abs(y) ** 2)
        predicted = np.sum(np.abs(t) ** 2) + sigma2_d * CFG.window_len  # E|h_rd|^2 = 1
        assert total / n_trials == pytest.approx(predicted, rel=0.02)


class TestEquivalentModel:
    def test_zero_relay_noise_gives_scaled_identity(self):
        ch = draw_realization(4)
        amps = solve_amplifiers_crosstalk(ch, CFG)
        gen = build_generators_crosstalk(ch, amps, CFG)
        model = equivalent_model(gen, ch, NoiseSpec(0.0, 0.7), CFG)
        np.testing.assert_allclose(model.noise_cov, 0.7 * np.eye(CFG.window_len), atol=1e-12)

    @pytest.mark.parametrize("scheme", ALL_SCHEMES)
    def test_matrix_matches_noiseless_pipeline(self, scheme):
        cfg = SchemeConfig.for_scheme(scheme)
        worst = 0.0
        for seed in range(40):
            ch = draw_realization(seed + 100)
            gen = generator_for(scheme, ch, cfg)
            model = equivalent_model(gen, ch, QUIET, cfg)
            rng = rng_for(seed, 7)
            fr = random_frame(rng, cfg)
            zero_w = np.zeros((2, cfg.frame_len), dtype=np.complex128)
            y_ref = reference_receive(gen, fr, ch, QUIET, cfg, rng, relay_noise=zero_w)
            worst = max(worst, np.max(np.abs(model.h_matrix @ fr.data - y_ref)))
        assert worst < 1e-9

    def test_covariance_is_hermitian_psd_above_floor(self):
        ch = draw_realization(5)
        gen = generator_for("fd_crosstalk", ch, CFG)
        model = equivalent_model(gen, ch, NoiseSpec(0.2, 0.05), CFG)
        r = model.noise_cov
        np.testing.assert_allclose(r, r.conj().T, atol=1e-12)
        eigs = np.linalg.eigvalsh(r - 0.05 * np.eye(r.shape[0]))
        assert eigs.min() > -1e-12

    def test_whitened_noise_has_unit_diagonal(self):
        cfg = CFG
        ch = draw_realization(8)
        gen = generator_for("fd_crosstalk", ch, cfg)
        noise = NoiseSpec(0.4, 0.15)
        model = equivalent_model(gen, ch, noise, cfg)
        chol = np.linalg.cholesky(model.noise_cov)
        rng = rng_for(8, 14)
        fr = type(random_frame(rng, cfg))(
            data=np.zeros(cfg.n_data, dtype=np.complex128),
            padded=np.zeros(cfg.frame_len, dtype=np.complex128),
        )
        n = 4000  # ~1.1e5 whitened samples over the window
        acc = np.zeros(cfg.window_len)
        for i in range(n):
            y = reference_receive(gen, fr, ch, noise, cfg, rng)
            w = np.linalg.solve(chol, y)
            acc += np.abs(w) ** 2
        diag = acc / n
        assert np.max(np.abs(diag - 1.0)) < 0.05

    def test_covariance_matches_monte_carlo(self):
        cfg = CFG
        ch = draw_realization(6)
        gen = generator_for("fd_crosstalk", ch, cfg)
        noise = NoiseSpec(0.5, 0.1)
        model = equivalent_model(gen, ch, noise, cfg)
        rng = rng_for(6, 8)
        fr = type(random_frame(rng, cfg))(
            data=np.zeros(cfg.n_data, dtype=np.complex128),
            padded=np.zeros(cfg.frame_len, dtype=np.complex128),
        )
        n = 30_000
        ys = np.empty((n, cfg.window_len), dtype=np.complex128)
        for i in range(n):
            ys[i] = reference_receive(gen, fr, ch, noise, cfg, rng)
        emp = ys.conj().T @ ys / n
        emp = emp.T  # E[y y^H]
        diag_ref = np.diag(model.noise_cov).real
        diag_emp = np.diag(emp).real
        assert np.max(np.abs(diag_emp - diag_ref) / diag_ref) < 0.05


class TestDetectors:
    def small_model(self, seed, scheme="fd_loop", n_data=4):
        cfg = SchemeConfig.for_scheme(scheme, n_data=n_data, delays=DelayProfile(max_lag=1))
        ch = draw_realization(seed, cfg.delays)
        gen = generator_for(scheme, ch, cfg)
        return cfg, ch, gen

    def test_noiseless_exact_recovery(self):
        cfg, ch, gen = self.small_model(21, n_data=6)
        tiny = NoiseSpec(1e-20, 1e-20)
        model = equivalent_model(gen, ch, tiny, cfg)
        rng = rng_for(21, 9)
        fr = random_frame(rng, cfg)
        y = model.h_matrix @ fr.data
        out = mmse_dfe_detect(y, model)
        np.testing.assert_allclose(out, fr.data, atol=1e-6)

    def test_ml_noiseless_recovery_and_metric_scan(self):
        cfg, ch, gen = self.small_model(22, n_data=3)
        model = equivalent_model(gen, ch, NoiseSpec(1e-3, 1e-3), cfg)
        rng = rng_for(22, 10)
        fr = random_frame(rng, cfg)
        y = model.h_matrix @ fr.data
        out = ml_detect(y, model)
        np.testing.assert_allclose(out, fr.data, atol=1e-9)
        # exhaustive scan oracle: returned candidate attains the global minimum
        chol = np.linalg.cholesky(model.noise_cov)
        yn = y + 0.3 * (rng.standard_normal(y.size) + 1j * rng.standard_normal(y.size))
        best = ml_detect(yn, model)
        metric_best = None
        lowest = np.inf
        import itertools

        for cand in itertools.product(QPSK_POINTS, repeat=3):
            cand = np.array(cand)
            resid = np.linalg.solve(chol, yn - model.h_matrix @ cand)
            m = float(np.vdot(resid, resid).real)
            if m < lowest:
                lowest, metric_best = m, cand
        np.testing.assert_allclose(best, metric_best, atol=1e-12)

    def test_ml_identity_covariance_is_nearest_codeword(self):
        rng = rng_for(23, 11)
        h = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
        model = EquivalentModel(h_matrix=h, noise_cov=np.eye(6), window_len=6)
        y = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        best = ml_detect(y, model)
        import itertools

        dists = {
            tuple(np.round(np.array(c), 6)): np.linalg.norm(y - h @ np.array(c))
            for c in itertools.product(QPSK_POINTS, repeat=3)
        }
        assert np.linalg.norm(y - h @ best) == pytest.approx(min(dists.values()))

    def test_ml_guard_on_large_frames(self):
        cfg, ch, gen = self.small_model(24, n_data=8)
        model = equivalent_model(gen, ch, NoiseSpec(1e-3, 1e-3), cfg)
        with pytest.raises(ValueError):
            ml_detect(np.zeros(model.window_len), model)

    def test_dfe_tracks_ml_at_high_snr(self):
        errors_ml = errors_dfe = 0
        match = total = 0
        for seed in range(150):
            cfg, ch, gen = self.small_model(seed + 300)
            noise = NoiseSpec(10 ** (-25 / 10), 10 ** (-25 / 10))
            model = equivalent_model(gen, ch, noise, cfg)
            rng = rng_for(seed, 12)
            fr = random_frame(rng, cfg)
            y = reference_receive(gen, fr, ch, noise, cfg, rng)
            dec_ml = ml_detect(y, model)
            dec_dfe = mmse_dfe_detect(y, model)
            errors_ml += np.count_nonzero(dec_ml != fr.data)
            errors_dfe += np.count_nonzero(dec_dfe != fr.data)
            match += np.count_nonzero(dec_ml == dec_dfe)
            total += cfg.n_data
        assert errors_ml <= errors_dfe + 2
        assert match / total > 0.95

    def test_genie_not_worse_than_decision(self):
        genie = decision = 0
        for seed in range(400):
            cfg, ch, gen = self.small_model(seed + 900, n_data=6)
            noise = NoiseSpec(10 ** (-0.8), 10 ** (-0.8))
            model = equivalent_model(gen, ch, noise, cfg)
            rng = rng_for(seed, 13)
            fr = random_frame(rng, cfg)
            y = reference_receive(gen, fr, ch, noise, cfg, rng)
            dec = mmse_dfe_detect(y, model)
            gen_dec = mmse_dfe_detect(y, model, feedback="genie", true_symbols=fr.data)
            decision += np.count_nonzero(dec != fr.data)
            genie += np.count_nonzero(gen_dec != fr.data)
        assert genie <= decision * 1.05 + 2

    def test_genie_requires_truth(self):
        cfg, ch, gen = self.small_model(25)
        model = equivalent_model(gen, ch, NoiseSpec(1e-2, 1e-2), cfg)
        with pytest.raises(ValueError):
            mmse_dfe_detect(np.zeros(model.window_len), model, feedback="genie")
