import numpy as np
import pytest

from helpers import (
    GRAD_EPS,
    KINK_MARGIN,
    frozen_case,
    min_pre_activation,
    reference_forward_counting,
    tiny_config,
)
from lightts import model
from lightts.errors import ConfigError, ShapeError
from lightts.ndcore import grad_check
from lightts.rng import SplitMix64, uniform_array
from lightts.train import mse_loss


class TestConfig:
    def test_divisibility_rejected_with_suggestions(self):
        with pytest.raises(ConfigError, match="C=5"):
            tiny_config(T=8, C=5)

    def test_conflicting_ablations_rejected(self):
        with pytest.raises(ConfigError, match="no_is"):
            tiny_config(ablation={"no_is", "no_cs"})

    def test_unknown_ablation_rejected(self):
        with pytest.raises(ConfigError):
            tiny_config(ablation={"no_xx"})

    def test_build_ablation(self):
        base = tiny_config()
        assert model.build_ablation(base, "full").ablation == frozenset()
        assert model.build_ablation(base, "no_cp").ablation == {"no_cp"}
        with pytest.raises(ConfigError):
            model.build_ablation(base, "bogus")

    def test_mix_height_shrinks_under_single_branch(self):
        assert tiny_config().mix_shape.H == 8
        assert tiny_config(ablation={"no_is"}).mix_shape.H == 4
        assert tiny_config(ablation={"no_cs"}).mix_shape.H == 4


class TestInit:
    def test_same_seed_bitwise_identical(self):
        cfg = tiny_config()
        a = model.init_params(cfg, seed=5)
        b = model.init_params(cfg, seed=5)
        for ta, tb in zip(a.tensors(), b.tensors()):
            assert ta.name == tb.name
            assert np.array_equal(ta.value, tb.value)

    def test_different_seeds_differ(self):
        cfg = tiny_config()
        a = model.init_params(cfg, seed=1)
        b = model.init_params(cfg, seed=2)
        assert any(not np.array_equal(ta.value, tb.value)
                   for ta, tb in zip(a.tensors(), b.tensors()))

    def test_no_cp_pins_channel_to_identity(self):
        cfg = tiny_config(ablation={"no_cp"})
        p = model.init_params(cfg, seed=3)
        assert np.array_equal(p.block_c.Wc.value, np.eye(cfg.N))
        assert not p.block_c.bc.value.any()

    def test_biases_zero_and_bounds(self):
        cfg = tiny_config()
        p = model.init_params(cfg, seed=9)
        assert not p.block_a.bt.value.any()
        assert np.abs(p.block_a.Wt.value).max() <= (1.0 / cfg.C) ** 0.5


class TestForward:
    def test_multi_step_shape_law(self):
        cfg = model.LightTSConfig(N=7, T=96, L=24, C=8, F=64, Fp_ab=16, Fp_c=16,
                                  mode="multi_step")
        p = model.init_params(cfg, seed=0)
        f, _ = model.forward(p, cfg, np.ones((7, 96)))
        assert f.shape == (24, 7)

    def test_single_step_shape_law(self):
        cfg = model.LightTSConfig(N=7, T=96, L=24, C=8, F=64, Fp_ab=16, Fp_c=16,
                                  mode="single_step")
        p = model.init_params(cfg, seed=0)
        f, _ = model.forward(p, cfg, np.ones((7, 96)))
        assert f.shape == (1, 7)

    def test_all_zero_params_give_zero_forecast(self):
        cfg = tiny_config()
        p = model.init_params(cfg, seed=4)
        for t in p.tensors():
            t.value[...] = 0.0
        f, _ = model.forward(p, cfg, np.arange(24.0).reshape(3, 8))
        assert not f.any()

    def test_shape_validation(self):
        cfg = tiny_config()
        p = model.init_params(cfg, seed=0)
        with pytest.raises(ShapeError):
            model.forward(p, cfg, np.ones((3, 9)))

    def test_batched_equals_per_window(self):
        cfg = tiny_config()
        p = model.init_params(cfg, seed=8)
        wins = uniform_array(SplitMix64(31), (5, 3, 8), -1.0, 1.0)
        stacked, _ = model.forward_batch(p, cfg, wins)
        for k in range(5):
            single, _ = model.forward(p, cfg, wins[k])
            assert np.allclose(single, stacked[k], atol=1e-12)

    def test_forecast_shape_for_every_variant(self):
        for variant in model.VARIANTS:
            cfg = model.build_ablation(tiny_config(), variant)
            p = model.init_params(cfg, seed=2)
            f, _ = model.forward(p, cfg, np.ones((3, 8)))
            assert f.shape == (2, 3)


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self):
        cfg = tiny_config()
        p = model.init_params(cfg, seed=6)
        p.zero_grads()
        f, cache = model.forward(p, cfg, np.ones((3, 8)))
        dW = model.backward(cache, np.zeros_like(f))
        assert not dW.any()
        assert all(not t.grad.any() for t in p.tensors())

    @pytest.mark.parametrize("variant", model.VARIANTS)
    def test_gradients_match_finite_differences(self, variant):
        cfg = model.build_ablation(tiny_config(), variant)
        params = model.init_params(cfg, seed=1)
        window, target = frozen_case(cfg, params)
        params.zero_grads()
        f, cache = model.forward(params, cfg, window)
        # oracle validity: every rectifier input clears the kink by >> eps
        assert min_pre_activation(cache) > KINK_MARGIN
        _, d_f = mse_loss(f, target)
        model.backward(cache, d_f)

        def loss_fn():
            ff, _ = model.forward(params, cfg, window)
            return mse_loss(ff, target)[0]

        err = grad_check(loss_fn, params.trainable(), eps=GRAD_EPS)
        assert err < 1e-4, f"{variant}: rel err {err}"

    def test_no_cp_channel_weights_get_no_gradient(self):
        cfg = tiny_config(ablation={"no_cp"})
        params = model.init_params(cfg, seed=1)
        window, target = frozen_case(cfg, params)
        params.zero_grads()
        f, cache = model.forward(params, cfg, window)
        model.backward(cache, mse_loss(f, target)[1])
        assert not params.block_c.Wc.grad.any()
        assert not params.block_c.bc.grad.any()

    def test_window_gradient_matches_finite_differences(self):
        cfg = tiny_config()
        params = model.init_params(cfg, seed=1)
        window, target = frozen_case(cfg, params)
        params.zero_grads()
        f, cache = model.forward(params, cfg, window)
        _, d_f = mse_loss(f, target)
        d_window = model.backward(cache, d_f)
        eps = GRAD_EPS
        for i in range(cfg.N):
            for j in range(cfg.T):
                saved = window[i, j]
                window[i, j] = saved + eps
                fp = mse_loss(model.forward(params, cfg, window)[0], target)[0]
                window[i, j] = saved - eps
                fm = mse_loss(model.forward(params, cfg, window)[0], target)[0]
                window[i, j] = saved
                numeric = (fp - fm) / (2 * eps)
                denom = max(abs(d_window[i, j]), abs(numeric), 1e-12)
                assert abs(d_window[i, j] - numeric) / denom < 1e-4


class TestMacCount:
    def test_tiny_config_matches_instrumented_counter(self):
        for variant in model.VARIANTS:
            cfg = model.build_ablation(tiny_config(), variant)
            p = model.init_params(cfg, seed=3)
            window = uniform_array(SplitMix64(40), (cfg.N, cfg.T), -1.0, 1.0)
            ref, mults = reference_forward_counting(cfg, p, window)
            ours, _ = model.forward(p, cfg, window)
            assert np.allclose(ref, ours, atol=1e-10)
            assert model.model_mac_count(cfg) == mults, variant

    def test_random_configs_match_instrumented_counter(self):
        gen = np.random.default_rng(515)
        for _ in range(20):
            T = int(gen.choice([4, 6, 8, 12]))
            divs = [d for d in range(1, T + 1) if T % d == 0]
            cfg0 = model.LightTSConfig(
                N=int(gen.integers(1, 5)), T=T, L=int(gen.integers(1, 4)),
                C=int(gen.choice(divs)), F=int(gen.integers(1, 6)),
                Fp_ab=int(gen.integers(1, 4)), Fp_c=int(gen.integers(1, 4)),
                mode=str(gen.choice(["multi_step", "single_step"])),
            )
            for variant in model.VARIANTS:
                cfg = model.build_ablation(cfg0, variant)
                p = model.init_params(cfg, seed=11)
                window = gen.normal(size=(cfg.N, cfg.T))
                ref, mults = reference_forward_counting(cfg, p, window)
                ours, _ = model.forward(p, cfg, window)
                assert np.allclose(ref, ours, atol=1e-9)
                assert model.model_mac_count(cfg) == mults

    def test_no_is_shrinks_part_one_and_mix_height(self):
        full = tiny_config()
        noi = tiny_config(ablation={"no_is"})
        from lightts.ieblock import mac_count

        per_branch = mac_count(full.branch_shape) + full.F * full.n_sub
        delta_mix = mac_count(full.mix_shape) - mac_count(noi.mix_shape)
        assert model.model_mac_count(full) - model.model_mac_count(noi) == \
            full.N * per_branch + delta_mix

    def test_channel_term_scales_with_N_squared(self):
        # the mix block's channel MACs are Fp_c * N^2: x4 when N doubles
        from lightts.ieblock import mac_count

        for n in (2, 3, 5):
            c1 = tiny_config(N=n)
            c2 = tiny_config(N=2 * n)
            term1 = mac_count(c1.mix_shape) - mac_count(c1.mix_shape, include_channel=False)
            term2 = mac_count(c2.mix_shape) - mac_count(c2.mix_shape, include_channel=False)
            assert term1 == c1.Fp_c * n * n
            assert term2 == 4 * term1

    def test_single_subsequence_minimizes_branch_channel_term(self):
        from lightts.ieblock import mac_count

        cfg = tiny_config(C=8)  # C = T: one sub-sequence, W = 1
        shape = cfg.branch_shape
        assert shape.W == 1
        channel = mac_count(shape) - mac_count(shape, include_channel=False)
        assert channel == cfg.Fp_ab


class TestAblationAccounting:
    def test_counts_match_live_params(self):
        for variant in model.VARIANTS:
            cfg = model.build_ablation(tiny_config(), variant)
            p = model.init_params(cfg, seed=1)
            assert p.trainable_count() == model.trainable_param_count(cfg)

    def test_no_cp_removes_exactly_N_squared_plus_N(self):
        full = tiny_config()
        nocp = tiny_config(ablation={"no_cp"})
        delta = model.trainable_param_count(full) - model.trainable_param_count(nocp)
        assert delta == full.N**2 + full.N

    def test_branch_ablations_strictly_smaller(self):
        full = model.trainable_param_count(tiny_config())
        assert model.trainable_param_count(tiny_config(ablation={"no_is"})) < full
        assert model.trainable_param_count(tiny_config(ablation={"no_cs"})) < full


class TestStructuralProperties:
    def test_series_independence_under_no_cp(self):
        cfg = tiny_config(ablation={"no_cp"})
        p = model.init_params(cfg, seed=12)
        window = uniform_array(SplitMix64(50), (3, 8), -1.0, 1.0)
        base, _ = model.forward(p, cfg, window)
        for n in range(cfg.N):
            w2 = window.copy()
            w2[n, :] = 0.0
            f2, _ = model.forward(p, cfg, w2)
            changed = np.any(f2 != base, axis=0)
            expect = [i == n for i in range(cfg.N)]
            assert changed.tolist() == expect

    def test_series_permutation_equivariance(self):
        # permuting input series while conjugating the mix block's channel
        # arrays permutes forecast columns identically
        cfg = tiny_config(N=4, T=8)
        p = model.init_params(cfg, seed=13)
        window = uniform_array(SplitMix64(51), (4, 8), -1.0, 1.0)
        perm = [2, 0, 3, 1]
        P = np.zeros((4, 4))
        for i, j in enumerate(perm):
            P[j, i] = 1.0  # column i of XP is column perm[i] of X
        base, _ = model.forward(p, cfg, window)

        p2 = p.copy()
        p2.block_c.Wc.value[...] = P.T @ p.block_c.Wc.value @ P
        p2.block_c.bc.value[...] = p.block_c.bc.value @ P
        f2, _ = model.forward(p2, cfg, window[perm, :])
        assert np.allclose(f2, base[:, perm], atol=1e-12)
