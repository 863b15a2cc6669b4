"""Unit tests for the diffusion primitives and the diffusion policies."""

# -*- coding: utf-8 -*-
import logging
import math
import unittest

import pytest
import torch
import torch.nn as nn

from pychdp.config import PolicyNetworkConfig
from pychdp.diffusion import (
    INFERENCE,
    TRAINING,
    NoiseSchedule,
    bc_loss,
    denoised_step,
    forward_noise,
    make_schedule,
    predict_x0,
    reverse_step,
    sample,
)
from pychdp.policies import (
    ContinuousPolicy,
    DeterministicLatentPolicy,
    DiscreteLatentPolicy,
    NoiseNetwork,
    timestep_embedding,
)

logging.disable(logging.CRITICAL)


class ZeroNet(nn.Module):
    """Predicts zero noise."""

    def forward(self, x, condition, steps):
        return torch.zeros_like(x)


class ConditionNet(nn.Module):
    """Tiny float64 predictor that depends smoothly on x and the condition."""

    def __init__(self, sample_dim: int, cond_dim: int):
        super().__init__()
        torch.manual_seed(3)
        f64 = torch.float64
        x_init = 0.1 * torch.randn(sample_dim, sample_dim, dtype=f64)
        c_init = 0.1 * torch.randn(cond_dim, sample_dim, dtype=f64)
        self.x_weight = nn.Parameter(x_init)
        self.c_weight = nn.Parameter(c_init)

    def forward(self, x, condition, steps):
        return torch.tanh(x @ self.x_weight + condition @ self.c_weight)


def interior_fraction(x: torch.Tensor) -> float:
    """Share of entries strictly inside the clamp bounds."""
    return float((x.abs() < 1.0).float().mean())


class TestSchedule(unittest.TestCase):
    """Noise schedule construction."""

    def test_variance_preserving_defaults(self):
        """Test the default schedule: N=15, increasing betas, small alpha_bar_N."""
        schedule = make_schedule(15, 0.1, 10.0)
        self.assertEqual(schedule.n_steps, 15)
        self.assertTrue(bool(((schedule.betas > 0) & (schedule.betas < 1)).all()))
        # betas increase with the step index
        self.assertTrue(bool((schedule.betas[1:] > schedule.betas[:-1]).all()))
        self.assertAlmostEqual(float(schedule.alpha_bars[-1]), 0.0064, delta=5e-4)
        self.assertLessEqual(float(schedule.alpha_bars[-1]), 0.1)

    def test_tables_are_consistent(self):
        """Test that alphas and alpha_bars agree with the betas."""
        for kind, start, end in [
            ("linear", 1e-4, 0.02),
            ("variance_preserving", 0.1, 10.0),
        ]:
            schedule = make_schedule(7, start, end, kind)
            torch.testing.assert_close(
                schedule.alphas, 1.0 - schedule.betas, atol=1e-10, rtol=0
            )
            cumulative = torch.cumprod(schedule.alphas, 0)
            torch.testing.assert_close(
                schedule.alpha_bars, cumulative, atol=1e-10, rtol=0
            )
            self.assertTrue(
                bool((schedule.alpha_bars[1:] < schedule.alpha_bars[:-1]).all())
            )

    def test_linear_schedule(self):
        """Test the two-step linear schedule against its hand-computed products."""
        schedule = make_schedule(2, 0.1, 0.2, "linear")
        torch.testing.assert_close(
            schedule.alpha_bars, torch.tensor([0.9, 0.72], dtype=torch.float64)
        )

    def test_short_linear_schedule_reaches_noise(self):
        """Test that a 15-step linear schedule ending at 0.35 ends below 0.1."""
        schedule = make_schedule(15, 0.001, 0.35, "linear")
        self.assertLessEqual(float(schedule.alpha_bars[-1]), 0.1)

    def test_single_step_schedule(self):
        """Test schedules of a single step."""
        schedule = make_schedule(1, 0.1, 10.0)
        self.assertEqual(schedule.n_steps, 1)
        self.assertTrue(0 < float(schedule.betas[0]) < 1)
        schedule = NoiseSchedule.from_betas([0.5])
        self.assertEqual(float(schedule.alphas[0]), 0.5)
        self.assertEqual(float(schedule.alpha_bars[0]), 0.5)

    def test_invalid_schedules(self):
        """Test that invalid step counts, kinds and endpoints are rejected."""
        with self.assertRaises(ValueError):
            make_schedule(0, 0.1, 10.0)
        with self.assertRaises(ValueError):
            make_schedule(5, 0.1, 10.0, kind="cosine")
        with self.assertRaises(ValueError):
            make_schedule(5, 0.5, 0.1)
        with self.assertRaises(ValueError):
            make_schedule(5, 0.1, 1.5, kind="linear")
        with self.assertRaises(ValueError):
            NoiseSchedule.from_betas([0.1, 1.0])
        with self.assertRaises(ValueError):
            NoiseSchedule.from_betas([])


class TestChain(unittest.TestCase):
    """Forward noising and single reverse steps."""

    def test_forward_noise_hand_value(self):
        """Test forward noising at alpha_bar = 0.25."""
        schedule = NoiseSchedule.from_betas([0.75])
        x0 = torch.tensor([[2.0]], dtype=torch.float64)
        eps = torch.tensor([[1.0]], dtype=torch.float64)
        # sqrt(0.25) * 2 + sqrt(0.75) * 1
        expected = 1.0 + math.sqrt(0.75)
        noised = float(forward_noise(x0, 1, eps, schedule))
        self.assertAlmostEqual(noised, expected, places=10)

        x0 = torch.tensor([[1.0]], dtype=torch.float64)
        eps = torch.tensor([[2.0]], dtype=torch.float64)
        self.assertAlmostEqual(
            float(forward_noise(x0, 1, eps, schedule)), 2.2320508, places=6
        )

    def test_forward_noise_per_row_steps(self):
        """Test forward noising with one step index per row."""
        schedule = make_schedule(4, 0.1, 0.4, "linear")
        x0 = torch.ones(3, 2, dtype=torch.float64)
        eps = torch.zeros(3, 2, dtype=torch.float64)
        steps = torch.tensor([1, 2, 4])
        out = forward_noise(x0, steps, eps, schedule)
        expected = torch.sqrt(schedule.alpha_bars[steps - 1])[:, None].expand(3, 2)
        torch.testing.assert_close(out, expected)

    def test_reverse_step_hand_values(self):
        """Test one reverse step with and without injected noise."""
        schedule = NoiseSchedule.from_betas([1 - 0.9 / 0.99, 0.01])
        x = torch.tensor([[1.0]], dtype=torch.float64)
        eps = torch.tensor([[0.5]], dtype=torch.float64)
        # (1 - 0.01 / sqrt(0.1) * 0.5) / sqrt(0.99)
        expected = (1.0 - 0.01 / math.sqrt(0.1) * 0.5) / math.sqrt(0.99)
        self.assertAlmostEqual(expected, 0.9891468, places=6)
        zero = torch.zeros_like(x)
        self.assertAlmostEqual(
            float(reverse_step(x, eps, 2, zero, schedule)), expected, places=10
        )
        one = torch.ones_like(x)
        self.assertAlmostEqual(
            float(reverse_step(x, eps, 2, one, schedule)), expected + 0.1, places=10
        )

    def test_single_step_chain_with_zero_predictor(self):
        """Test that a zero predictor only rescales by 1/sqrt(alpha)."""
        schedule = NoiseSchedule.from_betas([0.19])
        x = torch.tensor([[0.5]], dtype=torch.float64)
        out = reverse_step(x, torch.zeros_like(x), 1, torch.zeros_like(x), schedule)
        self.assertAlmostEqual(float(out), 0.5 / 0.9, places=10)

    def test_denoised_step_matches_reverse_step_inside_bounds(self):
        """Test that both step rules agree when the x0 estimate is not clipped."""
        schedule = make_schedule(4, 0.01, 0.05, "linear")
        generator = torch.Generator().manual_seed(1)
        x = 0.2 * torch.randn(16, 2, generator=generator, dtype=torch.float64)
        eps = 0.1 * torch.randn(16, 2, generator=generator, dtype=torch.float64)
        z = torch.randn(16, 2, generator=generator, dtype=torch.float64)
        for i in (4, 3, 2, 1):
            noise = z if i > 1 else torch.zeros_like(z)
            self.assertLess(float(predict_x0(x, eps, i, schedule).abs().max()), 1.0)
            torch.testing.assert_close(
                denoised_step(x, eps, i, noise, schedule),
                reverse_step(x, eps, i, noise, schedule),
            )

    def test_denoised_step_clips_the_estimate(self):
        """Test that the last denoised step returns the clipped x0 estimate."""
        schedule = NoiseSchedule.from_betas([0.19])
        x = torch.tensor([[3.0], [-0.45]], dtype=torch.float64)
        zero = torch.zeros_like(x)
        out = denoised_step(x, zero, 1, zero, schedule)
        torch.testing.assert_close(
            out, torch.tensor([[1.0], [-0.5]], dtype=torch.float64)
        )

    def test_step_index_out_of_range(self):
        """Test that step indices outside [1, N] are rejected."""
        schedule = make_schedule(3, 0.1, 10.0)
        x = torch.zeros(1, 1, dtype=torch.float64)
        with self.assertRaises(ValueError):
            reverse_step(x, x, 0, x, schedule)
        with self.assertRaises(ValueError):
            denoised_step(x, x, 4, x, schedule)
        with self.assertRaises(ValueError):
            forward_noise(x, 4, x, schedule)
        with self.assertRaises(ValueError):
            forward_noise(x, torch.tensor([0]), x, schedule)

    def test_shape_mismatch(self):
        """Test that mismatched shapes are rejected."""
        schedule = make_schedule(3, 0.1, 10.0)
        with self.assertRaises(ValueError):
            forward_noise(torch.zeros(2, 2), 1, torch.zeros(2, 3), schedule)
        with self.assertRaises(ValueError):
            reverse_step(
                torch.zeros(2, 2), torch.zeros(2, 3), 1, torch.zeros(2, 2), schedule
            )


class TestSampling(unittest.TestCase):
    """The full reverse chain."""

    def setUp(self):
        self.schedule = make_schedule(5, 0.1, 10.0)

    def test_output_is_clamped(self):
        """Test that samples stay in [-1, 1] with and without clipping."""
        for clip in (False, True):
            generator = torch.Generator().manual_seed(0)
            out = sample(
                ZeroNet(),
                torch.zeros(256, 3),
                4,
                self.schedule,
                generator,
                clip_denoised=clip,
            )
            self.assertEqual(out.shape, (256, 4))
            self.assertLessEqual(float(out.abs().max()), 1.0)

    def test_zero_predictor_matches_unrolled_loop(self):
        """Test the chain against a loop over the same recorded noise draws."""
        condition = torch.zeros(64, 1, dtype=torch.float64)
        out = sample(
            ZeroNet(),
            condition,
            3,
            self.schedule,
            torch.Generator().manual_seed(4),
        )

        generator = torch.Generator().manual_seed(4)
        shape = (64, 3)
        x = torch.randn(shape, generator=generator, dtype=torch.float64)
        for i in range(self.schedule.n_steps, 0, -1):
            alpha = float(self.schedule.alphas[i - 1])
            beta = float(self.schedule.betas[i - 1])
            x = x / math.sqrt(alpha)
            if i > 1:
                z = torch.randn(shape, generator=generator, dtype=torch.float64)
                x = x + math.sqrt(beta) * z
        torch.testing.assert_close(out, x.clamp(-1.0, 1.0))

    def test_same_seed_same_samples(self):
        """Test that the generator alone decides the samples."""
        net = NoiseNetwork(2, 3, PolicyNetworkConfig(hidden_widths=(16,)))
        condition = torch.randn(8, 3)
        a = sample(net, condition, 2, self.schedule, torch.Generator().manual_seed(7))
        b = sample(net, condition, 2, self.schedule, torch.Generator().manual_seed(7))
        c = sample(net, condition, 2, self.schedule, torch.Generator().manual_seed(8))
        self.assertTrue(torch.equal(a, b))
        self.assertFalse(torch.equal(a, c))

    def test_inference_mode_has_no_graph(self):
        """Test that only training mode keeps the autograd graph."""
        net = NoiseNetwork(2, 3, PolicyNetworkConfig(hidden_widths=(16,)))
        out = sample(net, torch.randn(4, 3), 2, self.schedule, mode=INFERENCE)
        self.assertFalse(out.requires_grad)
        out = sample(net, torch.randn(4, 3), 2, self.schedule, mode=TRAINING)
        self.assertTrue(out.requires_grad)

    def test_invalid_mode(self):
        """Test that unknown sampling modes are rejected."""
        with self.assertRaises(ValueError):
            sample(ZeroNet(), torch.zeros(1, 1), 1, self.schedule, mode="eval")

    def numeric_gradient(self, fn, tensor, h=1e-6):
        """Central differences of the scalar ``fn()`` with respect to ``tensor``."""
        numeric = torch.zeros_like(tensor)
        base = tensor.detach().clone()
        with torch.no_grad():
            for idx in range(base.numel()):
                bump = torch.zeros_like(base).view(-1)
                bump[idx] = h
                tensor.copy_(base + bump.view_as(base))
                plus = fn()
                tensor.copy_(base - bump.view_as(base))
                minus = fn()
                numeric.view(-1)[idx] = (plus - minus) / (2 * h)
            tensor.copy_(base)
        return numeric

    def test_training_gradient_matches_finite_difference(self):
        """Test d(sample)/d(condition) through the whole chain."""
        schedule = make_schedule(3, 1e-3, 3e-3, "linear")
        net = ConditionNet(2, 3)
        for clip in (False, True):
            with self.subTest(clip_denoised=clip):
                condition = torch.tensor(
                    [[0.2, -0.1, 0.4], [-0.3, 0.5, 0.1]], dtype=torch.float64
                )

                def run():
                    generator = torch.Generator().manual_seed(11)
                    return sample(
                        net, condition, 2, schedule, generator, TRAINING, clip
                    )

                condition.requires_grad_(True)
                out = run()
                mask = (out.detach().abs() < 0.99).to(out.dtype)
                self.assertGreater(float(mask.sum()), 0)
                (grad,) = torch.autograd.grad((out * mask).sum(), condition)
                condition.requires_grad_(False)

                numeric = self.numeric_gradient(
                    lambda: (run() * mask).sum(), condition
                )
                torch.testing.assert_close(grad, numeric, rtol=1e-4, atol=1e-7)

    def test_parameter_gradient_matches_finite_difference(self):
        """Test d(sample)/d(noise-net weights) on a ten-parameter predictor."""
        schedule = make_schedule(3, 1e-3, 3e-3, "linear")
        net = ConditionNet(2, 3)
        self.assertLessEqual(sum(p.numel() for p in net.parameters()), 16)
        condition = torch.tensor(
            [[0.2, -0.1, 0.4], [-0.3, 0.5, 0.1], [0.1, 0.1, -0.2]],
            dtype=torch.float64,
        )

        def run():
            generator = torch.Generator().manual_seed(12)
            return sample(net, condition, 2, schedule, generator, TRAINING, True)

        out = run()
        mask = (out.detach().abs() < 0.99).to(out.dtype)
        self.assertGreater(float(mask.sum()), 0)
        params = list(net.parameters())
        grads = torch.autograd.grad((out * mask).sum(), params)
        for param, grad in zip(params, grads):
            self.assertGreater(float(grad.abs().sum()), 0.0)
            numeric = self.numeric_gradient(lambda: (run() * mask).sum(), param)
            torch.testing.assert_close(grad, numeric, rtol=1e-4, atol=1e-7)


class TestBcLoss(unittest.TestCase):
    """Denoising loss."""

    def setUp(self):
        self.schedule = make_schedule(5, 0.1, 10.0)

    def test_zero_predictor_scores_about_one(self):
        """Test that predicting zero noise costs the noise variance."""
        generator = torch.Generator().manual_seed(0)
        loss = bc_loss(
            ZeroNet(),
            torch.zeros(4096, 2),
            torch.zeros(4096, 3),
            self.schedule,
            generator,
        )
        self.assertAlmostEqual(float(loss), 1.0, delta=0.05)

    def test_perfect_predictor_scores_zero(self):
        """Test that an oracle predictor has zero loss."""
        noise = torch.randn(16, 2)
        steps = torch.randint(1, 6, (16,))

        class Oracle(nn.Module):
            def forward(self, x, condition, s):
                return noise

        loss = bc_loss(
            Oracle(),
            torch.zeros(16, 1),
            torch.zeros(16, 2),
            self.schedule,
            steps=steps,
            noise=noise,
        )
        self.assertEqual(float(loss), 0.0)

    def test_loss_decreases_on_fixed_data(self):
        """Test that fitting both policies to fixed data lowers the loss."""
        torch.manual_seed(0)
        network = PolicyNetworkConfig(hidden_widths=(32, 32))
        discrete = DiscreteLatentPolicy(3, 2, self.schedule, network)
        continuous = ContinuousPolicy(3, 2, 1, self.schedule, network)
        data = torch.Generator().manual_seed(1)
        s = torch.randn(256, 3, generator=data)
        e = torch.tanh(s[:, :2])
        a_c = torch.tanh(s[:, 2:] - s[:, :1])

        generator = torch.Generator().manual_seed(2)
        fits = (
            (discrete, lambda: discrete.loss(s, e, generator)),
            (continuous, lambda: continuous.loss(s, e, a_c, generator)),
        )
        for policy, loss_fn in fits:
            optimizer = torch.optim.Adam(policy.parameters(), lr=1e-3)
            losses = []
            for _ in range(500):
                optimizer.zero_grad()
                loss = loss_fn()
                loss.backward()
                optimizer.step()
                losses.append(float(loss.detach()))
            windows = [sum(losses[i : i + 100]) / 100 for i in range(0, 500, 100)]
            self.assertLess(windows[-1], 0.8 * windows[0])
            for before, after in zip(windows, windows[1:]):
                self.assertLessEqual(after, before + 0.02)

    def test_empty_batch_is_rejected(self):
        """Test that an empty batch raises."""
        with self.assertRaises(ValueError):
            bc_loss(ZeroNet(), torch.zeros(0, 2), torch.zeros(0, 3), self.schedule)

    def test_batch_mismatch_is_rejected(self):
        """Test that condition and x0 batches must match."""
        with self.assertRaises(ValueError):
            bc_loss(ZeroNet(), torch.zeros(3, 2), torch.zeros(4, 3), self.schedule)


class TestPolicies(unittest.TestCase):
    """Shapes, conditioning and dimension checks of the policy wrappers."""

    def setUp(self):
        self.schedule = make_schedule(4, 0.1, 10.0)
        self.network = PolicyNetworkConfig(hidden_widths=(32, 32))

    def test_timestep_embedding_shape(self):
        """Test the sinusoidal embedding shape, including odd widths."""
        emb = timestep_embedding(torch.tensor([1, 2, 3]), 7)
        self.assertEqual(emb.shape, (3, 7))
        self.assertFalse(torch.equal(emb[0], emb[1]))

    def test_sample_shapes_and_bounds(self):
        """Test latent and action shapes and bounds."""
        discrete = DiscreteLatentPolicy(5, 8, self.schedule, self.network)
        continuous = ContinuousPolicy(5, 8, 3, self.schedule, self.network)
        s = torch.randn(10, 5)
        e = discrete.sample_latent(s)
        a = continuous.sample_action(s, e)
        self.assertEqual(e.shape, (10, 8))
        self.assertEqual(a.shape, (10, 3))
        self.assertLessEqual(float(e.abs().max()), 1.0)
        self.assertLessEqual(float(a.abs().max()), 1.0)

    def test_dimension_mismatch(self):
        """Test that wrong state, codeword and action widths raise."""
        continuous = ContinuousPolicy(5, 8, 3, self.schedule, self.network)
        with self.assertRaises(ValueError):
            continuous.sample_action(torch.randn(2, 5), torch.randn(2, 7))
        with self.assertRaises(ValueError):
            continuous.loss(torch.randn(2, 5), torch.randn(2, 8), torch.randn(2, 2))

    def test_default_policies_sample_inside_the_bounds(self):
        """Test that clipped chains keep most fresh samples off the clamp."""
        torch.manual_seed(0)
        schedule = make_schedule(15, 0.1, 10.0)
        network = PolicyNetworkConfig()
        discrete = DiscreteLatentPolicy(4, 8, schedule, network)
        continuous = ContinuousPolicy(4, 8, 1, schedule, network)
        s = torch.randn(2000, 4, generator=torch.Generator().manual_seed(1))
        generator = torch.Generator().manual_seed(2)
        with torch.no_grad():
            e = discrete.sample_latent(s, generator)
            a = continuous.sample_action(s, e, generator)
            unclipped = sample(discrete.noise_net, s, 8, schedule, generator)
        self.assertGreater(interior_fraction(e), 0.3)
        self.assertGreater(interior_fraction(a), 0.3)
        self.assertLess(interior_fraction(unclipped), 0.15)

    def test_codeword_gradient_reaches_condition(self):
        """Test that the sampled action depends differentiably on e_k."""
        torch.manual_seed(0)
        continuous = ContinuousPolicy(2, 3, 1, self.schedule, self.network)
        e_k = torch.randn(64, 3, requires_grad=True)
        generator = torch.Generator().manual_seed(0)
        a = continuous.sample_action(torch.randn(64, 2), e_k, generator, TRAINING)
        self.assertGreater(interior_fraction(a.detach()), 0.0)
        (grad,) = torch.autograd.grad(a.sum(), e_k)
        self.assertGreater(float(grad.abs().sum()), 0.0)

    def test_conditioning_is_live(self):
        """Test that swapping the codeword with fixed noise changes the action."""
        torch.manual_seed(0)
        continuous = ContinuousPolicy(2, 3, 1, self.schedule, self.network)
        s = torch.zeros(256, 2)
        first = continuous.sample_action(
            s, torch.full((256, 3), 0.5), torch.Generator().manual_seed(3)
        )
        second = continuous.sample_action(
            s, torch.full((256, 3), -0.5), torch.Generator().manual_seed(3)
        )
        self.assertFalse(torch.equal(first, second))

    def test_zero_predictor_ignores_the_codeword(self):
        """Test that a zero predictor makes the action independent of e_k."""
        continuous = ContinuousPolicy(
            2, 3, 1, self.schedule, self.network, noise_net=ZeroNet()
        )
        s = torch.zeros(32, 2)
        first = continuous.sample_action(
            s, torch.full((32, 3), 0.5), torch.Generator().manual_seed(3)
        )
        second = continuous.sample_action(
            s, torch.full((32, 3), -0.5), torch.Generator().manual_seed(3)
        )
        self.assertTrue(torch.equal(first, second))

    @pytest.mark.slow
    def test_diffusion_fits_two_modes_but_regression_does_not(self):
        """Test bimodal 1-D data at +/-0.8 with a constant condition."""
        torch.manual_seed(0)
        schedule = make_schedule(15, 0.1, 10.0)
        network = PolicyNetworkConfig(hidden_widths=(128, 128))
        diffusion = DiscreteLatentPolicy(1, 1, schedule, network)
        regression = DeterministicLatentPolicy(1, 1, network)
        generator = torch.Generator().manual_seed(0)
        opt_d = torch.optim.Adam(diffusion.parameters(), lr=1e-3)
        opt_r = torch.optim.Adam(regression.parameters(), lr=1e-3)
        s = torch.zeros(256, 1)
        for _ in range(4000):
            signs = torch.randint(0, 2, (256, 1), generator=generator) * 2 - 1
            e = 0.8 * signs.float()
            for policy, opt in ((diffusion, opt_d), (regression, opt_r)):
                opt.zero_grad()
                policy.loss(s, e, generator).backward()
                opt.step()

        samples = diffusion.sample_latent(torch.zeros(2000, 1), generator)
        near_plus = float(((samples - 0.8).abs() < 0.2).float().mean())
        near_minus = float(((samples + 0.8).abs() < 0.2).float().mean())
        self.assertGreaterEqual(near_plus, 0.25)
        self.assertGreaterEqual(near_minus, 0.25)

        point = regression.sample_latent(torch.zeros(2000, 1))
        self.assertLess(float(((point - 0.8).abs() < 0.2).float().mean()), 0.05)


if __name__ == "__main__":
    unittest.main()
