"""Denoising-diffusion primitives shared by both policies."""

# -*- coding: utf-8 -*-
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import torch
import torch.nn.functional as F

logger = logging.getLogger(__name__)

# (current sample, condition, step index) -> predicted noise
NoisePredictor = Callable[[torch.Tensor, torch.Tensor, torch.Tensor], torch.Tensor]

SCHEDULE_KINDS = ("linear", "variance_preserving")
INFERENCE = "inference"
TRAINING = "training"


@dataclass(frozen=True)
class NoiseSchedule:
    """The beta/alpha/alpha-bar tables of a diffusion chain.

    Tables are float64 and indexed from 0, so step ``i`` (1-based) lives at
    position ``i - 1``.
    """

    betas: torch.Tensor
    alphas: torch.Tensor
    alpha_bars: torch.Tensor
    kind: str = "custom"

    @property
    def n_steps(self) -> int:
        """Number of diffusion steps N."""
        return int(self.betas.shape[0])

    @classmethod
    def from_betas(
        cls, betas: Union[Sequence[float], torch.Tensor], kind: str = "custom"
    ) -> "NoiseSchedule":
        """Build a schedule from a raw beta vector (checkpoints store only this)."""
        betas = torch.as_tensor(betas, dtype=torch.float64).flatten().clone()
        if betas.numel() < 1:
            raise ValueError("A noise schedule needs at least one step")
        if not bool(((betas > 0) & (betas < 1)).all()):
            raise ValueError(f"Every beta must lie in (0, 1), got {betas.tolist()}")
        alphas = 1.0 - betas
        return cls(
            betas=betas,
            alphas=alphas,
            alpha_bars=torch.cumprod(alphas, dim=0),
            kind=kind,
        )

    def check_step(self, i: int) -> None:
        """Raise if ``i`` is not a valid 1-based step index."""
        if not 1 <= i <= self.n_steps:
            raise ValueError(f"Step index {i} outside [1, {self.n_steps}]")


def make_schedule(
    n_steps: int,
    beta_start: float,
    beta_end: float,
    kind: str = "variance_preserving",
) -> NoiseSchedule:
    """Create a noise schedule.

    Args:
    ----
        n_steps: Number of diffusion steps N (>= 1).
        beta_start: First beta for ``linear``; minimum continuous-time rate
            for ``variance_preserving``.
        beta_end: Last beta for ``linear``; maximum rate for
            ``variance_preserving``.
        kind: ``linear`` or ``variance_preserving``.

    Returns:
    -------
        A NoiseSchedule whose betas all lie in (0, 1).

    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if kind not in SCHEDULE_KINDS:
        raise ValueError(f"Unknown schedule kind {kind!r}, expected {SCHEDULE_KINDS}")
    if not 0 < beta_start <= beta_end:
        raise ValueError(
            f"Schedule endpoints must satisfy 0 < start <= end, "
            f"got {beta_start}, {beta_end}"
        )

    if kind == "linear":
        if beta_end >= 1:
            raise ValueError(f"Linear schedule endpoints must be < 1, got {beta_end}")
        betas = torch.linspace(beta_start, beta_end, n_steps, dtype=torch.float64)
    else:
        i = torch.arange(1, n_steps + 1, dtype=torch.float64)
        betas = 1.0 - torch.exp(
            -beta_start / n_steps
            - (beta_end - beta_start) * (2 * i - 1) / (2 * n_steps**2)
        )

    schedule = NoiseSchedule.from_betas(betas, kind=kind)
    logger.debug(
        "Built %s schedule: N=%d, alpha_bar_N=%.4g",
        kind,
        n_steps,
        float(schedule.alpha_bars[-1]),
    )
    return schedule


def _table(values: torch.Tensor, like: torch.Tensor) -> torch.Tensor:
    return values.to(dtype=like.dtype, device=like.device)


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(
            f"Dimension mismatch for {what}: {tuple(a.shape)} vs {tuple(b.shape)}"
        )


def forward_noise(
    x0: torch.Tensor,
    i: Union[int, torch.Tensor],
    eps: torch.Tensor,
    schedule: NoiseSchedule,
) -> torch.Tensor:
    """Noise ``x0`` to step ``i``: sqrt(ab_i) * x0 + sqrt(1 - ab_i) * eps.

    ``i`` is either a python int or a LongTensor with one step per batch row.
    """
    _check_same_shape(x0, eps, "x0/eps")
    if isinstance(i, int):
        schedule.check_step(i)
        alpha_bar = _table(schedule.alpha_bars[i - 1], x0)
    else:
        if bool((i < 1).any()) or bool((i > schedule.n_steps).any()):
            raise ValueError(f"Step indices outside [1, {schedule.n_steps}]")
        alpha_bar = _table(schedule.alpha_bars, x0)[i - 1]
        alpha_bar = alpha_bar.reshape(alpha_bar.shape + (1,) * (x0.dim() - 1))
    return torch.sqrt(alpha_bar) * x0 + torch.sqrt(1.0 - alpha_bar) * eps


def reverse_step(
    x_i: torch.Tensor,
    eps_pred: torch.Tensor,
    i: int,
    z: torch.Tensor,
    schedule: NoiseSchedule,
) -> torch.Tensor:
    """Take one reverse step from x_i to x_{i-1}.

    The caller supplies ``z``; by convention it is zero at ``i == 1``.
    """
    schedule.check_step(i)
    _check_same_shape(x_i, eps_pred, "x_i/eps_pred")
    _check_same_shape(x_i, z, "x_i/z")
    alpha = float(schedule.alphas[i - 1])
    alpha_bar = float(schedule.alpha_bars[i - 1])
    beta = float(schedule.betas[i - 1])
    coef = (1.0 - alpha) / math.sqrt(1.0 - alpha_bar)
    return (x_i - coef * eps_pred) / math.sqrt(alpha) + math.sqrt(beta) * z


def predict_x0(
    x_i: torch.Tensor, eps_pred: torch.Tensor, i: int, schedule: NoiseSchedule
) -> torch.Tensor:
    """Estimate x_0 from x_i and the predicted noise."""
    alpha_bar = float(schedule.alpha_bars[i - 1])
    return (x_i - math.sqrt(1.0 - alpha_bar) * eps_pred) / math.sqrt(alpha_bar)


def denoised_step(
    x_i: torch.Tensor,
    eps_pred: torch.Tensor,
    i: int,
    z: torch.Tensor,
    schedule: NoiseSchedule,
) -> torch.Tensor:
    """Reverse step through the x_0 estimate, clipped to [-1, 1].

    The step mean is the forward posterior mean at the clipped estimate,
    with the same sqrt(beta_i) noise as ``reverse_step``. Both agree
    whenever the estimate is already inside [-1, 1].
    """
    schedule.check_step(i)
    _check_same_shape(x_i, eps_pred, "x_i/eps_pred")
    _check_same_shape(x_i, z, "x_i/z")
    x0 = predict_x0(x_i, eps_pred, i, schedule).clamp(-1.0, 1.0)
    alpha = float(schedule.alphas[i - 1])
    alpha_bar = float(schedule.alpha_bars[i - 1])
    alpha_bar_prev = float(schedule.alpha_bars[i - 2]) if i > 1 else 1.0
    beta = float(schedule.betas[i - 1])
    coef_x0 = math.sqrt(alpha_bar_prev) * beta / (1.0 - alpha_bar)
    coef_xi = math.sqrt(alpha) * (1.0 - alpha_bar_prev) / (1.0 - alpha_bar)
    return coef_x0 * x0 + coef_xi * x_i + math.sqrt(beta) * z


def sample(
    noise_net: NoisePredictor,
    condition: torch.Tensor,
    out_dim: int,
    schedule: NoiseSchedule,
    generator: Optional[torch.Generator] = None,
    mode: str = INFERENCE,
    clip_denoised: bool = False,
) -> torch.Tensor:
    """Run the full reverse chain and return x_0 clamped to [-1, 1].

    Noise is drawn from ``generator`` in a fixed order: x_N first, then one
    z per step for i = N..2. In ``training`` mode the result stays attached
    to the autograd graph of ``noise_net`` and ``condition``; the injected
    noise is exogenous.

    Without ``clip_denoised`` a short chain with a small alpha_bar_N scales
    x_N by roughly 1/sqrt(alpha_bar_N), so most outputs land on the final
    clamp where the gradient vanishes. The policies sample with it on.

    Args:
    ----
        noise_net: Callable (x_i, condition, step) -> predicted noise.
        condition: (B, C) conditioning batch.
        out_dim: Dimension of the generated vector.
        schedule: The noise schedule.
        generator: Random source for every noise draw.
        mode: ``inference`` (no graph) or ``training``.
        clip_denoised: Use ``denoised_step`` instead of ``reverse_step``.

    """
    if mode not in (INFERENCE, TRAINING):
        raise ValueError(f"Unknown sampling mode {mode!r}")
    if condition.dim() != 2:
        raise ValueError(f"condition must be (B, C), got {tuple(condition.shape)}")

    batch = condition.shape[0]
    shape = (batch, out_dim)
    kwargs = {"dtype": condition.dtype, "device": condition.device}
    step_fn = denoised_step if clip_denoised else reverse_step

    with torch.set_grad_enabled(mode == TRAINING and torch.is_grad_enabled()):
        x = torch.randn(shape, generator=generator, **kwargs)
        for i in range(schedule.n_steps, 0, -1):
            steps = torch.full((batch,), i, dtype=torch.long, device=condition.device)
            eps_pred = noise_net(x, condition, steps)
            if i > 1:
                z = torch.randn(shape, generator=generator, **kwargs)
            else:
                z = torch.zeros(shape, **kwargs)
            x = step_fn(x, eps_pred, i, z, schedule)
        return x.clamp(-1.0, 1.0)


def bc_loss(
    noise_net: NoisePredictor,
    condition: torch.Tensor,
    x0: torch.Tensor,
    schedule: NoiseSchedule,
    generator: Optional[torch.Generator] = None,
    steps: Optional[torch.Tensor] = None,
    noise: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Denoising (behavior-cloning) loss.

    Draws one step index uniformly from {1..N} and one standard-normal
    noise per record unless ``steps``/``noise`` are given, and returns the
    elementwise mean squared error between the noise and its prediction.
    """
    if x0.dim() != 2 or x0.shape[0] == 0:
        raise ValueError(
            f"bc_loss needs a nonempty (B, D) batch, got {tuple(x0.shape)}"
        )
    if condition.shape[0] != x0.shape[0]:
        raise ValueError(
            f"Batch mismatch: condition {condition.shape[0]} vs x0 {x0.shape[0]}"
        )

    batch = x0.shape[0]
    if steps is None:
        steps = torch.randint(
            1,
            schedule.n_steps + 1,
            (batch,),
            generator=generator,
            device=x0.device,
        )
    if noise is None:
        noise = torch.randn(
            x0.shape, generator=generator, dtype=x0.dtype, device=x0.device
        )

    x_noisy = forward_noise(x0, steps, noise, schedule)
    return F.mse_loss(noise_net(x_noisy, condition, steps), noise)
