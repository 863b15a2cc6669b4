"""The discrete-latent and continuous-action policies.

Both diffusion policies wrap a conditional noise predictor that sees the
current sample, the conditioning vector and a sinusoidal step embedding
concatenated into one MLP input. The deterministic variants used by the
ablation replace the reverse chain with a single tanh-squashed regressor.
"""

import logging
import math
from typing import Optional, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import PolicyNetworkConfig
from .diffusion import INFERENCE, TRAINING, NoiseSchedule, bc_loss, sample

logger = logging.getLogger(__name__)

ACTIVATIONS = {
    "mish": nn.Mish,
    "relu": nn.ReLU,
    "tanh": nn.Tanh,
    "silu": nn.SiLU,
}


def timestep_embedding(
    steps: torch.Tensor, dim: int, max_period: int = 10_000
) -> torch.Tensor:
    """Sinusoidal embedding of integer step indices, shape (B, dim)."""
    half = dim // 2
    freq = torch.exp(
        -math.log(max_period) * torch.arange(half, device=steps.device) / half
    )
    args = steps[:, None].float() * freq[None]
    emb = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
    return F.pad(emb, (0, dim % 2))


def mlp(
    in_dim: int,
    out_dim: int,
    hidden: Sequence[int],
    activation: str = "mish",
) -> nn.Sequential:
    """Plain multilayer perceptron with a linear output layer."""
    layers = []
    prev = in_dim
    for width in hidden:
        layers += [nn.Linear(prev, width), ACTIVATIONS[activation]()]
        prev = width
    layers.append(nn.Linear(prev, out_dim))
    return nn.Sequential(*layers)


def _check_width(x: torch.Tensor, dim: int, what: str) -> None:
    if x.dim() != 2 or x.shape[-1] != dim:
        raise ValueError(
            f"Dimension mismatch for {what}: expected (B, {dim}), got {tuple(x.shape)}"
        )


class NoiseNetwork(nn.Module):
    """Noise predictor eps(x_i, condition, i)."""

    def __init__(self, sample_dim: int, cond_dim: int, network: PolicyNetworkConfig):
        """Initialize the network."""
        super().__init__()
        self.time_embed_dim = network.time_embed_dim
        self.net = mlp(
            sample_dim + cond_dim + network.time_embed_dim,
            sample_dim,
            network.hidden_widths,
            network.activation,
        )

    def forward(
        self, x: torch.Tensor, condition: torch.Tensor, steps: torch.Tensor
    ) -> torch.Tensor:
        """Predict the noise in ``x`` at the given steps."""
        emb = timestep_embedding(steps, self.time_embed_dim).to(x.dtype)
        return self.net(torch.cat([x, condition, emb], dim=-1))


class DiscreteLatentPolicy(nn.Module):
    """Diffusion policy over latent vectors e in [-1, 1]^d_e, conditioned on s."""

    deterministic = False

    def __init__(
        self,
        obs_dim: int,
        latent_dim: int,
        schedule: NoiseSchedule,
        network: Optional[PolicyNetworkConfig] = None,
        noise_net: Optional[nn.Module] = None,
        clip_denoised: bool = True,
    ):
        """Initialize the policy.

        Args:
        ----
            obs_dim: Observation dimension.
            latent_dim: Latent dimension d_e.
            schedule: Noise schedule of the reverse chain.
            network: Shape of the default noise predictor.
            noise_net: Replacement noise predictor (tests use tiny ones).
            clip_denoised: Clip the x_0 estimate at every reverse step.

        """
        super().__init__()
        self.obs_dim = obs_dim
        self.latent_dim = latent_dim
        self.schedule = schedule
        self.clip_denoised = clip_denoised
        self.noise_net = noise_net or NoiseNetwork(
            latent_dim, obs_dim, network or PolicyNetworkConfig()
        )

    def sample_latent(
        self,
        s: torch.Tensor,
        generator: Optional[torch.Generator] = None,
        mode: str = INFERENCE,
    ) -> torch.Tensor:
        """Draw a batch of latents for states ``s`` of shape (B, obs_dim)."""
        _check_width(s, self.obs_dim, "state")
        return sample(
            self.noise_net,
            s,
            self.latent_dim,
            self.schedule,
            generator,
            mode,
            self.clip_denoised,
        )

    def loss(
        self,
        s: torch.Tensor,
        e: torch.Tensor,
        generator: Optional[torch.Generator] = None,
    ) -> torch.Tensor:
        """Behavior-cloning loss toward buffered latents."""
        _check_width(e, self.latent_dim, "latent")
        return bc_loss(self.noise_net, s, e, self.schedule, generator)


class ContinuousPolicy(nn.Module):
    """Diffusion policy over parameters a_c, conditioned on (s, e_k)."""

    deterministic = False

    def __init__(
        self,
        obs_dim: int,
        latent_dim: int,
        action_dim: int,
        schedule: NoiseSchedule,
        network: Optional[PolicyNetworkConfig] = None,
        noise_net: Optional[nn.Module] = None,
        clip_denoised: bool = True,
    ):
        """Initialize the policy."""
        super().__init__()
        self.obs_dim = obs_dim
        self.latent_dim = latent_dim
        self.action_dim = action_dim
        self.schedule = schedule
        self.clip_denoised = clip_denoised
        self.noise_net = noise_net or NoiseNetwork(
            action_dim, obs_dim + latent_dim, network or PolicyNetworkConfig()
        )

    def condition(self, s: torch.Tensor, e_k: torch.Tensor) -> torch.Tensor:
        """Concatenate state and codeword into the conditioning vector."""
        _check_width(s, self.obs_dim, "state")
        _check_width(e_k, self.latent_dim, "codeword")
        return torch.cat([s, e_k], dim=-1)

    def sample_action(
        self,
        s: torch.Tensor,
        e_k: torch.Tensor,
        generator: Optional[torch.Generator] = None,
        mode: str = INFERENCE,
    ) -> torch.Tensor:
        """Draw parameters for ``s`` given the selected codeword.

        In training mode the result is differentiable with respect to the
        network parameters and ``e_k``.
        """
        return sample(
            self.noise_net,
            self.condition(s, e_k),
            self.action_dim,
            self.schedule,
            generator,
            mode,
            self.clip_denoised,
        )

    def loss(
        self,
        s: torch.Tensor,
        e_k: torch.Tensor,
        a_c: torch.Tensor,
        generator: Optional[torch.Generator] = None,
    ) -> torch.Tensor:
        """Behavior-cloning loss toward buffered parameters."""
        _check_width(a_c, self.action_dim, "action")
        return bc_loss(
            self.noise_net, self.condition(s, e_k), a_c, self.schedule, generator
        )


class DeterministicLatentPolicy(nn.Module):
    """Ablation: e = tanh(f(s))."""

    deterministic = True

    def __init__(
        self,
        obs_dim: int,
        latent_dim: int,
        network: Optional[PolicyNetworkConfig] = None,
    ):
        """Initialize the regressor."""
        super().__init__()
        network = network or PolicyNetworkConfig()
        self.obs_dim = obs_dim
        self.latent_dim = latent_dim
        self.net = mlp(obs_dim, latent_dim, network.hidden_widths, network.activation)

    def sample_latent(self, s, generator=None, mode=INFERENCE):
        """Return the squashed regressor output; ``generator`` is unused."""
        _check_width(s, self.obs_dim, "state")
        with torch.set_grad_enabled(mode == TRAINING and torch.is_grad_enabled()):
            return torch.tanh(self.net(s))

    def loss(self, s, e, generator=None):
        """Mean squared error toward buffered latents."""
        _check_width(e, self.latent_dim, "latent")
        return F.mse_loss(self.sample_latent(s, mode=TRAINING), e)


class DeterministicContinuousPolicy(nn.Module):
    """Ablation: a_c = tanh(g(s, e_k))."""

    deterministic = True

    def __init__(
        self,
        obs_dim: int,
        latent_dim: int,
        action_dim: int,
        network: Optional[PolicyNetworkConfig] = None,
    ):
        """Initialize the regressor."""
        super().__init__()
        network = network or PolicyNetworkConfig()
        self.obs_dim = obs_dim
        self.latent_dim = latent_dim
        self.action_dim = action_dim
        self.net = mlp(
            obs_dim + latent_dim, action_dim, network.hidden_widths, network.activation
        )

    def sample_action(self, s, e_k, generator=None, mode=INFERENCE):
        """Return the squashed regressor output; ``generator`` is unused."""
        _check_width(s, self.obs_dim, "state")
        _check_width(e_k, self.latent_dim, "codeword")
        with torch.set_grad_enabled(mode == TRAINING and torch.is_grad_enabled()):
            return torch.tanh(self.net(torch.cat([s, e_k], dim=-1)))

    def loss(self, s, e_k, a_c, generator=None):
        """Mean squared error toward buffered parameters."""
        _check_width(a_c, self.action_dim, "action")
        return F.mse_loss(self.sample_action(s, e_k, mode=TRAINING), a_c)


def build_policies(
    obs_dim: int,
    latent_dim: int,
    action_dim: int,
    schedule: NoiseSchedule,
    network: PolicyNetworkConfig,
    deterministic: bool = False,
    clip_denoised: bool = True,
) -> Tuple[nn.Module, nn.Module]:
    """Construct the (discrete, continuous) policy pair."""
    if deterministic:
        logger.debug("Building deterministic policies")
        return (
            DeterministicLatentPolicy(obs_dim, latent_dim, network),
            DeterministicContinuousPolicy(obs_dim, latent_dim, action_dim, network),
        )
    return (
        DiscreteLatentPolicy(
            obs_dim, latent_dim, schedule, network, clip_denoised=clip_denoised
        ),
        ContinuousPolicy(
            obs_dim,
            latent_dim,
            action_dim,
            schedule,
            network,
            clip_denoised=clip_denoised,
        ),
    )
