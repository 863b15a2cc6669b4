"""Twin Q-functions over (state, latent, parameters) and their targets."""

import copy
import logging
from typing import Iterator, Optional, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.func import functional_call

from .policies import mlp

logger = logging.getLogger(__name__)


class QNetwork(nn.Module):
    """Q(s, e, a_c) as an MLP over the concatenated inputs."""

    def __init__(
        self, input_dim: int, widths: Sequence[int], zero_init_last: bool = False
    ):
        """Initialize the network."""
        super().__init__()
        self.net = mlp(input_dim, 1, widths, activation="relu")
        if zero_init_last:
            nn.init.zeros_(self.net[-1].weight)
            nn.init.zeros_(self.net[-1].bias)

    def forward(
        self, s: torch.Tensor, e: torch.Tensor, a_c: torch.Tensor
    ) -> torch.Tensor:
        """Return Q values of shape (B,)."""
        return self.net(torch.cat([s, e, a_c], dim=-1)).squeeze(-1)


class TwinCritic(nn.Module):
    """Two independent Q networks plus frozen target copies."""

    def __init__(
        self,
        obs_dim: int,
        latent_dim: int,
        action_dim: int,
        widths: Sequence[int] = (256, 256),
        zero_init_last: bool = False,
    ):
        """Initialize both critics; targets start equal to the online nets."""
        super().__init__()
        self.obs_dim = obs_dim
        self.latent_dim = latent_dim
        self.action_dim = action_dim
        input_dim = obs_dim + latent_dim + action_dim
        self.q1 = QNetwork(input_dim, widths, zero_init_last)
        self.q2 = QNetwork(input_dim, widths, zero_init_last)
        self.q1_target = copy.deepcopy(self.q1).requires_grad_(False)
        self.q2_target = copy.deepcopy(self.q2).requires_grad_(False)

    def online_parameters(self) -> Iterator[nn.Parameter]:
        """Parameters of the two trained networks."""
        yield from self.q1.parameters()
        yield from self.q2.parameters()

    def _check(self, s: torch.Tensor, e: torch.Tensor, a_c: torch.Tensor) -> None:
        expected = (self.obs_dim, self.latent_dim, self.action_dim)
        got = (s.shape[-1], e.shape[-1], a_c.shape[-1])
        if got != expected or not s.shape[0] == e.shape[0] == a_c.shape[0]:
            raise ValueError(
                f"Dimension mismatch for critic input: expected widths {expected}, "
                f"got {tuple(s.shape)}, {tuple(e.shape)}, {tuple(a_c.shape)}"
            )

    def q_values(
        self,
        s: torch.Tensor,
        e: torch.Tensor,
        a_c: torch.Tensor,
        target: bool = False,
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """Evaluate both online (or target) critics."""
        self._check(s, e, a_c)
        if target:
            return self.q1_target(s, e, a_c), self.q2_target(s, e, a_c)
        return self.q1(s, e, a_c), self.q2(s, e, a_c)

    def q_min(
        self,
        s: torch.Tensor,
        e: torch.Tensor,
        a_c: torch.Tensor,
        detach_params: bool = False,
    ) -> torch.Tensor:
        """Elementwise minimum of the two online critics.

        With ``detach_params`` the critic weights are treated as constants:
        gradients still flow into the inputs but never into the critic.
        """
        self._check(s, e, a_c)
        if not detach_params:
            return torch.min(self.q1(s, e, a_c), self.q2(s, e, a_c))
        values = []
        for net in (self.q1, self.q2):
            frozen = {name: p.detach() for name, p in net.named_parameters()}
            values.append(functional_call(net, frozen, (s, e, a_c)))
        return torch.min(values[0], values[1])


def bellman_target(
    rewards: torch.Tensor,
    dones: torch.Tensor,
    q1_next: torch.Tensor,
    q2_next: torch.Tensor,
    gamma: float,
) -> torch.Tensor:
    """y = r + gamma * (1 - done) * min(Q1', Q2'), in the dtype of Q."""
    rewards = rewards.to(q1_next.dtype)
    return rewards + gamma * (1.0 - dones) * torch.min(q1_next, q2_next)


def td_target(
    critic: TwinCritic,
    rewards: torch.Tensor,
    next_states: torch.Tensor,
    dones: torch.Tensor,
    target_discrete: nn.Module,
    target_continuous: nn.Module,
    head: nn.Module,
    gamma: float,
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    """Double-Q bootstrap target from the target policies.

    The next latent comes from the target discrete policy and is quantized
    with the live codebook; the target continuous policy conditions on the
    resulting codeword. Nothing here is differentiable.
    """
    with torch.no_grad():
        e_next = target_discrete.sample_latent(next_states, generator)
        _, e_k = head.quantize(e_next, generator)
        a_next = target_continuous.sample_action(next_states, e_k, generator)
        q1, q2 = critic.q_values(next_states, e_next, a_next, target=True)
        return bellman_target(rewards, dones, q1, q2, gamma)


def critic_loss(
    critic: TwinCritic,
    s: torch.Tensor,
    e: torch.Tensor,
    a_c: torch.Tensor,
    y: torch.Tensor,
) -> torch.Tensor:
    """Sum over both critics of the mean squared Bellman error."""
    if s.shape[0] == 0:
        raise ValueError("critic_loss needs a nonempty batch")
    q1, q2 = critic.q_values(s, e, a_c)
    y = y.detach()
    return F.mse_loss(q1, y) + F.mse_loss(q2, y)


def polyak_update(online: nn.Module, target: nn.Module, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, in place."""
    if not 0 < tau <= 1:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    with torch.no_grad():
        for param, target_param in zip(online.parameters(), target.parameters()):
            # lerp keeps equal tensors bitwise equal and is exact at tau=1
            target_param.lerp_(param, tau)
