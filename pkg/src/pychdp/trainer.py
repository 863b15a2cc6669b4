"""Sequential two-agent training.

Every iteration runs, in order:

1. critic update against the double-Q target of the target policies;
2. Step 1, the discrete agent: behavior cloning of buffered latents minus
   alpha times Q of a fresh latent paired with the buffered parameters;
3. Step 2, the continuous agent and the codebook: latents are resampled
   from the just-updated discrete policy (no gradient), quantized, and the
   parameters drawn for the selected codeword are pushed toward higher Q;
4. Polyak update of the critic and policy targets.

The concurrent ablation computes both policy losses from buffered data and
applies them together.
"""

import copy
import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np
import torch
import torch.nn as nn

from .codebook import ArgmaxHead, Codebook
from .config import RunConfig, TrainConfig
from .critic import TwinCritic, critic_loss, polyak_update, td_target
from .diffusion import INFERENCE, TRAINING, make_schedule
from .envs.base import EnvSpec
from .policies import build_policies
from .replay import ReplayBuffer, Transition, TransitionBatch

logger = logging.getLogger(__name__)

ALPHA_FLOOR = 1e-3


def _scalar(value: torch.Tensor) -> float:
    return value.detach().item()


def alpha_from_q(eta: float, q1: torch.Tensor, q2: torch.Tensor) -> Tuple[float, float]:
    """Return (alpha, mean |Q|) with alpha = eta / max(mean |Q|, floor)."""
    mean_abs_q = float(torch.cat([q1.detach().abs(), q2.detach().abs()]).mean())
    return eta / max(mean_abs_q, ALPHA_FLOOR), mean_abs_q


def discrete_policy_loss(
    discrete: nn.Module,
    critic: TwinCritic,
    batch: TransitionBatch,
    alpha: float,
    generator: Optional[torch.Generator] = None,
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Step-1 objective; returns (total, bc term, mean min-Q term).

    Only the discrete policy is on the gradient path: the buffered
    parameters are constants and the critic weights are detached.
    """
    if len(batch) == 0:
        raise ValueError("Step 1 needs a nonempty batch")
    bc = discrete.loss(batch.s, batch.e, generator)
    e = discrete.sample_latent(batch.s, generator, TRAINING)
    q = critic.q_min(batch.s, e, batch.a_c.detach(), detach_params=True).mean()
    return bc - alpha * q, bc, q


def continuous_policy_loss(
    continuous: nn.Module,
    head: nn.Module,
    critic: TwinCritic,
    batch: TransitionBatch,
    e_fresh: torch.Tensor,
    alpha: float,
    generator: Optional[torch.Generator] = None,
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Step-2 objective; returns (total, bc term, L_q, selected k).

    ``e_fresh`` enters the critic under stop-gradient; the selected
    codewords are live rows so L_q reaches the codebook through the
    parameters sampled for them.
    """
    if len(batch) == 0:
        raise ValueError("Step 2 needs a nonempty batch")
    e_fresh = e_fresh.detach()
    k, e_k = head.quantize(e_fresh, generator)
    a_c = continuous.sample_action(batch.s, e_k, generator, TRAINING)
    l_q = -critic.q_min(batch.s, e_fresh, a_c, detach_params=True).mean()
    condition = head.buffered_condition(batch.e, batch.k)
    bc = continuous.loss(batch.s, condition, batch.a_c, generator)
    return bc + alpha * l_q, bc, l_q, k


class CHDPAgent(nn.Module):
    """Both policies, the codebook (or argmax head), the critics and targets."""

    def __init__(self, env_spec: EnvSpec, run_config: RunConfig):
        """Build every component for ``env_spec``.

        Parameters are initialized from torch's global generator, so seed it
        first for reproducible weights.
        """
        super().__init__()
        train = run_config.train
        self.env_spec = env_spec
        self.schedule = make_schedule(
            train.diffusion_steps,
            run_config.schedule.beta_start,
            run_config.schedule.beta_end,
            run_config.schedule.kind,
        )
        n_codes = env_spec.n_discrete
        self.latent_dim = n_codes if train.no_codebook else train.latent_dim

        self.discrete, self.continuous = build_policies(
            env_spec.obs_dim,
            self.latent_dim,
            env_spec.action_dim,
            self.schedule,
            run_config.network,
            deterministic=train.deterministic_policy,
            clip_denoised=run_config.schedule.clip_denoised,
        )
        if train.no_codebook:
            self.head = ArgmaxHead(n_codes)
        else:
            self.head = Codebook(n_codes, self.latent_dim)
        self.critic = TwinCritic(
            env_spec.obs_dim, self.latent_dim, env_spec.action_dim, train.critic_widths
        )
        self.discrete_target = copy.deepcopy(self.discrete).requires_grad_(False)
        self.continuous_target = copy.deepcopy(self.continuous).requires_grad_(False)

    def act(
        self,
        states: torch.Tensor,
        generator: Optional[torch.Generator] = None,
        mode: str = INFERENCE,
    ) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Return (e, k, a_c) for a batch of states (or a single state)."""
        single = states.dim() == 1
        if single:
            states = states.unsqueeze(0)
        e = self.discrete.sample_latent(states, generator, mode)
        k, e_k = self.head.quantize(e, generator)
        a_c = self.continuous.sample_action(states, e_k, generator, mode)
        if single:
            return e[0], k[0], a_c[0]
        return e, k, a_c


class CHDPTrainer:
    """Owns the agent, the replay buffer, optimizers and random state."""

    def __init__(
        self,
        env_spec: EnvSpec,
        run_config: RunConfig,
        agent: Optional[CHDPAgent] = None,
    ):
        """Initialize the trainer.

        Args:
        ----
            env_spec: Spec of the environment being learned.
            run_config: Validated run configuration.
            agent: Prebuilt agent; built from a seeded generator if omitted.

        """
        self.run_config = run_config
        self.config: TrainConfig = run_config.train
        self.env_spec = env_spec
        if agent is None:
            torch.manual_seed(self.config.seed)
            agent = CHDPAgent(env_spec, run_config)
        self.agent = agent
        self.generator = torch.Generator().manual_seed(self.config.seed)
        self.np_rng = np.random.default_rng(self.config.seed)
        self.buffer = ReplayBuffer(self.config.buffer_capacity)
        self.iterations = 0

        self.critic_optimizer = torch.optim.Adam(
            list(agent.critic.online_parameters()), lr=self.config.lr_critic
        )
        self.discrete_optimizer = torch.optim.Adam(
            agent.discrete.parameters(), lr=self.config.lr_discrete
        )
        groups = [
            {
                "params": list(agent.continuous.parameters()),
                "lr": self.config.lr_continuous,
            }
        ]
        codebook_params = list(agent.head.parameters())
        if codebook_params:
            groups.append({"params": codebook_params, "lr": self.config.lr_codebook})
        self.continuous_optimizer = torch.optim.Adam(groups)

    def random_action(self) -> Tuple[np.ndarray, int, np.ndarray]:
        """Warmup action: uniform latent (quantized) and uniform parameters."""
        e = self.np_rng.uniform(-1.0, 1.0, size=self.agent.latent_dim)
        e = e.astype(np.float32)
        k = int(self.agent.head.nearest(torch.from_numpy(e)[None])[0])
        a_c = self.np_rng.uniform(-1.0, 1.0, size=self.env_spec.action_dim)
        return e, k, a_c.astype(np.float32)

    def select_action(
        self, state: np.ndarray, step: int
    ) -> Tuple[np.ndarray, int, np.ndarray]:
        """Behavior action for environment step ``step`` (random during warmup)."""
        if step < self.config.warmup_steps:
            e, k, a_c = self.random_action()
        else:
            with torch.no_grad():
                e_t, k_t, a_t = self.agent.act(
                    torch.as_tensor(state, dtype=torch.float32), self.generator
                )
            e, k, a_c = e_t.numpy(), int(k_t), a_t.numpy()
            if self.config.exploration_noise > 0:
                scale = self.config.exploration_noise
                noise = self.np_rng.normal(0.0, scale, a_c.shape)
                a_c = np.clip(a_c + noise, -1.0, 1.0).astype(np.float32)
        self.agent.head.record(torch.tensor([k]))
        return e, k, a_c

    def observe(self, transition: Transition) -> None:
        """Store a transition."""
        self.buffer.push(transition)

    def alpha_coefficient(self, batch: TransitionBatch) -> Tuple[float, float]:
        """Return (alpha, mean |Q|) over the buffered (s, e, a_c) of ``batch``."""
        if len(batch) == 0:
            raise ValueError("alpha needs a nonempty batch")
        with torch.no_grad():
            q1, q2 = self.agent.critic.q_values(batch.s, batch.e, batch.a_c)
        return alpha_from_q(self.config.eta, q1, q2)

    def critic_update(self, batch: TransitionBatch) -> float:
        """One gradient step on both critics."""
        agent = self.agent
        y = td_target(
            agent.critic,
            batch.r,
            batch.s_next,
            batch.done,
            agent.discrete_target,
            agent.continuous_target,
            agent.head,
            self.config.gamma,
            self.generator,
        )
        loss = critic_loss(agent.critic, batch.s, batch.e, batch.a_c, y)
        self.critic_optimizer.zero_grad()
        loss.backward()
        self.critic_optimizer.step()
        return _scalar(loss)

    def step1_discrete_update(
        self, batch: TransitionBatch, alpha: float
    ) -> Dict[str, float]:
        """Update the discrete policy only."""
        total, bc, q = discrete_policy_loss(
            self.agent.discrete, self.agent.critic, batch, alpha, self.generator
        )
        self.discrete_optimizer.zero_grad()
        total.backward()
        self.discrete_optimizer.step()
        return {
            "discrete_loss": _scalar(total),
            "discrete_bc": _scalar(bc),
            "discrete_q": _scalar(q),
        }

    def _fresh_latents(self, batch: TransitionBatch) -> torch.Tensor:
        with torch.no_grad():
            return self.agent.discrete.sample_latent(batch.s, self.generator)

    def step2_continuous_codebook_update(
        self, batch: TransitionBatch, alpha: float
    ) -> Tuple[Dict[str, float], torch.Tensor]:
        """Update the continuous policy and the codebook jointly.

        Must run after Step 1: latents come from the updated discrete policy.
        """
        e_fresh = self._fresh_latents(batch)
        total, bc, l_q, k = continuous_policy_loss(
            self.agent.continuous,
            self.agent.head,
            self.agent.critic,
            batch,
            e_fresh,
            alpha,
            self.generator,
        )
        self.continuous_optimizer.zero_grad()
        total.backward()
        self.continuous_optimizer.step()
        metrics = {
            "continuous_loss": _scalar(total),
            "continuous_bc": _scalar(bc),
            "continuous_lq": _scalar(l_q),
        }
        return metrics, k

    def concurrent_update(
        self, batch: TransitionBatch, alpha: float
    ) -> Tuple[Dict[str, float], torch.Tensor]:
        """Ablation: both policy losses from buffered data, one joint step."""
        agent = self.agent
        d_total, d_bc, d_q = discrete_policy_loss(
            agent.discrete, agent.critic, batch, alpha, self.generator
        )
        c_total, c_bc, l_q, k = continuous_policy_loss(
            agent.continuous,
            agent.head,
            agent.critic,
            batch,
            batch.e,
            alpha,
            self.generator,
        )
        self.discrete_optimizer.zero_grad()
        self.continuous_optimizer.zero_grad()
        (d_total + c_total).backward()
        self.discrete_optimizer.step()
        self.continuous_optimizer.step()
        metrics = {
            "discrete_loss": _scalar(d_total),
            "discrete_bc": _scalar(d_bc),
            "discrete_q": _scalar(d_q),
            "continuous_loss": _scalar(c_total),
            "continuous_bc": _scalar(c_bc),
            "continuous_lq": _scalar(l_q),
        }
        return metrics, k

    def update_targets(self) -> None:
        """Polyak-average critics and policies into their targets."""
        agent, tau = self.agent, self.config.tau
        polyak_update(agent.critic.q1, agent.critic.q1_target, tau)
        polyak_update(agent.critic.q2, agent.critic.q2_target, tau)
        polyak_update(agent.discrete, agent.discrete_target, tau)
        polyak_update(agent.continuous, agent.continuous_target, tau)

    def train_iteration(self) -> Dict[str, Any]:
        """Run one full update and return its metrics record."""
        if len(self.buffer) < self.config.batch_size:
            raise ValueError(
                f"Insufficient buffer: {len(self.buffer)} records, "
                f"batch size {self.config.batch_size}"
            )
        batch = self.buffer.sample(self.config.batch_size, self.np_rng)

        metrics: Dict[str, Any] = {"critic_loss": self.critic_update(batch)}
        alpha, mean_abs_q = self.alpha_coefficient(batch)
        if self.config.concurrent_update:
            policy_metrics, k = self.concurrent_update(batch, alpha)
        else:
            metrics.update(self.step1_discrete_update(batch, alpha))
            policy_metrics, k = self.step2_continuous_codebook_update(batch, alpha)
        metrics.update(policy_metrics)
        self.update_targets()
        self.iterations += 1

        counts = torch.bincount(k, minlength=self.env_spec.n_discrete)
        metrics.update(
            alpha=alpha,
            mean_abs_q=mean_abs_q,
            selection={str(i): int(c) for i, c in enumerate(counts.tolist()) if c},
        )
        return metrics

    def state_dict(self) -> Dict[str, Any]:
        """Everything needed to resume training bit-identically (buffer aside)."""
        return {
            "agent": self.agent.state_dict(),
            "critic_optimizer": self.critic_optimizer.state_dict(),
            "discrete_optimizer": self.discrete_optimizer.state_dict(),
            "continuous_optimizer": self.continuous_optimizer.state_dict(),
            "torch_rng": self.generator.get_state(),
            "numpy_rng": self.np_rng.bit_generator.state,
            "iterations": self.iterations,
            "betas": self.agent.schedule.betas.clone(),
        }

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        """Restore a state written by ``state_dict``."""
        betas = state["betas"]
        if not torch.equal(betas, self.agent.schedule.betas):
            raise ValueError(
                "Checkpoint noise schedule differs from the configured one"
            )
        self.agent.load_state_dict(state["agent"])
        self.critic_optimizer.load_state_dict(state["critic_optimizer"])
        self.discrete_optimizer.load_state_dict(state["discrete_optimizer"])
        self.continuous_optimizer.load_state_dict(state["continuous_optimizer"])
        self.generator.set_state(state["torch_rng"])
        self.np_rng.bit_generator.state = state["numpy_rng"]
        self.iterations = state["iterations"]
