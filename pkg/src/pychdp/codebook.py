"""Q-guided codebook mapping latents to discrete actions."""

import logging
import math
from typing import List, Optional, Tuple

import torch
import torch.nn as nn

logger = logging.getLogger(__name__)

MAX_INIT_DRAWS = 100


class _SelectionStats:
    """Per-row selection counter shared by both heads."""

    selection_counts: torch.Tensor

    def record(self, k: torch.Tensor) -> None:
        """Count selections for the dead-codeword diagnostic."""
        self.selection_counts += torch.bincount(
            k.flatten().cpu(), minlength=self.selection_counts.shape[0]
        )

    def dead_codes(self) -> List[int]:
        """Rows that have never been selected."""
        return torch.nonzero(self.selection_counts == 0).flatten().tolist()


class Codebook(_SelectionStats, nn.Module):
    """K x d_e table of learnable codewords.

    The only training signal reaching the table is the continuous agent's
    Q term: ``quantize`` returns live rows, so gradients land on the rows
    actually selected and nowhere else. There is no commitment or
    reconstruction loss.
    """

    def __init__(
        self,
        n_codes: int,
        latent_dim: int,
        generator: Optional[torch.Generator] = None,
    ):
        """Draw codewords uniformly in [-1/sqrt(d_e), 1/sqrt(d_e)].

        Args:
        ----
            n_codes: K, the number of discrete actions.
            latent_dim: d_e.
            generator: Random source for the initial table.

        """
        super().__init__()
        if n_codes < 1 or latent_dim < 1:
            raise ValueError(
                f"Codebook needs K >= 1 and d_e >= 1, got K={n_codes}, d_e={latent_dim}"
            )
        bound = 1.0 / math.sqrt(latent_dim)
        for _ in range(MAX_INIT_DRAWS):
            weight = torch.empty(n_codes, latent_dim).uniform_(
                -bound, bound, generator=generator
            )
            if torch.unique(weight, dim=0).shape[0] == n_codes:
                break
        else:
            raise ValueError("Could not draw a codebook with distinct rows")

        self.weight = nn.Parameter(weight)
        self.register_buffer("selection_counts", torch.zeros(n_codes, dtype=torch.long))

    @property
    def n_codes(self) -> int:
        """K."""
        return self.weight.shape[0]

    @property
    def latent_dim(self) -> int:
        """d_e."""
        return self.weight.shape[1]

    def nearest(
        self, e: torch.Tensor, generator: Optional[torch.Generator] = None
    ) -> torch.Tensor:
        """Index of the nearest codeword per row; ties go to the lowest index.

        ``generator`` is accepted for symmetry with ``ArgmaxHead`` and unused.
        """
        if e.dim() != 2 or e.shape[-1] != self.latent_dim:
            raise ValueError(
                f"Dimension mismatch for latent: expected (B, {self.latent_dim}), "
                f"got {tuple(e.shape)}"
            )
        with torch.no_grad():
            weight = self.weight.to(e.dtype)
            distances = ((e[:, None, :] - weight[None, :, :]) ** 2).sum(dim=-1)
            # argmin returns the first minimal index
            return torch.argmin(distances, dim=1)

    def quantize(
        self, e: torch.Tensor, generator: Optional[torch.Generator] = None
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """Return (k, e_k) with e_k the live rows of the table."""
        k = self.nearest(e)
        return k, self.weight[k]

    def buffered_condition(self, e: torch.Tensor, k: torch.Tensor) -> torch.Tensor:
        """Detached codewords of already executed actions."""
        return self.weight[k].detach()


class ArgmaxHead(_SelectionStats, nn.Module):
    """No-codebook ablation: the latent is a K-way score vector.

    k = argmax(e) and the continuous agent is conditioned on e itself.
    """

    def __init__(self, n_codes: int):
        """Initialize the head."""
        super().__init__()
        if n_codes < 1:
            raise ValueError(f"K must be >= 1, got {n_codes}")
        self.register_buffer("selection_counts", torch.zeros(n_codes, dtype=torch.long))

    @property
    def n_codes(self) -> int:
        """K."""
        return self.selection_counts.shape[0]

    @property
    def latent_dim(self) -> int:
        """The latent is one score per discrete action."""
        return self.n_codes

    def nearest(
        self, e: torch.Tensor, generator: Optional[torch.Generator] = None
    ) -> torch.Tensor:
        """Highest-scoring action per row.

        Scores clamped to the same bound tie often; ties are broken uniformly
        at random with ``generator``.
        """
        if e.dim() != 2 or e.shape[-1] != self.n_codes:
            raise ValueError(
                f"Dimension mismatch for latent: expected (B, {self.n_codes}), "
                f"got {tuple(e.shape)}"
            )
        e = e.detach()
        tied = e == e.max(dim=1, keepdim=True).values
        if not bool((tied.sum(dim=1) > 1).any()):
            return torch.argmax(e, dim=1)
        jitter = torch.rand(e.shape, generator=generator, device=e.device)
        scores = torch.where(tied, jitter, torch.full_like(jitter, -1.0))
        return torch.argmax(scores, dim=1)

    def quantize(
        self, e: torch.Tensor, generator: Optional[torch.Generator] = None
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """Return (argmax, e)."""
        return self.nearest(e, generator), e

    def buffered_condition(self, e: torch.Tensor, k: torch.Tensor) -> torch.Tensor:
        """The buffered latent, detached."""
        return e.detach()
