"""Ring replay buffer of hybrid-action transitions."""

import logging
import threading
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
import torch

logger = logging.getLogger(__name__)

_FIELDS = ("s", "e", "k", "a_c", "r", "s_next", "done")
_BOUND_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Transition:
    """One environment step as stored for learning.

    ``e`` is the pre-quantization latent; ``k`` is kept for the Step-2
    behavior-cloning condition and for diagnostics.
    """

    s: np.ndarray
    e: np.ndarray
    k: int
    a_c: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool


@dataclass
class TransitionBatch:
    """A sampled batch as torch tensors."""

    s: torch.Tensor
    e: torch.Tensor
    k: torch.Tensor
    a_c: torch.Tensor
    r: torch.Tensor
    s_next: torch.Tensor
    done: torch.Tensor

    def __len__(self) -> int:
        """Number of records."""
        return self.s.shape[0]


class ReplayBuffer:
    """Fixed-capacity ring buffer; the oldest records are overwritten first."""

    def __init__(self, capacity: int):
        """Initialize an empty buffer; storage is allocated on the first push."""
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.size = 0
        self._next = 0
        self._storage: Optional[Dict[str, np.ndarray]] = None
        self._lock = threading.Lock()

    def __len__(self) -> int:
        """Number of stored records."""
        return self.size

    def _allocate(self, transition: Transition) -> None:
        def rows(value, dtype):
            shape = (self.capacity,) + np.shape(value)
            return np.zeros(shape, dtype=dtype)

        self._storage = {
            "s": rows(transition.s, np.float32),
            "e": rows(transition.e, np.float32),
            "k": rows(transition.k, np.int64),
            "a_c": rows(transition.a_c, np.float32),
            "r": rows(transition.r, np.float64),
            "s_next": rows(transition.s_next, np.float32),
            "done": rows(transition.done, np.float32),
        }
        logger.debug("Allocated replay storage for %d records", self.capacity)

    def push(self, transition: Transition) -> None:
        """Append one record."""
        if np.any(np.abs(transition.e) > 1 + _BOUND_TOLERANCE):
            raise ValueError("latent outside [-1, 1]")
        if np.any(np.abs(transition.a_c) > 1 + _BOUND_TOLERANCE):
            raise ValueError("continuous action outside [-1, 1]")
        if transition.k < 0:
            raise ValueError(f"negative discrete index {transition.k}")

        with self._lock:
            if self._storage is None:
                self._allocate(transition)
            for name in _FIELDS:
                self._storage[name][self._next] = getattr(transition, name)
            self._next = (self._next + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)

    def get(self, index: int) -> Transition:
        """Return the record stored in slot ``index``."""
        if not 0 <= index < self.size:
            raise IndexError(f"index {index} outside [0, {self.size})")
        store = self._storage
        return Transition(
            s=store["s"][index].copy(),
            e=store["e"][index].copy(),
            k=int(store["k"][index]),
            a_c=store["a_c"][index].copy(),
            r=float(store["r"][index]),
            s_next=store["s_next"][index].copy(),
            done=bool(store["done"][index]),
        )

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        """Draw ``batch_size`` distinct records uniformly."""
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        if batch_size > self.size:
            raise ValueError(
                f"Insufficient buffer: {self.size} records, batch of {batch_size}"
            )
        with self._lock:
            idx = rng.choice(self.size, size=batch_size, replace=False)
            return TransitionBatch(
                **{name: torch.from_numpy(self._storage[name][idx]) for name in _FIELDS}
            )

    def state_dict(self) -> Dict[str, Any]:
        """Contents for checkpointing."""
        return {
            "capacity": self.capacity,
            "size": self.size,
            "next": self._next,
            "storage": self._storage,
        }

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        """Restore contents written by ``state_dict``."""
        if state["capacity"] != self.capacity:
            raise ValueError(
                f"Capacity mismatch: {state['capacity']} vs {self.capacity}"
            )
        self.size = state["size"]
        self._next = state["next"]
        self._storage = state["storage"]
