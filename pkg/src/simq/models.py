"""Data records shared by the training, adaptation and evaluation stages."""

from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

# Scores below this mark a policy that does not perform well.
SUCCESS_THRESHOLD = -2000.0


@dataclass
class Experience:
    """A single transition (x, a, x', r)."""

    x: np.ndarray
    a: np.ndarray
    x_next: np.ndarray
    r: float


@dataclass
class ExperienceBatch:
    """Experiences stacked row-wise for vectorized loss evaluation."""

    x: np.ndarray
    a: np.ndarray
    x_next: np.ndarray
    r: np.ndarray

    @classmethod
    def from_experiences(cls, experiences: Sequence[Experience]) -> "ExperienceBatch":
        """Stack a sequence of experiences into a batch."""
        return cls(
            x=np.array([np.atleast_1d(e.x) for e in experiences], dtype=np.float64),
            a=np.array([np.atleast_1d(e.a) for e in experiences], dtype=np.float64),
            x_next=np.array([np.atleast_1d(e.x_next) for e in experiences], dtype=np.float64),
            r=np.array([e.r for e in experiences], dtype=np.float64),
        )

    def __len__(self) -> int:
        return self.r.shape[0]

    def __getitem__(self, i: int) -> Experience:
        return Experience(x=self.x[i], a=self.a[i], x_next=self.x_next[i], r=float(self.r[i]))

    def __iter__(self) -> Iterator[Experience]:
        for i in range(len(self)):
            yield self[i]


@dataclass
class EpisodeLog:
    """Summary of one stage-1 training episode."""

    episode: int
    episode_return: float
    mean_loss: float
    final_state_norm: float


@dataclass
class OnlineRecord:
    """One step of stage-2 online adaptation."""

    k: int
    x: np.ndarray
    a: np.ndarray
    r: float
    abs_delta: float
    w: np.ndarray
    halvings: int = 0


@dataclass
class OnlineLog:
    """Append-only record of an online run."""

    records: list[OnlineRecord] = field(default_factory=list)

    def append(self, record: OnlineRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def total_reward(self) -> float:
        return float(sum(rec.r for rec in self.records))

    def abs_deltas(self) -> np.ndarray:
        return np.array([rec.abs_delta for rec in self.records], dtype=np.float64)

    def state_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(rec.x) for rec in self.records], dtype=np.float64)


@dataclass
class ScoreReport:
    """Noiseless rollout score of a deterministic policy."""

    xi: np.ndarray
    score: float
    success: bool
    steps: int
    diverged: bool = False
    states: np.ndarray | None = None
    actions: np.ndarray | None = None
    rewards: np.ndarray | None = None


@dataclass
class SweepGrid:
    """Scores over a rectangular grid of system parameter vectors."""

    xi1_values: np.ndarray
    xi2_values: np.ndarray
    scores: np.ndarray
    seeds: np.ndarray | None = None

    @property
    def success(self) -> np.ndarray:
        return self.scores >= SUCCESS_THRESHOLD
