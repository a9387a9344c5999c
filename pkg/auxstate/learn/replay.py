from typing import List, Optional

import numpy as np

from ..core import ConfigError, RngStream, TransitionRecord


class ReplayBuffer:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError(f"replay capacity {capacity} must be positive", key="learn.buffer")
        self.capacity = capacity
        self._records: List[Optional[TransitionRecord]] = [None] * capacity
        self._episodes = np.full(capacity, -1, dtype=np.int64)
        self._count = 0

    def __len__(self) -> int:
        return min(self._count, self.capacity)

    def add(self, record: TransitionRecord, episode: int) -> None:
        slot = self._count % self.capacity
        self._records[slot] = record
        self._episodes[slot] = episode
        self._count += 1

    def _slot(self, logical: int) -> int:
        oldest = self._count - len(self)
        return (oldest + logical) % self.capacity

    def sample(self, batch: int, rng: RngStream) -> List[TransitionRecord]:
        if len(self) == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        picks = rng.integers(len(self), size=batch)
        return [self._records[self._slot(int(i))] for i in picks]

    def window_at(self, start: int, length: int) -> List[TransitionRecord]:
        """Transitions from logical position start, stopping at the episode end or the newest record."""
        first = self._slot(start)
        episode = self._episodes[first]
        window = [self._records[first]]
        position = start + 1
        while len(window) < length and position < len(self) and not window[-1].terminal:
            slot = self._slot(position)
            if self._episodes[slot] != episode:
                break
            window.append(self._records[slot])
            position += 1
        return window

    def sample_windows(self, batch: int, length: int, rng: RngStream) -> List[List[TransitionRecord]]:
        if len(self) == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        starts = rng.integers(len(self), size=batch)
        return [self.window_at(int(s), length) for s in starts]
