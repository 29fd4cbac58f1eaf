"""Grid search and random search."""

from __future__ import annotations

from ..objective import Archive
from ..space import SearchSpace, grid, sample_uniform
from .base import Proposal, Tuner


class RandomTuner(Tuner):
    """Independent uniform draws; trivially parallel, never exhausted."""

    name = "random"

    def propose(self, archive: Archive, n: int) -> list[Proposal]:
        out = self._take_warm(n)
        while len(out) < n:
            out.append(Proposal(sample_uniform(self.space, self.rng)))
        return out


class GridTuner(Tuner):
    """Enumerates a fixed-resolution grid, then reports exhaustion."""

    name = "grid"

    def __init__(self, space: SearchSpace, resolution: int, seed: int = 0):
        super().__init__(space, seed)
        self.resolution = int(resolution)
        self._pending = grid(space, self.resolution)
        self._pos = 0

    @property
    def grid_size(self) -> int:
        return len(self._pending)

    def exhausted(self) -> bool:
        return self._pos >= len(self._pending) and not self._warm

    def propose(self, archive: Archive, n: int) -> list[Proposal]:
        out = self._take_warm(n)
        while len(out) < n and self._pos < len(self._pending):
            out.append(Proposal(self._pending[self._pos]))
            self._pos += 1
        return out
