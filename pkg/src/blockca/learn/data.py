"""Supervised pairs generated from the exact automaton."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ca import (
    Direction,
    EdgeMode,
    Phase,
    inverse_step,
    random_grid,
    step,
)


@dataclass(frozen=True)
class Dataset:
    """Input/target grid pairs for one rule-learning task."""

    inputs: np.ndarray   # (count, n, n) uint8
    targets: np.ndarray  # (count, n, n) uint8
    n: int
    direction: Direction
    phase: Phase
    edge: EdgeMode
    seed: int
    density: float = 0.5

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def pairs(self):
        return list(zip(self.inputs, self.targets))

    def tensors(self) -> tuple[np.ndarray, np.ndarray]:
        """Float (N, 1, n, n) views for the network stack."""
        x = self.inputs[:, None, :, :].astype(np.float64)
        t = self.targets[:, None, :, :].astype(np.float64)
        return x, t


def rule_map(direction: Direction, phase: Phase, edge: EdgeMode):
    """The exact single half-step map this dataset's targets follow."""
    if direction is Direction.FORWARD:
        return lambda g: step(g, phase, edge)
    return lambda g: inverse_step(g, phase, edge)


def generate_dataset(n: int, count: int, direction: Direction, phase: Phase,
                     edge: EdgeMode, seed: int,
                     density: float = 0.5) -> Dataset:
    """Random grids with their exact images under the chosen half-step."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    fn = rule_map(direction, phase, edge)
    rng = np.random.default_rng(seed)
    inputs = np.stack([random_grid(n, density, rng) for _ in range(count)])
    targets = np.stack([fn(g) for g in inputs])
    return Dataset(inputs, targets, n, direction, phase, edge, seed, density)


def verify_dataset(ds: Dataset) -> bool:
    """Recompute every target from its input; True iff all match."""
    fn = rule_map(ds.direction, ds.phase, ds.edge)
    return all(np.array_equal(fn(x), t) for x, t in zip(ds.inputs, ds.targets))
