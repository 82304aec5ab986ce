"""Iterated application of trained per-phase models against the exact
trajectory (the feedback-loop view of the learned evolution)."""

from __future__ import annotations

import numpy as np

from ..ca import Direction, EdgeMode, evolve, validate_grid
from ..nn.layers import Network


def apply_model_binary(model, grids: np.ndarray) -> np.ndarray:
    """Run grids (count, n, n) through a model and threshold at 0.5."""
    if isinstance(model, Network):
        x = grids[:, None, :, :].astype(np.float64)
        pred = model.predict(x)
        return (pred[:, 0] >= 0.5).astype(np.uint8)
    return np.stack([validate_grid(model(g)) for g in grids])


def rollout(model_aligned, model_offset, grid, steps: int):
    """Alternate the two models from a start grid for `steps` half-steps.

    Each frame is compared with the exact torus trajectory from the same
    start; returns (trajectory, divergence_step) where divergence_step is
    the 1-based index of the first mismatching frame, or steps+1 if the
    whole rollout is exact.
    """
    g = validate_grid(grid)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    exact = evolve(g, steps, EdgeMode.TORUS_WRAP, Direction.FORWARD)
    trajectory = [g]
    divergence = steps + 1
    current = g
    for k in range(steps):
        model = model_aligned if k % 2 == 0 else model_offset
        current = apply_model_binary(model, current[None])[0]
        trajectory.append(current)
        if divergence == steps + 1 and not np.array_equal(current, exact[k + 1]):
            divergence = k + 1
    return trajectory, divergence
