"""Time-reversible block cellular automaton on an even-sided square lattice.

The update acts on non-overlapping 2x2 blocks.  Per block, the live count
decides the action: count 2 leaves the block unchanged; counts 0, 1 and 4
flip every cell; count 3 flips every cell and then rotates the block 180
degrees.  Successive steps alternate between two partitions: one anchored
at even coordinates ("aligned") and one shifted diagonally by (+1, +1)
("offset").  Every per-block action is a bijection on the 16 block states,
so each step is exactly invertible.

Edge handling for the offset partition is either torus wraparound (blocks
crossing an edge are glued to the opposite side) or a zero-pad-then-crop
scheme.  Cropping discards information, so inverse stepping is only
defined for the torus mode.
"""

from __future__ import annotations

from enum import Enum

import numpy as np


class Phase(Enum):
    """Which 2x2 partition a step uses."""

    ALIGNED = "aligned"
    OFFSET = "offset"


class EdgeMode(Enum):
    """Edge handling for the offset partition."""

    TORUS_WRAP = "torus"
    ZERO_PAD_CROP = "pad"


class Direction(Enum):
    FORWARD = "fwd"
    BACKWARD = "bwd"


class GridFormatError(ValueError):
    """Raised when grid text cannot be parsed."""


def _build_block_table() -> np.ndarray:
    """Enumerate the 16-entry block transform.

    Block bits are (top-left, top-right, bottom-left, bottom-right) packed
    little-endian: code = a + 2b + 4c + 8d.
    """
    table = np.zeros(16, dtype=np.uint8)
    for code in range(16):
        bits = [(code >> k) & 1 for k in range(4)]
        count = sum(bits)
        if count != 2:
            bits = [1 - v for v in bits]
        if count == 3:
            # 180 degree rotation of a 2x2 block is the full reversal.
            bits = bits[::-1]
        table[code] = bits[0] + 2 * bits[1] + 4 * bits[2] + 8 * bits[3]
    if sorted(table.tolist()) != list(range(16)):
        raise RuntimeError("block transform table is not a permutation")
    return table


BLOCK_TABLE = _build_block_table()
INVERSE_BLOCK_TABLE = np.argsort(BLOCK_TABLE).astype(np.uint8)


def block_transform(code: int) -> int:
    """Apply the live-count rule to a 4-bit block code."""
    if not 0 <= code <= 15:
        raise ValueError(f"block code must be in 0..15, got {code}")
    return int(BLOCK_TABLE[code])


def inverse_block_transform(code: int) -> int:
    """Unique preimage of a block code under block_transform."""
    if not 0 <= code <= 15:
        raise ValueError(f"block code must be in 0..15, got {code}")
    return int(INVERSE_BLOCK_TABLE[code])


def validate_grid(grid) -> np.ndarray:
    """Check a grid is square with even side and binary cells; return uint8."""
    g = np.asarray(grid)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"grid must be square, got shape {g.shape}")
    n = g.shape[0]
    if n < 2 or n % 2 != 0:
        raise ValueError(f"grid side must be even and >= 2, got {n}")
    if not np.isin(g, (0, 1)).all():
        raise ValueError("grid cells must be 0 or 1")
    return g.astype(np.uint8)


def _apply_blockwise(grid: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Transform every aligned 2x2 block of a validated grid via the table."""
    n = grid.shape[0]
    q = grid.reshape(n // 2, 2, n // 2, 2).transpose(0, 2, 1, 3).reshape(-1, 4)
    q = q.astype(np.int64)
    codes = q[:, 0] + 2 * q[:, 1] + 4 * q[:, 2] + 8 * q[:, 3]
    out = table[codes].astype(np.int64)
    bits = np.stack([(out >> k) & 1 for k in range(4)], axis=1).astype(np.uint8)
    return bits.reshape(n // 2, n // 2, 2, 2).transpose(0, 2, 1, 3).reshape(n, n)


def _step_with_table(grid: np.ndarray, phase: Phase, edge: EdgeMode,
                     table: np.ndarray) -> np.ndarray:
    if phase is Phase.ALIGNED:
        return _apply_blockwise(grid, table)
    if edge is EdgeMode.TORUS_WRAP:
        # Shift so the offset partition becomes the aligned one, and back.
        shifted = np.roll(grid, (-1, -1), axis=(0, 1))
        return np.roll(_apply_blockwise(shifted, table), (1, 1), axis=(0, 1))
    padded = np.pad(grid, 1)
    return _apply_blockwise(padded, table)[1:-1, 1:-1]


def step(grid, phase: Phase = Phase.ALIGNED,
         edge: EdgeMode = EdgeMode.TORUS_WRAP) -> np.ndarray:
    """Advance one half-step: transform every block of the given partition."""
    return _step_with_table(validate_grid(grid), phase, edge, BLOCK_TABLE)


def inverse_step(grid, phase: Phase = Phase.ALIGNED,
                 edge: EdgeMode = EdgeMode.TORUS_WRAP) -> np.ndarray:
    """Exact inverse of step under torus wrap.

    Rejected for the pad-and-crop mode: cropping loses the outer ring, so no
    unique preimage exists.
    """
    if edge is not EdgeMode.TORUS_WRAP:
        raise ValueError("inverse stepping requires torus wrap; "
                         "pad-and-crop discards edge information")
    return _step_with_table(validate_grid(grid), phase, edge,
                            INVERSE_BLOCK_TABLE)


def phase_at(index: int) -> Phase:
    """Partition used by the index-th step of a trajectory (0-based)."""
    return Phase.ALIGNED if index % 2 == 0 else Phase.OFFSET


def evolve(grid, steps: int, edge: EdgeMode = EdgeMode.TORUS_WRAP,
           direction: Direction = Direction.FORWARD) -> list[np.ndarray]:
    """Run a trajectory of the given length; returns steps+1 grids.

    Forward trajectories alternate aligned/offset starting from aligned.
    Backward trajectories undo a forward trajectory of the same length:
    inverse steps are applied with the phase order reversed, so evolving
    forward then backward over the same step count returns the start grid.
    """
    g = validate_grid(grid)
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    if direction is Direction.BACKWARD and edge is not EdgeMode.TORUS_WRAP:
        raise ValueError("backward evolution requires torus wrap")
    out = [g]
    for k in range(steps):
        if direction is Direction.FORWARD:
            g = _step_with_table(g, phase_at(k), edge, BLOCK_TABLE)
        else:
            g = _step_with_table(g, phase_at(steps - 1 - k), edge,
                                 INVERSE_BLOCK_TABLE)
        out.append(g)
    return out


def random_grid(n: int, density: float, seed) -> np.ndarray:
    """Grid with iid Bernoulli(density) cells; deterministic per seed.

    `seed` may be an int or an existing numpy Generator (consumed in place,
    which lets callers draw many grids from one stream).
    """
    if n < 2 or n % 2 != 0:
        raise ValueError(f"grid side must be even and >= 2, got {n}")
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must be in [0, 1], got {density}")
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    return (rng.random((n, n)) < density).astype(np.uint8)


# Grid text format: line 1 is the side length, then n rows of n characters
# from {0, 1}, top row first.  Trajectories separate grids by a blank line.

def format_grid(grid) -> str:
    g = validate_grid(grid)
    rows = ["".join("1" if v else "0" for v in row) for row in g]
    return "\n".join([str(g.shape[0])] + rows) + "\n"


def parse_grid(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.strip().splitlines()]
    if not lines:
        raise GridFormatError("empty grid text")
    try:
        n = int(lines[0])
    except ValueError:
        raise GridFormatError(f"first line must be the side length, "
                              f"got {lines[0]!r}") from None
    if len(lines) != n + 1:
        raise GridFormatError(f"expected {n} rows after the header, "
                              f"got {len(lines) - 1}")
    cells = np.zeros((n, n), dtype=np.uint8)
    for i, row in enumerate(lines[1:]):
        if len(row) != n or set(row) - {"0", "1"}:
            raise GridFormatError(f"row {i + 1} must be {n} characters "
                                  f"of 0/1, got {row!r}")
        cells[i] = [int(ch) for ch in row]
    try:
        return validate_grid(cells)
    except ValueError as exc:
        raise GridFormatError(str(exc)) from None


def format_trajectory(grids) -> str:
    return "\n".join(format_grid(g) for g in grids)


def parse_trajectory(text: str) -> list[np.ndarray]:
    chunks = [c for c in text.split("\n\n") if c.strip()]
    if not chunks:
        raise GridFormatError("empty trajectory text")
    return [parse_grid(c) for c in chunks]


def read_grid(path) -> np.ndarray:
    with open(path, encoding="ascii") as f:
        return parse_grid(f.read())


def write_grid(path, grid) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write(format_grid(grid))


def read_trajectory(path) -> list[np.ndarray]:
    with open(path, encoding="ascii") as f:
        return parse_trajectory(f.read())


def write_trajectory(path, grids) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write(format_trajectory(grids))
