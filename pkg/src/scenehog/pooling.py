"""Pooling of cell descriptors into fixed length feature vectors.

Cells are averaged over rectangular blocks of the grid.  Two layouts
are supported: a rectangular grid of F x T blocks, and the marginalized
layout which concatenates full time pooling (one block per cell row)
with full frequency pooling (one block per cell column).  Blocks are
emitted frequency major (all blocks of the lowest frequency band first)
and each block concatenates the enabled components in the fixed order
signed | unsigned | factors.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .hog import HogGrid

__all__ = [
    "PoolConfig",
    "FeatureVector",
    "pool_grid",
    "pool_marginalized",
    "full_features",
    "feature_dim",
]


@dataclass
class PoolConfig:
    """Which components are pooled and how the grid is partitioned.

    mode          "marginalized" or "grid"
    grid_freq     F, number of frequency blocks (grid mode)
    grid_time     T, number of time blocks (grid mode)
    use_signed    include the 2B signed histogram per block
    use_unsigned  include the B folded histogram per block
    use_factors   include the 4 normalisation factors per block
    """

    mode: str = "marginalized"
    grid_freq: int = 8
    grid_time: int = 8
    use_signed: bool = True
    use_unsigned: bool = True
    use_factors: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("marginalized", "grid"):
            raise ConfigError(f"unknown pooling mode {self.mode!r}")
        if self.grid_freq < 1 or self.grid_time < 1:
            raise ConfigError("grid_freq and grid_time must be >= 1")
        if not (self.use_signed or self.use_unsigned or self.use_factors):
            raise ConfigError("at least one descriptor component must be enabled")

    def block_width(self, n_orient: int) -> int:
        """Length of one pooled block for histograms with B = n_orient."""
        return (
            (2 * n_orient if self.use_signed else 0)
            + (n_orient if self.use_unsigned else 0)
            + (4 if self.use_factors else 0)
        )


@dataclass
class FeatureVector:
    """A pooled descriptor plus the hash of the configuration that made it."""

    values: np.ndarray
    signature: str = ""

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ConfigError("FeatureVector.values must be 1-D")

    @property
    def dim(self) -> int:
        return self.values.size


def _components(grid: HogGrid, cfg: PoolConfig) -> list[np.ndarray]:
    parts = []
    if cfg.use_signed:
        parts.append(grid.h_signed)
    if cfg.use_unsigned:
        parts.append(grid.h_unsigned)
    if cfg.use_factors:
        parts.append(grid.factors)
    return parts


def _signature(grid: HogGrid, cfg: PoolConfig, f: int, t: int) -> str:
    key = (
        f"mode={cfg.mode};f={f};t={t};orient={grid.n_orient};"
        f"signed={cfg.use_signed};unsigned={cfg.use_unsigned};"
        f"factors={cfg.use_factors}"
    )
    return hashlib.sha256(key.encode()).hexdigest()[:16]


def pool_grid(grid: HogGrid, n_freq: int, n_time: int, cfg: PoolConfig) -> FeatureVector:
    """Average cells over an n_freq x n_time partition of the grid.

    Both block counts must divide the respective grid dimension.  The
    output lays the blocks out frequency major and, inside each block,
    the enabled components in signed | unsigned | factors order, giving
    n_freq * n_time * block_width values in total.
    """
    r, c = grid.n_rows, grid.n_cols
    if r % n_freq or c % n_time:
        raise ConfigError(
            f"grid of {r}x{c} cells cannot be split into {n_freq}x{n_time} blocks"
        )
    blocks = []
    for part in _components(grid, cfg):
        d = part.shape[2]
        pooled = part.reshape(n_freq, r // n_freq, n_time, c // n_time, d).mean(axis=(1, 3))
        blocks.append(pooled)
    stacked = np.concatenate(blocks, axis=2)
    return FeatureVector(stacked.reshape(-1), _signature(grid, cfg, n_freq, n_time))


def pool_marginalized(grid: HogGrid, cfg: PoolConfig) -> FeatureVector:
    """Concatenate time pooling (R blocks) with frequency pooling (C blocks)."""
    time_pooled = pool_grid(grid, grid.n_rows, 1, cfg)
    freq_pooled = pool_grid(grid, 1, grid.n_cols, cfg)
    values = np.concatenate([time_pooled.values, freq_pooled.values])
    return FeatureVector(values, _signature(grid, cfg, -1, -1))


def full_features(grid: HogGrid, cfg: PoolConfig) -> FeatureVector:
    """No pooling: one block per cell (grid layout with F = R, T = C)."""
    return pool_grid(grid, grid.n_rows, grid.n_cols, cfg)


def feature_dim(
    cfg: PoolConfig,
    n_orient: int,
    grid_rows: int,
    grid_cols: int,
    *,
    full: bool = False,
) -> int:
    """Dimension of the pooled vector without computing any features."""
    width = cfg.block_width(n_orient)
    if full:
        return grid_rows * grid_cols * width
    if cfg.mode == "marginalized":
        return (grid_rows + grid_cols) * width
    return cfg.grid_freq * cfg.grid_time * width
