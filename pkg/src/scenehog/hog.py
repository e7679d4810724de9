"""Histograms of oriented gradients over a square cell grid.

The descriptor keeps three views per cell: the signed histogram over
2 * n_orient bins covering [0, 2pi), the unsigned histogram obtained by
folding opposite directions together, and the four block normalisation
factors.  Normalisation follows the diagonal neighbourhood scheme: each
cell is normalised four times, once against each 2x2 block of cells
containing it, the normalised values are clipped and the four copies
averaged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "HogConfig",
    "HogGrid",
    "gradient",
    "cell_histograms",
    "normalize_cells",
    "hog",
]

# Clamp order for the four 2x2 neighbourhoods: (row offset, col offset).
_NEIGHBOURHOODS = ((-1, -1), (-1, 1), (1, -1), (1, 1))


@dataclass
class HogConfig:
    """Cell geometry and binning of the gradient histograms.

    cell_size    side of a square cell in pixels; must divide the image
    n_orient     number of unsigned orientation bins B (signed bins = 2B)
    clip_tau     ceiling applied to every normalised histogram entry
    eps_norm     additive constant inside the normaliser square root
    """

    cell_size: int = 8
    n_orient: int = 8
    clip_tau: float = 0.2
    eps_norm: float = 1e-10

    def __post_init__(self) -> None:
        if self.cell_size < 1:
            raise ConfigError("cell_size must be >= 1")
        if self.n_orient < 1:
            raise ConfigError("n_orient must be >= 1")
        if self.clip_tau <= 0:
            raise ConfigError("clip_tau must be positive")
        if self.eps_norm <= 0:
            raise ConfigError("eps_norm must be positive")


@dataclass
class HogGrid:
    """Per cell descriptors on an (n_rows, n_cols) grid.

    h_signed   (R, C, 2B) normalised signed histograms
    h_unsigned (R, C, B)  normalised folded histograms
    factors    (R, C, 4)  sums of clipped unsigned values, one per
               neighbourhood in _NEIGHBOURHOODS order
    """

    h_signed: np.ndarray
    h_unsigned: np.ndarray
    factors: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.h_signed.shape[0]

    @property
    def n_cols(self) -> int:
        return self.h_signed.shape[1]

    @property
    def n_orient(self) -> int:
        return self.h_unsigned.shape[2]


def gradient(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central difference gradients (Gx along columns, Gy along rows).

    Interior pixels use (next - previous) / 2; border pixels fall back
    to the one sided difference with unit step.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 2 or img.shape[1] < 2:
        raise ConfigError(f"gradient expects at least 2x2 input, got {img.shape}")
    gy, gx = np.gradient(img)
    return gx, gy


def cell_histograms(gx: np.ndarray, gy: np.ndarray, cfg: HogConfig) -> np.ndarray:
    """Accumulate magnitude weighted signed histograms, shape (R, C, 2B).

    Each pixel votes its full gradient magnitude into the single signed
    orientation bin containing atan2(Gy, Gx), taken in [0, 2pi).  Zero
    gradients contribute nothing.  The image sides must be divisible by
    the cell size.
    """
    gx = np.asarray(gx, dtype=np.float64)
    gy = np.asarray(gy, dtype=np.float64)
    if gx.shape != gy.shape or gx.ndim != 2:
        raise ConfigError("gradient fields must be 2-D and of equal shape")
    h, w = gx.shape
    cs = cfg.cell_size
    if h % cs or w % cs:
        raise ConfigError(
            f"image shape {gx.shape} not divisible by cell_size {cs}"
        )
    n_bins = 2 * cfg.n_orient
    rows, cols = h // cs, w // cs

    mag = np.hypot(gx, gy)
    theta = np.arctan2(gy, gx)
    theta = np.where(theta < 0, theta + 2.0 * np.pi, theta)
    bins = np.floor(theta * (n_bins / (2.0 * np.pi))).astype(np.int64) % n_bins

    cell_r = np.arange(h) // cs
    cell_c = np.arange(w) // cs
    flat = (cell_r[:, None] * cols + cell_c[None, :]) * n_bins + bins
    hist = np.bincount(flat.ravel(), weights=mag.ravel(), minlength=rows * cols * n_bins)
    return hist.reshape(rows, cols, n_bins)


def normalize_cells(raw: np.ndarray, cfg: HogConfig) -> HogGrid:
    """Apply four-neighbourhood block normalisation to raw histograms.

    For offsets (dr, dc) in {-1, +1}^2 the normaliser of cell (r, c) is
        N = sqrt(e(r,c) + e(r+dr,c) + e(r,c+dc) + e(r+dr,c+dc) + eps_norm)
    where e is the squared L2 energy of the folded (unsigned) histogram
    and out of range neighbours are replaced by the border cell.  Both
    the signed and the folded histogram are divided by N and clipped at
    clip_tau; the stored histograms average the four clipped copies and
    factors[n] keeps the sum of the clipped folded values for
    neighbourhood n.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 3 or raw.shape[2] != 2 * cfg.n_orient:
        raise ConfigError(
            f"raw histograms must have shape (R, C, {2 * cfg.n_orient})"
        )
    b = cfg.n_orient
    unsigned = raw[:, :, :b] + raw[:, :, b:]
    energy = np.einsum("rcb,rcb->rc", unsigned, unsigned)
    n_rows, n_cols = energy.shape

    h_signed = np.zeros_like(raw)
    h_unsigned = np.zeros_like(unsigned)
    factors = np.zeros((n_rows, n_cols, 4))
    row_idx = np.arange(n_rows)
    col_idx = np.arange(n_cols)
    for n, (dr, dc) in enumerate(_NEIGHBOURHOODS):
        r2 = np.clip(row_idx + dr, 0, n_rows - 1)
        c2 = np.clip(col_idx + dc, 0, n_cols - 1)
        block = energy + energy[r2, :] + energy[:, c2] + energy[np.ix_(r2, c2)]
        norm = np.sqrt(block + cfg.eps_norm)[:, :, None]
        clipped_s = np.minimum(raw / norm, cfg.clip_tau)
        clipped_u = np.minimum(unsigned / norm, cfg.clip_tau)
        h_signed += clipped_s
        h_unsigned += clipped_u
        factors[:, :, n] = clipped_u.sum(axis=2)
    h_signed /= 4.0
    h_unsigned /= 4.0
    return HogGrid(h_signed, h_unsigned, factors)


def hog(img: np.ndarray, cfg: HogConfig) -> HogGrid:
    """Full descriptor for one image: gradients, cell votes, normalisation."""
    gx, gy = gradient(img)
    return normalize_cells(cell_histograms(gx, gy, cfg), cfg)
