"""Self-similarity veto.

A selected candidate is kept only if its block distance to the reference
block is strictly below the distance from the reference block to every
same-row neighbor block in the reference image at offsets of magnitude 2 to
search_radius (offsets 0 and +-1 are excluded: they overlap the block
almost entirely).  Periodic or flat neighborhoods therefore reject; when no
neighbor block fits inside the image the minimum is vacuous (+inf) and the
candidate is kept.

The map helpers compute the same distances for every pixel at once through
summed-area tables; sums are exact for integer-valued images, so they agree
bit for bit with direct summation there.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .imgio import GrayImage
from .patch_model import extract_block


@dataclass(eq=False)
class SsContext:
    """Reference image plus the geometry of the neighbor scan."""

    image: GrayImage
    search_radius: int
    block_side: int


def ssd(a, b) -> float:
    """Sum of squared differences between two flattened blocks."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape:
        raise DimensionMismatch(f"shapes {av.shape} and {bv.shape} differ")
    d = av - bv
    return float(np.dot(d, d))


def min_neighbor_ssd(ctx: SsContext, q: tuple[int, int]) -> float:
    """Smallest distance from the block at q to its same-row neighbor
    blocks; +inf when no neighbor block fits."""
    x, y = q
    half = ctx.block_side // 2
    block_q = extract_block(ctx.image, q, ctx.block_side)
    best = np.inf
    for dr in range(-ctx.search_radius, ctx.search_radius + 1):
        if abs(dr) <= 1:
            continue
        xr = x + dr
        if not half <= xr < ctx.image.width - half:
            continue
        d = ssd(block_q, extract_block(ctx.image, (xr, y), ctx.block_side))
        best = min(best, d)
    return best


def self_similarity_accept(ctx: SsContext, q: tuple[int, int],
                           cross_distance: float) -> bool:
    """True when cross_distance is strictly below every neighbor distance."""
    return cross_distance < min_neighbor_ssd(ctx, q)


def box_sum(values: np.ndarray, side: int) -> np.ndarray:
    """Sliding side x side window sums, output (h-side+1, w-side+1)."""
    c = np.cumsum(np.cumsum(values, axis=0, dtype=np.float64), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    return (c[side:, side:] - c[:-side, side:]
            - c[side:, :-side] + c[:-side, :-side])


def aligned_ssd_map(img_a: GrayImage, img_b: GrayImage, shift: int,
                    block_side: int) -> np.ndarray:
    """Block SSD between (x, y) in img_a and (x+shift, y) in img_b for every
    interior pixel of img_a, indexed on img_a's interior grid; +inf where the
    shifted block does not fit inside img_b."""
    half = block_side // 2
    hi = img_a.height - block_side + 1
    wi_a = img_a.width - block_side + 1
    wi_b = img_b.width - block_side + 1
    out = np.full((hi, wi_a), np.inf)
    lo = max(0, -shift)
    hi_col = min(wi_a, wi_b - shift)
    if lo >= hi_col or hi < 1:
        return out
    # interior col c maps to image col c + half; aligned strips share rows
    a = img_a.pixels[:, lo:hi_col + block_side - 1]
    b = img_b.pixels[:, lo + shift:hi_col + shift + block_side - 1]
    out[:, lo:hi_col] = box_sum((a - b) ** 2, block_side)
    return out


def min_self_ssd_map(image: GrayImage, search_radius: int,
                     block_side: int) -> np.ndarray:
    """min_neighbor_ssd evaluated on the whole interior grid."""
    hi = image.height - block_side + 1
    wi = image.width - block_side + 1
    best = np.full((hi, wi), np.inf)
    for dr in range(-search_radius, search_radius + 1):
        if abs(dr) <= 1:
            continue
        np.minimum(best, aligned_ssd_map(image, image, dr, block_side),
                   out=best)
    return best
