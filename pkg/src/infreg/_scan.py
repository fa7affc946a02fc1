"""Vectorized evaluation of plug-in statistics across transform-tuple candidates.

The scan fixes image 0 and sweeps all tuples of group elements for the
remaining images, in lexicographic order with the first image's candidate
most significant.  Each chunk yields per-candidate histograms of the joint
pixel values, coded base-r with image 0 as the most significant digit, so
``counts[b].reshape((r,) * m)`` has one axis per image in image order.
"""

import numpy as np


def image_data(images):
    """Normalize Images / raw arrays to (int64 sequences, alphabet size)."""
    seqs = [np.asarray(getattr(x, "pixels", x), dtype=np.int64) for x in images]
    n = seqs[0].size
    if any(s.size != n for s in seqs):
        raise ValueError("images must have equal length")
    rs = [getattr(x, "r", None) for x in images]
    if all(v is not None for v in rs):
        r = max(int(v) for v in rs)
    else:
        r = int(max(s.max() for s in seqs)) + 1
    if any(s.min() < 0 or s.max() >= r for s in seqs):
        raise ValueError("pixel value outside alphabet")
    return seqs, r


def entropy_rows(counts, n: int) -> np.ndarray:
    """Plug-in entropy in bits of each row of a count matrix."""
    c = np.asarray(counts, dtype=float)
    s = np.where(c > 0, c * np.log2(np.maximum(c, 1.0)), 0.0).sum(axis=1)
    return np.log2(n) - s / n


def marginal_counts(counts: np.ndarray, r: int, m: int, subset) -> np.ndarray:
    """Marginalize (B, r**m) count rows onto a coordinate subset."""
    keep = sorted(subset)
    shaped = counts.reshape((counts.shape[0],) + (r,) * m)
    drop = tuple(ax + 1 for ax in range(m) if ax not in keep)
    out = shaped.sum(axis=drop) if drop else shaped
    return out.reshape(counts.shape[0], -1)


def iter_tuple_counts(seqs, group, r: int, chunk_cells: int = 1 << 22):
    """Yield (start, counts) blocks covering all len(group)**(m-1) tuples."""
    m = len(seqs)
    n = seqs[0].size
    cells = r**m
    if cells > 1 << 24:
        raise ValueError("joint histogram too large (r**m must be <= 2**24)")
    weights = r ** (m - 1 - np.arange(m, dtype=np.int64))
    base = seqs[0] * weights[0]
    stacks = [seqs[j][group.matrix] * weights[j] for j in range(1, m)]
    g = len(group)
    total = g ** (m - 1)
    block = max(1, int(chunk_cells) // max(n, cells))
    for start in range(0, total, block):
        idx = np.arange(start, min(start + block, total))
        comps = np.unravel_index(idx, (g,) * (m - 1))
        codes = np.broadcast_to(base, (len(idx), n)).copy()
        for stack, comp in zip(stacks, comps):
            codes += stack[comp]
        offsets = (np.arange(len(idx), dtype=np.int64) * cells)[:, None]
        flat = (codes + offsets).ravel()
        counts = np.bincount(flat, minlength=len(idx) * cells).reshape(len(idx), cells)
        yield start, counts
