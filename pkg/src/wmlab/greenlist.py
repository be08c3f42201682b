"""Keyed pseudo-random partition of the vocabulary into green and red lists.

The partition is a pure function of (key, previous-m-tokens, vocab_size,
gamma).  Seeding uses a splitmix-style 64-bit finalizer chain; membership is
decided by ranking each token's keyed hash and taking the floor(gamma * V)
smallest, which guarantees an exactly-sized green list for every context.

Scalar entry points (`context_seed`, `green_list`, `is_green`) are the
reference implementation; `green_flags` is a vectorized batch kernel over
whole token matrices that is bit-for-bit equivalent (tested against the
scalar path).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN64 = 0x9E3779B97F4A7C15

_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB


def finalize64(x: int) -> int:
    """Shift-xor-multiply finalizer (splitmix64 style), all arithmetic mod 2^64."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * _MULT1) & MASK64
    x = ((x ^ (x >> 27)) * _MULT2) & MASK64
    return x ^ (x >> 31)


def _finalize64_np(x: np.ndarray) -> np.ndarray:
    """Vectorized finalize64 on a uint64 array (operates on a copy)."""
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= np.uint64(_MULT1)
    x ^= x >> np.uint64(27)
    x *= np.uint64(_MULT2)
    x ^= x >> np.uint64(31)
    return x


def context_seed(key: int, context: Sequence[int]) -> int:
    """Fold the previous-m-token window into a 64-bit seed.

    seed <- key; for each token t in order: seed <- finalize64(seed XOR (t + golden)).
    """
    if len(context) == 0:
        raise ValueError("window size must be >= 1")
    seed = key & MASK64
    for t in context:
        seed = finalize64(seed ^ ((int(t) + GOLDEN64) & MASK64))
    return seed


@lru_cache(maxsize=8)
def token_hashes(vocab_size: int) -> np.ndarray:
    """Per-token static hashes finalize64(v), shared by every seed."""
    v = np.arange(vocab_size, dtype=np.uint64)
    out = _finalize64_np(v)
    out.setflags(write=False)
    return out


def _check_partition_args(vocab_size: int, gamma: float) -> int:
    if vocab_size < 2:
        raise ValueError(f"vocab_size must be >= 2, got {vocab_size}")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    return int(np.floor(gamma * vocab_size))


def green_mask(seed: int, vocab_size: int, gamma: float) -> np.ndarray:
    """Boolean green membership for all tokens under one seed.

    Token v is green iff the rank of finalize64(seed XOR finalize64(v)) among
    all vocabulary tokens is < floor(gamma * V); ties (64-bit hash collisions)
    go to the smaller token id.
    """
    size = _check_partition_args(vocab_size, gamma)
    h = _finalize64_np(np.uint64(seed & MASK64) ^ token_hashes(vocab_size))
    order = np.argsort(h, kind="stable")  # stable sort = smaller-id tie-break
    mask = np.zeros(vocab_size, dtype=bool)
    mask[order[:size]] = True
    return mask


@dataclass(frozen=True)
class GreenList:
    """The green half of a keyed vocabulary partition."""

    ids: np.ndarray  # sorted green token ids
    vocab_size: int
    gamma: float

    @property
    def members(self) -> set[int]:
        return set(int(v) for v in self.ids)

    def __contains__(self, token: int) -> bool:
        i = int(np.searchsorted(self.ids, token))
        return i < len(self.ids) and int(self.ids[i]) == int(token)

    def __len__(self) -> int:
        return len(self.ids)


def green_list(seed: int, vocab_size: int, gamma: float) -> GreenList:
    """Materialize the green list for one seed."""
    mask = green_mask(seed, vocab_size, gamma)
    ids = np.nonzero(mask)[0]
    ids.setflags(write=False)
    return GreenList(ids=ids, vocab_size=vocab_size, gamma=gamma)


def is_green_seeded(seed: int, token: int, vocab_size: int, gamma: float) -> bool:
    """Membership test for a known seed via rank counting (no sort).

    Equivalent to `token in green_list(seed, vocab_size, gamma)`.
    """
    size = _check_partition_args(vocab_size, gamma)
    if not 0 <= token < vocab_size:
        raise ValueError(f"token id {token} outside vocabulary [0, {vocab_size})")
    h = _finalize64_np(np.uint64(seed & MASK64) ^ token_hashes(vocab_size))
    ht = h[token]
    rank = int(np.count_nonzero(h < ht))
    rank += int(np.count_nonzero(h[:token] == ht))  # smaller-id tie-break
    return rank < size


def is_green(key: int, context: Sequence[int], token: int,
             vocab_size: int, gamma: float) -> bool:
    """Membership of `token` in the green list seeded by (key, context)."""
    return is_green_seeded(context_seed(key, context), token, vocab_size, gamma)


def context_seeds_batch(key: int, tokens: np.ndarray, window: int) -> np.ndarray:
    """Seeds for every scored position of a (n, L) token matrix.

    Returns a uint64 array of shape (n, L - window); column j holds the seed
    derived from tokens[:, j : j + window], i.e. the context of position
    j + window.
    """
    tokens = np.asarray(tokens)
    if tokens.ndim == 1:
        tokens = tokens[None, :]
    n, length = tokens.shape
    if length <= window:
        raise ValueError("too short: sequence length must exceed the window")
    scored = length - window
    seeds = np.full((n, scored), np.uint64(key & MASK64), dtype=np.uint64)
    golden = np.uint64(GOLDEN64)
    for j in range(window):
        ctx = tokens[:, j:j + scored].astype(np.uint64)
        seeds = _finalize64_np(seeds ^ (ctx + golden))
    return seeds


def green_flags(key: int, tokens: np.ndarray, window: int,
                vocab_size: int, gamma: float,
                chunk_elems: int = 64_000) -> np.ndarray:
    """Green membership of every scored token in a (n, L) matrix.

    Batch counterpart of `is_green` over positions window .. L-1.  Membership
    is decided by counting how many vocabulary hashes fall below the current
    token's hash (with the smaller-id tie rule), so no per-position sort is
    needed.  Work is chunked to keep the (positions x vocab) hash matrix
    within `chunk_elems` elements.
    """
    size = _check_partition_args(vocab_size, gamma)
    tokens = np.asarray(tokens)
    squeeze = tokens.ndim == 1
    if squeeze:
        tokens = tokens[None, :]
    n, length = tokens.shape
    seeds = context_seeds_batch(key, tokens, window)
    cur = tokens[:, window:].astype(np.int64)

    flat_seeds = seeds.reshape(-1)
    flat_tok = cur.reshape(-1)
    pre = token_hashes(vocab_size)
    ht = _finalize64_np(flat_seeds ^ pre[flat_tok])

    out = np.empty(flat_seeds.shape[0], dtype=bool)
    # small chunks keep the hash matrix cache-resident across the ~13 passes
    rows_per_chunk = max(32, chunk_elems // vocab_size)
    ids = np.arange(vocab_size, dtype=np.int64)
    for start in range(0, flat_seeds.shape[0], rows_per_chunk):
        stop = min(start + rows_per_chunk, flat_seeds.shape[0])
        h = _finalize64_np(flat_seeds[start:stop, None] ^ pre[None, :])
        target = ht[start:stop, None]
        rank = (h < target).sum(axis=1)
        rank += ((h == target) & (ids[None, :] < flat_tok[start:stop, None])).sum(axis=1)
        out[start:stop] = rank < size
    out = out.reshape(n, length - window)
    return out[0] if squeeze else out
