"""Memory-bank detector: greedy k-center coreset plus exact 1-NN scoring.

Small problems use direct squared differences so results match a brute-force
reference bit for bit; large problems switch to a BLAS-backed norm-expansion
kernel (same exact search, float rounding at the 1e-13 level). The two
kernels are cross-checked against each other in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, ParameterError, ShapeError
from ..features.pyramid import PatchGrid

# below this many matrix elements the direct kernel is cache-friendly anyway
_DIRECT_LIMIT = 1 << 21


@dataclass(frozen=True)
class MemoryBank:
    """Coreset of normal patch embeddings queried by nearest neighbor."""

    coreset: np.ndarray  # (N, C)
    coreset_fraction: float
    source_count: int
    selected_indices: np.ndarray  # indices into the pooled training vectors


def _sq_dists_to(pool: np.ndarray, center: np.ndarray) -> np.ndarray:
    diff = pool - center
    return (diff * diff).sum(axis=1)


def greedy_k_center(pool: np.ndarray, n_select: int) -> np.ndarray:
    """Greedy farthest-point selection; first center is pooled index 0.

    Ties break toward the lowest index (argmax returns the first maximum).
    Returns the selected indices in selection order.
    """
    n = pool.shape[0]
    if n == 0:
        raise DataError("cannot select a coreset from an empty pool")
    n_select = min(max(1, n_select), n)
    if pool.size <= _DIRECT_LIMIT:
        return _greedy_direct(pool, n_select)
    return _greedy_expansion(pool, n_select)


def _greedy_direct(pool: np.ndarray, n_select: int) -> np.ndarray:
    selected = np.empty(n_select, dtype=np.int64)
    selected[0] = 0
    min_sq = _sq_dists_to(pool, pool[0])
    for i in range(1, n_select):
        nxt = int(np.argmax(min_sq))
        selected[i] = nxt
        np.minimum(min_sq, _sq_dists_to(pool, pool[nxt]), out=min_sq)
    return selected


def _greedy_expansion(pool: np.ndarray, n_select: int) -> np.ndarray:
    # selection-only arithmetic; the stored coreset rows stay full precision
    p32 = np.ascontiguousarray(pool, dtype=np.float32)
    sq = np.einsum("nc,nc->n", p32, p32)
    selected = np.empty(n_select, dtype=np.int64)
    selected[0] = 0
    min_sq = np.maximum(sq + sq[0] - 2.0 * (p32 @ p32[0]), 0.0)
    for i in range(1, n_select):
        nxt = int(np.argmax(min_sq))
        selected[i] = nxt
        cand = np.maximum(sq + sq[nxt] - 2.0 * (p32 @ p32[nxt]), 0.0)
        np.minimum(min_sq, cand, out=min_sq)
    return selected


def coverage_radius(pool: np.ndarray, bank: np.ndarray) -> float:
    """Max over the pool of the distance to its nearest bank row."""
    return float(np.max(nearest_distances(pool, bank)))


def patchcore_fit(train_grids: list[PatchGrid], fraction: float, seed: int = 0) -> MemoryBank:
    """Pool all training patch vectors and keep a greedy k-center coreset.

    Selection is fully deterministic (fixed first center, lowest-index tie
    break); `seed` is accepted for interface symmetry and recorded use.
    """
    if not 0 < fraction <= 1:
        raise ParameterError(f"coreset fraction must be in (0, 1], got {fraction}")
    if not train_grids:
        raise DataError("need at least one training grid")
    pool = np.concatenate([g.patch_vectors() for g in train_grids], axis=0)
    if pool.size == 0:
        raise DataError("training grids contain no patch vectors")
    n_select = max(1, round(fraction * pool.shape[0]))
    if n_select >= pool.shape[0]:
        indices = np.arange(pool.shape[0], dtype=np.int64)
    else:
        indices = greedy_k_center(pool, n_select)
    return MemoryBank(pool[indices].copy(), float(fraction), int(pool.shape[0]), indices)


def nearest_distances(queries: np.ndarray, bank: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Exact 1-NN Euclidean distance from each query row to the bank."""
    queries = np.asarray(queries)
    bank = np.asarray(bank)
    if bank.ndim != 2 or bank.shape[0] == 0:
        raise DataError("memory bank is empty")
    if queries.shape[1] != bank.shape[1]:
        raise ShapeError(f"query dim {queries.shape[1]} != bank dim {bank.shape[1]}")
    if queries.shape[0] * bank.shape[0] * bank.shape[1] <= _DIRECT_LIMIT:
        out = np.empty(queries.shape[0])
        for lo in range(0, queries.shape[0], chunk):
            q = queries[lo : lo + chunk]
            diff = q[:, None, :] - bank[None, :, :]
            out[lo : lo + chunk] = np.sqrt((diff * diff).sum(axis=2).min(axis=1))
        return out
    q64 = np.asarray(queries, dtype=np.float64)
    b64 = np.asarray(bank, dtype=np.float64)
    qn = np.einsum("nc,nc->n", q64, q64)
    bn = np.einsum("nc,nc->n", b64, b64)
    out = np.empty(q64.shape[0])
    for lo in range(0, q64.shape[0], 1024):
        q = q64[lo : lo + 1024]
        sq = qn[lo : lo + 1024, None] + bn[None, :] - 2.0 * (q @ b64.T)
        out[lo : lo + 1024] = np.sqrt(np.maximum(sq.min(axis=1), 0.0))
    return out


def patchcore_score(grid: PatchGrid, bank: MemoryBank) -> np.ndarray:
    """Patch-resolution anomaly map: distance to the nearest stored embedding."""
    h, w, c = grid.shape
    if bank.coreset.shape[1] != c:
        raise ShapeError(f"grid dim {c} does not match bank dim {bank.coreset.shape[1]}")
    return nearest_distances(grid.patch_vectors(), bank.coreset).reshape(h, w)
