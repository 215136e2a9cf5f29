"""Mode-wise slice reordering.

Reordering places similar slices next to each other so that the folded
tensor is smoother and easier for the sequence model to fit. Two stages:

* an initialization that treats slices as TSP cities (complete graph under
  slice Frobenius distance), builds an MST with Prim's algorithm, reads a
  tour off its DFS preorder, and drops the heaviest edge of the closed
  cycle, giving the usual 2-approximation to the optimal path;
* cheap iterative updates that propose candidate position pairs by locality
  sensitive hashing of slice projections and accept a swap whenever the
  exact (or sampled) change in squared-error loss is negative.
"""

from __future__ import annotations

import numpy as np

from .folding import FoldingSpec, fold_batch
from .model import NttdParams, forward_batch
from .tensor import DenseTensor, PermutationSet

# above this many slices, Prim rows are computed on the fly instead of
# materializing the full N x N distance matrix
DISTANCE_MATRIX_CAP = 4096

DEFAULT_SAMPLE_BUDGET = 4096


def slice_matrix(t: DenseTensor, mode: int) -> np.ndarray:
    """Slices of one mode flattened to rows of an (N_k, rest) matrix."""
    if not 1 <= mode <= t.order:
        raise IndexError(f"mode {mode} out of range 1..{t.order}")
    a = np.moveaxis(t.data, mode - 1, 0)
    return np.ascontiguousarray(a.reshape(a.shape[0], -1))


def slice_distances(t: DenseTensor, mode: int) -> np.ndarray:
    """Full matrix of pairwise slice Frobenius distances for one mode."""
    a = slice_matrix(t, mode)
    sq = (a * a).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (a @ a.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def _row_distances(a, sq, u):
    d2 = sq[u] + sq - 2.0 * (a @ a[u])
    np.maximum(d2, 0.0, out=d2)
    d2[u] = 0.0
    return np.sqrt(d2)


def _prim_mst(rows, n, root):
    """Parents and children-in-insertion-order of an MST; rows(u) = dist row."""
    parent = np.full(n, -1, dtype=np.int64)
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    best_from = np.full(n, root, dtype=np.int64)
    children = [[] for _ in range(n)]
    u = root
    in_tree[u] = True
    for _ in range(n - 1):
        row = rows(u)
        closer = row < best
        best[closer] = row[closer]
        best_from[closer] = u
        best[in_tree] = np.inf
        u = int(np.argmin(best))  # ties resolve to the smallest index
        parent[u] = int(best_from[u])
        children[parent[u]].append(u)
        in_tree[u] = True
    return parent, children


def _dfs_preorder(children, root, n):
    order = np.empty(n, dtype=np.int64)
    stack = [root]
    pos = 0
    while stack:
        u = stack.pop()
        order[pos] = u
        pos += 1
        stack.extend(reversed(children[u]))  # visit children in insertion order
    return order


def tsp_order(t: DenseTensor, mode: int, rng) -> np.ndarray:
    """One mode's slice order from the MST tour heuristic."""
    n = t.dims[mode - 1]
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    a = slice_matrix(t, mode)
    sq = (a * a).sum(axis=1)
    if n <= DISTANCE_MATRIX_CAP:
        dist = slice_distances(t, mode)
        rows = lambda u: dist[u]
    else:
        rows = lambda u: _row_distances(a, sq, u)
    root = int(rng.integers(n))
    _, children = _prim_mst(rows, n, root)
    path = _dfs_preorder(children, root, n)
    # close the tour and cut it back open at its heaviest edge
    nxt = np.roll(path, -1)
    diffs = a[path] - a[nxt]
    w = np.sqrt((diffs * diffs).sum(axis=1))
    cut = int(np.argmax(w))
    return np.concatenate([path[cut + 1:], path[:cut + 1]])


def init_orders_tsp(t: DenseTensor, seed: int = 0) -> PermutationSet:
    """TSP-style initial order for every mode."""
    rng = np.random.default_rng(seed)
    return PermutationSet([tsp_order(t, k, rng) for k in range(1, t.order + 1)])


def order_path_cost(t: DenseTensor, mode: int, order) -> float:
    """Sum of adjacent slice distances along an order (the TSP objective)."""
    a = slice_matrix(t, mode)
    order = np.asarray(order, dtype=np.int64)
    diffs = a[order[:-1]] - a[order[1:]]
    return float(np.sqrt((diffs * diffs).sum(axis=1)).sum())


def propose_pairs_lsh(t: DenseTensor, p: PermutationSet, mode: int,
                      seed: int = 0) -> list[tuple[int, int]]:
    """Candidate swap pairs for one mode via random-projection hashing.

    One position is sampled from each adjacent (even, odd) pair, the sampled
    reordered slices are projected onto a random direction, and positions
    whose projections share a bucket are matched with each other's XOR
    partners. Sampled positions left over are paired randomly together with
    their partners. The returned pairs are disjoint, so the corresponding
    swaps commute.
    """
    n = t.dims[mode - 1]
    if n < 2:
        return []
    rng = np.random.default_rng(seed)

    picks = np.arange(0, n - 1, 2, dtype=np.int64)
    picks = picks + (rng.random(picks.size) >= 0.5).astype(np.int64)
    # odd tail: the last position has no partner but can still be sampled
    if n % 2 == 1:
        picks = np.append(picks, n - 1)

    mat = slice_matrix(t.apply_permutation(p), mode)
    vecs = mat[picks]
    r = rng.standard_normal(mat.shape[1])
    norms = np.sqrt((vecs * vecs).sum(axis=1)) * np.sqrt((r * r).sum())
    proj = np.where(norms > 0, vecs @ r / np.where(norms > 0, norms, 1.0), 0.0)

    num_buckets = max(1, n // 8)
    lo, hi = float(proj.min()), float(proj.max())
    width = max((hi - lo) / num_buckets, 1e-12)
    bucket = np.minimum((proj - lo) // width, num_buckets - 1).astype(np.int64)

    pairs = []
    used = set()
    pool = []

    def emit(i, j):
        # partner indices may fall off the end when n is odd
        if i < n and j < n and i not in used and j not in used:
            pairs.append((int(i), int(j)))
            used.add(int(i))
            used.add(int(j))
            return True
        return False

    for bk in np.unique(bucket):
        members = picks[bucket == bk]
        members = members[rng.permutation(members.size)]
        k = 0
        while k + 1 < members.size:
            i1, i2 = int(members[k]), int(members[k + 1])
            if not emit(i1, i2 ^ 1):
                pool.append(i1)
            if not emit(i1 ^ 1, i2):
                pool.append(i2)
            k += 2
        if k < members.size:
            pool.append(int(members[k]))

    # leftovers together with their free partners are paired randomly
    cand = []
    for i in pool:
        if i not in used:
            cand.append(i)
        j = i ^ 1
        if j < n and j not in used:
            cand.append(j)
    cand = sorted(set(cand))
    cand = [cand[j] for j in rng.permutation(len(cand))]
    for k in range(0, len(cand) - 1, 2):
        pairs.append((cand[k], cand[k + 1]))
    return pairs


def _other_axes_grid(dims, axis, sample_budget, rng):
    """Positions of the non-fixed modes: full grid or a sampled subset."""
    other = [n for k, n in enumerate(dims) if k != axis]
    slice_size = int(np.prod(other)) if other else 1
    if sample_budget is not None and slice_size > sample_budget:
        offs = rng.choice(slice_size, size=sample_budget, replace=False)
        scale = slice_size / sample_budget
    else:
        offs = np.arange(slice_size, dtype=np.int64)
        scale = 1.0
    coords = np.stack(np.unravel_index(offs, other), axis=1) if other else \
        np.zeros((1, 0), dtype=np.int64)
    return coords, scale


def _slice_entries(dims, axis, pos, other_coords):
    idx = np.empty((other_coords.shape[0], len(dims)), dtype=np.int64)
    cols = [k for k in range(len(dims)) if k != axis]
    idx[:, cols] = other_coords
    idx[:, axis] = pos
    return idx


def _gather_targets(t: DenseTensor, p: PermutationSet, idx):
    orig = np.empty_like(idx)
    for k in range(idx.shape[1]):
        orig[:, k] = p.perms[k][idx[:, k]]
    flat = np.ravel_multi_index(tuple(orig.T), t.dims)
    return t.values[flat]


def evaluate_swap(t: DenseTensor, p: PermutationSet, model: NttdParams,
                  spec: FoldingSpec, mode: int, pair,
                  sample_budget: int | None = DEFAULT_SAMPLE_BUDGET,
                  rng=None) -> float:
    """Change in squared-error loss if two positions of a mode were swapped.

    Negative means the swap helps. Only entries of the two affected slices
    contribute, and the model predictions there do not move (they depend on
    position, not content), so the delta is exact whenever the full slice is
    evaluated. With a budget, one sampled sub-grid of the other modes is
    shared by both slices and both loss terms, and the sampled delta is
    scaled up to estimate the full one.
    """
    i, j = int(pair[0]), int(pair[1])
    axis = mode - 1
    n = t.dims[axis]
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise IndexError(f"bad swap pair {pair} for mode {mode}")
    if rng is None:
        rng = np.random.default_rng()
    other_coords, scale = _other_axes_grid(t.dims, axis, sample_budget, rng)

    idx_i = _slice_entries(t.dims, axis, i, other_coords)
    idx_j = _slice_entries(t.dims, axis, j, other_coords)
    pred_i, _ = forward_batch(model, fold_batch(spec, idx_i), keep_tape=False)
    pred_j, _ = forward_batch(model, fold_batch(spec, idx_j), keep_tape=False)
    targ_i = _gather_targets(t, p, idx_i)
    targ_j = _gather_targets(t, p, idx_j)

    now = ((pred_i - targ_i) ** 2).sum() + ((pred_j - targ_j) ** 2).sum()
    after = ((pred_i - targ_j) ** 2).sum() + ((pred_j - targ_i) ** 2).sum()
    return float((after - now) * scale)


def update_orders(t: DenseTensor, p: PermutationSet, model: NttdParams,
                  spec: FoldingSpec, seed: int = 0,
                  sample_budget: int | None = DEFAULT_SAMPLE_BUDGET) -> PermutationSet:
    """One sweep of proposed swaps over every mode.

    Deltas for a mode are evaluated against the pre-sweep order of that
    mode; because proposed pairs are disjoint, applying all accepted swaps
    at once changes the loss by exactly the sum of their (exact) deltas, so
    the full-budget sweep never increases the loss.
    """
    rng = np.random.default_rng(seed)
    perms = [q.copy() for q in p.perms]
    current = PermutationSet(perms)
    for mode in range(1, t.order + 1):
        pairs = propose_pairs_lsh(t, current, mode, seed=int(rng.integers(2**63)))
        if not pairs:
            continue
        deltas = [evaluate_swap(t, current, model, spec, mode, pr,
                                sample_budget=sample_budget, rng=rng)
                  for pr in pairs]
        q = current.perms[mode - 1].copy()
        changed = False
        for pr, delta in zip(pairs, deltas):
            if delta < 0.0:
                q[pr[0]], q[pr[1]] = q[pr[1]], q[pr[0]]
                changed = True
        if changed:
            perms = list(current.perms)
            perms[mode - 1] = q
            current = PermutationSet(perms)
    return current


def count_swaps(old: PermutationSet, new: PermutationSet) -> list[int]:
    """Disjoint transpositions applied per mode, from diffing two orders."""
    return [int((a != b).sum()) // 2 for a, b in zip(old.perms, new.perms)]
