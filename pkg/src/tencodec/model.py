"""Neural tensor-train decomposition model.

Every entry of the folded tensor is produced on the fly: each folded
coordinate selects an embedding row, an LSTM consumes the embeddings left to
right, and per-step linear heads map the hidden states to tensor-train cores
(row vector, square matrices, column vector). The entry value is the chain
product of those cores, so one entry costs O(d' * (h^2 + R^2)) multiply-adds.

Gradients are computed by hand (backprop through the chain product, the
heads, and the LSTM) so the package has no autodiff dependency. All math is
float64 numpy; batches are processed as (B, .) arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import DenseTensor

# multiply-add counter for matmul/chain work, used by scaling tests
_MAC_COUNT = 0


def reset_mac_counter():
    global _MAC_COUNT
    _MAC_COUNT = 0


def mac_count() -> int:
    return _MAC_COUNT


def _count_macs(n):
    global _MAC_COUNT
    _MAC_COUNT += int(n)


@dataclass(frozen=True)
class NttdHyper:
    """Model shape: TT rank, LSTM width, and the folded mode lengths."""

    rank: int
    hidden: int
    folded_dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "folded_dims", tuple(int(n) for n in self.folded_dims))
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.hidden < 1:
            raise ValueError(f"hidden width must be >= 1, got {self.hidden}")
        if len(self.folded_dims) < 2:
            raise ValueError("need at least two folded modes")
        if min(self.folded_dims) < 1:
            raise ValueError(f"bad folded dims {self.folded_dims}")

    @property
    def d_prime(self) -> int:
        return len(self.folded_dims)

    def distinct_lengths(self) -> list[int]:
        """Distinct folded mode lengths in first-occurrence order."""
        seen = []
        for n in self.folded_dims:
            if n not in seen:
                seen.append(n)
        return seen


class NttdParams:
    """All trainable arrays. Modes with equal folded length share one table.

    Gate rows of the LSTM weights are stacked input, forget, cell, output.
    """

    __slots__ = ("hyper", "tables", "wx", "wh", "b",
                 "w_first", "b_first", "w_mid", "b_mid", "w_last", "b_last")

    def __init__(self, hyper, tables, wx, wh, b,
                 w_first, b_first, w_mid, b_mid, w_last, b_last):
        self.hyper = hyper
        self.tables = tables
        self.wx = wx
        self.wh = wh
        self.b = b
        self.w_first = w_first
        self.b_first = b_first
        self.w_mid = w_mid
        self.b_mid = b_mid
        self.w_last = w_last
        self.b_last = b_last

    @classmethod
    def init(cls, hyper: NttdHyper, seed: int = 0) -> "NttdParams":
        """Seeded initialization.

        Weights and embeddings are uniform(-1/sqrt(h), 1/sqrt(h)). The forget
        gate bias starts at 1.0, other LSTM biases at 0, head biases at 0.1.
        Draw order is fixed (tables, then LSTM, then heads) so artifacts are
        reproducible across platforms.
        """
        rng = np.random.default_rng(seed)
        r, h = hyper.rank, hyper.hidden
        bound = 1.0 / np.sqrt(h)

        def u(*shape):
            return rng.uniform(-bound, bound, size=shape)

        tables = {n: u(n, h) for n in hyper.distinct_lengths()}
        wx = u(4 * h, h)
        wh = u(4 * h, h)
        b = np.zeros(4 * h)
        b[h:2 * h] = 1.0
        w_first = u(r, h)
        w_mid = u(r, r, h)
        w_last = u(r, h)
        b_first = np.full(r, 0.1)
        b_mid = np.full((r, r), 0.1)
        b_last = np.full(r, 0.1)
        return cls(hyper, tables, wx, wh, b,
                   w_first, b_first, w_mid, b_mid, w_last, b_last)

    @classmethod
    def zeros(cls, hyper: NttdHyper) -> "NttdParams":
        r, h = hyper.rank, hyper.hidden
        return cls(hyper, {n: np.zeros((n, h)) for n in hyper.distinct_lengths()},
                   np.zeros((4 * h, h)), np.zeros((4 * h, h)), np.zeros(4 * h),
                   np.zeros((r, h)), np.zeros(r), np.zeros((r, r, h)),
                   np.zeros((r, r)), np.zeros((r, h)), np.zeros(r))

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        """(name, array) pairs in the canonical serialization order."""
        out = [(f"table_{n}", self.tables[n]) for n in self.hyper.distinct_lengths()]
        out += [("wx", self.wx), ("wh", self.wh), ("b", self.b),
                ("w_first", self.w_first), ("b_first", self.b_first),
                ("w_mid", self.w_mid), ("b_mid", self.b_mid),
                ("w_last", self.w_last), ("b_last", self.b_last)]
        return out

    def zeros_like(self) -> "NttdParams":
        h = self.hyper
        return NttdParams(
            h, {n: np.zeros_like(t) for n, t in self.tables.items()},
            np.zeros_like(self.wx), np.zeros_like(self.wh), np.zeros_like(self.b),
            np.zeros_like(self.w_first), np.zeros_like(self.b_first),
            np.zeros_like(self.w_mid), np.zeros_like(self.b_mid),
            np.zeros_like(self.w_last), np.zeros_like(self.b_last))

    def copy(self) -> "NttdParams":
        h = self.hyper
        return NttdParams(
            h, {n: t.copy() for n, t in self.tables.items()},
            self.wx.copy(), self.wh.copy(), self.b.copy(),
            self.w_first.copy(), self.b_first.copy(),
            self.w_mid.copy(), self.b_mid.copy(),
            self.w_last.copy(), self.b_last.copy())

    def table_for_mode(self, t: int) -> np.ndarray:
        return self.tables[self.hyper.folded_dims[t]]


def param_count(hyper: NttdHyper) -> int:
    """Number of trainable scalars for a model of this shape."""
    r, h = hyper.rank, hyper.hidden
    emb = h * sum(hyper.distinct_lengths())
    lstm = 4 * h * (2 * h + 1)
    heads = (h + 1) * (r + r * r + r)
    total = emb + lstm + heads
    assert total <= theoretical_size_check(hyper)
    return total


def theoretical_size_check(hyper: NttdHyper) -> int:
    """Upper bound c*h*(h + R^2 + sum of distinct lengths) with c = 8."""
    r, h = hyper.rank, hyper.hidden
    return 8 * h * (h + r * r + sum(hyper.distinct_lengths()))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Tape:
    """Intermediate activations captured by forward_batch for backprop."""

    __slots__ = ("fidx", "es", "gates", "cs", "tcs", "hs", "prefixes")

    def __init__(self, fidx, es, gates, cs, tcs, hs, prefixes):
        self.fidx = fidx
        self.es = es            # embeddings per step, (B, h)
        self.gates = gates      # (i, f, g, o) per step, each (B, h)
        self.cs = cs            # cell states per step, (B, h); cs[t] is c_t
        self.tcs = tcs          # tanh(c_t) per step
        self.hs = hs            # hidden states per step
        self.prefixes = prefixes  # chain prefixes, (B, R), one per step < d'-1


def _check_fidx(hyper, fidx):
    fidx = np.asarray(fidx, dtype=np.int64)
    squeeze = fidx.ndim == 1
    if squeeze:
        fidx = fidx[None, :]
    if fidx.shape[1] != hyper.d_prime:
        raise IndexError(f"index arity {fidx.shape[1]} != folded order {hyper.d_prime}")
    if fidx.size and (fidx.min() < 0 or (fidx >= np.array(hyper.folded_dims)).any()):
        raise IndexError("folded index out of range")
    return fidx, squeeze


def _mid_core(params, h_t):
    r = params.hyper.rank
    flat = h_t @ params.w_mid.reshape(r * r, -1).T + params.b_mid.reshape(-1)
    return flat.reshape(-1, r, r)


def forward_batch(params: NttdParams, fidx, keep_tape=True):
    """Evaluate entries at folded indices (B, d'). Returns (values, tape)."""
    hyper = params.hyper
    fidx, _ = _check_fidx(hyper, fidx)
    bsz = fidx.shape[0]
    r, h, dp = hyper.rank, hyper.hidden, hyper.d_prime

    es, gates, cs, tcs, hs = [], [], [], [], []
    h_t = np.zeros((bsz, h))
    c_t = np.zeros((bsz, h))
    for t in range(dp):
        e_t = params.table_for_mode(t)[fidx[:, t]]
        z = e_t @ params.wx.T + h_t @ params.wh.T + params.b
        gi = _sigmoid(z[:, :h])
        gf = _sigmoid(z[:, h:2 * h])
        gg = np.tanh(z[:, 2 * h:3 * h])
        go = _sigmoid(z[:, 3 * h:])
        c_prev = c_t
        c_t = gf * c_prev + gi * gg
        tc = np.tanh(c_t)
        h_t = go * tc
        es.append(e_t)
        gates.append((gi, gf, gg, go))
        cs.append(c_t)
        tcs.append(tc)
        hs.append(h_t)
    _count_macs(bsz * dp * 8 * h * h)

    # chain product, left to right as a row vector times square cores
    prefixes = []
    q = hs[0] @ params.w_first.T + params.b_first  # (B, R)
    prefixes.append(q)
    for t in range(1, dp - 1):
        core = _mid_core(params, hs[t])
        q = np.matmul(q[:, None, :], core)[:, 0, :]
        prefixes.append(q)
    last = hs[dp - 1] @ params.w_last.T + params.b_last
    values = (q * last).sum(axis=1)
    _count_macs(bsz * (2 * r * h + (dp - 2) * (r * r * h + r * r) + r))

    tape = Tape(fidx, es, gates, cs, tcs, hs, prefixes) if keep_tape else None
    return values, tape


def forward_entry(params: NttdParams, fidx):
    """Single-entry forward. Returns (value, core chain, tape)."""
    hyper = params.hyper
    arr, squeeze = _check_fidx(hyper, fidx)
    if not squeeze and arr.shape[0] != 1:
        raise IndexError("forward_entry expects a single index")
    values, tape = forward_batch(params, arr)
    dp = hyper.d_prime
    chain = [(tape.hs[0] @ params.w_first.T + params.b_first).reshape(1, -1)]
    for t in range(1, dp - 1):
        chain.append(_mid_core(params, tape.hs[t])[0])
    chain.append((tape.hs[dp - 1] @ params.w_last.T + params.b_last).reshape(-1, 1))
    return float(values[0]), chain, tape


def backward_batch(params: NttdParams, tape: Tape, upstream, grads: NttdParams):
    """Accumulate d(loss)/d(params) into grads given d(loss)/d(values)."""
    hyper = params.hyper
    r, h, dp = hyper.rank, hyper.hidden, hyper.d_prime
    up = np.asarray(upstream, dtype=np.float64)
    bsz = tape.fidx.shape[0]

    dhs = [None] * dp

    # chain product and heads
    last = tape.hs[dp - 1] @ params.w_last.T + params.b_last
    dq = up[:, None] * last
    dlast = up[:, None] * tape.prefixes[dp - 2]
    grads.w_last += dlast.T @ tape.hs[dp - 1]
    grads.b_last += dlast.sum(axis=0)
    dhs[dp - 1] = dlast @ params.w_last
    for t in range(dp - 2, 0, -1):
        core = _mid_core(params, tape.hs[t])
        dcore = tape.prefixes[t - 1][:, :, None] * dq[:, None, :]
        dq = np.matmul(core, dq[:, :, None])[:, :, 0]
        dflat = dcore.reshape(bsz, r * r)
        grads.w_mid += (dflat.T @ tape.hs[t]).reshape(r, r, h)
        grads.b_mid += dflat.sum(axis=0).reshape(r, r)
        dhs[t] = dflat @ params.w_mid.reshape(r * r, h)
    grads.w_first += dq.T @ tape.hs[0]
    grads.b_first += dq.sum(axis=0)
    dhs[0] = dq @ params.w_first

    # LSTM backward pass
    dh_next = np.zeros((bsz, h))
    dc_next = np.zeros((bsz, h))
    for t in range(dp - 1, -1, -1):
        gi, gf, gg, go = tape.gates[t]
        tc = tape.tcs[t]
        c_prev = tape.cs[t - 1] if t > 0 else np.zeros((bsz, h))
        h_prev = tape.hs[t - 1] if t > 0 else np.zeros((bsz, h))
        dh = dhs[t] + dh_next
        do = dh * tc
        dc = dc_next + dh * go * (1.0 - tc * tc)
        di = dc * gg
        df = dc * c_prev
        dg = dc * gi
        dc_next = dc * gf
        dz = np.concatenate(
            [di * gi * (1.0 - gi), df * gf * (1.0 - gf),
             dg * (1.0 - gg * gg), do * go * (1.0 - go)], axis=1)
        grads.wx += dz.T @ tape.es[t]
        grads.wh += dz.T @ h_prev
        grads.b += dz.sum(axis=0)
        dh_next = dz @ params.wh
        de = dz @ params.wx
        _scatter_rows(grads.tables[hyper.folded_dims[t]], tape.fidx[:, t], de)
    return grads


def _scatter_rows(table, idx, rows):
    # bincount per column beats np.add.at for the batch sizes used here
    n = table.shape[0]
    for j in range(table.shape[1]):
        table[:, j] += np.bincount(idx, weights=rows[:, j], minlength=n)


def batch_loss_and_grads(params: NttdParams, fidx, targets):
    """Mean squared error over a batch and its parameter gradients."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.size == 0:
        raise ValueError("empty batch")
    values, tape = forward_batch(params, fidx)
    resid = values - targets
    loss = float((resid * resid).mean())
    grads = params.zeros_like()
    backward_batch(params, tape, 2.0 * resid / resid.size, grads)
    return loss, grads


class Adam:
    """Standard Adam with bias correction; state can be reset in place."""

    def __init__(self, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = None
        self._v = None

    def reset(self):
        self.step_count = 0
        self._m = None
        self._v = None

    def step(self, params: NttdParams, grads: NttdParams):
        pairs = params.named_arrays()
        gmap = dict(grads.named_arrays())
        if self._m is None:
            self._m = {name: np.zeros_like(a) for name, a in pairs}
            self._v = {name: np.zeros_like(a) for name, a in pairs}
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        for name, a in pairs:
            g = gmap[name]
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1**t)
            vhat = v / (1 - b2**t)
            a -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def generate_random_nttd_tensor(dims, rank, hidden, seed=0) -> DenseTensor:
    """Materialize the tensor a freshly initialized model defines.

    The folding layout is the automatic one for these dims; entries are the
    raw model outputs (no normalization), evaluated at every non-padded index.
    """
    from .folding import auto_folding_spec, fold_batch

    spec = auto_folding_spec(dims)
    hyper = NttdHyper(rank, hidden, spec.folded_dims)
    params = NttdParams.init(hyper, seed)
    dims = tuple(int(n) for n in dims)
    total = int(np.prod(dims))
    out = np.empty(total)
    chunk = 1 << 16
    for start in range(0, total, chunk):
        offs = np.arange(start, min(start + chunk, total), dtype=np.int64)
        idx = np.stack(np.unravel_index(offs, dims), axis=1)
        values, _ = forward_batch(params, fold_batch(spec, idx), keep_tape=False)
        out[start:start + offs.size] = values
    return DenseTensor(dims, out)
