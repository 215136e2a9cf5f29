"""Dense tensor container, mode permutations, and reconstruction metrics.

Values are float64 and stored row-major (last mode varies fastest). Modes are
numbered 1..d in public signatures, matching the usual mode-k convention;
entry coordinates are 0-based.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, FormatError

MAX_ORDER = 8

TCN_MAGIC = b"TCTN"
TCN_VERSION = 1


def _check_dims(dims):
    if not 1 <= len(dims) <= MAX_ORDER:
        raise ValueError(f"tensor order must be in 1..{MAX_ORDER}, got {len(dims)}")
    for n in dims:
        if n < 1:
            raise ValueError(f"mode lengths must be >= 1, got {dims}")


class DenseTensor:
    """Immutable-by-convention dense tensor of float64 values."""

    __slots__ = ("data",)

    def __init__(self, dims, values):
        dims = tuple(int(n) for n in dims)
        _check_dims(dims)
        data = np.asarray(values, dtype=np.float64)
        if data.size != int(np.prod(dims)):
            raise ValueError(
                f"expected {int(np.prod(dims))} values for dims {dims}, got {data.size}"
            )
        data = np.ascontiguousarray(data.reshape(dims))
        if not np.isfinite(data).all():
            raise ValueError("tensor values must all be finite")
        self.data = data

    @classmethod
    def from_array(cls, arr) -> "DenseTensor":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr.shape, arr)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def order(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def values(self) -> np.ndarray:
        """Flat row-major view of the entries."""
        return self.data.reshape(-1)

    def _check_index(self, idx):
        idx = tuple(int(i) for i in idx)
        if len(idx) != self.order:
            raise IndexError(f"index arity {len(idx)} != tensor order {self.order}")
        for k, (i, n) in enumerate(zip(idx, self.dims)):
            if not 0 <= i < n:
                raise IndexError(f"coordinate {i} out of range [0, {n}) in mode {k + 1}")
        return idx

    def get(self, idx) -> float:
        return float(self.data[self._check_index(idx)])

    def set(self, idx, value) -> "DenseTensor":
        """Return a copy with one entry replaced."""
        idx = self._check_index(idx)
        if not np.isfinite(value):
            raise ValueError("tensor values must all be finite")
        data = self.data.copy()
        data[idx] = value
        return DenseTensor.from_array(data)

    def slice(self, mode: int, index: int) -> "DenseTensor":
        """Sub-tensor at a fixed position of one mode (1-based mode number)."""
        if not 1 <= mode <= self.order:
            raise IndexError(f"mode {mode} out of range 1..{self.order}")
        if not 0 <= index < self.dims[mode - 1]:
            raise IndexError(f"slice index {index} out of range for mode {mode}")
        sub = np.take(self.data, index, axis=mode - 1)
        if sub.ndim == 0:
            sub = sub.reshape(1)
        return DenseTensor.from_array(np.ascontiguousarray(sub))

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def apply_permutation(self, p: "PermutationSet") -> "DenseTensor":
        """Reordered view: result(i) == self(p(i)) entrywise."""
        p.check_compatible(self.dims)
        return DenseTensor.from_array(self.data[np.ix_(*p.perms)])


class PermutationSet:
    """One permutation of slice positions per mode.

    perms[k][i] is the original position of the slice placed at position i of
    mode k+1 in the reordered tensor.
    """

    __slots__ = ("perms", "inv")

    def __init__(self, perms):
        self.perms = tuple(np.asarray(q, dtype=np.int64) for q in perms)
        inv = []
        for k, q in enumerate(self.perms):
            n = q.size
            if q.ndim != 1:
                raise ValueError("each mode permutation must be a 1-d sequence")
            check = np.zeros(n, dtype=bool)
            if n and (q.min() < 0 or q.max() >= n):
                raise ValueError(f"mode {k + 1} permutation has out-of-range values")
            check[q] = True
            if not check.all():
                raise ValueError(f"mode {k + 1} permutation is not a bijection")
            iq = np.empty(n, dtype=np.int64)
            iq[q] = np.arange(n, dtype=np.int64)
            inv.append(iq)
        self.inv = tuple(inv)

    @classmethod
    def identity(cls, dims) -> "PermutationSet":
        return cls([np.arange(n, dtype=np.int64) for n in dims])

    @classmethod
    def random(cls, dims, seed=0) -> "PermutationSet":
        rng = np.random.default_rng(seed)
        return cls([rng.permutation(n).astype(np.int64) for n in dims])

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(q.size for q in self.perms)

    def inverse(self) -> "PermutationSet":
        return PermutationSet([q.copy() for q in self.inv])

    def check_compatible(self, dims):
        if self.dims != tuple(dims):
            raise ValueError(f"permutation dims {self.dims} != tensor dims {tuple(dims)}")

    def swapped(self, mode: int, i: int, j: int) -> "PermutationSet":
        """Copy with two positions of one mode exchanged (1-based mode)."""
        perms = [q.copy() for q in self.perms]
        q = perms[mode - 1]
        q[i], q[j] = q[j], q[i]
        return PermutationSet(perms)


def fitness(original: DenseTensor, approx: DenseTensor) -> float:
    """1 - relative Frobenius error. 1.0 is exact; can go negative."""
    if original.dims != approx.dims:
        raise ValueError(f"dims mismatch: {original.dims} vs {approx.dims}")
    denom = original.frobenius_norm()
    if denom == 0.0:
        raise DomainError("fitness undefined for a zero tensor")
    return 1.0 - float(np.linalg.norm(original.values - approx.values)) / denom


def _box_sum(a: np.ndarray) -> np.ndarray:
    """Sum over the 3^d window centered at each cell, truncated at borders."""
    out = a
    for axis in range(a.ndim):
        shifted_lo = np.zeros_like(out)
        shifted_hi = np.zeros_like(out)
        src_lo = [slice(None)] * out.ndim
        dst_lo = [slice(None)] * out.ndim
        src_lo[axis] = slice(1, None)
        dst_lo[axis] = slice(None, -1)
        shifted_lo[tuple(dst_lo)] = out[tuple(src_lo)]
        shifted_hi[tuple(src_lo)] = out[tuple(dst_lo)]
        out = out + shifted_lo + shifted_hi
    return out


def smoothness(t: DenseTensor) -> float:
    """1 - (mean local window std) / (global std), windows are 3 per mode.

    Windows are truncated at tensor boundaries; standard deviations are
    population ones. Constant tensors have no defined smoothness.
    """
    x = t.data
    sigma = float(x.std())
    if sigma == 0.0:
        raise DomainError("smoothness undefined for a constant tensor")
    counts = _box_sum(np.ones_like(x))
    mean = _box_sum(x) / counts
    var = _box_sum(x * x) / counts - mean * mean
    np.maximum(var, 0.0, out=var)
    return 1.0 - float(np.sqrt(var).mean()) / sigma


def save_tensor(t: DenseTensor, path):
    """Write the binary tensor container (little-endian, row-major float64)."""
    with open(path, "wb") as f:
        f.write(TCN_MAGIC)
        f.write(TCN_VERSION.to_bytes(2, "little"))
        f.write(t.order.to_bytes(2, "little"))
        for n in t.dims:
            f.write(int(n).to_bytes(8, "little"))
        f.write(t.values.astype("<f8").tobytes())


def _load_tensor_binary(raw: bytes) -> DenseTensor:
    if len(raw) < 8:
        raise FormatError("truncated tensor header", offset=len(raw))
    if raw[4:6] != TCN_VERSION.to_bytes(2, "little"):
        raise FormatError("unsupported tensor container version", offset=4)
    d = int.from_bytes(raw[6:8], "little")
    if not 1 <= d <= MAX_ORDER:
        raise FormatError(f"bad tensor order {d}", offset=6)
    off = 8
    if len(raw) < off + 8 * d:
        raise FormatError("truncated dims block", offset=len(raw))
    dims = [int.from_bytes(raw[off + 8 * k: off + 8 * (k + 1)], "little") for k in range(d)]
    off += 8 * d
    count = int(np.prod(dims)) if all(n >= 1 for n in dims) else -1
    if count < 1:
        raise FormatError(f"bad dims {dims}", offset=8)
    if len(raw) != off + 8 * count:
        raise FormatError(
            f"expected {8 * count} value bytes, found {len(raw) - off}", offset=off
        )
    values = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
    try:
        return DenseTensor(dims, values)
    except ValueError as e:
        raise FormatError(str(e), offset=off) from e


def _load_tensor_text(text: str) -> DenseTensor:
    lines = text.strip().splitlines()
    if not lines:
        raise FormatError("empty tensor text", offset=0)
    try:
        dims = [int(tok) for tok in lines[0].split()]
        values = np.array(" ".join(lines[1:]).split(), dtype=np.float64)
    except ValueError as e:
        raise FormatError(f"malformed tensor text: {e}", offset=0) from e
    if not dims:
        raise FormatError("missing dims line", offset=0)
    try:
        return DenseTensor(dims, values)
    except ValueError as e:
        raise FormatError(str(e), offset=0) from e


def load_tensor(path) -> DenseTensor:
    """Read a tensor file, binary or text, detected by the magic bytes."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] == TCN_MAGIC:
        return _load_tensor_binary(raw)
    if len(raw) >= 4 and not raw[:4].isascii():
        raise FormatError(f"bad magic {raw[:4]!r}", offset=0)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise FormatError(f"bad magic {raw[:4]!r}", offset=0) from e
    return _load_tensor_text(text)
