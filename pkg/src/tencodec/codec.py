"""Compressed artifact container and its binary format.

Layout (all integers little-endian):

    magic   4 bytes  b"TCCZ"
    version u16      1
    d       u16      original order
    d_prime u16      folded order
    dims    d * u64
    factors d * d_prime * u8   row-major factor matrix
    rank    u32
    hidden  u32
    mean    f64
    std     f64
    seed    u64
    model blob       every parameter array as f64 little-endian row-major,
                     in NttdParams.named_arrays() order
    permutation blob per mode: N_k positions at ceil(log2 N_k) bits each,
                     most significant bit first, zero-padded to a whole
                     number of bytes per mode; modes of length 1 take 0 bits

report_size accounts for every byte; totals equal the file length exactly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .folding import FoldingSpec
from .model import NttdHyper, NttdParams, param_count
from .tensor import MAX_ORDER, PermutationSet

TCC_MAGIC = b"TCCZ"
TCC_VERSION = 1


@dataclass
class CompressedArtifact:
    """Everything needed to reconstruct: model, orders, and normalization."""

    spec: FoldingSpec
    params: NttdParams
    perms: PermutationSet
    mean: float
    std: float
    seed: int

    def __post_init__(self):
        self.perms.check_compatible(self.spec.dims)
        if self.params.hyper.folded_dims != self.spec.folded_dims:
            raise ValueError("model folded dims disagree with the folding spec")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.spec.dims

    @property
    def hyper(self) -> NttdHyper:
        return self.params.hyper


def index_bits(n: int) -> int:
    """Bits needed to address n positions: ceil(log2 n), 0 for n == 1."""
    return int(n - 1).bit_length()


def pack_positions(values: np.ndarray, n: int) -> bytes:
    """Fixed-width big-endian-bit packing of positions in [0, n)."""
    w = index_bits(n)
    if w == 0:
        return b""
    vals = np.asarray(values, dtype=np.uint64)
    shifts = np.arange(w - 1, -1, -1, dtype=np.uint64)
    bits = ((vals[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.reshape(-1)).tobytes()


def unpack_positions(raw: bytes, count: int, n: int) -> np.ndarray:
    w = index_bits(n)
    if w == 0:
        return np.zeros(count, dtype=np.int64)
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), count=count * w)
    weights = (1 << np.arange(w - 1, -1, -1, dtype=np.int64))
    return bits.reshape(count, w).astype(np.int64) @ weights


def _perm_bytes(n: int) -> int:
    return (n * index_bits(n) + 7) // 8


def _header_bytes(d: int, d_prime: int) -> int:
    return 4 + 2 + 2 + 2 + 8 * d + d * d_prime + 4 + 4 + 8 + 8 + 8


def report_size(artifact: CompressedArtifact) -> dict:
    """Byte accounting of the serialized artifact, by section."""
    spec = artifact.spec
    model = 8 * param_count(artifact.hyper)
    perm = sum(_perm_bytes(n) for n in spec.dims)
    header = _header_bytes(spec.d, spec.d_prime)
    return {
        "header_bytes": header,
        "model_bytes": model,
        "permutation_bytes": perm,
        "total_bytes": header + model + perm,
        "payload_bytes": model + perm,  # size excluding the fixed header
    }


def serialize(artifact: CompressedArtifact) -> bytes:
    spec = artifact.spec
    buf = io.BytesIO()
    buf.write(TCC_MAGIC)
    buf.write(TCC_VERSION.to_bytes(2, "little"))
    buf.write(spec.d.to_bytes(2, "little"))
    buf.write(spec.d_prime.to_bytes(2, "little"))
    for n in spec.dims:
        buf.write(int(n).to_bytes(8, "little"))
    buf.write(spec.factors.astype(np.uint8).tobytes())
    buf.write(int(artifact.hyper.rank).to_bytes(4, "little"))
    buf.write(int(artifact.hyper.hidden).to_bytes(4, "little"))
    buf.write(np.float64(artifact.mean).tobytes())
    buf.write(np.float64(artifact.std).tobytes())
    buf.write(int(artifact.seed).to_bytes(8, "little"))
    for _, arr in artifact.params.named_arrays():
        buf.write(arr.astype("<f8").tobytes())
    for n, q in zip(spec.dims, artifact.perms.perms):
        buf.write(pack_positions(q, n))
    return buf.getvalue()


def save_artifact(artifact: CompressedArtifact, path):
    with open(path, "wb") as f:
        f.write(serialize(artifact))


def deserialize(raw: bytes) -> CompressedArtifact:
    if len(raw) < 4 or raw[:4] != TCC_MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}", offset=0)
    if raw[4:6] != TCC_VERSION.to_bytes(2, "little"):
        raise FormatError("unsupported artifact version", offset=4)
    if len(raw) < 10:
        raise FormatError("truncated artifact header", offset=len(raw))
    d = int.from_bytes(raw[6:8], "little")
    d_prime = int.from_bytes(raw[8:10], "little")
    if not 1 <= d <= MAX_ORDER or d_prime <= d:
        raise FormatError(f"bad orders d={d} d'={d_prime}", offset=6)
    off = 10
    need = 8 * d + d * d_prime + 4 + 4 + 8 + 8 + 8
    if len(raw) < off + need:
        raise FormatError("truncated artifact header", offset=len(raw))
    dims = tuple(int.from_bytes(raw[off + 8 * k: off + 8 * (k + 1)], "little")
                 for k in range(d))
    off += 8 * d
    factors = np.frombuffer(raw, dtype=np.uint8, count=d * d_prime,
                            offset=off).reshape(d, d_prime).astype(np.int64)
    off += d * d_prime
    try:
        spec = FoldingSpec(dims, factors)
    except ValueError as e:
        raise FormatError(str(e), offset=off - d * d_prime) from e
    rank = int.from_bytes(raw[off:off + 4], "little")
    hidden = int.from_bytes(raw[off + 4:off + 8], "little")
    off += 8
    mean = float(np.frombuffer(raw, dtype="<f8", count=1, offset=off)[0])
    std = float(np.frombuffer(raw, dtype="<f8", count=1, offset=off + 8)[0])
    seed = int.from_bytes(raw[off + 16:off + 24], "little")
    off += 24
    try:
        hyper = NttdHyper(rank, hidden, spec.folded_dims)
    except ValueError as e:
        raise FormatError(str(e), offset=off) from e

    params = NttdParams.zeros(hyper)
    for _, arr in params.named_arrays():
        count = arr.size
        if len(raw) < off + 8 * count:
            raise FormatError("truncated model blob", offset=len(raw))
        arr[...] = np.frombuffer(raw, dtype="<f8", count=count,
                                 offset=off).reshape(arr.shape)
        off += 8 * count

    perms = []
    for n in dims:
        nbytes = _perm_bytes(n)
        if len(raw) < off + nbytes:
            raise FormatError("truncated permutation blob", offset=len(raw))
        perms.append(unpack_positions(raw[off:off + nbytes], n, n))
        off += nbytes
    if off != len(raw):
        raise FormatError("trailing bytes after permutations", offset=off)
    try:
        perm_set = PermutationSet(perms)
    except ValueError as e:
        raise FormatError(f"corrupt permutation: {e}", offset=off) from e
    return CompressedArtifact(spec, params, perm_set, mean, std, seed)


def load_artifact(path) -> CompressedArtifact:
    with open(path, "rb") as f:
        return deserialize(f.read())
