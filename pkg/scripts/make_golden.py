"""Regenerate the golden artifact fixture and print its pinned values.

The output is deterministic, so rerunning must reproduce
tests/golden/golden.tcc byte for byte; the acceptance suite pins the
SHA-256 printed here.
"""

import hashlib
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from tencodec.codec import serialize  # noqa: E402
from tencodec.synth import synth_smooth  # noqa: E402
from tencodec.trainer import TrainConfig, compress  # noqa: E402


def main():
    t = synth_smooth((6, 5, 4), seed=3)
    cfg = TrainConfig(lr=0.02, batch_size=256, epochs_per_round=8,
                      max_rounds=2, tol=0.0, seed=11, sample_budget=None)
    art, report = compress(t, rank=2, hidden=3, cfg=cfg)
    blob = serialize(art)
    out = pathlib.Path(__file__).resolve().parents[1] / "tests" / "golden" / "golden.tcc"
    out.write_bytes(blob)
    print(f"wrote {out} ({len(blob)} bytes)")
    print("sha256:", hashlib.sha256(blob).hexdigest())
    print("fitness:", report.final_fitness)
    print("mean.hex:", float(art.mean).hex())
    print("std.hex:", float(art.std).hex())
    print("w_first[0,0].hex:", float(art.params.w_first[0, 0]).hex())
    print("perms:", [q.tolist() for q in art.perms.perms])


if __name__ == "__main__":
    main()
