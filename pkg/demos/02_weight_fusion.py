"""Average named-tensor weight archives.

Three per-attribute checkpoints are fused into one: first with equal
weights, then with a linear combination. The archive file format is the
common single-file layout (length-prefixed JSON header followed by raw
little-endian tensor data), so fused outputs load in standard tooling.
"""

import tempfile
from pathlib import Path

import numpy as np

from askalign.fusion import average_tensor_archives
from askalign.tensor_archive import TensorArchive

rng = np.random.default_rng(7)

checkpoints = []
for attribute in ("clarity", "focus", "answerability"):
    archive = TensorArchive(metadata={"attribute": attribute})
    archive.add("proj.weight", rng.normal(size=(6, 4)).astype(np.float32))
    archive.add("proj.bias", rng.normal(size=6).astype(np.float32))
    checkpoints.append(archive)
    print(f"checkpoint for {attribute}: proj.weight[0,0] = "
          f"{archive.entries['proj.weight'][0, 0]:+.4f}")

equal = average_tensor_archives(checkpoints)
print(f"\nequal-weight fusion:   proj.weight[0,0] = "
      f"{equal.entries['proj.weight'][0, 0]:+.4f}")

tilted = average_tensor_archives(checkpoints, weights=[2.0, 1.0, 1.0])
print(f"2:1:1 linear fusion:   proj.weight[0,0] = "
      f"{tilted.entries['proj.weight'][0, 0]:+.4f}")
print(f"fusion provenance: weights={tilted.metadata['weights']}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "fused.tns"
    equal.save(path)
    loaded = TensorArchive.load(path)
    assert all(np.array_equal(loaded.entries[n], equal.entries[n])
               for n in equal.entries)
    print(f"\nsaved and reloaded {path.name}: {len(loaded)} tensors, "
          f"byte-exact round trip")
