"""The full staged protocol: onboard scripts one at a time, never revisit.

Each stage trains a fresh adapter on the new script (Phase I), rebalances
the replay buffer, replays the buffer through the whole adapter bank while
the router learns the new script (Phase II), rebuilds the prototype
dictionary through the inference path, and evaluates every observed test
split. The lower-triangular accuracy matrix is the whole story: row t is
the state of the world after stage t.

Also shown: single-file checkpoints that restore bit-identically.
"""

import os
import tempfile

from everdex.checkpoint import Checkpoint, load_checkpoint, restore_engine, save_checkpoint
from everdex.config import RunConfig, SynthConfig
from everdex.data import DatasetIndex
from everdex.engine import ContinualEngine
from everdex.io import format_report
from everdex.provider import EmbeddingProvider, PostMap
from everdex.synthdata import generate

scripts = ("CS", "WSC", "SAC", "SS")
synth = SynthConfig(scripts=scripts, chars_per_script=20, zero_shot_chars=24, seed=2)
dataset = generate(synth)
index = DatasetIndex(dataset.records)
provider = EmbeddingProvider(
    synth.dim, dataset.visual, dataset.texts, PostMap(synth.dim, seed=0)
)

run = RunConfig(
    stage_order=scripts,
    adapter_rank=24,
    phase1_epochs=30,
    phase2_epochs=20,
    batch_size=64,
    lr=2e-3,
    router_lr_scale=15.0,
    buffer_capacity=600,
    seed=2,
)
engine = ContinualEngine(provider, index, run)

for t, script in enumerate(scripts, start=1):
    row = engine.run_stage(t)
    cells = " ".join(f"{v:.3f}" for v in row["top1"])
    buffer = engine.buffer.per_script_counts()
    print(f"stage {t} ({script}): top-1 row [{cells}]  buffer {buffer}")

engine.run_zero_shot()
print()
print(format_report(engine.report()))

# -- checkpoint round trip ---------------------------------------------------

with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "stage4.zip")
    save_checkpoint(path, Checkpoint.from_engine(engine))
    size = os.path.getsize(path)

    restored = restore_engine(load_checkpoint(path), provider, index)
    row = restored.evaluate_observed()
    same = row["top1"] == engine.accuracy["top1"][-1]
    print(f"\ncheckpoint: {size} bytes; restored engine reproduces the "
          f"final row exactly: {same}")
