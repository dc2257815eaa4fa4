"""One adapter, one script: exact identity at init, useful after training.

Adapters are gated low-rank residuals on top of the frozen encoder. The
up-projection starts at zero, so a fresh adapter is a bit-exact identity -
inserting one can never hurt until training moves it. This script trains a
single stage and shows the retrieval gain, then onboards a second script and
checks the router's hard script decisions.
"""

import numpy as np

from everdex.adapter import adapter_forward, adapter_init
from everdex.config import MODE_FROZEN, RunConfig, SynthConfig
from everdex.data import DatasetIndex
from everdex.engine import ContinualEngine
from everdex.provider import EmbeddingProvider, PostMap
from everdex.router import route_probs, route_select_batch
from everdex.synthdata import generate

# -- identity at initialization --------------------------------------------

params = adapter_init(dim=64, rank=8, seed=0)
e = np.random.default_rng(0).standard_normal((4, 64)).astype(np.float32)
out, _ = adapter_forward(e, params)
print(f"fresh adapter is exact identity: {np.array_equal(out, e)}")

# -- a two-script world ------------------------------------------------------

# Benchmark-strength classes and schedule, two scripts to stay fast.
synth = SynthConfig(scripts=("CS", "WSC"), zero_shot_chars=10, seed=1)
dataset = generate(synth)
index = DatasetIndex(dataset.records)
post_map = PostMap(synth.dim, kind="orthogonal", seed=0)
provider = EmbeddingProvider(synth.dim, dataset.visual, dataset.texts, post_map)

run = RunConfig(
    stage_order=("CS", "WSC"),
    adapter_rank=24,
    phase1_epochs=30,
    phase2_epochs=20,
    batch_size=64,
    lr=2e-3,
    router_lr_scale=15.0,
    buffer_capacity=600,
    seed=1,
)

# Frozen baseline: no adapters, prototypes straight off the encoder.
frozen = ContinualEngine(provider, index, RunConfig(**{
    **run.to_json_dict(), "mode": MODE_FROZEN,
}))
frozen.run_all_stages()

# Trained: per-script adapters, learned routing.
engine = ContinualEngine(provider, index, run)
engine.run_stage(1)
print(f"\nafter stage 1 (CS only): top-1 {engine.accuracy['top1'][0][0]:.3f}")
engine.run_stage(2)

t1 = engine.accuracy["top1"][-1]
f1 = frozen.accuracy["top1"][-1]
print("after stage 2 (CS, WSC):")
print(f"  trained top-1 per script: {t1[0]:.3f} {t1[1]:.3f}")
print(f"  frozen  top-1 per script: {f1[0]:.3f} {f1[1]:.3f}")

# -- hard routing ------------------------------------------------------------

# The router sees frozen pre-insertion features and answers one question:
# which script produced this image? Its argmax picks the adapter.
test_ids = [i for s in ("CS", "WSC") for i in index.test_images_by_script[s]]
truth = np.array([0 if index.by_id[i].script == "CS" else 1 for i in test_ids])
feats = provider.visual_batch(test_ids).astype(np.float32)
picks = route_select_batch(route_probs(feats, engine.router))
print(f"\nrouter script accuracy on test images: {np.mean(picks == truth):.3f}")
