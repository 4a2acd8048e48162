"""Train every architecture variant on a shared micro-dataset and score
them side by side.

Short schedules flatter the simpler wirings: the full model routes its
context through attention plus a memory LSTM and converges last, so at
demo scale it usually trails.  The real comparison (200 samples, 500
epochs, 5 seeds) runs through the `ablation` preset:
`memcap ablate --config ablation --seeds 5 --workers 2`.
"""

import numpy as np

from memcap import (
    BOS,
    EOS,
    AblationVariant,
    EvalPair,
    ModelConfig,
    SyntheticSpec,
    TrainConfig,
    Trainer,
    bleu,
    build_model,
    generate,
    generate_synthetic,
)

spec = SyntheticSpec(seed=0, frames_per_event=2, events_min=2, events_max=3,
                     noise_frames=4)
samples, vocab = generate_synthetic(spec, 40)
pairs = [(s.frames, s.captions[0]) for s in samples]
train_pairs, held = pairs[:32], pairs[32:]

config = ModelConfig(locations=6, depth=10, hidden=16, memory=12, embed=8,
                     vocab_size=len(vocab), layers=1)

print(f"{'variant':12s}  train_loss  held-out BLEU-4")
for variant in AblationVariant:
    model = build_model(config, variant, seed=0)
    result = Trainer(model, train_pairs,
                     TrainConfig(lr=4e-3, batch_size=8, lambda_l2=0.0,
                                 epochs=75, seed=0)).run()
    evals = []
    for frames, tokens in held:
        gen = generate(model, frames, BOS, EOS, max_len=20)
        cand = [t for t in gen.tokens if t != EOS]
        ref = [t for t in tokens if t not in (BOS, EOS)]
        evals.append(EvalPair(candidate=cand, references=[ref]))
    print(f"{variant.value:12s}  {result.log[-1].train_loss:10.4f}  "
          f"{bleu(evals, 4):.4f}")
