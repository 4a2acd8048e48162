"""Scratch: distractor-frame task probe using the library generator."""
import sys
import time

import numpy as np

from memcap.data import BOS, EOS, SyntheticSpec, generate_synthetic
from memcap.metrics import EvalPair, bleu
from memcap.model import AblationVariant, ModelConfig, build_model, generate
from memcap.training import TrainConfig, Trainer


def main(variant, seed, epochs, noise, ev_min, ev_max, lr):
    spec = SyntheticSpec(seed=0, frames_per_event=2, events_min=ev_min,
                         events_max=ev_max, noise_frames=noise)
    samples, vocab = generate_synthetic(spec, 200)
    pairs = [(s.frames, s.captions[0]) for s in samples]
    train_pairs, held = pairs[:160], pairs[160:]
    lens = sorted({len(s.frames) for s in samples})
    print(f"frame counts {lens[0]}..{lens[-1]}, vocab {len(vocab)}", flush=True)

    def bleu4(model):
        evals = []
        for frames, tokens in held:
            g = generate(model, frames, BOS, EOS, max_len=24)
            cand = [t for t in g.tokens if t != EOS]
            ref = [t for t in tokens if t not in (BOS, EOS)]
            evals.append(EvalPair(candidate=cand, references=[ref]))
        return bleu(evals, 4)

    config = ModelConfig(locations=6, depth=10, hidden=20, memory=16, embed=10,
                         vocab_size=len(vocab), layers=1)
    model = build_model(config, AblationVariant(variant), seed)
    tc = TrainConfig(lr=lr, batch_size=8, lambda_l2=0.0, epochs=epochs, seed=seed)
    trainer = Trainer(model, train_pairs, tc)
    t0 = time.time()
    for e in range(1, epochs + 1):
        log = trainer.run_epoch()
        if e % 25 == 0:
            print(f"{variant} seed{seed} e{e}: loss {log.train_loss:.4f} "
                  f"B4 {bleu4(model):.4f} ({time.time()-t0:.0f}s)", flush=True)


if __name__ == "__main__":
    a = sys.argv[1:]
    main(a[0], int(a[1]), int(a[2]), int(a[3]), int(a[4]), int(a[5]), float(a[6]))
