"""Scratch: library-based ablation gap probe with configurable knobs."""
import sys
import time

import numpy as np

from memcap.data import BOS, EOS, SyntheticSpec, generate_synthetic
from memcap.metrics import EvalPair, bleu
from memcap.model import AblationVariant, ModelConfig, build_model, generate
from memcap.training import TrainConfig, Trainer


def main(variant, seed, epochs, hidden, memory, embed, ev_min, ev_max, fpe, lr):
    spec = SyntheticSpec(seed=0, frames_per_event=fpe,
                         events_min=ev_min, events_max=ev_max,
                         shapes=("square", "circle", "triangle", "star"),
                         colors=("red", "blue", "green", "yellow"))
    samples, vocab = generate_synthetic(spec, 200)
    pairs = [(s.frames, s.captions[0]) for s in samples]
    train_pairs, held = pairs[:160], pairs[160:]

    def bleu4(model):
        evals = []
        for frames, tokens in held:
            g = generate(model, frames, BOS, EOS, max_len=30)
            cand = [t for t in g.tokens if t != EOS]
            ref = [t for t in tokens if t not in (BOS, EOS)]
            evals.append(EvalPair(candidate=cand, references=[ref]))
        return bleu(evals, 4)

    config = ModelConfig(locations=6, depth=10, hidden=hidden, memory=memory,
                         embed=embed, vocab_size=len(vocab), layers=1)
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
    main(a[0], int(a[1]), int(a[2]), int(a[3]), int(a[4]), int(a[5]),
         int(a[6]), int(a[7]), int(a[8]), float(a[9]))
