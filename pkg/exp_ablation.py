"""Scratch experiment: variable-event synthetic task, IAM vs NO_IAM."""
import numpy as np, time, sys
from memcap.data import BOS, EOS, Vocabulary, preprocess_caption, VideoSample
from memcap.metrics import EvalPair, bleu
from memcap.model import AblationVariant, ModelConfig, build_model, generate
from memcap.tensor import Tensor
from memcap.training import TrainConfig, Trainer


class Gen:
    def __init__(self, seed, grid=5, locations=6, depth=10, fpe=2,
                 events_min=2, events_max=4,
                 shapes=("square", "circle", "triangle", "star"),
                 colors=("red", "blue", "green", "yellow"),
                 actions=("slides left", "slides right", "rises", "falls")):
        self.grid, self.locations, self.depth, self.fpe = grid, locations, depth, fpe
        self.events_min, self.events_max = events_min, events_max
        self.shapes, self.colors, self.actions = shapes, colors, actions
        self.channels = len(shapes) + len(colors) + 1
        rng = np.random.default_rng(seed)
        flat = grid * grid * self.channels
        self.proj = rng.standard_normal((flat, locations * depth)) / np.sqrt(flat)
        self.rng = np.random.default_rng(seed + 1)

    def vocabulary(self):
        words = {"a", "then"}
        words.update(self.shapes)
        words.update(self.colors)
        for a in self.actions:
            words.update(a.split())
        return Vocabulary(sorted(words))

    def caption(self, events):
        return " then ".join(f"a {c} {s} {a}" for c, s, a in events)

    def random_event(self):
        return (self.colors[self.rng.integers(len(self.colors))],
                self.shapes[self.rng.integers(len(self.shapes))],
                self.actions[self.rng.integers(len(self.actions))])

    def render(self, event):
        color, shape, action = event
        g = self.grid
        row = col = g // 2
        step = {"slides left": (0, -1), "slides right": (0, 1),
                "rises": (-1, 0), "falls": (1, 0)}[action]
        sp = self.shapes.index(shape)
        cp = len(self.shapes) + self.colors.index(color)
        frames = []
        for t in range(self.fpe):
            canvas = np.zeros((g, g, self.channels))
            canvas[:, :, sp] = 1.0
            canvas[:, :, cp] = 1.0
            r = min(max(row + t * step[0], 0), g - 1)
            c = min(max(col + t * step[1], 0), g - 1)
            canvas[r, c, -1] = 3.0
            feat = canvas.reshape(-1) @ self.proj
            frames.append(Tensor(feat.reshape(self.locations, self.depth)))
        return frames

    def sample(self, i, vocab):
        count = int(self.rng.integers(self.events_min, self.events_max + 1))
        events = [self.random_event()]
        while len(events) < count:
            e = self.random_event()
            if e != events[-1]:
                events.append(e)
        frames = []
        for e in events:
            frames.extend(self.render(e))
        return VideoSample(id=f"syn-{i:04d}", frames=frames,
                           captions=[preprocess_caption(self.caption(events), vocab)],
                           meta={"events": tuple(events)})


def main(hidden, memory, embed, lr, epochs, seeds, variants=(AblationVariant.IAM_TEM, AblationVariant.NO_IAM_TEM)):
    gen = Gen(seed=0)
    vocab = gen.vocabulary()
    samples = [gen.sample(i, vocab) for i in range(200)]
    pairs = [(s.frames, s.captions[0]) for s in samples]
    train_pairs, held = pairs[:160], pairs[160:]
    print("counts:", np.bincount([len(s.meta['events']) for s in samples]), flush=True)

    def bleu4(model):
        evals = []
        for frames, tokens in held:
            g = generate(model, frames, BOS, EOS, max_len=26)
            cand = [t for t in g.tokens if t != EOS]
            ref = [t for t in tokens if t not in (BOS, EOS)]
            evals.append(EvalPair(candidate=cand, references=[ref]))
        return bleu(evals, 4)

    for seed in seeds:
        for variant in variants:
            config = ModelConfig(locations=6, depth=10, hidden=hidden, memory=memory,
                                 embed=embed, vocab_size=len(vocab), layers=1)
            model = build_model(config, variant, seed)
            tc = TrainConfig(lr=lr, batch_size=8, lambda_l2=0.0, epochs=epochs, seed=seed)
            trainer = Trainer(model, train_pairs, tc)
            t0 = time.time()
            for e in range(1, epochs + 1):
                log = trainer.run_epoch()
                if e % 25 == 0:
                    print(f"{variant.value} seed{seed} e{e}: loss {log.train_loss:.4f} "
                          f"B4 {bleu4(model):.4f} ({time.time()-t0:.0f}s)", flush=True)


if __name__ == "__main__":
    main(hidden=int(sys.argv[1]), memory=int(sys.argv[2]), embed=int(sys.argv[3]),
         lr=float(sys.argv[4]), epochs=int(sys.argv[5]),
         seeds=[int(s) for s in sys.argv[6].split(",")],
         variants=[AblationVariant(v) for v in sys.argv[7].split(",")])
