"""BLEU and CIDEr on small worked examples, including the classic
clipped-counts case and what the IDF weighting does for CIDEr.
"""

from memcap import EvalPair, bleu, cider

# Clipping: "the" appears twice in the reference, so only two of the
# seven candidate tokens count; modified unigram precision is 2/7.
degenerate = EvalPair(candidate="the the the the the the the".split(),
                      references=["the cat is on the mat".split()])
print("BLEU-1 of the degenerate candidate:", bleu([degenerate], 1),
      "(= 2/7 =", 2 / 7, ")")

# A perfect candidate scores 1.0 at every order.
perfect = EvalPair(candidate="a man is slicing an onion".split(),
                   references=["a man is slicing an onion".split()])
print("BLEU-4 of a perfect candidate:", bleu([perfect], 4))

# Shorter-than-reference candidates pay the brevity penalty even with
# perfect n-gram precision.
short = EvalPair(candidate="the cat".split(),
                 references=["the cat sat".split()])
print("BLEU-2 of a short candidate:", bleu([short], 2))

# CIDEr rewards matching the words that are rare across the corpus.
corpus = [
    EvalPair(candidate="a dog runs fast".split(),
             references=["a dog runs fast".split(), "a dog sprints".split()]),
    EvalPair(candidate="a dog sits still".split(),
             references=["a cat sits still".split()]),
    EvalPair(candidate="birds fly south in autumn".split(),
             references=["birds fly south in autumn".split()]),
]
print("corpus CIDEr:", round(cider(corpus), 4))
