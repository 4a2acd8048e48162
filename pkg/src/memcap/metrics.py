"""Corpus-level caption metrics: BLEU-1..4 and CIDEr.

BLEU is the corpus formulation: clipped (modified) n-gram precision
pooled over the corpus, geometric mean over orders, and a brevity
penalty from total candidate length against the summed closest
reference lengths.  No smoothing unless asked; the optional add-one
smoothing bumps every order's clipped count and total by one.

CIDEr here is the plain variant: for each order n in 1..4, the mean
cosine similarity between TF-IDF n-gram count vectors of the candidate
and each of its references (IDF over the reference corpus, one document
per video), averaged over orders and pairs and scaled by 10.  This is
structurally, not numerically, comparable to scores from toolkits that
report the length-penalised "-D" flavour.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass

from .errors import UsageError


@dataclass
class EvalPair:
    """One candidate caption with its (non-empty) reference set.

    Captions are token sequences; any hashable token type works as long
    as candidates and references use the same one.
    """

    candidate: list
    references: list

    def __post_init__(self):
        if not self.references:
            raise UsageError("every candidate needs at least one reference")


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(pairs, n: int = 4, smooth: bool = False) -> float:
    """Corpus BLEU-n over candidate/reference pairs, in [0, 1]."""
    if n not in (1, 2, 3, 4):
        raise UsageError("BLEU order must be 1..4")
    if not pairs:
        raise UsageError("BLEU of an empty corpus")

    matched = [0] * n
    total = [0] * n
    cand_len = 0
    ref_len = 0
    for pair in pairs:
        cand = list(pair.candidate)
        cand_len += len(cand)
        # closest reference length; ties go to the shorter reference
        ref_len += min((abs(len(r) - len(cand)), len(r))
                       for r in pair.references)[1]
        for k in range(1, n + 1):
            counts = _ngrams(cand, k)
            max_ref = Counter()
            for ref in pair.references:
                for gram, c in _ngrams(list(ref), k).items():
                    if c > max_ref[gram]:
                        max_ref[gram] = c
            matched[k - 1] += sum(min(c, max_ref[gram]) for gram, c in counts.items())
            total[k - 1] += sum(counts.values())

    log_sum = 0.0
    for k in range(n):
        m, t = matched[k], total[k]
        if smooth:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_sum += math.log(m / t)
    geo = math.exp(log_sum / n)
    brevity = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / max(1, cand_len))
    return brevity * geo


def _tfidf(counts: Counter, idf: dict) -> dict:
    return {gram: c * idf[gram] for gram, c in counts.items()}


def _cosine(a: dict, b: dict) -> float:
    dot = sum(w * b[gram] for gram, w in a.items() if gram in b)
    na = math.sqrt(sum(w * w for w in a.values()))
    nb = math.sqrt(sum(w * w for w in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def cider_scores(pairs, max_order: int = 4):
    """Per-pair CIDEr scores plus the corpus mean."""
    if not pairs:
        raise UsageError("CIDEr of an empty corpus")
    if len(pairs) < 2:
        warnings.warn("CIDEr IDF over fewer than 2 videos is degenerate",
                      stacklevel=2)

    num_docs = len(pairs)
    per_pair = []
    for order in range(1, max_order + 1):
        doc_freq = Counter()
        for pair in pairs:
            grams = set()
            for ref in pair.references:
                grams.update(_ngrams(list(ref), order))
            doc_freq.update(grams)

        def idf_of(gram):
            return math.log(num_docs) - math.log(max(1.0, doc_freq[gram]))

        for i, pair in enumerate(pairs):
            cand_counts = _ngrams(list(pair.candidate), order)
            idf = {g: idf_of(g) for g in cand_counts}
            cand_vec = _tfidf(cand_counts, idf)
            sims = []
            for ref in pair.references:
                ref_counts = _ngrams(list(ref), order)
                ref_idf = {g: idf_of(g) for g in ref_counts}
                sims.append(_cosine(cand_vec, _tfidf(ref_counts, ref_idf)))
            score = sum(sims) / len(sims)
            if order == 1:
                per_pair.append(score)
            else:
                per_pair[i] += score

    per_pair = [10.0 * s / max_order for s in per_pair]
    return sum(per_pair) / len(per_pair), per_pair


def cider(pairs, max_order: int = 4) -> float:
    """Corpus CIDEr (plain variant), scaled by 10."""
    return cider_scores(pairs, max_order)[0]
