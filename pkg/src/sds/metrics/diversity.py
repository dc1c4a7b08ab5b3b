"""Bigram-overlap diversity scores over response corpora.

All three scores are percentages where lower means more diverse: the
across-sentence score treats every other sentence as a reference for a
clipped BLEU-2, the within-sentence score is the fraction of repeated bigram
occurrences, and the combined score is their geometric mean.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

from sds.metrics.textnorm import TokenSequence


class EmptyCandidate(ValueError):
    pass


class TooFewSentences(ValueError):
    pass


class EmptyCorpus(ValueError):
    pass


def _ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def bleu2(candidate: TokenSequence, references: Sequence[TokenSequence]) -> float:
    """Clipped BLEU with unigram and bigram precisions, as a percent.

    Orders for which the candidate has no n-grams are omitted from the
    geometric mean; any included zero precision zeroes the score. Brevity
    penalty uses the reference length closest to the candidate's (ties go to
    the shorter reference).
    """
    if not candidate:
        raise EmptyCandidate("candidate has no tokens")
    if not references:
        raise ValueError("at least one reference is required")

    log_precision_sum = 0.0
    included_orders = 0
    for order in (1, 2):
        cand_counts = _ngram_counts(candidate, order)
        total = sum(cand_counts.values())
        if total == 0:
            continue
        max_ref_counts: Counter = Counter()
        for ref in references:
            for gram, count in _ngram_counts(ref, order).items():
                if count > max_ref_counts[gram]:
                    max_ref_counts[gram] = count
        clipped = sum(min(count, max_ref_counts[gram]) for gram, count in cand_counts.items())
        if clipped == 0:
            return 0.0
        log_precision_sum += math.log(clipped / total)
        included_orders += 1

    c = len(candidate)
    r = min((abs(len(ref) - c), len(ref)) for ref in references)[1]
    brevity = 1.0 if c >= r else math.exp(1.0 - r / c)
    return 100.0 * brevity * math.exp(log_precision_sum / included_orders)


def self_bleu2(corpus: Sequence[TokenSequence]) -> float:
    """Mean BLEU-2 of each sentence against all others; percent."""
    if len(corpus) < 2:
        raise TooFewSentences("need at least two sentences")
    scores = []
    for i, sentence in enumerate(corpus):
        references = [s for j, s in enumerate(corpus) if j != i]
        scores.append(bleu2(sentence, references))
    return sum(scores) / len(scores)


def auto_bleu2(corpus: Sequence[TokenSequence]) -> float:
    """Mean fraction of bigram occurrences repeated within their own
    sentence; percent. Sentences with fewer than two tokens score 0."""
    if not corpus:
        raise EmptyCorpus("corpus is empty")
    scores = []
    for sentence in corpus:
        bigrams = [tuple(sentence[i : i + 2]) for i in range(len(sentence) - 1)]
        if not bigrams:
            scores.append(0.0)
            continue
        counts = Counter(bigrams)
        repeated = sum(1 for gram in bigrams if counts[gram] >= 2)
        scores.append(repeated / len(bigrams))
    return 100.0 * sum(scores) / len(scores)


def vert(self_bleu: float, auto_bleu: float) -> float:
    """Geometric mean of the across- and within-sentence scores."""
    if self_bleu < 0 or auto_bleu < 0:
        raise ValueError("diversity scores must be non-negative")
    return math.sqrt(self_bleu * auto_bleu)
