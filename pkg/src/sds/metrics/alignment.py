"""Minimum-edit-distance alignment and word/character error rates.

The alignment minimizes unit-cost edits and, among minimum-cost alignments,
maximizes the number of exact matches. Those two criteria pin down the
substitution/deletion/insertion counts uniquely (matches + S + D = ref_len and
matches + S + I = hyp_len leave one degree of freedom, which the match count
fixes), so results are deterministic without an explicit backtrace.

The inner DP runs on integer token ids. Both objectives are folded into one
scalar per cell, ``cost * M0 - matches`` with ``M0 > max possible matches``,
so the scan stays a plain shortest-path min. A numba-compiled kernel covers
the hot path (corpus-level scoring does millions of cells); a pure-Python
fallback keeps the module importable without numba.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Sequence

import numpy as np

from sds.metrics.textnorm import TokenSequence, characters_of, normalize_text

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a normal install
    _HAVE_NUMBA = False


class EmptyReference(ValueError):
    """Reference has no tokens; the error rate denominator would be zero."""


class AlignmentCounts(NamedTuple):
    substitutions: int
    deletions: int
    insertions: int
    matches: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


if _HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _align_kernel(r: np.ndarray, h: np.ndarray) -> int:  # pragma: no cover - jitted
        n = r.shape[0]
        m = h.shape[0]
        m0 = (n if n < m else m) + 1
        prev = np.empty(m + 1, np.int64)
        cur = np.empty(m + 1, np.int64)
        for j in range(m + 1):
            prev[j] = j * m0
        for i in range(1, n + 1):
            cur[0] = i * m0
            ri = r[i - 1]
            for j in range(1, m + 1):
                best = prev[j - 1] + (-1 if ri == h[j - 1] else m0)
                up = prev[j] + m0
                if up < best:
                    best = up
                left = cur[j - 1] + m0
                if left < best:
                    best = left
                cur[j] = best
            prev, cur = cur, prev
        return prev[m]

else:

    def _align_kernel(r: np.ndarray, h: np.ndarray) -> int:
        n = len(r)
        m = len(h)
        m0 = min(n, m) + 1
        rl = r.tolist()
        hl = h.tolist()
        prev = [j * m0 for j in range(m + 1)]
        for i in range(1, n + 1):
            cur = [i * m0] + [0] * m
            ri = rl[i - 1]
            for j in range(1, m + 1):
                best = prev[j - 1] + (-1 if ri == hl[j - 1] else m0)
                up = prev[j] + m0
                if up < best:
                    best = up
                left = cur[j - 1] + m0
                if left < best:
                    best = left
                cur[j] = best
            prev = cur
        return prev[m]


def _encode(ref: Sequence[str], hyp: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    table: dict[str, int] = {}
    r = np.empty(len(ref), dtype=np.int32)
    for i, tok in enumerate(ref):
        r[i] = table.setdefault(tok, len(table))
    h = np.empty(len(hyp), dtype=np.int32)
    for i, tok in enumerate(hyp):
        h[i] = table.setdefault(tok, len(table))
    return r, h


def align(ref: Sequence[str], hyp: Sequence[str]) -> AlignmentCounts:
    """Minimum-edit alignment counts between two token sequences."""
    n = len(ref)
    m = len(hyp)
    if n == 0:
        return AlignmentCounts(0, 0, m, 0, 0)
    if m == 0:
        return AlignmentCounts(0, n, 0, 0, n)
    r, h = _encode(ref, hyp)
    v = int(_align_kernel(r, h))
    m0 = min(n, m) + 1
    matches = (-v) % m0
    cost = (v + matches) // m0
    subs = n + m - cost - 2 * matches
    return AlignmentCounts(
        substitutions=subs,
        deletions=n - matches - subs,
        insertions=m - matches - subs,
        matches=matches,
        ref_len=n,
    )


def _tokens(text: str | TokenSequence) -> TokenSequence:
    return normalize_text(text) if isinstance(text, str) else list(text)


def wer(ref: str | TokenSequence, hyp: str | TokenSequence) -> float:
    """Word error rate (S + D + I) / ref_len; may exceed 1."""
    ref_tokens = _tokens(ref)
    if not ref_tokens:
        raise EmptyReference("reference has no words after normalization")
    counts = align(ref_tokens, _tokens(hyp))
    return counts.errors / counts.ref_len


def cer(ref: str | TokenSequence, hyp: str | TokenSequence) -> float:
    """Character error rate over normalized text with spaces removed."""
    ref_chars = characters_of(_tokens(ref))
    if not ref_chars:
        raise EmptyReference("reference has no characters after normalization")
    counts = align(ref_chars, characters_of(_tokens(hyp)))
    return counts.errors / counts.ref_len


def pooled_error_rate(counts: Iterable[AlignmentCounts]) -> float:
    """Corpus-level rate: total errors over total reference length."""
    total_errors = 0
    total_ref = 0
    for c in counts:
        total_errors += c.errors
        total_ref += c.ref_len
    if total_ref == 0:
        raise EmptyReference("pooled reference length is zero")
    return total_errors / total_ref
