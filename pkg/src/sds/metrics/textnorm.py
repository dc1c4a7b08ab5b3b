"""Shared text normalization for error-rate and diversity scoring.

References and hypotheses pass through the same normalizer so that scoring
differences reflect the models, not formatting.
"""

from __future__ import annotations

import re
import unicodedata

# Anything that is not a word character, whitespace, apostrophe, or hyphen
# becomes a separator. Apostrophes and hyphens survive inside tokens so that
# contractions ("don't") and disfluency fragments ("i-") stay intact.
_PUNCT = re.compile(r"[^\w\s'\-]")

TokenSequence = list[str]


def normalize_text(raw: str) -> TokenSequence:
    """Lowercase, strip punctuation, collapse whitespace; NFC-normalized.

    Edge apostrophes are trimmed (quoting, not contraction); tokens without
    any alphanumeric character are dropped.
    """
    text = unicodedata.normalize("NFC", raw).lower()
    text = _PUNCT.sub(" ", text).replace("_", " ")
    tokens: TokenSequence = []
    for tok in text.split():
        tok = tok.strip("'")
        if tok and any(ch.isalnum() for ch in tok):
            tokens.append(tok)
    return tokens


def characters_of(tokens: TokenSequence) -> list[str]:
    """Character sequence of the normalized text with spaces removed."""
    return list("".join(tokens))
