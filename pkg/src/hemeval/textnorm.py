"""Caption text normalization shared by extraction and the text metrics.

Normalization lowercases, turns punctuation into single spaces (keeping
hyphens that sit between word characters), collapses whitespace runs, and
trims. ``normalize_with_offsets`` additionally returns, for every character
of the normalized text, the index of the original character it came from,
so match spans can be reported against the raw caption.
"""

from __future__ import annotations


def _is_word_char(ch: str) -> bool:
    return ch.isalnum()


def normalize_with_offsets(text: str) -> tuple[str, list[int]]:
    """Return (normalized text, offset map normalized-index -> original-index)."""
    chars: list[str] = []
    offsets: list[int] = []
    n = len(text)
    for i, ch in enumerate(text):
        if _is_word_char(ch):
            for low in ch.lower():
                chars.append(low)
                offsets.append(i)
        elif ch == "-" and 0 < i < n - 1 and _is_word_char(text[i - 1]) and _is_word_char(text[i + 1]):
            chars.append("-")
            offsets.append(i)
        else:
            chars.append(" ")
            offsets.append(i)

    out_chars: list[str] = []
    out_offsets: list[int] = []
    for ch, off in zip(chars, offsets):
        if ch == " ":
            if not out_chars or out_chars[-1] == " ":
                continue
        out_chars.append(ch)
        out_offsets.append(off)
    while out_chars and out_chars[-1] == " ":
        out_chars.pop()
        out_offsets.pop()
    return "".join(out_chars), out_offsets


def normalize(text: str) -> str:
    """Normalized text only (see normalize_with_offsets)."""
    return normalize_with_offsets(text)[0]


def tokenize(text: str) -> list[str]:
    """Normalize then split on whitespace. Never yields empty tokens."""
    norm = normalize(text)
    return norm.split(" ") if norm else []


def tokenize_with_spans(normalized: str) -> list[tuple[str, int, int]]:
    """Split an already-normalized string into (token, start, end) triples.

    Assumes single-space separation, which normalize() guarantees.
    """
    out: list[tuple[str, int, int]] = []
    pos = 0
    if not normalized:
        return out
    for tok in normalized.split(" "):
        out.append((tok, pos, pos + len(tok)))
        pos += len(tok) + 1
    return out


def collapse_whitespace(text: str) -> str:
    """Collapse whitespace runs and trim, preserving case and punctuation."""
    return " ".join(text.split())
