"""Sequence- and word-level error metrics.

Alignment uses the unit-cost Levenshtein DP. When several edits tie, the
backtrace prefers match/substitution, then deletion, then insertion, so
the S/D/I decomposition is deterministic (the total distance is not
affected by the tie-break).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySequenceError


@dataclass(frozen=True)
class EditCounts:
    substitutions: int
    deletions: int
    insertions: int

    @property
    def distance(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def edit_distance(ref, hyp) -> EditCounts:
    """Minimal S+D+I turning ``ref`` into ``hyp``."""
    ref = list(ref)
    hyp = list(hyp)
    R, H = len(ref), len(hyp)
    dist = np.zeros((R + 1, H + 1), dtype=np.int64)
    dist[:, 0] = np.arange(R + 1)  # deletions
    dist[0, :] = np.arange(H + 1)  # insertions
    for i in range(1, R + 1):
        for j in range(1, H + 1):
            sub = dist[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            dele = dist[i - 1, j] + 1
            ins = dist[i, j - 1] + 1
            dist[i, j] = min(sub, dele, ins)
    s = d = ins_count = 0
    i, j = R, H
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i, j] == dist[i - 1, j - 1] + (
            ref[i - 1] != hyp[j - 1]
        ):
            s += ref[i - 1] != hyp[j - 1]
            i -= 1
            j -= 1
        elif i > 0 and dist[i, j] == dist[i - 1, j] + 1:
            d += 1
            i -= 1
        else:
            ins_count += 1
            j -= 1
    return EditCounts(substitutions=int(s), deletions=d, insertions=ins_count)


def ser(refs, hyps) -> float:
    """Percentage of sequences not transcribed exactly."""
    refs, hyps = list(refs), list(hyps)
    if len(refs) != len(hyps):
        raise EmptySequenceError(
            f"reference/hypothesis counts differ: {len(refs)} vs {len(hyps)}"
        )
    if not refs:
        raise EmptySequenceError("empty evaluation set")
    correct = sum(list(r) == list(h) for r, h in zip(refs, hyps))
    return 100.0 * (len(refs) - correct) / len(refs)


def wer(refs, hyps) -> float:
    """Pooled (S + D + I) / total reference words, as a percentage."""
    return corpus_report(refs, hyps)["wer"]


def corpus_report(refs, hyps) -> dict:
    """All evaluation metrics in one JSON-ready dict."""
    refs, hyps = list(refs), list(hyps)
    if len(refs) != len(hyps):
        raise EmptySequenceError(
            f"reference/hypothesis counts differ: {len(refs)} vs {len(hyps)}"
        )
    if not refs:
        raise EmptySequenceError("empty evaluation set")
    n_words = sum(len(list(r)) for r in refs)
    if n_words == 0:
        raise EmptySequenceError("reference corpus has zero words")
    s = d = i = 0
    for r, h in zip(refs, hyps):
        counts = edit_distance(r, h)
        s += counts.substitutions
        d += counts.deletions
        i += counts.insertions
    return {
        "ser": ser(refs, hyps),
        "wer": 100.0 * (s + d + i) / n_words,
        "substitutions": s,
        "deletions": d,
        "insertions": i,
        "n_sequences": len(refs),
        "n_words": n_words,
    }
