"""Corpus-level automatic metrics over whitespace-tokenized responses.

BLEU-n is corpus-level: clipped n-gram precisions are pooled over all
pairs, combined by geometric mean and scaled by the brevity penalty
min(1, e^(1 - r/c)) with c, r the total candidate/reference token counts.
No smoothing: a zero precision zeroes the score. Reported on a 0-100 scale.

Dist-n divides the number of distinct n-grams across all candidates by the
total number of generated tokens (tokens, not n-grams, by definition here).

ROUGE-n is the per-pair F1 of clipped n-gram overlap, averaged over pairs.
"""

import math
from collections import Counter
from dataclasses import dataclass, field

from .errors import LengthMismatch, MalformedRecord
from .rerank import read_responses

BLEU_ORDERS = (1, 2, 4)
DIST_ORDERS = (1, 2, 3, 4)
ROUGE_ORDERS = (1, 2, 4)


def _tokens(text: str) -> list[str]:
    return text.split()


def ngrams(tokens: list[str], n: int) -> Counter:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _check_pairs(candidates, references):
    if len(candidates) != len(references):
        raise LengthMismatch(f"{len(candidates)} candidates vs {len(references)} references")
    if len(candidates) == 0:
        raise LengthMismatch("need at least one pair")


def bleu_n(candidates: list[str], references: list[str], n: int) -> float:
    """Corpus BLEU with orders 1..n, on the 0-100 scale."""
    _check_pairs(candidates, references)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    matched = [0] * n
    total = [0] * n
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        c_toks, r_toks = _tokens(cand), _tokens(ref)
        cand_len += len(c_toks)
        ref_len += len(r_toks)
        for order in range(1, n + 1):
            c_grams = ngrams(c_toks, order)
            r_grams = ngrams(r_toks, order)
            matched[order - 1] += sum(min(c, r_grams[g]) for g, c in c_grams.items())
            total[order - 1] += sum(c_grams.values())
    if cand_len == 0 or any(t == 0 for t in total) or any(m == 0 for m in matched):
        return 0.0
    log_precision = sum(math.log(m / t) for m, t in zip(matched, total)) / n
    brevity = min(1.0, math.exp(1.0 - ref_len / cand_len))
    return 100.0 * brevity * math.exp(log_precision)


def dist_n(candidates: list[str], n: int) -> float:
    """Distinct n-grams across all candidates, scaled by total tokens."""
    if len(candidates) == 0:
        raise LengthMismatch("need at least one candidate")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    distinct = set()
    total_tokens = 0
    for cand in candidates:
        toks = _tokens(cand)
        total_tokens += len(toks)
        distinct.update(tuple(toks[i : i + n]) for i in range(len(toks) - n + 1))
    if total_tokens == 0:
        return 0.0
    return len(distinct) / total_tokens


def rouge_n_f(candidates: list[str], references: list[str], n: int) -> float:
    """Mean per-pair F1 of n-gram overlap, in [0, 1]."""
    _check_pairs(candidates, references)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    scores = []
    for cand, ref in zip(candidates, references):
        c_grams = ngrams(_tokens(cand), n)
        r_grams = ngrams(_tokens(ref), n)
        overlap = sum(min(c, r_grams[g]) for g, c in c_grams.items())
        c_total = sum(c_grams.values())
        r_total = sum(r_grams.values())
        if overlap == 0 or c_total == 0 or r_total == 0:
            scores.append(0.0)
            continue
        precision = overlap / c_total
        recall = overlap / r_total
        scores.append(2 * precision * recall / (precision + recall))
    return sum(scores) / len(scores)


@dataclass
class MetricsReport:
    bleu: dict[int, float] = field(default_factory=dict)  # 0-100
    dist: dict[int, float] = field(default_factory=dict)
    rouge_f: dict[int, float] = field(default_factory=dict)  # 0-1
    n_responses: int = 0
    n_tokens: int = 0
    adv_success: float | None = None

    def as_rows(self) -> list[tuple[str, float]]:
        """Canonical (name, value) rows for the delimited report file."""
        rows = [(f"bleu{n}", self.bleu[n]) for n in sorted(self.bleu)]
        rows += [(f"dist{n}", self.dist[n]) for n in sorted(self.dist)]
        rows += [(f"rouge{n}_f", self.rouge_f[n]) for n in sorted(self.rouge_f)]
        rows += [("n_responses", float(self.n_responses)), ("n_tokens", float(self.n_tokens))]
        if self.adv_success is not None:
            rows.append(("adv_success", self.adv_success))
        return rows


@dataclass(frozen=True)
class NSettings:
    """Which n-gram orders each metric reports."""

    bleu: tuple[int, ...] = BLEU_ORDERS
    dist: tuple[int, ...] = DIST_ORDERS
    rouge: tuple[int, ...] = ROUGE_ORDERS


def evaluate_pairs(
    candidates: list[str], references: list[str], n_settings: NSettings = NSettings()
) -> MetricsReport:
    report = MetricsReport(
        bleu={n: bleu_n(candidates, references, n) for n in n_settings.bleu},
        dist={n: dist_n(candidates, n) for n in n_settings.dist},
        rouge_f={n: rouge_n_f(candidates, references, n) for n in n_settings.rouge},
        n_responses=len(candidates),
        n_tokens=sum(len(_tokens(c)) for c in candidates),
    )
    return report


def evaluate_all(responses_path, n_settings: NSettings = NSettings()) -> MetricsReport:
    """Metrics over the (hypothesis, reference) pairs of a responses file."""
    records = read_responses(responses_path)
    try:
        candidates = [str(r["hypothesis"]) for r in records]
        references = [str(r["reference"]) for r in records]
    except KeyError as exc:
        raise MalformedRecord(f"{responses_path}: missing field {exc}") from None
    return evaluate_pairs(candidates, references, n_settings)


def write_report(report: MetricsReport, path) -> None:
    """Tab-delimited name/value rows, one metric per line."""
    with open(path, "w", encoding="utf-8") as f:
        for name, value in report.as_rows():
            f.write(f"{name}\t{value:.10g}\n")


def read_report(path) -> dict[str, float]:
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            name, value = line.rstrip("\n").split("\t")
            out[name] = float(value)
    return out
