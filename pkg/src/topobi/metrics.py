"""Validity, novelty, type accuracy and boundary n-gram memorisation metrics."""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import vocab as V
from .errors import ConfigurationError, TopoBiError
from .graph import canonical_key
from .lm import Outcome, SampleResult
from .sequence import CircuitSequence, parse_sequence
from .spice import translate_to_spice


@dataclass
class Sample:
    sample_id: str
    circuit_type: str
    outcome: Outcome
    sequence: CircuitSequence
    seed: int = 0

    @classmethod
    def from_result(cls, sample_id: str, result: SampleResult) -> "Sample":
        return cls(sample_id, result.circuit_type, result.outcome, result.sequence, result.seed)


@dataclass(frozen=True)
class Assessment:
    """Per-sample verdict: translatable (hence valid) and, if so, its canonical key."""

    valid: bool
    key: str | None
    reason: str = ""


def assess(sample: Sample | SampleResult) -> Assessment:
    if sample.outcome is not Outcome.TERMINATED:
        return Assessment(False, None, sample.outcome.value)
    try:
        graph = parse_sequence(sample.sequence)
        translate_to_spice(graph, refine=False)
    except TopoBiError as exc:
        return Assessment(False, None, str(exc))
    return Assessment(True, canonical_key(graph).hex)


def assess_all(samples: Sequence[Sample | SampleResult], jobs: int = 1) -> list[Assessment]:
    if jobs > 1 and len(samples) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(assess, samples, chunksize=max(1, len(samples) // (jobs * 8))))
    return [assess(s) for s in samples]


def _require(samples: Sequence) -> None:
    if not samples:
        raise ConfigurationError("metric needs at least one sample")


def validity_rate(samples: Sequence[Sample | SampleResult],
                  assessments: Sequence[Assessment] | None = None) -> float:
    """Share of samples that terminated and translate to SPICE."""
    _require(samples)
    assessments = assessments if assessments is not None else assess_all(samples)
    return sum(a.valid for a in assessments) / len(samples)


def novelty_rate(samples: Sequence[Sample | SampleResult], train_keys: Iterable[str],
                 assessments: Sequence[Assessment] | None = None) -> float:
    """Share of valid samples whose canonical key is not a training key.

    Invalid samples are left out of the denominator; with no valid sample the
    rate is 0.0.
    """
    _require(samples)
    assessments = assessments if assessments is not None else assess_all(samples)
    keys = set(train_keys)
    valid = [a for a in assessments if a.valid]
    if not valid:
        return 0.0
    return sum(a.key not in keys for a in valid) / len(valid)


def valid_and_novel_rate(samples: Sequence[Sample | SampleResult], train_keys: Iterable[str],
                         assessments: Sequence[Assessment] | None = None) -> float:
    """Share of all samples that are both valid and novel."""
    _require(samples)
    assessments = assessments if assessments is not None else assess_all(samples)
    keys = set(train_keys)
    return sum(a.valid and a.key not in keys for a in assessments) / len(samples)


def _tokens(s: Sample | SampleResult | CircuitSequence | Sequence[str]) -> list[str]:
    if isinstance(s, (Sample, SampleResult)):
        return s.sequence.tokens
    if isinstance(s, CircuitSequence):
        return s.tokens
    return [t for t in s if t != V.TRUNCATE]


def training_windows(train: Iterable[CircuitSequence | Sequence[str]], n: int = 10,
                     anywhere: bool = False) -> set[tuple[str, ...]]:
    """Leading and trailing ``n``-token windows of each training sequence (every window if ``anywhere``)."""
    out: set[tuple[str, ...]] = set()
    for seq in train:
        toks = _tokens(seq)
        if len(toks) < n:
            continue
        if anywhere:
            out.update(tuple(toks[i:i + n]) for i in range(len(toks) - n + 1))
        else:
            out.add(tuple(toks[:n]))
            out.add(tuple(toks[-n:]))
    return out


@dataclass(frozen=True)
class MatchCounts:
    matched: int
    eligible: int
    too_short: int

    @property
    def rate(self) -> float:
        return self.matched / self.eligible if self.eligible else 0.0


def ngram_match_counts(samples: Iterable, train: Iterable, n: int = 10, anywhere: bool = False,
                       windows: set[tuple[str, ...]] | None = None) -> MatchCounts:
    if n < 1:
        raise ConfigurationError("n-gram window must be >= 1")
    windows = windows if windows is not None else training_windows(train, n, anywhere)
    matched = eligible = short = 0
    for s in samples:
        toks = _tokens(s)
        if len(toks) < n:
            short += 1
            continue
        eligible += 1
        matched += tuple(toks[:n]) in windows or tuple(toks[-n:]) in windows
    return MatchCounts(matched, eligible, short)


def ngram_match_rate(samples: Iterable, train: Iterable, n: int = 10, anywhere: bool = False) -> float:
    """Share of samples whose first or last ``n`` tokens reappear as a training boundary window.

    Samples shorter than ``n`` are excluded (see :func:`ngram_match_counts`).
    With ``anywhere`` the training side offers every ``n``-window.
    """
    return ngram_match_counts(samples, train, n, anywhere).rate


def read_labels(path: str | Path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise ConfigurationError(f"labels line {lineno}: expected 'sample_id<TAB>predicted_type'")
        out[parts[0].strip()] = parts[1].strip()
    return out


def type_accuracy(samples: Sequence[Sample], labels: Mapping[str, str]) -> float:
    """Share of non-General samples whose external label equals their conditioning type."""
    scored = [s for s in samples if s.circuit_type != "General"]
    missing = [s.sample_id for s in scored if s.sample_id not in labels]
    if missing:
        raise ConfigurationError("labels missing for samples: " + ", ".join(missing[:20])
                                 + (" ..." if len(missing) > 20 else ""))
    if not scored:
        return 0.0
    return sum(labels[s.sample_id] == s.circuit_type for s in scored) / len(scored)


ROWS = (
    ("validity", "Validity"),
    ("novelty", "Novelty"),
    ("valid_and_novel", "Valid & Novel"),
    ("type_accuracy", "Type acc."),
    ("ngram_match_rate", "N-gram match"),
    ("dead_end_rate", "Dead end"),
    ("length_cap_rate", "Length cap"),
)


@dataclass
class GenerationReport:
    """Per-type and aggregate metrics; ``columns`` maps type (and ``"Avg."``) to metric values."""

    columns: dict[str, dict[str, float | None]]
    counts: dict[str, int]
    n: int = 10
    extra: dict[str, str] = field(default_factory=dict)

    def tsv(self, header: Sequence[str] = ()) -> str:
        cols = list(self.columns)
        lines = [f"# {h}" for h in header]
        lines.append("\t" + "\t".join(cols))
        lines.append("Samples\t" + "\t".join(str(self.counts[c]) for c in cols))
        for key, label in ROWS:
            if all(self.columns[c].get(key) is None for c in cols):
                continue
            cells = [_fmt(self.columns[c].get(key)) for c in cols]
            lines.append(label + "\t" + "\t".join(cells))
        return "\n".join(lines) + "\n"

    def summary(self, header: Sequence[str] = ()) -> str:
        lines = [f"# {h}" for h in header]
        agg = self.columns["Avg."]
        lines.append(f"samples={self.counts['Avg.']}")
        for key, _ in ROWS:
            if agg.get(key) is not None:
                lines.append(f"{key}={_fmt(agg[key])}")
        for t, col in self.columns.items():
            if t == "Avg.":
                continue
            for key, _ in ROWS:
                if col.get(key) is not None:
                    lines.append(f"{t}.{key}={_fmt(col[key])}")
        lines.extend(f"{k}={v}" for k, v in sorted(self.extra.items()))
        return "\n".join(lines) + "\n"


def _fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "-"
    return f"{x:.4f}"


def build_report(samples: Sequence[Sample], train_keys: Iterable[str], train_sequences: Sequence,
                 labels: Mapping[str, str] | None = None, n: int = 10, anywhere: bool = False,
                 jobs: int = 1) -> GenerationReport:
    _require(samples)
    keys = set(train_keys)
    assessments = assess_all(samples, jobs)
    windows = training_windows(train_sequences, n, anywhere)
    by_type: dict[str, list[int]] = {}
    for i, s in enumerate(samples):
        by_type.setdefault(s.circuit_type, []).append(i)
    order = [t for t in V.CIRCUIT_TYPES if t in by_type] + sorted(set(by_type) - set(V.CIRCUIT_TYPES))
    groups = [(t, by_type[t]) for t in order] + [("Avg.", list(range(len(samples))))]
    columns: dict[str, dict[str, float | None]] = {}
    counts: dict[str, int] = {}
    short = 0
    for name, idx in groups:
        ss = [samples[i] for i in idx]
        aa = [assessments[i] for i in idx]
        outcomes = Counter(s.outcome for s in ss)
        mc = ngram_match_counts(ss, (), n, anywhere, windows)
        if name == "Avg.":
            short = mc.too_short
        col: dict[str, float | None] = {
            "validity": validity_rate(ss, aa),
            "novelty": novelty_rate(ss, keys, aa),
            "valid_and_novel": valid_and_novel_rate(ss, keys, aa),
            "ngram_match_rate": mc.rate,
            "dead_end_rate": outcomes[Outcome.DEAD_END] / len(ss),
            "length_cap_rate": outcomes[Outcome.LENGTH_CAPPED] / len(ss),
            "type_accuracy": None,
        }
        if labels is not None and name != "General":
            scored = [s for s in ss if s.circuit_type != "General"]
            col["type_accuracy"] = type_accuracy(scored, labels) if scored else None
        columns[name] = col
        counts[name] = len(ss)
    extra = {"ngram_n": str(n), "ngram_anywhere": str(anywhere).lower(), "ngram_too_short": str(short)}
    return GenerationReport(columns, counts, n, extra)
