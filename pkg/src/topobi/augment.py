"""Structure-preserving augmentation: traversal orders and device renaming."""

from __future__ import annotations

import logging
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import vocab as V
from .errors import CapacityError, InvalidGraph, SequenceOverflow
from .graph import CircuitGraph, erc_check
from .ingest import Corpus
from .sequence import MAX_LENGTH, CircuitSequence, parse_sequence, serialize_closed_walk, write_sequences

log = logging.getLogger(__name__)


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def augment_traversals(
    graph: CircuitGraph,
    K: int,
    seed: int = 0,
    circuit_type: str | None = None,
    max_length: int = MAX_LENGTH,
    diagnostics: list[str] | None = None,
) -> list[CircuitSequence]:
    """Up to ``K`` distinct closed-walk serializations of ``graph``.

    Walks that fail coverage, ERC or the length cap are dropped; reasons are
    appended to ``diagnostics`` when given. Each kept sequence carries its
    walk seed in ``meta["traversal_seed"]``.
    """
    out: list[CircuitSequence] = []
    seen: set[tuple[str, ...]] = set()
    for k in range(K):
        tseed = derive_seed(seed, k)
        try:
            seq = serialize_closed_walk(graph, tseed, circuit_type, max_length)
        except (InvalidGraph, SequenceOverflow) as exc:
            msg = f"traversal {k} (seed {tseed}) discarded: {exc}"
            log.debug(msg)
            if diagnostics is not None:
                diagnostics.append(msg)
            continue
        rebuilt = parse_sequence(seq, graph.vocab)
        if len(rebuilt) != len(graph) or rebuilt.num_edges != graph.num_edges or not erc_check(rebuilt).ok:
            if diagnostics is not None:
                diagnostics.append(f"traversal {k} (seed {tseed}) discarded: coverage/ERC")
            continue
        key = tuple(seq.tokens)
        if key in seen:
            continue
        seen.add(key)
        seq.meta["traversal_seed"] = tseed
        out.append(seq)
    return out


def rename_devices(seq: CircuitSequence, seed: int | None, vocab: V.Vocabulary | None = None) -> CircuitSequence:
    """Relabel device instances with a random per-family injection into ``1..cap``.

    ``seed=None`` is the identity renaming. Nets and pins are untouched, so
    the parsed graph is isomorphic to the input's.
    """
    vocab = vocab or V.default_vocabulary()
    used: dict[str, list[int]] = {}
    for tok in seq.tokens:
        parts = V.split_device(tok)
        if parts and parts[1] not in used.setdefault(parts[0], []):
            used[parts[0]].append(parts[1])
    for fam, idx in used.items():
        cap = vocab.device_limits.get(fam, 0)
        if len(idx) > cap or max(idx) > cap:
            raise CapacityError(f"{len(idx)} {fam} devices (max index {max(idx)}) exceed cap {cap}")
    if seed is None:
        return CircuitSequence(list(seq.tokens), seq.padded_length, dict(seq.meta))
    rng = random.Random(seed)
    mapping: dict[str, str] = {}
    for fam in V.FAMILIES:
        if fam not in used:
            continue
        targets = rng.sample(range(1, vocab.device_limits[fam] + 1), len(used[fam]))
        mapping.update({f"{fam}{i}": f"{fam}{j}" for i, j in zip(used[fam], targets)})
    meta = dict(seq.meta, rename_seed=seed)
    return CircuitSequence([mapping.get(t, t) for t in seq.tokens], seq.padded_length, meta)


@dataclass
class AugmentedRecord:
    sequence: CircuitSequence
    source: str
    circuit_type: str
    traversal_seed: int
    rename_seed: int | None


@dataclass
class AugmentedDataset:
    records: list[AugmentedRecord]

    @property
    def sequences(self) -> list[CircuitSequence]:
        return [r.sequence for r in self.records]

    def counts(self) -> Counter:
        return Counter(r.circuit_type for r in self.records)

    def write(self, path: str | Path, header: Sequence[str] = ()) -> None:
        path = Path(path)
        write_sequences(path, self.sequences, header)
        rows = [f"# {h}" for h in header]
        rows.append("line_no\tsource_path\tcircuit_type\ttraversal_seed\trename_seed")
        for i, r in enumerate(self.records, start=1):
            rs = "-" if r.rename_seed is None else str(r.rename_seed)
            rows.append(f"{i}\t{r.source}\t{r.circuit_type}\t{r.traversal_seed}\t{rs}")
        sidecar_path(path).write_text("\n".join(rows) + "\n")


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".tsv")


def expand_corpus(
    corpus: Corpus,
    traversals_per_circuit: int,
    renames_per_traversal: int,
    seed: int = 0,
    split: str | None = "train",
    multipliers: Mapping[str, tuple[int, int]] | None = None,
    vocab: V.Vocabulary | None = None,
) -> AugmentedDataset:
    """Traversal-augment every circuit, then device-rename each traversal.

    With ``renames_per_traversal == 0`` traversals are kept as-is; otherwise
    each traversal yields that many renamed copies (the unrenamed original is
    not kept). ``multipliers`` maps circuit types to ``(traversals, renames)``
    overrides. Exact duplicates within one circuit are dropped.
    """
    vocab = vocab or V.default_vocabulary()
    multipliers = multipliers or {}
    records: list[AugmentedRecord] = []
    for ci, entry in enumerate(corpus.entries):
        if split is not None and entry.split != split:
            continue
        K, R = multipliers.get(entry.circuit_type, (traversals_per_circuit, renames_per_traversal))
        cseed = derive_seed(seed, ci)
        seen: set[tuple[str, ...]] = set()
        for t_i, seq in enumerate(augment_traversals(entry.graph, K, cseed, entry.circuit_type)):
            tseed = seq.meta["traversal_seed"]
            variants = ([(seq, None)] if R == 0 else
                        [(rename_devices(seq, rs, vocab), rs)
                         for rs in (derive_seed(cseed, t_i, r) for r in range(R))])
            for out, rs in variants:
                key = tuple(out.tokens)
                if key in seen:
                    continue
                seen.add(key)
                records.append(AugmentedRecord(out, entry.source, entry.circuit_type, tseed, rs))
    return AugmentedDataset(records)


def table6_rows(corpus: Corpus, dataset: AugmentedDataset, split: str | None = "train") -> str:
    """Per-type raw and augmented counts laid out as two TSV rows plus a Total column."""
    raw = Counter(e.circuit_type for e in corpus.entries if split is None or e.split == split)
    aug = dataset.counts()
    types = [t for t in V.CIRCUIT_TYPES if raw.get(t) or aug.get(t)]
    lines = ["\t" + "\t".join(types) + "\tTotal"]
    for label, c in (("Raw netlist", raw), ("Augmented sequence", aug)):
        lines.append(label + "\t" + "\t".join(str(c.get(t, 0)) for t in types) + f"\t{sum(c.values())}")
    return "\n".join(lines) + "\n"
