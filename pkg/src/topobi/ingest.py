"""SPICE-style netlist ingestion and labelled corpus assembly."""

from __future__ import annotations

import json
import math
import random
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import vocab as V
from .errors import CapacityError, ConfigurationError, ParseError, TopoBiError
from .graph import CircuitGraph, Device, Net, canonical_key

TESTBENCH_BEGIN = "* BEGIN TESTBENCH"
TESTBENCH_END = "* END TESTBENCH"

# independent sources are stimulus, not topology
IGNORED_ELEMENTS = frozenset("VI")


@dataclass(frozen=True)
class PortMap:
    """Regexes (case-insensitive, full match) deciding which node names are ports."""

    vss: str = r"0|gnd!?|vss!?|agnd"
    vdd: str = r"vdd!?|vcc|avdd"
    vin: str = r"vin(\d*)"
    vout: str = r"vout(\d*)"

    def classify(self, name: str) -> tuple[str, int | None]:
        low = name.lower()
        if re.fullmatch(self.vss, low):
            return V.VSS, 0
        if re.fullmatch(self.vdd, low):
            return V.VDD, 0
        for kind, pat in (("VIN", self.vin), ("VOUT", self.vout)):
            m = re.fullmatch(pat, low)
            if m:
                num = m.group(1) if m.groups() else ""
                return kind, int(num) if num else None
        return "NET", None


def _logical_lines(text: str) -> list[tuple[int, str]]:
    """Join '+' continuations, drop comments and testbench blocks."""
    out: list[tuple[int, str]] = []
    in_bench = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.upper().startswith(TESTBENCH_BEGIN):
            in_bench = True
            continue
        if stripped.upper().startswith(TESTBENCH_END):
            in_bench = False
            continue
        if in_bench or not stripped or stripped.startswith("*"):
            continue
        stripped = re.split(r"\s;|^;|\$ ", stripped)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("+"):
            if not out:
                raise ParseError("continuation line with nothing to continue", lineno)
            first, prev = out[-1]
            out[-1] = (first, prev + " " + stripped[1:].strip())
        else:
            out.append((lineno, stripped))
    return out


def _mos_family(model: str) -> str:
    """PMOS when the model name starts with "p" or names a p-channel device; NMOS otherwise."""
    low = model.lower()
    return "PM" if low.startswith("p") or any(k in low for k in ("pmos", "pch", "pfet")) else "NM"


def parse_spice_netlist(
    text: str,
    vocab: V.Vocabulary | None = None,
    port_map: PortMap | None = None,
    circuit_type: str | None = None,
) -> CircuitGraph:
    """Parse a flat SPICE deck into a :class:`CircuitGraph`.

    Devices are re-indexed per family in order of first appearance; internal
    nets are numbered ``NET1, NET2, ...`` in order of first appearance.
    """
    vocab = vocab or V.default_vocabulary()
    port_map = port_map or PortMap()
    cards: list[tuple[int, str, list[tuple[frozenset[str], str]]]] = []
    for lineno, line in _logical_lines(text):
        fields = line.split()
        head = fields[0]
        if head.startswith("."):
            directive = head.lower()
            if directive in (".subckt", ".include", ".inc", ".lib"):
                raise ParseError(f"{directive} is not supported (flat decks only)", lineno)
            if directive == ".end":
                break
            continue
        letter = head[0].upper()
        if letter in IGNORED_ELEMENTS:
            continue
        if letter == "M":
            if len(fields) < 6:
                raise ParseError("MOSFET card needs drain gate source bulk model", lineno)
            d, g, s, b, model = fields[1:6]
            family = _mos_family(model)
            terms = [(frozenset("D"), d), (frozenset("G"), g), (frozenset("S"), s), (frozenset("B"), b)]
        elif letter == "Q":
            if len(fields) < 5:
                raise ParseError("BJT card needs collector base emitter model", lineno)
            c, b, e, model = fields[1:5]
            if "pnp" in model.lower():
                raise ParseError("PNP devices are not supported", lineno)
            family = "NPN"
            terms = [(frozenset("C"), c), (frozenset("B"), b), (frozenset("E"), e)]
        elif letter in "RCL":
            if len(fields) < 3:
                raise ParseError(f"{letter} card needs two nodes", lineno)
            family = letter
            if fields[1].lower() == fields[2].lower():
                raise ParseError(f"{head} has both terminals on one node", lineno)
            terms = [(frozenset(V.PASSIVE_ROLE), fields[1]), (frozenset(V.PASSIVE_ROLE), fields[2])]
        elif letter == "D":
            if len(fields) < 3:
                raise ParseError("diode card needs anode and cathode", lineno)
            family = "DIO"
            terms = [(frozenset("P"), fields[1]), (frozenset("N"), fields[2])]
        elif letter == "X":
            raise ParseError("subcircuit instances are not supported", lineno)
        else:
            raise ParseError(f"unsupported element {head!r}", lineno)
        cards.append((lineno, family, terms))
    if not cards:
        raise ParseError("netlist contains no elements")

    # net naming: numbered ports keep their number, the rest fill the gaps
    names: list[str] = []
    for _, _, terms in cards:
        for _, node in terms:
            if node.lower() not in names:
                names.append(node.lower())
    net_of: dict[str, Net] = {}
    taken: dict[str, set[int]] = {"VIN": set(), "VOUT": set()}
    pending: list[tuple[str, str]] = []
    internal = 0
    for name in names:
        kind, idx = port_map.classify(name)
        if kind in (V.VSS, V.VDD):
            net_of[name] = Net(kind)
        elif kind == "NET":
            internal += 1
            net_of[name] = Net("NET", internal)
        elif idx is None:
            pending.append((kind, name))
        else:
            if idx in taken[kind] or idx < 1:
                raise ParseError(f"port {name!r} collides with another {kind} port")
            taken[kind].add(idx)
            net_of[name] = Net(kind, idx)
    for kind, name in pending:
        idx = 1
        while idx in taken[kind]:
            idx += 1
        taken[kind].add(idx)
        net_of[name] = Net(kind, idx)

    graph = CircuitGraph(circuit_type, vocab)
    counters: Counter[str] = Counter()
    for lineno, family, terms in cards:
        counters[family] += 1
        dev = Device(family, counters[family])
        try:
            for pins, node in terms:
                graph.connect(dev, pins, net_of[node.lower()])
        except CapacityError:
            raise
        except TopoBiError as exc:
            raise ParseError(str(exc), lineno) from exc
    return graph


@dataclass
class CorpusEntry:
    source: str
    graph: CircuitGraph
    circuit_type: str
    split: str  # "train" | "validation"

    @property
    def key(self) -> str:
        return canonical_key(self.graph).hex


@dataclass
class Corpus:
    entries: list[CorpusEntry]
    split_ratio: float = 0.9
    seed: int = 0
    key_index: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.key_index:
            for e in self.entries:
                if e.split == "train":
                    self.key_index.setdefault(e.key, e.source)

    @property
    def train(self) -> list[CorpusEntry]:
        return [e for e in self.entries if e.split == "train"]

    @property
    def validation(self) -> list[CorpusEntry]:
        return [e for e in self.entries if e.split == "validation"]

    def counts(self) -> dict[str, dict[str, int]]:
        """Per-type counts: ``{type: {"total": n, "train": n, "validation": n}}``."""
        out = {}
        for t in V.CIRCUIT_TYPES:
            mine = [e for e in self.entries if e.circuit_type == t]
            if mine:
                out[t] = {
                    "total": len(mine),
                    "train": sum(e.split == "train" for e in mine),
                    "validation": sum(e.split == "validation" for e in mine),
                }
        return out

    def save(self, directory: str | Path, header: str = "") -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        payload = {
            "provenance": header,
            "split_ratio": self.split_ratio,
            "seed": self.seed,
            "entries": [
                {"source": e.source, "circuit_type": e.circuit_type, "split": e.split,
                 "key": e.key, "edges": e.graph.to_edge_list()}
                for e in self.entries
            ],
        }
        (directory / "corpus.json").write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
        lines = ([f"# {header}"] if header else []) + ["circuit_type\ttotal\ttrain\tvalidation"]
        for t, c in self.counts().items():
            lines.append(f"{t}\t{c['total']}\t{c['train']}\t{c['validation']}")
        (directory / "counts.tsv").write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, directory: str | Path, vocab: V.Vocabulary | None = None) -> "Corpus":
        data = json.loads((Path(directory) / "corpus.json").read_text())
        entries = [
            CorpusEntry(e["source"], CircuitGraph.from_edge_list(e["edges"], e["circuit_type"], vocab),
                        e["circuit_type"], e["split"])
            for e in data["entries"]
        ]
        return cls(entries, data["split_ratio"], data["seed"])


def read_manifest(path: str | Path) -> list[tuple[Path, str]]:
    path = Path(path)
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise ParseError("manifest rows are 'path<TAB>circuit_type'", lineno)
        file, label = parts[0].strip(), parts[1].strip()
        if label not in V.CIRCUIT_TYPES:
            raise ConfigurationError(f"manifest line {lineno}: unknown circuit type {label!r}")
        p = Path(file)
        rows.append((p if p.is_absolute() else path.parent / p, label))
    return rows


def stratified_split(labels: list[str], ratio: float, seed: int) -> list[str]:
    """Assign "train"/"validation" per item, stratified by label."""
    if not 0.0 <= ratio <= 1.0:
        raise ConfigurationError(f"split ratio must lie in [0, 1], got {ratio}")
    split = ["validation"] * len(labels)
    for label in sorted(set(labels)):
        idx = [i for i, l in enumerate(labels) if l == label]
        random.Random(f"{seed}:{label}").shuffle(idx)
        n_train = math.floor(ratio * len(idx) + 0.5)
        if ratio > 0 and n_train == 0:
            n_train = 1
        for i in idx[:n_train]:
            split[i] = "train"
    return split


def load_corpus(
    manifest: str | Path,
    split_ratio: float = 0.9,
    seed: int = 0,
    vocab: V.Vocabulary | None = None,
    port_map: PortMap | None = None,
    jobs: int = 1,
) -> Corpus:
    rows = read_manifest(manifest)

    def parse(row: tuple[Path, str]) -> CircuitGraph:
        path, label = row
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read {path}: {exc}") from exc
        try:
            return parse_spice_netlist(text, vocab, port_map, label)
        except ParseError as exc:
            raise ParseError(f"{path}: {exc}") from exc

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            graphs = list(pool.map(parse, rows))
    else:
        graphs = [parse(r) for r in rows]
    splits = stratified_split([label for _, label in rows], split_ratio, seed)
    entries = [CorpusEntry(str(p), g, label, s) for (p, label), g, s in zip(rows, graphs, splits)]
    return Corpus(entries, split_ratio, seed)
