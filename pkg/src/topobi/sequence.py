"""Closed-walk serialization of circuit graphs and the inverse parser."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import vocab as V
from .errors import (BadPinSet, DuplicateTerminal, GrammarViolation, InvalidGraph,
                     NotInVocabulary, SequenceOverflow)
from .graph import CircuitGraph, Device, ErcReport, Net, VSS_NET, erc_check, pin_token

MAX_LENGTH = 1024

Node = Device | Net
EdgeKey = tuple[Device, Net]


@dataclass
class CircuitSequence:
    """Unpadded token list; ``tokens[0]`` is the circuit-type token.

    Padding with ``TRUNCATE`` up to ``padded_length`` is implicit and only
    materialised by :meth:`padded`.
    """

    tokens: list[str]
    padded_length: int = MAX_LENGTH
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_tokens(cls, tokens: Iterable[str], padded_length: int = MAX_LENGTH) -> "CircuitSequence":
        toks = list(tokens)
        if V.TRUNCATE in toks:
            cut = toks.index(V.TRUNCATE)
            if any(t != V.TRUNCATE for t in toks[cut:]):
                raise GrammarViolation("token after TRUNCATE", toks.index(V.TRUNCATE, cut))
            toks = toks[:cut]
        return cls(toks, padded_length)

    @property
    def circuit_type(self) -> str | None:
        if self.tokens and self.tokens[0].startswith(V.CIRCUIT_PREFIX):
            return self.tokens[0][len(V.CIRCUIT_PREFIX):]
        return None

    def padded(self) -> list[str]:
        return self.tokens + [V.TRUNCATE] * max(0, self.padded_length - len(self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def __str__(self) -> str:
        return " ".join(self.tokens)


def _pin_for(graph: CircuitGraph, edge: EdgeKey) -> str:
    d, n = edge
    return pin_token(d.family, graph.device_edges(d)[n])


def _bfs_path(start: Node, neighbors: dict, goal) -> list[tuple[EdgeKey, Node]]:
    """Shortest path (as moves) from ``start`` to the first node satisfying ``goal``."""
    prev: dict[Node, tuple[Node, EdgeKey] | None] = {start: None}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        if v is not start and goal(v):
            moves = []
            while prev[v] is not None:
                u, e = prev[v]
                moves.append((e, v))
                v = u
            return moves[::-1]
        for u, e in neighbors[v]:
            if u not in prev:
                prev[u] = (v, e)
                queue.append(u)
    return []


def closed_walk(graph: CircuitGraph, seed: int | None) -> list[Node]:
    """Closed walk from VSS covering every edge, as the list of visited nodes.

    Move priority at each step: an unvisited incident edge, then an edge to an
    unvisited node, then the shortest path to a node that still has an
    unvisited edge. Ties follow a seeded shuffle of every adjacency list.
    """
    rng = random.Random(seed)
    neighbors: dict[Node, list[tuple[Node, EdgeKey]]] = {}
    for d in graph.devices:
        neighbors[d] = [(n, (d, n)) for n in sorted(graph.device_edges(d))]
    for n in graph.nets:
        neighbors[n] = [(d, (d, n)) for d in sorted(graph.net_devices(n))]
    for node in [*graph.devices, *graph.nets]:
        rng.shuffle(neighbors[node])

    total = graph.num_edges
    seen_edges: set[EdgeKey] = set()
    seen_nodes: set[Node] = {VSS_NET}
    v: Node = VSS_NET
    walk: list[Node] = [v]

    def step(e: EdgeKey, u: Node) -> None:
        nonlocal v
        seen_edges.add(e)
        seen_nodes.add(u)
        walk.append(u)
        v = u

    while len(seen_edges) < total:
        move = next(((u, e) for u, e in neighbors[v] if e not in seen_edges), None)
        if move is None:
            move = next(((u, e) for u, e in neighbors[v] if u not in seen_nodes), None)
        if move is not None:
            step(move[1], move[0])
            continue
        path = _bfs_path(v, neighbors, lambda w: any(e not in seen_edges for _, e in neighbors[w]))
        if not path:
            raise InvalidGraph("walk cannot reach the remaining edges")
        for e, u in path:
            step(e, u)
    if v != VSS_NET:
        for e, u in _bfs_path(v, neighbors, lambda w: w == VSS_NET):
            step(e, u)
    if seen_nodes != set(graph.devices) | set(graph.nets) or v != VSS_NET:
        raise InvalidGraph("closed walk does not cover the graph")
    return walk


def serialize_closed_walk(
    graph: CircuitGraph,
    seed: int | None = 0,
    circuit_type: str | None = None,
    max_length: int = MAX_LENGTH,
) -> CircuitSequence:
    """Serialize an ERC-valid graph as a closed walk from VSS.

    Internal nets are renumbered in order of first appearance so that the
    sequence uses ``NET1, NET2, ...`` exactly as grammar-guided decoding would.
    """
    report = erc_check(graph)
    if not report.ok:
        raise InvalidGraph(str(report))
    walk = closed_walk(graph, seed)
    net_names: dict[Net, str] = {}
    tokens = [V.CIRCUIT_PREFIX + (circuit_type or graph.circuit_type or "General")]
    for i, node in enumerate(walk):
        if i > 0:
            prev = walk[i - 1]
            edge = (prev, node) if isinstance(prev, Device) else (node, prev)
            tokens.append(_pin_for(graph, edge))
        if isinstance(node, Net):
            if node not in net_names:
                if node.is_internal:
                    net_names[node] = f"NET{sum(n.is_internal for n in net_names) + 1}"
                else:
                    net_names[node] = node.text
            tokens.append(net_names[node])
        else:
            tokens.append(node.text)
    if len(tokens) >= max_length:
        raise SequenceOverflow(f"walk needs {len(tokens)} tokens; context holds {max_length - 1} before TRUNCATE")
    return CircuitSequence(tokens, max_length)


def _as_tokens(seq: CircuitSequence | Sequence[str]) -> list[str]:
    if isinstance(seq, CircuitSequence):
        return list(seq.tokens)
    return CircuitSequence.from_tokens(seq).tokens


def parse_sequence(seq: CircuitSequence | Sequence[str], vocab: V.Vocabulary | None = None) -> CircuitGraph:
    """Rebuild the circuit graph from a token sequence.

    Re-traversing an existing edge with the same pin token is a no-op; binding
    an already used terminal elsewhere raises :class:`DuplicateTerminal`.
    """
    vocab = vocab or V.default_vocabulary()
    toks = _as_tokens(seq)
    cat = V.TokenCategory
    if not toks or toks[0] not in vocab or vocab.classify(toks[0]) is not cat.CIRCUIT_TYPE:
        raise GrammarViolation("sequence must start with a circuit-type token", 0)
    if len(toks) < 2 or toks[1] != V.VSS:
        raise GrammarViolation("second token must be VSS", 1)
    graph = CircuitGraph(toks[0][len(V.CIRCUIT_PREFIX):], vocab)
    # expected category cycle after the leading net: pin, device, pin, net
    cycle = (cat.PIN, cat.DEVICE, cat.PIN, cat.NET)
    net, device, pin_in = V.VSS, None, None
    for pos in range(2, len(toks)):
        text = toks[pos]
        want = cycle[(pos - 2) % 4]
        try:
            got = vocab.classify(text)
        except NotInVocabulary:
            raise GrammarViolation(f"unknown token {text!r}", pos) from None
        if got is not want:
            raise GrammarViolation(f"expected {want} token, got {text!r}", pos)
        phase = (pos - 2) % 4
        if phase == 0:
            pin_in = text
        elif phase == 1:
            device = text
            _bind(graph, device, pin_in, net, pos)
        elif phase == 2:
            pin_in = text
            prefix = V.pin_roles(text)[0]
            if prefix != V.PIN_PREFIX[Device.parse(device).family]:
                raise GrammarViolation(f"pin {text} does not belong to {device}", pos)
        else:
            net = text
            _bind(graph, device, pin_in, net, pos)
    if (len(toks) - 2) % 4:
        raise GrammarViolation("sequence ends in the middle of a device hop", len(toks))
    return graph


def _bind(graph: CircuitGraph, device: str, pin: str, net: str, pos: int) -> None:
    try:
        graph.add_edge_token(device, pin, net)
    except DuplicateTerminal as exc:
        raise DuplicateTerminal(str(exc), pos) from None
    except BadPinSet as exc:
        raise GrammarViolation(str(exc), pos) from None


def sequence_erc(seq: CircuitSequence | Sequence[str], vocab: V.Vocabulary | None = None) -> ErcReport:
    return erc_check(parse_sequence(seq, vocab))


def check_alternation(tokens: Sequence[str], vocab: V.Vocabulary | None = None) -> bool:
    """Positional check of the Net (Pin Device Pin Net)* body shape."""
    vocab = vocab or V.default_vocabulary()
    cat = V.TokenCategory
    if len(tokens) < 2 or vocab.classify(tokens[0]) is not cat.CIRCUIT_TYPE or tokens[1] != V.VSS:
        return False
    cycle = (cat.PIN, cat.DEVICE, cat.PIN, cat.NET)
    return (len(tokens) - 2) % 4 == 0 and all(
        vocab.classify(t) is cycle[i % 4] for i, t in enumerate(tokens[2:])
    )


# on-disk format: one sequence per line, padding omitted, '#' header lines

def write_sequences(path: str | Path, seqs: Iterable[CircuitSequence], header: Sequence[str] = ()) -> None:
    lines = [f"# {h}" for h in header] + [" ".join(s.tokens) for s in seqs]
    Path(path).write_text("\n".join(lines) + "\n" if lines else "")


def read_sequences(path: str | Path, padded_length: int = MAX_LENGTH) -> list[CircuitSequence]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            continue
        out.append(CircuitSequence.from_tokens(line.split(), padded_length))
    return out
