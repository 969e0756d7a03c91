"""Bipartite device/net circuit graph, electrical rule checks and canonical keys."""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import networkx as nx

from . import vocab as V
from .errors import BadPinSet, CapacityError, DuplicateTerminal, NotInVocabulary


@dataclass(frozen=True, order=True)
class Device:
    family: str
    index: int

    @property
    def text(self) -> str:
        return f"{self.family}{self.index}"

    @classmethod
    def parse(cls, text: str) -> "Device":
        parts = V.split_device(text)
        if parts is None:
            raise NotInVocabulary(f"not a device token: {text!r}")
        return cls(*parts)

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True, order=True)
class Net:
    kind: str  # VSS, VDD, VIN, VOUT or NET (internal)
    index: int = 0

    @property
    def text(self) -> str:
        return self.kind if self.kind in (V.VSS, V.VDD) else f"{self.kind}{self.index}"

    @property
    def is_internal(self) -> bool:
        return self.kind == "NET"

    @property
    def is_supply(self) -> bool:
        return self.kind in (V.VSS, V.VDD)

    @classmethod
    def parse(cls, text: str) -> "Net":
        parts = V.split_net(text)
        if parts is None:
            raise NotInVocabulary(f"not a net token: {text!r}")
        return cls(*parts)

    def __str__(self) -> str:
        return self.text


VSS_NET = Net(V.VSS)
VDD_NET = Net(V.VDD)


def pin_label(pins: Iterable[str]) -> str:
    """Stable text form of a role set, in canonical letter order."""
    pins = set(pins)
    for order in V.ROLE_ORDER.values():
        if pins <= set(order):
            return "".join(r for r in order if r in pins)
    return "".join(sorted(pins))


def pin_token(family: str, pins: Iterable[str]) -> str:
    return f"{V.PIN_PREFIX[family]}_{pin_label(pins)}"


def validate_pins(family: str, pins: frozenset[str]) -> None:
    if not pins:
        raise BadPinSet(f"empty pin set for {family}")
    if family in V.PASSIVE_FAMILIES:
        ok = pins == {V.PASSIVE_ROLE}
    elif family == "DIO":
        ok = len(pins) == 1 and pins <= {"P", "N"}
    else:
        ok = pins <= V.required_roles(family)
    if not ok:
        raise BadPinSet(f"pins {pin_label(pins)!r} invalid for family {family}")


@dataclass
class Violation:
    kind: str  # missing_roles | floating_net | disconnected | empty
    subject: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind}: {self.subject}" + (f" ({self.detail})" if self.detail else "")


@dataclass
class ErcReport:
    violations: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "ERC ok"
        return "; ".join(str(v) for v in self.violations)


class CircuitGraph:
    """Bipartite graph of devices and nets joined by pin-typed edges.

    There is at most one edge per (device, net) pair; roles bound to the same
    net are merged into that edge's pin set, so ``M_G`` then ``M_D`` on one
    net is stored exactly like a single ``M_GD``.
    """

    def __init__(self, circuit_type: str | None = None, vocab: V.Vocabulary | None = None):
        self.circuit_type = circuit_type
        self.vocab = vocab
        self._dev: dict[Device, dict[Net, frozenset[str]]] = {}
        self._net: dict[Net, set[Device]] = {}

    # construction -----------------------------------------------------

    def connect(self, device: Device, pins: Iterable[str], net: Net) -> "CircuitGraph":
        pins = frozenset(pins)
        validate_pins(device.family, pins)
        self._check_capacity(device, net)
        adj = self._dev.get(device, {})
        existing = adj.get(net)
        if existing == pins:
            return self
        if device.family in V.PASSIVE_FAMILIES:
            if existing is not None or len(adj) >= 2:
                raise DuplicateTerminal(f"{device} has no free terminal for {net}")
            merged = pins
        else:
            used = frozenset().union(*adj.values()) if adj else frozenset()
            clash = pins & used
            if clash:
                raise DuplicateTerminal(f"{device} role(s) {pin_label(clash)} already connected")
            merged = pins | (existing or frozenset())
        self._dev.setdefault(device, {})[net] = merged
        self._net.setdefault(net, set()).add(device)
        return self

    def _check_capacity(self, device: Device, net: Net) -> None:
        if self.vocab is None:
            return
        cap = self.vocab.device_limits.get(device.family)
        if cap is None or not 1 <= device.index <= cap:
            raise CapacityError(f"{device} exceeds the {device.family} cap of {cap}")
        if not net.is_supply:
            ncap = self.vocab.net_limits[net.kind]
            if not 1 <= net.index <= ncap:
                raise CapacityError(f"{net} exceeds the {net.kind} cap of {ncap}")

    def add_edge_token(self, device: str, pin: str, net: str) -> "CircuitGraph":
        _, roles = V.pin_roles(pin)
        dev = Device.parse(device)
        if V.pin_roles(pin)[0] != V.PIN_PREFIX[dev.family]:
            raise BadPinSet(f"pin token {pin} cannot attach to {device}")
        return self.connect(dev, roles, Net.parse(net))

    def copy(self) -> "CircuitGraph":
        g = CircuitGraph(self.circuit_type, self.vocab)
        g._dev = {d: dict(a) for d, a in self._dev.items()}
        g._net = {n: set(s) for n, s in self._net.items()}
        return g

    # queries ----------------------------------------------------------

    @property
    def devices(self) -> list[Device]:
        return sorted(self._dev)

    @property
    def nets(self) -> list[Net]:
        return sorted(self._net)

    def __len__(self) -> int:
        return len(self._dev) + len(self._net)

    def has_net(self, net: Net) -> bool:
        return net in self._net

    def has_device(self, device: Device) -> bool:
        return device in self._dev

    def device_edges(self, device: Device) -> Mapping[Net, frozenset[str]]:
        return self._dev.get(device, {})

    def net_devices(self, net: Net) -> set[Device]:
        return self._net.get(net, set())

    def used_roles(self, device: Device) -> frozenset[str]:
        adj = self._dev.get(device)
        if not adj:
            return frozenset()
        if device.family in V.PASSIVE_FAMILIES:
            return frozenset(f"T{i}" for i in range(len(adj)))
        return frozenset().union(*adj.values())

    def edges(self) -> Iterator[tuple[Device, frozenset[str], Net]]:
        for d in sorted(self._dev):
            for n in sorted(self._dev[d]):
                yield d, self._dev[d][n], n

    @property
    def num_edges(self) -> int:
        return sum(len(a) for a in self._dev.values())

    def missing_roles(self, device: Device) -> frozenset[str]:
        adj = self._dev.get(device, {})
        if device.family in V.PASSIVE_FAMILIES:
            return frozenset(f"T{i}" for i in range(len(adj) + 1, 3))
        return V.required_roles(device.family) - self.used_roles(device)

    def renamed(self, device_map: Mapping[Device, Device] | None = None,
                net_map: Mapping[Net, Net] | None = None) -> "CircuitGraph":
        """Copy with devices and/or nets relabelled (maps must be injective)."""
        device_map = device_map or {}
        net_map = net_map or {}
        g = CircuitGraph(self.circuit_type, self.vocab)
        for d, pins, n in self.edges():
            g.connect(device_map.get(d, d), pins, net_map.get(n, n))
        return g

    def to_edge_list(self) -> list[list[str]]:
        return [[d.text, pin_token(d.family, p), n.text] for d, p, n in self.edges()]

    @classmethod
    def from_edge_list(cls, rows: Iterable[Iterable[str]], circuit_type: str | None = None,
                       vocab: V.Vocabulary | None = None) -> "CircuitGraph":
        g = cls(circuit_type, vocab)
        for dev, pin, net in rows:
            g.add_edge_token(dev, pin, net)
        return g

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CircuitGraph):
            return NotImplemented
        return self._dev == other._dev

    def __repr__(self) -> str:
        return f"CircuitGraph({self.circuit_type!r}, devices={len(self._dev)}, nets={len(self._net)}, edges={self.num_edges})"


def connect(graph: CircuitGraph, device: Device, pins: Iterable[str], net: Net) -> CircuitGraph:
    return graph.connect(device, pins, net)


def erc_check(graph: CircuitGraph) -> ErcReport:
    """Structural validity: terminal coverage, no floating nets, connected to VSS."""
    report = ErcReport()
    if not graph.devices:
        report.violations.append(Violation("empty", "circuit", "no devices"))
        return report
    for d in graph.devices:
        missing = graph.missing_roles(d)
        if missing:
            detail = (f"{len(missing)} free terminal(s)" if d.family in V.PASSIVE_FAMILIES
                      else "missing " + pin_label(missing))
            report.violations.append(Violation("missing_roles", d.text, detail))
        adj = graph.device_edges(d)
        if len(adj) == 1 and not graph.missing_roles(d):
            report.warnings.append(Violation("short", d.text, "all terminals on one net"))
    for n in graph.nets:
        if n.is_internal and len(graph.net_devices(n)) < 2:
            report.violations.append(Violation("floating_net", n.text, "degree < 2"))
    if not graph.has_net(VSS_NET):
        report.violations.append(Violation("disconnected", "VSS", "reference net absent"))
    else:
        seen_d: set[Device] = set()
        seen_n = {VSS_NET}
        queue: deque[Net] = deque([VSS_NET])
        while queue:
            n = queue.popleft()
            for d in graph.net_devices(n):
                if d in seen_d:
                    continue
                seen_d.add(d)
                for m in graph.device_edges(d):
                    if m not in seen_n:
                        seen_n.add(m)
                        queue.append(m)
        unreached = [d.text for d in graph.devices if d not in seen_d]
        unreached += [n.text for n in graph.nets if n not in seen_n]
        if unreached:
            report.violations.append(Violation("disconnected", ",".join(unreached), "unreachable from VSS"))
    return report


# canonical form -----------------------------------------------------------

def _node_label(node: Device | Net) -> tuple[str, str]:
    if isinstance(node, Device):
        return ("D", node.family)
    return ("N", "NET" if node.is_internal else node.text)


@dataclass(frozen=True)
class CanonicalKey:
    digest: bytes

    @property
    def hex(self) -> str:
        return self.digest.hex()

    def __str__(self) -> str:
        return self.hex


def _rank(signatures: list) -> list[int]:
    order = {s: i for i, s in enumerate(sorted(set(signatures)))}
    return [order[s] for s in signatures]


def _refine(colors: list[int], adj: list[list[tuple[int, str]]]) -> list[int]:
    ncls = len(set(colors))
    while True:
        sigs = [(colors[v], tuple(sorted((lab, colors[u]) for u, lab in adj[v])))
                for v in range(len(colors))]
        new = _rank(sigs)
        k = len(set(new))
        if k == ncls:
            return new
        colors, ncls = new, k


def canonical_form(graph: CircuitGraph) -> tuple:
    """Lexicographically smallest labelled encoding over all canonical orderings.

    Colour refinement seeded by node labels and incident pin sets, then
    individualisation of the first non-singleton cell with backtracking. Twin
    vertices (identical label and neighbourhood) are tried only once since
    swapping them is an automorphism.
    """
    nodes: list[Device | Net] = [*graph.devices, *graph.nets]
    if not nodes:
        return ((), ())
    index = {n: i for i, n in enumerate(nodes)}
    adj: list[list[tuple[int, str]]] = [[] for _ in nodes]
    edges = []
    for d, pins, n in graph.edges():
        lab = pin_label(pins)
        i, j = index[d], index[n]
        adj[i].append((j, lab))
        adj[j].append((i, lab))
        edges.append((i, j, lab))
    labels = [_node_label(n) for n in nodes]
    twin = [(labels[v], frozenset(adj[v])) for v in range(len(nodes))]
    init = _rank([(labels[v], tuple(sorted(lab for _, lab in adj[v]))) for v in range(len(nodes))])

    best: list[tuple | None] = [None]

    def leaf(colors: list[int]) -> tuple:
        pos = colors  # discrete: colour == position
        lab_seq = [None] * len(colors)
        for v, c in enumerate(colors):
            lab_seq[c] = labels[v]
        enc_edges = tuple(sorted((min(pos[i], pos[j]), max(pos[i], pos[j]), lab) for i, j, lab in edges))
        return (tuple(lab_seq), enc_edges)

    def search(colors: list[int]) -> None:
        colors = _refine(colors, adj)
        cells: dict[int, list[int]] = {}
        for v, c in enumerate(colors):
            cells.setdefault(c, []).append(v)
        target = next((c for c in sorted(cells) if len(cells[c]) > 1), None)
        if target is None:
            enc = leaf(colors)
            if best[0] is None or enc < best[0]:
                best[0] = enc
            return
        tried: set = set()
        for v in cells[target]:
            if twin[v] in tried:
                continue
            tried.add(twin[v])
            search(_rank([(c, 0 if u == v else 1) for u, c in enumerate(colors)]))

    search(init)
    return best[0]


def canonical_key(graph: CircuitGraph) -> CanonicalKey:
    form = canonical_form(graph)
    return CanonicalKey(hashlib.sha256(repr(form).encode("utf-8")).digest())


def to_networkx(graph: CircuitGraph) -> nx.Graph:
    g = nx.Graph()
    for d in graph.devices:
        g.add_node(d, label=_node_label(d))
    for n in graph.nets:
        g.add_node(n, label=_node_label(n))
    for d, pins, n in graph.edges():
        g.add_edge(d, n, label=pin_label(pins))
    return g


def is_isomorphic(g1: CircuitGraph, g2: CircuitGraph) -> bool:
    """Exact label-preserving isomorphism (device/internal-net indices ignored)."""
    if (len(g1.devices), len(g1.nets), g1.num_edges) != (len(g2.devices), len(g2.nets), g2.num_edges):
        return False
    return nx.is_isomorphic(
        to_networkx(g1), to_networkx(g2),
        node_match=lambda a, b: a["label"] == b["label"],
        edge_match=lambda a, b: a["label"] == b["label"],
    )
