"""Grammar-guided decoding automaton.

The state is the category pair of the last two tokens. Admissible next tokens
follow the device/pin/net cycle, and the buffers (a partial circuit graph plus
visited nets) rule out terminal reassignment, family mismatches and premature
termination.
"""

from __future__ import annotations

import enum
from collections import Counter

import numpy as np

from . import vocab as V
from .errors import GrammarViolation, NotInVocabulary
from .graph import CircuitGraph, Device, Net, VSS_NET, erc_check

Cat = V.TokenCategory


class DecodeState(enum.Enum):
    CIRCUIT_TYPE_VSS = "CircuitTypeVss"
    NET_EDGE = "NetEdge"
    EDGE_DEVICE = "EdgeDevice"
    DEVICE_EDGE = "DeviceEdge"
    EDGE_NET = "EdgeNet"
    EDGE_VSS = "EdgeVss"


_NEXT_CATEGORY = {
    DecodeState.CIRCUIT_TYPE_VSS: Cat.PIN,
    DecodeState.NET_EDGE: Cat.DEVICE,
    DecodeState.EDGE_DEVICE: Cat.PIN,
    DecodeState.DEVICE_EDGE: Cat.NET,
    DecodeState.EDGE_NET: Cat.PIN,
    DecodeState.EDGE_VSS: Cat.PIN,
}


class DecodeBuffers:
    """History pair, partial circuit graph, visited nets and the pending hop.

    Edges recorded through :meth:`bind` are applied to ``graph`` lazily, on
    first access, which keeps sampling loops from paying for graph upkeep.
    """

    def __init__(self, history: tuple[str, str], graph: CircuitGraph, visited_nets: set[Net] | None = None,
                 last_device: Device | None = None, current_net: Net | None = None,
                 pending_pin: str | None = None):
        self.history = history
        self._graph = graph
        self._unflushed: list[tuple[str, str, str]] = []
        self.visited_nets = visited_nets if visited_nets is not None else set()
        self.last_device = last_device
        self.current_net = current_net
        self.pending_pin = pending_pin

    @property
    def graph(self) -> CircuitGraph:
        for edge in self._unflushed:
            self._graph.add_edge_token(*edge)
        self._unflushed.clear()
        return self._graph

    def bind(self, dev: Device, pin: str, net: Net) -> None:
        self._unflushed.append((dev.text, pin, net.text))

    @property
    def associations(self) -> set[tuple[Device, frozenset[str], Net]]:
        return set(self.graph.edges())

    @property
    def used_roles(self) -> dict[Device, frozenset[str]]:
        g = self.graph
        return {d: g.used_roles(d) for d in g.devices}

    def copy(self) -> "DecodeBuffers":
        return DecodeBuffers(self.history, self.graph.copy(), set(self.visited_nets),
                             self.last_device, self.current_net, self.pending_pin)


class _Tables:
    """Per-vocabulary lookup tables used to build masks quickly."""

    def __init__(self, vocab: V.Vocabulary):
        self.vocab = vocab
        self.size = len(vocab)
        self.category = [t.category for t in vocab.tokens]
        self.pin: dict[int, tuple[str, frozenset[str]]] = {}
        self.device: dict[int, Device] = {}
        self.net: dict[int, Net] = {}
        self.family_devices: dict[str, np.ndarray] = {}
        for t in vocab.tokens:
            if t.category is Cat.PIN:
                self.pin[t.id] = V.pin_roles(t.text)
            elif t.category is Cat.DEVICE:
                self.device[t.id] = Device.parse(t.text)
            elif t.category is Cat.NET:
                self.net[t.id] = Net.parse(t.text)
        for fam in vocab.device_limits:
            ids = sorted((d.index, i) for i, d in self.device.items() if d.family == fam)
            self.family_devices[fam] = np.array([i for _, i in ids], dtype=np.int64)
        self.prefix_families: dict[str, list[str]] = {}
        for fam in vocab.device_limits:
            self.prefix_families.setdefault(V.PIN_PREFIX[fam], []).append(fam)
        self.family_pins = {fam: vocab.family_pin_ids[fam] for fam in vocab.device_limits}
        self.pin_ids = [i for i in self.pin]
        self.net_id = {n: i for i, n in self.net.items()}
        self.port_ids = [i for i, n in self.net.items() if not n.is_internal]
        self.internal_limit = vocab.net_limits["NET"]
        self.internal_ids = [self.net_id[Net("NET", i)] for i in range(1, self.internal_limit + 1)]
        self.port_mask = np.zeros(self.size, dtype=bool)
        self.port_mask[self.port_ids] = True
        self.prefix_pins: dict[str, list[int]] = {}
        for pid, (prefix, _) in self.pin.items():
            self.prefix_pins.setdefault(prefix, []).append(pid)
        self.truncate = vocab.truncate_id
        self.pin_bits = {pid: (prefix, _role_bits(prefix, roles)) for pid, (prefix, roles) in self.pin.items()}
        self.prefix_bits = {prefix: np.array([self.pin_bits[p][1] for p in pids], dtype=np.int64)
                            for prefix, pids in self.prefix_pins.items()}
        self.full = {fam: (2 if fam in V.PASSIVE_FAMILIES else _role_bits(V.PIN_PREFIX[fam], V.required_roles(fam)))
                     for fam in vocab.device_limits}


_TABLES: dict[int, _Tables] = {}


def _tables(vocab: V.Vocabulary) -> _Tables:
    tab = _TABLES.get(id(vocab))
    if tab is None or tab.vocab is not vocab:
        tab = _TABLES[id(vocab)] = _Tables(vocab)
    return tab


def _role_bits(prefix: str, roles: frozenset[str]) -> int:
    if prefix not in V.ROLE_ORDER:
        return 1
    order = V.ROLE_ORDER[prefix]
    return sum(1 << order.index(r) for r in roles)


class GrammarDecoder:
    """Mutable automaton for one decode; see module helpers for a functional API.

    Alongside the buffers it keeps bit-set bookkeeping (roles used per device,
    pin bits per edge, devices with free roles, internal nets of degree < 2)
    so that masks and the termination test stay cheap in a sampling loop.
    Passive devices count edges instead of roles: each ``X_C`` edge takes one
    of their two symmetric terminals.
    """

    def __init__(self, circuit_type: str, vocab: V.Vocabulary | None = None):
        self.vocab = vocab or V.default_vocabulary()
        if circuit_type not in self.vocab.circuit_types:
            raise NotInVocabulary(f"unknown circuit type {circuit_type!r}")
        self.tab = _tables(self.vocab)
        self.state = DecodeState.CIRCUIT_TYPE_VSS
        self.buffers = DecodeBuffers(
            history=(V.CIRCUIT_PREFIX + circuit_type, V.VSS),
            graph=CircuitGraph(circuit_type, self.vocab),
            visited_nets={VSS_NET},
            current_net=VSS_NET,
        )
        self.tokens = [V.CIRCUIT_PREFIX + circuit_type, V.VSS]
        self.finished = False
        self._sync()

    def _sync(self) -> None:
        """Rebuild the bookkeeping from the buffers."""
        tab = self.tab
        graph = self.buffers.graph
        self._by_family: dict[str, list[Device]] = {f: [] for f in self.vocab.device_limits}
        self._edges: dict[Device, dict[Net, int]] = {}
        self._used: dict[Device, int] = {}
        self._on_net: dict[Net, list[Device]] = {}
        self._incomplete: set[Device] = set()
        self._floating: set[Net] = set()
        # per family: how many devices sit at each role-usage value
        self._usage: dict[str, Counter[int]] = {f: Counter() for f in self.vocab.device_limits}
        for d, pins, n in graph.edges():
            self._record(d, _role_bits(V.PIN_PREFIX[d.family], pins), n)
        self._visited = np.zeros(tab.size, dtype=bool)
        self._visited[[tab.net_id[n] for n in self.buffers.visited_nets]] = True
        self._max_internal = max((n.index for n in self.buffers.visited_nets if n.is_internal), default=0)

    def _record(self, dev: Device, bits: int, net: Net) -> None:
        edges = self._edges.get(dev)
        usage = self._usage[dev.family]
        if edges is None:
            edges = self._edges[dev] = {}
            self._used[dev] = 0
            self._by_family[dev.family].append(dev)
        else:
            usage[self._used[dev]] -= 1
        if net not in edges:
            self._on_net.setdefault(net, []).append(dev)
        if dev.family in V.PASSIVE_FAMILIES:
            edges[net] = 1
            self._used[dev] = len(edges)
        else:
            edges[net] = edges.get(net, 0) | bits
            self._used[dev] |= bits
        usage[self._used[dev]] += 1
        if self._used[dev] == self.tab.full[dev.family]:
            self._incomplete.discard(dev)
        else:
            self._incomplete.add(dev)
        if net.is_internal:
            if len(self._on_net[net]) < 2:
                self._floating.add(net)
            else:
                self._floating.discard(net)

    def _bind(self, dev: Device, pin: str, net: Net) -> None:
        self.buffers.bind(dev, pin, net)
        prefix, bits = self.tab.pin_bits[self.vocab.id(pin)]
        self._record(dev, bits, net)

    def _accepts(self, dev: Device, bits: int, net: Net) -> bool:
        edges = self._edges.get(dev)
        if edges is None:
            return True
        if dev.family in V.PASSIVE_FAMILIES:
            return net in edges or len(edges) < 2
        return edges.get(net) == bits or not (self._used[dev] & bits)

    # masks ---------------------------------------------------------------

    def _pin_mask_at_net(self, out: np.ndarray, net: Net) -> None:
        tab = self.tab
        limits = self.vocab.device_limits
        on_net = self._on_net.get(net, ())
        for prefix, fams in tab.prefix_families.items():
            pids = tab.prefix_pins[prefix]
            if any(len(self._by_family[f]) < limits[f] for f in fams):
                out[pids] = True
                continue
            # every device exists: a pin needs a device with those roles free,
            # or a device whose edge on this net carries exactly those roles
            usage = {u for f in fams for u, n in self._usage[f].items() if n}
            passive = fams[0] in V.PASSIVE_FAMILIES
            revisits = {self._edges[d][net] for d in on_net if d.family in fams}
            for pid in pids:
                bits = tab.pin_bits[pid][1]
                if passive:
                    out[pid] = bool(revisits) or any(u < 2 for u in usage)
                else:
                    out[pid] = bits in revisits or any(not (u & bits) for u in usage)

    def mask(self) -> np.ndarray:
        tab = self.tab
        out = np.zeros(tab.size, dtype=bool)
        if self.finished:
            return out
        b = self.buffers
        st = self.state
        if st in (DecodeState.CIRCUIT_TYPE_VSS, DecodeState.EDGE_NET, DecodeState.EDGE_VSS):
            self._pin_mask_at_net(out, b.current_net)
            if st is DecodeState.EDGE_VSS and self.may_terminate():
                out[tab.truncate] = True
        elif st is DecodeState.NET_EDGE:
            prefix, bits = tab.pin_bits[self.vocab.id(b.pending_pin)]
            net = b.current_net
            for fam in tab.prefix_families[prefix]:
                ids = tab.family_devices[fam]
                out[ids] = True
                for d in self._by_family[fam]:
                    if not self._accepts(d, bits, net):
                        out[ids[d.index - 1]] = False
        elif st is DecodeState.EDGE_DEVICE:
            dev = b.last_device
            edges = self._edges[dev]
            if dev.family in V.PASSIVE_FAMILIES:
                out[tab.family_pins[dev.family]] = True
            else:
                used = self._used[dev]
                revisit = set(edges.values())
                for pid in tab.family_pins[dev.family]:
                    bits = tab.pin_bits[pid][1]
                    if not (used & bits) or bits in revisit:
                        out[pid] = True
        elif st is DecodeState.DEVICE_EDGE:
            dev = b.last_device
            bits = tab.pin_bits[self.vocab.id(b.pending_pin)][1]
            edges = self._edges[dev]
            fixed = None
            if dev.family in V.PASSIVE_FAMILIES:
                if len(edges) >= 2:
                    fixed = list(edges)
            elif self._used[dev] & bits:
                fixed = [n for n, e in edges.items() if e == bits]
            if fixed is not None:
                out[[tab.net_id[n] for n in fixed]] = True
            else:
                np.logical_or(tab.port_mask, self._visited, out=out)
                if self._max_internal < tab.internal_limit:
                    out[tab.internal_ids[self._max_internal]] = True
        return out

    def may_terminate(self) -> bool:
        b = self.buffers
        if b.current_net != VSS_NET or self.state not in (DecodeState.EDGE_VSS, DecodeState.CIRCUIT_TYPE_VSS):
            return False
        return bool(self._edges) and not self._incomplete and not self._floating

    # transitions ---------------------------------------------------------

    def apply(self, token: str | int, check: bool = True) -> DecodeState:
        tid = token if isinstance(token, int) else self.vocab.id(token)
        text = self.vocab.text(tid)
        pos = len(self.tokens)
        if self.finished:
            raise GrammarViolation("decode already terminated", pos)
        if check and not self.mask()[tid]:
            raise GrammarViolation(f"token {text!r} not admissible in state {self.state.value}", pos)
        b = self.buffers
        cat = self.tab.category[tid]
        if cat is Cat.TRUNCATE:
            self.finished = True
        elif cat is Cat.PIN:
            b.pending_pin = text
            self.state = (DecodeState.DEVICE_EDGE if self.state is DecodeState.EDGE_DEVICE
                          else DecodeState.NET_EDGE)
        elif cat is Cat.DEVICE:
            dev = self.tab.device[tid]
            self._bind(dev, b.pending_pin, b.current_net)
            b.last_device = dev
            self.state = DecodeState.EDGE_DEVICE
        elif cat is Cat.NET:
            net = self.tab.net[tid]
            self._bind(b.last_device, b.pending_pin, net)
            b.current_net = net
            if not self._visited[tid]:
                b.visited_nets.add(net)
                self._visited[tid] = True
                if net.is_internal:
                    self._max_internal = max(self._max_internal, net.index)
            self.state = DecodeState.EDGE_VSS if net == VSS_NET else DecodeState.EDGE_NET
        else:
            raise GrammarViolation("circuit-type tokens cannot be generated", pos)
        b.history = (b.history[1], text)
        self.tokens.append(text)
        return self.state


def init_decode(circuit_type: str, vocab: V.Vocabulary | None = None) -> tuple[DecodeState, DecodeBuffers]:
    dec = GrammarDecoder(circuit_type, vocab)
    return dec.state, dec.buffers


def _decoder_from(state: DecodeState, buffers: DecodeBuffers, vocab: V.Vocabulary | None) -> GrammarDecoder:
    dec = GrammarDecoder(buffers.graph.circuit_type or "General", vocab or buffers.graph.vocab)
    dec.state = state
    dec.buffers = buffers.copy()
    dec.tokens = list(buffers.history)
    dec._sync()
    return dec


def admissible_mask(state: DecodeState, buffers: DecodeBuffers, vocab: V.Vocabulary | None = None) -> np.ndarray:
    return _decoder_from(state, buffers, vocab).mask()


def apply_token(state: DecodeState, buffers: DecodeBuffers, token: str,
                vocab: V.Vocabulary | None = None) -> tuple[DecodeState, DecodeBuffers]:
    dec = _decoder_from(state, buffers, vocab)
    dec.apply(token)
    return dec.state, dec.buffers


def may_terminate(buffers: DecodeBuffers, state: DecodeState | None = None) -> bool:
    if buffers.current_net != VSS_NET or buffers.history[1] != V.VSS:
        return False
    return erc_check(buffers.graph).ok


def mask_to_ids(mask: np.ndarray) -> list[int]:
    """Mask exchange encoding: ascending admissible ids."""
    return [int(i) for i in np.flatnonzero(mask)]


def replay(tokens: list[str], vocab: V.Vocabulary | None = None) -> GrammarDecoder:
    """Feed a full sequence through the automaton, checking every token."""
    if not tokens or not tokens[0].startswith(V.CIRCUIT_PREFIX):
        raise GrammarViolation("sequence must start with a circuit-type token", 0)
    if len(tokens) < 2 or tokens[1] != V.VSS:
        raise GrammarViolation("second token must be VSS", 1)
    dec = GrammarDecoder(tokens[0][len(V.CIRCUIT_PREFIX):], vocab)
    for tok in tokens[2:]:
        dec.apply(tok)
    return dec
