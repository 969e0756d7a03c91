"""Sequence-to-SPICE translation with rule-based supplies, biases and sizing."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, fields, replace
from typing import Mapping, Sequence

from . import vocab as V
from .errors import (ConfigurationError, GrammarViolation, NoSupplyPath, TopoBiError,
                     TranslationFail)
from .graph import VDD_NET, VSS_NET, CircuitGraph, Device, Net, erc_check
from .ingest import TESTBENCH_BEGIN, TESTBENCH_END
from .sequence import CircuitSequence, parse_sequence

log = logging.getLogger(__name__)

# roles that carry current through a device; passives and diodes conduct on any terminal
CONDUCTING_ROLES = {"NM": frozenset("DS"), "PM": frozenset("DS"), "NPN": frozenset("CE")}

MODEL_NAMES = {"NM": "nmos1", "PM": "pmos1", "NPN": "npn1", "DIO": "dio1"}
MODEL_CARDS = (
    ".model nmos1 NMOS (LEVEL=1 VTO=0.45 KP=200u LAMBDA=0.05 GAMMA=0.4 PHI=0.8)",
    ".model pmos1 PMOS (LEVEL=1 VTO=-0.45 KP=80u LAMBDA=0.05 GAMMA=0.4 PHI=0.8)",
    ".model npn1 NPN (IS=1e-16 BF=100 VAF=50)",
    ".model dio1 D (IS=1e-14 N=1)",
)


@dataclass(frozen=True)
class SizingRules:
    """Default sizes (µm, Ω, F, H), volts per conducting hop and supply floor."""

    nmos_w: float = 2.0
    nmos_l: float = 0.18
    pmos_w: float = 4.0
    pmos_l: float = 0.18
    resistance: float = 10e3
    capacitance: float = 1e-12
    inductance: float = 1e-9
    headroom: float = 0.9
    supply_floor: float = 1.8
    w_max: float = 500.0
    load: float = 100e-12
    max_iterations: int = 64

    def __post_init__(self) -> None:
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigurationError(f"sizing rule {f.name} must be positive")

    @classmethod
    def from_mapping(cls, values: Mapping[str, str | float]) -> "SizingRules":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigurationError(f"unknown sizing rule {key!r}")
            try:
                kwargs[key] = int(raw) if key == "max_iterations" else float(raw)
            except ValueError:
                raise ConfigurationError(f"sizing rule {key}={raw!r} is not a number") from None
        return cls(**kwargs)


@dataclass
class SpiceElement:
    name: str
    family: str
    nodes: tuple[str, ...]
    model: str | None = None
    value: float | None = None


@dataclass
class SpiceNetlist:
    circuit_type: str
    elements: list[SpiceElement]
    widths: dict[str, float]
    lengths: dict[str, float]
    vdd_volts: float
    biases: dict[str, float]
    loads: list[str]
    has_vdd: bool = True
    load_farads: float = 100e-12
    header: list[str] = field(default_factory=list)
    refine_iterations: int = 0
    warnings: list[str] = field(default_factory=list)

    def mosfets(self) -> list[SpiceElement]:
        return [e for e in self.elements if e.family in V.MOS_FAMILIES]

    def render(self) -> str:
        lines = [f"* {h}" for h in self.header]
        lines.append(f"* circuit type: {self.circuit_type}")
        for e in self.elements:
            card = f"{e.name} {' '.join(e.nodes)}"
            if e.family in V.MOS_FAMILIES:
                card += f" {e.model} W={fmt_number(self.widths[e.name])}u L={fmt_number(self.lengths[e.name])}u"
            elif e.model:
                card += f" {e.model}"
            else:
                card += f" {fmt_si(e.value)}"
            lines.append(card)
        lines.append(TESTBENCH_BEGIN)
        if self.has_vdd:
            lines.append(f"VDD vdd 0 DC {fmt_number(self.vdd_volts)}")
        for port, volts in self.biases.items():
            lines.append(f"V{port.upper()} {port} 0 DC {fmt_number(volts)}")
        for port in self.loads:
            lines.append(f"CLOAD_{port.upper()} {port} 0 {fmt_si(self.load_farads)}")
        lines.append(TESTBENCH_END)
        lines.extend(MODEL_CARDS)
        lines.append(".op")
        lines.append(".end")
        return "\n".join(lines) + "\n"

    def __str__(self) -> str:
        return self.render()


_SI = ((1e9, "g"), (1e6, "meg"), (1e3, "k"), (1.0, ""), (1e-3, "m"), (1e-6, "u"),
       (1e-9, "n"), (1e-12, "p"), (1e-15, "f"))


def fmt_number(x: float) -> str:
    return f"{x:.6g}"


def fmt_si(x: float) -> str:
    """SPICE engineering notation, e.g. 10000 -> '10k', 1e-10 -> '100p'."""
    if x == 0:
        return "0"
    for scale, suffix in _SI:
        if abs(x) >= scale * (1 - 1e-12):
            return f"{x / scale:.6g}{suffix}"
    return f"{x:.6g}"


def spice_node(net: Net) -> str:
    if net == VSS_NET:
        return "0"
    return net.text.lower()


def _conducts(family: str, pins: frozenset[str]) -> bool:
    roles = CONDUCTING_ROLES.get(family)
    return roles is None or bool(pins & roles)


def _hop_distances(graph: CircuitGraph, start: Net, conducting_only: bool) -> dict[Net, int]:
    """Device hops from ``start`` to every reachable net."""
    dist = {start: 0}
    queue = deque([start])
    while queue:
        n = queue.popleft()
        for d in sorted(graph.net_devices(n)):
            edges = graph.device_edges(d)
            if conducting_only and not _conducts(d.family, edges[n]):
                continue
            for m, pins in sorted(edges.items()):
                if m in dist or (conducting_only and not _conducts(d.family, pins)):
                    continue
                dist[m] = dist[n] + 1
                queue.append(m)
    return dist


def infer_supply_hops(graph: CircuitGraph) -> int:
    """Fewest devices on a VDD-to-VSS path that enters and leaves each device on a conducting role."""
    if not graph.has_net(VDD_NET) or not graph.has_net(VSS_NET):
        raise NoSupplyPath("graph needs both VDD and VSS")
    dist = _hop_distances(graph, VDD_NET, conducting_only=True)
    if VSS_NET not in dist:
        raise NoSupplyPath("no conducting path from VDD to VSS")
    return dist[VSS_NET]


def _polarity(graph: CircuitGraph, port: Net) -> str | None:
    fams = {d.family for d in graph.net_devices(port)}
    n_side = bool(fams & {"NM", "NPN"})
    p_side = "PM" in fams
    if n_side == p_side:
        return None
    return "n" if n_side else "p"


def assign_port_bias(graph: CircuitGraph, vdd_volts: float, hops: int | None = None,
                     warnings: list[str] | None = None) -> dict[Net, float]:
    """DC level for each VIN port.

    An NMOS/NPN-adjacent port sits ``d_vss / (hops + 1)`` of the way up from
    VSS, a PMOS-adjacent one ``d_vdd / (hops + 1)`` down from VDD, where the
    distances count devices along any edges. Ties, unreachable rails and ports
    with no polarised neighbour get midrail. VOUT ports are loaded, not biased.
    """
    if hops is None:
        try:
            hops = infer_supply_hops(graph)
        except NoSupplyPath:
            hops = 1
    span = hops + 1
    from_vss = _hop_distances(graph, VSS_NET, conducting_only=False) if graph.has_net(VSS_NET) else {}
    from_vdd = _hop_distances(graph, VDD_NET, conducting_only=False) if graph.has_net(VDD_NET) else {}
    out: dict[Net, float] = {}
    for port in graph.nets:
        if port.kind != "VIN":
            continue
        side = _polarity(graph, port)
        mid = vdd_volts / 2
        if side == "n" and port in from_vss:
            out[port] = vdd_volts * min(from_vss[port], span) / span
        elif side == "p" and port in from_vdd:
            out[port] = vdd_volts * (1 - min(from_vdd[port], span) / span)
        else:
            if side is not None and warnings is not None:
                warnings.append(f"{port.text} cannot reach its reference rail; biased at midrail")
            out[port] = mid
    return out


def _as_graph(source: CircuitSequence | Sequence[str] | CircuitGraph, vocab: V.Vocabulary | None) -> CircuitGraph:
    if isinstance(source, CircuitGraph):
        return source
    try:
        return parse_sequence(source, vocab)
    except (GrammarViolation, TopoBiError) as exc:
        raise TranslationFail(f"sequence does not parse: {exc}") from exc


def translate_to_spice(
    source: CircuitSequence | Sequence[str] | CircuitGraph,
    rules: SizingRules | None = None,
    refine: bool = True,
    vocab: V.Vocabulary | None = None,
    header: Sequence[str] = (),
) -> SpiceNetlist:
    """Build an operating-point deck for an ERC-clean circuit.

    Supply volts are ``max(supply_floor, hops * headroom)``; when VDD is
    absent or has no conducting path to VSS the floor is used and a warning
    recorded.
    """
    rules = rules or SizingRules()
    graph = _as_graph(source, vocab)
    report = erc_check(graph)
    if not report.ok:
        raise TranslationFail(f"ERC failed: {report}")
    warnings: list[str] = []
    try:
        hops = infer_supply_hops(graph)
        vdd = max(rules.supply_floor, hops * rules.headroom)
    except NoSupplyPath as exc:
        hops = None
        vdd = rules.supply_floor
        warnings.append(f"{exc}; supply set to the floor")

    elements: list[SpiceElement] = []
    widths: dict[str, float] = {}
    lengths: dict[str, float] = {}
    for dev in graph.devices:
        edges = graph.device_edges(dev)
        node_of = {r: spice_node(n) for n, pins in edges.items() for r in pins}
        fam = dev.family
        if fam in V.MOS_FAMILIES:
            name = "M" + dev.text
            elements.append(SpiceElement(name, fam, tuple(node_of[r] for r in "DGSB"), MODEL_NAMES[fam]))
            widths[name] = rules.nmos_w if fam == "NM" else rules.pmos_w
            lengths[name] = rules.nmos_l if fam == "NM" else rules.pmos_l
        elif fam == "NPN":
            elements.append(SpiceElement("Q" + dev.text, fam, tuple(node_of[r] for r in "CBE"), MODEL_NAMES[fam]))
        elif fam == "DIO":
            elements.append(SpiceElement("D" + dev.text, fam, (node_of["P"], node_of["N"]), MODEL_NAMES[fam]))
        else:
            value = {"R": rules.resistance, "C": rules.capacitance, "L": rules.inductance}[fam]
            nodes = tuple(spice_node(n) for n in sorted(edges))
            elements.append(SpiceElement(fam + dev.text, fam, nodes, value=value))

    bias = assign_port_bias(graph, vdd, hops if hops is not None else 1, warnings)
    netlist = SpiceNetlist(
        circuit_type=graph.circuit_type or "General",
        elements=elements,
        widths=widths,
        lengths=lengths,
        vdd_volts=vdd,
        biases={spice_node(p): v for p, v in sorted(bias.items())},
        loads=[spice_node(n) for n in graph.nets if n.kind == "VOUT"],
        has_vdd=graph.has_net(VDD_NET),
        load_farads=rules.load,
        header=list(header),
        warnings=warnings,
    )
    for w in warnings:
        log.info("%s", w)
    return refine_widths(netlist, rules) if refine else netlist


def refine_widths(netlist: SpiceNetlist, rules: SizingRules | None = None) -> SpiceNetlist:
    """Grow each MOSFET to the summed width of same-type MOSFETs sourcing from its drain net.

    Updates are simultaneous (every device reads the previous iteration), an
    empty sum keeps the prior width, widths never shrink, and all are clamped
    to ``w_max``. Stops at a fixed point or after ``max_iterations``.
    """
    rules = rules or SizingRules()
    mos = netlist.mosfets()
    feeders: dict[str, list[str]] = {}
    for m in mos:
        drain = m.nodes[0]
        feeders[m.name] = [o.name for o in mos if o.family == m.family and o.nodes[2] == drain]
    widths = {name: min(w, rules.w_max) for name, w in netlist.widths.items()}
    iterations = 0
    while iterations < rules.max_iterations:
        new = dict(widths)
        for m in mos:
            src = feeders[m.name]
            if src:
                new[m.name] = min(rules.w_max, max(widths[m.name], sum(widths[s] for s in src)))
        iterations += 1
        if new == widths:
            break
        widths = new
    return replace(netlist, widths=widths, refine_iterations=iterations)
