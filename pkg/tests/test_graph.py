import random

import pytest
from hypothesis import given, settings

from conftest import nmos_mirror, pmos_mirror
from oracles import brute_force_isomorphic
from strategies import random_graph, relabel, seeds
from topobi.errors import BadPinSet, CapacityError, DuplicateTerminal
from topobi.graph import (CircuitGraph, Device, Net, VDD_NET, VSS_NET, canonical_key, erc_check,
                          is_isomorphic)
from topobi.vocab import build_vocabulary

NM1, NM2 = Device("NM", 1), Device("NM", 2)


def test_first_connect_creates_nodes():
    g = CircuitGraph().connect(Device("PM", 1), "SB", VDD_NET)
    assert (len(g.devices), len(g.nets), g.num_edges) == (1, 1, 1)


def test_role_reassignment_is_duplicate_terminal():
    g = CircuitGraph().connect(NM1, "G", Net("NET", 1))
    with pytest.raises(DuplicateTerminal):
        g.connect(NM1, "G", Net("NET", 2))


def test_identical_reconnect_is_noop():
    g = CircuitGraph().connect(NM1, "GD", Net("NET", 1))
    g.connect(NM1, "GD", Net("NET", 1))
    assert g.num_edges == 1


def test_partial_overlap_on_same_net_is_rejected():
    g = CircuitGraph().connect(NM1, "GD", Net("NET", 1))
    with pytest.raises(DuplicateTerminal):
        g.connect(NM1, "G", Net("NET", 1))


def test_roles_on_one_net_merge_into_one_edge():
    g = CircuitGraph().connect(NM1, "G", Net("NET", 1)).connect(NM1, "D", Net("NET", 1))
    assert g.device_edges(NM1) == {Net("NET", 1): frozenset("GD")}
    h = CircuitGraph().connect(NM1, "GD", Net("NET", 1))
    assert g == h


def test_bad_pin_sets():
    with pytest.raises(BadPinSet):
        CircuitGraph().connect(NM1, "C", VSS_NET)
    with pytest.raises(BadPinSet):
        CircuitGraph().connect(Device("DIO", 1), "PN", VSS_NET)
    with pytest.raises(BadPinSet):
        CircuitGraph().connect(Device("R", 1), "CE", VSS_NET)


def test_passive_has_two_terminals_on_distinct_nets():
    r = Device("R", 1)
    g = CircuitGraph().connect(r, "C", VSS_NET)
    g.connect(r, "C", VSS_NET)  # revisit of the same terminal
    g.connect(r, "C", VDD_NET)
    with pytest.raises(DuplicateTerminal):
        g.connect(r, "C", Net("NET", 1))
    assert erc_check(g).ok


def test_capacity_checked_against_vocabulary():
    v = build_vocabulary({"NM": 2})
    with pytest.raises(CapacityError):
        CircuitGraph(vocab=v).connect(Device("NM", 3), "G", VSS_NET)
    with pytest.raises(CapacityError):
        CircuitGraph(vocab=v).connect(Device("NM", 1), "G", Net("NET", 65))


def test_partial_coverage_reports_missing_roles():
    g = CircuitGraph().connect(NM1, "GD", Net("NET", 1))
    report = erc_check(g)
    missing = [v for v in report.violations if v.kind == "missing_roles"]
    assert missing and missing[0].subject == "NM1" and "SB" in missing[0].detail


def test_mirror_is_erc_clean():
    report = erc_check(nmos_mirror())
    assert report.ok and not report.violations


def test_mirror_without_output_drain():
    g = CircuitGraph("Mirror")
    g.connect(NM1, "SB", VSS_NET).connect(NM1, "GD", Net("NET", 1))
    g.connect(NM2, "SB", VSS_NET).connect(NM2, "G", Net("NET", 1))
    report = erc_check(g)
    assert not report.ok
    assert [(v.kind, v.subject, v.detail) for v in report.violations] == [("missing_roles", "NM2", "missing D")]


def test_floating_internal_net():
    g = nmos_mirror()
    g.connect(Device("R", 1), "C", Net("VOUT", 1)).connect(Device("R", 1), "C", Net("NET", 2))
    kinds = {(v.kind, v.subject) for v in erc_check(g).violations}
    assert kinds == {("floating_net", "NET2")}


def test_disconnected_and_empty():
    assert erc_check(CircuitGraph()).violations[0].kind == "empty"
    g = CircuitGraph().connect(Device("R", 1), "C", VDD_NET).connect(Device("R", 1), "C", Net("VIN", 1))
    assert {v.kind for v in erc_check(g).violations} == {"disconnected"}
    g = nmos_mirror()
    g.connect(Device("C", 1), "C", VDD_NET).connect(Device("C", 1), "C", Net("VIN", 1))
    v = [x for x in erc_check(g).violations if x.kind == "disconnected"]
    assert v and "C1" in v[0].subject


def test_short_is_a_warning_only():
    g = CircuitGraph().connect(NM1, "GDSB", VSS_NET)
    report = erc_check(g)
    assert report.ok and report.warnings[0].kind == "short"


def test_canonical_key_examples():
    g = nmos_mirror()
    renamed = g.renamed({NM1: Device("NM", 7), NM2: Device("NM", 3)})
    assert canonical_key(g) == canonical_key(renamed)
    assert len(canonical_key(g).hex) == 64 and canonical_key(g).hex == canonical_key(g).hex.lower()
    assert canonical_key(CircuitGraph()) == canonical_key(CircuitGraph())
    bigger = g.copy()
    bigger.connect(Device("C", 1), "C", Net("VOUT", 1)).connect(Device("C", 1), "C", VSS_NET)
    assert not brute_force_isomorphic(g, bigger)
    assert canonical_key(g) != canonical_key(bigger)


def test_is_isomorphic_examples():
    g = nmos_mirror()
    assert is_isomorphic(g, g)
    renumbered = g.renamed(net_map={Net("NET", 1): Net("NET", 9)})
    assert brute_force_isomorphic(g, renumbered) and is_isomorphic(g, renumbered)
    assert not brute_force_isomorphic(g, pmos_mirror())
    assert not is_isomorphic(g, pmos_mirror())


def test_port_indices_are_labels():
    g = nmos_mirror()
    h = g.renamed(net_map={Net("VOUT", 1): Net("VOUT", 2)})
    assert not is_isomorphic(g, h)
    assert canonical_key(g) != canonical_key(h)


def test_symmetric_graph_canonicalisation():
    # two identical branches force individualisation beyond colour refinement
    g = CircuitGraph()
    for i in range(1, 5):
        r = Device("R", i)
        g.connect(r, "C", Net("NET", i)).connect(r, "C", Net("NET", i % 4 + 1))
    g.connect(Device("R", 5), "C", Net("NET", 1)).connect(Device("R", 5), "C", VSS_NET)
    h = relabel(g, random.Random(3))
    assert canonical_key(g) == canonical_key(h)


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_key_invariant_under_relabelling(seed):
    rng = random.Random(seed)
    g = random_graph(rng, rng.randint(1, 5))
    assert canonical_key(g) == canonical_key(relabel(g, rng))
    assert is_isomorphic(g, relabel(g, rng))


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_isomorphism_agrees_with_brute_force(seed):
    rng = random.Random(seed)
    nets = rng.sample([VSS_NET, VDD_NET, Net("NET", 1), Net("NET", 2), Net("NET", 3)], 3)
    g1 = random_graph(rng, rng.randint(1, 4), nets)
    g2 = relabel(g1, rng) if rng.random() < 0.5 else random_graph(rng, len(g1.devices), nets)
    if len(g1) > 8 or len(g2) > 8:
        return
    expected = brute_force_isomorphic(g1, g2)
    assert is_isomorphic(g1, g2) == expected
    assert (canonical_key(g1) == canonical_key(g2)) == expected


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_adding_edges_never_clears_a_duplicate(seed):
    rng = random.Random(seed)
    g = random_graph(rng, 3)
    d = g.devices[0]
    role = next(iter(next(iter(g.device_edges(d).values()))))
    other = Net("NET", 50)
    with pytest.raises(DuplicateTerminal):
        g.connect(d, role, other)
    g.connect(Device("C", 9), "C", VSS_NET)
    with pytest.raises(DuplicateTerminal):
        g.connect(d, role, other)


def test_bipartite_by_construction():
    g = nmos_mirror()
    for d, pins, n in g.edges():
        assert isinstance(d, Device) and isinstance(n, Net)
