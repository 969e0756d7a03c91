from __future__ import annotations

from importlib.resources import files
from pathlib import Path

import pytest

from topobi.graph import CircuitGraph, Device, Net, VDD_NET, VSS_NET
from topobi.ingest import load_corpus
from topobi.vocab import default_vocabulary

DESK_MANIFEST = Path(str(files("topobi.data") / "desk_corpus" / "manifest.tsv"))
PEERS = Path(__file__).parent / "peers"


def nmos_mirror() -> CircuitGraph:
    """NM1 diode-connected reference, NM2 mirroring into VOUT1."""
    g = CircuitGraph("Mirror")
    g.connect(Device("NM", 1), "SB", VSS_NET)
    g.connect(Device("NM", 1), "GD", Net("NET", 1))
    g.connect(Device("NM", 2), "SB", VSS_NET)
    g.connect(Device("NM", 2), "G", Net("NET", 1))
    g.connect(Device("NM", 2), "D", Net("VOUT", 1))
    return g


def pmos_mirror() -> CircuitGraph:
    g = CircuitGraph("Mirror")
    g.connect(Device("PM", 1), "SB", VSS_NET)
    g.connect(Device("PM", 1), "GD", Net("NET", 1))
    g.connect(Device("PM", 2), "SB", VSS_NET)
    g.connect(Device("PM", 2), "G", Net("NET", 1))
    g.connect(Device("PM", 2), "D", Net("VOUT", 1))
    return g


def inverter_stage() -> CircuitGraph:
    """VDD -(PM1 S..D)- VOUT1 -(NM1 D..S)- VSS with gates on VIN1."""
    g = CircuitGraph("General")
    g.connect(Device("PM", 1), "SB", VDD_NET)
    g.connect(Device("PM", 1), "D", Net("VOUT", 1))
    g.connect(Device("PM", 1), "G", Net("VIN", 1))
    g.connect(Device("NM", 1), "SB", VSS_NET)
    g.connect(Device("NM", 1), "D", Net("VOUT", 1))
    g.connect(Device("NM", 1), "G", Net("VIN", 1))
    return g


@pytest.fixture(scope="session")
def vocab():
    return default_vocabulary()


@pytest.fixture(scope="session")
def desk_corpus():
    return load_corpus(DESK_MANIFEST, 0.9, 0)


@pytest.fixture
def mirror():
    return nmos_mirror()
