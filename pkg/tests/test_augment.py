import random

import pytest
from hypothesis import given, settings

from conftest import nmos_mirror
from strategies import random_valid_graph, seeds
from topobi.augment import (augment_traversals, derive_seed, expand_corpus, rename_devices, sidecar_path,
                            table6_rows)
from topobi.errors import CapacityError
from topobi.graph import CircuitGraph, Device, Net, VSS_NET, canonical_key, erc_check, is_isomorphic
from topobi.grammar import replay
from topobi.ingest import Corpus, CorpusEntry
from topobi.sequence import CircuitSequence, parse_sequence, read_sequences, serialize_closed_walk

FIG5 = "CIRCUIT_Mirror VSS M_SB PM1 M_GD NET1 M_G PM2 M_D VOUT1 M_D PM2 M_SB VSS".split()


def test_traversals_of_mirror():
    g = nmos_mirror()
    g.connect(Device("C", 1), "C", Net("NET", 1)).connect(Device("C", 1), "C", VSS_NET)
    seqs = augment_traversals(g, 5, seed=3)
    assert 1 <= len(seqs) <= 5
    assert len({tuple(s.tokens) for s in seqs}) == len(seqs)
    for s in seqs:
        assert is_isomorphic(parse_sequence(s), g)
        assert s.padded_length == 1024 and "traversal_seed" in s.meta


def test_zero_traversals():
    assert augment_traversals(nmos_mirror(), 0) == []


def test_overflow_gives_empty_list_with_diagnostics():
    g = CircuitGraph()
    nets = [VSS_NET] + [Net("NET", i) for i in range(1, 20)]
    for i in range(19):
        g.connect(Device("R", i + 1), "C", nets[i]).connect(Device("R", i + 1), "C", nets[i + 1])
    g.connect(Device("R", 20), "C", nets[-1]).connect(Device("R", 20), "C", VSS_NET)
    diags: list[str] = []
    assert augment_traversals(g, 3, max_length=40, diagnostics=diags) == []
    assert len(diags) == 3 and all("discarded" in d for d in diags)


def test_fig5_rename():
    seq = CircuitSequence(FIG5)
    out = rename_devices(seq, seed=11)
    assert out.tokens != seq.tokens
    assert [t for t in out.tokens if not t.startswith("PM")] == [t for t in seq.tokens if not t.startswith("PM")]
    assert is_isomorphic(parse_sequence(out), parse_sequence(seq))
    assert canonical_key(parse_sequence(out)) == canonical_key(parse_sequence(seq))


def test_identity_rename():
    seq = CircuitSequence(FIG5)
    assert rename_devices(seq, None).tokens == seq.tokens


def test_rename_cap_violation():
    toks = ["CIRCUIT_General", "VSS"]
    for i in range(1, 37):
        toks += ["M_GDSB", f"NM{i}", "M_GDSB", "VSS"]
    with pytest.raises(CapacityError):
        rename_devices(CircuitSequence(toks), 1)


def test_rename_is_a_bijection_per_family():
    seq = serialize_closed_walk(random_valid_graph(random.Random(4), 6), 0)
    out = rename_devices(seq, 99)
    fwd = {}
    for a, b in zip(seq.tokens, out.tokens):
        fwd.setdefault(a, set()).add(b)
    assert all(len(v) == 1 for v in fwd.values())
    assert len({next(iter(v)) for v in fwd.values()}) == len(fwd)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_renaming_preserves_key(seed):
    rng = random.Random(seed)
    g = random_valid_graph(rng, rng.randint(1, 6))
    seq = serialize_closed_walk(g, seed)
    out = rename_devices(seq, rng.randrange(1 << 30))
    assert canonical_key(parse_sequence(out)) == canonical_key(g)


def _corpus(graphs):
    return Corpus([CorpusEntry(f"c{i}", g, g.circuit_type or "General", "train") for i, g in enumerate(graphs)])


def test_expand_bound_and_provenance(tmp_path):
    g = nmos_mirror()
    g.connect(Device("C", 1), "C", Net("NET", 1)).connect(Device("C", 1), "C", VSS_NET)
    ds = expand_corpus(_corpus([g]), 3, 2, seed=5)
    assert 1 <= len(ds.records) <= 6
    assert all(r.rename_seed is not None for r in ds.records)
    for r in ds.records:
        assert is_isomorphic(parse_sequence(r.sequence), g)
    p = tmp_path / "aug.txt"
    ds.write(p, ["hdr"])
    rows = [l.split("\t") for l in sidecar_path(p).read_text().splitlines() if not l.startswith("#")]
    assert rows[0] == ["line_no", "source_path", "circuit_type", "traversal_seed", "rename_seed"]
    assert len(rows) - 1 == len(read_sequences(p)) == len(ds.records)


def test_expand_without_renaming_keeps_originals():
    ds = expand_corpus(_corpus([nmos_mirror()]), 4, 0, seed=1)
    assert all(r.rename_seed is None for r in ds.records)


def test_expand_is_deterministic(tmp_path, desk_corpus):
    a = expand_corpus(desk_corpus, 2, 2, seed=9)
    b = expand_corpus(desk_corpus, 2, 2, seed=9)
    a.write(tmp_path / "a.txt")
    b.write(tmp_path / "b.txt")
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
    assert sidecar_path(tmp_path / "a.txt").read_bytes() == sidecar_path(tmp_path / "b.txt").read_bytes()
    c = expand_corpus(desk_corpus, 2, 2, seed=10)
    assert [r.sequence.tokens for r in c.records] != [r.sequence.tokens for r in a.records]


def test_multipliers_and_table6(desk_corpus):
    ds = expand_corpus(desk_corpus, 1, 0, seed=0, multipliers={"OpAmp": (3, 2)})
    counts = ds.counts()
    n_opamp = sum(e.circuit_type == "OpAmp" for e in desk_corpus.train)
    assert n_opamp < counts["OpAmp"] <= 6 * n_opamp
    assert counts["Mirror"] == sum(e.circuit_type == "Mirror" for e in desk_corpus.train)
    table = table6_rows(desk_corpus, ds).splitlines()
    assert table[0].endswith("Total") and table[1].startswith("Raw netlist")
    assert table[2].split("\t")[-1] == str(len(ds.records))


def test_all_outputs_keep_keys_and_replay(desk_corpus):
    ds = expand_corpus(desk_corpus, 2, 2, seed=4)
    keys = {e.source: e.key for e in desk_corpus.entries}
    for r in ds.records:
        g = parse_sequence(r.sequence)
        assert erc_check(g).ok
        assert canonical_key(g).hex == keys[r.source]
        replay(r.sequence.tokens)


def test_derive_seed_is_stable():
    assert derive_seed(1, 2) == derive_seed(1, 2) != derive_seed(2, 1)
