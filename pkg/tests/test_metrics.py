import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import inverter_stage, nmos_mirror
from topobi.augment import rename_devices
from topobi.errors import ConfigurationError
from topobi.graph import Device, Net, VDD_NET, canonical_key
from topobi.lm import Outcome
from topobi.metrics import (Sample, assess, build_report, ngram_match_counts, ngram_match_rate, novelty_rate,
                            read_labels, training_windows, type_accuracy, valid_and_novel_rate, validity_rate)
from topobi.sequence import CircuitSequence, serialize_closed_walk


def driven_mirror():
    g = nmos_mirror()
    g.connect(Device("R", 1), "C", VDD_NET).connect(Device("R", 1), "C", Net("NET", 1))
    g.connect(Device("R", 2), "C", VDD_NET).connect(Device("R", 2), "C", Net("VOUT", 1))
    return g


def sample(graph, sid="1", outcome=Outcome.TERMINATED, seed=0, ctype=None):
    seq = serialize_closed_walk(graph, seed)
    return Sample(sid, ctype or graph.circuit_type or "General", outcome, seq, seed)


def test_validity_counts_dead_ends():
    good = sample(inverter_stage(), "1")
    dead = Sample("2", "General", Outcome.DEAD_END, CircuitSequence("CIRCUIT_General VSS M_G".split()))
    assert validity_rate([good, dead]) == 0.5
    assert assess(dead).reason == "DeadEnd"


def test_unparseable_terminated_sample_is_invalid():
    bad = Sample("1", "Mirror", Outcome.TERMINATED, CircuitSequence("CIRCUIT_Mirror VSS M_SB NM1 M_SB".split()))
    a = assess(bad)
    assert not a.valid and a.key is None and a.reason


def test_training_copy_is_not_novel():
    g = driven_mirror()
    keys = {canonical_key(g).hex}
    assert novelty_rate([sample(g)], keys) == 0.0
    renamed = sample(g, seed=3)
    renamed.sequence = rename_devices(renamed.sequence, 17)
    assert novelty_rate([renamed], keys) == 0.0
    assert novelty_rate([sample(inverter_stage())], keys) == 1.0


def test_novelty_denominator_is_valid_samples():
    dead = Sample("2", "General", Outcome.LENGTH_CAPPED, CircuitSequence("CIRCUIT_General VSS".split()))
    s = [sample(inverter_stage()), dead]
    assert novelty_rate(s, set()) == 1.0
    assert valid_and_novel_rate(s, set()) == 0.5
    assert novelty_rate([dead], set()) == 0.0


def test_empty_input():
    with pytest.raises(ConfigurationError):
        validity_rate([])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from(["mirror", "inverter", "dead"]), min_size=1, max_size=8), st.randoms())
def test_rate_relations(kinds, rnd):
    pool = {"mirror": driven_mirror(), "inverter": inverter_stage()}
    samples = [Sample(str(i), "General", Outcome.DEAD_END, CircuitSequence(["CIRCUIT_General", "VSS"]))
               if k == "dead" else sample(pool[k], str(i)) for i, k in enumerate(kinds)]
    keys = {canonical_key(driven_mirror()).hex}
    v, n, vn = validity_rate(samples), novelty_rate(samples, keys), valid_and_novel_rate(samples, keys)
    assert vn <= v + 1e-12 and vn <= n + 1e-12
    assert abs(vn - v * n) < 1e-12
    shuffled = samples[:]
    rnd.shuffle(shuffled)
    assert (validity_rate(shuffled), novelty_rate(shuffled, keys)) == (v, n)


def test_ngram_boundaries():
    train = [list("abcdefghijklmnop")]
    assert training_windows(train, 3) == {tuple("abc"), tuple("nop")}
    assert len(training_windows(train, 3, anywhere=True)) == 14
    assert ngram_match_rate([list("abcxyz")], train, 3) == 1.0
    assert ngram_match_rate([list("xyznop")], train, 3) == 1.0
    assert ngram_match_rate([list("xdefgz")], train, 3) == 0.0
    assert ngram_match_rate([list("defxyz")], train, 3, anywhere=True) == 1.0


def test_ngram_disjoint_and_short():
    train = [list("abcdefghijk")]
    counts = ngram_match_counts([list("lmnopqrstuv"), list("ab")], train, 10)
    assert counts.matched == 0 and counts.eligible == 1 and counts.too_short == 1
    assert counts.rate == 0.0
    with pytest.raises(ConfigurationError):
        ngram_match_rate([], train, 0)


def test_ngram_memorised_copy():
    train = [serialize_closed_walk(driven_mirror(), 0)]
    assert ngram_match_rate([sample(driven_mirror(), seed=0)], train, 10) == 1.0


def test_type_accuracy(tmp_path):
    s = [sample(inverter_stage(), "a", ctype="OpAmp"), sample(inverter_stage(), "b", ctype="Mirror"),
         sample(inverter_stage(), "c", ctype="General")]
    assert type_accuracy(s, {"a": "OpAmp", "b": "Mirror"}) == 1.0
    assert type_accuracy(s, {"a": "OpAmp", "b": "OpAmp"}) == 0.5
    with pytest.raises(ConfigurationError, match="b"):
        type_accuracy(s, {"a": "OpAmp"})
    path = tmp_path / "labels.tsv"
    path.write_text("# id\tpred\na\tOpAmp\nb\tLDO\n")
    assert read_labels(path) == {"a": "OpAmp", "b": "LDO"}
    path.write_text("a OpAmp\n")
    with pytest.raises(ConfigurationError):
        read_labels(path)


def test_report_tables():
    s = [sample(inverter_stage(), "1", ctype="OpAmp"), sample(driven_mirror(), "2", ctype="Mirror"),
         Sample("3", "Mirror", Outcome.DEAD_END, CircuitSequence(["CIRCUIT_Mirror", "VSS"]))]
    keys = {canonical_key(driven_mirror()).hex}
    rep = build_report(s, keys, [serialize_closed_walk(driven_mirror(), 0)])
    assert list(rep.columns) == ["OpAmp", "Mirror", "Avg."]
    assert rep.columns["Mirror"]["validity"] == 0.5
    assert rep.columns["Mirror"]["novelty"] == 0.0
    assert rep.columns["Avg."]["dead_end_rate"] == pytest.approx(1 / 3)
    tsv = rep.tsv(["hdr"]).splitlines()
    assert tsv[0] == "# hdr" and tsv[1] == "\tOpAmp\tMirror\tAvg."
    assert tsv[2] == "Samples\t1\t2\t3"
    assert "Validity\t1.0000\t0.5000\t0.6667" in tsv
    assert not any(line.startswith("Type acc.") for line in tsv)
    summary = rep.summary().splitlines()
    assert "validity=0.6667" in summary and "ngram_n=10" in summary and "Mirror.novelty=0.0000" in summary


def test_report_with_labels():
    s = [sample(inverter_stage(), "1", ctype="OpAmp"), sample(inverter_stage(), "2", ctype="General")]
    rep = build_report(s, set(), [], labels={"1": "OpAmp"})
    assert rep.columns["OpAmp"]["type_accuracy"] == 1.0
    assert rep.columns["General"]["type_accuracy"] is None
    assert "Type acc.\t1.0000\t-\t1.0000" in rep.tsv()


def test_parallel_assessment_matches_serial():
    s = [sample(inverter_stage(), str(i), seed=i) for i in range(6)]
    a = build_report(s, set(), [], jobs=1)
    b = build_report(s, set(), [], jobs=2)
    assert a.tsv() == b.tsv()
