from itertools import combinations

import pytest

from topobi import vocab as V
from topobi.errors import ConfigurationError, NotInVocabulary


def test_default_limits_enumerate_35_mos_devices(vocab):
    for fam in ("NM", "PM"):
        assert f"{fam}35" in vocab and f"{fam}36" not in vocab
        assert vocab.classify(f"{fam}1") is V.TokenCategory.DEVICE


def test_fifteen_circuit_types(vocab):
    types = [t for t in vocab.tokens if t.category is V.TokenCategory.CIRCUIT_TYPE]
    assert len(types) == 15
    assert types[-1].text == "CIRCUIT_General"


def test_minimal_caps_give_one_device_per_family():
    v = V.build_vocabulary({f: 1 for f in V.FAMILIES})
    devices = [t.text for t in v.tokens if t.category is V.TokenCategory.DEVICE]
    assert sorted(devices) == sorted(f"{f}1" for f in V.FAMILIES)


def test_exactly_one_truncate(vocab):
    assert [t.text for t in vocab.tokens if t.category is V.TokenCategory.TRUNCATE] == ["TRUNCATE"]
    assert vocab.tokens[-1].text == "TRUNCATE"


def test_classify_examples(vocab):
    assert V.classify_token("CIRCUIT_OpAmp") is V.TokenCategory.CIRCUIT_TYPE
    assert V.classify_token("M_GD") is V.TokenCategory.PIN
    assert V.classify_token("VIN1") is V.TokenCategory.NET
    with pytest.raises(NotInVocabulary):
        V.classify_token("NM36")
    with pytest.raises(NotInVocabulary):
        V.classify_token("bogus")


def test_classify_is_exhaustively_consistent(vocab):
    for t in vocab.tokens:
        assert V.classify_token(t.text, vocab) is t.category


def test_texts_and_ids_unique(vocab):
    assert len({t.text for t in vocab.tokens}) == len(vocab)
    assert [t.id for t in vocab.tokens] == list(range(len(vocab)))


def test_mosfet_pins_are_all_nonempty_subsets():
    expected = {"M_" + "".join(c) for k in range(1, 5) for c in combinations("GDSB", k)}
    assert set(V.pin_token_set("NM")) == expected
    assert len(V.pin_token_set("PM")) == 2 ** 4 - 1


def test_other_pin_sets():
    assert V.pin_token_set("R") == ["R_C"]
    assert set(V.pin_token_set("DIO")) == {"D_P", "D_N"}
    assert len(V.pin_token_set("NPN")) == 2 ** 3 - 1
    with pytest.raises(NotInVocabulary):
        V.pin_token_set("JFET")


def test_category_order_and_determinism():
    a, b = V.build_vocabulary(), V.build_vocabulary()
    assert [(t.text, t.id) for t in a.tokens] == [(t.text, t.id) for t in b.tokens]
    cats = [t.category for t in a.tokens]
    order = [V.TokenCategory.CIRCUIT_TYPE, V.TokenCategory.DEVICE, V.TokenCategory.NET,
             V.TokenCategory.PIN, V.TokenCategory.TRUNCATE]
    firsts = [cats.index(c) for c in order]
    assert firsts == sorted(firsts)
    # each category is one contiguous block
    for c in order:
        idx = [i for i, x in enumerate(cats) if x is c]
        assert idx == list(range(idx[0], idx[-1] + 1))


def test_devices_ordered_by_family_then_index(vocab):
    devices = [t.text for t in vocab.tokens if t.category is V.TokenCategory.DEVICE]
    parsed = [V.split_device(d) for d in devices]
    assert parsed == sorted(parsed, key=lambda p: (V.FAMILIES.index(p[0]), p[1]))


def test_limit_errors():
    with pytest.raises(ConfigurationError):
        V.build_vocabulary([("NM", 3), ("NM", 4)])
    with pytest.raises(ConfigurationError):
        V.build_vocabulary({"NM": 0})
    with pytest.raises(ConfigurationError):
        V.build_vocabulary({"TRIODE": 2})


def test_dump_format_round_trips(vocab):
    text = vocab.dump()
    assert text.endswith("\n") and "\r" not in text
    rows = V.load_vocabulary_dump(text)
    assert rows == [(t.id, t.text, t.category.value) for t in vocab.tokens]


def test_default_net_tokens(vocab):
    nets = [t.text for t in vocab.tokens if t.category is V.TokenCategory.NET]
    assert nets[:2] == ["VSS", "VDD"]
    assert "VIN4" in nets and "VIN5" not in nets and "NET64" in nets and "NET65" not in nets
