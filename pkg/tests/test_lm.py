import math
import pickle
import random
import sys
from functools import partial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import PEERS, nmos_mirror
from oracles import ngram_counts_by_hand
from topobi import vocab as V
from topobi.augment import expand_corpus
from topobi.errors import ConfigurationError, ProtocolError, SessionError
from topobi.grammar import replay
from topobi.lm import (ExternalModelSession, MemorizingModel, NGramModel, Outcome, SamplerConfig, equal_shares,
                       generate, masked_probs, sample_seed, sample_sequence, train_ngram)
from topobi.sequence import CircuitSequence, parse_sequence, serialize_closed_walk

SEQ = "CIRCUIT_Mirror VSS M_SB NM1 M_GD NET1 M_G NM2 M_D VOUT1 M_D NM2 M_SB VSS".split()


def peer(mode):
    return [sys.executable, str(PEERS / "peer.py"), mode]


@pytest.fixture(scope="module")
def desk_model(desk_corpus):
    data = [r.sequence for r in expand_corpus(desk_corpus, 4, 0, seed=1).records]
    return train_ngram(data, order=4, k=0.1), data


def test_bigram_matches_hand_counts(vocab):
    data = [SEQ, SEQ[:4] + ["M_GDSB", "VSS"]]
    model = train_ngram(data, order=2, k=0.5)
    ctx = "NM1"
    following: dict[str, int] = {}
    for seq in data:
        for tok, n in ngram_counts_by_hand([*seq, V.TRUNCATE], 2).get((ctx,), {}).items():
            following[tok] = following.get(tok, 0) + n
    total = sum(following.values())
    p = model.next_distribution(["VSS", ctx])
    for tok in ("M_GD", "M_GDSB", "VSS"):
        expect = (following.get(tok, 0) + 0.5) / (total + 0.5 * len(vocab))
        assert math.isclose(p[vocab.id(tok)], expect, rel_tol=1e-12)


def test_unigram_order(vocab):
    model = train_ngram([SEQ], order=1, k=1.0)
    p = model.next_distribution(SEQ[:5])
    n = len(SEQ) + 1
    assert math.isclose(p[vocab.id("NM2")], (2 + 1) / (n + len(vocab)))
    assert (model.next_distribution([]) == p).all()


def test_large_k_is_near_uniform(vocab):
    model = train_ngram([SEQ], order=3, k=1e9)
    p = model.next_distribution(SEQ[:6])
    assert np.allclose(p, 1 / len(vocab), rtol=1e-6)


def test_backoff_to_shorter_context(vocab):
    model = train_ngram([SEQ], order=4, k=0.1)
    # "R1 NM1" never occurs, but "NM1" does
    unseen = model.next_distribution(["VIN1", "R1", "NM1"])
    seen = model.next_distribution(["NM1"])
    assert (unseen == seen).all()
    assert model.context_for(vocab.encode(["VIN1", "R1", "NM1"])) == (vocab.id("NM1"),)


def test_deterministic_successor_is_argmax(vocab):
    model = train_ngram([SEQ], order=4, k=0.1)
    p = model.next_distribution(SEQ[:3])
    assert int(np.argmax(p)) == vocab.id(SEQ[3])
    assert int(np.argmax(model.next_distribution(SEQ))) == vocab.truncate_id


def test_untrained_context_is_uniform(vocab):
    model = NGramModel(vocab, 3, 0.1)
    assert np.allclose(model.next_distribution([V.TRUNCATE] * 5), 1 / len(vocab))
    assert (model.next_logits([1, 2]) == 0).all()


def test_distributions_sum_to_one(desk_model, vocab):
    model, data = desk_model
    rng = random.Random(0)
    for _ in range(1000):
        hist = [rng.randrange(len(vocab)) for _ in range(rng.randint(0, 6))]
        p = model.next_distribution(hist)
        assert abs(p.sum() - 1) < 1e-9 and (p > 0).all()


def test_invalid_hyperparameters(vocab):
    with pytest.raises(ConfigurationError):
        NGramModel(vocab, 0)
    with pytest.raises(ConfigurationError):
        NGramModel(vocab, 2, 0.0)
    with pytest.raises(ConfigurationError):
        train_ngram([])
    with pytest.raises(ConfigurationError):
        SamplerConfig(temperature=0)


def test_json_round_trip_and_pickle(desk_model, tmp_path):
    model, _ = desk_model
    path = tmp_path / "m.json"
    path.write_text(model.to_json("unit"))
    back = NGramModel.load(path)
    assert back.counts == model.counts and back.order == model.order and back.k == model.k
    assert back.to_json("unit") == model.to_json("unit")
    again = pickle.loads(pickle.dumps(model))
    assert (again.next_distribution(SEQ[:4]) == model.next_distribution(SEQ[:4])).all()


def test_masked_probs_limits(vocab):
    logits = np.array([1.0, 3.0, 2.0, 5.0])
    mask = np.array([True, True, True, False])
    p = masked_probs(logits, mask, 1e-3)
    assert p[3] == 0 and math.isclose(p[1], 1.0)
    p = masked_probs(logits, mask, 1.0)
    assert math.isclose(p.sum(), 1.0) and p[3] == 0
    p = masked_probs(np.full(4, -np.inf), mask, 1.0)
    assert np.allclose(p[:3], 1 / 3)


def test_sampled_tokens_are_admissible(desk_model):
    model, _ = desk_model
    seen = []

    def check(mask, tid):
        assert mask[tid]
        seen.append(tid)

    for s in range(20):
        res = sample_sequence(model, "OpAmp", SamplerConfig(0.7, 300, s), on_step=check)
        if res.outcome is Outcome.TERMINATED:
            replay(res.sequence.tokens)
            parse_sequence(res.sequence)
    assert seen


def test_seeded_sampling_is_deterministic(desk_model):
    model, _ = desk_model
    a = sample_sequence(model, "Mirror", SamplerConfig(0.7, 300, 42))
    b = sample_sequence(model, "Mirror", SamplerConfig(0.7, 300, 42))
    assert a.sequence.tokens == b.sequence.tokens and a.outcome is b.outcome


def test_length_cap(desk_model):
    model, _ = desk_model
    res = sample_sequence(model, "OpAmp", SamplerConfig(5.0, 6, 0))
    assert res.outcome is Outcome.LENGTH_CAPPED and len(res.sequence.tokens) == 6


def test_memorizing_model_reproduces(vocab):
    seq = serialize_closed_walk(nmos_mirror(), 0)
    model = MemorizingModel([seq])
    res = sample_sequence(model, "Mirror", SamplerConfig(0.7, 1024, 5))
    assert res.outcome is Outcome.TERMINATED and res.sequence.tokens == seq.tokens


def test_external_uniform_session(vocab):
    with ExternalModelSession(peer("uniform")) as sess:
        res = sample_sequence(sess, "Mirror", SamplerConfig(1.0, 40, 3))
        assert res.outcome in set(Outcome)
        assert res.sequence.tokens[:2] == ["CIRCUIT_Mirror", "VSS"]
        assert any(line.startswith("< LOGITS") for line in sess.transcript)
        assert any(line.startswith("> MASK") for line in sess.transcript)


def test_external_offmask_scores_are_ignored():
    seen = []
    with ExternalModelSession(peer("offmask")) as sess:
        sample_sequence(sess, "Mirror", SamplerConfig(1.0, 30, 1), on_step=lambda m, t: seen.append(m[t]))
    assert seen and all(seen)


def test_external_errors():
    with pytest.raises(SessionError, match="handshake"):
        ExternalModelSession(peer("badhello"))
    with pytest.raises(SessionError, match="transcript tail"):
        with ExternalModelSession(peer("malformed")) as sess:
            sample_sequence(sess, "Mirror", SamplerConfig(1.0, 30, 1))
    with pytest.raises(ProtocolError):
        with ExternalModelSession(peer("missing")) as sess:
            sample_sequence(sess, "Mirror", SamplerConfig(1.0, 30, 1))
    with pytest.raises(SessionError, match="ended the session"):
        with ExternalModelSession(peer("die")) as sess:
            sample_sequence(sess, "Mirror", SamplerConfig(1.0, 30, 1))
    with pytest.raises(SessionError):
        ExternalModelSession(["/nonexistent/model-binary"])


def _factory(model):
    return model


def test_generate_independent_of_jobs(desk_model):
    model, _ = desk_model
    plan = [("Mirror", 3), ("OpAmp", 2)]
    one = generate(partial(_factory, model), plan, base_seed=7, max_length=200, jobs=1)
    two = generate(partial(_factory, model), plan, base_seed=7, max_length=200, jobs=2)
    assert [r.sequence.tokens for r in one] == [r.sequence.tokens for r in two]
    assert [r.circuit_type for r in one] == ["Mirror"] * 3 + ["OpAmp"] * 2
    assert len({r.seed for r in one}) == 5


def test_equal_shares():
    shares = equal_shares(1000)
    assert sum(n for _, n in shares) == 1000
    assert {n for _, n in shares} == {66, 67}
    assert [t for t, _ in shares] == list(V.CIRCUIT_TYPES)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(V.CIRCUIT_TYPES), st.integers(0, 10_000))
def test_sample_seed_is_pure(base, ctype, index):
    assert sample_seed(base, ctype, index) == sample_seed(base, ctype, index)
    assert sample_seed(base, ctype, index) != sample_seed(base, ctype, index + 1)
