import numpy as np
import pytest

from latentsim.backend import LocalBackend, Registry
from latentsim.pipeline import SignConfig, classification_grid, sign_document, sign_many
from latentsim.signature import serialize
from latentsim.synthetic import generate_corpus
from latentsim.textprep import ReferenceDocument

from conftest import V_COUNTRY, V_NATION


class RecordingBackend:
    """Test double that logs every payload a client sends."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = []

    def submit_df(self, user_id, words):
        words = list(words)
        self.calls.append(("df", user_id, words))
        return self.inner.submit_df(user_id, words)

    def fetch_vectors(self, words):
        self.calls.append(("vectors", list(words)))
        return self.inner.fetch_vectors(words)


def toy_registry():
    reg = Registry()
    reg.submit_df("u1", ["country", "nation"])
    reg.submit_df("u2", ["weather"])
    reg.submit_df("u3", ["football"])
    return reg


def test_toy_flow(toy_model):
    doc = ReferenceDocument("A", ["country"] * 5 + ["nation"] * 6)
    sig = sign_document(doc, LocalBackend(toy_registry(), toy_model), SignConfig(k=2))
    # rows follow tf-idf rank: nation (6/6 ln 2) before country (5/6 ln 2)
    assert sig.vectors.tolist() == [V_NATION, V_COUNTRY]
    assert np.allclose(sig.weights, [6 / 11, 5 / 11], atol=1e-15)


def test_client_only_sends_presence_and_selection(toy_model):
    doc = ReferenceDocument("A", ["country"] * 5 + ["nation"] * 6 + ["rare"] * 9)
    rec = RecordingBackend(LocalBackend(toy_registry(), toy_model))
    sign_document(doc, rec, SignConfig(k=1, p_min=0.3))
    kinds = [c[0] for c in rec.calls]
    assert kinds == ["df", "vectors"]
    _, user, words = rec.calls[0]
    assert user == "A" and sorted(words) == ["country", "nation", "rare"]
    assert all(isinstance(w, str) for w in words)
    # rare has df 1/4 < p_min, so the single top word is nation
    assert rec.calls[1] == ("vectors", ["nation"])


def test_decoys_are_sent_but_not_signed(toy_model):
    doc = ReferenceDocument("A", ["country"] * 5 + ["nation"] * 6 + ["weather", "football"])
    rec = RecordingBackend(LocalBackend(toy_registry(), toy_model))
    sig = sign_document(doc, rec, SignConfig(k=1, p_min=0.0, decoys=2))
    sent = rec.calls[-1][1]
    assert len(sent) == 3 and "nation" in sent and len(set(sent)) == 3
    assert sig.k == 1


def test_external_decoys_enter_df(toy_model):
    doc = ReferenceDocument("A", ["country"] * 5 + ["nation"] * 6)
    reg = toy_registry()
    sig = sign_document(doc, LocalBackend(reg, toy_model), SignConfig(k=2, decoys=2, decoy_pool=["p", "q", "r"]))
    assert sig.k == 2
    assert sum(reg.global_df().df.get(w, 0) for w in "pqr") == 2


def test_end_to_end_determinism(toy_model):
    corpus = generate_corpus(n_per_class=4, n_seed=4, topic_size=40, common_size=60, doc_tokens=150, seed=2)
    model = corpus.embedding(16, 2)
    docs = [ReferenceDocument(u, " ".join(m).split()) for u, m in corpus.users.items()]
    cfg = SignConfig(k=10, decoys=3, jitter_sigma=0.01, seed=5)

    def run():
        sigs = sign_many(docs, LocalBackend(Registry(), model), cfg, [5, 10])
        grid = classification_grid(sigs, corpus.labels, [1, 3])
        return [serialize(s) for s in sigs[10]], grid

    assert run() == run()


def test_sign_config_validation():
    with pytest.raises(ValueError):
        SignConfig(k=0)
    with pytest.raises(ValueError):
        SignConfig(decoys=-1)
    with pytest.raises(ValueError):
        SignConfig(jitter_sigma=-0.1)
