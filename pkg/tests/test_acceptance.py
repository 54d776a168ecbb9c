"""Acceptance suite: one test per exit criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (or execute this file).
"""
import json
import sys
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentsim.backend import SCHEMAS, LocalBackend, Registry, validate
from latentsim.cli import bench
from latentsim.embedding import cosine_distance_matrix
from latentsim.errors import FormatError
from latentsim.netgraph import LabeledNetwork, classical_mds, knn_accuracy, pairwise_matrix
from latentsim.pipeline import SignConfig, sign_document, sign_many
from latentsim.relevance import BowVector, DfVector, tfidf
from latentsim.signature import deserialize, serialize
from latentsim.synthetic import generate_corpus, random_signature
from latentsim.textprep import ReferenceDocument, build_reference, parse_plain
from latentsim.transport import oracle_emd, similarity, wmd

from conftest import V_COUNTRY, V_NATION


@pytest.fixture
def report(request):
    terminal = request.config.pluginmanager.getplugin("terminalreporter")

    def emit(number: int, ok: bool, detail: str) -> None:
        line = f"[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}"
        if terminal is not None:
            terminal.write_line("\n" + line)
        else:
            print(line)
        assert ok, line

    return emit


def test_criterion_1_worked_example(report, toy_model):
    reg = Registry()
    reg.submit_df("u1", ["country", "nation"])
    reg.submit_df("u2", ["weather"])
    reg.submit_df("u3", ["football"])
    doc = ReferenceDocument("A", ["country"] * 5 + ["nation"] * 6)
    sig = sign_document(doc, LocalBackend(reg, toy_model), SignConfig(k=2))
    by_weight = dict(zip(np.round(sig.weights, 12).tolist(), sig.vectors.tolist()))
    got_w = sorted(sig.weights.tolist())
    err_w = max(abs(got_w[0] - 5 / 11), abs(got_w[1] - 6 / 11))
    v5 = np.array(by_weight[round(5 / 11, 12)])
    v6 = np.array(by_weight[round(6 / 11, 12)])
    err_v = max(np.abs(v5 - V_COUNTRY).max(), np.abs(v6 - V_NATION).max())
    ok = sig.k == 2 and sig.dim == 3 and err_w <= 1e-6 and err_v <= 1e-6 and reg.num_users == 4
    report(1, ok, f"weights {got_w} vs [5/11, 6/11], max weight err {err_w:.1e}, max vector err {err_v:.1e}")


def test_criterion_2_solver_vs_oracle(report):
    rng = np.random.default_rng(2024)
    worst, count = 0.0, 0
    start = time.perf_counter()
    for _ in range(200):
        k1, k2 = rng.integers(1, 5, size=2)
        a = random_signature(int(k1), 5, rng)
        b = random_signature(int(k2), 5, rng)
        distance, _ = wmd(a, b)
        cost = cosine_distance_matrix(a.vectors, b.vectors)
        worst = max(worst, abs(distance - oracle_emd(a.weights, b.weights, cost.tolist())))
        count += 1
    elapsed = time.perf_counter() - start
    ok = count >= 200 and worst <= 1e-7 and elapsed < 10.0
    report(2, ok, f"{count} instances, max |wmd - oracle| = {worst:.1e}, {elapsed:.2f} s")


def test_criterion_3_metric_sanity(report):
    rng = np.random.default_rng(3)
    self_err = sym_err = 0.0
    lo, hi = 1.0, 0.0
    for _ in range(100):
        a = random_signature(int(rng.integers(1, 30)), 20, rng)
        b = random_signature(int(rng.integers(1, 30)), 20, rng)
        self_err = max(self_err, abs(similarity(a, a) - 1.0), abs(similarity(b, b) - 1.0))
        s_ab, s_ba = similarity(a, b), similarity(b, a)
        sym_err = max(sym_err, abs(s_ab - s_ba))
        lo, hi = min(lo, s_ab, s_ba), max(hi, s_ab, s_ba)
    ok = self_err <= 1e-9 and sym_err <= 1e-9 and 0.0 <= lo and hi <= 1.0
    report(3, ok, f"100 pairs, |sim(A,A)-1| <= {self_err:.1e}, asymmetry <= {sym_err:.1e}, range [{lo:.3f}, {hi:.3f}]")


@st.composite
def _scored_case(draw):
    n = draw(st.integers(2, 80))
    words = draw(st.lists(st.text("abcdefghij", min_size=1, max_size=5), min_size=1, max_size=15, unique=True))
    counts = {w: draw(st.integers(1, 100)) for w in words}
    df = {w: draw(st.integers(1, n)) for w in words}
    factor = draw(st.integers(2, 20))
    probe = draw(st.sampled_from(words))
    return BowVector(counts), DfVector(df, n), factor, probe


def test_criterion_4_tfidf_properties(report):
    cases = []

    @settings(max_examples=1000, deadline=None, database=None)
    @given(_scored_case())
    def check(case):
        bow, trunc, factor, probe = case
        n = trunc.num_users
        base = tfidf(bow, trunc, 0.0).tfidf
        scaled = tfidf(BowVector({w: c * factor for w, c in bow.counts.items()}), trunc, 0.0).tfidf
        assert all(abs(base[w] - scaled[w]) <= 1e-12 * max(1.0, base[w]) for w in base)
        curve = [tfidf(bow, DfVector({**trunc.df, probe: d}, n), 0.0).tfidf[probe] for d in range(1, n + 1)]
        assert all(x > y for x, y in zip(curve, curve[1:]))
        assert curve[-1] == 0.0 and min(curve[:-1]) > 0.0
        cases.append(1)

    failure = None
    try:
        check()
    except Exception as exc:  # reported below, then re-raised by the assert
        failure = exc
    ok = failure is None and len(cases) >= 1000
    detail = f"{len(cases)} randomized cases: scaling invariance, df-monotonicity, zero idf at df = #users"
    report(4, ok, detail if failure is None else f"{detail}; counterexample: {failure}")


def test_criterion_5_wire_format(report):
    corpus = generate_corpus(n_per_class=3, n_seed=5, seed=5)
    model = corpus.embedding(100, 5)
    backend = LocalBackend(Registry(), model)
    prep_docs = [build_reference(parse_plain("\n".join(m)), user_id=u) for u, m in corpus.users.items()]
    sigs = sign_many(prep_docs, backend, SignConfig(k=50))[50]
    sizes, worst_v, worst_w, leaked, stable, exact = [], -1.0, 0.0, 0, True, True
    for doc, sig in zip(prep_docs, sigs):
        data = serialize(sig)
        sizes.append(len(data))
        back = deserialize(data)
        # f16 rounding bound: half an ulp, i.e. 2^-11 relative, or 2^-25 absolute when subnormal
        excess = np.abs(back.vectors - sig.vectors) - (2.0**-11 * np.abs(sig.vectors) + 2.0**-25)
        worst_v = max(worst_v, float(excess.max()))
        exact &= np.array_equal(back.vectors, sig.vectors.astype(np.float16).astype(np.float64))
        worst_w = max(worst_w, float(np.max(np.abs(back.weights - sig.weights) / sig.weights)))
        stable &= serialize(back) == data
        leaked += sum(w.encode() in data for w in set(doc.tokens))
    ok = (
        all(s.k == 50 and s.dim == 100 for s in sigs)
        and all(10_000 <= n <= 12_288 for n in sizes)
        and worst_v <= 0.0 and exact and worst_w <= 2**-10 and leaked == 0 and stable
    )
    report(
        5, ok,
        f"{len(sigs)} k=50 D=100 signatures, {min(sizes)}-{max(sizes)} bytes; vectors equal f16 rounding: "
        f"{exact} (max excess over half-ulp bound {worst_v:.1e}); weight rel err {worst_w:.1e} <= 2^-10; "
        f"byte-stable: {stable}; {leaked} plaintext words found",
    )


def test_criterion_6_performance_shape(report):
    rows = bench([10, 50, 100, 200, 400], repeats=3, dim=100, seed=6)
    times = dict(rows)
    monotone = all(t1 <= t2 for (_, t1), (_, t2) in zip(rows, rows[1:]))
    ratio = times[400] / times[50]
    ok = monotone and times[100] < 1.0 and ratio >= 10.0
    table = ", ".join(f"k={k}: {t:.4f}s" for k, t in rows)
    report(6, ok, f"{table}; nondecreasing={monotone}, k400/k50 = {ratio:.0f}x")


@pytest.mark.slow
def test_criterion_7_synthetic_classification(report):
    corpus = generate_corpus(n_per_class=30, n_seed=20, seed=0)
    model = corpus.embedding(100, 0)
    registry = Registry()
    for sid, msgs in corpus.seeds.items():
        seed_doc = build_reference(parse_plain("\n".join(msgs)), user_id="seed:" + sid)
        registry.submit_df(seed_doc.user_id, set(seed_doc.tokens))
    docs = [build_reference(parse_plain("\n".join(m)), user_id=u) for u, m in corpus.users.items()]
    sigs = sign_many(docs, LocalBackend(registry, model), SignConfig(k=50))[50]
    matrix = pairwise_matrix(sigs, workers=4)
    net = LabeledNetwork(matrix, corpus.labels)
    acc = {n: knn_accuracy(net, n) for n in (1, 3, 5)}

    rng = np.random.default_rng(7)
    ids = matrix.ids
    shuffled = []
    for _ in range(20):
        perm = dict(zip(ids, rng.permutation([corpus.labels[u] for u in ids])))
        control = LabeledNetwork(matrix, perm)
        shuffled.append(np.mean([knn_accuracy(control, n) for n in (1, 3, 5)]))
    control_mean = float(np.mean(shuffled))
    ok = len(sigs) == 60 and registry.num_users == 80 and min(acc.values()) >= 0.95 and abs(control_mean - 0.5) <= 0.15
    report(
        7, ok,
        f"60 users, 20 seeds, k=50: accuracy " + ", ".join(f"n={n}: {a:.3f}" for n, a in acc.items())
        + f"; label-shuffled control {control_mean:.3f} (20 shuffles)",
    )


def test_criterion_8_mds_exactness(report):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(20):
        pts = rng.uniform(-5, 5, size=(int(rng.integers(3, 30)), 2))
        d = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
        coords = classical_mds(d)
        rec = np.linalg.norm(coords[:, None] - coords[None, :], axis=-1)
        worst = max(worst, float(np.abs(rec - d).max()))
    report(8, worst <= 1e-6, f"20 planar point sets, max pairwise distance error {worst:.1e}")


class _Recorder:
    def __init__(self, inner):
        self.inner, self.payloads = inner, []

    def submit_df(self, user_id, words):
        body = {"user_id": user_id, "words": sorted(set(words))}
        validate("df_request", body)
        self.payloads.append(body)
        return self.inner.submit_df(user_id, body["words"])

    def fetch_vectors(self, words):
        body = {"words": list(words)}
        validate("vectors_request", body)
        self.payloads.append(body)
        return self.inner.fetch_vectors(body["words"])


def test_criterion_9_protocol_invariants(report):
    rng = np.random.default_rng(9)
    vocab = [f"w{i}" for i in range(30)]
    sequences = submissions = 0
    for _ in range(200):
        reg, latest = Registry(), {}
        for _ in range(int(rng.integers(1, 60))):
            user = f"u{rng.integers(12)}"  # frequent resubmissions
            words = set(rng.choice(vocab, size=int(rng.integers(1, 10)), replace=False).tolist())
            reg.submit_df(user, words)
            latest[user] = words
            reg.check_consistency()
            submissions += 1
        expected = {}
        for words in latest.values():
            for w in words:
                expected[w] = expected.get(w, 0) + 1
        assert reg.global_df().df == expected and reg.num_users == len(latest)
        sequences += 1

    forbidden = ("count", "tfidf", "score", "weight", "similar", "wmd", "distance", "pair", "peer")
    closed = all(s.get("additionalProperties") is False for s in SCHEMAS.values())
    clean = all(not any(f in name for f in forbidden) for s in SCHEMAS.values() for name in s["properties"])
    smuggled = [
        ("df_request", {"user_id": "a", "words": ["x"], "counts": [4]}),
        ("df_request", {"user_id": "a", "words": [["x", 4]]}),
        ("vectors_request", {"words": ["x"], "similarity": 0.7}),
        ("vectors_request", {"words": ["x"], "pairs": [["a", "b"]]}),
        ("df_response", {"df": {"x": 1}, "num_users": 2, "similarities": {}}),
    ]
    rejected = 0
    for kind, payload in smuggled:
        try:
            validate(kind, payload)
        except FormatError:
            rejected += 1

    # a real client run: every payload is schema-valid and holds no numbers
    corpus = generate_corpus(n_per_class=2, n_seed=3, seed=9)
    rec = _Recorder(LocalBackend(Registry(), corpus.embedding(16, 9)))
    docs = [build_reference(parse_plain("\n".join(m)), user_id=u) for u, m in corpus.users.items()]
    sign_many(docs, rec, SignConfig(k=10, decoys=2))
    numeric = sum(
        1 for p in rec.payloads for v in json.loads(json.dumps(p)).values()
        if isinstance(v, (int, float)) or (isinstance(v, list) and any(not isinstance(x, str) for x in v))
    )
    ok = closed and clean and rejected == len(smuggled) and numeric == 0 and sequences == 200
    report(
        9, ok,
        f"{sequences} random sequences ({submissions} submissions) consistent; schemas closed={closed}, "
        f"field names clean={clean}, smuggling attempts rejected {rejected}/{len(smuggled)}, "
        f"numeric values in {len(rec.payloads)} client payloads: {numeric}",
    )


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
