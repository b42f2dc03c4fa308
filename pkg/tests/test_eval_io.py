import json
import random

import pytest
from hypothesis import given, strategies as st

from bracketrank.core import Candidate
from bracketrank.eval_io import (
    MalformedLine,
    MissingDocument,
    MissingQuery,
    Qrel,
    evaluate_run,
    format_run,
    load_candidates,
    ndcg_at_k,
    read_qrels,
    read_run,
    write_run,
)


def write(path, text):
    path.write_text(text)
    return path


@pytest.fixture
def corpus(tmp_path):
    docs = {"d1": "one", "d2": "two", "d3": "three"}
    write(tmp_path / "corpus.jsonl", "".join(json.dumps({"id": k, "contents": v}) + "\n" for k, v in docs.items()))
    write(tmp_path / "queries.jsonl", json.dumps({"id": "q1", "text": "numbers"}) + "\n")
    return tmp_path


def test_load_candidates_maps_fields(corpus):
    write(corpus / "run", "q1 Q0 d3 1 12.5 bm25\nq1 Q0 d1 2 11.0 bm25\n")
    data = load_candidates(corpus / "run", corpus / "corpus.jsonl", corpus / "queries.jsonl")
    query, cands = data["q1"]
    assert query.text == "numbers"
    assert cands[0] == Candidate("d3", "three", 12.5, 1)
    assert [c.doc_id for c in cands] == ["d3", "d1"]


def test_load_candidates_sorts_by_rank(corpus):
    write(corpus / "run", "q1 Q0 d1 2 1 x\nq1 Q0 d2 1 2 x\n")
    _, cands = load_candidates(corpus / "run", corpus / "corpus.jsonl", corpus / "queries.jsonl")["q1"]
    assert [c.doc_id for c in cands] == ["d2", "d1"]


def test_rank_gap_is_malformed(corpus):
    write(corpus / "run", "q1 Q0 d1 1 2 x\nq1 Q0 d2 3 1 x\n")
    with pytest.raises(MalformedLine) as err:
        load_candidates(corpus / "run", corpus / "corpus.jsonl", corpus / "queries.jsonl")
    assert err.value.line_no == 2


@pytest.mark.parametrize("text", ["q1 Q0 d1 1 2\n", "q1 Q0 d1 one 2 x\n", "q1 Q0 d1 1 2 x\nq1 Q0 d1 2 1 x\n"])
def test_malformed_run_lines(tmp_path, text):
    with pytest.raises(MalformedLine):
        read_run(write(tmp_path / "run", text))


def test_empty_run_warns(corpus, caplog):
    write(corpus / "run", "")
    assert load_candidates(corpus / "run", corpus / "corpus.jsonl", corpus / "queries.jsonl") == {}
    assert "no records" in caplog.text


def test_missing_document(corpus):
    write(corpus / "run", "q1 Q0 d1 1 2 x\nq1 Q0 d9 2 1 x\n")
    with pytest.raises(MissingDocument) as err:
        load_candidates(corpus / "run", corpus / "corpus.jsonl", corpus / "queries.jsonl")
    assert err.value.ids == ["d9"]


def test_missing_corpus_file(corpus):
    write(corpus / "run", "q1 Q0 d1 1 2 x\n")
    with pytest.raises(MissingDocument):
        load_candidates(corpus / "run", corpus / "nope.jsonl", corpus / "queries.jsonl")


def test_missing_query(corpus):
    write(corpus / "run", "q2 Q0 d1 1 2 x\n")
    with pytest.raises(MissingQuery):
        load_candidates(corpus / "run", corpus / "corpus.jsonl", corpus / "queries.jsonl")


def test_write_run_format(tmp_path):
    cands = [Candidate("dA", "", 0, 1), Candidate("dB", "", 0, 2)]
    write_run({"q1": cands}, "brkt", tmp_path / "out")
    assert (tmp_path / "out").read_text() == "q1 Q0 dA 1 2 brkt\nq1 Q0 dB 2 1 brkt\n"


def test_write_run_empty(tmp_path):
    write_run({}, "brkt", tmp_path / "out")
    assert (tmp_path / "out").read_text() == ""


def test_write_run_scores_and_order():
    text = format_run({"q2": [f"b{i}" for i in range(3)], "q1": [f"a{i}" for i in range(100)]}, "t")
    lines = text.splitlines()
    assert lines[0] == "q1 Q0 a0 1 100 t"
    assert lines[99] == "q1 Q0 a99 100 1 t"
    assert lines[100].startswith("q2 ")


def test_write_then_load_round_trips(corpus):
    order = ["d2", "d3", "d1"]
    write_run({"q1": order}, "t", corpus / "out")
    _, cands = load_candidates(corpus / "out", corpus / "corpus.jsonl", corpus / "queries.jsonl")["q1"]
    assert [c.doc_id for c in cands] == order


def test_read_qrels(tmp_path):
    qrels = read_qrels(write(tmp_path / "qrels", "q1 0 a 2\nq1 0 b -1\nq2 0 c 1\n"))
    assert qrels == {"q1": {"a": 2, "b": 0}, "q2": {"c": 1}}
    with pytest.raises(MalformedLine):
        read_qrels(write(tmp_path / "bad", "q1 0 a 2\nq1 0 a 1\n"))


# nDCG ----------------------------------------------------------------------

RELS = {"a": 3, "b": 2, "c": 1}


def test_ndcg_ideal():
    assert ndcg_at_k(["a", "b", "c"], RELS, 3) == pytest.approx(1.0)


def test_ndcg_hand_worked_reverse():
    # DCG = 1 + 3/log2(3) + 7/2, IDCG = 7 + 3/log2(3) + 1/2; cross-checked with trec_eval
    assert ndcg_at_k(["c", "b", "a"], RELS, 3) == pytest.approx(0.6806060567602009, abs=1e-12)


def test_ndcg_accepts_qrel_records():
    qrels = [Qrel("q", d, r) for d, r in RELS.items()]
    assert ndcg_at_k(["c", "b", "a"], qrels, 3) == pytest.approx(0.6806060567602009)


def test_ndcg_no_relevant():
    assert ndcg_at_k(["a"], {}, 10) == 0.0
    assert ndcg_at_k(["a"], {"a": 0}, 10) == 0.0


def test_ndcg_bad_k():
    with pytest.raises(ValueError):
        ndcg_at_k(["a"], RELS, 0)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=30), st.integers(1, 20), st.integers(0, 5))
def test_unjudged_tail_is_ignored(grades, k, extra):
    docs = [f"d{i}" for i in range(len(grades))]
    rels = dict(zip(docs, grades))
    ranking = docs[:k]
    assert ndcg_at_k(ranking + [f"u{i}" for i in range(extra)], rels, k) == ndcg_at_k(ranking, rels, k)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=30).filter(any), st.integers(1, 20))
def test_ideal_order_scores_one(grades, k):
    docs = [f"d{i}" for i in range(len(grades))]
    rels = dict(zip(docs, grades))
    ideal = sorted(docs, key=lambda d: -rels[d])
    assert ndcg_at_k(ideal, rels, k) == pytest.approx(1.0)


@given(st.lists(st.integers(0, 3), min_size=2, max_size=20), st.data())
def test_swap_toward_front_never_hurts(grades, data):
    docs = [f"d{i}" for i in range(len(grades))]
    rels = dict(zip(docs, grades))
    i = data.draw(st.integers(0, len(docs) - 2))
    j = data.draw(st.integers(i + 1, len(docs) - 1))
    if rels[docs[j]] <= rels[docs[i]]:
        return
    swapped = docs[:]
    swapped[i], swapped[j] = swapped[j], swapped[i]
    for k in (1, 5, 10):
        assert ndcg_at_k(swapped, rels, k) >= ndcg_at_k(docs, rels, k) - 1e-12


# evaluate_run --------------------------------------------------------------

def test_evaluate_run_perfect(tmp_path):
    write(tmp_path / "run", "q1 Q0 a 1 3 t\nq1 Q0 b 2 2 t\nq1 Q0 c 3 1 t\n")
    write(tmp_path / "qrels", "q1 0 a 3\nq1 0 b 2\nq1 0 c 1\n")
    report = evaluate_run(tmp_path / "run", tmp_path / "qrels", [1, 5, 10])
    assert report.mean == {1: 1.0, 5: 1.0, 10: 1.0}


def test_evaluate_run_mean_and_exclusion(tmp_path):
    write(tmp_path / "run", "q1 Q0 a 1 1 t\nq2 Q0 x 1 1 t\nq3 Q0 z 1 1 t\n")
    write(tmp_path / "qrels", "q1 0 a 1\nq2 0 y 1\n")
    report = evaluate_run(tmp_path / "run", tmp_path / "qrels", [1])
    assert report.per_query == {"q1": {1: 1.0}, "q2": {1: 0.0}}
    assert report.mean[1] == 0.5
    assert report.excluded == ["q3"]


def test_matches_trec_eval_on_random_instances():
    pytrec_eval = pytest.importorskip("pytrec_eval")
    rng = random.Random(7)
    for _ in range(50):
        docs = [f"d{i}" for i in range(rng.randint(1, 40))]
        rels = {d: rng.choice([0, 0, 1, 2, 3]) for d in rng.sample(docs, rng.randint(1, len(docs)))}
        rels.update({f"x{i}": rng.randint(1, 3) for i in range(rng.randint(0, 3))})
        ranking = docs[:]
        rng.shuffle(ranking)
        # trec_eval uses linear gain; feeding it 2**rel - 1 makes it exponential
        evaluator = pytrec_eval.RelevanceEvaluator(
            {"q": {d: 2 ** r - 1 for d, r in rels.items()}}, {"ndcg_cut.1,5,10"}
        )
        run = {"q": {d: float(len(ranking) - i) for i, d in enumerate(ranking)}}
        theirs = evaluator.evaluate(run)["q"]
        for k in (1, 5, 10):
            assert ndcg_at_k(ranking, rels, k) == pytest.approx(theirs[f"ndcg_cut_{k}"], abs=1e-6)
