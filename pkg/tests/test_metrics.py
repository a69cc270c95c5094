import itertools
import json
from decimal import ROUND_HALF_UP, Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tremorsketch.errors import (EmptyMatrix, EmptyVote, LabelOutOfRange, LengthMismatch,
                                 MissingPairing)
from tremorsketch.metrics import (classification_metrics, confusion_matrix,
                                  ensemble_evaluate, ensemble_evaluate_pairs,
                                  ensemble_from_probabilities, evaluate_predictions, hard_vote,
                                  pair_by_class_index, write_pgm_heatmap, write_report)

from oracles import labels_from_cm, vote_oracle

SPIRAL_CM = [[14, 1], [2, 13]]
WAVE_CM = [[15, 0], [1, 14]]
ENSEMBLE_CM = [[29, 1], [3, 27]]


def pct(x, places=0):
    q = Decimal(1).scaleb(-places)
    return float((Decimal(repr(float(x))) * 100).quantize(q, rounding=ROUND_HALF_UP))


class Scripted:
    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=np.float64)

    def predict_proba(self, x):
        return self.probs[np.asarray(x, dtype=np.int64).ravel()]


# -- confusion matrix --------------------------------------------------------------------------
def test_confusion_perfect_and_empty():
    assert confusion_matrix([0, 1, 0, 1], [0, 1, 0, 1]).tolist() == [[2, 0], [0, 2]]
    assert confusion_matrix([], []).tolist() == [[0, 0], [0, 0]]


def test_confusion_reconstructed_spiral():
    t, p = labels_from_cm(SPIRAL_CM)
    assert confusion_matrix(t, p).tolist() == SPIRAL_CM


def test_confusion_errors():
    with pytest.raises(LengthMismatch):
        confusion_matrix([0, 1], [0])
    with pytest.raises(LabelOutOfRange):
        confusion_matrix([0, 2], [0, 1])


# -- metrics ----------------------------------------------------------------------------------
def test_spiral_figures():
    r = classification_metrics(SPIRAL_CM)
    assert [pct(r.accuracy), *map(pct, r.precision), *map(pct, r.recall)] == [90, 88, 93, 93, 87]
    assert [pct(v) for v in r.f1] == [90, 90]
    assert r.f1[0] == pytest.approx(0.9032, abs=1e-4)
    assert r.f1[1] == pytest.approx(0.8966, abs=1e-4)
    assert [pct(r.weighted_precision), pct(r.weighted_recall), pct(r.weighted_f1)] == [90, 90, 90]


def test_wave_figures():
    r = classification_metrics(WAVE_CM)
    assert pct(r.accuracy, 2) == 96.67
    assert [*map(pct, r.precision), *map(pct, r.recall), *map(pct, r.f1)] == [94, 100, 100, 93, 97, 97]


def test_ensemble_figures():
    r = classification_metrics(ENSEMBLE_CM)
    assert pct(r.accuracy, 1) == 93.3
    assert [*map(pct, r.precision), *map(pct, r.recall)] == [91, 96, 97, 90]
    assert pct(r.f1[0]) == 94


def test_zero_column_precision_is_zero():
    r = classification_metrics([[3, 0], [2, 0]])
    assert r.precision.tolist() == [0.6, 0.0]
    assert r.f1[1] == 0.0


def test_empty_matrix():
    with pytest.raises(EmptyMatrix):
        classification_metrics([[0, 0], [0, 0]])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=60))
def test_accuracy_equals_weighted_recall_and_bounds(pairs):
    t, p = zip(*pairs)
    r = evaluate_predictions(t, p, 3)
    assert r.accuracy == pytest.approx(r.weighted_recall, abs=1e-12)
    for v in (*r.precision, *r.recall, *r.f1, r.accuracy, r.weighted_f1, r.weighted_precision):
        assert 0 <= v <= 1
    assert r.confusion.sum() == len(pairs)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=40),
       st.randoms())
def test_metrics_permutation_invariant(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    a = evaluate_predictions(*zip(*pairs)).to_dict()
    b = evaluate_predictions(*zip(*shuffled)).to_dict()
    assert a == b


def test_report_outputs(tmp_path):
    r = classification_metrics(SPIRAL_CM, name="spiral")
    txt, js = write_report(r, tmp_path / "spiral")
    d = json.loads(open(js).read())
    assert d["accuracy"] == 0.9 and d["precision"] == [0.875, 0.9286]
    assert "weighted avg" in open(txt).read()
    write_pgm_heatmap(r.confusion, tmp_path / "cm.pgm", cell=4)
    assert open(tmp_path / "cm.pgm", "rb").read().startswith(b"P5\n8 8\n255\n")


# -- hard vote -------------------------------------------------------------------------------------
def test_vote_examples():
    assert hard_vote([1, 1], [[0.2, 0.8], [0.1, 0.9]]) == 1
    assert hard_vote([0, 0, 1], [[0.9, 0.1], [0.6, 0.4], [0.1, 0.9]]) == 0
    assert hard_vote([0, 1], [[0.6, 0.4], [0.1, 0.9]]) == 1


def test_vote_full_tie_goes_to_lowest_label():
    assert hard_vote([0, 1], [[0.5, 0.5], [0.5, 0.5]]) == 0


def test_vote_exhaustive_binary_up_to_three_voters():
    grid = [0.0, 0.25, 0.5, 0.75, 1.0]  # exact in binary, so sums tie exactly
    cases = 0
    for n in (1, 2, 3):
        for preds in itertools.product((0, 1), repeat=n):
            for p1 in itertools.product(grid, repeat=n):
                confs = [[1 - q, q] for q in p1]
                assert hard_vote(list(preds), confs) == vote_oracle(preds, confs)
                cases += 1
    assert cases == 2 * 5 + 4 * 25 + 8 * 125


def test_vote_unanimous_any_k():
    rng = np.random.default_rng(0)
    for k in (2, 3, 4, 5):
        for n in (1, 2, 3, 4):
            for label in range(k):
                confs = rng.dirichlet(np.ones(k), size=n)
                assert hard_vote([label] * n, confs) == label


def test_vote_errors():
    with pytest.raises(EmptyVote):
        hard_vote([], np.zeros((0, 2)))


# -- ensemble --------------------------------------------------------------------------------------
def test_pooled_replay_reproduces_ensemble_matrix():
    st_, sp_ = labels_from_cm(SPIRAL_CM)
    wt, wp = labels_from_cm(WAVE_CM)
    sprobs = np.eye(2)[sp_] * 0.8 + 0.1
    wprobs = np.eye(2)[wp] * 0.8 + 0.1
    res = ensemble_from_probabilities(sprobs, st_, wprobs, wt, mode="pooled")
    assert res.ensemble.confusion.tolist() == ENSEMBLE_CM
    assert round(res.ensemble.accuracy, 3) == 0.933
    assert res.spiral.accuracy == 0.9
    assert res.wave.accuracy == pytest.approx(29 / 30)


def test_both_perfect_gives_perfect_ensemble():
    labels = [0, 1, 0, 1, 1, 0]
    probs = np.eye(2)[labels] * 0.9 + 0.05
    model = Scripted(probs)
    idx = np.arange(6)
    res = ensemble_evaluate(model, model, (idx, labels), (idx, labels))
    assert res.ensemble.accuracy == 1.0


def test_disagreement_defers_to_more_confident_spiral():
    labels = np.array([0, 1, 0, 1])
    spiral = np.array([[0.9, 0.1], [0.2, 0.8], [0.3, 0.7], [0.95, 0.05]])
    wave = np.where(spiral > 0.5, 0.4, 0.6)  # opposite argmax, always less confident
    res = ensemble_from_probabilities(spiral, labels, wave, labels, mode="paired")
    assert res.ensemble.confusion.tolist() == res.spiral.confusion.tolist()


def test_disjoint_errors_ensemble_at_least_min_branch():
    labels = np.array([0, 0, 0, 1, 1, 1])
    right = lambda lbl, c: [c, 1 - c] if lbl == 0 else [1 - c, c]  # noqa: E731
    spiral = np.array([right(l, 0.9) for l in labels])
    wave = np.array([right(l, 0.7) for l in labels])
    spiral[1] = right(labels[1], 0.4)  # spiral wrong, weakly
    wave[4] = right(labels[4], 0.45)   # wave wrong, weakly
    res = ensemble_from_probabilities(spiral, labels, wave, labels, mode="paired")
    assert res.ensemble.accuracy >= min(res.spiral.accuracy, res.wave.accuracy)
    assert res.ensemble.accuracy == 1.0


def test_pairing_by_class_rank_and_missing():
    assert pair_by_class_index([1, 0, 1], [0, 1, 1]) == [(0, 1), (1, 0), (2, 2)]
    with pytest.raises(MissingPairing):
        pair_by_class_index([0, 0, 1], [0, 1, 1])


def test_explicit_pairs_entry_point():
    labels = [0, 1, 1]
    sp = Scripted([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]])
    wv = Scripted([[0.8, 0.2], [0.3, 0.7], [0.1, 0.9]])
    triples = [(np.array([i]), np.array([i]), lbl) for i, lbl in enumerate(labels)]
    res = ensemble_evaluate_pairs(sp, wv, triples)
    assert res.ensemble.accuracy == 1.0
    assert res.spiral.accuracy == pytest.approx(2 / 3)
