import numpy as np
import pytest

from fairrerank.baselines import (
    CandidateList,
    MFHyper,
    MFModel,
    _init_factors,
    load_candidates,
    mf_candidates,
    mf_train,
    mostpop_candidates,
    pairwise_loss,
    write_candidates,
)
from fairrerank.catalog import build_catalog
from fairrerank.dataio import Interaction, InteractionSet
from fairrerank.errors import DataError, TrainingError, ValidationError


def build(pairs):
    return InteractionSet.from_interactions(Interaction(u, i) for u, i in pairs)


def test_list_sorted_with_id_tiebreak():
    cl = CandidateList("u", [("b", 0.5), ("c", 0.9), ("a", 0.5)])
    assert cl.entries == [("c", 0.9), ("a", 0.5), ("b", 0.5)]


class TestMostPop:
    def test_hand_sorted(self):
        # x seen by 4 users, y by 2, z by 1; "fresh" has seen nothing of them
        pairs = [(f"p{j}", "x") for j in range(4)] + [("p0", "y"), ("p1", "y"), ("p2", "z"), ("fresh", "w")]
        lists = {cl.user: cl for cl in mostpop_candidates(build(pairs), 2)}
        assert lists["fresh"].entries == [("x", 1.0), ("y", 0.5)]

    def test_single_unseen(self):
        pairs = [("u", "a"), ("u", "b"), ("v", "c")]
        lists = {cl.user: cl for cl in mostpop_candidates(build(pairs), 5)}
        assert lists["u"].items == ["c"]
        assert lists["u"].is_short

    def test_identical_histories(self):
        pairs = [("u", "a"), ("v", "a"), ("w", "b"), ("w", "c"), ("x", "c")]
        lists = {cl.user: cl for cl in mostpop_candidates(build(pairs), 3)}
        assert lists["u"].entries == lists["v"].entries

    def test_never_recommends_seen(self, rng):
        pairs = {(f"u{rng.integers(30)}", f"i{rng.integers(40)}") for _ in range(300)}
        train = build(sorted(pairs))
        for cl in mostpop_candidates(train, 10):
            assert not {(cl.user, i) for i in cl.items} & train.pairs()
            assert cl.scores == sorted(cl.scores, reverse=True)


TOY = [("u1", "i1"), ("u2", "i2")]


class TestMF:
    def test_zero_lr_keeps_init(self):
        train = build(TOY)
        hyper = MFHyper(dim=4, lr=0.0, epochs=1, seed=5)
        model = mf_train(train, hyper)
        P, Q, _ = _init_factors(2, 2, hyper)
        np.testing.assert_array_equal(model.user_factors, P)
        np.testing.assert_array_equal(model.item_factors, Q)

    def test_deterministic(self):
        train = build(TOY + [("u3", "i1"), ("u3", "i3")])
        a = mf_train(train, MFHyper(dim=4, epochs=20, seed=3))
        b = mf_train(train, MFHyper(dim=4, epochs=20, seed=3))
        np.testing.assert_array_equal(a.user_factors, b.user_factors)
        np.testing.assert_array_equal(a.item_factors, b.item_factors)

    def test_separable_toy(self):
        train = build(TOY)
        hyper = MFHyper(dim=4, lr=0.1, epochs=200, reg=0.001, seed=1)
        probes = [(0, 0, 1), (1, 1, 0)]
        before = pairwise_loss(mf_train(train, MFHyper(dim=4, lr=0.0, epochs=1, seed=1)), probes)
        model = mf_train(train, hyper)
        assert model.score("u1", "i1") > model.score("u1", "i2")
        assert model.score("u2", "i2") > model.score("u2", "i1")
        assert pairwise_loss(model, probes) < before
        assert np.isfinite(model.user_factors).all()

    def test_divergence_reports_epoch(self):
        train = build(TOY + [("u1", "i3"), ("u2", "i3"), ("u3", "i1")])
        with pytest.raises(TrainingError) as exc:
            mf_train(train, MFHyper(dim=2, lr=1e200, epochs=3, seed=0))
        assert exc.value.epoch == 1

    def test_bad_hyper(self):
        with pytest.raises(ValueError):
            mf_train(build(TOY), MFHyper(epochs=0))


def test_mf_candidates_match_matrix_product():
    train = build([("a", "x"), ("b", "y"), ("c", "z")])
    P = np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 2.0]])
    Q = np.array([[0.2, 0.1], [0.3, -1.0], [1.0, 1.0]])
    model = MFModel(P, Q, MFHyper(dim=2), ["a", "b", "c"], ["x", "y", "z"])
    lists = {cl.user: cl for cl in mf_candidates(model, train, 3)}
    # hand products: a·y = 0.3, a·z = 1.0; b·x = 0.15, b·z = 1.0; c·x = 0.2, c·y = -2.0
    assert lists["a"].entries == [("z", 1.0), ("y", 0.3)]
    assert lists["b"].entries == [("z", 1.0), ("x", pytest.approx(0.15))]
    assert lists["c"].entries == [("x", 0.2), ("y", -2.0)]
    assert [len(cl) for cl in mf_candidates(model, train, 1)] == [1, 1, 1]


class TestCandidateFile:
    def test_single_row(self, tmp_path):
        p = tmp_path / "c.tsv"
        p.write_text("u1\ti1\t0.9\t1\n")
        (cl,) = load_candidates(p)
        assert cl.entries == [("i1", 0.9)]

    def test_resorted(self, tmp_path):
        p = tmp_path / "c.tsv"
        p.write_text("u\tb\t0.1\t1\nu\ta\t0.7\t2\nu\tc\t0.1\t3\n")
        (cl,) = load_candidates(p)
        assert cl.items == ["a", "b", "c"]

    def test_roundtrip_mostpop(self, tmp_path, rng):
        pairs = sorted({(f"u{rng.integers(25)}", f"i{rng.integers(30)}") for _ in range(200)})
        train = build(pairs)
        lists = mostpop_candidates(train, 8)
        write_candidates(lists, tmp_path / "c.tsv")
        assert load_candidates(tmp_path / "c.tsv", build_catalog(train), train) == lists

    def test_roundtrip_full_precision(self, tmp_path):
        lists = [CandidateList("u", [("a", 0.1 + 0.2), ("b", 1 / 3)])]
        write_candidates(lists, tmp_path / "c.tsv")
        assert load_candidates(tmp_path / "c.tsv") == lists

    def test_unknown_items_listed(self, tmp_path):
        train = build([("u", "a"), ("v", "b")])
        p = tmp_path / "c.tsv"
        p.write_text("v\ta\t1\t1\nu\tghost\t0.5\t1\nu\tspook\t0.4\t2\n")
        with pytest.raises(ValidationError, match="ghost, spook"):
            load_candidates(p, build_catalog(train, 0.5))

    def test_duplicates_rejected(self, tmp_path):
        p = tmp_path / "c.tsv"
        p.write_text("u\ta\t1\t1\nu\ta\t0.5\t2\n")
        with pytest.raises(ValidationError, match="duplicate"):
            load_candidates(p)

    def test_training_leak_rejected(self, tmp_path):
        train = build([("u", "a"), ("v", "b")])
        p = tmp_path / "c.tsv"
        p.write_text("u\ta\t1\t1\n")
        with pytest.raises(ValidationError, match="training"):
            load_candidates(p, train=train)

    def test_non_numeric_score(self, tmp_path):
        p = tmp_path / "c.tsv"
        p.write_text("u\ta\thigh\t1\n")
        with pytest.raises(DataError, match=":1:"):
            load_candidates(p)
