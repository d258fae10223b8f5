"""Decoder tests: tokenizer, trie, baseline model, beam search, replay.

The beam search is checked against exhaustive posterior ranking, and
the next-symbol marginals against a brute-force prefix-mass recount.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from pathlib import Path

import pytest

from conftest import assert_same_ranking, exhaustive_ranking, make_random_corpus
from geocells import labelcodec
from geocells.cellgeo import LatLon
from geocells.dataset import LabeledRecord
from geocells.decode import (
    DEFAULT_ALPHA,
    EOS,
    BaselineModel,
    DecodeError,
    LabelTrie,
    Prediction,
    ReplayScorer,
    beam_search,
    hash_text,
    import_external_scores,
    load_baseline,
    load_scorer,
    read_predictions,
    save_baseline,
    tokenize,
    train_baseline,
    trie_for,
    write_predictions,
)
from geocells.partition import PartitionParams, build_partition

REPLAY_FIXTURE = Path(__file__).parent / "data" / "replay_scores.jsonl"
REPLAY_TEXT = "pin to face three"


def _labeled(rows):
    return [LabeledRecord(rid, 0.0, 0.0, text, label) for rid, text, label in rows]


@pytest.fixture()
def tiny_model(empty_partition):
    records = _labeled([("a", "x x", "2"), ("b", "y", "4")])
    return train_baseline(records, empty_partition, alpha=1.0)


class TestTokenize:
    def test_lowercase_and_split(self):
        assert tokenize("Hello  WORLD") == ["hello", "world"]

    def test_edge_punctuation_stripped(self):
        assert tokenize("(Paris), 'quoted'...") == ["paris", "quoted"]

    def test_inner_punctuation_kept(self):
        assert tokenize("it's o'clock") == ["it's", "o'clock"]

    def test_pure_punctuation_dropped(self):
        assert tokenize("... --- !!!") == []

    def test_empty(self):
        assert tokenize("") == []
        assert tokenize("   ") == []

    def test_unicode(self):
        assert tokenize("Café «Münchner» 渋谷") == ["café", "münchner", "渋谷"]


class TestHashText:
    def test_matches_sha256(self):
        assert hash_text("abc") == hashlib.sha256(b"abc").hexdigest()

    def test_utf8(self):
        assert hash_text("渋谷") == hashlib.sha256("渋谷".encode()).hexdigest()


class TestLabelTrie:
    def test_children_and_leaves(self):
        trie = LabelTrie(["20", "21", "22", "23", "3"])
        assert trie.children("") == "23"
        assert trie.children("2") == "0123"
        assert trie.children("20") == ""
        assert trie.is_leaf("20")
        assert not trie.is_leaf("2")
        assert len(trie) == 5

    def test_invalid_label_rejected(self):
        with pytest.raises(labelcodec.InvalidLabel):
            LabelTrie(["7"])

    def test_trie_for_caches_per_partition(self, cluster_partition):
        assert trie_for(cluster_partition) is trie_for(cluster_partition)
        assert len(trie_for(cluster_partition)) == cluster_partition.leaf_count()


class TestBaselineModel:
    def test_hand_worked_posterior(self, tiny_model):
        post = tiny_model.posterior("x")
        assert post["2"] == pytest.approx(9 / 13, rel=1e-12)
        assert post["4"] == pytest.approx(4 / 13, rel=1e-12)
        for label in ("0", "1", "3", "5"):
            assert post[label] == 0.0

    def test_hand_worked_next_symbols(self, tiny_model):
        scores = tiny_model.score_next("x", "")
        assert scores["2"] == pytest.approx(9 / 13, rel=1e-12)
        assert scores["4"] == pytest.approx(4 / 13, rel=1e-12)
        assert scores["0"] == 0.0
        assert tiny_model.score_next("x", "2") == {EOS: 1.0}

    def test_zero_mass_prefix_falls_back_to_uniform(self, tiny_model):
        assert tiny_model.score_next("x", "0") == {EOS: 1.0}

    def test_posterior_sums_to_one(self, cluster_model):
        for text in ("eiffel paris", "opera harbour", "nothing known", ""):
            post = cluster_model.posterior(text)
            assert sum(post.values()) == pytest.approx(1.0, abs=1e-9)
            assert all(p >= 0.0 for p in post.values())

    def test_empty_text_uses_prior_only(self, tiny_model):
        post = tiny_model.posterior("")
        assert post["2"] == pytest.approx(0.5)
        assert post["4"] == pytest.approx(0.5)

    def test_unseen_tokens_still_rank_by_evidence(self, tiny_model):
        # "x" seen twice in leaf 2, so even mixed with noise it should win.
        post = tiny_model.posterior("x unseen")
        assert post["2"] > post["4"]

    def test_repeated_queries_are_stable(self, cluster_model):
        a = cluster_model.posterior("eiffel")
        b = cluster_model.posterior("eiffel")
        assert a == b

    def test_invalid_prefix_rejected(self, tiny_model):
        with pytest.raises(labelcodec.InvalidLabel):
            tiny_model.score_next("x", "9")

    def test_marginals_match_brute_force(self, cluster_model, cluster_partition):
        rng = random.Random(2)
        labels = cluster_partition.leaf_labels()
        prefixes = {""}
        for label in rng.sample(labels, 12):
            prefixes.update(label[:k] for k in range(1, len(label) + 1))
        for text in ("eiffel paris", "brooklyn", "rail shibuya", "mystery"):
            post = cluster_model.posterior(text)
            for prefix in prefixes:
                got = cluster_model.score_next(text, prefix)
                total = sum(p for lbl, p in post.items() if lbl.startswith(prefix))
                expect = {}
                if prefix in post:
                    expect[EOS] = post[prefix]
                digits = labelcodec.FACE_DIGITS if not prefix else labelcodec.CHILD_DIGITS
                for digit in digits:
                    if any(lbl.startswith(prefix + digit) for lbl in post):
                        expect[digit] = sum(
                            p for lbl, p in post.items() if lbl.startswith(prefix + digit)
                        )
                if expect and total > 0.0:
                    expect = {s: m / total for s, m in expect.items()}
                elif expect:
                    expect = {s: 1.0 / len(expect) for s in expect}
                assert set(got) == set(expect)
                for sym in expect:
                    assert got[sym] == pytest.approx(expect[sym], abs=1e-12)

    def test_conditionals_sum_to_one_on_positive_prefixes(self, cluster_model):
        for prefix in ("", "2", "23"):
            scores = cluster_model.score_next("eiffel paris", prefix)
            assert sum(scores.values()) == pytest.approx(1.0, abs=1e-12)


class TestTrainValidation:
    def test_rejects_non_leaf_label(self, empty_partition):
        records = _labeled([("bad-rec", "text", "20")])
        with pytest.raises(DecodeError, match="bad-rec"):
            train_baseline(records, empty_partition)

    def test_rejects_empty_input(self, empty_partition):
        with pytest.raises(DecodeError, match="no training records"):
            train_baseline([], empty_partition)

    def test_rejects_bad_alpha(self, empty_partition):
        records = _labeled([("a", "x", "2")])
        for alpha in (0.0, -1.0, float("nan"), float("inf")):
            with pytest.raises((DecodeError, ValueError)):
                train_baseline(records, empty_partition, alpha=alpha)


class TestModelIO:
    def test_round_trip(self, tmp_path, cluster_model, cluster_partition):
        path = tmp_path / "model.json"
        save_baseline(cluster_model, path)
        loaded = load_baseline(path, cluster_partition)
        for text in ("eiffel paris", "opera", ""):
            assert loaded.posterior(text) == pytest.approx(cluster_model.posterior(text))
        assert loaded.alpha == cluster_model.alpha
        assert loaded.vocabulary == cluster_model.vocabulary

    def test_file_is_deterministic(self, tmp_path, tiny_model):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_baseline(tiny_model, a)
        save_baseline(tiny_model, b)
        assert a.read_bytes() == b.read_bytes()

    def test_refuses_wrong_partition(self, tmp_path, tiny_model, cluster_partition):
        path = tmp_path / "model.json"
        save_baseline(tiny_model, path)
        with pytest.raises(DecodeError, match="checksum"):
            load_baseline(path, cluster_partition)

    def test_refuses_wrong_format_tag(self, tmp_path, tiny_model, empty_partition):
        path = tmp_path / "model.json"
        save_baseline(tiny_model, path)
        doc = json.loads(path.read_text())
        doc["format"] = "something-else"
        path.write_text(json.dumps(doc))
        with pytest.raises(DecodeError, match="format"):
            load_baseline(path, empty_partition)

    def test_refuses_tampered_vocabulary(self, tmp_path, tiny_model, empty_partition):
        path = tmp_path / "model.json"
        save_baseline(tiny_model, path)
        doc = json.loads(path.read_text())
        doc["vocabulary"] = doc["vocabulary"] + ["zzz"]
        path.write_text(json.dumps(doc))
        with pytest.raises(DecodeError, match="vocabulary"):
            load_baseline(path, empty_partition)

    def test_refuses_non_json(self, tmp_path, empty_partition):
        path = tmp_path / "model.json"
        path.write_text("not json")
        with pytest.raises(DecodeError, match="JSON"):
            load_baseline(path, empty_partition)

    def test_load_scorer_sniffs_baseline(self, tmp_path, tiny_model, empty_partition):
        path = tmp_path / "model.json"
        save_baseline(tiny_model, path)
        scorer, kind = load_scorer(path, empty_partition)
        assert kind == "baseline"
        assert isinstance(scorer, BaselineModel)

    def test_load_scorer_sniffs_replay(self, empty_partition):
        scorer, kind = load_scorer(REPLAY_FIXTURE, empty_partition)
        assert kind == "replay"
        assert isinstance(scorer, ReplayScorer)

    def test_load_scorer_rejects_unknown(self, tmp_path, empty_partition):
        path = tmp_path / "what.json"
        path.write_text('{"neither": true}\n')
        with pytest.raises(DecodeError, match="kind"):
            load_scorer(path, empty_partition)


class TestBeamSearch:
    def test_matches_exhaustive_ranking_on_random_corpora(self):
        for seed in range(15):
            model, partition, queries = make_random_corpus(seed)
            trie = trie_for(partition)
            width = partition.leaf_count()
            for text in queries:
                got = beam_search(model, text, trie, beam_width=width, top_k=width)
                expect = exhaustive_ranking(model, text)
                assert_same_ranking(got, expect)

    def test_narrow_beam_still_finds_peaked_posterior(self, cluster_model, cluster_partition):
        trie = trie_for(cluster_partition)
        got = beam_search(cluster_model, "tour eiffel seine paris", trie, beam_width=4, top_k=1)
        expect = exhaustive_ranking(cluster_model, "tour eiffel seine paris")[0]
        assert got[0].label == expect[0]

    def test_top_k_truncates(self, cluster_model, cluster_partition):
        trie = trie_for(cluster_partition)
        ranked = beam_search(cluster_model, "eiffel", trie, beam_width=64, top_k=3)
        assert len(ranked) == 3
        assert ranked[0].probability >= ranked[1].probability >= ranked[2].probability

    def test_ties_break_by_label(self, empty_partition):
        table = {(hash_text("tied"), ""): {d: 1.0 / 6.0 for d in "012345"}}
        for face in "012345":
            table[(hash_text("tied"), face)] = {EOS: 1.0}
        got = beam_search(ReplayScorer(table), "tied", trie_for(empty_partition), beam_width=6, top_k=6)
        assert [p.label for p in got] == list("012345")

    def test_parameter_validation(self, tiny_model, empty_partition):
        trie = trie_for(empty_partition)
        with pytest.raises(DecodeError):
            beam_search(tiny_model, "x", trie, beam_width=0)
        with pytest.raises(DecodeError):
            beam_search(tiny_model, "x", trie, beam_width="4")
        with pytest.raises(DecodeError):
            beam_search(tiny_model, "x", trie, top_k=0)

    def test_rejects_invalid_scorer_output(self, empty_partition):
        class BadScorer:
            def score_next(self, text, prefix):
                return {"0": -0.5}

        with pytest.raises(DecodeError, match="invalid probability"):
            beam_search(BadScorer(), "x", trie_for(empty_partition))

    def test_rejects_nan_scorer_output(self, empty_partition):
        class NanScorer:
            def score_next(self, text, prefix):
                return {"0": float("nan")}

        with pytest.raises(DecodeError):
            beam_search(NanScorer(), "x", trie_for(empty_partition))


class TestReplay:
    def test_fixture_forces_face_three(self, empty_partition):
        scorer, _ = load_scorer(REPLAY_FIXTURE, empty_partition)
        got = beam_search(scorer, REPLAY_TEXT, trie_for(empty_partition))
        assert got == [Prediction("3", 1.0)]
        assert scorer.misses == 0

    def test_miss_counter(self, empty_partition):
        scorer, _ = load_scorer(REPLAY_FIXTURE, empty_partition)
        got = beam_search(scorer, "text nobody recorded", trie_for(empty_partition))
        assert got == []
        assert scorer.misses == 1

    def test_import_validates_rows(self, tmp_path):
        cases = [
            ('{"prefix": "", "scores": {}}', "text_hash"),
            ('{"text_hash": "h", "scores": {}}', "prefix"),
            ('{"text_hash": "h", "prefix": ""}', "scores"),
            ('{"text_hash": "h", "prefix": "9", "scores": {}}', "invalid prefix"),
            ('{"text_hash": "h", "prefix": "", "scores": {"z": 1.0}}', "invalid symbol"),
            ('{"text_hash": "h", "prefix": "", "scores": {"0": -1}}', "non-negative"),
            ("{broken", "invalid JSON"),
            ("[1, 2]", "expected an object"),
        ]
        for i, (line, match) in enumerate(cases):
            path = tmp_path / f"bad{i}.jsonl"
            path.write_text(line + "\n")
            with pytest.raises(DecodeError, match=match):
                import_external_scores(path)

    def test_import_rejects_duplicates(self, tmp_path):
        row = '{"text_hash": "h", "prefix": "", "scores": {"0": 1.0}}'
        path = tmp_path / "dup.jsonl"
        path.write_text(row + "\n" + row + "\n")
        with pytest.raises(DecodeError, match="duplicate"):
            import_external_scores(path)

    def test_import_reports_line_numbers(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"text_hash": "h", "prefix": "", "scores": {"0": 1.0}}\n{nope\n')
        with pytest.raises(DecodeError, match=":2"):
            import_external_scores(path)


class TestPredictionIO:
    def test_round_trip(self, tmp_path):
        rows = [
            ("a", [Prediction("23", 0.75), Prediction("21", 0.25)]),
            ("b", []),
        ]
        path = tmp_path / "preds.jsonl"
        write_predictions(path, rows)
        back = read_predictions(path)
        assert back == {"a": rows[0][1], "b": []}

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        row = json.dumps({"id": "a", "predictions": []})
        path.write_text(row + "\n" + row + "\n")
        with pytest.raises(DecodeError, match="duplicate"):
            read_predictions(path)

    def test_malformed_entry_rejected(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text(json.dumps({"id": "a", "predictions": [{"label": 5}]}) + "\n")
        with pytest.raises(DecodeError, match="malformed"):
            read_predictions(path)
