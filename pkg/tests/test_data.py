import json

import numpy as np
import pytest

from morecap.data import (DatasetRecord, load_dataset, load_embeddings,
                          load_style_corpus, write_dataset)
from morecap.text import Vocabulary


def write_lines(path, lines):
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


def record_line(id="r1", features=(0.0, 1.0, 2.0, 3.0), captions=("a cat",),
                **kw):
    obj = {"id": id, "features": list(features), "captions": list(captions)}
    obj.update(kw)
    return json.dumps(obj)


class TestLoadDataset:
    def test_empty_file_warns(self, tmp_path, caplog):
        p = tmp_path / "d.jsonl"
        p.write_text("")
        with caplog.at_level("WARNING"):
            assert load_dataset(p, 4) == []
        assert "empty" in caplog.text

    def test_one_valid_line(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, [record_line()])
        recs = load_dataset(p, 4)
        assert len(recs) == 1
        assert recs[0].id == "r1"
        assert np.array_equal(recs[0].features, [0.0, 1.0, 2.0, 3.0])
        assert recs[0].terms is None

    def test_wrong_feature_length_names_line(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, [record_line(features=(1.0, 2.0, 3.0))])
        with pytest.raises(ValueError, match="line 1"):
            load_dataset(p, 4)

    def test_missing_captions_rejected(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, [record_line(captions=())])
        with pytest.raises(ValueError, match="no captions"):
            load_dataset(p, 4)

    def test_all_errors_reported(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, [record_line(), "not json", record_line(features=(1.0,))])
        with pytest.raises(ValueError, match="2 malformed") as exc:
            load_dataset(p, 4)
        assert "line 2" in str(exc.value) and "line 3" in str(exc.value)

    def test_terms_and_style_round_trip(self, tmp_path):
        p = tmp_path / "d.jsonl"
        rec = DatasetRecord(id="x", features=np.arange(4.0),
                            captions=["a dog"], terms=["dog_NOUN"],
                            style="STORY")
        write_dataset(p, [rec])
        back = load_dataset(p, 4)[0]
        assert back.terms == ["dog_NOUN"]
        assert back.style == "STORY"
        assert np.array_equal(back.features, rec.features)


def test_load_style_corpus(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("a cat sat\n\n  a dog ran \n")
    assert load_style_corpus(p) == ["a cat sat", "a dog ran"]


class TestLoadEmbeddings:
    def vocab(self, words):
        return Vocabulary.build(iter(words))

    def test_full_overlap(self, tmp_path):
        p = tmp_path / "e.txt"
        p.write_text("cat 1.0 2.0\ndog 3.5 -1.25\n")
        v = self.vocab(["cat", "dog"])
        table, coverage, matched = load_embeddings(p, v, np.random.default_rng(0))
        assert table.shape == (len(v), 2)
        assert matched[v.index["cat"]] and matched[v.index["dog"]]
        # matched rows are bit-equal to the file values
        assert np.array_equal(table[v.index["cat"]], [1.0, 2.0])
        assert np.array_equal(table[v.index["dog"]], [3.5, -1.25])
        assert coverage == pytest.approx(2.0 / len(v))

    def test_no_overlap_random_init(self, tmp_path):
        p = tmp_path / "e.txt"
        p.write_text("zebra 1.0 2.0\n")
        v = self.vocab(["cat"])
        table, coverage, matched = load_embeddings(p, v, np.random.default_rng(0))
        assert coverage == 0.0
        assert not matched.any()
        assert np.all(np.isfinite(table))

    def test_half_overlap(self, tmp_path):
        p = tmp_path / "e.txt"
        p.write_text("cat 1.0 2.0\nzebra 0.0 0.0\n")
        v = Vocabulary(["<bos>", "<eos>", "<unk>", "cat", "dog"])
        _, coverage, matched = load_embeddings(p, v, np.random.default_rng(0))
        assert matched.sum() == 1
        assert coverage == pytest.approx(1.0 / 5.0)

    def test_inconsistent_dims_rejected(self, tmp_path):
        p = tmp_path / "e.txt"
        p.write_text("cat 1.0 2.0\ndog 1.0\n")
        with pytest.raises(ValueError, match="line 2"):
            load_embeddings(p, self.vocab(["cat"]), np.random.default_rng(0))

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "e.txt"
        p.write_text("")
        with pytest.raises(ValueError, match="no embedding vectors"):
            load_embeddings(p, self.vocab(["cat"]), np.random.default_rng(0))
