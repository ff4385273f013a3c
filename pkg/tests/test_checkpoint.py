import numpy as np
import pytest

from morecap.checkpoint import (load_checkpoint, load_sent_model,
                                load_term_model, save_checkpoint,
                                save_sent_model, save_term_model)
from morecap.config import Config
from morecap.optim import Adam
from morecap.sentence_generator import Seq2SeqModel
from morecap.term_generator import MoREModel, train_epoch
from morecap.text import Vocabulary


def rng_state():
    return np.random.default_rng(123).bit_generator.state


class TestRawFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        path = tmp_path / "x.ckpt"
        rng = np.random.default_rng(0)
        tensors = {
            "a.w": rng.standard_normal((3, 4)),
            "b": rng.standard_normal(7),
            "c.scalar": np.array(np.pi),
        }
        save_checkpoint(path, "term", tensors, {"b": False}, Config(),
                        rng_state(), {"epoch": 2})
        ck = load_checkpoint(path)
        assert ck.kind == "term"
        assert set(ck.tensors) == set(tensors)
        for name, arr in tensors.items():
            assert ck.tensors[name].shape == arr.shape
            assert np.array_equal(ck.tensors[name], arr)  # bit exact
        assert ck.trainable["b"] is False
        assert ck.trainable["a.w"] is True
        assert ck.meta["epoch"] == 2
        assert ck.rng_state == rng_state()
        assert ck.config.hidden_size == 512

    def test_config_snapshot_round_trip(self, tmp_path):
        path = tmp_path / "x.ckpt"
        cfg = Config(hidden_size=64, styles=("A", "B"), learning_rate=0.02)
        save_checkpoint(path, "sent", {}, {}, cfg, None, {})
        back = load_checkpoint(path).config
        assert back.hidden_size == 64
        assert back.styles == ("A", "B")
        assert back.learning_rate == 0.02

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOPE!" + b"\x00" * 50)
        with pytest.raises(ValueError, match="bad magic"):
            load_checkpoint(path)

    def test_bad_version_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"MORE1\xff" + b"\x00" * 50)
        with pytest.raises(ValueError, match="version"):
            load_checkpoint(path)


def toy_cfg():
    return Config(feature_dim=6, hidden_size=8, embed_size=5, attn_size=4,
                  expert_count=2, learning_rate=0.01, batch_size=4,
                  embed_dropout=0.0, feature_dropout=0.0, seed=5,
                  term_vocab_size=50, sent_vocab_size=50)


class TestTermModelRoundTrip:
    def test_values_and_moments_restored(self, tmp_path):
        cfg = toy_cfg()
        vocab = Vocabulary.build(iter(["cat_NOUN", "dog_NOUN", "sitting_VERB"]))
        model = MoREModel(vocab, cfg.expert_count, cfg.feature_dim,
                          cfg.hidden_size, cfg.embed_size, cfg.seed)
        opts = [Adam(lr=cfg.learning_rate) for _ in range(2)]
        rng = np.random.default_rng(3)
        data = [(rng.standard_normal(6), ["cat_NOUN", "sitting_VERB"])]
        train_epoch(model, data, opts, rng, batch_size=2)
        model.experts[0].embed.table.trainable = False

        path = tmp_path / "term.ckpt"
        save_term_model(path, model, opts, cfg, rng.bit_generator.state, 1)
        model2, opts2, cfg2, ck = load_term_model(path)

        assert cfg2.expert_count == 2
        assert ck.meta["epoch"] == 1
        assert model2.vocab.tokens == vocab.tokens
        for e1, e2 in zip(model.experts, model2.experts):
            for name, p in e1.params.items():
                assert np.array_equal(p.value, e2.params[name].value)
                assert p.trainable == e2.params[name].trainable
        for o1, o2 in zip(opts, opts2):
            assert o1.t == o2.t
            assert set(o1._m) == set(o2._m)
            for k in o1._m:
                assert np.array_equal(o1._m[k], o2._m[k])
                assert np.array_equal(o1._v[k], o2._v[k])

    def test_kind_mismatch(self, tmp_path):
        path = tmp_path / "x.ckpt"
        save_checkpoint(path, "sent", {}, {}, Config(), None, {})
        with pytest.raises(ValueError, match="term-generator"):
            load_term_model(path)


class TestSentModelRoundTrip:
    def test_values_restored(self, tmp_path):
        cfg = toy_cfg()
        enc = Vocabulary.build(iter(["cat_NOUN"]), extra=["DESCRIPTIVE", "STORY"])
        dec = Vocabulary.build(iter(["a", "cat", "sits"]))
        model = Seq2SeqModel(enc, dec, ["DESCRIPTIVE", "STORY"],
                             cfg.hidden_size, cfg.embed_size, cfg.attn_size,
                             cfg.seed)
        opt = Adam(lr=0.01)
        path = tmp_path / "sent.ckpt"
        save_sent_model(path, model, opt, cfg, rng_state(), 3)
        model2, opt2, cfg2, ck = load_sent_model(path)
        assert ck.meta["epoch"] == 3
        assert model2.enc_vocab.tokens == enc.tokens
        assert model2.dec_vocab.tokens == dec.tokens
        assert model2.styles == ["DESCRIPTIVE", "STORY"]
        for name, p in model.params.items():
            assert np.array_equal(p.value, model2.params[name].value)

    def test_decode_identical_after_reload(self, tmp_path):
        cfg = toy_cfg()
        enc = Vocabulary.build(iter(["cat_NOUN", "dog_NOUN"]),
                               extra=["DESCRIPTIVE", "STORY"])
        dec = Vocabulary.build(iter(["a", "cat", "dog", "sits"]))
        model = Seq2SeqModel(enc, dec, ["DESCRIPTIVE", "STORY"],
                             cfg.hidden_size, cfg.embed_size, cfg.attn_size,
                             seed=9)
        path = tmp_path / "sent.ckpt"
        save_sent_model(path, model, None, cfg, None, 0)
        model2, _, _, _ = load_sent_model(path)
        terms = ["cat_NOUN", "dog_NOUN"]
        assert model.decode(terms, "STORY") == model2.decode(terms, "STORY")
