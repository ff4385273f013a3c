import pytest

from morecap.text import (BOS, EOS, UNK, Vocabulary, extract_terms, tokenize)


class TestTokenize:
    def test_lowercase_and_split(self):
        assert tokenize("A Girl Standing") == ["a", "girl", "standing"]

    def test_punctuation_becomes_tokens(self):
        assert tokenize("Hello, world!") == ["hello", ",", "world", "!"]

    def test_mixed(self):
        assert tokenize("the dog's ball.") == ["the", "dog", "'", "s", "ball", "."]


class TestExtractTerms:
    def test_kitchen_example(self):
        tokens = tokenize("a girl standing in a kitchen beside a refrigerator")
        assert extract_terms(tokens, stoplist={"a", "in", "beside"}) == [
            "girl_NOUN", "standing_VERB", "kitchen_NOUN", "refrigerator_NOUN"]

    def test_stopword_only_caption_is_empty(self):
        assert extract_terms(["a", "the", "of"]) == []

    def test_lemma_table_applied(self):
        out = extract_terms(["dogs"], lemma_table={"dogs": "dog"})
        assert out == ["dog_NOUN"]

    def test_known_verb_tagged(self):
        assert extract_terms(["cat", "sits"]) == ["cat_NOUN", "sits_VERB"]

    def test_ed_suffix_tagged_verb(self):
        assert extract_terms(["parked", "car"]) == ["parked_VERB", "car_NOUN"]

    def test_cap_at_max_len(self):
        tokens = [f"word{i}" for i in range(30)]
        assert len(extract_terms(tokens, max_len=20)) == 20

    def test_empty_caption_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            extract_terms([])

    def test_punctuation_dropped(self):
        assert extract_terms([",", "cat", "!"]) == ["cat_NOUN"]


class TestVocabulary:
    def test_reserved_occupies_front(self):
        v = Vocabulary.build(["b", "a", "b"])
        assert v.tokens[:3] == [BOS, EOS, UNK]
        assert v.bos == 0 and v.eos == 1 and v.unk == 2

    def test_frequency_then_alpha_order(self):
        v = Vocabulary.build(["b", "a", "b", "c", "a", "b"])
        assert v.tokens[3:] == ["b", "a", "c"]

    def test_max_size_cap(self):
        v = Vocabulary.build([f"w{i}" for i in range(100)], max_size=10)
        assert len(v) == 10

    def test_extra_tokens_precede_corpus(self):
        v = Vocabulary.build(["x"], extra=["STORY", "DESCRIPTIVE"])
        assert v.tokens[3:5] == ["STORY", "DESCRIPTIVE"]

    def test_bijective_map(self):
        v = Vocabulary.build(["a", "b", "c"])
        for i, t in enumerate(v.tokens):
            assert v.index[t] == i

    def test_encode_unknown_to_unk(self):
        v = Vocabulary.build(["a"])
        assert v.encode(["a", "zzz"]) == [3, v.unk]

    def test_decode_round_trip(self):
        v = Vocabulary.build(["a", "b"])
        assert v.decode(v.encode(["b", "a"])) == ["b", "a"]

    def test_duplicate_reserved_rejected(self):
        with pytest.raises(ValueError, match="exactly once"):
            Vocabulary([BOS, EOS, UNK, BOS])

    def test_duplicate_token_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            Vocabulary([BOS, EOS, UNK, "a", "a"])
