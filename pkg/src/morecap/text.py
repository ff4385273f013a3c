"""Tokenization, vocabularies, and semantic-term extraction."""

from __future__ import annotations

import re

BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"
RESERVED = (BOS, EOS, UNK)

_PUNCT = re.compile(r"([^\w\s])")

# Function words dropped during term extraction. Deliberately small; callers
# may pass their own list.
DEFAULT_STOPLIST = frozenset("""
a an the in on at of to with by for from into onto near beside under over
is are was were be been being and or but as that this these those it its
there here he she they them his her their i you we us my your our me
""".split())

# Words tagged VERB even without an -ing/-ed suffix.
DEFAULT_VERB_LIST = frozenset("""
run runs sit sits stand stands walk walks eat eats play plays sleep sleeps
jump jumps read reads ride rides hold holds look looks watch watches wear
wears fly flies swim swims drive drives throw throws catch catches
""".split())


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace, punctuation split off as tokens."""
    return _PUNCT.sub(r" \1 ", text.lower()).split()


def extract_terms(tokens: list[str], stoplist=DEFAULT_STOPLIST,
                  lemma_table: dict[str, str] | None = None,
                  verb_list=DEFAULT_VERB_LIST, max_len: int = 20) -> list[str]:
    """Turn caption tokens into ordered part-of-speech-tagged terms.

    Lowercases, drops stoplist tokens, maps through the optional lemma
    table, then tags by suffix heuristics: -ing/-ed endings and known verbs
    become VERB, everything else NOUN. Order is preserved; output is capped
    at max_len. An all-stopword caption yields an empty list.
    """
    if not tokens:
        raise ValueError("cannot extract terms from an empty caption")
    out = []
    for tok in tokens:
        tok = tok.lower()
        if tok in stoplist or not any(c.isalnum() for c in tok):
            continue
        if lemma_table:
            tok = lemma_table.get(tok, tok)
        if tok in verb_list or tok.endswith("ing") or tok.endswith("ed"):
            tag = "VERB"
        else:
            tag = "NOUN"
        out.append(f"{tok}_{tag}")
        if len(out) == max_len:
            break
    return out


class Vocabulary:
    """Ordered token list with a bijective token -> index map.

    The reserved tokens <bos>, <eos>, <unk> occupy the first three indices.
    """

    def __init__(self, tokens: list[str]):
        for r in RESERVED:
            if tokens.count(r) != 1:
                raise ValueError(f"reserved token {r} must appear exactly once")
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            dupes = sorted({t for t in self.tokens if self.tokens.count(t) > 1})
            raise ValueError(f"duplicate tokens in vocabulary: {dupes}")
        self.bos = self.index[BOS]
        self.eos = self.index[EOS]
        self.unk = self.index[UNK]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @classmethod
    def build(cls, token_iter, max_size: int | None = None,
              extra: list[str] | None = None) -> "Vocabulary":
        """Frequency-ranked vocabulary from an iterable of tokens.

        max_size bounds the total size including reserved and extra tokens.
        Ties are broken alphabetically for determinism.
        """
        counts: dict[str, int] = {}
        for tok in token_iter:
            counts[tok] = counts.get(tok, 0) + 1
        for r in RESERVED:
            counts.pop(r, None)
        head = list(RESERVED) + [t for t in (extra or []) if t not in RESERVED]
        ranked = sorted(counts, key=lambda t: (-counts[t], t))
        ranked = [t for t in ranked if t not in head]
        if max_size is not None:
            ranked = ranked[:max(0, max_size - len(head))]
        return cls(head + ranked)

    def encode(self, tokens: list[str]) -> list[int]:
        """Map tokens to indices, unknown words to <unk>."""
        return [self.index.get(t, self.unk) for t in tokens]

    def decode(self, ids) -> list[str]:
        return [self.tokens[int(i)] for i in ids]
