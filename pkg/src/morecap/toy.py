"""Synthetic desk-scale dataset: seeded Gaussian features per concept bag,
templated descriptive captions, and a story corpus with disjoint marker
words so style separation is verifiable."""

from __future__ import annotations

import numpy as np

from .data import DatasetRecord

NOUNS = ["cat", "dog", "girl", "boy", "kitchen", "park", "ball", "tree",
         "car", "bird", "house", "river", "table", "chair", "apple",
         "street", "beach", "garden", "book", "horse"]
VERBS = ["standing", "running", "sitting", "playing", "eating", "walking",
         "sleeping", "jumping", "reading", "holding"]

# Story sentences use these exclusively; descriptive sentences never do.
STORY_MARKERS = ["lo", "verily", "yonder", "whilst", "behold", "alas"]

DESCRIPTIVE_TEMPLATES = [
    "a {n1} {v} near a {n2}",
    "the {n1} is {v} close to the {n2}",
    "a {n1} {v} next to the {n2}",
    "there is a {n1} {v} beside a {n2}",
]
STORY_TEMPLATES = [
    "lo the {n1} was {v} whilst yonder {n2} waited",
    "verily a {n1} went {v} and behold the {n2}",
    "behold the {n1} {v} near yonder {n2} alas",
    "lo and behold a {n1} {v} whilst the {n2} slept",
]


def make_toy_data(n_records: int, feature_dim: int, seed: int
                  ) -> tuple[list[DatasetRecord], dict[str, list[str]]]:
    """Build records plus per-style sentence corpora.

    Each record draws a (noun, verb, noun) concept triple; its feature is
    the mean of the concepts' Gaussian prototypes plus small noise, its two
    reference captions come from descriptive templates, and its terms are
    the tagged concepts. The corpora hold one descriptive and one story
    sentence per record.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xDA7A]))
    prototypes = {w: rng.normal(size=feature_dim)
                  for w in NOUNS + VERBS}
    records = []
    corpora: dict[str, list[str]] = {"DESCRIPTIVE": [], "STORY": []}
    for i in range(n_records):
        n1, n2 = rng.choice(len(NOUNS), size=2, replace=False)
        n1, n2 = NOUNS[n1], NOUNS[n2]
        v = VERBS[rng.integers(len(VERBS))]
        feature = (prototypes[n1] + prototypes[n2] + prototypes[v]) / 3.0
        feature += 0.05 * rng.normal(size=feature_dim)
        caps = []
        for t in rng.choice(len(DESCRIPTIVE_TEMPLATES), size=2, replace=False):
            caps.append(DESCRIPTIVE_TEMPLATES[t].format(n1=n1, v=v, n2=n2))
        story = STORY_TEMPLATES[rng.integers(len(STORY_TEMPLATES))].format(
            n1=n1, v=v, n2=n2)
        records.append(DatasetRecord(
            id=f"toy{i:04d}",
            features=feature,
            captions=caps,
            terms=[f"{n1}_NOUN", f"{v}_VERB", f"{n2}_NOUN"],
            style="DESCRIPTIVE",
        ))
        corpora["DESCRIPTIVE"].append(caps[0])
        corpora["STORY"].append(story)
    return records, corpora
