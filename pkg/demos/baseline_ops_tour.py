"""
A tour of the conventional augmentation baselines
=================================================

Runs one sentence through each of the classical text-augmentation ops the
comparison tables evaluate: synonym replacement, embedding-neighbor
replacement, EDA, back-translation (here through a deterministic
dictionary stand-in), and masked-token replacement. Everything is seeded,
so this script prints the same output on every run.
"""

from __future__ import annotations

from pathlib import Path
from random import Random

from flipda.backends import (
    DictionaryTranslationBackend,
    StubInfillBackend,
    load_fill_lexicon,
    load_translation_table,
)
from flipda.lexops import (
    BT6_CHAIN,
    BT10_CHAIN,
    LexiconIndex,
    back_translate,
    eda_augment,
    knn_replace,
    mlm_token_replace,
    synonym_replace,
    tokenize,
)

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"
lexicon = LexiconIndex.load(
    synonyms_path=str(DATA / "synonyms.tsv"),
    embeddings_path=str(DATA / "embeddings.txt"),
    stopwords_path=str(DATA / "stopwords.txt"),
)

TEXT = "The grey cat slept on the warm kitchen mat, all afternoon!"
seq = tokenize(TEXT)
print("input:", TEXT)

# Synonym replacement: swap a ratio of eligible (non-stopword) words for
# dictionary synonyms. Ratio 0 is an identity; ratio counts round half-up.
print("\nsynonym replacement:")
for ratio in (0.0, 0.3, 1.0):
    print(f"  ratio {ratio:<4} ->", synonym_replace(seq, ratio, lexicon, Random(5)).text)

# Embedding-neighbor replacement: like synonyms, but the substitution pool
# is the k nearest words by cosine over the embedding table.
print("\nnearest-neighbor replacement (k=3):")
print("  neighbors of 'cat':", lexicon.neighbors("cat", 3))
print("  ->", knn_replace(tokenize("the cat ate soup in the rain"), 1.0, 3, lexicon, Random(3)).text)

# EDA: each variant applies one random edit family (synonym swap, random
# insert, random swap, random delete). Punctuation never moves.
print("\nEDA (alpha=0.3, 4 variants):")
for variant in eda_augment(seq, 0.3, 4, lexicon, Random(7)):
    print("  ->", variant.text)

# Back-translation: translate out to a pivot language and back; every
# pivot contributes one paraphrase. The two standard chains give 9 and 5
# variants. The dictionary backend is a word-for-word stand-in with the
# same interface as a real translation service.
table = load_translation_table(str(DATA / "translations.tsv"))
translator = DictionaryTranslationBackend(table)
bt_input = "the cat liked the rain and the soup"
print(f"\nback-translation of {bt_input!r}:")
for chain in (BT10_CHAIN, BT6_CHAIN):
    variants = back_translate(bt_input, chain, translator)
    print(f"  {len(chain)}-pivot chain -> {len(variants)} variants; first: {variants[0]!r}")

# Masked-token replacement: each word is independently masked with
# probability p and re-filled by the infilling backend (stubbed here).
infill = StubInfillBackend(load_fill_lexicon(str(DATA / "fill_lexicon.txt")))
print("\nmasked-token replacement:")
for p in (0.0, 0.4):
    print(f"  p={p:<3} ->", mlm_token_replace(tokenize(bt_input), p, infill, Random(1), seed=77).text)
