"""Lossless tokenization and lexical augmentation baselines.

Tokenization splits text into word, space and punctuation tokens such that
concatenating the surfaces reproduces the input byte-for-byte. Words are
maximal alphanumeric runs (underscore counts as punctuation); punctuation
tokens are single characters and never eligible for replacement or masking.

All augmenters share one replacement-count law: a ratio r over a sequence
with n eligible positions replaces round-half-up(r * n) of them. Position
sampling draws a single shuffled pass over the eligible positions from the
supplied RNG, then walks it until the target count is reached, so results
are reproducible from (input, ratio, lexicon, seed) alone.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, replace
from random import Random
from typing import Iterable, Sequence

import numpy as np

from .backends import (
    BackendError,
    DecodeConfig,
    InfillBackend,
    InfillRequest,
    TranslateRequest,
    TranslationBackend,
    blank_sentinel,
)

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"(?P<word>[^\W_]+)|(?P<space>\s+)|(?P<punct>.)", re.UNICODE | re.DOTALL)

WORD = "word"
SPACE = "space"
PUNCT = "punct"

# Pivot chains for the two back-translation ensembles.
BT10_CHAIN = ("es", "fr", "de", "af", "ru", "cs", "et", "ht", "bn")
BT6_CHAIN = ("es", "fr", "de", "ru", "ht")


def round_half_up(x: float) -> int:
    """Round a non-negative quantity to the nearest int, ties away from zero.

    The 1e-9 pre-rounding guard absorbs float noise in products like
    0.3 * 15 so exact-half inputs land on the intended side.
    """
    if x < 0:
        raise ValueError("expected a non-negative value")
    return int(math.floor(round(x, 9) + 0.5))


@dataclass(frozen=True)
class Token:
    surface: str
    kind: str

    @property
    def maskable(self) -> bool:
        return self.kind == WORD


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[Token, ...]

    @property
    def text(self) -> str:
        return "".join(t.surface for t in self.tokens)

    def word_positions(self) -> list[int]:
        return [i for i, t in enumerate(self.tokens) if t.kind == WORD]

    def word_count(self) -> int:
        return sum(1 for t in self.tokens if t.kind == WORD)

    def with_surface(self, index: int, surface: str) -> TokenSeq:
        toks = list(self.tokens)
        toks[index] = replace(toks[index], surface=surface)
        return TokenSeq(tuple(toks))


def tokenize(text: str) -> TokenSeq:
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        tokens.append(Token(surface=m.group(0), kind=kind))
    return TokenSeq(tuple(tokens))


def detokenize(seq: TokenSeq) -> str:
    return seq.text


class LexiconIndex:
    """Synonym table, embedding table and stopword list under one roof.

    File formats:
      synonyms    "word<TAB>syn1,syn2,..."
      embeddings  "word v1 v2 ... vD" (space separated floats, fixed D)
      stopwords   one word per line

    Lookups are case-insensitive on the query side; stored surfaces are
    returned as written in the lexicon files.
    """

    def __init__(
        self,
        synonyms: dict[str, tuple[str, ...]] | None = None,
        embeddings: dict[str, np.ndarray] | None = None,
        stopwords: Iterable[str] = (),
    ):
        self.synonyms = {k.lower(): tuple(v) for k, v in (synonyms or {}).items()}
        self.embeddings = {k.lower(): np.asarray(v, dtype=np.float64) for k, v in (embeddings or {}).items()}
        dims = {v.shape for v in self.embeddings.values()}
        if len(dims) > 1:
            raise ValueError(f"inconsistent embedding dimensions: {sorted(dims)}")
        self.stopwords = frozenset(w.lower() for w in stopwords)
        self._neighbor_cache: dict[tuple[str, int], tuple[str, ...]] = {}

    @classmethod
    def load(
        cls,
        synonyms_path: str | None = None,
        embeddings_path: str | None = None,
        stopwords_path: str | None = None,
    ) -> LexiconIndex:
        synonyms: dict[str, tuple[str, ...]] = {}
        if synonyms_path:
            with open(synonyms_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.rstrip("\n")
                    if not line or line.startswith("#"):
                        continue
                    word, _, rest = line.partition("\t")
                    syns = tuple(s for s in (p.strip() for p in rest.split(",")) if s)
                    if syns:
                        synonyms[word] = syns
        embeddings: dict[str, np.ndarray] = {}
        if embeddings_path:
            with open(embeddings_path, encoding="utf-8") as fh:
                for line in fh:
                    parts = line.split()
                    if len(parts) < 2:
                        continue
                    embeddings[parts[0]] = np.array([float(v) for v in parts[1:]])
        stopwords: list[str] = []
        if stopwords_path:
            with open(stopwords_path, encoding="utf-8") as fh:
                stopwords = [line.strip() for line in fh if line.strip()]
        return cls(synonyms=synonyms, embeddings=embeddings, stopwords=stopwords)

    def is_stopword(self, word: str) -> bool:
        return word.lower() in self.stopwords

    def synonyms_for(self, word: str) -> tuple[str, ...]:
        return self.synonyms.get(word.lower(), ())

    def neighbors(self, word: str, k: int) -> tuple[str, ...]:
        """k nearest embedding neighbors by cosine similarity.

        Ties break lexicographically; the query word itself is excluded.
        Words without an embedding have no neighbors.
        """
        key = (word.lower(), k)
        if key in self._neighbor_cache:
            return self._neighbor_cache[key]
        query = self.embeddings.get(word.lower())
        if query is None or k <= 0:
            return ()
        qnorm = float(np.linalg.norm(query))
        if qnorm == 0:
            return ()
        scored = []
        for other, vec in self.embeddings.items():
            if other == word.lower():
                continue
            norm = float(np.linalg.norm(vec))
            if norm == 0:
                continue
            cos = float(np.dot(query, vec)) / (qnorm * norm)
            scored.append((-cos, other))
        scored.sort()
        result = tuple(name for _, name in scored[:k])
        self._neighbor_cache[key] = result
        return result


def _eligible_positions(seq: TokenSeq, lex: LexiconIndex, require_embedding: bool = False) -> list[int]:
    out = []
    for i, tok in enumerate(seq.tokens):
        if tok.kind != WORD or lex.is_stopword(tok.surface):
            continue
        if require_embedding and tok.surface.lower() not in lex.embeddings:
            continue
        out.append(i)
    return out


def _replace_pass(
    seq: TokenSeq,
    positions: list[int],
    n_target: int,
    rng: Random,
    pool_for: "callable",
) -> TokenSeq:
    # Single shuffled pass; positions whose pool is empty are skipped and do
    # not count toward the target.
    if n_target <= 0 or not positions:
        return seq
    order = rng.sample(positions, len(positions))
    tokens = list(seq.tokens)
    done = 0
    for idx in order:
        if done == n_target:
            break
        pool = pool_for(tokens[idx].surface)
        if not pool:
            continue
        choice = pool[rng.randrange(len(pool))]
        tokens[idx] = replace(tokens[idx], surface=choice)
        done += 1
    return TokenSeq(tuple(tokens))


def synonym_replace(seq: TokenSeq, ratio: float, lex: LexiconIndex, rng: Random) -> TokenSeq:
    """Replace round-half-up(ratio * eligible) non-stopword words with synonyms."""
    positions = _eligible_positions(seq, lex)
    n_target = round_half_up(ratio * len(positions))
    return _replace_pass(seq, positions, n_target, rng, lex.synonyms_for)


def knn_replace(seq: TokenSeq, ratio: float, k: int, lex: LexiconIndex, rng: Random) -> TokenSeq:
    """Replace words with a uniform draw from their k nearest embedding neighbors.

    Words without an embedding are not eligible and do not count toward the
    replacement target.
    """
    positions = _eligible_positions(seq, lex, require_embedding=True)
    n_target = round_half_up(ratio * len(positions))
    return _replace_pass(seq, positions, n_target, rng, lambda w: lex.neighbors(w, k))


def _eda_insert(seq: TokenSeq, alpha: float, lex: LexiconIndex, rng: Random) -> TokenSeq:
    n_target = round_half_up(alpha * seq.word_count())
    tokens = list(seq.tokens)
    for _ in range(n_target):
        word_positions = [i for i, t in enumerate(tokens) if t.kind == WORD]
        sources = [i for i in word_positions if not lex.is_stopword(tokens[i].surface) and lex.synonyms_for(tokens[i].surface)]
        if not sources:
            break
        src = sources[rng.randrange(len(sources))]
        pool = lex.synonyms_for(tokens[src].surface)
        word = pool[rng.randrange(len(pool))]
        # Slot n means "before the n-th word"; the last slot appends.
        slot = rng.randrange(len(word_positions) + 1)
        if slot < len(word_positions):
            at = word_positions[slot]
            tokens[at:at] = [Token(word, WORD), Token(" ", SPACE)]
        else:
            tokens.extend([Token(" ", SPACE), Token(word, WORD)])
    return TokenSeq(tuple(tokens))


def _eda_swap(seq: TokenSeq, alpha: float, rng: Random) -> TokenSeq:
    n_target = round_half_up(alpha * seq.word_count())
    tokens = list(seq.tokens)
    word_positions = [i for i, t in enumerate(tokens) if t.kind == WORD]
    if len(word_positions) < 2:
        return seq
    for _ in range(n_target):
        a, b = rng.sample(word_positions, 2)
        tokens[a], tokens[b] = (
            replace(tokens[a], surface=tokens[b].surface),
            replace(tokens[b], surface=tokens[a].surface),
        )
    return TokenSeq(tuple(tokens))


def _eda_delete(seq: TokenSeq, alpha: float, rng: Random) -> TokenSeq:
    word_positions = seq.word_positions()
    n_target = min(round_half_up(alpha * len(word_positions)), len(word_positions))
    if n_target == 0:
        return seq
    victims = sorted(rng.sample(word_positions, n_target), reverse=True)
    tokens = list(seq.tokens)
    for idx in victims:
        # Drop the word plus one adjacent space (following preferred) so the
        # remaining text keeps single spacing and all punctuation.
        del tokens[idx]
        if idx < len(tokens) and tokens[idx].kind == SPACE:
            del tokens[idx]
        elif idx > 0 and tokens[idx - 1].kind == SPACE:
            del tokens[idx - 1]
    return TokenSeq(tuple(tokens))


def eda_augment(
    seq: TokenSeq,
    alpha: float,
    n_aug: int,
    lex: LexiconIndex,
    rng: Random,
    lowercase: bool = False,
) -> list[TokenSeq]:
    """Produce n_aug variants, each from one uniformly chosen edit operation.

    The four operations (synonym replacement, random insertion, random swap,
    random deletion) all run at rate ``alpha``. Punctuation tokens are never
    created, moved or destroyed. With ``lowercase`` the variant's word
    tokens are lowercased first, mirroring the usual preprocessing of this
    recipe; the default keeps the original casing.
    """
    if lowercase:
        seq = TokenSeq(tuple(replace(t, surface=t.surface.lower()) if t.kind == WORD else t for t in seq.tokens))
    variants = []
    for _ in range(n_aug):
        op = rng.randrange(4)
        if op == 0:
            variants.append(synonym_replace(seq, alpha, lex, rng))
        elif op == 1:
            variants.append(_eda_insert(seq, alpha, lex, rng))
        elif op == 2:
            variants.append(_eda_swap(seq, alpha, rng))
        else:
            variants.append(_eda_delete(seq, alpha, rng))
    return variants


def truncate_words(seq: TokenSeq, max_words: int) -> TokenSeq:
    """Keep tokens up to and including the max_words-th word token."""
    if seq.word_count() <= max_words:
        return seq
    kept = []
    seen = 0
    for tok in seq.tokens:
        if tok.kind == WORD:
            if seen == max_words:
                break
            seen += 1
        kept.append(tok)
    while kept and kept[-1].kind == SPACE:
        kept.pop()
    return TokenSeq(tuple(kept))


def mlm_token_replace(
    seq: TokenSeq,
    p: float,
    backend: InfillBackend,
    rng: Random,
    max_tokens: int = 512,
    seed: int = 0,
) -> TokenSeq:
    """Replace each word token with probability p by a masked-LM prediction.

    The sequence is truncated to max_tokens words first. Each selected
    position is queried independently against the original context (one
    single-blank request per position), then all replacements are applied,
    so no fill can influence another. Empty fills leave the token unchanged.
    """
    seq = truncate_words(seq, max_tokens)
    chosen = [i for i in seq.word_positions() if rng.random() < p]
    fills: dict[int, str] = {}
    for idx in chosen:
        masked = "".join(
            blank_sentinel(0) if j == idx else t.surface for j, t in enumerate(seq.tokens)
        )
        req = InfillRequest(text=masked, blank_count=1, decode=DecodeConfig(strategy="greedy", seed=seed))
        fill = backend.infill(req).fills[0].strip()
        if fill:
            fills[idx] = fill
    tokens = list(seq.tokens)
    for idx, fill in fills.items():
        tokens[idx] = replace(tokens[idx], surface=fill)
    return TokenSeq(tuple(tokens))


def back_translate(
    text: str,
    pivots: Sequence[str],
    backend: TranslationBackend,
    src: str = "en",
) -> list[str]:
    """Round-trip the text through each pivot language.

    Returns one output per pivot that completed both hops; failed pivots are
    logged and skipped rather than aborting the whole batch.
    """
    out = []
    for pivot in pivots:
        try:
            mid = backend.translate(TranslateRequest(texts=(text,), src=src, tgt=pivot)).texts[0]
            back = backend.translate(TranslateRequest(texts=(mid,), src=pivot, tgt=src)).texts[0]
        except BackendError as exc:
            log.warning("back-translation via %s failed: %s", pivot, exc)
            continue
        out.append(back)
    return out
