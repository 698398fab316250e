"""Pluggable model-service clients (infilling, classification, translation).

The wire protocol is HTTP POST with JSON bodies at /infill, /classify and
/translate, so the pipeline stays model-agnostic; deterministic in-process
stubs implement the same interfaces and make the whole pipeline testable
offline. Every response is validated against its schema before use — a
backend can fail with a typed error but never yield a partial result.

Blank sentinels are "[BLANK_i]" with i assigned in left-to-right order;
each sentinel must appear exactly once in a request.
"""

from __future__ import annotations

import json
import math
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import requests

from .hashing import fnv1a_64

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)

DECODE_STRATEGIES = ("greedy", "sample", "beam")


class BackendError(Exception):
    """Base class for backend failures."""


class BackendUnavailableError(BackendError):
    """Transport failure or timeout, after retries were exhausted."""


class ProtocolError(BackendError):
    """A request or response violated the wire protocol schema."""


@dataclass(frozen=True)
class DecodeConfig:
    """Decoding parameters; top_k/beam_size default to the standard values."""

    strategy: str = "greedy"
    top_k: int = 15
    beam_size: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in DECODE_STRATEGIES:
            raise ValueError(f"unknown decode strategy {self.strategy!r}")


@dataclass(frozen=True)
class InfillRequest:
    text: str
    blank_count: int
    decode: DecodeConfig = field(default_factory=DecodeConfig)


@dataclass(frozen=True)
class InfillResponse:
    fills: tuple[str, ...]


@dataclass(frozen=True)
class ClassifyRequest:
    task_id: str
    rendered_inputs: tuple[str, ...]
    labels: tuple[str, ...]


@dataclass(frozen=True)
class ClassifyResponse:
    probs: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class TranslateRequest:
    texts: tuple[str, ...]
    src: str
    tgt: str


@dataclass(frozen=True)
class TranslateResponse:
    texts: tuple[str, ...]


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str
    timeout: float = 10.0
    max_parallel: int = 4
    retries: int = 2

    def __post_init__(self):
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


class InfillBackend(Protocol):
    def infill(self, req: InfillRequest) -> InfillResponse: ...


class ClassifierBackend(Protocol):
    def classify(self, req: ClassifyRequest) -> ClassifyResponse: ...


class TranslationBackend(Protocol):
    def translate(self, req: TranslateRequest) -> TranslateResponse: ...


def blank_sentinel(i: int) -> str:
    return f"[BLANK_{i}]"


def check_infill_request(req: InfillRequest) -> None:
    for i in range(req.blank_count):
        if req.text.count(blank_sentinel(i)) != 1:
            raise ProtocolError(f"sentinel {blank_sentinel(i)} must appear exactly once")


def check_infill_response(req: InfillRequest, fills: Sequence[str]) -> InfillResponse:
    if len(fills) != req.blank_count:
        raise ProtocolError(f"expected {req.blank_count} fills, got {len(fills)}")
    return InfillResponse(fills=tuple(str(f) for f in fills))


def check_classify_response(req: ClassifyRequest, probs: Sequence[Sequence[float]]) -> ClassifyResponse:
    if not req.labels:
        raise ProtocolError("labels must be non-empty")
    if len(probs) != len(req.rendered_inputs):
        raise ProtocolError(f"expected {len(req.rendered_inputs)} vectors, got {len(probs)}")
    out = []
    for vec in probs:
        if len(vec) != len(req.labels):
            raise ProtocolError(f"probability vector has {len(vec)} entries for {len(req.labels)} labels")
        vals = [float(v) for v in vec]
        if any(v < 0 for v in vals):
            raise ProtocolError("negative probability entry")
        total = sum(vals)
        if total <= 0:
            raise ProtocolError("probability vector sums to zero")
        out.append(tuple(v / total for v in vals))
    return ClassifyResponse(probs=tuple(out))


def check_translate_response(req: TranslateRequest, texts: Sequence[str]) -> TranslateResponse:
    if req.src == req.tgt:
        raise ProtocolError("src and tgt languages must differ")
    if len(texts) != len(req.texts):
        raise ProtocolError(f"expected {len(req.texts)} translations, got {len(texts)}")
    return TranslateResponse(texts=tuple(str(t) for t in texts))


class HttpBackend:
    """JSON-over-HTTP client for all three services.

    Retries transport failures with exponential backoff (base 250 ms,
    doubling per attempt, at most ``config.retries`` retries). Backends are
    assumed idempotent. Safe for concurrent use up to ``max_parallel``
    in-flight requests.
    """

    def __init__(self, config: BackendConfig, session: requests.Session | None = None):
        self.config = config
        self._session = session or requests.Session()
        self._slots = threading.Semaphore(config.max_parallel)

    def _post(self, route: str, body: dict) -> dict:
        url = self.config.endpoint.rstrip("/") + route
        last_exc: Exception | None = None
        for attempt in range(self.config.retries + 1):
            if attempt > 0:
                time.sleep(0.25 * (2 ** (attempt - 1)))
            try:
                with self._slots:
                    resp = self._session.post(url, json=body, timeout=self.config.timeout)
                resp.raise_for_status()
                return resp.json()
            except (requests.RequestException, json.JSONDecodeError) as exc:
                last_exc = exc
        raise BackendUnavailableError(f"POST {url} failed after {self.config.retries + 1} attempts: {last_exc}")

    def infill(self, req: InfillRequest) -> InfillResponse:
        check_infill_request(req)
        body = {
            "text_with_sentinels": req.text,
            "blank_count": req.blank_count,
            "decode": {
                "strategy": req.decode.strategy,
                "top_k": req.decode.top_k,
                "beam_size": req.decode.beam_size,
                "seed": req.decode.seed,
            },
        }
        obj = self._post("/infill", body)
        if "fills" not in obj or not isinstance(obj["fills"], list):
            raise ProtocolError("infill response missing 'fills' list")
        return check_infill_response(req, obj["fills"])

    def classify(self, req: ClassifyRequest) -> ClassifyResponse:
        body = {
            "task_id": req.task_id,
            "rendered_inputs": list(req.rendered_inputs),
            "labels": list(req.labels),
        }
        obj = self._post("/classify", body)
        if "probs" not in obj or not isinstance(obj["probs"], list):
            raise ProtocolError("classify response missing 'probs' list")
        return check_classify_response(req, obj["probs"])

    def translate(self, req: TranslateRequest) -> TranslateResponse:
        if req.src == req.tgt:
            raise ProtocolError("src and tgt languages must differ")
        obj = self._post("/translate", {"texts": list(req.texts), "src": req.src, "tgt": req.tgt})
        if "texts" not in obj or not isinstance(obj["texts"], list):
            raise ProtocolError("translate response missing 'texts' list")
        return check_translate_response(req, obj["texts"])


def stub_infill_fill(context: str, blank_index: int, lexicon: Sequence[str], seed: int) -> str:
    """Deterministic fill: lexicon[(fnv1a(context) + blank_index + seed) mod N]."""
    if not lexicon:
        raise ValueError("stub lexicon must be non-empty")
    h = fnv1a_64(context.encode("utf-8"))
    return lexicon[(h + blank_index + seed) % len(lexicon)]


class StubInfillBackend:
    """In-process infilling stub; pure function of (request text, seed, lexicon)."""

    def __init__(self, lexicon: Sequence[str]):
        if not lexicon:
            raise ValueError("stub lexicon must be non-empty")
        self.lexicon = tuple(lexicon)

    def infill(self, req: InfillRequest) -> InfillResponse:
        check_infill_request(req)
        fills = [stub_infill_fill(req.text, i, self.lexicon, req.decode.seed) for i in range(req.blank_count)]
        return check_infill_response(req, fills)


class ScriptedInfillBackend:
    """Infilling stub driven by a caller-supplied function of the request."""

    def __init__(self, script: Callable[[InfillRequest], Sequence[str]]):
        self.script = script

    def infill(self, req: InfillRequest) -> InfillResponse:
        check_infill_request(req)
        return check_infill_response(req, self.script(req))


class KeywordClassifierBackend:
    """Scores each label as the sum of matched keyword weights, then softmax.

    Weights map (lowercased word, label id) -> weight; inputs are matched on
    their lowercase word tokens at temperature 1. An input with no keyword
    hits scores uniformly.
    """

    def __init__(self, weights: dict[tuple[str, str], float]):
        self.weights = dict(weights)

    def classify(self, req: ClassifyRequest) -> ClassifyResponse:
        probs = []
        for text in req.rendered_inputs:
            words = [w.lower() for w in _WORD_RE.findall(text)]
            scores = [sum(self.weights.get((w, label), 0.0) for w in words) for label in req.labels]
            peak = max(scores)
            exps = [math.exp(s - peak) for s in scores]
            total = sum(exps)
            probs.append([e / total for e in exps])
        return check_classify_response(req, probs)


def load_classifier_weights(path: str) -> dict[tuple[str, str], float]:
    """Read a "word<TAB>label<TAB>weight" fixture file."""
    weights: dict[tuple[str, str], float] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            word, label, weight = line.split("\t")
            weights[(word.lower(), label)] = float(weight)
    return weights


def load_fill_lexicon(path: str) -> tuple[str, ...]:
    """Read a one-word-per-line fill lexicon for the infilling stub."""
    with open(path, encoding="utf-8") as fh:
        words = [line.strip() for line in fh if line.strip()]
    return tuple(words)


class IdentityTranslationBackend:
    def translate(self, req: TranslateRequest) -> TranslateResponse:
        return check_translate_response(req, req.texts)


class DictionaryTranslationBackend:
    """Word-substitution translation stub.

    ``mappings`` maps (src, tgt) language pairs to word dictionaries; word
    tokens found in the dictionary are replaced, everything else passes
    through. Unknown language pairs raise BackendError.
    """

    def __init__(self, mappings: dict[tuple[str, str], dict[str, str]]):
        self.mappings = mappings

    def translate(self, req: TranslateRequest) -> TranslateResponse:
        if (req.src, req.tgt) not in self.mappings:
            raise BackendError(f"unsupported language pair {req.src}->{req.tgt}")
        table = self.mappings[(req.src, req.tgt)]
        out = [_WORD_RE.sub(lambda m: table.get(m.group(0), m.group(0)), text) for text in req.texts]
        return check_translate_response(req, out)


def load_translation_table(path: str) -> dict[tuple[str, str], dict[str, str]]:
    """Read a "src<TAB>tgt<TAB>word<TAB>replacement" fixture file."""
    mappings: dict[tuple[str, str], dict[str, str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            src, tgt, word, replacement = line.split("\t")
            mappings.setdefault((src, tgt), {})[word] = replacement
    return mappings
