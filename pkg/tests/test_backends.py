import json

import pytest
import requests

from oracles import oracle_fnv1a_64, oracle_keyword_probs, oracle_stub_fill
from flipda.backends import (
    BackendConfig,
    BackendError,
    BackendUnavailableError,
    ClassifyRequest,
    DecodeConfig,
    DictionaryTranslationBackend,
    HttpBackend,
    IdentityTranslationBackend,
    InfillRequest,
    KeywordClassifierBackend,
    ProtocolError,
    ScriptedInfillBackend,
    StubInfillBackend,
    TranslateRequest,
    blank_sentinel,
    check_classify_response,
    load_classifier_weights,
    load_fill_lexicon,
    load_translation_table,
    stub_infill_fill,
)
from flipda.hashing import fnv1a_64


def test_fnv1a_matches_oracle():
    for data in (b"", b"a", b"hello world", "café".encode("utf-8"), b"\x00\xff"):
        assert fnv1a_64(data) == oracle_fnv1a_64(data)


def test_fnv1a_known_vectors():
    # Published FNV-1a 64-bit test vectors.
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_stub_fill_matches_oracle():
    lexicon = ("alpha", "bravo", "charlie", "delta", "echo")
    for ctx in ("The [BLANK_0] sat", "x", ""):
        for blank in (0, 1, 7):
            for seed in (0, 1, 12345):
                assert stub_infill_fill(ctx, blank, lexicon, seed) == oracle_stub_fill(ctx, blank, lexicon, seed)


def test_stub_fill_cycles_with_lexicon_period():
    lexicon = ("a", "b", "c", "d", "e")
    fills = [stub_infill_fill("context", i, lexicon, 0) for i in range(10)]
    assert fills[:5] == fills[5:]
    assert len(set(fills[:5])) == 5


def test_stub_fill_singleton_lexicon():
    assert stub_infill_fill("anything at all", 3, ("only",), 99) == "only"


def test_stub_infill_backend_end_to_end():
    backend = StubInfillBackend(("alpha", "bravo", "charlie"))
    req = InfillRequest(text="The [BLANK_0] sat on the [BLANK_1].", blank_count=2)
    resp = backend.infill(req)
    assert resp.fills == tuple(
        oracle_stub_fill(req.text, i, ("alpha", "bravo", "charlie"), 0) for i in range(2)
    )


def test_infill_zero_blanks():
    backend = StubInfillBackend(("alpha",))
    assert backend.infill(InfillRequest(text="no blanks here", blank_count=0)).fills == ()


def test_infill_rejects_missing_sentinel():
    backend = StubInfillBackend(("alpha",))
    with pytest.raises(ProtocolError):
        backend.infill(InfillRequest(text="no sentinel", blank_count=1))


def test_infill_rejects_duplicate_sentinel():
    backend = StubInfillBackend(("alpha",))
    with pytest.raises(ProtocolError):
        backend.infill(InfillRequest(text="[BLANK_0] and [BLANK_0]", blank_count=1))


def test_scripted_backend_checks_fill_count():
    backend = ScriptedInfillBackend(lambda req: ["one"])
    with pytest.raises(ProtocolError):
        backend.infill(InfillRequest(text="[BLANK_0] [BLANK_1]", blank_count=2))


def test_decode_config_rejects_unknown_strategy():
    with pytest.raises(ValueError):
        DecodeConfig(strategy="nucleus")


def test_blank_sentinel_format():
    assert blank_sentinel(0) == "[BLANK_0]"
    assert blank_sentinel(12) == "[BLANK_12]"


def test_keyword_classifier_matches_softmax_oracle(keyword_classifier, data_dir):
    weights = load_classifier_weights(str(data_dir / "classifier_weights.tsv"))
    labels = ("entailment", "not_entailment")
    texts = (
        "The cat sat on the mat.",
        "Rain cancelled the dry run.",
        "Nothing about either topic.",
        "cat cat cat rain",
    )
    resp = keyword_classifier.classify(
        ClassifyRequest(task_id="rte", rendered_inputs=texts, labels=labels)
    )
    for text, probs in zip(texts, resp.probs):
        want = oracle_keyword_probs(text, labels, weights)
        assert probs == pytest.approx(want, abs=1e-12)


def test_keyword_classifier_zero_hits_uniform(keyword_classifier):
    resp = keyword_classifier.classify(
        ClassifyRequest(
            task_id="rte",
            rendered_inputs=("completely unrelated words",),
            labels=("entailment", "not_entailment"),
        )
    )
    assert resp.probs[0] == (0.5, 0.5)


def test_keyword_classifier_case_insensitive(keyword_classifier):
    lower = keyword_classifier.classify(
        ClassifyRequest(task_id="rte", rendered_inputs=("the cat",), labels=("entailment", "not_entailment"))
    )
    upper = keyword_classifier.classify(
        ClassifyRequest(task_id="rte", rendered_inputs=("The CAT",), labels=("entailment", "not_entailment"))
    )
    assert lower.probs == upper.probs


def test_classify_response_validation():
    req = ClassifyRequest(task_id="t", rendered_inputs=("a", "b"), labels=("x", "y"))
    with pytest.raises(ProtocolError):
        check_classify_response(req, [[0.5, 0.5]])  # wrong batch size
    with pytest.raises(ProtocolError):
        check_classify_response(req, [[0.5, 0.5, 0.0], [0.5, 0.5]])  # wrong width
    with pytest.raises(ProtocolError):
        check_classify_response(req, [[0.5, -0.1], [0.5, 0.5]])  # negative
    with pytest.raises(ProtocolError):
        check_classify_response(req, [[0.0, 0.0], [0.5, 0.5]])  # zero sum
    resp = check_classify_response(req, [[2.0, 2.0], [1.0, 3.0]])
    assert resp.probs == ((0.5, 0.5), (0.25, 0.75))


def test_identity_translation():
    backend = IdentityTranslationBackend()
    req = TranslateRequest(texts=("a", "b"), src="en", tgt="es")
    assert backend.translate(req).texts == ("a", "b")
    with pytest.raises(ProtocolError):
        backend.translate(TranslateRequest(texts=("a",), src="en", tgt="en"))


def test_dictionary_translation_unknown_pair():
    backend = DictionaryTranslationBackend({("en", "es"): {"cat": "gato"}})
    with pytest.raises(BackendError):
        backend.translate(TranslateRequest(texts=("x",), src="en", tgt="fr"))


def test_fixture_loaders(data_dir, tmp_path):
    lexicon = load_fill_lexicon(str(data_dir / "fill_lexicon.txt"))
    assert lexicon == ("alpha", "bravo", "charlie", "delta", "echo")
    weights = load_classifier_weights(str(data_dir / "classifier_weights.tsv"))
    assert weights[("cat", "entailment")] == 2.0
    table = load_translation_table(str(data_dir / "translations.tsv"))
    assert table[("en", "es")]["cat"] == "gato"
    assert table[("es", "en")]["gato"] == "feline"


class FakeResponse:
    def __init__(self, payload, status=200):
        self.payload = payload
        self.status = status

    def raise_for_status(self):
        if self.status >= 400:
            raise requests.HTTPError(f"status {self.status}")

    def json(self):
        return self.payload


class FlakySession:
    """Fails n times with a transport error, then returns the payload."""

    def __init__(self, payload, failures):
        self.payload = payload
        self.failures = failures
        self.calls = []

    def post(self, url, json=None, timeout=None):
        self.calls.append((url, json))
        if len(self.calls) <= self.failures:
            raise requests.ConnectionError("boom")
        return FakeResponse(self.payload)


def test_http_backend_retries_then_succeeds(monkeypatch):
    sleeps = []
    monkeypatch.setattr("flipda.backends.time.sleep", sleeps.append)
    session = FlakySession({"fills": ["ok"]}, failures=2)
    backend = HttpBackend(BackendConfig(endpoint="http://svc", retries=2), session=session)
    resp = backend.infill(InfillRequest(text="[BLANK_0]", blank_count=1))
    assert resp.fills == ("ok",)
    assert len(session.calls) == 3
    assert sleeps == [0.25, 0.5]  # exponential backoff, base 250 ms


def test_http_backend_exhausts_retries(monkeypatch):
    monkeypatch.setattr("flipda.backends.time.sleep", lambda s: None)
    session = FlakySession({"fills": ["ok"]}, failures=10)
    backend = HttpBackend(BackendConfig(endpoint="http://svc", retries=1), session=session)
    with pytest.raises(BackendUnavailableError):
        backend.infill(InfillRequest(text="[BLANK_0]", blank_count=1))
    assert len(session.calls) == 2


def test_http_backend_request_bodies():
    session = FlakySession({"fills": ["x"]}, failures=0)
    backend = HttpBackend(BackendConfig(endpoint="http://svc/"), session=session)
    backend.infill(InfillRequest(text="a [BLANK_0] b", blank_count=1, decode=DecodeConfig(strategy="beam", seed=7)))
    url, body = session.calls[0]
    assert url == "http://svc/infill"
    assert body == {
        "text_with_sentinels": "a [BLANK_0] b",
        "blank_count": 1,
        "decode": {"strategy": "beam", "top_k": 15, "beam_size": 10, "seed": 7},
    }


def test_http_backend_classify_and_translate_bodies():
    session = FlakySession({"probs": [[0.5, 0.5]], "texts": ["hola"]}, failures=0)
    backend = HttpBackend(BackendConfig(endpoint="http://svc"), session=session)
    backend.classify(ClassifyRequest(task_id="rte", rendered_inputs=("x",), labels=("a", "b")))
    assert session.calls[0][0] == "http://svc/classify"
    assert session.calls[0][1] == {"task_id": "rte", "rendered_inputs": ["x"], "labels": ["a", "b"]}
    backend.translate(TranslateRequest(texts=("hi",), src="en", tgt="es"))
    assert session.calls[1][0] == "http://svc/translate"
    assert session.calls[1][1] == {"texts": ["hi"], "src": "en", "tgt": "es"}


def test_http_backend_schema_violations():
    session = FlakySession({"nonsense": True}, failures=0)
    backend = HttpBackend(BackendConfig(endpoint="http://svc"), session=session)
    with pytest.raises(ProtocolError):
        backend.infill(InfillRequest(text="[BLANK_0]", blank_count=1))


def test_backend_config_validation():
    with pytest.raises(ValueError):
        BackendConfig(endpoint="http://x", max_parallel=0)
    with pytest.raises(ValueError):
        BackendConfig(endpoint="http://x", retries=-1)
