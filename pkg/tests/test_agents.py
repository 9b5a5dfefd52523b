from __future__ import annotations

import json
import math

import httpx
import pytest

from cryptoteam.agents import (
    AgentPrediction,
    AgentRole,
    Completion,
    CompletionRequest,
    FineTunePending,
    JobStatus,
    OpenAIChatProvider,
    OpenAIFineTuneService,
    PredictionLog,
    ProviderConfig,
    RoleBindings,
    ScriptedFineTuneService,
    ScriptedProvider,
    TokenLogprob,
    annotate_batch,
    chat_payload,
    classification_token,
    launch_finetune,
    parse_chat_response,
    parse_prediction_output,
    pending_path,
    predict,
    rise_logprob,
    tokenize,
)
from cryptoteam.agents.core import FALLBACK_FALL, FALLBACK_RISE, LOG_FLOOR
from cryptoteam.errors import ConfigError, ParseError, ProviderError, RetryableError
from cryptoteam.factors import Trend
from cryptoteam.market_data import MARKET
from cryptoteam.prompts import Modality, TrainingExample
from cryptoteam.roles import RoleId

CF = AgentRole(RoleId.CryptoFactor, "ft-cf")
TECH = AgentRole(RoleId.Technical, "ft-tech")
EXPLAINER = AgentRole(RoleId.Explainer, "gpt-4o")


def _req(subject="BTC", week=3, **kw) -> CompletionRequest:
    return CompletionRequest("sys", "user", subject=subject, week_index=week, **kw)


class TestParsing:
    def test_two_field_output(self):
        assert parse_prediction_output("Price trend: Rise\nExplanation: strong momentum") == (Trend.Rise, "strong momentum")

    def test_case_and_decoration_tolerated(self):
        assert parse_prediction_output("  market TREND:  **fall**.\n\nExplanation:\n weak")[0] is Trend.Fall
        assert parse_prediction_output("Price trend: Rise\nvolume up") == (Trend.Rise, "volume up")

    @pytest.mark.parametrize("raw", ["", "Rise", "Explanation: x\nPrice trend: Rise", "Price trend: Up\nExplanation: x", "Price trend: Rising"])
    def test_malformed(self, raw):
        with pytest.raises(ParseError):
            parse_prediction_output(raw)


class TestLogprobs:
    def test_rise_token_used_directly(self):
        assert rise_logprob(Trend.Rise, math.log(0.8)) == math.log(0.8)

    def test_fall_token_complemented(self):
        assert rise_logprob(Trend.Fall, math.log(0.8)) == pytest.approx(math.log(0.2))

    def test_floor(self):
        assert rise_logprob(Trend.Fall, 0.0) == LOG_FLOOR
        assert rise_logprob(Trend.Rise, -1000.0) == LOG_FLOOR
        assert rise_logprob(Trend.Rise, 1e-9) == 0.0

    def test_classification_token_after_prefix(self):
        toks = tokenize("Price trend: Fall\nExplanation: not a rise", -0.3)
        assert classification_token(toks) == (Trend.Fall, -0.3)
        # explanation words before the prefix do not count
        toks = (TokenLogprob("Rise", -5.0), TokenLogprob(" trend", 0.0), TokenLogprob(":", 0.0), TokenLogprob(" Fall", -0.1))
        assert classification_token(toks) == (Trend.Fall, -0.1)
        assert classification_token((TokenLogprob("nothing", 0.0),)) is None

    def test_tokenize_roundtrip(self):
        text = "Market trend: Rise\nExplanation: yes"
        toks = tokenize(text, -0.2)
        assert "".join(t.token for t in toks) == text
        assert sum(t.logprob != 0 for t in toks) == 1
        assert tokenize(text, None) is None


class TestPredict:
    def test_valid_prediction(self):
        provider = ScriptedProvider([{"role": "CryptoFactor", "subject": "BTC", "week": 3, "text": "Price trend: Fall\nExplanation: x", "logprob": math.log(0.9)}])
        pred = predict(provider, CF, _req())
        assert pred.valid and pred.label is Trend.Fall and not pred.logprob_fallback
        assert pred.prob_rise == pytest.approx(0.1)
        assert pred.request_key == _req().key(CF) and pred.model_ref == "ft-cf"

    def test_missing_logprobs_fall_back(self):
        provider = ScriptedProvider([{"role": "CryptoFactor", "subject": "BTC", "week": 3, "text": "Price trend: Rise\nExplanation: x"}])
        pred = predict(provider, CF, _req())
        assert pred.logprob_fallback and pred.logprob_rise == FALLBACK_RISE

    def test_mismatched_token_falls_back(self):
        entry = {"role": "CryptoFactor", "subject": "BTC", "week": 3, "text": "Price trend: Fall\nExplanation: x",
                 "tokens": [["Price trend:", 0.0], [" Ri", -0.1], ["se", -0.1]]}
        pred = predict(ScriptedProvider([entry]), CF, _req())
        assert pred.label is Trend.Fall and pred.logprob_fallback and pred.logprob_rise == FALLBACK_FALL

    def test_single_reprompt_then_success(self):
        entries = [
            {"role": "CryptoFactor", "subject": "BTC", "week": 3, "text": "I think it goes up"},
            {"role": "CryptoFactor", "subject": "BTC", "week": 3, "text": "Price trend: Rise\nExplanation: x", "logprob": -0.1},
        ]
        provider = ScriptedProvider(entries)
        pred = predict(provider, CF, _req())
        assert pred.valid and pred.label is Trend.Rise
        assert len(provider.calls) == 2
        assert "Price trend: Rise or Fall" in provider.calls[1][3].user

    def test_second_failure_is_invalid(self):
        provider = ScriptedProvider([{"role": "CryptoFactor", "subject": "BTC", "week": 3, "text": "???"}])
        pred = predict(provider, CF, _req())
        assert not pred.valid and pred.label is None and pred.error
        assert len(provider.calls) == 2

    def test_image_only_for_vision_roles(self):
        provider = ScriptedProvider([{"role": "Technical", "subject": "*", "week": "*", "text": "Price trend: Rise", "logprob": -0.2}])
        assert predict(provider, TECH, _req(image_ref="https://x/y.png")).valid
        with pytest.raises(ValueError):
            predict(provider, CF, _req(image_ref="https://x/y.png"))

    def test_prediction_roundtrip_and_validation(self):
        pred = AgentPrediction(RoleId.News, MARKET, 2, Trend.Rise, -0.5, "e", "raw", provenance=(("news", 1),))
        assert AgentPrediction.from_dict(json.loads(json.dumps(pred.to_dict()))) == pred
        with pytest.raises(ValueError):
            AgentPrediction(RoleId.News, MARKET, 2, Trend.Rise, 0.5, "e", "raw")
        with pytest.raises(ValueError):
            AgentPrediction(RoleId.News, MARKET, 2, None, None, "e", "raw")


class TestScriptedProvider:
    def test_wildcards_and_placeholders(self):
        provider = ScriptedProvider([
            {"role": "Explainer", "subject": "*", "week": "*", "text": "about {subject} at {week}"},
            {"role": "Explainer", "subject": "ETH", "week": "*", "text": "eth"},
        ])
        assert provider.complete(EXPLAINER, _req("BTC", 4)).text == "about BTC at 4"
        assert provider.complete(EXPLAINER, _req("ETH", 4)).text == "eth"

    def test_no_entry(self):
        with pytest.raises(ProviderError):
            ScriptedProvider([]).complete(CF, _req())

    def test_errors(self):
        provider = ScriptedProvider([
            {"role": "CryptoFactor", "subject": "A", "week": 1, "error": "retryable"},
            {"role": "CryptoFactor", "subject": "B", "week": 1, "error": "bad request"},
        ])
        with pytest.raises(RetryableError):
            provider.complete(CF, _req("A", 1))
        with pytest.raises(ProviderError):
            provider.complete(CF, _req("B", 1))

    def test_no_logprobs_when_not_requested(self):
        provider = ScriptedProvider([{"role": "CryptoFactor", "subject": "*", "week": "*", "text": "Price trend: Rise", "logprob": -0.1}])
        assert provider.complete(CF, _req(want_logprobs=False)).tokens is None

    def test_from_jsonl(self, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text(json.dumps({"role": "News", "subject": MARKET, "week": 2, "text": "t"}) + "\n\n")
        assert ScriptedProvider.from_jsonl(path).complete(AgentRole(RoleId.News, "m"), _req(MARKET, 2)).text == "t"
        with pytest.raises(ConfigError):
            ScriptedProvider.from_jsonl(tmp_path / "missing.jsonl")


def _chat_body(text: str, tokens=None) -> dict:
    choice = {"message": {"role": "assistant", "content": text}}
    if tokens is not None:
        choice["logprobs"] = {"content": [{"token": t, "logprob": lp} for t, lp in tokens]}
    return {"choices": [choice]}


class TestOpenAIProvider:
    def test_payload_and_response(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TEST_KEY", "sk-test")
        png = tmp_path / "c.png"
        png.write_bytes(b"\x89PNG fake")
        seen = []

        def handler(request: httpx.Request) -> httpx.Response:
            seen.append(request)
            return httpx.Response(200, json=_chat_body("Price trend: Rise\nExplanation: x", [("Price", 0.0), (" trend", 0.0), (":", 0.0), (" Rise", -0.05)]))

        provider = OpenAIChatProvider(
            ProviderConfig(endpoint="https://llm.test/v1", api_key_env="TEST_KEY"),
            client=httpx.Client(transport=httpx.MockTransport(handler)),
        )
        pred = predict(provider, TECH, _req(image_ref=str(png)))
        assert pred.logprob_rise == -0.05 and not pred.logprob_fallback
        (request,) = seen
        body = json.loads(request.content)
        assert request.url == "https://llm.test/v1/chat/completions"
        assert request.headers["Authorization"] == "Bearer sk-test"
        assert body["model"] == "ft-tech" and body["logprobs"] is True and body["temperature"] == 0.0
        image = body["messages"][1]["content"][1]["image_url"]["url"]
        assert image.startswith("data:image/png;base64,")

    def test_retry_on_429_then_success(self):
        codes = iter([429, 500, 200])

        def handler(request):
            code = next(codes)
            return httpx.Response(code, json=_chat_body("Market trend: Fall") if code == 200 else {})

        sleeps = []
        provider = OpenAIChatProvider(ProviderConfig(max_retries=3), client=httpx.Client(transport=httpx.MockTransport(handler)), sleep=sleeps.append)
        assert provider.complete(CF, _req()).text == "Market trend: Fall"
        assert len(sleeps) == 2

    def test_client_error_not_retried(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(400, text="bad")

        provider = OpenAIChatProvider(ProviderConfig(), client=httpx.Client(transport=httpx.MockTransport(handler)), sleep=lambda s: None)
        with pytest.raises(ProviderError):
            provider.complete(CF, _req())
        assert len(calls) == 1

    def test_retries_exhausted(self):
        provider = OpenAIChatProvider(
            ProviderConfig(max_retries=2),
            client=httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(503))),
            sleep=lambda s: None,
        )
        with pytest.raises(RetryableError):
            provider.complete(CF, _req())

    def test_payload_without_logprobs(self):
        assert "logprobs" not in chat_payload(CF, _req(want_logprobs=False))

    def test_malformed_response(self):
        with pytest.raises(ProviderError):
            parse_chat_response({"choices": []})
        assert parse_chat_response(_chat_body("x")) == Completion("x", None)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ProviderConfig(timeout=0)
        with pytest.raises(ValueError):
            ProviderConfig(parallelism=0)


class TestAnnotation:
    def _examples(self):
        return [
            TrainingExample("BTC", 1, Modality.factors, Trend.Rise, info_text="i"),
            TrainingExample("ETH", 1, Modality.factors, Trend.Fall, info_text="i"),
            TrainingExample(MARKET, 1, Modality.news, Trend.Fall, info_text="h"),
        ]

    def test_batch_keeps_order_and_skips(self):
        provider = ScriptedProvider([
            {"role": "Explainer", "subject": "*", "week": "*", "text": "why {subject}"},
            {"role": "Explainer", "subject": "ETH", "week": 1, "text": "   "},
            {"role": "Explainer", "subject": MARKET, "week": 1, "error": "boom"},
        ])
        lit = {r: "L" for r in (RoleId.CryptoFactor, RoleId.News)}
        done, skipped = annotate_batch(provider, EXPLAINER, self._examples(), lit, parallelism=3)
        assert [(e.subject, e.explanation) for e in done] == [("BTC", "why BTC")]
        assert sorted((s.subject, s.expert) for s in skipped) == [("ETH", RoleId.CryptoFactor), (MARKET, RoleId.News)]
        assert all(not req.want_logprobs for *_, req in provider.calls)
        assert "Knowledge: L\n" in provider.calls[0][3].user


class TestFineTune:
    def test_success_binds_model(self, tmp_path):
        service = ScriptedFineTuneService(statuses=(JobStatus("running"), JobStatus("succeeded", "ft-x")))
        bindings = RoleBindings(tmp_path / "bindings.json")
        sleeps = []
        ref = launch_finetune(service, tmp_path / "d.jsonl", RoleId.News, bindings, tmp_path / "state", sleep=sleeps.append, poll_interval=5)
        assert ref == "ft-x" and sleeps == [5]
        assert json.loads((tmp_path / "bindings.json").read_text()) == {"News": "ft-x"}
        assert not pending_path(tmp_path / "state", RoleId.News).exists()
        assert RoleBindings(tmp_path / "bindings.json").roles({RoleId.CryptoFactor: "base"})[RoleId.News].model_ref == "ft-x"

    def test_timeout_then_resume_without_resubmit(self, tmp_path):
        service = ScriptedFineTuneService(statuses=(JobStatus("running"),))
        bindings = RoleBindings(tmp_path / "b.json")
        with pytest.raises(FineTunePending) as exc:
            launch_finetune(service, "d.jsonl", RoleId.Technical, bindings, tmp_path, max_polls=3, sleep=lambda s: None)
        assert exc.value.job_id == "ftjob-0001" and exc.value.state_path.exists()
        service.statuses = (JobStatus("succeeded", "ft-tech"),)
        assert launch_finetune(service, "d.jsonl", RoleId.Technical, bindings, tmp_path, sleep=lambda s: None) == "ft-tech"
        assert len(service.submissions) == 1

    def test_failed_job(self, tmp_path):
        service = ScriptedFineTuneService(statuses=(JobStatus("failed", message="invalid file"),))
        with pytest.raises(ProviderError, match="invalid file"):
            launch_finetune(service, "d.jsonl", RoleId.News, RoleBindings(tmp_path / "b.json"), tmp_path, sleep=lambda s: None)
        assert not pending_path(tmp_path, RoleId.News).exists()

    def test_rejected_submission(self, tmp_path):
        with pytest.raises(ProviderError):
            launch_finetune(ScriptedFineTuneService(reject="bad format"), "d.jsonl", RoleId.News, RoleBindings(tmp_path / "b.json"), tmp_path)

    def test_http_service(self, tmp_path):
        dataset = tmp_path / "news.jsonl"
        dataset.write_text('{"messages": []}\n')
        paths = []

        def handler(request: httpx.Request) -> httpx.Response:
            paths.append((request.method, request.url.path))
            if request.url.path.endswith("/files"):
                return httpx.Response(200, json={"id": "file-1"})
            if request.method == "POST":
                assert json.loads(request.content) == {"training_file": "file-1", "model": "gpt-4o-2024-08-06"}
                return httpx.Response(200, json={"id": "ftjob-9"})
            return httpx.Response(200, json={"status": "succeeded", "fine_tuned_model": "ft:gpt-4o:news"})

        service = OpenAIFineTuneService(ProviderConfig(endpoint="https://llm.test/v1"), client=httpx.Client(transport=httpx.MockTransport(handler)))
        assert service.submit(dataset, "gpt-4o-2024-08-06") == "ftjob-9"
        assert service.status("ftjob-9") == JobStatus("succeeded", "ft:gpt-4o:news", "")
        assert paths == [("POST", "/v1/files"), ("POST", "/v1/fine_tuning/jobs"), ("GET", "/v1/fine_tuning/jobs/ftjob-9")]


class TestPredictionLog:
    def test_dedup_by_request_key(self, tmp_path):
        log = PredictionLog(tmp_path / "p.jsonl")
        pred = AgentPrediction(RoleId.News, MARKET, 2, Trend.Rise, -0.5, "e", "raw", request_key="k1")
        assert log.record(pred) and not log.record(pred)
        assert PredictionLog(tmp_path / "p.jsonl").record(pred) is False
        assert log.predictions() == [pred]
        line = (tmp_path / "p.jsonl").read_text().splitlines()[0]
        assert line == json.dumps(json.loads(line), sort_keys=True, separators=(",", ":"))
