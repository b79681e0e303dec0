import asyncio
import json

import httpx
import pytest

from pkg.core.llm import APIError, EndpointConfig, GenerateRequest, GenerateResponse, HttpLLMClient
from pkg.service.stub_llm_service import create_stub_app
from pkg.service.view_service import build_prompt

ENDPOINT = "http://stub.test"


def _config(**overrides):
    values = {"endpoint": ENDPOINT, "timeout_ms": 1000, "max_retries": 2, "backoff_base_ms": 0}
    values.update(overrides)
    return EndpointConfig(**values)


def _generate(client, request):
    async def run():
        async with client:
            return await client.generate(request)
    return asyncio.run(run())


class CountingHandler:
    """MockTransport 处理器：记录请求并按顺序构造预设响应，最后一个重复使用"""

    def __init__(self, *responses):
        self.responses = list(responses)
        self.requests = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(request)
        index = min(len(self.requests), len(self.responses)) - 1
        status, kwargs = self.responses[index]
        return httpx.Response(status, **kwargs)


class TestHttpLLMClient:
    def test_posts_to_generate(self):
        handler = CountingHandler((200, {"json": {"text": "1. Item 2"}}))
        client = HttpLLMClient(_config(endpoint=ENDPOINT + "/"), transport=httpx.MockTransport(handler))
        response = _generate(client, GenerateRequest(prompt="p", seed=3))
        assert response == GenerateResponse(text="1. Item 2")
        assert str(handler.requests[0].url) == ENDPOINT + "/generate"
        assert json.loads(handler.requests[0].content) == {
            "prompt": "p", "max_tokens": 256, "temperature": 0.0, "seed": 3,
        }

    def test_identical_requests_are_memoized(self):
        handler = CountingHandler((200, {"json": {"text": "x"}}))
        client = HttpLLMClient(_config(), transport=httpx.MockTransport(handler))

        async def run():
            first = await client.generate(GenerateRequest(prompt="p", seed=1))
            again = await client.generate(GenerateRequest(prompt="p", seed=1))
            other = await client.generate(GenerateRequest(prompt="p", seed=2))
            await client.close()
            return first, again, other

        first, again, _ = asyncio.run(run())
        assert first is again
        assert len(handler.requests) == 2

    def test_retries_then_succeeds(self):
        handler = CountingHandler(
            (503, {"text": "busy"}),
            (200, {"json": {"text": "ok"}}),
        )
        client = HttpLLMClient(_config(), transport=httpx.MockTransport(handler))
        assert _generate(client, GenerateRequest(prompt="p")).text == "ok"
        assert len(handler.requests) == 2
        assert client.is_available()

    def test_server_error_exhausts_retries(self):
        handler = CountingHandler((500, {"json": {"error": "down"}}))
        client = HttpLLMClient(_config(max_retries=2), transport=httpx.MockTransport(handler))
        with pytest.raises(APIError):
            _generate(client, GenerateRequest(prompt="p"))
        assert len(handler.requests) == 3
        assert not client.is_available()

    @pytest.mark.parametrize("response", [
        (200, {"text": "not json"}),
        (200, {"json": {"answer": "x"}}),
        (200, {"json": {"text": 7}}),
    ])
    def test_malformed_payload(self, response):
        client = HttpLLMClient(_config(max_retries=0), transport=httpx.MockTransport(CountingHandler(response)))
        with pytest.raises(APIError):
            _generate(client, GenerateRequest(prompt="p"))

    def test_transport_error(self):
        def refuse(request):
            raise httpx.ConnectError("refused", request=request)

        client = HttpLLMClient(_config(max_retries=1), transport=httpx.MockTransport(refuse))
        with pytest.raises(APIError):
            _generate(client, GenerateRequest(prompt="p"))
        assert not client.is_available()


class TestAgainstStub:
    def test_fixture_round_trip(self):
        transport = httpx.ASGITransport(app=create_stub_app("fixture", {"future": ["Item 5"]}))
        client = HttpLLMClient(_config(), transport=transport)
        response = _generate(client, GenerateRequest(prompt=build_prompt("future", ["Item 1"], 1)))
        assert response.text == "1. Item 5"

    def test_error_mode_marks_unavailable(self):
        app = create_stub_app("error")
        client = HttpLLMClient(_config(max_retries=1), transport=httpx.ASGITransport(app=app))
        with pytest.raises(APIError):
            _generate(client, GenerateRequest(prompt=build_prompt("future", ["Item 1"], 1)))
        assert app.state.calls == 2
        assert not client.is_available()
