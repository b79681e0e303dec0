"""Offline stand-in for a generation endpoint speaking the /generate protocol."""
import logging
from typing import Dict, List, Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from pkg.constants.prompts import PROMPT_TEMPLATES
from pkg.middleware.request_log import log_request_middleware

logger = logging.getLogger(__name__)

STUB_MODES = ("fixture", "garbage", "error", "malformed")

_HEADER = PROMPT_TEMPLATES["future"].split("{titles}")[0]
_PARAPHRASE_MARK = "Rewrite this history"
_COUNTERFACTUAL_MARK = "would NOT choose"


class GenerateBody(BaseModel):
    """/generate 请求体"""
    prompt: str
    max_tokens: int = 256
    temperature: float = 0.0
    seed: int = 0


def prompt_kind(prompt: str) -> str:
    if _COUNTERFACTUAL_MARK in prompt:
        return "counterfactual"
    if _PARAPHRASE_MARK in prompt:
        return "paraphrase"
    return "future"


def prompt_history(prompt: str) -> List[str]:
    """从提示词里取回历史标题"""
    body = prompt[len(_HEADER):] if prompt.startswith(_HEADER) else prompt
    lines = body.split("\n")
    return [line for line in lines[:-1] if line.strip()]


def create_stub_app(mode: str = "fixture", fixture: Optional[Dict[str, List[str]]] = None) -> FastAPI:
    """
    构建桩服务

    Args:
        mode: fixture 返回固定标题；garbage 返回无法匹配的文本；error 返回
            HTTP 500；malformed 返回非 JSON
        fixture: 每种视图返回的标题列表；paraphrase 未给出时原样回显历史，
            future/counterfactual 未给出时分别回显最近/最早的历史标题

    Returns:
        FastAPI 应用
    """
    if mode not in STUB_MODES:
        raise ValueError(f"unknown stub mode {mode!r}, expected one of {STUB_MODES}")
    fixture = dict(fixture or {})
    app = FastAPI(title="generation-stub")
    app.state.calls = 0
    app.middleware("http")(log_request_middleware)

    @app.post("/generate")
    async def generate(body: GenerateBody):
        app.state.calls += 1
        if mode == "error":
            return JSONResponse(status_code=500, content={"error": "stub failure"})
        if mode == "malformed":
            return PlainTextResponse("not json")
        if mode == "garbage":
            return {"text": "Sure! Here are some ideas:\n- something nice\n- ???"}

        kind = prompt_kind(body.prompt)
        history = prompt_history(body.prompt)
        if kind in fixture:
            titles = fixture[kind]
        elif kind == "counterfactual":
            titles = history[:1]
        elif kind == "future":
            titles = history[-1:]
        else:
            titles = history
        text = "\n".join(f"{i + 1}. {title}" for i, title in enumerate(titles))
        logger.debug(f"Stub answered a {kind} prompt with {len(titles)} titles")
        return {"text": text}

    @app.get("/health")
    async def health():
        return {"status": "ok", "mode": mode, "calls": app.state.calls}

    return app
