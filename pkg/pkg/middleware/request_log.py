import logging
import time
import uuid

from fastapi import Request

from pkg.core.context.context_vars import run_id_var

logger = logging.getLogger(__name__)

REQUEST_ID_HEADER = "X-Request-ID"


async def log_request_middleware(request: Request, call_next):
    """
    为每个请求设置 run_id（沿用请求头或新生成），记录方法、路径、状态码与耗时

    响应头带回 X-Process-Time 与 X-Request-ID；请求结束后恢复原来的 run_id。
    """
    request_id = request.headers.get(REQUEST_ID_HEADER) or uuid.uuid4().hex[:12]
    token = run_id_var.set(request_id)
    start_time = time.perf_counter()
    try:
        response = await call_next(request)
        process_time = time.perf_counter() - start_time
        response.headers["X-Process-Time"] = f"{process_time:.6f}"
        response.headers[REQUEST_ID_HEADER] = request_id
        logger.info(f"{request.method} {request.url.path} -> {response.status_code} in {process_time * 1000:.1f}ms")
        return response
    finally:
        run_id_var.reset(token)
