from contextvars import ContextVar
from typing import Optional
import uuid

# 创建上下文变量
run_id_var: ContextVar[str] = ContextVar('run_id', default='')
round_var: ContextVar[Optional[int]] = ContextVar('round', default=None)
app_var: ContextVar[str] = ContextVar('app', default='')

def get_run_id() -> str:
    """获取当前run_id"""
    return run_id_var.get()

def set_run_id(run_id: Optional[str] = None) -> str:
    """设置run_id，未提供时生成一个新的"""
    value = run_id or uuid.uuid4().hex[:12]
    run_id_var.set(value)
    return value

def clear_run_id() -> None:
    """清除run_id"""
    run_id_var.set('')

def get_round() -> Optional[int]:
    """获取当前通信轮次"""
    return round_var.get()

def set_round(round_index: Optional[int]) -> None:
    """设置当前通信轮次"""
    round_var.set(round_index)

def get_app() -> str:
    """获取当前app名称"""
    return app_var.get()

def set_app(app: str) -> None:
    """设置app名称"""
    app_var.set(app)
