"""Stable seed derivation (Python's hash() is salted per process)."""
import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """
    由任意可打印的部件派生一个稳定的 63 位种子

    Args:
        parts: 例如 (global_seed, user_id, round)

    Returns:
        非负整数种子，跨进程一致
    """
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little") & ((1 << 63) - 1)


def rng_for(*parts) -> np.random.Generator:
    """返回由 derive_seed(parts) 初始化的 numpy Generator"""
    return np.random.default_rng(derive_seed(*parts))
