"""Per-client data and generated view containers."""
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Tuple

from pkg.core.errors import ContractError
from pkg.model.encoder import InteractionSequence

PROVENANCES = ("rule", "llm", "cache")


@dataclass(frozen=True)
class RawInteraction:
    """一条原始交互记录"""
    user: str
    item: str
    ts: int


@dataclass(frozen=True)
class ClientDataset:
    """
    单个客户端的数据：训练序列与留出的验证/测试目标

    seen 是该用户交互过的全部商品（含两个目标）。
    """
    user_id: str
    train: InteractionSequence
    valid_target: int
    test_target: int
    seen: FrozenSet[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if len(self.train) < 1:
            raise ContractError(f"client {self.user_id}: empty train sequence")
        if not self.seen:
            object.__setattr__(
                self, "seen", frozenset(self.train.items) | {self.valid_target, self.test_target}
            )

    @property
    def full_items(self) -> Tuple[int, ...]:
        return self.train.items + (self.valid_target, self.test_target)

    def context(self, split: str) -> Tuple[Tuple[int, ...], int]:
        """
        评估用的 (输入序列, 目标)

        valid 以 train 为上下文；test 以 train + valid 为上下文。
        """
        if split == "valid":
            return self.train.items, self.valid_target
        if split == "test":
            return self.train.items + (self.valid_target,), self.test_target
        raise ContractError(f"unknown split {split!r}, expected valid or test")

    def training_pair(self) -> Tuple[Tuple[int, ...], int]:
        """本地训练样本：train[:-1] 预测 train[-1]"""
        items = self.train.items
        if len(items) < 2:
            raise ContractError(f"client {self.user_id}: train length {len(items)} has no target")
        return items[:-1], items[-1]

    def to_record(self) -> Dict[str, Any]:
        return {
            "user": self.user_id,
            "train": list(self.train.items),
            "timestamps": list(self.train.timestamps) if self.train.timestamps is not None else None,
            "valid": self.valid_target,
            "test": self.test_target,
            "seen": sorted(self.seen),
        }

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "ClientDataset":
        ts = record.get("timestamps")
        train = InteractionSequence(record["user"], tuple(record["train"]), tuple(ts) if ts is not None else None)
        seen = frozenset(int(i) for i in record.get("seen") or ())
        return cls(record["user"], train, int(record["valid"]), int(record["test"]), seen)


@dataclass(frozen=True)
class ViewTriple:
    """一个用户的三个行为视图 S^F、S^P、S^N"""
    future: Tuple[int, ...]
    paraphrase: Tuple[int, ...]
    counterfactual: Tuple[int, ...]
    provenance: Tuple[str, str, str] = ("rule", "rule", "rule")

    def __post_init__(self):
        for name in ("future", "paraphrase", "counterfactual"):
            ids = tuple(int(i) for i in getattr(self, name))
            if not ids:
                raise ContractError(f"view {name} is empty")
            object.__setattr__(self, name, ids)
        provenance = tuple(self.provenance)
        if len(provenance) != 3 or any(p not in PROVENANCES for p in provenance):
            raise ContractError(f"bad provenance {provenance!r}")
        object.__setattr__(self, "provenance", provenance)

    def as_dict(self) -> Dict[str, Tuple[int, ...]]:
        return {"future": self.future, "paraphrase": self.paraphrase, "counterfactual": self.counterfactual}

    def with_provenance(self, provenance: Tuple[str, str, str]) -> "ViewTriple":
        return ViewTriple(self.future, self.paraphrase, self.counterfactual, provenance)

    def to_record(self, key: str) -> Dict[str, Any]:
        return {
            "key": key,
            "future": list(self.future),
            "paraphrase": list(self.paraphrase),
            "counterfactual": list(self.counterfactual),
            "provenance": list(self.provenance),
        }

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "ViewTriple":
        return cls(
            tuple(record["future"]),
            tuple(record["paraphrase"]),
            tuple(record["counterfactual"]),
            tuple(record["provenance"]),
        )


def views_in(triple: ViewTriple, names: List[str]) -> Dict[str, Tuple[int, ...]]:
    """只保留启用的视图"""
    return {name: ids for name, ids in triple.as_dict().items() if name in names}
