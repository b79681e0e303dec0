import csv
import json
import logging
import os
from typing import Iterable, List

from pydantic import BaseModel, ConfigDict, ValidationError

from pkg.core.errors import ContractError, DataFormatError, StorageError
from pkg.model.dataset import RawInteraction

logger = logging.getLogger(__name__)

FORMATS = ("jsonl", "csv")
CSV_HEADER = ["user", "item", "ts"]


class InteractionRecord(BaseModel):
    """一行交互记录 {"user", "item", "ts"}"""
    model_config = ConfigDict(coerce_numbers_to_str=True, extra="ignore")

    user: str
    item: str
    ts: int


def detect_format(path: str, format: str = "auto") -> str:
    if format != "auto":
        if format not in FORMATS:
            raise ContractError(f"unknown interaction format {format!r}")
        return format
    return "csv" if path.lower().endswith(".csv") else "jsonl"


class InteractionRepository:
    """交互日志文件（JSONL 或带表头的 CSV）"""

    def __init__(self, path: str, format: str = "auto"):
        self.path = path
        self.format = detect_format(path, format)

    def load(self) -> List[RawInteraction]:
        """
        按文件顺序读取全部记录

        Raises:
            StorageError: 文件不可读
            DataFormatError: 缺字段、ts 不是整数、不是 UTF-8 或文件没有记录（带行号）
        """
        if not os.path.isfile(self.path):
            raise StorageError(f"interaction file not found: {self.path}")
        try:
            with open(self.path, "r", encoding="utf-8", newline="") as f:
                records = self._read_csv(f) if self.format == "csv" else self._read_jsonl(f)
        except OSError as e:
            raise StorageError(f"cannot read {self.path}: {e}") from e
        except UnicodeDecodeError as e:
            raise DataFormatError(f"not valid UTF-8 at byte {e.start}", self.path) from None
        if not records:
            raise DataFormatError("no interaction records", self.path)
        logger.info(f"Loaded {len(records)} interactions from {self.path}")
        return records

    def _validate(self, raw, line: int) -> RawInteraction:
        try:
            record = InteractionRecord.model_validate(raw)
        except ValidationError as e:
            problems = "; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())
            raise DataFormatError(problems, self.path, line) from None
        return RawInteraction(record.user, record.item, record.ts)

    def _read_jsonl(self, f) -> List[RawInteraction]:
        records = []
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataFormatError(f"invalid JSON: {e.msg}", self.path, line_no) from None
            if not isinstance(raw, dict):
                raise DataFormatError("expected a JSON object", self.path, line_no)
            records.append(self._validate(raw, line_no))
        return records

    def _read_csv(self, f) -> List[RawInteraction]:
        reader = csv.DictReader(f)
        missing = [name for name in CSV_HEADER if name not in (reader.fieldnames or [])]
        if reader.fieldnames is None:
            return []
        if missing:
            raise DataFormatError(f"CSV header lacks {missing}", self.path, 1)
        records = []
        for row in reader:
            records.append(self._validate(row, reader.line_num))
        return records

    def save(self, records: Iterable[RawInteraction]) -> None:
        """写出记录（格式同构造参数）"""
        try:
            directory = os.path.dirname(self.path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(self.path, "w", encoding="utf-8", newline="") as f:
                if self.format == "csv":
                    writer = csv.writer(f, lineterminator="\n")
                    writer.writerow(CSV_HEADER)
                    for r in records:
                        writer.writerow([r.user, r.item, r.ts])
                else:
                    for r in records:
                        f.write(json.dumps({"user": r.user, "item": r.item, "ts": r.ts}) + "\n")
        except OSError as e:
            raise StorageError(f"cannot write {self.path}: {e}") from e
        logger.info(f"Wrote interactions to {self.path}")


def load_interactions(path: str, format: str = "auto") -> List[RawInteraction]:
    return InteractionRepository(path, format).load()
