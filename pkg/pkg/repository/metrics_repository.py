import csv
import json
import logging
import os
from typing import Iterable, List, Sequence

from pydantic import BaseModel

from pkg.core.errors import StorageError
from pkg.model.metrics import ROUND_REPORT_HEADER, RoundReport

logger = logging.getLogger(__name__)

ABLATION_HEADER = ["variant", "hr20", "ndcg20", "mrr", "final_rec_loss", "final_cl_loss"]
SWEEP_HEADER = ["mode", "clients_per_round", "seed", "hr20", "ndcg20", "mrr"]


def _ensure_parent(path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """写出 CSV（\\n 行尾，便于逐字节比较）"""
    try:
        _ensure_parent(path)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow(row)
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e
    logger.info(f"Wrote {path}")


def read_csv(path: str) -> List[dict]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            return list(csv.DictReader(f))
    except OSError as e:
        raise StorageError(f"cannot read {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise StorageError(f"cannot read {path}: not valid UTF-8 at byte {e.start}") from None


def write_round_reports(path: str, reports: Iterable[RoundReport]) -> None:
    """metrics.csv：round,rec_loss,cl_loss,hr20,ndcg20,mrr,clients,wall_ms"""
    write_csv(path, ROUND_REPORT_HEADER, (r.to_row() for r in reports))


def write_json(path: str, payload) -> None:
    """写出 JSON；pydantic 模型按 model_dump 序列化"""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump()
    try:
        _ensure_parent(path)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e
    logger.info(f"Wrote {path}")


def write_text(path: str, text: str) -> None:
    try:
        _ensure_parent(path)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e
