import json
import logging
import os
from typing import List, Tuple

from pkg.core.errors import DataFormatError, StorageError
from pkg.model.dataset import ClientDataset
from pkg.model.items import ItemCatalog
from pkg.repository.item_repository import ItemRepository

logger = logging.getLogger(__name__)

CLIENTS_FILE = "clients.jsonl"
ITEMS_FILE = "items.jsonl"


class PreparedDatasetRepository:
    """
    预处理后的数据集目录

    clients.jsonl 每行一个客户端（item id 已是 0..M-1），items.jsonl 按 id 顺序
    保存目录，行号即 id。
    """

    def __init__(self, directory: str):
        self.directory = directory
        self.clients_path = os.path.join(directory, CLIENTS_FILE)
        self.items_path = os.path.join(directory, ITEMS_FILE)

    def save(self, clients: List[ClientDataset], catalog: ItemCatalog) -> None:
        try:
            os.makedirs(self.directory, exist_ok=True)
            with open(self.clients_path, "w", encoding="utf-8") as f:
                for client in clients:
                    f.write(json.dumps(client.to_record()) + "\n")
        except OSError as e:
            raise StorageError(f"cannot write {self.clients_path}: {e}") from e
        ItemRepository(self.items_path).save(catalog)
        logger.info(f"Saved {len(clients)} clients and {catalog.n_items} items to {self.directory}")

    def load(self) -> Tuple[List[ClientDataset], ItemCatalog]:
        """
        Raises:
            StorageError: 文件缺失
            DataFormatError: 行格式错误或 id 超出目录
        """
        if not os.path.isfile(self.clients_path):
            raise StorageError(f"prepared clients file not found: {self.clients_path}")
        vocab = self._read_vocab()
        catalog = ItemRepository(self.items_path).load(vocab)

        clients: List[ClientDataset] = []
        try:
            with open(self.clients_path, "r", encoding="utf-8") as f:
                for line_no, line in enumerate(f, start=1):
                    if not line.strip():
                        continue
                    try:
                        client = ClientDataset.from_record(json.loads(line))
                    except Exception as e:
                        raise DataFormatError(f"bad client record: {e}", self.clients_path, line_no) from None
                    ids = client.seen.union(client.full_items)
                    if max(ids) >= catalog.n_items or min(ids) < 0:
                        raise DataFormatError(
                            f"item id outside catalog of {catalog.n_items} items", self.clients_path, line_no
                        )
                    clients.append(client)
        except OSError as e:
            raise StorageError(f"cannot read {self.clients_path}: {e}") from e
        except UnicodeDecodeError as e:
            raise DataFormatError(f"not valid UTF-8 at byte {e.start}", self.clients_path) from None
        if not clients:
            raise DataFormatError("no clients", self.clients_path)
        logger.info(f"Loaded {len(clients)} clients and {catalog.n_items} items from {self.directory}")
        return clients, catalog

    def _read_vocab(self):
        if not os.path.isfile(self.items_path):
            raise StorageError(f"prepared items file not found: {self.items_path}")
        vocab = {}
        try:
            with open(self.items_path, "r", encoding="utf-8") as f:
                for line_no, line in enumerate(f, start=1):
                    if not line.strip():
                        continue
                    try:
                        raw = str(json.loads(line)["item"])
                    except (json.JSONDecodeError, KeyError, TypeError) as e:
                        raise DataFormatError(f"bad item record: {e}", self.items_path, line_no) from None
                    vocab[raw] = len(vocab)
        except OSError as e:
            raise StorageError(f"cannot read {self.items_path}: {e}") from e
        except UnicodeDecodeError as e:
            raise DataFormatError(f"not valid UTF-8 at byte {e.start}", self.items_path) from None
        return vocab
