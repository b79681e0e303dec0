import json
from collections import Counter

import numpy as np
import pytest

from pkg.core.config import DataConfig
from pkg.core.errors import ConfigError, ContractError, DataFormatError, StorageError
from pkg.model.dataset import ClientDataset, RawInteraction
from pkg.model.encoder import InteractionSequence
from pkg.repository.interaction_repository import InteractionRepository, load_interactions
from pkg.repository.item_repository import ItemRepository, default_catalog
from pkg.repository.prepared_repository import PreparedDatasetRepository
from pkg.service.data_service import (
    build_vocabulary,
    k_core_filter,
    load_dataset,
    prepare_dataset,
    prepare_records,
    split_leave_two,
    truncate_and_prune,
)


def _records(pairs):
    return [RawInteraction(u, i, t) for t, (u, i) in enumerate(pairs)]


def _brute_force_core(records, k):
    kept = list(records)
    while True:
        users = Counter(r.user for r in kept)
        items = Counter(r.item for r in kept)
        survivors = [r for r in kept if users[r.user] >= k and items[r.item] >= k]
        if len(survivors) == len(kept):
            return survivors
        kept = survivors


class TestKCore:
    def test_cascade_leaves_dense_block(self):
        records = _records([
            ("u1", "a"), ("u1", "b"), ("u2", "a"), ("u2", "b"), ("u3", "a"), ("u3", "c"),
        ])
        kept = k_core_filter(records, 2)
        assert {(r.user, r.item) for r in kept} == {("u1", "a"), ("u1", "b"), ("u2", "a"), ("u2", "b")}

    def test_chain_collapses(self):
        records = _records([
            ("u1", "i1"), ("u1", "i2"), ("u2", "i2"), ("u2", "i3"),
            ("u3", "i3"), ("u3", "i4"), ("u4", "i4"), ("u4", "i5"),
        ])
        assert k_core_filter(records, 2) == []

    def test_min_count_one_keeps_everything(self):
        records = _records([("u1", "a"), ("u2", "b")])
        assert k_core_filter(records, 1) == records

    def test_bad_min_count(self):
        with pytest.raises(ContractError):
            k_core_filter([], 0)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        records = [
            RawInteraction(f"u{int(rng.integers(12))}", f"i{int(rng.integers(15))}", t)
            for t in range(int(rng.integers(20, 120)))
        ]
        k = int(rng.integers(2, 5))
        assert k_core_filter(records, k) == _brute_force_core(records, k)


class TestSplit:
    def test_leave_two_out(self):
        records = [
            RawInteraction("u2", "x", 5),
            RawInteraction("u1", "a", 3),
            RawInteraction("u1", "b", 1),
            RawInteraction("u1", "c", 2),
            RawInteraction("u1", "d", 9),
        ]
        vocab = build_vocabulary(records)
        assert vocab == {"x": 0, "a": 1, "b": 2, "c": 3, "d": 4}
        clients = split_leave_two(records, vocab)
        assert len(clients) == 1
        client = clients[0]
        assert client.user_id == "u1"
        assert client.train.items == (2, 3)
        assert client.valid_target == 1
        assert client.test_target == 4
        assert client.seen == frozenset({1, 2, 3, 4})

    def test_timestamp_ties_keep_input_order(self):
        records = _records([("u", "a"), ("u", "b"), ("u", "c"), ("u", "d")])
        records = [RawInteraction(r.user, r.item, 0) for r in records]
        client = split_leave_two(records)[0]
        assert client.train.items == (0, 1)
        assert (client.valid_target, client.test_target) == (2, 3)

    def test_clients_sorted_by_user(self):
        records = _records([(u, i) for u in ("b", "a", "c") for i in ("x", "y", "z")])
        assert [c.user_id for c in split_leave_two(records)] == ["a", "b", "c"]

    def test_missing_vocab_item(self):
        with pytest.raises(ContractError):
            split_leave_two(_records([("u", "a"), ("u", "b"), ("u", "c")]), {"a": 0})

    def test_empty(self):
        assert split_leave_two([]) == []


class TestTruncate:
    def _client(self, n):
        items = tuple(range(n))
        return ClientDataset("u", InteractionSequence("u", items, tuple(range(n))), n, n + 1)

    def test_keeps_most_recent(self):
        out = truncate_and_prune([self._client(10)], max_len=5, min_len=3)
        assert out[0].train.items == (7, 8, 9)
        assert out[0].train.timestamps == (7, 8, 9)
        assert out[0].seen == frozenset(range(12))

    def test_prunes_short_users(self):
        assert truncate_and_prune([self._client(2)], max_len=50, min_len=5) == []
        assert len(truncate_and_prune([self._client(3)], max_len=50, min_len=5)) == 1

    def test_bad_max_len(self):
        with pytest.raises(ContractError):
            truncate_and_prune([], max_len=2)

    def test_prepare_records_pipeline(self):
        pairs = [(f"u{u}", f"i{i}") for u in range(6) for i in range(6)]
        clients, vocab = prepare_records(_records(pairs), min_count=5, max_len=5, min_len=5)
        assert len(vocab) == 6
        assert len(clients) == 6
        assert all(len(c.train) == 3 for c in clients)


class TestInteractionRepository:
    def test_jsonl_with_numeric_ids(self, tmp_path):
        path = tmp_path / "log.jsonl"
        path.write_text('{"user": 1, "item": 7, "ts": 3}\n\n{"user": "u2", "item": "x", "ts": 4}\n')
        records = load_interactions(str(path))
        assert records == [RawInteraction("1", "7", 3), RawInteraction("u2", "x", 4)]

    def test_jsonl_error_has_line_number(self, tmp_path):
        path = tmp_path / "log.jsonl"
        path.write_text('{"user": "a", "item": "b", "ts": 1}\n{"user": "a", "item": "b"}\n')
        with pytest.raises(DataFormatError) as exc:
            load_interactions(str(path))
        assert exc.value.line == 2

    def test_jsonl_bad_ts(self, tmp_path):
        path = tmp_path / "log.jsonl"
        path.write_text('{"user": "a", "item": "b", "ts": "soon"}\n')
        with pytest.raises(DataFormatError):
            load_interactions(str(path))

    def test_csv(self, tmp_path):
        path = tmp_path / "log.csv"
        path.write_text("user,item,ts\na,b,1\na,c,2\n")
        assert load_interactions(str(path)) == [RawInteraction("a", "b", 1), RawInteraction("a", "c", 2)]

    def test_csv_missing_column(self, tmp_path):
        path = tmp_path / "log.csv"
        path.write_text("user,item\na,b\n")
        with pytest.raises(DataFormatError):
            load_interactions(str(path))

    def test_save_then_load(self, tmp_path):
        records = _records([("a", "x"), ("b", "y")])
        for name in ("out.csv", "out.jsonl"):
            repo = InteractionRepository(str(tmp_path / name))
            repo.save(records)
            assert repo.load() == records

    def test_missing_file(self, tmp_path):
        with pytest.raises(StorageError):
            load_interactions(str(tmp_path / "nope.jsonl"))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "log.jsonl"
        path.write_text("\n")
        with pytest.raises(DataFormatError):
            load_interactions(str(path))

    @pytest.mark.parametrize("name", ["log.jsonl", "log.csv"])
    def test_not_utf8(self, tmp_path, name):
        path = tmp_path / name
        path.write_bytes(b"\xff\xfe" + "user,item,ts\n".encode("utf-16-le"))
        with pytest.raises(DataFormatError):
            load_interactions(str(path))


class TestItemRepository:
    def test_load_maps_vocab_and_fills_missing(self, tmp_path):
        path = tmp_path / "items.jsonl"
        path.write_text(
            json.dumps({"item": "x", "title": "Red Shoes", "category": "shoes", "latent": [0.1, 0.2]}) + "\n"
            + json.dumps({"item": "other", "title": "Ignored", "category": "misc"}) + "\n"
        )
        catalog = ItemRepository(str(path)).load({"y": 0, "x": 1})
        assert catalog.title(1) == "Red Shoes"
        assert catalog.title(0) == "y"
        assert catalog.category_of(0) == "item"
        assert not catalog.has_latents

    def test_bad_row(self, tmp_path):
        path = tmp_path / "items.jsonl"
        path.write_text(json.dumps({"item": "x", "title": ""}) + "\n")
        with pytest.raises(DataFormatError) as exc:
            ItemRepository(str(path)).load({"x": 0})
        assert exc.value.line == 1

    def test_not_utf8(self, tmp_path):
        path = tmp_path / "items.jsonl"
        path.write_bytes(b'{"item": "x", "title": "\xe9t\xe9", "category": "c"}\n')
        with pytest.raises(DataFormatError):
            ItemRepository(str(path)).load({"x": 0})

    def test_duplicate_titles_rejected(self):
        with pytest.raises(DataFormatError):
            default_catalog({"Same": 0, "same ": 1})


class TestPreparedRepository:
    def test_save_and_load(self, tmp_path, tiny_dataset):
        repo = PreparedDatasetRepository(str(tmp_path / "prepared"))
        repo.save(tiny_dataset.clients, tiny_dataset.catalog)
        clients, catalog = repo.load()
        assert clients == tiny_dataset.clients
        assert catalog.n_items == tiny_dataset.n_items
        assert catalog.titles(range(5)) == tiny_dataset.catalog.titles(range(5))
        np.testing.assert_array_equal(catalog.latents, tiny_dataset.catalog.latents)

    def test_out_of_catalog_ids(self, tmp_path):
        directory = tmp_path / "prepared"
        directory.mkdir()
        (directory / "items.jsonl").write_text(
            "".join(json.dumps({"item": str(i), "title": f"t{i}", "category": "c"}) + "\n" for i in range(3))
        )
        (directory / "clients.jsonl").write_text(
            json.dumps({"user": "u", "train": [0, 1], "valid": 2, "test": 9}) + "\n"
        )
        with pytest.raises(DataFormatError):
            PreparedDatasetRepository(str(directory)).load()

    def test_train_id_outside_catalog(self, tmp_path):
        directory = tmp_path / "prepared"
        directory.mkdir()
        (directory / "items.jsonl").write_text(
            "".join(json.dumps({"item": str(i), "title": f"t{i}", "category": "c"}) + "\n" for i in range(3))
        )
        # seen 只列出合法 id，越界的只有 train
        (directory / "clients.jsonl").write_text(
            json.dumps({"user": "u", "train": [0, 7], "valid": 1, "test": 2, "seen": [0, 1, 2]}) + "\n"
        )
        with pytest.raises(DataFormatError) as exc:
            PreparedDatasetRepository(str(directory)).load()
        assert exc.value.line == 1

    def test_missing_directory(self, tmp_path):
        with pytest.raises(StorageError):
            PreparedDatasetRepository(str(tmp_path / "none")).load()


class TestPrepareDataset:
    def test_requires_interactions(self):
        with pytest.raises(ConfigError):
            prepare_dataset(DataConfig())

    def test_raw_log_end_to_end(self, tmp_path):
        path = tmp_path / "log.csv"
        rows = [f"u{u},i{i},{i}" for u in range(6) for i in range(6)]
        path.write_text("user,item,ts\n" + "\n".join(rows) + "\n")
        dataset = load_dataset(DataConfig(interactions=str(path), min_count=5))
        assert dataset.summary() == {"users": 6, "items": 6, "mean_length": 6.0}
        assert dataset.catalog.title(0) == "i0"

    def test_everything_filtered(self, tmp_path):
        path = tmp_path / "log.csv"
        path.write_text("user,item,ts\na,b,1\n")
        with pytest.raises(DataFormatError):
            prepare_dataset(DataConfig(interactions=str(path), min_count=5))
