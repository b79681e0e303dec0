import struct

import numpy as np
import pytest

from pkg.core.errors import ConfigError, DataFormatError, ShapeError, StorageError
from pkg.model.params import ITEM_EMBEDDINGS, MAX_LEN, ParamSet, param_shapes
from pkg.repository.checkpoint_repository import MAGIC, CheckpointRepository, decode_checkpoint, encode_checkpoint


class TestParamSet:
    def test_initialize_is_seeded(self):
        a = ParamSet.initialize("attention", 10, dim=4, seed=3)
        b = ParamSet.initialize("attention", 10, dim=4, seed=3)
        c = ParamSet.initialize("attention", 10, dim=4, seed=4)
        assert a.array_equal(b)
        assert not a.array_equal(c)

    def test_padding_row_zero(self):
        params = ParamSet.initialize("gru", 10, dim=4, seed=3)
        assert params.padding_id == 10
        np.testing.assert_array_equal(params[ITEM_EMBEDDINGS][10], np.zeros(4))

    def test_shapes(self):
        shapes = param_shapes("gru", 10, 4)
        assert shapes[ITEM_EMBEDDINGS] == (11, 4)
        assert shapes["gru.W_z"] == (4, 4)
        assert shapes["gru.b_h"] == (4,)

    def test_tensors_are_read_only(self):
        params = ParamSet.initialize("gru", 10, dim=4)
        with pytest.raises(ValueError):
            params["gru.W_z"][0, 0] = 1.0

    def test_wrong_shape(self):
        params = ParamSet.initialize("gru", 10, dim=4)
        with pytest.raises(ShapeError):
            params.replace({"gru.W_z": np.zeros((3, 3))})

    def test_wrong_names(self):
        with pytest.raises(ConfigError):
            ParamSet("gru", {ITEM_EMBEDDINGS: np.zeros((3, 2))})

    def test_gru_rejects_other_window(self):
        with pytest.raises(ConfigError):
            ParamSet.initialize("gru", 10, dim=4, max_len=12)
        assert ParamSet.initialize("gru", 10, dim=4).max_len == MAX_LEN


class TestCheckpoint:
    @pytest.mark.parametrize("kind, max_len", [("gru", MAX_LEN), ("attention", 12)])
    def test_save_and_load_bitwise(self, tmp_path, kind, max_len):
        params = ParamSet.initialize(kind, 15, dim=6, seed=8, max_len=max_len)
        repo = CheckpointRepository(str(tmp_path / "ckpt" / "checkpoint.fsql"))
        repo.save(params)
        loaded = repo.load()
        assert loaded.backbone_kind == kind
        assert loaded.array_equal(params)
        assert loaded.max_len == max_len

    def test_layout_header(self):
        blob = encode_checkpoint(ParamSet.initialize("gru", 5, dim=2))
        assert blob[:4] == MAGIC
        assert struct.unpack_from("<I", blob, 4)[0] == 1

    def test_bad_magic(self):
        blob = encode_checkpoint(ParamSet.initialize("gru", 5, dim=2))
        with pytest.raises(DataFormatError):
            decode_checkpoint(b"NOPE" + blob[4:])

    def test_bad_version(self):
        blob = encode_checkpoint(ParamSet.initialize("gru", 5, dim=2))
        with pytest.raises(DataFormatError):
            decode_checkpoint(MAGIC + struct.pack("<I", 9) + blob[8:])

    @pytest.mark.parametrize("cut", [6, 13, -3])
    def test_truncated(self, cut):
        blob = encode_checkpoint(ParamSet.initialize("gru", 5, dim=2))
        with pytest.raises(DataFormatError):
            decode_checkpoint(blob[:cut])

    def test_tensor_name_not_utf8(self):
        blob = bytearray(encode_checkpoint(ParamSet.initialize("gru", 5, dim=2)))
        # 第一个张量名从第 12 字节开始
        blob[12] = 0xFF
        with pytest.raises(StorageError):
            decode_checkpoint(bytes(blob))

    def test_corrupt_file_on_disk(self, tmp_path):
        path = tmp_path / "bad.fsql"
        blob = bytearray(encode_checkpoint(ParamSet.initialize("attention", 5, dim=2)))
        blob[12:14] = b"\xc3\x28"
        path.write_bytes(bytes(blob))
        with pytest.raises(StorageError):
            CheckpointRepository(str(path)).load()

    def test_missing_file(self, tmp_path):
        with pytest.raises(StorageError):
            CheckpointRepository(str(tmp_path / "none.fsql")).load()
