import logging
import os
import struct
from typing import Dict

import numpy as np

from pkg.core.errors import DataFormatError, StorageError
from pkg.model.params import ParamSet, backbone_of

logger = logging.getLogger(__name__)

MAGIC = b"FSQL"
FORMAT_VERSION = 1


def encode_checkpoint(params: ParamSet) -> bytes:
    """
    序列化为二进制检查点

    布局：magic "FSQL"，u32 版本，随后依次是各张量：u32 名字长度、
    UTF-8 名字、u32 秩、u32 各维大小、小端 f64 数据。只包含命名张量。
    """
    chunks = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    for name in params:
        value = params[name]
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}I", *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return b"".join(chunks)


def decode_checkpoint(blob: bytes, source: str = "<bytes>") -> ParamSet:
    """
    Raises:
        DataFormatError: magic、版本或长度不对
        StorageError: 张量名不是 UTF-8
    """
    if blob[:4] != MAGIC:
        raise DataFormatError("not a checkpoint (bad magic)", source)
    offset = 4
    try:
        (version,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if version != FORMAT_VERSION:
            raise DataFormatError(f"unsupported checkpoint version {version}", source)
        tensors: Dict[str, np.ndarray] = {}
        while offset < len(blob):
            (name_len,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            try:
                name = blob[offset:offset + name_len].decode("utf-8")
            except UnicodeDecodeError:
                raise StorageError(f"corrupt tensor name at byte {offset}: {source}") from None
            offset += name_len
            (rank,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            shape = struct.unpack_from(f"<{rank}I", blob, offset)
            offset += 4 * rank
            size = int(np.prod(shape)) if rank else 1
            if offset + 8 * size > len(blob):
                raise DataFormatError(f"truncated payload for tensor {name}", source)
            tensors[name] = np.frombuffer(blob, dtype="<f8", count=size, offset=offset).reshape(shape).astype(np.float64)
            offset += 8 * size
    except struct.error as e:
        raise DataFormatError(f"truncated checkpoint: {e}", source) from None
    return ParamSet(backbone_of(tensors), tensors)


class CheckpointRepository:
    """ParamSet 的二进制检查点文件"""

    def __init__(self, path: str):
        self.path = path

    def save(self, params: ParamSet) -> None:
        try:
            directory = os.path.dirname(self.path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(self.path, "wb") as f:
                f.write(encode_checkpoint(params))
        except OSError as e:
            raise StorageError(f"cannot write checkpoint {self.path}: {e}") from e
        logger.info(f"Saved {params} to {self.path}")

    def load(self) -> ParamSet:
        if not os.path.isfile(self.path):
            raise StorageError(f"checkpoint not found: {self.path}")
        try:
            with open(self.path, "rb") as f:
                blob = f.read()
        except OSError as e:
            raise StorageError(f"cannot read checkpoint {self.path}: {e}") from e
        params = decode_checkpoint(blob, self.path)
        logger.info(f"Loaded {params} from {self.path}")
        return params
