"""Exception tree and process exit codes shared by every layer."""


class ExitCode:
    SUCCESS = 0
    CONFIG = 2
    IO = 3
    DIVERGED = 4


class FedSeqError(Exception):
    """项目内所有错误的基类"""
    exit_code: int = 1


class ConfigError(FedSeqError):
    """配置或参数校验错误"""
    exit_code = ExitCode.CONFIG


class DataFormatError(FedSeqError):
    """输入文件格式错误（带行号）"""
    exit_code = ExitCode.IO

    def __init__(self, message: str, path: str = "", line: int = 0):
        self.path = path
        self.line = line
        location = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
        super().__init__(f"{location}{message}")


class StorageError(FedSeqError):
    """文件读写失败"""
    exit_code = ExitCode.IO


class NumericalError(FedSeqError):
    """出现 NaN/Inf"""
    exit_code = ExitCode.DIVERGED


class DivergenceError(NumericalError):
    """全局模型发散或整轮客户端全部失败"""


class ContractError(FedSeqError):
    """调用方违反前置条件"""


class ShapeError(ContractError):
    """张量形状不匹配"""

    def __init__(self, op: str, *shapes):
        self.shapes = shapes
        joined = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: shape mismatch {joined}")


class IndexRangeError(ContractError):
    """id 越界"""

    def __init__(self, what: str, value: int, upper: int):
        self.value = value
        super().__init__(f"{what} id {value} out of range [0, {upper}]")


class ViewGenerationError(FedSeqError):
    """视图生成失败（调用方回退到规则生成）"""


class ViewParseError(ViewGenerationError):
    """LLM 输出中没有匹配到任何商品标题"""
