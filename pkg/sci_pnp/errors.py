"""Exception hierarchy with machine-parsable error codes."""

from __future__ import annotations


class SciPnpError(Exception):
    """所有可预期错误的基类（携带错误码）"""

    code: str = "E_INTERNAL"

    def __init__(self, message: str, code: str | None = None) -> None:
        super().__init__(message)
        if code is not None:
            self.code = code

    @property
    def message(self) -> str:
        return str(self.args[0]) if self.args else ""

    def one_line(self) -> str:
        """单行输出: `CODE: message`"""
        text = self.message.replace("\n", " ").strip()
        return f"{self.code}: {text}"


class ShapeMismatchError(SciPnpError, ValueError):
    """维度不一致"""

    code = "E_SHAPE_MISMATCH"


class CfaError(SciPnpError, ValueError):
    """CFA / Bayer 相关错误（奇数尺寸、缺少 CFA、不支持的排列）"""

    code = "E_CFA"


class ConfigError(SciPnpError, ValueError):
    """配置非法"""

    code = "E_CONFIG"


class MissingMasksError(SciPnpError, FileNotFoundError):
    """缺少掩模文件"""

    code = "E_MISSING_MASKS"


class MissingFileError(SciPnpError, FileNotFoundError):
    """缺少输入文件"""

    code = "E_MISSING_FILE"


class CorruptFileError(SciPnpError, ValueError):
    """张量文件 / sidecar 损坏"""

    code = "E_CORRUPT_FILE"


class DigestMismatchError(SciPnpError, ValueError):
    """掩模与测量的摘要不一致"""

    code = "E_DIGEST_MISMATCH"


class EmptyDatasetError(SciPnpError, ValueError):
    """数据集为空"""

    code = "E_EMPTY_DATASET"
