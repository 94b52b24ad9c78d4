"""
内容哈希工具
"""

import hashlib
from pathlib import Path


def git_blob_hash(content: bytes) -> str:
    """计算 git 风格的 blob 哈希（sha1("blob <len>\\0" + content)）"""
    header = f"blob {len(content)}\0".encode("ascii")
    return hashlib.sha1(header + content).hexdigest()


def file_blob_hash(path: Path) -> str:
    """计算文件的 git 风格哈希"""
    return git_blob_hash(Path(path).read_bytes())


def short_hash(text: str, length: int = 12) -> str:
    """文本的短哈希，用作运行ID"""
    return hashlib.sha1(text.encode("utf-8")).hexdigest()[:length]
