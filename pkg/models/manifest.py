"""
Run manifest written next to every command's outputs
"""
import hashlib
import json
import time
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from pydantic import BaseModel, Field

from version import __version__


def file_digest(path: Union[str, Path]) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            sha.update(chunk)
    return sha.hexdigest()


def digest_files(paths: Iterable[Union[str, Path]]) -> Dict[str, str]:
    """sha256 per existing file; directories are walked in sorted order"""
    digests: Dict[str, str] = {}
    for path in paths:
        path = Path(path)
        if path.is_dir():
            for child in sorted(p for p in path.rglob("*") if p.is_file()):
                digests[str(child)] = file_digest(child)
        elif path.is_file():
            digests[str(path)] = file_digest(path)
    return digests


class RunManifest(BaseModel):
    command: List[str]
    config: Dict[str, Any] = Field(default_factory=dict)
    input_digests: Dict[str, str] = Field(default_factory=dict)
    output_digests: Dict[str, str] = Field(default_factory=dict)
    tool_version: str = __version__
    duration_seconds: float = 0.0

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n")
        return path


class RunTimer:
    """Context manager measuring wall-clock duration of a command"""

    def __init__(self):
        self.started: Optional[float] = None
        self.elapsed = 0.0

    def __enter__(self) -> "RunTimer":
        self.started = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.elapsed = time.perf_counter() - self.started
