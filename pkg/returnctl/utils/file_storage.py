"""
Result file storage with atomic writes (temp file in the target directory, then rename)
"""
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Union

import pandas as pd

PathLike = Union[str, Path]


def write_bytes_atomic(data: bytes, path: PathLike) -> Path:
    """Write bytes so that readers see either the old file or the complete new one"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    return path


def write_text_atomic(text: str, path: PathLike) -> Path:
    return write_bytes_atomic(text.encode("utf-8"), path)


def write_json_atomic(payload: Any, path: PathLike) -> Path:
    return write_text_atomic(json.dumps(payload, indent=2, sort_keys=True) + "\n", path)


def write_frame_atomic(frame: pd.DataFrame, path: PathLike) -> Path:
    """CSV export of a DataFrame (no index column)"""
    return write_text_atomic(frame.to_csv(index=False), path)

