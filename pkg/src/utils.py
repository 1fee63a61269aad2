import gzip
import bz2
import io
import lzma
import brotli
import json
import yaml
from pathlib import Path
from typing import Any


class _BrotliWriter(io.StringIO):
    """Buffers text and writes it brotli compressed on close."""

    def __init__(self, file: Path):
        super().__init__()
        self._file = file

    def close(self):
        if not self.closed:
            with open(self._file, "wb") as fh:
                fh.write(brotli.compress(self.getvalue().encode("utf-8")))
        super().close()


def open_file(file_path: str | Path, mode: str = "rt"):
    """Opens a file path which can be compressed or uncompressed

    Supports the following extensions and algorithms:

    * .gz - gzip
    * .bz2 - bz2
    * .xz - lzma
    * .br - brotli (text mode only)

    """
    file = Path(file_path)
    if file.suffix == ".gz":
        return gzip.open(file, mode)
    elif file.suffix == ".bz2":
        return bz2.open(file, mode)
    elif file.suffix == ".xz":
        return lzma.open(file, mode)
    elif file.suffix == ".br":
        if "r" in mode:
            with open(file, "rb") as fh:
                return io.StringIO(brotli.decompress(fh.read()).decode("utf-8"))
        return _BrotliWriter(file)
    return open(file, mode)


def slurp_json(file_path: str | Path, mode: str = "rt") -> Any:
    with open_file(file_path=file_path, mode=mode) as fh:
        return json.load(fh)


def load_config_file(path: str | Path) -> dict:
    """Load configuration from a YAML or JSON file.

    Raises:
        FileNotFoundError: The path does not exist
        ValueError: Unsupported suffix or the document is not a mapping
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    suffixes = [s.lower() for s in path.suffixes]
    with open_file(path) as fh:
        if ".yaml" in suffixes or ".yml" in suffixes:
            data = yaml.safe_load(fh)
        elif ".json" in suffixes:
            data = json.load(fh)
        else:
            raise ValueError(f"Unsupported config format: {path.suffix}")
    if not isinstance(data, dict):
        raise ValueError(f"Config file {path} must contain a mapping at the top level")
    return data
