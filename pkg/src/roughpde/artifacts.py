"""
Run artifacts: deterministic names, provenance headers and locked writes.

Every file is named <subcommand>-<confighash[:12]>-s<seed><suffix>.<ext> and
carries a header with subcommand, config hash and seed. The header's
timestamp is the only field that varies between identical runs and is not
part of the hash.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

import numpy as np
import pandas as pd
from filelock import FileLock

from .grid import Field, snapshot_bytes
from .logs import log

LOCK_TIMEOUT = 60


def _atomic_write(path: Path, data: bytes) -> Path:
    """Write under a file lock via a temp file, so readers never see a partial file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with FileLock(str(path) + ".lock", timeout=LOCK_TIMEOUT):
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(data)
        tmp.replace(path)
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


def canonical_json(data: Any) -> str:
    return json.dumps(_jsonable(data), sort_keys=True, separators=(",", ":"))


def config_hash(config: Dict[str, Any]) -> str:
    """sha256 of the canonical config, output section excluded."""
    hashed = {key: value for key, value in config.items() if key != "output"}
    return hashlib.sha256(canonical_json(hashed).encode("utf-8")).hexdigest()


def artifact_name(subcommand: str, chash: str, seed: int, ext: str, suffix: str = "") -> str:
    return f"{subcommand}-{chash[:12]}-s{seed}{suffix}.{ext}"


class ArtifactWriter:
    """Single-writer output for one (subcommand, config, seed) run."""

    def __init__(self, out_dir, subcommand: str, chash: str, seed: int):
        self.out_dir = Path(out_dir)
        self.subcommand = subcommand
        self.chash = chash
        self.seed = seed
        self.written = []

    def header(self) -> Dict[str, Any]:
        return {
            "subcommand": self.subcommand,
            "config_hash": self.chash,
            "seed": self.seed,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        }

    def path(self, ext: str, suffix: str = "") -> Path:
        return self.out_dir / artifact_name(self.subcommand, self.chash, self.seed, ext, suffix)

    def _write(self, path: Path, data: bytes) -> Path:
        _atomic_write(path, data)
        self.written.append(path)
        log(f"wrote {path}")
        return path

    def write_json(self, payload: Dict[str, Any], suffix: str = "") -> Path:
        document = {"header": self.header(), **_jsonable(payload)}
        text = json.dumps(document, indent=2, sort_keys=True) + "\n"
        return self._write(self.path("json", suffix), text.encode("utf-8"))

    def write_ndjson(self, records: Iterable[Dict[str, Any]], suffix: str = "") -> Path:
        lines = [json.dumps({"header": self.header()}, sort_keys=True)]
        lines.extend(canonical_json(record) for record in records)
        return self._write(self.path("ndjson", suffix), ("\n".join(lines) + "\n").encode("utf-8"))

    def write_csv(self, frame: pd.DataFrame, suffix: str = "") -> Path:
        header = self.header()
        comment = "# " + " ".join(f"{key}={header[key]}" for key in ("subcommand", "config_hash", "seed", "timestamp"))
        text = comment + "\n" + frame.to_csv(index=False, float_format="%.17g")
        return self._write(self.path("csv", suffix), text.encode("utf-8"))

    def write_snapshot(self, field: Field, suffix: str = "") -> Path:
        return self._write(self.path("rpf", suffix), snapshot_bytes(field))


def read_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def read_ndjson(path) -> list:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines if line.strip()]


def save_json(path, payload: Dict[str, Any], header: Optional[Dict[str, Any]] = None) -> Path:
    """Locked JSON write outside a run, e.g. a solver result next to its snapshot."""
    document = {"header": header or {}, **_jsonable(payload)}
    text = json.dumps(document, indent=2, sort_keys=True) + "\n"
    return _atomic_write(Path(path), text.encode("utf-8"))
