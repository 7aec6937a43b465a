"""Deterministic JSON reports, CSV tables and run manifests."""

import csv
import dataclasses
import hashlib
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from ghostkit.errors import ContainerError

PathLike = Union[str, Path]
MANIFEST_NAME = "manifest.json"


def to_jsonable(value: Any) -> Any:
    """Convert configs, enums and numpy values into plain JSON types.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
    """
    if isinstance(value, Enum):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return to_jsonable({f.name: getattr(value, f.name) for f in dataclasses.fields(value)})
    if isinstance(value, Mapping):
        return {str(to_jsonable(k)): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(payload: Any) -> str:
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2) + "\n"


def write_json(path: PathLike, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding="utf-8")
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ContainerError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ContainerError(f"{path}: expected a JSON object")
    return data


def write_csv(path: PathLike, rows: Sequence[Mapping[str, Any]], fieldnames: Optional[List[str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: to_jsonable(row.get(k)) for k in fieldnames})
    return path


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def trace_rows(trace: Any) -> List[Dict[str, Any]]:
    """Per-epoch rows of a training trace."""
    return [
        {"epoch": epoch, "train_loss": train, "data_loss": data, "cv_loss": cv}
        for epoch, (train, data, cv) in enumerate(zip(trace.train_loss, trace.data_loss, trace.cv_loss))
    ]


def sha256_file(path: PathLike) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclasses.dataclass
class RunManifest:
    """Everything needed to repeat a CLI run: command, parameters and outputs."""
    command: str
    parameters: Dict[str, Any]
    outputs: Dict[str, str] = dataclasses.field(default_factory=dict)  # file name -> sha256
    version: str = ""
    extras: Dict[str, Any] = dataclasses.field(default_factory=dict)  # e.g. PGM intensity scales

    @classmethod
    def start(cls, command: str, parameters: Dict[str, Any]) -> "RunManifest":
        from ghostkit import __version__

        return cls(command=command, parameters=dict(parameters), version=__version__)

    def record(self, paths: Iterable[PathLike], root: PathLike) -> None:
        root = Path(root)
        for path in paths:
            path = Path(path)
            self.outputs[str(path.relative_to(root))] = sha256_file(path)

    def write(self, directory: PathLike) -> Path:
        return write_json(Path(directory) / MANIFEST_NAME, self)

    @classmethod
    def read(cls, path: PathLike) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        data = read_json(path)
        try:
            return cls(
                command=data["command"],
                parameters=data["parameters"],
                outputs=data.get("outputs", {}),
                version=data.get("version", ""),
                extras=data.get("extras", {}),
            )
        except KeyError as exc:
            raise ContainerError(f"{path}: manifest is missing {exc}") from exc
