"""On-disk datasets (phantom, masks, clean and noisy buckets) and model checkpoints."""

import logging
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from ghostkit.acquisition.masks import AcquisitionSet, BucketVector, MaskSet
from ghostkit.errors import ContainerError, ShapeError
from ghostkit.io.container import read_container, write_container
from ghostkit.models.config import Model, ModelConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PHANTOM_FILE = "phantom.gitk"
MASKS_FILE = "masks.gitk"
CLEAN_FILE = "clean.gitk"
NOISY_FILE = "noisy.gitk"


def save_acquisition(directory: PathLike, acquisition: AcquisitionSet) -> List[Path]:
    """Write the four dataset containers; returns the written paths.

    Every container carries the acquisition metadata; files without a
    counterpart (no phantom, no clean buckets) are skipped.
    """
    directory = Path(directory)
    meta = dict(acquisition.metadata)
    written = []
    if acquisition.phantom is not None:
        written.append(write_container(directory / PHANTOM_FILE, acquisition.phantom, {**meta, "content": "phantom"}))
    written.append(write_container(directory / MASKS_FILE, acquisition.masks.masks, {**meta, "content": "masks"}))
    if acquisition.buckets.clean is not None:
        written.append(
            write_container(directory / CLEAN_FILE, acquisition.buckets.clean, {**meta, "content": "clean buckets"})
        )
    written.append(
        write_container(directory / NOISY_FILE, acquisition.buckets.values, {**meta, "content": "noisy buckets"})
    )
    logger.debug("saved acquisition to %s (%d files)", directory, len(written))
    return written


def load_acquisition(directory: PathLike) -> AcquisitionSet:
    """Read a dataset directory written by :func:`save_acquisition`."""
    directory = Path(directory)
    masks_path = directory / MASKS_FILE
    noisy_path = directory / NOISY_FILE
    for path in (masks_path, noisy_path):
        if not path.is_file():
            raise ContainerError(f"dataset file {path} is missing")
    masks, metadata = read_container(masks_path)
    noisy, _ = read_container(noisy_path)
    clean: Optional[np.ndarray] = None
    if (directory / CLEAN_FILE).is_file():
        clean, _ = read_container(directory / CLEAN_FILE)
    phantom: Optional[np.ndarray] = None
    if (directory / PHANTOM_FILE).is_file():
        phantom, _ = read_container(directory / PHANTOM_FILE)
    metadata.pop("content", None)
    try:
        return AcquisitionSet(MaskSet(masks), BucketVector(noisy, clean), phantom, metadata)
    except ShapeError as exc:
        raise ContainerError(f"{directory}: inconsistent dataset ({exc})") from exc


def save_model(path: PathLike, model: Model) -> Path:
    """Store all parameters and buffers in one float64 container."""
    entries: List[Dict[str, Any]] = []
    chunks = []
    for name, array in list(zip(model.names, model.parameters)) + sorted(model.buffers.items()):
        entries.append({"name": name, "shape": list(array.shape), "buffer": name in model.buffers})
        chunks.append(np.asarray(array, dtype=np.float64).reshape(-1))
    flat = np.concatenate(chunks) if chunks else np.zeros(0)
    return write_container(path, flat, {"content": "model", "config": asdict(model.config), "entries": entries})


def load_model(path: PathLike) -> Model:
    flat, metadata = read_container(path)
    if metadata.get("content") != "model":
        raise ContainerError(f"{path}: not a model checkpoint")
    try:
        config = ModelConfig(**metadata["config"])
        entries = metadata["entries"]
    except (KeyError, TypeError) as exc:
        raise ContainerError(f"{path}: malformed model metadata ({exc})") from exc
    names: List[str] = []
    parameters: List[np.ndarray] = []
    buffers: Dict[str, np.ndarray] = {}
    offset = 0
    for entry in entries:
        size = int(np.prod(entry["shape"], dtype=np.int64))
        if offset + size > flat.size:
            raise ContainerError(f"{path}: checkpoint payload is shorter than its entries")
        array = flat[offset:offset + size].reshape(entry["shape"])
        offset += size
        if entry["buffer"]:
            buffers[entry["name"]] = array
        else:
            names.append(entry["name"])
            parameters.append(array)
    if offset != flat.size:
        raise ContainerError(f"{path}: checkpoint payload has {flat.size - offset} unused values")
    return Model(config, names, parameters, buffers)
