"""Persistence: GITK containers, datasets, images and reports."""

from ghostkit.io.container import decode_container, encode_container, read_container, write_container
from ghostkit.io.dataset import load_acquisition, load_model, save_acquisition, save_model
from ghostkit.io.images import IntensityScale, load_phantom_image, read_pgm, write_pgm, write_png
from ghostkit.io.reports import RunManifest, read_csv, read_json, to_jsonable, write_csv, write_json

__all__ = [
    "IntensityScale",
    "RunManifest",
    "decode_container",
    "encode_container",
    "load_acquisition",
    "load_model",
    "load_phantom_image",
    "read_container",
    "read_csv",
    "read_json",
    "read_pgm",
    "save_acquisition",
    "save_model",
    "to_jsonable",
    "write_container",
    "write_csv",
    "write_json",
    "write_png",
]
