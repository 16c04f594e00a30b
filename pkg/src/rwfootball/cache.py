"""Content-addressed on-disk cache for fitted models and prediction arrays."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .gbt import BoostedModel, model_from_dict, model_to_dict


def content_key(obj) -> str:
    """sha256 of the canonical JSON encoding of ``obj``."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


class Cache:
    """Stores objects under ``root/<kind>/<key[:2]>/<key>``; ``root=None`` disables it."""

    def __init__(self, root=None):
        self.root = None if root is None else Path(root)

    def _path(self, kind: str, key: str, suffix: str) -> Path:
        return self.root / kind / key[:2] / f"{key}{suffix}"

    def _write(self, path: Path, write):
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + f".tmp{os.getpid()}")
        write(tmp)
        os.replace(tmp, path)

    def get_model(self, key: str) -> BoostedModel | None:
        if self.root is None:
            return None
        path = self._path("models", key, ".json")
        if not path.exists():
            return None
        with open(path) as fh:
            return model_from_dict(json.load(fh))

    def put_model(self, key: str, model: BoostedModel) -> None:
        if self.root is None:
            return

        def write(p):
            with open(p, "w") as fh:
                json.dump(model_to_dict(model), fh)

        self._write(self._path("models", key, ".json"), write)

    def get_array(self, key: str) -> np.ndarray | None:
        if self.root is None:
            return None
        path = self._path("predictions", key, ".npy")
        return np.load(path) if path.exists() else None

    def put_array(self, key: str, arr: np.ndarray) -> None:
        if self.root is None:
            return

        def write(p):
            with open(p, "wb") as fh:
                np.save(fh, arr)

        self._write(self._path("predictions", key, ".npy"), write)
