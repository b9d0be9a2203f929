"""Checkpoint directories: ``manifest.json`` plus ``params.bin``.

``params.bin`` is the concatenation of every parameter as raw little-endian
float64 values in manifest order; the manifest records name, shape and
element offset for each, the encoder config, the vocabulary and training
metadata.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Vocabulary
from .encoder import EncoderConfig
from .extraction import ExtractionModel
from .matching import MatchingModel

FORMAT_VERSION = 1
DTYPE = "<f8"
MODELS = {"extract": ExtractionModel, "match": MatchingModel}


@dataclass
class Checkpoint:
    model: ExtractionModel | MatchingModel
    vocab: Vocabulary
    metadata: dict = field(default_factory=dict)

    @property
    def stage(self):
        return self.model.stage

    def save(self, path):
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        entries, offset = [], 0
        with open(path / "params.bin", "wb") as f:
            for name, p in self.model.params.items():
                data = np.ascontiguousarray(p.data, dtype=DTYPE)
                f.write(data.tobytes())
                entries.append({"name": name, "shape": list(p.shape), "offset": offset})
                offset += data.size
        manifest = {
            "format_version": FORMAT_VERSION,
            "stage": self.stage,
            "dtype": DTYPE,
            "encoder_config": self.model.config.to_dict(),
            "ablation": getattr(self.model, "ablation", None),
            "vocabulary": self.vocab.itos,
            "metadata": self.metadata,
            "params": entries,
        }
        (path / "manifest.json").write_text(json.dumps(manifest, indent=1))
        return path

    @classmethod
    def load(cls, path):
        path = Path(path)
        manifest = json.loads((path / "manifest.json").read_text())
        if manifest.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {manifest.get('format_version')}")
        stage = manifest["stage"]
        if stage not in MODELS:
            raise ValueError(f"unknown checkpoint stage {stage!r}")
        config = EncoderConfig(**manifest["encoder_config"])
        if stage == "match":
            model = MatchingModel(config, ablation=manifest.get("ablation"))
        else:
            model = ExtractionModel(config)
        flat = np.fromfile(path / "params.bin", dtype=manifest["dtype"])
        names = {e["name"] for e in manifest["params"]}
        if names != set(model.params):
            raise ValueError("checkpoint parameters do not match the model layout")
        for e in manifest["params"]:
            p = model.params[e["name"]]
            shape = tuple(e["shape"])
            if shape != p.shape:
                raise ValueError(f"shape mismatch for {e['name']}: {shape} vs {p.shape}")
            size = int(np.prod(shape))
            p.data[...] = flat[e["offset"] : e["offset"] + size].reshape(shape)
        return cls(model, Vocabulary.from_list(manifest["vocabulary"]), manifest.get("metadata", {}))
