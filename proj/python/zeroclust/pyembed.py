"""Embedding extraction from cropped images into bank directories.

Model libraries (torch, transformers, open_clip) are imported only when an
encoder is built, so reading and writing banks stays lightweight.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from . import zseb

KNOWN_MODELS = {
    "clip": ("openai/clip-vit-large-patch14", 768),
    "siglip": ("google/siglip-base-patch16-224", 768),
    "dinov2": ("facebook/dinov2-giant", 1536),
    "dinov3": ("facebook/dinov3-vith16plus-pretrain-lvd1689m", 1280),
    "bioclip2": ("hf-hub:imageomics/bioclip-2", 768),
}

CSV_COLUMNS = ("image_path", "image_id", "species", "taxon_class", "source_code", "location_id", "validated")
SKIPPED_FILE = "skipped.json"


class Encoder(Protocol):
    dim: int
    preprocessing: dict

    def __call__(self, images: Sequence) -> np.ndarray: ...


@dataclass
class ExtractionJob:
    model_id: str
    images: Path
    labels_csv: Path
    output: Path
    batch_size: int = 32
    device: str = "cpu"
    model_tag: str = ""
    expected_dim: int | None = None
    encoder_factory: Callable[["ExtractionJob"], Encoder] | None = field(default=None, repr=False)

    def checkpoint(self) -> str:
        return KNOWN_MODELS.get(self.model_id, (self.model_id, None))[0]

    def width(self) -> int | None:
        if self.expected_dim is not None:
            return self.expected_dim
        return KNOWN_MODELS.get(self.model_id, (None, None))[1]


class ExtractionError(RuntimeError):
    pass


def _parse_bool(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "y", "t")


def read_labels(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ExtractionError(f"label CSV is missing columns: {', '.join(missing)}")
        rows = list(reader)
    seen: set[str] = set()
    for r in rows:
        if r["image_id"] in seen:
            raise ExtractionError(f"duplicate image_id '{r['image_id']}'")
        seen.add(r["image_id"])
    names = [Path(r["image_path"]).name for r in rows]
    if len(set(names)) != len(names):
        raise ExtractionError("duplicate image filenames in label CSV")
    return sorted(rows, key=lambda r: r["image_id"])


class TransformersEncoder:
    """Image embeddings from a Hugging Face checkpoint (or open_clip for hf-hub ids)."""

    def __init__(self, checkpoint: str, device: str = "cpu"):
        import torch

        self._torch = torch
        self.device = device
        if checkpoint.startswith("hf-hub:"):
            import open_clip

            model, _, transform = open_clip.create_model_and_transforms(checkpoint)
            self._model = model.to(device).eval()
            self._transform = transform
            self._kind = "open_clip"
            self.preprocessing = {"library": "open_clip", "transform": repr(transform)}
        else:
            from transformers import AutoImageProcessor, AutoModel

            self._processor = AutoImageProcessor.from_pretrained(checkpoint)
            self._model = AutoModel.from_pretrained(checkpoint).to(device).eval()
            self._kind = "transformers"
            self.preprocessing = {"library": "transformers", "processor": self._processor.to_dict()}
        self.preprocessing["checkpoint"] = checkpoint
        self.dim = -1

    def __call__(self, images):
        torch = self._torch
        with torch.no_grad():
            if self._kind == "open_clip":
                batch = torch.stack([self._transform(im) for im in images]).to(self.device)
                out = self._model.encode_image(batch)
            else:
                inputs = self._processor(images=list(images), return_tensors="pt").to(self.device)
                if hasattr(self._model, "get_image_features"):
                    out = self._model.get_image_features(**inputs)
                else:
                    hidden = self._model(**inputs)
                    pooled = getattr(hidden, "pooler_output", None)
                    out = pooled if pooled is not None else hidden.last_hidden_state[:, 0]
        arr = out.float().cpu().numpy()
        self.dim = arr.shape[1]
        return arr


def _default_encoder(job: ExtractionJob) -> Encoder:
    return TransformersEncoder(job.checkpoint(), job.device)


def _load_image(path: Path):
    from PIL import Image

    with Image.open(path) as im:
        return im.convert("RGB")


def extract(job: ExtractionJob) -> Path:
    rows = read_labels(job.labels_csv)
    encoder = (job.encoder_factory or _default_encoder)(job)
    width = job.width()

    kept: list[dict] = []
    skipped: list[dict] = []
    chunks: list[np.ndarray] = []
    batch_rows: list[dict] = []
    batch_images: list = []

    def flush():
        if not batch_images:
            return
        out = np.asarray(encoder(batch_images), dtype=np.float32)
        if width is not None and out.shape[1] != width:
            raise ExtractionError(f"{job.model_id} produced dim {out.shape[1]}, expected {width}")
        chunks.append(out)
        kept.extend(batch_rows)
        batch_rows.clear()
        batch_images.clear()

    for r in rows:
        path = Path(r["image_path"])
        if not path.is_absolute():
            path = Path(job.images) / path
        try:
            image = _load_image(path)
        except Exception as e:  # undecodable or missing
            skipped.append({"image_id": r["image_id"], "image_path": str(r["image_path"]), "reason": str(e)})
            continue
        batch_rows.append(r)
        batch_images.append(image)
        if len(batch_images) >= job.batch_size:
            flush()
    flush()
    if not chunks:
        raise ExtractionError("no decodable images")

    records = [{
        "image_id": r["image_id"],
        "species": r["species"],
        "taxon_class": r["taxon_class"],
        "source_code": r.get("source_code") or "",
        "location_id": r.get("location_id") or None,
        "validated": _parse_bool(r.get("validated", "true")),
    } for r in kept]
    sidecar = {
        "model_tag": job.model_tag or job.model_id,
        "model_id": job.model_id,
        "preprocessing": getattr(encoder, "preprocessing", {}),
    }
    out = zseb.write_bank(job.output, np.concatenate(chunks), records, sidecar)
    (out / SKIPPED_FILE).write_text(json.dumps(skipped, indent=2) + "\n", encoding="utf-8")
    return out


def main(argv: Sequence[str] | None = None) -> int:
    import argparse

    p = argparse.ArgumentParser(prog="zeroclust-embed", description="Extract image embeddings into a bank.")
    p.add_argument("--model", required=True, help=f"one of {', '.join(KNOWN_MODELS)} or a checkpoint id")
    p.add_argument("--images", required=True, type=Path)
    p.add_argument("--labels", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--device", default="cpu")
    p.add_argument("--model-tag", default="")
    a = p.parse_args(argv)
    out = extract(ExtractionJob(a.model, a.images, a.labels, a.out, a.batch_size, a.device, a.model_tag))
    print(f"wrote {out} (verify_format: {zseb.verify_format(out)})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
