# app/checkpoint.py
"""
Checkpoint container.

File layout: MAGIC, little-endian u64 header length, JSON header
(version, metadata, array directory), then raw float64 arrays in directory
order. Header keys are sorted, so equal content gives equal bytes.
"""
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from app.envs import RunningStat
from app.errors import CheckpointError, CheckpointVersionError
from app.fingerprint import EvaluatorParams
from app.hypergen import GeneratorParams

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MAGIC = b"GGPCKPT\x00"
LENGTH = struct.Struct("<Q")

Sections = Dict[str, Dict[str, np.ndarray]]


@dataclass
class Checkpoint:
    metadata: Dict[str, Any]
    sections: Sections = field(default_factory=dict)
    version: int = FORMAT_VERSION


def save_checkpoint(path: Union[str, Path], checkpoint: Checkpoint) -> Path:
    path = Path(path)
    directory, blobs, offset = [], [], 0
    for section in sorted(checkpoint.sections):
        for name in sorted(checkpoint.sections[section]):
            array = np.ascontiguousarray(checkpoint.sections[section][name], dtype="<f8")
            directory.append({"section": section, "name": name, "shape": list(array.shape), "offset": offset})
            blob = array.tobytes()
            blobs.append(blob)
            offset += len(blob)
    header = json.dumps(
        {"version": checkpoint.version, "metadata": checkpoint.metadata, "arrays": directory},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as fh:
            fh.write(MAGIC)
            fh.write(LENGTH.pack(len(header)))
            fh.write(header)
            for blob in blobs:
                fh.write(blob)
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc
    logger.debug("checkpoint written to %s (%d arrays)", path, len(directory))
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not data.startswith(MAGIC) or len(data) < len(MAGIC) + LENGTH.size:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (length,) = LENGTH.unpack_from(data, len(MAGIC))
    start = len(MAGIC) + LENGTH.size
    try:
        header = json.loads(data[start:start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointVersionError(str(path), header.get("version"), FORMAT_VERSION)

    body = start + length
    sections: Sections = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        begin = body + entry["offset"]
        if begin + 8 * count > len(data):
            raise CheckpointError(f"{path}: array {entry['section']}/{entry['name']} is truncated")
        array = np.frombuffer(data, dtype="<f8", count=count, offset=begin).reshape(shape).astype(np.float64)
        sections.setdefault(entry["section"], {})[entry["name"]] = array
    return Checkpoint(header["metadata"], sections, header["version"])


# --- model sections ---

@dataclass(frozen=True, eq=False)
class Model:
    """What analysis and serving need from a checkpoint"""
    generator: GeneratorParams
    evaluator: EvaluatorParams
    stat: RunningStat
    env: str
    output_activation: str
    metadata: Dict[str, Any]


def model_checkpoint(generator: GeneratorParams, evaluator: EvaluatorParams, stat: RunningStat,
                     env: str, metadata: Optional[Dict[str, Any]] = None) -> Checkpoint:
    meta = dict(metadata or {})
    meta.update({
        "env": env,
        "generator": generator.metadata(),
        "evaluator": evaluator.metadata(),
    })
    sections = {
        "generator": dict(generator.arrays),
        "evaluator": dict(evaluator.arrays),
        "normalizer": stat.state_arrays(),
    }
    return Checkpoint(meta, sections)


def restore_model(checkpoint: Checkpoint) -> Model:
    meta = checkpoint.metadata
    try:
        gen_meta, val_meta = meta["generator"], meta["evaluator"]
        generator = GeneratorParams(dict(checkpoint.sections["generator"]), **gen_meta)
        evaluator = EvaluatorParams(dict(checkpoint.sections["evaluator"]), **val_meta)
        stat = RunningStat.from_state_arrays(checkpoint.sections["normalizer"])
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"checkpoint is missing model data: {exc}") from exc
    _check_shapes(generator, evaluator)
    return Model(generator, evaluator, stat, meta["env"], evaluator.output_activation, meta)


def load_model(path: Union[str, Path]) -> Model:
    return restore_model(load_checkpoint(path))


def _check_shapes(generator: GeneratorParams, evaluator: EvaluatorParams) -> None:
    grid = generator.hidden // generator.slice_size
    expected = {
        "emb1": (grid, generator.embedding_dim),
        "emb2": (grid * grid, generator.embedding_dim),
        "emb3": (grid, generator.embedding_dim),
    }
    for name, shape in expected.items():
        if generator.arrays[name].shape != shape:
            raise CheckpointError(f"generator/{name}: expected shape {shape}, got {generator.arrays[name].shape}")
    states = evaluator.arrays["probing_states"].shape
    if states != (evaluator.n_probing_states, evaluator.obs_dim):
        raise CheckpointError(f"evaluator/probing_states: expected {(evaluator.n_probing_states, evaluator.obs_dim)}, got {states}")
