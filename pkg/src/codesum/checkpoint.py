"""Single-file, bit-exact model container.

Layout (all integers little-endian):

    bytes 0..7    magic "CODESUM1"
    bytes 8..11   version, u32
    bytes 12..19  manifest length in bytes, u64
    manifest      UTF-8 JSON: {"config": {...}, "vocabulary": {...},
                  "tensors": [{"name", "shape", "dtype", "byte_offset"}]}
    payload       concatenated row-major little-endian tensor data

Offsets are relative to the payload start, nondecreasing, and
non-overlapping; dtype is "f32" or "f64".  Writes go to a temporary
file followed by an atomic rename.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .corpus.vocabulary import Vocabulary
from .errors import BadMagic, CorruptManifest, TruncatedPayload, UnsupportedVersion
from .model import ModelParams, SimpleStateParams
from .tensorcore import GruParams, Tensor
from .trainer import TrainConfig

MAGIC = b"CODESUM1"
VERSION = 1

_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
_DTYPE_NAMES = {np.dtype(np.float32): "f32", np.dtype(np.float64): "f64"}


def save(params: ModelParams, vocab: Vocabulary, cfg: TrainConfig,
         path: str | Path) -> None:
    """Write a checkpoint; the target appears atomically."""
    entries = []
    blobs = []
    offset = 0
    for name, tensor in params.named_tensors():
        arr = tensor.data
        if not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)  # keeps 0-d shapes intact
        dtype_name = _DTYPE_NAMES.get(arr.dtype)
        if dtype_name is None:
            raise ValueError(f"tensor {name} has unsupported dtype {arr.dtype}")
        raw = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": dtype_name,
            "byte_offset": offset,
        })
        blobs.append(raw)
        offset += len(raw)
    manifest = json.dumps({
        "config": cfg.to_dict(),
        "vocabulary": vocab.to_json(),
        "tensors": entries,
    }).encode("utf-8")

    path = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(VERSION.to_bytes(4, "little"))
            fh.write(len(manifest).to_bytes(8, "little"))
            fh.write(manifest)
            for raw in blobs:
                fh.write(raw)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _manifest_error(msg: str) -> CorruptManifest:
    return CorruptManifest(f"checkpoint manifest: {msg}")


def load(path: str | Path) -> tuple[ModelParams, Vocabulary, TrainConfig]:
    """Read a checkpoint back, tensor for tensor and id for id."""
    blob = Path(path).read_bytes()
    if len(blob) < 20 or blob[:8] != MAGIC:
        raise BadMagic(f"{path}: not a checkpoint file")
    version = int.from_bytes(blob[8:12], "little")
    if version != VERSION:
        raise UnsupportedVersion(f"{path}: version {version}, expected {VERSION}")
    manifest_len = int.from_bytes(blob[12:20], "little")
    if len(blob) < 20 + manifest_len:
        raise _manifest_error("manifest extends past end of file")
    try:
        manifest = json.loads(blob[20:20 + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise _manifest_error(str(exc)) from exc
    for key in ("config", "vocabulary", "tensors"):
        if key not in manifest:
            raise _manifest_error(f"missing key {key!r}")

    payload = blob[20 + manifest_len:]
    tensors: dict[str, np.ndarray] = {}
    last_end = 0
    for entry in manifest["tensors"]:
        if not isinstance(entry, dict) or not {"name", "shape", "dtype", "byte_offset"} <= set(entry):
            raise _manifest_error("tensor entry missing fields")
        if entry["dtype"] not in _DTYPES:
            raise _manifest_error(f"unknown dtype {entry['dtype']!r}")
        dtype = _DTYPES[entry["dtype"]]
        shape = tuple(int(x) for x in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = int(entry["byte_offset"])
        end = start + count * dtype.itemsize
        if start < last_end:
            raise _manifest_error("tensor offsets overlap or decrease")
        last_end = end
        if end > len(payload):
            raise TruncatedPayload(
                f"{path}: tensor {entry['name']} needs bytes up to {end}, "
                f"payload has {len(payload)}")
        arr = np.frombuffer(payload[start:end], dtype=dtype).reshape(shape)
        tensors[entry["name"]] = np.array(arr, copy=True)

    try:
        vocab = Vocabulary.from_json(manifest["vocabulary"])
        cfg = TrainConfig.from_dict(manifest["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise _manifest_error(str(exc)) from exc
    try:
        params = _params_from_tensors(tensors)
    except KeyError as exc:
        raise _manifest_error(f"missing tensor {exc}") from exc
    return params, vocab, cfg


def _params_from_tensors(tensors: dict[str, np.ndarray]) -> ModelParams:
    def leaf(name: str) -> Tensor:
        return Tensor(tensors[name], requires_grad=True)

    gru = GruParams(
        W_xr=leaf("gru.W_xr"), W_hr=leaf("gru.W_hr"),
        W_xu=leaf("gru.W_xu"), W_hu=leaf("gru.W_hu"),
        W_xc=leaf("gru.W_xc"), W_hc=leaf("gru.W_hc"),
        b_r=leaf("gru.b_r"), b_u=leaf("gru.b_u"), b_c=leaf("gru.b_c"),
    )
    simple = None
    if "simple.G" in tensors:
        simple = SimpleStateParams(G=leaf("simple.G"), W=leaf("simple.W"))
    return ModelParams(
        E=leaf("E"), K_l1=leaf("K_l1"), K_l2=leaf("K_l2"),
        K_att=leaf("K_att"), K_copy=leaf("K_copy"), K_lambda=leaf("K_lambda"),
        gru=gru, b=leaf("b"), h_init=leaf("h_init"),
        prelu_a1=leaf("prelu_a1"), prelu_a2=leaf("prelu_a2"),
        simple_state=simple,
    )
