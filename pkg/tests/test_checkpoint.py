"""Bit-exact checkpoint round-trips and the corruption error surface."""

import json

import numpy as np
import pytest

from conftest import make_params, make_vocab
from codesum.checkpoint import MAGIC, VERSION, load, save
from codesum.errors import (
    BadMagic,
    CorruptManifest,
    TruncatedPayload,
    UnsupportedVersion,
)
from codesum.trainer import preset


def cfg():
    return preset("copy_attention", D=3, k1=2, k2=2, w1=1, w2=1, w3=1, epochs=1)


def write_checkpoint(tmp_path, dtype=np.float64, simple=False):
    rng = np.random.default_rng(7)
    params = make_params(9, d=3, k1=2, k2=2, rng=rng, simple=simple)
    if dtype is not np.float64:
        for _, t in params.named_tensors():
            t.data = t.data.astype(dtype)
    vocab = make_vocab(["a", "b"])
    path = tmp_path / "model.ckpt"
    save(params, vocab, cfg(), path)
    return params, vocab, path


class TestRoundTrip:
    @pytest.mark.parametrize("dtype", [np.float64, np.float32])
    def test_bitwise_identity(self, tmp_path, dtype):
        params, vocab, path = write_checkpoint(tmp_path, dtype)
        loaded, loaded_vocab, loaded_cfg = load(path)
        got = dict(loaded.named_tensors())
        for name, tensor in params.named_tensors():
            assert got[name].data.dtype == np.dtype(dtype)
            assert np.array_equal(got[name].data, tensor.data)
            assert got[name].data.tobytes() == tensor.data.tobytes()
        assert loaded_vocab == vocab
        assert loaded_cfg == cfg()

    def test_simple_state_tensors_round_trip(self, tmp_path):
        params, _, path = write_checkpoint(tmp_path, simple=True)
        loaded, _, _ = load(path)
        assert loaded.simple_state is not None
        assert np.array_equal(loaded.simple_state.G.data, params.simple_state.G.data)

    def test_loaded_params_are_trainable(self, tmp_path):
        _, _, path = write_checkpoint(tmp_path)
        loaded, _, _ = load(path)
        for _, t in loaded.named_tensors():
            assert t.requires_grad

    def test_no_stray_temp_files(self, tmp_path):
        write_checkpoint(tmp_path)
        assert [p.name for p in tmp_path.iterdir()] == ["model.ckpt"]

    def test_header_layout(self, tmp_path):
        _, _, path = write_checkpoint(tmp_path)
        blob = path.read_bytes()
        assert blob[:8] == b"CODESUM1" == MAGIC
        assert int.from_bytes(blob[8:12], "little") == VERSION == 1
        manifest_len = int.from_bytes(blob[12:20], "little")
        manifest = json.loads(blob[20:20 + manifest_len])
        assert set(manifest) == {"config", "vocabulary", "tensors"}
        offsets = [t["byte_offset"] for t in manifest["tensors"]]
        assert offsets == sorted(offsets)
        names = [t["name"] for t in manifest["tensors"]]
        assert len(names) == len(set(names))
        for entry in manifest["tensors"]:
            assert entry["dtype"] in ("f32", "f64")


class TestCorruption:
    def test_truncated_payload(self, tmp_path):
        _, _, path = write_checkpoint(tmp_path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-1])
        with pytest.raises(TruncatedPayload):
            load(path)

    def test_bad_magic(self, tmp_path):
        _, _, path = write_checkpoint(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[0] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(BadMagic):
            load(path)

    def test_unsupported_version(self, tmp_path):
        _, _, path = write_checkpoint(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[8:12] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(blob))
        with pytest.raises(UnsupportedVersion):
            load(path)

    def test_corrupt_manifest_json(self, tmp_path):
        _, _, path = write_checkpoint(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[20] = ord("X")  # manifests start with '{'
        path.write_bytes(bytes(blob))
        with pytest.raises(CorruptManifest):
            load(path)

    def test_manifest_missing_tensor(self, tmp_path):
        _, _, path = write_checkpoint(tmp_path)
        blob = path.read_bytes()
        manifest_len = int.from_bytes(blob[12:20], "little")
        manifest = json.loads(blob[20:20 + manifest_len])
        manifest["tensors"] = [t for t in manifest["tensors"] if t["name"] != "E"]
        new_manifest = json.dumps(manifest).encode()
        path.write_bytes(blob[:12] + len(new_manifest).to_bytes(8, "little")
                         + new_manifest + blob[20 + manifest_len:])
        with pytest.raises(CorruptManifest):
            load(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.ckpt"
        path.write_bytes(b"")
        with pytest.raises(BadMagic):
            load(path)

    def test_errors_are_distinguishable(self):
        # all four checkpoint errors are distinct classes
        kinds = {BadMagic, UnsupportedVersion, CorruptManifest, TruncatedPayload}
        assert len(kinds) == 4
