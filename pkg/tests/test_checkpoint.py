import struct

import pytest
import torch

from symgait.rl.checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    CheckpointError,
    load_checkpoint,
    read_header,
    save_checkpoint,
)
from symgait.rl.networks import ActorCritic, NetworkConfig


@pytest.fixture
def model():
    torch.manual_seed(0)
    m = ActorCritic(NetworkConfig(encoder_hidden=(32, 32), value_hidden=(16,)))
    m.norm.update(torch.randn(100, 45))
    return m


def test_round_trip(tmp_path, model):
    path = save_checkpoint(tmp_path / "a.bin", model, {"update": 3, "offsets": [0.5, 0.0, 0.5]})
    loaded, meta = load_checkpoint(path)
    assert meta["update"] == 3
    for k, v in model.state_dict().items():
        assert torch.equal(v, loaded.state_dict()[k]), k
    header = read_header(path)
    assert header["topology"]["encoder_hidden"] == [32, 32]
    raw = path.read_bytes()
    assert raw[:8] == MAGIC
    assert struct.unpack("<I", raw[8:12])[0] == FORMAT_VERSION
    n_values = sum(v.numel() for v in model.state_dict().values())
    assert len(raw) == 16 + struct.unpack("<I", raw[12:16])[0] + 8 * n_values


def test_lstm_round_trip(tmp_path):
    m = ActorCritic(NetworkConfig(head="lstm", encoder_hidden=(8,), lstm_hidden=4, value_hidden=(4,)))
    loaded, _ = load_checkpoint(save_checkpoint(tmp_path / "l.bin", m))
    obs = torch.randn(2, 4, 45)
    assert torch.allclose(m.action_mean(obs), loaded.action_mean(obs))


def test_errors(tmp_path, model):
    path = save_checkpoint(tmp_path / "a.bin", model)
    raw = path.read_bytes()
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(bad)
    bad.write_bytes(raw[:8] + struct.pack("<I", 99) + raw[12:])
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(bad)
    bad.write_bytes(raw[:-8])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(bad)
    bad.write_bytes(raw + b"\0" * 8)
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(bad)
    with pytest.raises(CheckpointError, match="topology"):
        load_checkpoint(path, expect=NetworkConfig())
