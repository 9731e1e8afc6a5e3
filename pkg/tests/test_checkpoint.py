import numpy as np
import pytest

from advinfo.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from advinfo.models import Network, build_lenet5, build_toy_mlp


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_round_trip_exact(tmp_path, rng, dtype):
    net = Network.init(build_lenet5(), rng, dtype)
    save_checkpoint(net, tmp_path / "m.ckpt", {"epochs": 3})
    back, extra = load_checkpoint(tmp_path / "m.ckpt")
    assert extra == {"epochs": 3}
    assert back.spec == net.spec
    assert back.checksum() == net.checksum()
    x = rng.uniform(size=(2, 1, 28, 28)).astype(dtype)
    assert back.logits(x).tobytes() == net.logits(x).tobytes()


def test_corruption_detected(tmp_path, rng):
    net = Network.init(build_toy_mlp(3, [4], 2), rng)
    p = tmp_path / "m.ckpt"
    save_checkpoint(net, p)
    raw = p.read_bytes()
    (tmp_path / "bad_magic").write_bytes(b"X" + raw[1:])
    (tmp_path / "short").write_bytes(raw[:-8])
    (tmp_path / "long").write_bytes(raw + b"\0")
    (tmp_path / "version").write_bytes(raw[:8] + (99).to_bytes(4, "little") + raw[12:])
    for name, match in [("bad_magic", "magic"), ("short", "truncated"), ("long", "trailing"), ("version", "version")]:
        with pytest.raises(CheckpointError, match=match):
            load_checkpoint(tmp_path / name)
