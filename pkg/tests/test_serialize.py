import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import small_network
from signcore.binio import (
    MAGIC,
    ModelFormatError,
    NotAModelFileError,
    TruncatedFileError,
    VersionMismatchError,
    WrongModelTypeError,
)
from signcore.nn import build_sign_network, load_model, save_model
from signcore.nn.serialize import dumps, loads
from signcore.tensor import Rng


def _params(net):
    return [p for layer in net.parameters() for p in layer.values()]


def test_full_network_roundtrip(tmp_path):
    net = build_sign_network((28, 28, 1), 10, Rng(5), class_names=[f"L{i}" for i in range(10)])
    path = tmp_path / "m.aslm"
    save_model(net, path)
    back = load_model(path)
    assert back.class_names == net.class_names
    assert [type(a) for a in back.layers] == [type(b) for b in net.layers]
    for a, b in zip(_params(net), _params(back)):
        assert a.tobytes() == b.tobytes()
    x = Rng(1).random((3, 28, 28, 1))
    assert net.forward(x).tobytes() == back.forward(x).tobytes()
    assert dumps(back) == path.read_bytes()
    assert not (tmp_path / "m.aslm.tmp").exists()


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_random_models_give_identical_logits(seed):
    net = small_network(seed)
    back = loads(dumps(net))
    x = Rng(seed, 1).normal(0, 1, (4, 6, 6, 2))
    assert np.array_equal(net.forward(x), back.forward(x))


def test_header_layout():
    data = dumps(small_network(0))
    assert data[:4] == MAGIC
    assert struct.unpack("<I", data[4:8]) == (1,)
    assert data[8:12] == b"CNN1"


def test_bad_magic():
    data = dumps(small_network(0))
    with pytest.raises(NotAModelFileError, match="not a model file") as exc:
        loads(b"XXXX" + data[4:])
    assert exc.value.code == "not_a_model_file"
    with pytest.raises(NotAModelFileError):
        loads(b"")


def test_truncated_file():
    data = dumps(small_network(0))
    for cut in (6, 12, 30, len(data) - 1):
        with pytest.raises(TruncatedFileError, match="unexpected end of file") as exc:
            loads(data[:cut])
        assert exc.value.code == "unexpected_eof"


def test_version_mismatch():
    data = dumps(small_network(0))
    with pytest.raises(VersionMismatchError) as exc:
        loads(data[:4] + struct.pack("<I", 2) + data[8:])
    assert exc.value.code == "version_mismatch"


def test_error_codes_distinct():
    codes = {NotAModelFileError.code, TruncatedFileError.code, VersionMismatchError.code, WrongModelTypeError.code}
    assert len(codes) == 4


def test_wrong_type_and_trailing_bytes():
    data = dumps(small_network(0))
    with pytest.raises(WrongModelTypeError):
        loads(data[:8] + b"SVM1" + data[12:])
    with pytest.raises(ModelFormatError):
        loads(data + b"\0")
