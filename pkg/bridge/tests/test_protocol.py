import io

import numpy as np
import pytest

from patvcm_bridge.protocol import (
    MAX_FRAME_BYTES,
    PayloadTooLarge,
    ProtocolError,
    decode_depth,
    decode_image,
    decode_mask,
    encode_depth,
    encode_frame,
    encode_image,
    encode_mask,
    read_frame,
)
from patvcm_bridge.server import EchoModels, handle_request, self_test, serve_stream


def test_frame_roundtrip():
    body = {"request_id": 7, "capability": "detect", "image": "QUJD"}
    stream = io.BytesIO(encode_frame(body))
    assert read_frame(stream) == body


def test_frame_rejects_bad_version():
    data = bytearray(encode_frame({"a": 1}))
    data[4] = 99
    with pytest.raises(ProtocolError):
        read_frame(io.BytesIO(bytes(data)))


def test_frame_rejects_garbage_json():
    import struct

    payload = b"\x01not json"
    data = struct.pack(">I", len(payload)) + payload
    with pytest.raises(ProtocolError):
        read_frame(io.BytesIO(data))


def test_truncated_frame_is_eof():
    data = encode_frame({"a": 1})[:-2]
    with pytest.raises(EOFError):
        read_frame(io.BytesIO(data))


def test_oversized_frame_discarded():
    import struct

    big = struct.pack(">I", MAX_FRAME_BYTES + 10) + b"\x00" * (MAX_FRAME_BYTES + 10)
    stream = io.BytesIO(big + encode_frame({"after": True}))
    with pytest.raises(PayloadTooLarge):
        read_frame(stream)
    # connection is usable afterwards: the next frame parses
    assert read_frame(stream) == {"after": True}


def test_image_codec_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    frame = rng.integers(0, 256, size=(24, 16, 3), dtype=np.uint8)
    assert np.array_equal(decode_image(encode_image(frame)), frame)


def test_mask_codec_roundtrip():
    rng = np.random.default_rng(1)
    mask = rng.random((17, 23)) > 0.6
    assert np.array_equal(decode_mask(encode_mask(mask)), mask)
    empty = np.zeros((4, 4), dtype=bool)
    assert np.array_equal(decode_mask(encode_mask(empty)), empty)
    full = np.ones((4, 4), dtype=bool)
    assert np.array_equal(decode_mask(encode_mask(full)), full)


def test_depth_codec_roundtrip():
    rng = np.random.default_rng(2)
    depth = rng.random((12, 9)).astype(np.float32)
    assert np.array_equal(decode_depth(encode_depth(depth)), depth)


def test_unsupported_capability_is_structured_error():
    response = handle_request(EchoModels(), {
        "request_id": 3,
        "capability": "time-travel",
        "image": encode_image(np.zeros((8, 8, 3), dtype=np.uint8)),
    })
    assert response["request_id"] == 3
    assert response["ok"] is False
    assert response["error"]["code"] == "bad_request"


def test_echo_responses_byte_equal():
    models = EchoModels()
    body = {
        "request_id": 1,
        "capability": "depth",
        "image": encode_image(np.zeros((8, 8, 3), dtype=np.uint8)),
    }
    assert encode_frame(handle_request(models, body)) == encode_frame(
        handle_request(models, body)
    )


def test_self_test_flags_nondeterminism():
    assert self_test(EchoModels()) is True

    class Jittery(EchoModels):
        def __init__(self):
            self.count = 0

        def classify(self, frame, box):
            self.count += 1
            return self.count

    assert self_test(Jittery()) is False


def test_serve_stream_sequential_ids():
    models = EchoModels()
    image = encode_image(np.zeros((8, 8, 3), dtype=np.uint8))
    requests = b"".join(
        encode_frame({"request_id": i, "capability": "depth", "image": image})
        for i in range(50)
    )
    out = io.BytesIO()
    serve_stream(models, io.BytesIO(requests), out)
    out.seek(0)
    for i in range(50):
        response = read_frame(out)
        assert response["request_id"] == i
        assert response["ok"]


def test_serve_stream_oversized_then_continues():
    import struct

    models = EchoModels()
    image = encode_image(np.zeros((8, 8, 3), dtype=np.uint8))
    big = struct.pack(">I", MAX_FRAME_BYTES + 1) + b"\x00" * (MAX_FRAME_BYTES + 1)
    good = encode_frame({"request_id": 9, "capability": "depth", "image": image})
    out = io.BytesIO()
    serve_stream(models, io.BytesIO(big + good), out)
    out.seek(0)
    first = read_frame(out)
    assert first["ok"] is False and first["error"]["code"] == "payload_too_large"
    second = read_frame(out)
    assert second["request_id"] == 9 and second["ok"]
