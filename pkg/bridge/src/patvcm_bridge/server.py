"""Task-model server: answers framed capability requests over TCP or stdio.

Each connection is strictly sequential (one in-flight request); state is
limited to the read-only model set, so concurrent connections are safe.
A startup self-test runs every capability twice on a fixed frame and
flags nondeterministic backends, which would break the derived-ROI
contract on the primary side.
"""

from __future__ import annotations

import logging
import socketserver
import threading
from typing import BinaryIO

import numpy as np

from patvcm.roi import Box
from patvcm.taskmodels import TaskModels, ToyTaskModels
from patvcm_bridge.protocol import (
    PayloadTooLarge,
    ProtocolError,
    decode_image,
    encode_depth,
    encode_frame,
    encode_image,
    encode_mask,
    read_frame,
)

log = logging.getLogger(__name__)


class EchoModels:
    """Deterministic stand-in backend for protocol tests."""

    def capabilities(self):
        return frozenset({"detect", "segment", "depth", "classify", "pose", "caption"})

    def detect(self, frame):
        return []

    def segment(self, frame, box, positive=(), negative=()):
        return np.zeros(frame.shape[:2], dtype=bool)

    def segment_candidates(self, frame, box):
        return [np.zeros(frame.shape[:2], dtype=bool)]

    def depth(self, frame):
        return np.zeros(frame.shape[:2], dtype=np.float32)

    def classify(self, frame, box):
        return 0

    def pose(self, frame, box):
        return np.zeros((17, 2), dtype=np.float64)

    def caption(self, frame, box):
        return "echo"


MODEL_SETS = {
    "toy": ToyTaskModels,
    "echo": EchoModels,
}


def _parse_box(body: dict) -> Box:
    x0, y0, w, h = (int(v) for v in body["box"][:4])
    conf = float(body["box"][4]) if len(body["box"]) > 4 else 1.0
    return Box(x0, y0, w, h, conf)


def _points(body: dict, key: str) -> list[tuple[int, int]]:
    pts = body.get("points", {}).get(key, [])
    return [(int(x), int(y)) for x, y in pts]


def handle_request(models: TaskModels, body: dict) -> dict:
    request_id = body.get("request_id")
    capability = body.get("capability")
    try:
        if capability not in models.capabilities():
            raise ValueError(f"unsupported capability {capability!r}")
        frame = decode_image(body["image"])
        params = body.get("params", {})
        if capability == "detect":
            boxes = models.detect(frame)
            payload = {
                "boxes": [[b.x0, b.y0, b.w, b.h, b.confidence] for b in boxes]
            }
        elif capability == "segment":
            box = _parse_box(body)
            if params.get("candidates"):
                masks = models.segment_candidates(frame, box)
                payload = {"masks": [encode_mask(m) for m in masks]}
            else:
                mask = models.segment(frame, box, _points(body, "positive"),
                                      _points(body, "negative"))
                payload = {"mask": encode_mask(mask)}
        elif capability == "depth":
            payload = {"depth": encode_depth(models.depth(frame))}
        elif capability == "classify":
            payload = {"class_id": int(models.classify(frame, _parse_box(body)))}
        elif capability == "pose":
            kpts = models.pose(frame, _parse_box(body))
            payload = {"keypoints": [[float(x), float(y)] for x, y in kpts]}
        elif capability == "caption":
            payload = {"caption": models.caption(frame, _parse_box(body))}
        else:
            raise ValueError(f"unsupported capability {capability!r}")
    except (KeyError, ValueError, TypeError) as exc:
        return {
            "request_id": request_id,
            "ok": False,
            "error": {"code": "bad_request", "message": str(exc)},
        }
    return {"request_id": request_id, "ok": True, "payload": payload}


def serve_stream(models: TaskModels, rfile: BinaryIO, wfile: BinaryIO) -> None:
    """Sequential request loop over a byte stream; returns at EOF."""
    while True:
        try:
            body = read_frame(rfile)
        except EOFError:
            return
        except PayloadTooLarge as exc:
            wfile.write(encode_frame({
                "request_id": None,
                "ok": False,
                "error": {"code": "payload_too_large", "message": str(exc)},
            }))
            wfile.flush()
            continue
        except ProtocolError as exc:
            log.warning("resetting connection: %s", exc)
            return
        wfile.write(encode_frame(handle_request(models, body)))
        wfile.flush()


def self_test(models: TaskModels) -> bool:
    """Run every capability twice on a fixed frame; True iff byte-equal.

    A nondeterministic backend breaks the encoder/decoder ROI agreement,
    so servers should refuse (or at least loudly flag) such model sets.
    """
    rng = np.random.default_rng(1234)
    frame = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
    request_bodies = [
        {"request_id": 0, "capability": "detect", "image": encode_image(frame)},
        {"request_id": 0, "capability": "segment", "image": encode_image(frame),
         "box": [4, 4, 24, 24, 0.9]},
        {"request_id": 0, "capability": "depth", "image": encode_image(frame)},
        {"request_id": 0, "capability": "classify", "image": encode_image(frame),
         "box": [4, 4, 24, 24, 0.9]},
        {"request_id": 0, "capability": "pose", "image": encode_image(frame),
         "box": [4, 4, 24, 24, 0.9]},
    ]
    for body in request_bodies:
        first = encode_frame(handle_request(models, body))
        second = encode_frame(handle_request(models, body))
        if first != second:
            log.error("nondeterministic backend on %s", body["capability"])
            return False
    return True


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        serve_stream(self.server.models, self.rfile, self.wfile)


class BridgeServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str, port: int, models: TaskModels):
        super().__init__((host, port), _Handler)
        self.models = models
        self.deterministic = self_test(models)

    @property
    def endpoint(self) -> tuple[str, int]:
        return self.server_address[:2]


def start_background(host: str, port: int, models: TaskModels) -> BridgeServer:
    server = BridgeServer(host, port, models)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server
