"""Primary-side client: a task-model object backed by a bridge endpoint.

Implements the same capability surface as the in-process models, so
pipelines can consume it unchanged.  Calls are blocking request/response
over one connection with monotonically increasing request ids; a
response with the wrong id, a timeout, or a refused endpoint surfaces as
BridgeError, which the harness treats as a task-model failure for the
clip in flight.
"""

from __future__ import annotations

import socket
from typing import Sequence

import numpy as np

from patvcm.roi import Box
from patvcm.taskmodels import CAPABILITIES, as_model_input
from patvcm_bridge.protocol import (
    ProtocolError,
    decode_depth,
    decode_mask,
    encode_frame,
    encode_image,
    read_frame,
)

DEFAULT_TIMEOUT = 60.0


class BridgeError(Exception):
    """Endpoint unreachable, timed out, or violated the protocol."""


class BridgeTaskModels:
    def __init__(self, host: str, port: int, timeout: float = DEFAULT_TIMEOUT):
        self._host = host
        self._port = port
        self._timeout = timeout
        self._next_id = 0
        self._sock: socket.socket | None = None
        self._rfile = None
        self._wfile = None

    def _connect(self) -> None:
        if self._sock is not None:
            return
        try:
            sock = socket.create_connection((self._host, self._port), self._timeout)
        except OSError as exc:
            raise BridgeError(f"cannot reach bridge at {self._host}:{self._port}: {exc}") from exc
        sock.settimeout(self._timeout)
        self._sock = sock
        self._rfile = sock.makefile("rb")
        self._wfile = sock.makefile("wb")

    def close(self) -> None:
        for handle in (self._rfile, self._wfile, self._sock):
            if handle is not None:
                handle.close()
        self._sock = self._rfile = self._wfile = None

    def _call(self, capability: str, frame: np.ndarray, **extra) -> dict:
        self._connect()
        request_id = self._next_id
        self._next_id += 1
        body = {
            "request_id": request_id,
            "capability": capability,
            "image": encode_image(as_model_input(frame)),
            **extra,
        }
        try:
            self._wfile.write(encode_frame(body))
            self._wfile.flush()
            response = read_frame(self._rfile)
        except (OSError, EOFError, ProtocolError) as exc:
            self.close()
            raise BridgeError(f"bridge call {capability} failed: {exc}") from exc
        if response.get("request_id") != request_id:
            self.close()
            raise BridgeError(
                f"response id {response.get('request_id')} != request id {request_id}"
            )
        if not response.get("ok"):
            error = response.get("error", {})
            raise BridgeError(f"{error.get('code', 'error')}: {error.get('message', '')}")
        return response["payload"]

    # --- task-model surface -------------------------------------------------

    def capabilities(self) -> frozenset[str]:
        return CAPABILITIES

    def detect(self, frame: np.ndarray) -> list[Box]:
        payload = self._call("detect", frame)
        return [Box(int(x0), int(y0), int(w), int(h), float(c))
                for x0, y0, w, h, c in payload["boxes"]]

    def segment(
        self,
        frame: np.ndarray,
        box: Box,
        positive: Sequence[tuple[int, int]] = (),
        negative: Sequence[tuple[int, int]] = (),
    ) -> np.ndarray:
        payload = self._call(
            "segment",
            frame,
            box=[box.x0, box.y0, box.w, box.h, box.confidence],
            points={"positive": [list(p) for p in positive],
                    "negative": [list(p) for p in negative]},
        )
        return decode_mask(payload["mask"])

    def segment_candidates(self, frame: np.ndarray, box: Box) -> list[np.ndarray]:
        payload = self._call(
            "segment",
            frame,
            box=[box.x0, box.y0, box.w, box.h, box.confidence],
            params={"candidates": True},
        )
        return [decode_mask(m) for m in payload["masks"]]

    def depth(self, frame: np.ndarray) -> np.ndarray:
        return decode_depth(self._call("depth", frame)["depth"])

    def classify(self, frame: np.ndarray, box: Box) -> int:
        payload = self._call(
            "classify", frame, box=[box.x0, box.y0, box.w, box.h, box.confidence]
        )
        return int(payload["class_id"])

    def pose(self, frame: np.ndarray, box: Box) -> np.ndarray:
        payload = self._call(
            "pose", frame, box=[box.x0, box.y0, box.w, box.h, box.confidence]
        )
        return np.array(payload["keypoints"], dtype=np.float64)
