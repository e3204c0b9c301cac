"""Target-model oracles: built-in surrogates and a remote-model client.

The three surrogates are deterministic, cheap stand-ins for deep models so
the whole attack loop can be verified at desk scale: a blob counter over the
infrared channel, an intensity-band segmenter over the fused intensity, and
a max-rule image fuser. Real models attach through the wire protocol below.

Wire protocol (newline-delimited JSON, UTF-8, one object per line):
  request:  {"id": str, "task": "count"|"segment"|"fuse", "width": int,
             "height": int, "visible_png_b64": str, "infrared_png_b64": str}
  response: {"id": str, "ok": true, "count": number}
          | {"id": str, "ok": true, "labels_b64": str}   row-major bytes
          | {"id": str, "ok": true, "fused_png_b64": str}
          | {"id": str, "ok": false, "error": str}
Responses are matched to requests by id and may arrive in any order.
"""

from __future__ import annotations

import base64
import io
import json
import select
import socket
import subprocess
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from PIL import Image as _PILImage
from scipy import ndimage

from .errors import ConfigError, DimensionError, OracleError, ProtocolError, RemoteTimeoutError
from .imagecore import ImagePair, intensity_to_byte, to_grayscale

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.int8)
BLUR_TRUNCATE = 3.0


class TargetKind(str, Enum):
    SURROGATE_COUNTING = "surrogate_counting"
    SURROGATE_SEGMENTATION = "surrogate_segmentation"
    SURROGATE_FUSION = "surrogate_fusion"
    REMOTE = "remote"


@dataclass(frozen=True)
class SurrogateCountingParams:
    """Blob-counter knobs: blur scale, binarization threshold, area floor."""

    blur_sigma: float = 2.0
    threshold: float = 0.6
    min_area: int = 9

    def __post_init__(self) -> None:
        if self.blur_sigma <= 0 or self.threshold <= 0 or self.min_area <= 0:
            raise ConfigError("surrogate counting parameters must be positive")


def surrogate_count(
    pair: ImagePair, params: SurrogateCountingParams | None = None
) -> tuple[float, np.ndarray]:
    """Count bright blobs in the infrared channel.

    Gaussian-blur (kernel truncated at 3 sigma, reflected borders), binarize
    above the threshold, take 4-connected components, and drop components
    smaller than min_area. Returns the surviving component count and a
    density map that is uniform over each surviving component and sums to
    the count.
    """
    p = params or SurrogateCountingParams()
    blurred = ndimage.gaussian_filter(
        pair.infrared, sigma=p.blur_sigma, mode="reflect", truncate=BLUR_TRUNCATE
    )
    binary = blurred > p.threshold
    labels, n_raw = ndimage.label(binary, structure=FOUR_CONNECTED)
    density = np.zeros_like(pair.infrared)
    if n_raw == 0:
        return 0.0, density
    areas = np.bincount(labels.ravel(), minlength=n_raw + 1)
    kept = np.flatnonzero(areas >= p.min_area)
    kept = kept[kept > 0]
    weights = np.zeros(n_raw + 1, dtype=np.float64)
    weights[kept] = 1.0 / areas[kept]
    density = weights[labels]
    return float(kept.size), density


def surrogate_segment(pair: ImagePair, num_bands: int = 4) -> np.ndarray:
    """Label every pixel by its fused-intensity band.

    g = (gray(visible) + infrared) / 2; label = min(floor(g * num_bands),
    num_bands - 1) so g = 1 stays in the top band.
    """
    if num_bands < 2:
        raise ConfigError(f"need at least 2 bands, got {num_bands}")
    g = 0.5 * to_grayscale(pair.visible) + 0.5 * pair.infrared
    return np.minimum(np.floor(g * num_bands).astype(np.int64), num_bands - 1)


def surrogate_fuse(pair: ImagePair) -> np.ndarray:
    """Fuse by pixelwise maximum of grayscale visible and infrared."""
    return np.maximum(to_grayscale(pair.visible), pair.infrared)


# ---------------------------------------------------------------------------
# remote models


@dataclass(frozen=True)
class RemoteEndpoint:
    """Where a remote model lives and how to talk to it.

    transport "subprocess" runs `command` and speaks over its stdio;
    transport "tcp" connects to `address` ("host:port").
    """

    transport: str
    command: tuple[str, ...] | None = None
    address: str | None = None
    timeout_ms: int = 10000
    max_in_flight: int = 1

    def __post_init__(self) -> None:
        if self.transport not in ("subprocess", "tcp"):
            raise ConfigError(f"unknown transport {self.transport!r}")
        if self.transport == "subprocess" and not self.command:
            raise ConfigError("subprocess transport needs a command line")
        if self.transport == "tcp" and not self.address:
            raise ConfigError("tcp transport needs a host:port address")
        if self.timeout_ms <= 0:
            raise ConfigError("timeout must be positive")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        if self.command is not None:
            object.__setattr__(self, "command", tuple(self.command))


def _encode_png_b64(image: np.ndarray) -> str:
    data = intensity_to_byte(image)
    mode = "L" if data.ndim == 2 else "RGB"
    buf = io.BytesIO()
    _PILImage.fromarray(data, mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _decode_png_b64(payload: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload, validate=True)
        with _PILImage.open(io.BytesIO(raw)) as img:
            if img.mode not in ("L", "RGB"):
                raise ProtocolError(f"remote image has unsupported mode {img.mode!r}")
            data = np.asarray(img, dtype=np.uint8)
    except ProtocolError:
        raise
    except Exception as exc:
        raise ProtocolError(f"undecodable image payload: {exc}") from exc
    return data.astype(np.float64) / 255.0


WIRE_TASKS = ("count", "segment", "fuse")


def _excerpt(text: str, limit: int = 200) -> str:
    return text if len(text) <= limit else text[:limit] + "..."


class _StdioTransport:
    """Line transport over a child process's stdin/stdout."""

    def __init__(self, command: tuple[str, ...]):
        try:
            self.proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as exc:
            raise OracleError(f"cannot start remote model {command!r}: {exc}") from exc
        self._buffer = b""

    def send_line(self, line: str) -> None:
        if self.proc.poll() is not None:
            raise OracleError("remote model process has exited")
        try:
            self.proc.stdin.write(line.encode("utf-8") + b"\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise OracleError(f"remote model pipe closed: {exc}") from exc

    def recv_line(self, timeout_s: float) -> str:
        fd = self.proc.stdout
        while b"\n" not in self._buffer:
            ready, _, _ = select.select([fd], [], [], timeout_s)
            if not ready:
                raise RemoteTimeoutError(f"no response within {timeout_s:.3f} s")
            chunk = fd.read1(65536)
            if not chunk:
                raise OracleError("remote model closed its output stream")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line.decode("utf-8", errors="replace")

    def close(self) -> None:
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
            self.proc.terminate()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()


class _TcpTransport:
    """Line transport over a TCP connection."""

    def __init__(self, address: str, timeout_s: float):
        host, _, port = address.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigError(f"address must be host:port, got {address!r}")
        try:
            self.sock = socket.create_connection((host, int(port)), timeout=timeout_s)
        except OSError as exc:
            raise OracleError(f"cannot connect to {address}: {exc}") from exc
        self._buffer = b""

    def send_line(self, line: str) -> None:
        try:
            self.sock.sendall(line.encode("utf-8") + b"\n")
        except OSError as exc:
            raise OracleError(f"remote connection lost: {exc}") from exc

    def recv_line(self, timeout_s: float) -> str:
        self.sock.settimeout(timeout_s)
        while b"\n" not in self._buffer:
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout as exc:
                raise RemoteTimeoutError(f"no response within {timeout_s:.3f} s") from exc
            except OSError as exc:
                raise OracleError(f"remote connection lost: {exc}") from exc
            if not chunk:
                raise OracleError("remote model closed the connection")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line.decode("utf-8", errors="replace")

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class RemoteModel:
    """Client for one remote model endpoint.

    Thread-safe; concurrent queries are throttled to the endpoint's
    max_in_flight and responses are matched to callers by request id.
    """

    def __init__(self, endpoint: RemoteEndpoint):
        self.endpoint = endpoint
        timeout_s = endpoint.timeout_ms / 1000.0
        if endpoint.transport == "subprocess":
            self._transport = _StdioTransport(endpoint.command)
        else:
            self._transport = _TcpTransport(endpoint.address, timeout_s)
        self._timeout_s = timeout_s
        self._lock = threading.Lock()
        self._reader_lock = threading.Lock()
        self._slots = threading.Semaphore(endpoint.max_in_flight)
        self._pending: dict[str, dict] = {}
        self._next_id = 0
        self._responses_seen = 0

    def close(self) -> None:
        self._transport.close()

    def __enter__(self) -> "RemoteModel":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _fresh_id(self) -> str:
        with self._lock:
            self._next_id += 1
            return f"q{self._next_id}"

    def _parse_response(self, line: str) -> dict:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"response is not JSON: {_excerpt(line)}") from exc
        if not isinstance(obj, dict) or not isinstance(obj.get("id"), str) or "ok" not in obj:
            raise ProtocolError(f"response missing id/ok fields: {_excerpt(line)}")
        return obj

    def _await_response(self, request_id: str) -> dict:
        while True:
            with self._reader_lock:
                if request_id in self._pending:
                    return self._pending.pop(request_id)
                line = self._transport.recv_line(self._timeout_s)
                obj = self._parse_response(line)
                if obj["id"] == request_id:
                    return obj
                self._pending[obj["id"]] = obj

    def query(self, task: str, pair: ImagePair) -> float | np.ndarray:
        """Send one request and return the validated task output."""
        if task not in WIRE_TASKS:
            raise ConfigError(f"unknown wire task {task!r}; expected one of {WIRE_TASKS}")
        request_id = self._fresh_id()
        message = json.dumps(
            {
                "id": request_id,
                "task": task,
                "width": pair.width,
                "height": pair.height,
                "visible_png_b64": _encode_png_b64(pair.visible),
                "infrared_png_b64": _encode_png_b64(pair.infrared),
            },
            separators=(",", ":"),
        )
        self._slots.acquire()
        try:
            with self._lock:
                self._transport.send_line(message)
            response = self._await_response(request_id)
        finally:
            self._slots.release()
        return self._extract(task, response, pair)

    def _extract(self, task: str, response: dict, pair: ImagePair) -> float | np.ndarray:
        if response["ok"] is not True:
            error = response.get("error", "unspecified remote failure")
            raise OracleError(f"remote model reported failure: {error}")
        if task == "count":
            count = response.get("count")
            if not isinstance(count, (int, float)) or isinstance(count, bool):
                raise ProtocolError(f"count response without numeric count: {_excerpt(json.dumps(response))}")
            return float(count)
        if task == "segment":
            payload = response.get("labels_b64")
            if not isinstance(payload, str):
                raise ProtocolError("segment response without labels_b64")
            try:
                raw = base64.b64decode(payload, validate=True)
            except Exception as exc:
                raise ProtocolError(f"undecodable labels payload: {exc}") from exc
            if len(raw) != pair.width * pair.height:
                raise ProtocolError(
                    f"labels carry {len(raw)} bytes, expected {pair.width * pair.height}"
                )
            return np.frombuffer(raw, dtype=np.uint8).reshape(pair.height, pair.width).astype(np.int64)
        payload = response.get("fused_png_b64")
        if not isinstance(payload, str):
            raise ProtocolError("fuse response without fused_png_b64")
        fused = _decode_png_b64(payload)
        if fused.ndim != 2:
            fused = to_grayscale(fused)
        if fused.shape != (pair.height, pair.width):
            raise ProtocolError(
                f"fused image has shape {fused.shape}, expected {(pair.height, pair.width)}"
            )
        return fused


def remote_query(endpoint: RemoteEndpoint, task: str, pair: ImagePair) -> float | np.ndarray:
    """One-shot convenience: connect, query once, disconnect."""
    with RemoteModel(endpoint) as model:
        return model.query(task, pair)


# ---------------------------------------------------------------------------
# uniform oracle construction

# Task oracles as the fitness layer consumes them: counting oracles return
# (count, density or None), segmentation oracles a label map, fusion oracles
# a fused image.

CountingOracle = Callable[[ImagePair], tuple[float, np.ndarray | None]]

TASK_WIRE_NAMES = {"counting": "count", "segmentation": "segment", "fusion": "fuse"}


def make_model(
    task: str,
    kind: TargetKind | str = TargetKind.SURROGATE_COUNTING,
    endpoint: RemoteEndpoint | None = None,
    counting_params: SurrogateCountingParams | None = None,
    num_bands: int = 4,
    remote_model: RemoteModel | None = None,
) -> Callable[[ImagePair], object]:
    """Build the per-task oracle callable for a target kind.

    For remote targets, pass either a live RemoteModel (reused across
    queries) or an endpoint (a client is created and owned by the returned
    callable).
    """
    kind = TargetKind(kind)
    if task not in TASK_WIRE_NAMES:
        raise ConfigError(f"unknown task {task!r}")
    if kind == TargetKind.REMOTE:
        if remote_model is None:
            if endpoint is None:
                raise ConfigError("remote target requires an endpoint")
            remote_model = RemoteModel(endpoint)
        wire_task = TASK_WIRE_NAMES[task]
        if task == "counting":
            return lambda pair: (remote_model.query(wire_task, pair), None)
        return lambda pair: remote_model.query(wire_task, pair)
    expected = {
        "counting": TargetKind.SURROGATE_COUNTING,
        "segmentation": TargetKind.SURROGATE_SEGMENTATION,
        "fusion": TargetKind.SURROGATE_FUSION,
    }[task]
    if kind != expected:
        raise ConfigError(f"target kind {kind.value} does not serve task {task!r}")
    if task == "counting":
        return lambda pair: surrogate_count(pair, counting_params)
    if task == "segmentation":
        return lambda pair: surrogate_segment(pair, num_bands)
    return surrogate_fuse
