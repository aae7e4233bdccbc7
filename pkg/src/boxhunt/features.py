"""Feature extraction: (scene, box) -> fixed-dimension vector.

Two extractor kinds share one duck type (a ``dim`` attribute and an
``extract(scene, box)`` method): the built-in crop-downsample extractor, and a
client for an external feature server speaking a JSON-lines protocol. The
external path exists so a pretrained CNN can supply the high-dimensional
features without this package ever touching the network itself.
"""

from __future__ import annotations

import json
import re
import shlex
import socket
import subprocess
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Box
from .scene import Scene

PROTO_VERSION = 1


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __post_init__(self) -> None:
        if self.values.ndim != 1 or self.values.shape[0] == 0:
            raise ValueError("feature vector must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector contains non-finite values")


@dataclass(frozen=True)
class ExtractorConfig:
    kind: str = "builtin"  # builtin | external
    grid: int = 16
    declared_dim: Optional[int] = None
    server: Optional[str] = None  # command line or host:port

    def __post_init__(self) -> None:
        if self.kind not in ("builtin", "external"):
            raise ValueError(f"unknown extractor kind {self.kind!r}")
        if self.kind == "builtin" and self.grid < 2:
            raise ValueError(f"grid must be >= 2, got {self.grid}")
        if self.kind == "external" and not self.server:
            raise ValueError("external extractor needs a server spec")


def _integral(scene: Scene) -> np.ndarray:
    # Cumulative intensity integral with a zero row/column prefix, memoized on
    # the scene (scenes are immutable).
    cached = scene.__dict__.get("_integral")
    if cached is None:
        grid = np.zeros((scene.height + 1, scene.width + 1))
        grid[1:, 1:] = np.cumsum(np.cumsum(scene.pixels, axis=0), axis=1)
        scene.__dict__["_integral"] = cached = grid
    return cached


def _interp_axis(coords: np.ndarray, limit: int) -> tuple[np.ndarray, np.ndarray]:
    base = np.clip(np.floor(coords).astype(int), 0, limit - 1)
    return base, coords - base


def crop_resize(scene: Scene, box: Box, grid: int) -> np.ndarray:
    """Pool the crop ``box`` onto a ``grid x grid`` intensity grid.

    Each output cell holds the exact area-weighted average of the pixels it
    covers (pixels are treated as unit squares of constant intensity), so the
    grid mean equals the crop mean and jointly rescaling scene and box leaves
    the output unchanged.
    """
    x1, y1 = max(box.x1, 0.0), max(box.y1, 0.0)
    x2, y2 = min(box.x2, float(scene.width)), min(box.y2, float(scene.height))
    if x1 >= x2 or y1 >= y2:
        raise ValueError(f"box {box.as_tuple()} lies outside scene {scene.id!r}")

    integral = _integral(scene)
    xs = x1 + (x2 - x1) * np.arange(grid + 1) / grid
    ys = y1 + (y2 - y1) * np.arange(grid + 1) / grid

    # The integral of a piecewise-constant image is bilinear inside every
    # pixel cell, so interpolating the cumulative grid is exact.
    ix, tx = _interp_axis(xs, scene.width)
    iy, ty = _interp_axis(ys, scene.height)
    cols = integral[:, ix] * (1.0 - tx) + integral[:, ix + 1] * tx
    mesh = cols[iy, :] * (1.0 - ty)[:, None] + cols[iy + 1, :] * ty[:, None]

    masses = mesh[1:, 1:] - mesh[:-1, 1:] - mesh[1:, :-1] + mesh[:-1, :-1]
    cell_area = ((x2 - x1) / grid) * ((y2 - y1) / grid)
    return np.clip(masses / cell_area, 0.0, 1.0)


class BuiltinExtractor:
    """Crop-downsample features: the flattened row-major grid, dim = grid**2."""

    def __init__(self, grid: int = 16):
        if grid < 2:
            raise ValueError(f"grid must be >= 2, got {grid}")
        self.grid = grid
        self.dim = grid * grid

    def extract(self, scene: Scene, box: Box) -> np.ndarray:
        return crop_resize(scene, box, self.grid).reshape(-1)

    def close(self) -> None:
        pass


class FeatureServerError(RuntimeError):
    """Base class for feature-server failures."""


class ServerUnreachableError(FeatureServerError):
    """Server could not be started or reached, or stopped responding."""


class HandshakeError(FeatureServerError):
    """First line from the server was not a valid, compatible handshake."""


class ProtocolError(FeatureServerError):
    """Response violated the protocol (malformed line, id mismatch)."""


class DimMismatchError(FeatureServerError):
    """Response vector length differs from the handshake dimension."""


def parse_handshake(line: str) -> int:
    """Validate a handshake line and return the advertised dimension."""
    try:
        record = json.loads(line)
        proto = record["proto"]
        dim = record["dim"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise HandshakeError(f"protocol violation: bad handshake line {line!r}") from exc
    if proto != PROTO_VERSION:
        raise HandshakeError(f"protocol version mismatch: server speaks {proto}, client {PROTO_VERSION}")
    if not isinstance(dim, int) or dim <= 0:
        raise HandshakeError(f"server advertised invalid dimension {dim!r}")
    return dim


_HOST_PORT = re.compile(r"^(?P<host>[\w.\-]+):(?P<port>\d+)$")


class FeatureServerClient:
    """JSON-lines feature-server client.

    One request is in flight at a time per client; callers wanting parallel
    extraction must open independent clients.
    """

    def __init__(self, reader, writer, on_close=None):
        self._reader = reader
        self._writer = writer
        self._on_close = on_close
        self._next_id = 0
        self.dim = parse_handshake(self._read_line())

    @classmethod
    def from_spec(cls, spec: str, timeout: float = 30.0) -> "FeatureServerClient":
        """Open a client from a ``host:port`` address or a server command line."""
        match = _HOST_PORT.match(spec.strip())
        if match:
            return cls.connect(match.group("host"), int(match.group("port")), timeout)
        return cls.spawn(shlex.split(spec))

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 30.0) -> "FeatureServerClient":
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ServerUnreachableError(f"cannot connect to {host}:{port}: {exc}") from exc
        sock.settimeout(timeout)
        stream = sock.makefile("rw", encoding="utf-8", newline="\n")
        return cls(stream, stream, on_close=sock.close)

    @classmethod
    def spawn(cls, command: list[str]) -> "FeatureServerClient":
        try:
            proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ServerUnreachableError(f"cannot start feature server {command!r}: {exc}") from exc
        return cls(proc.stdout, proc.stdin, on_close=proc.terminate)

    def _read_line(self) -> str:
        try:
            line = self._reader.readline()
        except (OSError, socket.timeout) as exc:
            raise ServerUnreachableError(f"feature server read failed: {exc}") from exc
        if not line:
            raise ServerUnreachableError("feature server closed the stream")
        return line

    def extract(self, scene: Scene, box: Box) -> np.ndarray:
        """Request features for (scene id, box); pixels never cross the wire."""
        request_id = self._next_id
        self._next_id += 1
        request = {"id": request_id, "scene": scene.id, "box": list(box.as_tuple())}
        try:
            self._writer.write(json.dumps(request) + "\n")
            self._writer.flush()
        except (OSError, BrokenPipeError) as exc:
            raise ServerUnreachableError(f"feature server write failed: {exc}") from exc

        line = self._read_line()
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed response line {line!r}") from exc
        if response.get("id") != request_id:
            raise ProtocolError(f"response id {response.get('id')!r} does not match request {request_id}")
        if "error" in response:
            raise FeatureServerError(f"server error: {response['error']}")
        features = response.get("features")
        if not isinstance(features, list):
            raise ProtocolError(f"response carries no feature list: {line!r}")
        if len(features) != self.dim:
            raise DimMismatchError(f"expected {self.dim} features, got {len(features)}")
        values = np.asarray(features, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise ProtocolError("response contains non-finite features")
        return values

    def close(self) -> None:
        if self._on_close is not None:
            self._on_close()
            self._on_close = None


def make_extractor(config: ExtractorConfig):
    """Build the extractor described by ``config``."""
    if config.kind == "builtin":
        return BuiltinExtractor(config.grid)
    client = FeatureServerClient.from_spec(config.server)
    if config.declared_dim is not None and client.dim != config.declared_dim:
        raise DimMismatchError(
            f"server advertises dim {client.dim}, config declares {config.declared_dim}"
        )
    return client


def extract(config: ExtractorConfig, scene: Scene, box: Box) -> FeatureVector:
    """One-shot extraction for the given config; prefer holding on to
    ``make_extractor(config)`` when extracting repeatedly."""
    extractor = make_extractor(config)
    try:
        return FeatureVector(extractor.extract(scene, box))
    finally:
        extractor.close()
