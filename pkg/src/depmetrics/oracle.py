"""Client for the depmetrics-oracle wire protocol.

The oracle is a child process scoring images on demand. Transport is
newline-delimited JSON over its stdin/stdout: a handshake line
{"protocol": "depmetrics-oracle", "version": 1}, then request lines
{"id", "image", "mode"} answered by {"id", "outputs" | "detections" |
"error"} in any order. Requests are pipelined up to a parallelism
window and matched back solely by id.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import (
    ChildExitedError,
    HandshakeTimeoutError,
    MalformedResponseError,
    SpawnFailedError,
    ValidationError,
    VersionMismatchError,
)
from .model import BBox, Detection

PROTOCOL_NAME = "depmetrics-oracle"
PROTOCOL_VERSION = 1

_EOF = object()


@dataclass(frozen=True, slots=True)
class OracleRequest:
    request_id: str
    image_path: str
    mode: str = "classify"

    def __post_init__(self):
        if self.mode not in ("classify", "detect"):
            raise ValidationError(f"mode must be classify or detect, got '{self.mode}'")

    def to_line(self) -> str:
        return json.dumps(
            {"id": self.request_id, "image": self.image_path, "mode": self.mode},
            sort_keys=True,
        )


@dataclass(frozen=True, slots=True)
class OracleResponse:
    request_id: str
    outputs: Mapping[str, float] | None = None
    detections: tuple[Detection, ...] | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def parse_response_line(line: str) -> OracleResponse:
    """Parse and validate one oracle output line."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        raise MalformedResponseError("response is not valid JSON", line)
    if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
        raise MalformedResponseError("response must be an object with a string id", line)
    present = [k for k in ("outputs", "detections", "error") if obj.get(k) is not None]
    if len(present) != 1:
        raise MalformedResponseError(
            "response needs exactly one of outputs, detections or error", line
        )
    try:
        if present[0] == "outputs":
            if not isinstance(obj["outputs"], dict):
                raise MalformedResponseError("outputs must be an object", line)
            probs = {}
            for label, p in obj["outputs"].items():
                if not isinstance(p, (int, float)) or not (0.0 <= float(p) <= 1.0):
                    raise MalformedResponseError(
                        f"probability {p!r} for '{label}' outside [0, 1]", line
                    )
                probs[str(label)] = float(p)
            return OracleResponse(obj["id"], outputs=probs)
        if present[0] == "detections":
            if not isinstance(obj["detections"], list):
                raise MalformedResponseError("detections must be a list", line)
            detections = []
            for d in obj["detections"]:
                if not isinstance(d, dict) or "box" not in d or "class_probs" not in d:
                    raise MalformedResponseError(
                        "detection needs box and class_probs", line
                    )
                detections.append(
                    Detection(box=BBox.from_list(d["box"]), class_probs=d["class_probs"])
                )
            return OracleResponse(obj["id"], detections=tuple(detections))
        if not isinstance(obj["error"], str):
            raise MalformedResponseError("error must be a string", line)
        return OracleResponse(obj["id"], error=obj["error"])
    except ValidationError as e:
        raise MalformedResponseError(f"invalid response payload ({e.message})", line) from None


@dataclass(slots=True)
class _Pending:
    request: OracleRequest
    attempts: int
    deadline: float


class OracleSession:
    """One spawned oracle process plus its demultiplexing reader.

    A single writer and a single reader own the child's pipes; batches are
    serialized, and responses are matched to requests purely by id, so an
    oracle may answer out of order.
    """

    def __init__(
        self,
        command: Sequence[str] | str,
        handshake_timeout: float = 10.0,
        request_timeout: float = 30.0,
        retries: int = 1,
    ):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        self.request_timeout = request_timeout
        self.retries = retries
        self._used_ids: set[str] = set()
        self._batch_lock = threading.Lock()
        self._write_lock = threading.Lock()
        self._lines: queue.Queue = queue.Queue()
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise SpawnFailedError(f"cannot start oracle {self.command}: {e}") from e
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self._handshake(handshake_timeout)

    def _read_loop(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(_EOF)

    def _handshake(self, timeout: float):
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            self.close()
            raise HandshakeTimeoutError(
                f"oracle {self.command} sent no handshake within {timeout}s"
            ) from None
        if line is _EOF:
            self.close()
            raise HandshakeTimeoutError(
                f"oracle {self.command} exited before the handshake"
            )
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            self.close()
            raise MalformedResponseError("handshake is not valid JSON", line) from None
        if not isinstance(obj, dict) or obj.get("protocol") != PROTOCOL_NAME:
            self.close()
            raise MalformedResponseError(
                f"handshake does not announce protocol '{PROTOCOL_NAME}'", line
            )
        if obj.get("version") != PROTOCOL_VERSION:
            self.close()
            raise VersionMismatchError(
                f"oracle speaks version {obj.get('version')!r}, "
                f"client expects {PROTOCOL_VERSION}"
            )

    def _send(self, request: OracleRequest):
        with self._write_lock:
            try:
                self._proc.stdin.write(request.to_line() + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as e:
                raise ChildExitedError(f"oracle pipe closed while writing: {e}") from e

    def query_batch(
        self, requests: Sequence[OracleRequest], parallelism: int = 4
    ) -> list[OracleResponse]:
        """Send requests with a pipelining window; one response per request.

        Timed-out requests (after bounded resends) come back as error
        responses so the rest of the batch still succeeds; a dead child or
        a malformed line aborts the batch.
        """
        if parallelism < 1:
            raise ValidationError(f"parallelism must be >= 1, got {parallelism}")
        ids = [r.request_id for r in requests]
        if len(set(ids)) != len(ids):
            raise ValidationError("request ids must be unique within a batch")
        reused = self._used_ids.intersection(ids)
        if reused:
            raise ValidationError(f"request id '{sorted(reused)[0]}' was already used")
        self._used_ids.update(ids)

        with self._batch_lock:
            return self._run_batch(list(requests), parallelism)

    def _run_batch(
        self, requests: list[OracleRequest], parallelism: int
    ) -> list[OracleResponse]:
        results: dict[str, OracleResponse] = {}
        pending: dict[str, _Pending] = {}
        to_send = list(reversed(requests))  # pop() from the tail preserves order

        def fail_child(reason: str) -> ChildExitedError:
            return ChildExitedError(
                f"oracle exited with {len(pending) + len(to_send)} request(s) "
                f"unanswered: {reason}",
                completed=dict(results),
            )

        while len(results) < len(requests):
            while to_send and len(pending) < parallelism:
                request = to_send.pop()
                try:
                    self._send(request)
                except ChildExitedError as e:
                    raise fail_child(str(e)) from None
                pending[request.request_id] = _Pending(
                    request=request,
                    attempts=1,
                    deadline=time.monotonic() + self.request_timeout,
                )
            if not pending:
                break
            next_deadline = min(p.deadline for p in pending.values())
            timeout = max(0.0, next_deadline - time.monotonic())
            try:
                line = self._lines.get(timeout=timeout if timeout > 0 else 0.001)
            except queue.Empty:
                self._expire(pending, results)
                continue
            if line is _EOF:
                raise fail_child("stdout closed")
            response = parse_response_line(line)
            if response.request_id in pending:
                del pending[response.request_id]
                results[response.request_id] = response
            # Late or duplicate answers (e.g. after a resend) are dropped.

        return [results[r.request_id] for r in requests]

    def _expire(self, pending: dict[str, _Pending], results: dict[str, OracleResponse]):
        now = time.monotonic()
        for request_id in list(pending):
            entry = pending[request_id]
            if entry.deadline > now:
                continue
            if entry.attempts <= self.retries:
                entry.attempts += 1
                entry.deadline = now + self.request_timeout
                try:
                    self._send(entry.request)
                except ChildExitedError as e:
                    raise ChildExitedError(str(e), completed=dict(results)) from None
            else:
                results[request_id] = OracleResponse(
                    request_id,
                    error=f"timeout after {entry.attempts} attempt(s)",
                )
                del pending[request_id]

    def close(self):
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        try:
            if proc.stdin:
                proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self) -> "OracleSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def spawn(
    command: Sequence[str] | str,
    handshake_timeout: float = 10.0,
    request_timeout: float = 30.0,
    retries: int = 1,
) -> OracleSession:
    """Start an oracle process and complete the protocol handshake."""
    return OracleSession(
        command,
        handshake_timeout=handshake_timeout,
        request_timeout=request_timeout,
        retries=retries,
    )
