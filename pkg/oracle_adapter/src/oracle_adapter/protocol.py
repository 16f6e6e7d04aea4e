"""The serve loop: newline-delimited JSON requests on stdin, answers on stdout.

Handshake first, then one response per request line. Decode failures
become per-request error responses; a request line that does not parse
gets an error response when its id is recoverable, otherwise a bare
protocol-error line. The optional shuffle flag answers every second
request before the buffered one, exercising clients' out-of-order
matching.
"""

from __future__ import annotations

import json
import sys

from .models import AdapterConfig, ModelError, load_model

PROTOCOL_NAME = "depmetrics-oracle"
PROTOCOL_VERSION = 1


def _respond(backend, request: dict) -> dict:
    request_id = request["id"]
    image = request.get("image")
    if not isinstance(image, str):
        return {"id": request_id, "error": "request lacks an image path"}
    mode = request.get("mode", "classify")
    try:
        if mode == "detect":
            return {"id": request_id, "detections": backend.detect(image)}
        return {"id": request_id, "outputs": backend.classify(image)}
    except ModelError as e:
        return {"id": request_id, "error": str(e)}
    except FileNotFoundError:
        return {"id": request_id, "error": f"image not found: {image}"}
    except OSError as e:
        return {"id": request_id, "error": f"cannot decode {image}: {e}"}


def serve(
    config: AdapterConfig,
    shuffle: bool = False,
    stream_in=None,
    stream_out=None,
) -> int:
    """Run the request loop until stdin closes. Returns the exit code.

    The model is loaded before the handshake so that load failures exit
    nonzero without ever announcing the protocol.
    """
    stream_in = stream_in if stream_in is not None else sys.stdin
    stream_out = stream_out if stream_out is not None else sys.stdout

    try:
        backend = load_model(config)
    except ModelError as e:
        print(f"oracle_adapter: {e}", file=sys.stderr)
        return 1

    def emit(obj: dict) -> None:
        stream_out.write(json.dumps(obj, sort_keys=True) + "\n")
        stream_out.flush()

    emit({"protocol": PROTOCOL_NAME, "version": PROTOCOL_VERSION})

    held: dict | None = None
    for line in stream_in:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict) or not isinstance(request.get("id"), str):
                raise ValueError("request must be an object with a string id")
        except (json.JSONDecodeError, ValueError) as e:
            recovered = None
            try:
                recovered = json.loads(line).get("id")
            except Exception:
                pass
            if isinstance(recovered, str):
                emit({"id": recovered, "error": f"malformed request: {e}"})
            else:
                emit({"error": f"malformed request line: {e}"})
            continue
        response = _respond(backend, request)
        if shuffle:
            if held is None:
                held = response
            else:
                emit(response)
                emit(held)
                held = None
        else:
            emit(response)
    if held is not None:
        emit(held)
    return 0
