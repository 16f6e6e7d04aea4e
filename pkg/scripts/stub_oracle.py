#!/usr/bin/env python3
"""Scripted stand-in for a real inference oracle (stdlib only).

Speaks the depmetrics-oracle line protocol on stdin/stdout. Modes:

  constant:P              every request scores P for "car"
  geometric:X0,Y0,X1,Y1   score = 1 - (overlap fraction of the occluder
                          with the given box); the occluder geometry is
                          parsed from the image filename tag
                          "__occ_y{y}_x{x}_s{side}.png", absent tag = 1.0

Usage: stub_oracle.py [mode] [--version N] [--drop-id ID]
  --version emits a different protocol version (for handshake tests);
  --drop-id silently swallows requests with that id (for timeout tests).
"""

import json
import re
import sys

OCC_TAG = re.compile(r"__occ_y(\d+)_x(\d+)_s(\d+)\.png$")


def overlap_fraction(y, x, side, box):
    x0, y0, x1, y1 = box
    iw = max(0.0, min(x + side, x1) - max(x, x0))
    ih = max(0.0, min(y + side, y1) - max(y, y0))
    return (iw * ih) / float(side * side)


def score(mode, image):
    if mode[0] == "constant":
        return mode[1]
    tag = OCC_TAG.search(image)
    if tag is None:
        return 1.0
    y, x, side = (int(g) for g in tag.groups())
    return 1.0 - overlap_fraction(y, x, side, mode[1])


def main(argv):
    spec = argv[1] if len(argv) > 1 and not argv[1].startswith("--") else "constant:0.5"
    version = 1
    drop_id = None
    for i, arg in enumerate(argv):
        if arg == "--version":
            version = int(argv[i + 1])
        if arg == "--drop-id":
            drop_id = argv[i + 1]

    kind, _, params = spec.partition(":")
    if kind == "constant":
        mode = ("constant", float(params))
        box = None
    elif kind == "geometric":
        box = tuple(float(v) for v in params.split(","))
        mode = ("geometric", box)
    else:
        print(f"unknown mode '{spec}'", file=sys.stderr)
        return 1

    print(json.dumps({"protocol": "depmetrics-oracle", "version": version}), flush=True)
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        request = json.loads(line)
        if drop_id is not None and request.get("id") == drop_id:
            continue
        value = round(score(mode, request.get("image", "")), 12)
        rest = round(1.0 - value, 12)
        if request.get("mode") == "detect" and box is not None:
            response = {
                "id": request["id"],
                "detections": [
                    {"box": list(box), "class_probs": {"car": value, "background": rest}}
                ],
            }
        else:
            response = {
                "id": request["id"],
                "outputs": {"car": value, "background": rest},
            }
        print(json.dumps(response, sort_keys=True), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
