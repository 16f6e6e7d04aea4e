"""Occlusion sensitivity heatmaps and the interpretation metrics.

A gray square slides over the image on a stride grid; each grid cell
holds the model's confidence in the target class for the image with the
occluder at that position. Cells below a threshold rho are "hot"; cells
whose occluder footprint touches the object's segmentation mask are
"occluding". The two ratios derived from those sets are

* interpretation precision:  |hot & occluding| / |hot|
* occlusion-sensitivity covering:  |hot & occluding| / |occluding|

Occluded frames are written as temp PNGs whose names carry the occluder
geometry as ``__occ_y{y}_x{x}_s{side}.png``, so scripted stand-in oracles
can score them without decoding pixels.
"""

from __future__ import annotations

import math
import os
import re
import shutil
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    NoHotPixelsError,
    ObjectNotCoveredError,
    OccluderTooLargeError,
    OracleDownError,
    OracleError,
    ValidationError,
)
from .model import BBox, jaccard
from .oracle import OracleRequest, OracleResponse
from .raster import save_image

OCC_TAG_RE = re.compile(r"__occ_y(\d+)_x(\d+)_s(\d+)\.png$")


def occ_tag(y: int, x: int, side: int) -> str:
    return f"__occ_y{y}_x{x}_s{side}.png"


@dataclass(frozen=True, slots=True)
class OccluderSpec:
    """Square occluder geometry; fill is the patch intensity."""

    size: int
    stride: int
    fill: float = 0.5

    def __post_init__(self):
        if self.size < 1:
            raise ValidationError(f"occluder size must be >= 1, got {self.size}")
        if self.stride < 1:
            raise ValidationError(f"occluder stride must be >= 1, got {self.stride}")
        if not (0.0 <= self.fill <= 1.0):
            raise ValidationError(f"occluder fill must be in [0, 1], got {self.fill}")


def grid_shape(image_size: tuple[int, int], spec: OccluderSpec) -> tuple[int, int]:
    """(rows, cols) of the heatmap grid for an image of (height, width)."""
    height, width = image_size
    if spec.size > height or spec.size > width:
        raise OccluderTooLargeError(
            f"occluder of side {spec.size} does not fit a {height}x{width} image"
        )
    rows = (height - spec.size) // spec.stride + 1
    cols = (width - spec.size) // spec.stride + 1
    return rows, cols


@dataclass(frozen=True, slots=True)
class Target:
    """What the heatmap tracks: a class, plus box and mask in detection mode."""

    class_label: str
    box: BBox | None = None
    mask_path: str | None = None

    @property
    def mode(self) -> str:
        return "detect" if self.box is not None else "classify"


@dataclass(slots=True, eq=False)
class Heatmap:
    """Grid of target-class confidences; NaN marks cells not yet scored."""

    grid: np.ndarray
    spec: OccluderSpec
    image_size: tuple[int, int]
    target: Target
    baseline_p: float | None = None

    def __post_init__(self):
        expected = grid_shape(self.image_size, self.spec)
        grid = np.asarray(self.grid, dtype=np.float64)
        if grid.shape != expected:
            raise ValidationError(
                f"grid shape {grid.shape} does not match geometry {expected}"
            )
        self.grid = grid
        self.image_size = (int(self.image_size[0]), int(self.image_size[1]))

    @property
    def rows(self) -> int:
        return self.grid.shape[0]

    @property
    def cols(self) -> int:
        return self.grid.shape[1]

    @property
    def complete(self) -> bool:
        return self.baseline_p is not None and not np.isnan(self.grid).any()

    def footprint(self, row: int, col: int) -> tuple[int, int, int]:
        """(y, x, side) of the occluder at one grid cell."""
        return row * self.spec.stride, col * self.spec.stride, self.spec.size

    def to_dict(self) -> dict:
        return {
            "grid": [
                [None if math.isnan(v) else v for v in row] for row in self.grid.tolist()
            ],
            "occluder": {
                "size": self.spec.size,
                "stride": self.spec.stride,
                "fill": self.spec.fill,
            },
            "image_size": list(self.image_size),
            "target": {
                "class_label": self.target.class_label,
                "box": None if self.target.box is None else self.target.box.to_list(),
                "mask_path": self.target.mask_path,
            },
            "baseline_p": self.baseline_p,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Heatmap":
        occluder = obj["occluder"]
        target = obj["target"]
        grid = np.array(
            [[np.nan if v is None else float(v) for v in row] for row in obj["grid"]],
            dtype=np.float64,
        )
        return cls(
            grid=grid,
            spec=OccluderSpec(
                size=int(occluder["size"]),
                stride=int(occluder["stride"]),
                fill=float(occluder["fill"]),
            ),
            image_size=(int(obj["image_size"][0]), int(obj["image_size"][1])),
            target=Target(
                class_label=str(target["class_label"]),
                box=None if target.get("box") is None else BBox.from_list(target["box"]),
                mask_path=target.get("mask_path"),
            ),
            baseline_p=None if obj.get("baseline_p") is None else float(obj["baseline_p"]),
        )


def _response_value(response: OracleResponse, target: Target, jaccard_min: float) -> float:
    """Target-class confidence of one oracle answer."""
    if target.mode == "classify":
        if response.outputs is None:
            raise OracleDownError(
                f"oracle answered request '{response.request_id}' without class outputs"
            )
        return float(response.outputs.get(target.class_label, 0.0))
    if response.detections is None:
        raise OracleDownError(
            f"oracle answered request '{response.request_id}' without detections"
        )
    best = 0.0
    for detection in response.detections:
        if jaccard(detection.box, target.box) >= jaccard_min:
            best = max(best, float(detection.class_probs.get(target.class_label, 0.0)))
    return best


def compute_heatmap(
    image: np.ndarray,
    spec: OccluderSpec,
    oracle,
    target: Target,
    jaccard_min: float = 0.5,
    parallelism: int = 4,
    input_id: str = "image",
    tmp_dir: str | None = None,
    partial: Heatmap | None = None,
) -> Heatmap:
    """Score one occluder position per grid cell, plus an unoccluded baseline.

    ``oracle`` is anything with query_batch(requests, parallelism). In
    detection mode the cell value is the best target-class probability
    over detections overlapping the ground-truth box by at least
    ``jaccard_min``; no qualifying detection scores 0. On oracle failure
    the raised error carries the partly filled heatmap under ``.partial``
    so the computation can resume from it.
    """
    image = np.asarray(image, dtype=np.float64)
    image_size = (image.shape[0], image.shape[1])
    rows, cols = grid_shape(image_size, spec)
    if target.mode == "detect" and not (0.0 < jaccard_min <= 1.0):
        raise ValidationError(f"jaccard_min must be in (0, 1], got {jaccard_min}")

    if partial is not None:
        if partial.grid.shape != (rows, cols) or partial.spec != spec:
            raise ValidationError("partial heatmap does not match this geometry")
        grid = partial.grid.copy()
        baseline_p = partial.baseline_p
    else:
        grid = np.full((rows, cols), np.nan)
        baseline_p = None

    heatmap = Heatmap(
        grid=grid, spec=spec, image_size=image_size, target=target, baseline_p=baseline_p
    )
    cells = [
        (r, c) for r in range(rows) for c in range(cols) if math.isnan(grid[r, c])
    ]
    if baseline_p is None or cells:
        scratch = tempfile.mkdtemp(
            prefix="depmetrics-", dir=os.environ.get("DEPMETRICS_TMP") or None
        )
        try:
            _fill_heatmap(heatmap, image, oracle, cells, jaccard_min, parallelism,
                          input_id, Path(scratch))
        finally:
            shutil.rmtree(scratch, ignore_errors=True)
    return heatmap


def _fill_heatmap(
    heatmap: Heatmap,
    image: np.ndarray,
    oracle,
    cells: list[tuple[int, int]],
    jaccard_min: float,
    parallelism: int,
    input_id: str,
    scratch: Path,
) -> None:
    spec = heatmap.spec
    requests: list[OracleRequest] = []
    positions: dict[str, tuple[int, int] | None] = {}

    if heatmap.baseline_p is None:
        path = scratch / f"{input_id}__full.png"
        save_image(image, path)
        request_id = f"{input_id}:base"
        requests.append(OracleRequest(request_id, str(path), heatmap.target.mode))
        positions[request_id] = None
    for r, c in cells:
        y, x, side = heatmap.footprint(r, c)
        occluded = image.copy()
        occluded[y : y + side, x : x + side, ...] = spec.fill
        path = scratch / f"{input_id}{occ_tag(y, x, side)}"
        save_image(occluded, path)
        request_id = f"{input_id}:r{r}c{c}"
        requests.append(OracleRequest(request_id, str(path), heatmap.target.mode))
        positions[request_id] = (r, c)

    def apply(response: OracleResponse) -> None:
        value = _response_value(response, heatmap.target, jaccard_min)
        if not (0.0 <= value <= 1.0):
            raise OracleDownError(f"oracle value {value} outside [0, 1]")
        cell = positions[response.request_id]
        if cell is None:
            heatmap.baseline_p = value
        else:
            heatmap.grid[cell] = value

    try:
        responses = oracle.query_batch(requests, parallelism=parallelism)
    except OracleError as e:
        for response in getattr(e, "completed", {}).values():
            if response.ok and response.request_id in positions:
                try:
                    apply(response)
                except OracleDownError:
                    pass
        raise OracleDownError(f"oracle failed: {e}", partial=heatmap) from e

    failed: str | None = None
    for response in responses:
        if response.ok:
            try:
                apply(response)
            except OracleDownError as e:
                if failed is None:
                    failed = str(e)
        elif failed is None:
            failed = f"request '{response.request_id}': {response.error}"
    if failed is not None:
        raise OracleDownError(f"oracle failed on {failed}", partial=heatmap)


@dataclass(frozen=True, slots=True)
class PixelSets:
    """Hot and occluding cell sets of one heatmap at one threshold."""

    rho: float
    hot: frozenset[tuple[int, int]]
    occluding: frozenset[tuple[int, int]]

    @property
    def overlap(self) -> frozenset[tuple[int, int]]:
        return self.hot & self.occluding


def occluding_cells(heatmap: Heatmap, mask: np.ndarray, min_overlap: float = 0.0) -> frozenset:
    """Cells whose occluder footprint covers part of the mask.

    Pure geometry: independent of rho and of the oracle's values. A cell
    qualifies when the covered fraction of its footprint exceeds
    ``min_overlap`` (default: any nonzero mask pixel).
    """
    mask = np.asarray(mask)
    if mask.shape != heatmap.image_size:
        raise ValidationError(
            f"mask shape {mask.shape} does not match image {heatmap.image_size}"
        )
    cells = set()
    area = heatmap.spec.size * heatmap.spec.size
    for r in range(heatmap.rows):
        for c in range(heatmap.cols):
            y, x, side = heatmap.footprint(r, c)
            covered = int(np.count_nonzero(mask[y : y + side, x : x + side]))
            if covered / area > min_overlap:
                cells.add((r, c))
    return frozenset(cells)


def pixel_sets(
    heatmap: Heatmap, mask: np.ndarray, rho: float, min_overlap: float = 0.0
) -> PixelSets:
    if not heatmap.complete:
        raise ValidationError("heatmap is incomplete; finish or resume it first")
    if not (0.0 <= rho <= 1.0):
        raise ValidationError(f"rho must be in [0, 1], got {rho}")
    hot = frozenset(
        (r, c)
        for r in range(heatmap.rows)
        for c in range(heatmap.cols)
        if heatmap.grid[r, c] < rho
    )
    return PixelSets(rho=rho, hot=hot, occluding=occluding_cells(heatmap, mask, min_overlap))


def interpret_metric(
    heatmap: Heatmap, mask: np.ndarray, rho: float, min_overlap: float = 0.0
) -> Fraction:
    """|hot & occluding| / |hot|; undefined (raises) when nothing is hot."""
    sets = pixel_sets(heatmap, mask, rho, min_overlap)
    if not sets.hot:
        raise NoHotPixelsError(
            f"no heatmap cell falls below rho={rho}; not interpretable at this threshold"
        )
    return Fraction(len(sets.overlap), len(sets.hot))


def occsen_metric(
    heatmap: Heatmap, mask: np.ndarray, rho: float, min_overlap: float = 0.0
) -> Fraction:
    """|hot & occluding| / |occluding|; the occluder grid must reach the object."""
    sets = pixel_sets(heatmap, mask, rho, min_overlap)
    if not sets.occluding:
        raise ObjectNotCoveredError("no occluder footprint touches the mask")
    return Fraction(len(sets.overlap), len(sets.occluding))


@dataclass(frozen=True, slots=True)
class RhoPoint:
    rho: float
    interpret: Fraction | None
    occsen: Fraction


def rho_sweep(
    heatmap: Heatmap, mask: np.ndarray, rhos: list[float], min_overlap: float = 0.0
) -> list[RhoPoint]:
    """Both metrics per threshold; interpretation is absent where nothing is hot."""
    if any(b < a for a, b in zip(rhos, rhos[1:])):
        raise ValidationError("rho values must be sorted ascending")
    if rhos and not (0.0 <= rhos[0] and rhos[-1] <= 1.0):
        raise ValidationError("rho values must lie in [0, 1]")
    occluding = occluding_cells(heatmap, mask, min_overlap)
    if not occluding:
        raise ObjectNotCoveredError("no occluder footprint touches the mask")
    points = []
    for rho in rhos:
        sets = pixel_sets(heatmap, mask, rho, min_overlap)
        interpret = (
            Fraction(len(sets.overlap), len(sets.hot)) if sets.hot else None
        )
        points.append(
            RhoPoint(
                rho=rho,
                interpret=interpret,
                occsen=Fraction(len(sets.overlap), len(occluding)),
            )
        )
    return points
