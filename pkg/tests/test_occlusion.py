"""Heatmap geometry, pixel sets and the two interpretation ratios."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from depmetrics.errors import (
    NoHotPixelsError,
    ObjectNotCoveredError,
    OccluderTooLargeError,
    OracleDownError,
    ValidationError,
)
from depmetrics.model import BBox
from depmetrics.occlusion import (
    Heatmap,
    OccluderSpec,
    Target,
    compute_heatmap,
    grid_shape,
    interpret_metric,
    occluding_cells,
    occsen_metric,
    pixel_sets,
    rho_sweep,
)
from depmetrics.oracle import OracleSession

from conftest import constant_oracle, geometric_oracle, stub_oracle_cmd, write_script


def tiled_heatmap(grid, target=None, baseline=1.0) -> Heatmap:
    """Heatmap whose occluder tiles the image disjointly (size == stride == 10)."""
    grid = np.asarray(grid, dtype=np.float64)
    rows, cols = grid.shape
    return Heatmap(
        grid=grid,
        spec=OccluderSpec(size=10, stride=10),
        image_size=(rows * 10, cols * 10),
        target=target or Target("person"),
        baseline_p=baseline,
    )


def mask_for_cells(cells, rows=10, cols=10) -> np.ndarray:
    """Mask with one object pixel inside each named tile."""
    mask = np.zeros((rows * 10, cols * 10), dtype=bool)
    for r, c in cells:
        mask[r * 10 + 4, c * 10 + 4] = True
    return mask


def fig3b_fixture():
    """9 hot cells, 30 occluding cells, 5 in both (counts from the worked example)."""
    grid = np.full((10, 10), 0.9)
    occluding = {(r, c) for r in range(5) for c in range(2, 8)}  # 5*6 = 30
    hot = {(0, 2), (1, 3), (2, 4), (3, 5), (4, 6)} | {(7, 0), (7, 1), (8, 0), (9, 9)}
    assert len(hot) == 9 and len(hot & occluding) == 5
    for cell in hot:
        grid[cell] = 0.2
    return tiled_heatmap(grid), mask_for_cells(occluding)


class TestGeometry:
    def test_nine_by_nine_grid(self):
        assert grid_shape((100, 100), OccluderSpec(size=20, stride=10)) == (9, 9)

    def test_occluder_too_large(self):
        with pytest.raises(OccluderTooLargeError):
            grid_shape((16, 100), OccluderSpec(size=20, stride=10))

    def test_non_square_image(self):
        assert grid_shape((50, 80), OccluderSpec(size=10, stride=10)) == (5, 8)

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            OccluderSpec(size=0, stride=1)
        with pytest.raises(ValidationError):
            OccluderSpec(size=5, stride=0)
        with pytest.raises(ValidationError):
            OccluderSpec(size=5, stride=5, fill=1.5)


class TestComputeHeatmap:
    def test_constant_oracle_gives_uniform_grid(self):
        image = np.full((60, 60), 0.4)
        heatmap = compute_heatmap(
            image, OccluderSpec(size=20, stride=20), constant_oracle(0.7), Target("car")
        )
        assert heatmap.grid.shape == (3, 3)
        assert np.all(heatmap.grid == 0.7)
        assert heatmap.baseline_p == 0.7

    def test_geometric_hot_region_matches_overlap_oracle(self):
        box = (30.0, 30.0, 60.0, 60.0)
        image = np.full((100, 100), 0.3)
        spec = OccluderSpec(size=20, stride=10)
        heatmap = compute_heatmap(
            image, spec, geometric_oracle(box), Target("car"), input_id="geo"
        )
        hot = {
            (r, c)
            for r in range(heatmap.rows)
            for c in range(heatmap.cols)
            if heatmap.grid[r, c] < 0.999
        }
        # independent geometry: a cell is hot iff its footprint overlaps the box
        expected = set()
        x0, y0, x1, y1 = box
        for r in range(heatmap.rows):
            for c in range(heatmap.cols):
                y, x, side = heatmap.footprint(r, c)
                iw = min(x + side, x1) - max(x, x0)
                ih = min(y + side, y1) - max(y, y0)
                if iw > 0 and ih > 0 and (iw * ih) / side**2 > 1 - 0.999:
                    expected.add((r, c))
        assert hot == expected

    def test_detection_mode_filters_by_jaccard(self):
        from depmetrics.model import Detection
        from depmetrics.oracle import OracleResponse
        from conftest import FakeOracle

        gt_box = BBox(10, 10, 50, 50)

        def fn(request):
            detections = (
                Detection(BBox(10, 10, 50, 50), {"car": 0.8}),   # jaccard 1
                Detection(BBox(200, 200, 300, 300), {"car": 0.99}),  # disjoint
            )
            return OracleResponse(request.request_id, detections=detections)

        heatmap = compute_heatmap(
            np.full((60, 60), 0.5),
            OccluderSpec(size=20, stride=20),
            FakeOracle(fn),
            Target("car", box=gt_box),
            jaccard_min=0.5,
        )
        assert np.all(heatmap.grid == 0.8)

    def test_detection_mode_scores_zero_without_match(self):
        from depmetrics.oracle import OracleResponse
        from conftest import FakeOracle

        oracle = FakeOracle(lambda r: OracleResponse(r.request_id, detections=()))
        heatmap = compute_heatmap(
            np.full((40, 40), 0.5),
            OccluderSpec(size=20, stride=20),
            oracle,
            Target("car", box=BBox(5, 5, 30, 30)),
        )
        assert np.all(heatmap.grid == 0.0)

    def test_parallelism_does_not_change_result(self):
        cmd = stub_oracle_cmd("geometric:30,30,60,60")
        image = np.full((100, 100), 0.3)
        spec = OccluderSpec(size=20, stride=10)
        grids = []
        for parallelism, tag in ((1, "p1"), (8, "p8")):
            with OracleSession(cmd) as session:
                heatmap = compute_heatmap(
                    image, spec, session, Target("car"),
                    parallelism=parallelism, input_id=tag,
                )
            grids.append(heatmap.grid)
        assert np.array_equal(grids[0], grids[1])

    def test_oracle_down_carries_partial_then_resume_equals_fresh(self, tmp_path):
        dying = write_script(
            tmp_path,
            """
            import json, re, sys
            print(json.dumps({"protocol": "depmetrics-oracle", "version": 1}), flush=True)
            answered = 0
            for line in sys.stdin:
                req = json.loads(line)
                tag = re.search(r"__occ_y(\\d+)_x(\\d+)_s(\\d+)\\.png$", req["image"])
                value = 0.25 if tag else 1.0
                print(json.dumps({"id": req["id"], "outputs": {"car": value}}), flush=True)
                answered += 1
                if answered >= 20:
                    sys.exit(1)
            """,
        )
        healthy = write_script(
            tmp_path,
            """
            import json, re, sys
            print(json.dumps({"protocol": "depmetrics-oracle", "version": 1}), flush=True)
            for line in sys.stdin:
                req = json.loads(line)
                tag = re.search(r"__occ_y(\\d+)_x(\\d+)_s(\\d+)\\.png$", req["image"])
                value = 0.25 if tag else 1.0
                print(json.dumps({"id": req["id"], "outputs": {"car": value}}), flush=True)
            """,
            name="healthy.py",
        )
        image = np.full((100, 100), 0.6)
        spec = OccluderSpec(size=20, stride=10)

        with OracleSession(dying) as session:
            with pytest.raises(OracleDownError) as err:
                compute_heatmap(image, spec, session, Target("car"),
                                parallelism=4, input_id="dying")
        partial = err.value.partial
        assert partial is not None
        done_cells = int(np.count_nonzero(~np.isnan(partial.grid)))
        assert 0 < done_cells < partial.rows * partial.cols

        with OracleSession(healthy) as session:
            resumed = compute_heatmap(
                image, spec, session, Target("car"),
                parallelism=4, input_id="resumed", partial=partial,
            )
        with OracleSession(healthy) as session:
            fresh = compute_heatmap(
                image, spec, session, Target("car"), parallelism=4, input_id="fresh"
            )
        assert resumed.complete
        assert np.array_equal(resumed.grid, fresh.grid)
        assert resumed.baseline_p == fresh.baseline_p

    def test_error_response_raises_oracle_down(self):
        from depmetrics.oracle import OracleResponse
        from conftest import FakeOracle

        oracle = FakeOracle(lambda r: OracleResponse(r.request_id, error="decode failed"))
        with pytest.raises(OracleDownError):
            compute_heatmap(
                np.full((30, 30), 0.5), OccluderSpec(size=10, stride=10),
                oracle, Target("car"),
            )


class TestPixelSets:
    def test_occluding_is_pure_geometry(self):
        heatmap_a = tiled_heatmap(np.full((4, 4), 0.1))
        heatmap_b = tiled_heatmap(np.full((4, 4), 0.9))
        mask = mask_for_cells({(0, 0), (1, 2)}, rows=4, cols=4)
        occ_a = occluding_cells(heatmap_a, mask)
        occ_b = occluding_cells(heatmap_b, mask)
        assert occ_a == occ_b == {(0, 0), (1, 2)}

    def test_overlapping_footprints(self):
        # size 20 / stride 10: several footprints straddle one mask pixel
        heatmap = Heatmap(
            grid=np.full((9, 9), 0.5),
            spec=OccluderSpec(size=20, stride=10),
            image_size=(100, 100),
            target=Target("car"),
            baseline_p=1.0,
        )
        mask = np.zeros((100, 100), dtype=bool)
        mask[35, 35] = True
        cells = occluding_cells(heatmap, mask)
        assert cells == {(r, c) for r in (2, 3) for c in (2, 3)}

    def test_min_overlap_fraction(self):
        heatmap = tiled_heatmap(np.full((2, 2), 0.5))
        mask = np.zeros((20, 20), dtype=bool)
        mask[0:10, 0:5] = True  # covers half of tile (0, 0)
        assert occluding_cells(heatmap, mask, min_overlap=0.0) == {(0, 0)}
        assert occluding_cells(heatmap, mask, min_overlap=0.4) == {(0, 0)}
        assert occluding_cells(heatmap, mask, min_overlap=0.5) == set()

    def test_mask_shape_must_match(self):
        heatmap = tiled_heatmap(np.full((2, 2), 0.5))
        with pytest.raises(ValidationError, match="mask"):
            pixel_sets(heatmap, np.zeros((5, 5), dtype=bool), rho=0.5)

    def test_incomplete_heatmap_rejected(self):
        grid = np.full((2, 2), np.nan)
        heatmap = tiled_heatmap(grid)
        with pytest.raises(ValidationError, match="incomplete"):
            pixel_sets(heatmap, np.zeros((20, 20), dtype=bool), rho=0.5)


class TestMetrics:
    def test_worked_nine_thirty_five(self):
        heatmap, mask = fig3b_fixture()
        assert interpret_metric(heatmap, mask, rho=0.5) == Fraction(5, 9)
        assert occsen_metric(heatmap, mask, rho=0.5) == Fraction(5, 30)

    def test_hot_inside_occluding_is_one(self):
        grid = np.full((4, 4), 0.9)
        grid[1, 1] = grid[1, 2] = 0.1
        heatmap = tiled_heatmap(grid)
        mask = mask_for_cells({(1, 1), (1, 2), (2, 2)}, rows=4, cols=4)
        assert interpret_metric(heatmap, mask, rho=0.5) == 1

    def test_half_hot_fixture(self):
        grid = np.full((4, 4), 0.9)
        hot = [(0, 0), (0, 1), (2, 2), (3, 3)]
        for cell in hot:
            grid[cell] = 0.0
        heatmap = tiled_heatmap(grid)
        mask = mask_for_cells({(0, 0), (0, 1)}, rows=4, cols=4)
        assert interpret_metric(heatmap, mask, rho=0.5) == Fraction(2, 4)

    def test_no_hot_pixels_is_an_error_not_zero(self):
        heatmap = tiled_heatmap(np.full((3, 3), 0.8))
        mask = mask_for_cells({(0, 0)}, rows=3, cols=3)
        with pytest.raises(NoHotPixelsError, match="not interpretable"):
            interpret_metric(heatmap, mask, rho=0.2)

    def test_no_hot_pixels_gives_occsen_zero(self):
        heatmap = tiled_heatmap(np.full((3, 3), 0.8))
        mask = mask_for_cells({(0, 0), (1, 1)}, rows=3, cols=3)
        assert occsen_metric(heatmap, mask, rho=0.2) == 0

    def test_hot_superset_of_occluding_is_one(self):
        heatmap = tiled_heatmap(np.full((3, 3), 0.1))
        mask = mask_for_cells({(0, 0), (2, 2)}, rows=3, cols=3)
        assert occsen_metric(heatmap, mask, rho=0.5) == 1

    def test_object_not_covered(self):
        heatmap, _ = fig3b_fixture()
        empty_mask = np.zeros((100, 100), dtype=bool)
        with pytest.raises(ObjectNotCoveredError):
            occsen_metric(heatmap, empty_mask, rho=0.5)


class TestRhoSweep:
    def test_extremes(self):
        heatmap, mask = fig3b_fixture()
        points = rho_sweep(heatmap, mask, [0.1, 0.95])
        below, above = points
        assert below.interpret is None  # nothing hot below min(grid)
        assert below.occsen == 0
        assert above.interpret == Fraction(30, 100)  # hot = whole grid
        assert above.occsen == 1

    def test_occsen_nondecreasing_on_staircase(self):
        rows = 6
        grid = np.tile(np.linspace(0.1, 0.9, rows).reshape(rows, 1), (1, 4))
        heatmap = tiled_heatmap(grid)
        mask = mask_for_cells({(r, 0) for r in range(rows)}, rows=rows, cols=4)
        rhos = [i / 20 for i in range(21)]
        points = rho_sweep(heatmap, mask, rhos)
        occsen = [p.occsen for p in points]
        assert all(b >= a for a, b in zip(occsen, occsen[1:]))
        # brute-force set recount per rho
        for p in points:
            hot = {(r, c) for r in range(rows) for c in range(4) if grid[r, c] < p.rho}
            occluding = {(r, 0) for r in range(rows)}
            assert p.occsen == Fraction(len(hot & occluding), len(occluding))

    def test_unsorted_rhos_rejected(self):
        heatmap, mask = fig3b_fixture()
        with pytest.raises(ValidationError, match="ascending"):
            rho_sweep(heatmap, mask, [0.5, 0.1])

    def test_shared_numerator_with_interpret(self):
        heatmap, mask = fig3b_fixture()
        sets = pixel_sets(heatmap, mask, rho=0.5)
        assert interpret_metric(heatmap, mask, 0.5) == Fraction(len(sets.overlap), len(sets.hot))
        assert occsen_metric(heatmap, mask, 0.5) == Fraction(
            len(sets.overlap), len(sets.occluding)
        )


class TestSerialization:
    def test_round_trip_with_nan(self):
        grid = np.full((3, 3), 0.5)
        grid[1, 1] = np.nan
        heatmap = tiled_heatmap(grid, target=Target("car", box=BBox(1, 1, 9, 9)))
        again = Heatmap.from_dict(heatmap.to_dict())
        assert np.array_equal(heatmap.grid, again.grid, equal_nan=True)
        assert again.spec == heatmap.spec
        assert again.target == heatmap.target
        assert again.baseline_p == heatmap.baseline_p
