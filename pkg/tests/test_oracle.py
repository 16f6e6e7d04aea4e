"""Wire-protocol client: handshake, demultiplexing, fault injection."""

from __future__ import annotations

import pytest

from depmetrics.errors import (
    ChildExitedError,
    MalformedResponseError,
    SpawnFailedError,
    ValidationError,
    VersionMismatchError,
)
from depmetrics.formats import write_predictions
from depmetrics.model import PredictionRecord
from depmetrics.oracle import OracleRequest, parse_response_line, spawn

from conftest import stub_oracle_cmd, write_script


def requests(n, mode="classify"):
    return [OracleRequest(f"r{i}", f"/tmp/img{i}.png", mode) for i in range(n)]


class TestHandshake:
    def test_spawn_and_version_one(self):
        with spawn(stub_oracle_cmd("constant:0.7")) as session:
            responses = session.query_batch(requests(1))
        assert responses[0].outputs == {"car": 0.7, "background": 0.3}

    def test_command_not_found(self):
        with pytest.raises(SpawnFailedError):
            spawn(["/nonexistent/oracle-binary"])

    def test_version_mismatch(self):
        with pytest.raises(VersionMismatchError, match="2"):
            spawn(stub_oracle_cmd("constant:0.5", "--version", "2"))

    def test_wrong_protocol_name(self, tmp_path):
        cmd = write_script(
            tmp_path,
            """
            import json, sys
            print(json.dumps({"protocol": "something-else", "version": 1}), flush=True)
            sys.stdin.read()
            """,
        )
        with pytest.raises(MalformedResponseError, match="protocol"):
            spawn(cmd)

    def test_handshake_timeout(self, tmp_path):
        cmd = write_script(
            tmp_path,
            """
            import time
            time.sleep(60)
            """,
        )
        from depmetrics.errors import HandshakeTimeoutError

        with pytest.raises(HandshakeTimeoutError):
            spawn(cmd, handshake_timeout=0.3)


class TestQueryBatch:
    def test_three_requests_matched_by_id(self):
        with spawn(stub_oracle_cmd("constant:0.25")) as session:
            responses = session.query_batch(requests(3), parallelism=2)
        assert [r.request_id for r in responses] == ["r0", "r1", "r2"]
        assert all(r.ok for r in responses)

    def test_out_of_order_responses(self, tmp_path):
        cmd = write_script(
            tmp_path,
            """
            import json, sys
            print(json.dumps({"protocol": "depmetrics-oracle", "version": 1}), flush=True)
            pending = None
            for line in sys.stdin:
                req = json.loads(line)
                if pending is None:
                    pending = req
                    continue
                # answer the newer request first, then the buffered one
                for r in (req, pending):
                    print(json.dumps({"id": r["id"], "outputs": {"car": 0.5, "background": 0.5}}), flush=True)
                pending = None
            if pending is not None:
                print(json.dumps({"id": pending["id"], "outputs": {"car": 0.5, "background": 0.5}}), flush=True)
            """,
        )
        with spawn(cmd) as session:
            responses = session.query_batch(requests(4), parallelism=4)
        assert [r.request_id for r in responses] == ["r0", "r1", "r2", "r3"]
        assert all(r.ok for r in responses)

    def test_dropped_id_times_out_others_succeed(self):
        with spawn(
            stub_oracle_cmd("constant:0.5", "--drop-id", "r1"),
            request_timeout=0.3,
            retries=1,
        ) as session:
            responses = session.query_batch(requests(3), parallelism=3)
        by_id = {r.request_id: r for r in responses}
        assert by_id["r0"].ok and by_id["r2"].ok
        assert not by_id["r1"].ok
        assert "timeout" in by_id["r1"].error

    def test_out_of_range_probability_is_malformed(self, tmp_path):
        cmd = write_script(
            tmp_path,
            """
            import json, sys
            print(json.dumps({"protocol": "depmetrics-oracle", "version": 1}), flush=True)
            for line in sys.stdin:
                req = json.loads(line)
                print(json.dumps({"id": req["id"], "outputs": {"car": 1.3}}), flush=True)
            """,
        )
        with spawn(cmd) as session:
            with pytest.raises(MalformedResponseError, match="1.3"):
                session.query_batch(requests(1))

    def test_child_exit_mid_batch(self, tmp_path):
        cmd = write_script(
            tmp_path,
            """
            import json, sys
            print(json.dumps({"protocol": "depmetrics-oracle", "version": 1}), flush=True)
            answered = 0
            for line in sys.stdin:
                req = json.loads(line)
                print(json.dumps({"id": req["id"], "outputs": {"car": 0.5}}), flush=True)
                answered += 1
                if answered == 2:
                    sys.exit(0)
            """,
        )
        with spawn(cmd) as session:
            with pytest.raises(ChildExitedError) as err:
                session.query_batch(requests(5), parallelism=2)
        assert len(err.value.completed) == 2

    def test_request_ids_unique_within_batch(self):
        with spawn(stub_oracle_cmd("constant:0.5")) as session:
            bad = [OracleRequest("same", "/tmp/a.png"), OracleRequest("same", "/tmp/b.png")]
            with pytest.raises(ValidationError, match="unique"):
                session.query_batch(bad)

    def test_request_ids_unique_per_session(self):
        with spawn(stub_oracle_cmd("constant:0.5")) as session:
            session.query_batch(requests(2))
            with pytest.raises(ValidationError, match="already used"):
                session.query_batch(requests(2))

    def test_detection_mode_responses(self):
        with spawn(stub_oracle_cmd("geometric:10,10,40,40")) as session:
            responses = session.query_batch(requests(1, mode="detect"))
        (response,) = responses
        assert response.detections is not None
        assert response.detections[0].box.to_list() == [10.0, 10.0, 40.0, 40.0]


class TestResponseParsing:
    def test_error_payload(self):
        response = parse_response_line('{"id": "x", "error": "decode failed"}')
        assert not response.ok

    def test_exactly_one_payload_required(self):
        with pytest.raises(MalformedResponseError):
            parse_response_line('{"id": "x"}')
        with pytest.raises(MalformedResponseError):
            parse_response_line('{"id": "x", "outputs": {"a": 0.1}, "error": "y"}')

    def test_invalid_box_rejected(self):
        line = '{"id": "x", "detections": [{"box": [5, 0, 5, 10], "class_probs": {"car": 0.5}}]}'
        with pytest.raises(MalformedResponseError):
            parse_response_line(line)

    def test_not_json(self):
        with pytest.raises(MalformedResponseError):
            parse_response_line("garbage{")


class TestDeterminism:
    def test_persisted_records_byte_identical_across_runs(self, tmp_path):
        def run(path):
            with spawn(stub_oracle_cmd("constant:0.7")) as session:
                responses = session.query_batch(requests(4), parallelism=2)
            records = [
                PredictionRecord(input_id=f"in{i}", outputs=r.outputs)
                for i, r in enumerate(responses)
            ]
            write_predictions(records, path)

        run(tmp_path / "one.jsonl")
        run(tmp_path / "two.jsonl")
        assert (tmp_path / "one.jsonl").read_bytes() == (tmp_path / "two.jsonl").read_bytes()
