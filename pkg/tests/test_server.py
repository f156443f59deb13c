import json
import threading
import urllib.error
import urllib.request

import pytest

from motionpin.ingest import load_session
from motionpin.records import validate_trace
from motionpin.server import make_server
from motionpin.synth import SynthConfig, gen_session


@pytest.fixture
def server(tmp_path):
    srv = make_server("127.0.0.1", 0, tmp_path / "data")
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    srv.base = f"http://127.0.0.1:{srv.server_address[1]}"
    yield srv
    srv.shutdown()
    srv.server_close()
    thread.join(timeout=5)


def call(server, method, path, body=None):
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(server.base + path, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read() or b"{}"), dict(resp.headers)
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read() or b"{}"), dict(err.headers)


def sample_obj(t, z=9.81):
    return {"t": t, "acc": [0, 0, 0], "accG": [0, 0, z], "rotR": [0, 0, 0],
            "ori": [0, 0, 0], "interval": 16.6}


def event_obj(t, digit, idx, expected="1234", entered="1234"):
    return {"t": t, "digit": digit, "idx": idx, "expected": expected, "entered": entered}


class TestSessions:
    def test_create_writes_single_header_line(self, server):
        status, body, _ = call(server, "POST", "/v1/sessions",
                               {"user": "u1", "device": "pytest"})
        assert status == 201
        sid = body["id"]
        assert len(sid) == 16
        path = server.store.data_dir / f"{sid}.jsonl"
        lines = path.read_text().splitlines()
        assert len(lines) == 1
        assert json.loads(lines[0])["k"] == "h"

    def test_distinct_ids(self, server):
        ids = {call(server, "POST", "/v1/sessions", {})[1]["id"] for _ in range(5)}
        assert len(ids) == 5

    def test_header_round_trip(self, server):
        _, body, _ = call(server, "POST", "/v1/sessions", {"user": "u9", "device": "nexus"})
        sid = body["id"]
        path = server.store.data_dir / f"{sid}.jsonl"
        _, _, meta = load_session(path)
        assert meta["session_id"] == sid
        assert meta["user_id"] == "u9"
        assert meta["device_label"] == "nexus"

    def test_get_unknown_is_404(self, server):
        status, body, _ = call(server, "GET", "/v1/sessions/doesnotexist0000")
        assert status == 404 and "error" in body


class TestAppendSamples:
    def _session(self, server):
        return call(server, "POST", "/v1/sessions", {"user": "u", "device": "d"})[1]["id"]

    def test_batch_accepted(self, server):
        sid = self._session(server)
        status, body, _ = call(server, "POST", f"/v1/sessions/{sid}/samples",
                               {"samples": [sample_obj(t) for t in range(12)]})
        assert status == 200 and body["accepted"] == 12

    def test_time_regression_rejected_atomically(self, server):
        sid = self._session(server)
        path = server.store.data_dir / f"{sid}.jsonl"
        before = len(path.read_text().splitlines())
        batch = [sample_obj(0), sample_obj(1), sample_obj(2), sample_obj(1.5)]
        status, body, _ = call(server, "POST", f"/v1/sessions/{sid}/samples",
                               {"samples": batch})
        assert status == 400
        assert "sample 3" in body["error"]
        assert len(path.read_text().splitlines()) == before   # nothing written

    def test_tie_with_persisted_t_rejected(self, server):
        sid = self._session(server)
        call(server, "POST", f"/v1/sessions/{sid}/samples", {"samples": [sample_obj(10)]})
        status, body, _ = call(server, "POST", f"/v1/sessions/{sid}/samples",
                               {"samples": [sample_obj(10)]})
        assert status == 400 and "sample 0" in body["error"]

    def test_malformed_sample_rejected(self, server):
        sid = self._session(server)
        status, body, _ = call(server, "POST", f"/v1/sessions/{sid}/samples",
                               {"samples": [{"acc": [0, 0, 0]}]})
        assert status == 400 and "missing field 't'" in body["error"]


class TestAppendEvents:
    def _session(self, server):
        return call(server, "POST", "/v1/sessions", {"user": "u", "device": "d"})[1]["id"]

    def test_events_accepted(self, server):
        sid = self._session(server)
        events = [event_obj(100 + i * 300, d, i) for i, d in enumerate((1, 2, 3, 4))]
        status, body, _ = call(server, "POST", f"/v1/sessions/{sid}/events",
                               {"events": events})
        assert status == 200 and body["accepted"] == 4

    def test_bad_digit_rejected(self, server):
        sid = self._session(server)
        status, body, _ = call(server, "POST", f"/v1/sessions/{sid}/events",
                               {"events": [event_obj(0, 10, 0)]})
        assert status == 400 and "digit" in body["error"]

    def test_mismatched_entry_recorded_verbatim(self, server):
        sid = self._session(server)
        ev = event_obj(50, 9, 3, expected="1234", entered="1239")
        status, body, _ = call(server, "POST", f"/v1/sessions/{sid}/events",
                               {"events": [ev]})
        assert status == 200 and body["accepted"] == 1
        path = server.store.data_dir / f"{sid}.jsonl"
        last = json.loads(path.read_text().splitlines()[-1])
        assert last["expected"] == "1234" and last["entered"] == "1239"


class TestClose:
    def _session(self, server):
        return call(server, "POST", "/v1/sessions", {"user": "u", "device": "d"})[1]["id"]

    def test_write_after_close_conflicts(self, server):
        sid = self._session(server)
        status, body, _ = call(server, "POST", f"/v1/sessions/{sid}/close")
        assert status == 200 and body["session"]["state"] == "closed"
        status, body, _ = call(server, "POST", f"/v1/sessions/{sid}/samples",
                               {"samples": [sample_obj(0)]})
        assert status == 409

    def test_double_close_idempotent(self, server):
        sid = self._session(server)
        s1 = call(server, "POST", f"/v1/sessions/{sid}/close")
        s2 = call(server, "POST", f"/v1/sessions/{sid}/close")
        assert s1[0] == s2[0] == 200

    def test_close_unknown_404(self, server):
        assert call(server, "POST", "/v1/sessions/nope/close")[0] == 404


class TestRoundTrip:
    def test_synthetic_session_bit_exact_through_server(self, server):
        cfg = SynthConfig(seed=10, n_users=1, reps=1)
        trace, events = gen_session(cfg, "user00", list(cfg.pins[:2]))
        sid = call(server, "POST", "/v1/sessions", {"user": "user00", "device": "synth"})[1]["id"]
        samples = [
            {"t": s.t, "acc": list(s.acc), "accG": list(s.accG), "rotR": list(s.rotR),
             "ori": list(s.ori), "interval": s.interval}
            for s in trace.samples
        ]
        for i in range(0, len(samples), 64):
            status, body, _ = call(server, "POST", f"/v1/sessions/{sid}/samples",
                                   {"samples": samples[i:i + 64]})
            assert status == 200
        ev_payload = [{"t": e.t, "digit": e.digit, "idx": e.entry_index,
                       "expected": e.expected_pin, "entered": e.entered_pin}
                      for e in events]
        assert call(server, "POST", f"/v1/sessions/{sid}/events",
                    {"events": ev_payload})[0] == 200
        call(server, "POST", f"/v1/sessions/{sid}/close")

        parsed_trace, parsed_events, _ = load_session(server.store.data_dir / f"{sid}.jsonl")
        assert validate_trace(parsed_trace) == []
        assert len(parsed_trace.samples) == len(trace.samples)
        for a, b in zip(trace.samples, parsed_trace.samples):
            assert a == b
        assert parsed_events == events

    def test_concurrent_clients_do_not_interleave(self, server):
        # 4 clients x 250 batches = 1000 concurrent requests
        n_clients, n_batches, batch = 4, 250, 8
        sids = [call(server, "POST", "/v1/sessions", {"user": f"c{i}"})[1]["id"]
                for i in range(n_clients)]
        errors = []

        def client(idx):
            sid = sids[idx]
            try:
                for b in range(n_batches):
                    t0 = b * batch
                    payload = {"samples": [sample_obj(t0 + j) for j in range(batch)]}
                    status, _, _ = call(server, "POST", f"/v1/sessions/{sid}/samples", payload)
                    assert status == 200
            except Exception as err:       # pragma: no cover
                errors.append(err)

        threads = [threading.Thread(target=client, args=(i,)) for i in range(n_clients)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert errors == []
        for sid in sids:
            path = server.store.data_dir / f"{sid}.jsonl"
            lines = path.read_text().splitlines()
            assert len(lines) == 1 + n_clients * 0 + n_batches * batch
            trace, _, _ = load_session(path)
            assert validate_trace(trace) == []


class TestCors:
    def test_preflight_allows_collector_origin(self, server):
        req = urllib.request.Request(server.base + "/v1/sessions", method="OPTIONS")
        with urllib.request.urlopen(req) as resp:
            assert resp.status == 204
            assert resp.headers["Access-Control-Allow-Origin"] == "*"
            assert "POST" in resp.headers["Access-Control-Allow-Methods"]
