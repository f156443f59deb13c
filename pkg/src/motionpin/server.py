"""Capture service: accepts sensor batches and key events over HTTP and
appends them to per-session files in the ingest line format.

API (JSON bodies; samples/events use the same field layout as file lines,
minus the "k" tag):

  POST /v1/sessions                {"user": ..., "device": ...} -> 201 {"id": ...}
  POST /v1/sessions/{id}/samples   {"samples": [...]}           -> 200 {"accepted": n}
  POST /v1/sessions/{id}/events    {"events": [...]}            -> 200 {"accepted": n}
  POST /v1/sessions/{id}/close                                  -> 200 {"session": {...}}
  GET  /v1/sessions/{id}                                        -> 200 {"session": {...}}

Batches are atomic: a rejected record means nothing from that request is
written. Sample times must be strictly increasing across the whole session so
files always re-parse with zero trace violations; key events must be
non-decreasing. CORS is permissive for the configured collector origin.
"""

from __future__ import annotations

import json
import re
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .ingest import event_line, header_line, sample_line
from .records import KeyEvent, SensorSample, TRIPLE_NAMES


class StoreError(Exception):
    status = 400


class UnknownSessionError(StoreError):
    status = 404


class SessionClosedError(StoreError):
    status = 409


class PayloadError(StoreError):
    status = 400


@dataclass
class Session:
    id: str
    user: str
    device: str
    created: str
    path: Path
    state: str = "open"
    last_sample_t: float = -1.0
    last_event_t: float = -1.0
    n_samples: int = 0
    n_events: int = 0

    def to_public(self) -> dict:
        return {"id": self.id, "user": self.user, "device": self.device,
                "created": self.created, "state": self.state,
                "samples": self.n_samples, "events": self.n_events}


def _parse_sample_obj(obj, index: int) -> SensorSample:
    if not isinstance(obj, dict):
        raise PayloadError(f"sample {index}: not an object")
    if "t" not in obj:
        raise PayloadError(f"sample {index}: missing field 't'")
    try:
        return SensorSample(t=obj["t"],
                            **{n: obj.get(n) for n in TRIPLE_NAMES},
                            interval=obj.get("interval"))
    except (TypeError, ValueError) as err:
        raise PayloadError(f"sample {index}: {err}") from err


def _parse_event_obj(obj, index: int) -> KeyEvent:
    if not isinstance(obj, dict):
        raise PayloadError(f"event {index}: not an object")
    for key in ("t", "digit", "idx", "expected"):
        if key not in obj:
            raise PayloadError(f"event {index}: missing field {key!r}")
    try:
        return KeyEvent(t=obj["t"], digit=obj["digit"], entry_index=obj["idx"],
                        expected_pin=obj["expected"], entered_pin=obj.get("entered"))
    except (TypeError, ValueError) as err:
        raise PayloadError(f"event {index}: {err}") from err


class SessionStore:
    """Thread-safe, append-only session files under one data directory."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict = {}
        self._lock = threading.Lock()
        self._locks: dict = {}

    def _get(self, session_id: str) -> tuple:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                raise UnknownSessionError(f"unknown session {session_id!r}")
            return session, self._locks[session_id]

    def create(self, user: str, device: str) -> Session:
        session_id = secrets.token_urlsafe(12)       # 16 URL-safe chars
        created = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        session = Session(id=session_id, user=str(user), device=str(device),
                          created=created, path=self.data_dir / f"{session_id}.jsonl")
        with self._lock:
            if session_id in self._sessions:          # astronomically unlikely
                raise StoreError("session id collision, retry")
            self._sessions[session_id] = session
            self._locks[session_id] = threading.Lock()
        with open(session.path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header_line(session.id, session.user, session.device, session.created) + "\n")
        return session

    def get(self, session_id: str) -> Session:
        return self._get(session_id)[0]

    def append_samples(self, session_id: str, samples: list) -> int:
        if not isinstance(samples, list):
            raise PayloadError("'samples' must be a list")
        session, lock = self._get(session_id)
        with lock:
            if session.state != "open":
                raise SessionClosedError(f"session {session_id} is closed")
            last_t = session.last_sample_t
            lines = []
            for i, obj in enumerate(samples):
                sample = _parse_sample_obj(obj, i)
                if sample.t <= last_t:
                    raise PayloadError(
                        f"sample {i}: t={sample.t} not after previous t={last_t}")
                last_t = sample.t
                lines.append(sample_line(sample))
            if lines:
                with open(session.path, "a", encoding="utf-8", newline="\n") as fh:
                    fh.write("\n".join(lines) + "\n")
                session.last_sample_t = last_t
                session.n_samples += len(lines)
            return len(lines)

    def append_events(self, session_id: str, events: list) -> int:
        if not isinstance(events, list):
            raise PayloadError("'events' must be a list")
        session, lock = self._get(session_id)
        with lock:
            if session.state != "open":
                raise SessionClosedError(f"session {session_id} is closed")
            last_t = session.last_event_t
            lines = []
            for i, obj in enumerate(events):
                ev = _parse_event_obj(obj, i)
                if ev.t < last_t:
                    raise PayloadError(f"event {i}: t={ev.t} before previous t={last_t}")
                last_t = ev.t
                lines.append(event_line(ev))
            if lines:
                with open(session.path, "a", encoding="utf-8", newline="\n") as fh:
                    fh.write("\n".join(lines) + "\n")
                session.last_event_t = last_t
                session.n_events += len(lines)
            return len(lines)

    def close(self, session_id: str) -> Session:
        session, lock = self._get(session_id)
        with lock:
            session.state = "closed"                   # idempotent
            return session


_ROUTE = re.compile(r"^/v1/sessions(?:/([A-Za-z0-9_-]+)(?:/(samples|events|close))?)?$")


def make_handler(store: SessionStore, allow_origin: str = "*"):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):           # quiet by default
            pass

        def _send(self, status: int, payload: dict):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self._cors()
            self.end_headers()
            self.wfile.write(body)

        def _cors(self):
            self.send_header("Access-Control-Allow-Origin", allow_origin)
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")

        def _body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            if length == 0:
                return {}
            try:
                obj = json.loads(self.rfile.read(length).decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as err:
                raise PayloadError(f"invalid JSON body: {err}") from err
            if not isinstance(obj, dict):
                raise PayloadError("body must be a JSON object")
            return obj

        def do_OPTIONS(self):
            self.send_response(204)
            self._cors()
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            try:
                match = _ROUTE.match(self.path)
                if not match or not match.group(1) or match.group(2):
                    self._send(404, {"error": "not found"})
                    return
                session = store.get(match.group(1))
                self._send(200, {"session": session.to_public()})
            except StoreError as err:
                self._send(err.status, {"error": str(err)})

        def do_POST(self):
            try:
                match = _ROUTE.match(self.path)
                if not match:
                    self._send(404, {"error": "not found"})
                    return
                session_id, action = match.group(1), match.group(2)
                if session_id is None:
                    body = self._body()
                    session = store.create(body.get("user", ""), body.get("device", ""))
                    self._send(201, {"id": session.id})
                elif action == "samples":
                    accepted = store.append_samples(session_id, self._body().get("samples"))
                    self._send(200, {"accepted": accepted})
                elif action == "events":
                    accepted = store.append_events(session_id, self._body().get("events"))
                    self._send(200, {"accepted": accepted})
                elif action == "close":
                    session = store.close(session_id)
                    self._send(200, {"session": session.to_public()})
                else:
                    self._send(404, {"error": "not found"})
            except StoreError as err:
                self._send(err.status, {"error": str(err)})
            except Exception as err:                   # don't kill the worker thread
                self._send(500, {"error": f"internal error: {err}"})

    return Handler


def make_server(host: str, port: int, data_dir, allow_origin: str = "*") -> ThreadingHTTPServer:
    store = SessionStore(data_dir)
    server = ThreadingHTTPServer((host, port), make_handler(store, allow_origin))
    server.store = store
    return server


def serve(host: str, port: int, data_dir, allow_origin: str = "*") -> None:
    server = make_server(host, port, data_dir, allow_origin)
    print(f"capture server listening on http://{host}:{server.server_address[1]} "
          f"(data dir: {data_dir})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
