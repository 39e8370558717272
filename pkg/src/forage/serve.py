"""Play the prime yourself against a trained helper, over a WebSocket.

The server owns the environment; the browser (or any client) only renders
state and sends actions. One WebSocket connection is one session is one
episode: connect, receive `hello` plus the initial `state`, then exchange
`your_turn` / `action` messages until `episode_end`. Every `action` is
answered by exactly one `state` or `episode_end`; invalid input gets an
`error` and leaves the episode untouched. Messages are JSON, one per
frame, newline-terminated.

A session is fully determined by (seed, action log): the transcript can be
replayed offline through the environment and reproduces the reward trace
exactly. The helper acts greedily through the same forward path used by
offline evaluation.

The WebSocket layer is a minimal server-side RFC 6455 implementation
(text/ping/close, masked client frames) so the package stays
dependency-free; static files for the UI bundle are served from --static.
"""

from __future__ import annotations

import base64
import hashlib
import json
import secrets
import socket
import struct
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

import numpy as np

from forage import nn
from forage.agent import PolicyNet, reset_state
from forage.checkpoint import Checkpoint, load_checkpoint
from forage.env import (
    EPISODE_STEPS,
    GRID_CELLS,
    MOVE_PENALTY,
    ForagingEnv,
    default_spawn_script,
    encode_observation,
    sample_task,
)

ACTION_NAMES = {"left": 0, "right": 1, "stay": 2}

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class SessionError(Exception):
    pass


class Session:
    """One live episode: a human prime against the checkpoint's helper."""

    def __init__(self, helper: PolicyNet, seed: int, turn_timeout: Optional[float] = None):
        self.id = uuid.uuid4().hex[:12]
        self.seed = seed
        self.turn_timeout = turn_timeout
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        self.task = sample_task(rng)
        self.script = default_spawn_script(rng)
        self.env = ForagingEnv()
        self.env.reset(self.task, self.script)

        self.helper = helper
        self._forward = nn.LSTMForward(helper.lstm)
        self._hstate = reset_state(helper)

        self.cumulative_reward = 0.0
        self.last_reward = 0.0
        self.prime_collect = 0.0
        self.helper_collect = 0.0
        self.prime_moves = 0
        self.helper_moves = 0
        self.done = False
        # transcript: enough to replay the episode offline
        self.prime_actions: list[int] = []
        self.helper_actions: list[int] = []
        self.rewards: list[float] = []

    # -- messages ---------------------------------------------------

    def hello_message(self) -> dict:
        return {
            "kind": "hello",
            "session": self.id,
            "seed": self.seed,
            "grid_size": GRID_CELLS,
            "episode_steps": EPISODE_STEPS,
            "move_penalty": MOVE_PENALTY,
            "good_class": self.task.good_class.name,
            "turn_timeout": self.turn_timeout,
        }

    def state_message(self) -> dict:
        s = self.env.state
        return {
            "kind": "state",
            "t": s.t,
            "prime_pos": s.prime_pos,
            "helper_pos": s.helper_pos,
            "objects": [
                {"cell": o.cell, "class": o.cls.name,
                 "good": self.task.is_good(o.cls)}
                for o in sorted(s.live_objects, key=lambda o: o.cell)
            ],
            "cumulative_reward": round(self.cumulative_reward, 6),
            "last_reward": round(self.last_reward, 6),
            "done": self.done,
        }

    def your_turn_message(self) -> dict:
        return {"kind": "your_turn", "t": self.env.state.t}

    def episode_end_message(self) -> dict:
        return {
            "kind": "episode_end",
            "total_reward": round(self.cumulative_reward, 6),
            "prime_collect": self.prime_collect,
            "helper_collect": self.helper_collect,
            "prime_moves": self.prime_moves,
            "helper_moves": self.helper_moves,
            "movement_penalty": round(-MOVE_PENALTY * self.prime_moves, 6),
        }

    # -- stepping ---------------------------------------------------

    def _helper_action(self) -> int:
        obs = encode_observation(self.env.state, "helper")
        self._hstate, _ = self._forward.step(
            self._hstate, obs[None, :].astype(self.helper.lstm.w_x.dtype))
        q = nn.q_head(self.helper.head, self._hstate.h)[0]
        return int(np.argmax(q))

    def handle_action(self, value) -> dict:
        """Apply one human action; returns the reply message (`state`,
        `episode_end`, or `error`). The env is untouched on errors."""
        if self.done:
            return {"kind": "error", "message": "episode is over"}
        if not isinstance(value, str) or value not in ACTION_NAMES:
            return {"kind": "error",
                    "message": f"unknown action {value!r}; use left/right/stay"}
        prime_action = ACTION_NAMES[value]
        helper_action = self._helper_action()
        out = self.env.step(prime_action, helper_action)

        self.prime_actions.append(prime_action)
        self.helper_actions.append(helper_action)
        self.rewards.append(out.reward)
        self.cumulative_reward += out.reward
        self.last_reward = out.reward
        if out.prime_moved:
            self.prime_moves += 1
        if helper_action != ACTION_NAMES["stay"]:
            self.helper_moves += 1
        for ev in out.collections:
            value_ = 1.0 if ev.good else -1.0
            if ev.credit == "prime":
                self.prime_collect += value_
            else:
                self.helper_collect += value_
        self.done = out.done
        return self.episode_end_message() if self.done else self.state_message()

    def transcript(self) -> dict:
        return {
            "seed": self.seed,
            "prime_actions": list(self.prime_actions),
            "helper_actions": list(self.helper_actions),
            "rewards": list(self.rewards),
        }


def start_session(checkpoint, seed: Optional[int] = None,
                  turn_timeout: Optional[float] = None) -> Session:
    """Open a session from a checkpoint (path or loaded Checkpoint)."""
    if not isinstance(checkpoint, Checkpoint):
        checkpoint = load_checkpoint(checkpoint)
    if checkpoint.helper is None:
        raise SessionError("checkpoint has no helper parameters (baseline run); "
                           "a joint checkpoint is required to play")
    if seed is None:
        seed = secrets.randbits(48)
    return Session(checkpoint.helper.policy(), seed, turn_timeout=turn_timeout)


# ------------------------------------------------------------- websocket


def ws_accept_value(key: str) -> str:
    digest = hashlib.sha1((key + WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def ws_frame(data: bytes, opcode: int, mask: Optional[bytes] = None) -> bytes:
    """Encode one frame; clients pass a 4-byte mask, servers none."""
    head = bytes([0x80 | opcode])
    n = len(data)
    mask_bit = 0x80 if mask else 0
    if n < 126:
        head += bytes([mask_bit | n])
    elif n < 1 << 16:
        head += bytes([mask_bit | 126]) + struct.pack(">H", n)
    else:
        head += bytes([mask_bit | 127]) + struct.pack(">Q", n)
    if mask:
        data = bytes(c ^ mask[i % 4] for i, c in enumerate(data))
        return head + mask + data
    return head + data


class SockReader:
    """Exact-read wrapper over recv. Unlike sock.makefile(), the socket
    stays usable after a read timeout (needed for the auto-stay turns)."""

    def __init__(self, sock: socket.socket):
        self.sock = sock

    def read(self, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            chunk = self.sock.recv(n - len(buf))
            if not chunk:
                return buf
            buf += chunk
        return buf


class WSConn:
    """One framed connection: a binary reader plus the raw socket for
    writes. Used by the server handler and by test clients."""

    def __init__(self, reader, sock: socket.socket, masked_writes: bool = False):
        self.reader = reader
        self.sock = sock
        self.masked_writes = masked_writes

    def _need(self, n: int) -> bytes:
        data = self.reader.read(n)
        if data is None or len(data) < n:
            raise ConnectionError("socket closed")
        return data

    def send_frame(self, data: bytes, opcode: int = 0x1) -> None:
        mask = secrets.token_bytes(4) if self.masked_writes else None
        self.sock.sendall(ws_frame(data, opcode, mask=mask))

    def send_json(self, payload: dict) -> None:
        self.send_frame((json.dumps(payload) + "\n").encode(), opcode=0x1)

    def read_message(self):
        """Next complete text payload, handling ping/pong and close.

        Returns None on a clean close; socket timeouts propagate.
        """
        parts = []
        while True:
            b0, b1 = self._need(2)
            fin = b0 & 0x80
            opcode = b0 & 0x0F
            masked = b1 & 0x80
            length = b1 & 0x7F
            if length == 126:
                (length,) = struct.unpack(">H", self._need(2))
            elif length == 127:
                (length,) = struct.unpack(">Q", self._need(8))
            mask = self._need(4) if masked else b""
            payload = self._need(length)
            if masked:
                payload = bytes(c ^ mask[i % 4] for i, c in enumerate(payload))

            if opcode == 0x8:  # close
                try:
                    self.send_frame(payload[:2], opcode=0x8)
                except OSError:
                    pass
                return None
            if opcode == 0x9:  # ping -> pong
                self.send_frame(payload, opcode=0xA)
                continue
            if opcode == 0xA:
                continue
            parts.append(payload)
            if fin:
                return b"".join(parts).decode("utf-8")

    def read_json(self):
        raw = self.read_message()
        return None if raw is None else json.loads(raw)


FALLBACK_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>forage</title></head>
<body style="font-family: sans-serif; max-width: 40em; margin: 3em auto">
<h1>forage serve</h1>
<p>The browser UI bundle is not built. Build it with:</p>
<pre>cd frontend && npm install && npm run build</pre>
<p>then restart with <code>--static frontend/dist</code>, or talk to the
WebSocket endpoint at <code>/ws</code> directly (JSON messages, one per
frame).</p></body></html>
"""

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".map": "application/json",
}


class ForageServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, checkpoint: Checkpoint, port: int = 0,
                 seed: Optional[int] = None, static_dir=None,
                 turn_timeout: Optional[float] = None, host: str = "127.0.0.1"):
        if checkpoint.helper is None:
            raise SessionError("checkpoint has no helper parameters (baseline run)")
        self.checkpoint = checkpoint
        self.fixed_seed = seed
        self.static_dir = None if static_dir is None else Path(static_dir).resolve()
        self.turn_timeout = turn_timeout
        super().__init__((host, port), _Handler)

    @property
    def port(self) -> int:
        return self.server_address[1]


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: ForageServer

    def log_message(self, fmt, *args):  # quiet; the CLI prints the endpoint
        pass

    def do_GET(self):
        if self.path == "/ws":
            if self.headers.get("Upgrade", "").lower() == "websocket":
                self._websocket_session()
            else:
                self.send_error(400, "expected a websocket upgrade")
            return
        self._static()

    def _static(self):
        path = self.path.split("?", 1)[0]
        if path in ("/", "/index.html"):
            path = "/index.html"
        root = self.server.static_dir
        if root is not None:
            target = (root / path.lstrip("/")).resolve()
            if target.is_file() and target.is_relative_to(root):
                data = target.read_bytes()
                self.send_response(200)
                ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)
                return
        if path == "/index.html":
            data = FALLBACK_PAGE.encode()
            self.send_response(200)
            self.send_header("Content-Type", "text/html; charset=utf-8")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)
            return
        self.send_error(404)

    def _websocket_session(self):
        key = self.headers.get("Sec-WebSocket-Key")
        if not key:
            self.send_error(400, "missing Sec-WebSocket-Key")
            return
        self.send_response(101, "Switching Protocols")
        self.send_header("Upgrade", "websocket")
        self.send_header("Connection", "Upgrade")
        self.send_header("Sec-WebSocket-Accept", ws_accept_value(key))
        self.end_headers()
        self.close_connection = True

        # clients must not send frames before the 101 response, so nothing
        # sits in rfile's buffer; raw recv keeps the socket usable after a
        # turn-timeout (makefile readers break permanently on timeout)
        conn = WSConn(SockReader(self.connection), self.connection)
        session = start_session(self.server.checkpoint, seed=self.server.fixed_seed,
                                turn_timeout=self.server.turn_timeout)
        try:
            conn.send_json(session.hello_message())
            conn.send_json(session.state_message())
            conn.send_json(session.your_turn_message())
            if session.turn_timeout is not None:
                self.connection.settimeout(session.turn_timeout)
            while not session.done:
                try:
                    raw = conn.read_message()
                except (socket.timeout, TimeoutError):
                    # idle turn: auto-play "stay" so the episode keeps pace
                    reply = session.handle_action("stay")
                    conn.send_json(reply)
                    if not session.done:
                        conn.send_json(session.your_turn_message())
                    continue
                if raw is None:
                    return
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    msg = {}
                if msg.get("kind") != "action":
                    conn.send_json({"kind": "error",
                                    "message": "expected an action message"})
                    conn.send_json(session.your_turn_message())
                    continue
                reply = session.handle_action(msg.get("value"))
                conn.send_json(reply)
                if reply["kind"] == "error" or not session.done:
                    conn.send_json(session.your_turn_message())
        except (ConnectionError, BrokenPipeError, OSError):
            pass


def serve_forever(checkpoint_path, port: int = 8765, seed: Optional[int] = None,
                  static_dir=None, turn_timeout: Optional[float] = None) -> int:
    ck = load_checkpoint(checkpoint_path)
    if static_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if bundled.is_dir():
            static_dir = bundled
    server = ForageServer(ck, port=port, seed=seed, static_dir=static_dir,
                          turn_timeout=turn_timeout)
    where = f"http://127.0.0.1:{server.port}/"
    print(f"serving on {where} (websocket at /ws); you are the prime agent")
    if static_dir is None:
        print("no UI bundle found; see the page at / for build instructions")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        print("\nbye")
    finally:
        server.server_close()
    return 0
