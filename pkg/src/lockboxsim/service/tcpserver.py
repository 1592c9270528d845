"""TCP front end of the register protocol.

Each connection handles framed read/write commands sequentially.  Unmapped
or read-only addresses answer with an error frame and the connection stays
open; malformed framing closes the connection.
"""

from __future__ import annotations

import socket
import socketserver
import threading

from lockboxsim.service import wire
from lockboxsim.service.regmap import RegmapError
from lockboxsim.service.server import EngineServer

DEFAULT_PORT = 2222


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        sock: socket.socket = self.request
        server: RegmapTcpServer = self.server
        while True:
            header = _read_exact(sock, wire.HEADER.size)
            if header is None:
                return
            try:
                op, address, count = wire.parse_header(header)
                raw = b""
                need = wire.payload_bytes(op, count)
                if need:
                    raw = _read_exact(sock, need)
                    if raw is None:
                        return
                payload = wire.decode_payload(raw, count if need else 0)
            except wire.MalformedFrame:
                return                      # reset the connection
            try:
                if op == wire.OP_READ:
                    words = server.engine_server.read_registers(address, count)
                    sock.sendall(wire.encode_response(wire.OP_READ, address,
                                                      words))
                else:
                    server.engine_server.write_registers(address, payload)
                    sock.sendall(wire.encode_response(wire.OP_WRITE, address))
            except RegmapError:
                sock.sendall(wire.encode_response(wire.OP_ERROR, address))
            except Exception:
                return


def _read_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except (ConnectionResetError, OSError):
            return None
        if not chunk:
            return None
        buf += chunk
    return buf


class RegmapTcpServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, engine_server: EngineServer, port: int = DEFAULT_PORT,
                 host: str = "127.0.0.1"):
        self.engine_server = engine_server
        super().__init__((host, port), _Handler)

    def start_background(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True,
                             name="regmap-tcp")
        t.start()
        return t


class RegmapClient:
    """Minimal blocking client used by tests and scripts."""

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT,
                 timeout: float = 10.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)

    def close(self) -> None:
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def read(self, address: int, count: int = 1) -> list[int]:
        self.sock.sendall(wire.encode_request(wire.OP_READ, address, count))
        op, addr, words = self._response(count)
        if op == wire.OP_ERROR:
            raise RegmapError(f"error frame for 0x{address:08X}")
        return list(words)

    def write(self, address: int, words) -> None:
        self.sock.sendall(wire.encode_request(wire.OP_WRITE, address,
                                              list(words)))
        op, addr, _ = self._response(0)
        if op == wire.OP_ERROR:
            raise RegmapError(f"error frame for 0x{address:08X}")

    def _response(self, expect_words: int):
        header = _read_exact(self.sock, wire.HEADER.size)
        if header is None:
            raise ConnectionError("connection closed")
        op, address, count = wire.HEADER.unpack(header)
        payload = b""
        if op == wire.OP_READ and count:
            payload = _read_exact(self.sock, 4 * count)
            if payload is None:
                raise ConnectionError("connection closed mid-payload")
        return op, address, wire.decode_payload(payload, count if payload else 0)
