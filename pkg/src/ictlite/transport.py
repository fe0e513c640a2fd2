"""Client/server transport for compressed scans over a binary framed protocol.

Wire format: every frame is ``u32 LE type | u32 LE length | payload``.
Types: HELLO, SCAN_META, VIEW_DATA, END_SCAN, ACK, ERR, FETCH, RESULT.

Upload flow: HELLO -> SCAN_META (SVZ header, optionally an existing scan id
to resume) -> ACK carrying the server-issued scan id plus a bitmap of views
already held -> one VIEW_DATA per missing view (each ACKed) -> END_SCAN.
On END_SCAN the server assembles and atomically persists an SVZ file that
is byte-identical to the client's. FETCH retrieves either the stored SVZ or
a server-side FDK reconstruction, parameterized in the FETCH payload.
"""

from __future__ import annotations

import socket
import socketserver
import struct
import threading
import uuid
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from . import fdk, svdcodec
from .geometry import Volume
from .rawio import format_keyvalues, parse_keyvalues

FRAME_HEADER = struct.Struct("<II")
PROTOCOL_VERSION = 1


class FrameType(IntEnum):
    HELLO = 1
    SCAN_META = 2
    VIEW_DATA = 3
    END_SCAN = 4
    ACK = 5
    ERR = 6
    FETCH = 7
    RESULT = 8


class ErrCode(IntEnum):
    PROTOCOL_ORDER = 1
    DUPLICATE_VIEW = 2
    UNKNOWN_FRAME = 3
    BAD_PAYLOAD = 4
    STORAGE = 5
    UNKNOWN_SCAN = 6


class TransportError(Exception):
    """Base class for client-side transport failures."""


class TransientError(TransportError):
    """Connection-level failure; the operation may be retried."""


class ProtocolError(TransportError):
    """The peer rejected the request; retrying the same bytes will not help."""

    def __init__(self, code: int, message: str):
        super().__init__(f"[{ErrCode(code).name}] {message}")
        self.code = ErrCode(code)


def send_frame(sock: socket.socket, ftype: int, payload: bytes = b"") -> None:
    sock.sendall(FRAME_HEADER.pack(int(ftype), len(payload)) + payload)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("connection closed mid-frame")
        buf.extend(chunk)
    return bytes(buf)


def recv_frame(sock: socket.socket) -> tuple[int, bytes] | None:
    """Read one frame; None on clean EOF at a frame boundary."""
    head = b""
    while len(head) < FRAME_HEADER.size:
        chunk = sock.recv(FRAME_HEADER.size - len(head))
        if not chunk:
            if head:
                raise ConnectionError("connection closed mid-header")
            return None
        head += chunk
    ftype, length = FRAME_HEADER.unpack(head)
    return ftype, _recv_exact(sock, length)


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _unpack_str(buf: bytes, off: int) -> tuple[str, int]:
    (n,) = struct.unpack_from("<I", buf, off)
    off += 4
    return buf[off : off + n].decode("utf-8"), off + n


def _bitmap(received: set[int], n_views: int) -> bytes:
    bits = bytearray((n_views + 7) // 8)
    for i in received:
        bits[i // 8] |= 1 << (i % 8)
    return bytes(bits)


def _bitmap_holes(bitmap: bytes, n_views: int) -> list[int]:
    return [i for i in range(n_views) if not (bitmap[i // 8] >> (i % 8)) & 1]


@dataclass
class ScanSession:
    scan_id: str
    header: bytes  # SVZ global header, through the geometry block
    n_views: int
    view_nbytes: int
    views: dict[int, bytes] = field(default_factory=dict)
    state: str = "OPEN"  # OPEN | COMPLETE | FAILED

    @property
    def received_views(self) -> int:
        return len(self.views)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):  # noqa: C901 - protocol dispatch
        server: ScanServer = self.server.owner  # type: ignore[attr-defined]
        session: ScanSession | None = None
        while True:
            try:
                frame = recv_frame(self.request)
            except ConnectionError:
                return
            if frame is None:
                return
            ftype, payload = frame
            try:
                if ftype == FrameType.HELLO:
                    send_frame(self.request, FrameType.ACK, struct.pack("<H", PROTOCOL_VERSION))
                elif ftype == FrameType.SCAN_META:
                    session = server.open_session(self.request, payload)
                elif ftype == FrameType.VIEW_DATA:
                    if session is None:
                        self._err(ErrCode.PROTOCOL_ORDER, "VIEW_DATA before SCAN_META")
                        continue
                    server.store_view(self.request, session, payload)
                elif ftype == FrameType.END_SCAN:
                    if session is None:
                        self._err(ErrCode.PROTOCOL_ORDER, "END_SCAN before SCAN_META")
                        continue
                    server.finish_scan(self.request, session)
                elif ftype == FrameType.FETCH:
                    server.fetch(self.request, payload)
                else:
                    self._err(ErrCode.UNKNOWN_FRAME, f"unknown frame type {ftype}")
            except _Reject as rej:
                if session is not None and rej.fail_session:
                    session.state = "FAILED"
                self._err(rej.code, str(rej))

    def _err(self, code: ErrCode, message: str) -> None:
        send_frame(
            self.request, FrameType.ERR, struct.pack("<I", int(code)) + message.encode("utf-8")
        )


class _Reject(Exception):
    def __init__(self, code: ErrCode, message: str, fail_session: bool = False):
        super().__init__(message)
        self.code = code
        self.fail_session = fail_session


class ScanServer:
    """Stores uploaded SVZ scans and serves reconstructions on demand."""

    def __init__(self, listen_addr: tuple[str, int], store_dir):
        self.store_dir = Path(store_dir)
        self.store_dir.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, ScanSession] = {}
        self._lock = threading.Lock()

        class _TCPServer(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._tcp = _TCPServer(listen_addr, _Handler)
        self._tcp.owner = self  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._tcp.server_address[:2]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._tcp.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._thread is not None:
            self._thread.join()

    def serve_forever(self) -> None:
        self._tcp.serve_forever()

    # -- frame handlers --------------------------------------------------

    def open_session(self, sock: socket.socket, payload: bytes) -> ScanSession:
        try:
            scan_id, off = _unpack_str(payload, 0)
            header = payload[off:]
            geometry, k, header_len = svdcodec.parse_header(header)
        except Exception as exc:
            raise _Reject(ErrCode.BAD_PAYLOAD, f"bad SCAN_META: {exc}") from exc
        if len(header) != header_len:
            raise _Reject(ErrCode.BAD_PAYLOAD, "trailing bytes after SVZ header")
        if geometry.n_views < 1:
            raise _Reject(ErrCode.BAD_PAYLOAD, "scan must contain at least one view")
        vb = svdcodec.view_nbytes(geometry.detector_rows, geometry.detector_cols, k)
        with self._lock:
            if scan_id:
                session = self.sessions.get(scan_id)
                if session is None:
                    raise _Reject(ErrCode.UNKNOWN_SCAN, f"no session {scan_id!r} to resume")
                if session.header != header:
                    raise _Reject(ErrCode.BAD_PAYLOAD, "resumed header differs from original")
            else:
                scan_id = uuid.uuid4().hex
                session = ScanSession(
                    scan_id=scan_id, header=header, n_views=geometry.n_views, view_nbytes=vb
                )
                self.sessions[scan_id] = session
            bitmap = _bitmap(set(session.views), session.n_views)
        send_frame(sock, FrameType.ACK, _pack_str(scan_id) + bitmap)
        return session

    def store_view(self, sock: socket.socket, session: ScanSession, payload: bytes) -> None:
        if len(payload) < 4:
            raise _Reject(ErrCode.BAD_PAYLOAD, "VIEW_DATA too short", fail_session=True)
        (idx,) = struct.unpack_from("<I", payload, 0)
        data = payload[4:]
        if idx >= session.n_views:
            raise _Reject(ErrCode.BAD_PAYLOAD, f"view index {idx} out of range", fail_session=True)
        if len(data) != session.view_nbytes:
            raise _Reject(
                ErrCode.BAD_PAYLOAD,
                f"view payload is {len(data)} bytes, expected {session.view_nbytes}",
                fail_session=True,
            )
        with self._lock:
            if idx in session.views:
                raise _Reject(ErrCode.DUPLICATE_VIEW, f"view {idx} already received")
            session.views[idx] = data
        send_frame(sock, FrameType.ACK, struct.pack("<I", idx))

    def finish_scan(self, sock: socket.socket, session: ScanSession) -> None:
        with self._lock:
            missing = session.n_views - len(session.views)
            if missing:
                raise _Reject(ErrCode.PROTOCOL_ORDER, f"{missing} views still missing")
            blob = session.header + b"".join(session.views[i] for i in range(session.n_views))
            final = self.store_dir / f"{session.scan_id}.svz"
            tmp = final.with_suffix(".svz.tmp")
            try:
                tmp.write_bytes(blob)
                tmp.replace(final)
            except OSError as exc:
                raise _Reject(ErrCode.STORAGE, f"store failed: {exc}", fail_session=True) from exc
            session.state = "COMPLETE"
        send_frame(sock, FrameType.ACK, _pack_str(session.scan_id))

    def fetch(self, sock: socket.socket, payload: bytes) -> None:
        try:
            scan_id, off = _unpack_str(payload, 0)
            params = parse_keyvalues(payload[off:].decode("utf-8"))
        except Exception as exc:
            raise _Reject(ErrCode.BAD_PAYLOAD, f"bad FETCH: {exc}") from exc
        path = self.store_dir / f"{scan_id}.svz"
        with self._lock:
            session = self.sessions.get(scan_id)
            if session is None or session.state != "COMPLETE" or not path.exists():
                raise _Reject(ErrCode.UNKNOWN_SCAN, f"no complete scan {scan_id!r}")
        mode = params.get("mode", "volume")
        if mode == "svz":
            send_frame(sock, FrameType.RESULT, path.read_bytes())
            return
        if mode != "volume":
            raise _Reject(ErrCode.BAD_PAYLOAD, f"unknown fetch mode {mode!r}")
        try:
            dims = (int(params["nx"]), int(params["ny"]), int(params["nz"]))
            pitch = float(params["voxel_pitch"])
        except KeyError as exc:
            raise _Reject(ErrCode.BAD_PAYLOAD, f"FETCH missing key {exc}") from exc
        scan = svdcodec.load_svz(path)
        vol = fdk.reconstruct(
            svdcodec.svd_decode(scan),
            dims,
            pitch,
            filter_window=params.get("filter_window", "none"),
            weight_mode=params.get("fdk_weight", "standard"),
        )
        head = struct.pack("<IIId", *dims, pitch)
        send_frame(sock, FrameType.RESULT, head + vol.data.astype("<f4").tobytes(order="C"))


# --- client ------------------------------------------------------------------


class Client:
    """Single-connection client; reconnect and re-run to resume an upload."""

    def __init__(self, addr: tuple[str, int], timeout: float = 30.0):
        self.addr = addr
        self.timeout = timeout
        self.sock: socket.socket | None = None

    def __enter__(self) -> "Client":
        self.connect()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def connect(self) -> None:
        try:
            self.sock = socket.create_connection(self.addr, timeout=self.timeout)
        except OSError as exc:
            raise TransientError(f"cannot connect to {self.addr}: {exc}") from exc
        self._roundtrip(FrameType.HELLO, struct.pack("<H", PROTOCOL_VERSION))

    def close(self) -> None:
        if self.sock is not None:
            self.sock.close()
            self.sock = None

    def _roundtrip(self, ftype: FrameType, payload: bytes) -> bytes:
        assert self.sock is not None, "client not connected"
        try:
            send_frame(self.sock, ftype, payload)
            reply = recv_frame(self.sock)
        except (OSError, ConnectionError) as exc:
            raise TransientError(f"connection lost: {exc}") from exc
        if reply is None:
            raise TransientError("server closed the connection")
        rtype, rpayload = reply
        if rtype == FrameType.ERR:
            (code,) = struct.unpack_from("<I", rpayload, 0)
            raise ProtocolError(code, rpayload[4:].decode("utf-8"))
        return rpayload

    def begin_scan(self, svz_bytes: bytes, scan_id: str = "") -> tuple[str, list[int]]:
        """Announce a scan (or resume one); returns (scan_id, missing view indices)."""
        _, _, header_len = svdcodec.parse_header(svz_bytes)
        ack = self._roundtrip(FrameType.SCAN_META, _pack_str(scan_id) + svz_bytes[:header_len])
        scan_id, off = _unpack_str(ack, 0)
        geometry, k, _ = svdcodec.parse_header(svz_bytes)
        missing = _bitmap_holes(ack[off:], geometry.n_views)
        return scan_id, missing

    def send_views(self, svz_bytes: bytes, indices: list[int]) -> None:
        geometry, k, header_len = svdcodec.parse_header(svz_bytes)
        step = svdcodec.view_nbytes(geometry.detector_rows, geometry.detector_cols, k)
        for idx in indices:
            start = header_len + idx * step
            payload = struct.pack("<I", idx) + svz_bytes[start : start + step]
            ack = self._roundtrip(FrameType.VIEW_DATA, payload)
            (acked,) = struct.unpack("<I", ack)
            if acked != idx:
                raise ProtocolError(ErrCode.BAD_PAYLOAD, f"server ACKed view {acked}, sent {idx}")

    def end_scan(self) -> str:
        ack = self._roundtrip(FrameType.END_SCAN, b"")
        scan_id, _ = _unpack_str(ack, 0)
        return scan_id

    def fetch_svz(self, scan_id: str) -> bytes:
        params = format_keyvalues({"mode": "svz"})
        return self._roundtrip(FrameType.FETCH, _pack_str(scan_id) + params.encode("utf-8"))

    def fetch_volume(
        self,
        scan_id: str,
        dims: tuple[int, int, int],
        voxel_pitch: float,
        filter_window: str = "none",
        fdk_weight: str = "standard",
    ) -> Volume:
        params = format_keyvalues(
            {
                "mode": "volume",
                "nx": str(dims[0]),
                "ny": str(dims[1]),
                "nz": str(dims[2]),
                "voxel_pitch": repr(voxel_pitch),
                "filter_window": filter_window,
                "fdk_weight": fdk_weight,
            }
        )
        result = self._roundtrip(FrameType.FETCH, _pack_str(scan_id) + params.encode("utf-8"))
        nx, ny, nz, pitch = struct.unpack_from("<IIId", result, 0)
        data = np.frombuffer(result, dtype="<f4", offset=struct.calcsize("<IIId"))
        return Volume(voxel_pitch=pitch, data=data.reshape((nz, ny, nx)))


def upload(addr: tuple[str, int], svz_bytes: bytes, scan_id: str = "") -> str:
    """Upload a scan (resuming if scan_id names a partial session)."""
    with Client(addr) as client:
        scan_id, missing = client.begin_scan(svz_bytes, scan_id)
        client.send_views(svz_bytes, missing)
        return client.end_scan()
