import socket
import struct

import numpy as np
import pytest

from ictlite import reconstruct, svd_decode, svd_encode
from ictlite.svdcodec import scan_to_bytes
from ictlite.transport import (
    Client,
    ErrCode,
    FrameType,
    ProtocolError,
    ScanServer,
    TransientError,
    recv_frame,
    send_frame,
    upload,
)


@pytest.fixture()
def server(tmp_path):
    srv = ScanServer(("127.0.0.1", 0), tmp_path / "store")
    srv.start()
    yield srv
    srv.stop()


@pytest.fixture(scope="module")
def svz_blob(small_stack_module):
    return scan_to_bytes(svd_encode(small_stack_module, 5))


@pytest.fixture(scope="module")
def small_stack_module():
    from ictlite import Phantom, forward_project, make_circular_geometry
    from ictlite.phantom import sphere

    geom = make_circular_geometry(12, 16, 24, 1.0, 150.0)
    return forward_project(Phantom((sphere((0, 0, 0), 8.0, 1.0),)), geom)


class TestUploadDownload:
    def test_stored_file_byte_identical(self, server, svz_blob):
        scan_id = upload(server.address, svz_blob)
        stored = (server.store_dir / f"{scan_id}.svz").read_bytes()
        assert stored == svz_blob

    def test_fetched_svz_byte_identical(self, server, svz_blob):
        scan_id = upload(server.address, svz_blob)
        with Client(server.address) as client:
            fetched = client.fetch_svz(scan_id)
        assert fetched == svz_blob

    def test_fetch_volume_matches_local_pipeline(self, server, svz_blob, small_stack_module):
        scan_id = upload(server.address, svz_blob)
        with Client(server.address) as client:
            remote = client.fetch_volume(scan_id, (16, 16, 16), 1.0)
        local = reconstruct(svd_decode(svd_encode(small_stack_module, 5)), (16, 16, 16), 1.0)
        rel = np.sqrt(np.mean((remote.data - local.data) ** 2)) / (
            np.sqrt(np.mean(local.data**2)) + 1e-30
        )
        assert rel <= 1e-6

    def test_session_completes(self, server, svz_blob):
        scan_id = upload(server.address, svz_blob)
        session = server.sessions[scan_id]
        assert session.state == "COMPLETE"
        assert session.received_views == session.n_views


class TestProtocolErrors:
    def test_view_data_before_scan_meta(self, server):
        with socket.create_connection(server.address) as sock:
            send_frame(sock, FrameType.VIEW_DATA, struct.pack("<I", 0) + b"xx")
            ftype, payload = recv_frame(sock)
        assert ftype == FrameType.ERR
        (code,) = struct.unpack_from("<I", payload, 0)
        assert code == ErrCode.PROTOCOL_ORDER

    def test_unknown_frame_type(self, server):
        with socket.create_connection(server.address) as sock:
            send_frame(sock, 99, b"")
            ftype, payload = recv_frame(sock)
        assert ftype == FrameType.ERR
        assert struct.unpack_from("<I", payload, 0)[0] == ErrCode.UNKNOWN_FRAME

    def test_duplicate_view_rejected(self, server, svz_blob):
        with Client(server.address) as client:
            scan_id, missing = client.begin_scan(svz_blob)
            client.send_views(svz_blob, [0])
            with pytest.raises(ProtocolError) as exc:
                client.send_views(svz_blob, [0])
        assert exc.value.code == ErrCode.DUPLICATE_VIEW

    def test_end_scan_with_missing_views(self, server, svz_blob):
        with Client(server.address) as client:
            _, missing = client.begin_scan(svz_blob)
            client.send_views(svz_blob, missing[:3])
            with pytest.raises(ProtocolError) as exc:
                client.end_scan()
        assert exc.value.code == ErrCode.PROTOCOL_ORDER

    def test_malformed_scan_meta(self, server):
        with socket.create_connection(server.address) as sock:
            send_frame(sock, FrameType.SCAN_META, struct.pack("<I", 0) + b"garbage")
            ftype, payload = recv_frame(sock)
        assert ftype == FrameType.ERR
        assert struct.unpack_from("<I", payload, 0)[0] == ErrCode.BAD_PAYLOAD

    def test_fetch_unknown_scan(self, server):
        with Client(server.address) as client:
            with pytest.raises(ProtocolError) as exc:
                client.fetch_svz("doesnotexist")
        assert exc.value.code == ErrCode.UNKNOWN_SCAN

    def test_resume_unknown_scan_rejected(self, server, svz_blob):
        with Client(server.address) as client:
            with pytest.raises(ProtocolError) as exc:
                client.begin_scan(svz_blob, scan_id="bogus")
        assert exc.value.code == ErrCode.UNKNOWN_SCAN

    def test_bad_view_payload_fails_session(self, server, svz_blob):
        with Client(server.address) as client:
            scan_id, _ = client.begin_scan(svz_blob)
            with pytest.raises(ProtocolError):
                client._roundtrip(FrameType.VIEW_DATA, struct.pack("<I", 0) + b"short")
        assert server.sessions[scan_id].state == "FAILED"

    def test_connect_refused_is_transient(self):
        with pytest.raises(TransientError):
            Client(("127.0.0.1", 1), timeout=0.5).connect()


class TestResume:
    def test_interrupted_upload_resumes_without_duplicates(self, server, svz_blob):
        # First connection dies after three views.
        client = Client(server.address)
        client.connect()
        scan_id, missing = client.begin_scan(svz_blob)
        n_views = len(missing)
        client.send_views(svz_blob, missing[:3])
        client.sock.close()  # simulate a dropped connection

        with Client(server.address) as retry:
            resumed_id, still_missing = retry.begin_scan(svz_blob, scan_id=scan_id)
            assert resumed_id == scan_id
            assert still_missing == missing[3:]
            retry.send_views(svz_blob, still_missing)
            assert retry.end_scan() == scan_id

        assert (server.store_dir / f"{scan_id}.svz").read_bytes() == svz_blob
        assert server.sessions[scan_id].received_views == n_views

    def test_resume_with_different_header_rejected(self, server, svz_blob, small_stack_module):
        client = Client(server.address)
        client.connect()
        scan_id, _ = client.begin_scan(svz_blob)
        client.close()
        other = scan_to_bytes(svd_encode(small_stack_module, 3))
        with Client(server.address) as retry:
            with pytest.raises(ProtocolError) as exc:
                retry.begin_scan(other, scan_id=scan_id)
        assert exc.value.code == ErrCode.BAD_PAYLOAD


class TestStateMachine:
    def test_only_open_to_complete_or_failed(self, server, svz_blob):
        # COMPLETE path
        good_id = upload(server.address, svz_blob)
        assert server.sessions[good_id].state == "COMPLETE"
        # FAILED path via malformed view
        with Client(server.address) as client:
            bad_id, _ = client.begin_scan(svz_blob)
            assert server.sessions[bad_id].state == "OPEN"
            with pytest.raises(ProtocolError):
                client._roundtrip(FrameType.VIEW_DATA, struct.pack("<I", 10**6) + b"")
        assert server.sessions[bad_id].state == "FAILED"

    def test_wire_overhead_bound(self, server, svz_blob):
        # Client upload traffic fits in the container bytes plus 16 bytes
        # per frame (HELLO + SCAN_META + one VIEW_DATA per view + END_SCAN),
        # with a small allowance for the scan-id token.
        from ictlite.svdcodec import parse_header

        geometry, _, _ = parse_header(svz_blob)
        frames = 3 + geometry.n_views
        budget = len(svz_blob) + frames * 16 + 64

        import ictlite.transport as transport_mod

        sent = [0]
        client = Client(server.address)
        client.connect()
        client_sock = client.sock
        orig = transport_mod.send_frame

        def counting(sock, ftype, payload=b""):
            if sock is client_sock:
                sent[0] += 8 + len(payload)
            return orig(sock, ftype, payload)

        transport_mod.send_frame = counting
        try:
            sent[0] += 10  # HELLO frame already sent by connect()
            scan_id, missing = client.begin_scan(svz_blob)
            client.send_views(svz_blob, missing)
            client.end_scan()
        finally:
            transport_mod.send_frame = orig
            client.close()
        assert sent[0] <= budget
