"""Upload a compressed scan to a local server and fetch a reconstruction.

The server stores SVZ containers and can reconstruct on demand, so thin
acquisition clients never need the FDK code. This demo also interrupts an
upload halfway and resumes it to show the view-level resume protocol.
"""

import tempfile
from pathlib import Path

import numpy as np

from ictlite import Phantom, forward_project, make_circular_geometry, reconstruct, sphere
from ictlite.svdcodec import scan_to_bytes, svd_decode, svd_encode
from ictlite.transport import Client, ScanServer

phantom = Phantom((sphere((0.0, 0.0, 0.0), 10.0, 1.0),))
geometry = make_circular_geometry(36, 24, 32, 1.0, 200.0)
scan = svd_encode(forward_project(phantom, geometry), 8)
blob = scan_to_bytes(scan)

store = Path(tempfile.mkdtemp(prefix="ictlite-store-"))
server = ScanServer(("127.0.0.1", 0), store)
server.start()
try:
    print("server listening on %s:%d" % server.address)

    # Start an upload and drop the connection after half the views.
    with Client(server.address) as client:
        scan_id, missing = client.begin_scan(blob)
        client.send_views(blob, sorted(missing)[: len(missing) // 2])
    print(f"interrupted upload of scan {scan_id} after {len(missing) // 2} views")

    # Reconnect: the server reports which views it still needs.
    with Client(server.address) as client:
        _, still_missing = client.begin_scan(blob, scan_id)
        print(f"server asks for the remaining {len(still_missing)} views")
        client.send_views(blob, still_missing)
        client.end_scan()

    stored = (store / f"{scan_id}.svz").read_bytes()
    print("stored bytes identical to the original:", stored == blob)

    with Client(server.address) as client:
        remote = client.fetch_volume(scan_id, (24, 24, 24), 1.0)
    local = reconstruct(svd_decode(scan), (24, 24, 24), 1.0)
    print("remote vs local reconstruction max |diff|:", float(np.abs(remote.data - local.data).max()))
finally:
    server.stop()
