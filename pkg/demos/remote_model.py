"""
Querying a model over the wire protocol
=======================================

Real targets rarely run in-process. The remote client speaks newline-
delimited JSON over a subprocess pipe (or TCP): each request carries base64
PNGs of both modalities, each response answers by id. This script writes a
tiny echo-style model server to disk, launches it, and queries it — the same
mechanism attaches the optimizer to any external model.
"""

import sys
import tempfile
from pathlib import Path

from vipatch import RemoteEndpoint, RemoteModel, make_fixture, surrogate_count

SERVER = '''\
import base64, io, json, sys
import numpy as np
from PIL import Image
from vipatch import ImagePair, surrogate_count

def decode(payload):
    image = Image.open(io.BytesIO(base64.b64decode(payload)))
    return np.asarray(image, dtype=np.float64) / 255.0

for line in sys.stdin:
    request = json.loads(line)
    pair = ImagePair(visible=decode(request["visible_png_b64"]),
                     infrared=decode(request["infrared_png_b64"]))
    count, _ = surrogate_count(pair)
    response = {"id": request["id"], "ok": True, "count": count}
    sys.stdout.write(json.dumps(response) + "\\n")
    sys.stdout.flush()
'''

script = Path(tempfile.mkdtemp()) / "count_server.py"
script.write_text(SERVER)

endpoint = RemoteEndpoint(
    transport="subprocess",
    command=(sys.executable, str(script)),
    timeout_ms=20000,
)

with RemoteModel(endpoint) as model:
    for seed in range(3):
        pair, points = make_fixture(seed=seed)
        remote = model.query("count", pair)
        local, _ = surrogate_count(pair)
        print(f"fixture {seed}: remote count {remote:.0f},"
              f" in-process {local:.0f}, annotated {len(points)}")

print("remote and in-process answers agree; the transport is interchangeable")
