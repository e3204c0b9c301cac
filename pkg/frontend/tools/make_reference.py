"""Regenerate the reference vectors under test/data/.

Uses only the vipatch public API: renders the first ten synthetic fixtures,
saves them as the 8-bit PNGs a wire client would transmit, reloads those
files, and records the reference target outputs for the reloaded pairs.
The TypeScript tests replay the PNGs through the server callbacks and demand
exact counts, identical label bytes, and identical fused bytes.

    python3 tools/make_reference.py
"""

import base64
import json
from pathlib import Path

from vipatch import (
    intensity_to_byte,
    load_pair,
    make_fixture,
    save_image,
    surrogate_count,
    surrogate_fuse,
    surrogate_segment,
)

DATA_DIR = Path(__file__).resolve().parent.parent / "test" / "data"


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    expected = []
    for seed in range(10):
        pair, _ = make_fixture(seed)
        vis_path = DATA_DIR / f"fixture_{seed:02d}_visible.png"
        inf_path = DATA_DIR / f"fixture_{seed:02d}_infrared.png"
        save_image(pair.visible, vis_path)
        save_image(pair.infrared, inf_path)
        served = load_pair(vis_path, inf_path)
        count, _ = surrogate_count(served)
        labels = surrogate_segment(served).astype("uint8")
        fused = intensity_to_byte(surrogate_fuse(served))
        expected.append(
            {
                "name": f"fixture_{seed:02d}",
                "width": served.width,
                "height": served.height,
                "count": count,
                "labels_b64": base64.b64encode(labels.tobytes()).decode("ascii"),
                "fused_b64": base64.b64encode(fused.tobytes()).decode("ascii"),
            }
        )
    out = DATA_DIR / "expected.json"
    out.write_text(json.dumps(expected, indent=1))
    print(f"wrote {len(expected)} reference fixtures to {DATA_DIR}")


if __name__ == "__main__":
    main()
