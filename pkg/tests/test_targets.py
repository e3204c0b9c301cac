"""Tests for target oracles: surrogates and the remote-model client.

The remote tests spawn tests/fake_remote_model.py, an independent protocol
peer with switchable misbehavior, so the client's matching, validation, and
failure paths are exercised against a real process boundary.
"""

from __future__ import annotations

import base64
import io
import json
import subprocess
import sys
import threading
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from vipatch import (
    ConfigError,
    ImagePair,
    OracleError,
    ProtocolError,
    RemoteEndpoint,
    RemoteModel,
    RemoteTimeoutError,
    SurrogateCountingParams,
    TargetKind,
    intensity_to_byte,
    make_model,
    remote_query,
    surrogate_count,
    surrogate_fuse,
    surrogate_segment,
    to_grayscale,
)

from conftest import random_pair

FAKE_SERVER = Path(__file__).parent / "fake_remote_model.py"

# Kernel radius is int(truncate * sigma + 0.5), so this sigma makes the blur
# an identity and lets tests place exact plateaus.
SHARP = SurrogateCountingParams(blur_sigma=0.01, threshold=0.6, min_area=9)


def pair_from_infrared(infrared: np.ndarray) -> ImagePair:
    return ImagePair(visible=np.zeros(infrared.shape + (3,)), infrared=infrared)


def infrared_checksum(pair: ImagePair) -> float:
    """Mirror of the fake server's count rule: byte sum of the infrared PNG."""
    return float(int(intensity_to_byte(pair.infrared).sum()) % 1000)


class TestSurrogateCounting:
    def test_single_plateau_counts_once(self):
        infrared = np.zeros((32, 32))
        infrared[10:13, 10:13] = 0.9
        count, density = surrogate_count(pair_from_infrared(infrared), SHARP)
        assert count == 1.0
        assert density[11, 11] == pytest.approx(1.0 / 9.0)
        assert density.sum() == pytest.approx(1.0)

    def test_small_component_is_dropped(self):
        infrared = np.zeros((32, 32))
        infrared[5:7, 5:9] = 0.9  # area 8 < min_area 9
        count, density = surrogate_count(pair_from_infrared(infrared), SHARP)
        assert count == 0.0
        assert np.all(density == 0.0)

    def test_threshold_is_strict(self):
        infrared = np.full((32, 32), 0.6)
        count, _ = surrogate_count(pair_from_infrared(infrared), SHARP)
        assert count == 0.0
        count, _ = surrogate_count(pair_from_infrared(np.full((32, 32), 0.601)), SHARP)
        assert count == 1.0

    def test_diagonal_neighbors_stay_separate(self):
        # Two 3x3 plateaus touching only at a corner: 4-connectivity keeps
        # them apart, so both survive the area floor and count as two.
        infrared = np.zeros((32, 32))
        infrared[4:7, 4:7] = 0.9
        infrared[7:10, 7:10] = 0.9
        count, density = surrogate_count(pair_from_infrared(infrared), SHARP)
        assert count == 2.0
        assert density.sum() == pytest.approx(2.0)

    def test_density_uniform_per_component(self):
        infrared = np.zeros((32, 32))
        infrared[2:5, 2:6] = 0.9  # area 12
        infrared[20:25, 20:25] = 0.9  # area 25
        count, density = surrogate_count(pair_from_infrared(infrared), SHARP)
        assert count == 2.0
        assert density[3, 3] == pytest.approx(1.0 / 12.0)
        assert density[22, 22] == pytest.approx(1.0 / 25.0)

    def test_blurred_gaussian_blob_counts(self):
        y, x = np.mgrid[0:48, 0:64]
        blob = 0.9 * np.exp(-((y - 24.0) ** 2 + (x - 32.0) ** 2) / (2.0 * 4.0**2))
        count, density = surrogate_count(pair_from_infrared(np.clip(blob, 0.0, 1.0)))
        assert count == 1.0
        assert density.sum() == pytest.approx(1.0)

    def test_empty_image_counts_zero(self):
        count, density = surrogate_count(pair_from_infrared(np.zeros((16, 16))))
        assert count == 0.0
        assert np.all(density == 0.0)

    @pytest.mark.parametrize("kwargs", [
        {"blur_sigma": 0.0}, {"threshold": -0.1}, {"min_area": 0},
    ])
    def test_rejects_nonpositive_params(self, kwargs):
        with pytest.raises(ConfigError):
            SurrogateCountingParams(**kwargs)


class TestSurrogateSegmentation:
    def test_band_quantization(self):
        # g = (gray(visible) + infrared) / 2 with a gray visible image, so
        # equal planes give g equal to that shared value.
        values = np.array([[0.0, 0.24, 0.25], [0.5, 0.76, 1.0]])
        visible = np.repeat(values[:, :, None], 3, axis=2)
        pair = ImagePair(visible=visible, infrared=values.copy())
        labels = surrogate_segment(pair, num_bands=4)
        assert labels.tolist() == [[0, 0, 1], [2, 3, 3]]

    def test_top_of_range_stays_in_last_band(self):
        pair = pair_from_infrared(np.ones((4, 4)))
        pair = ImagePair(visible=np.ones((4, 4, 3)), infrared=np.ones((4, 4)))
        labels = surrogate_segment(pair, num_bands=5)
        assert np.all(labels == 4)

    def test_rejects_degenerate_band_count(self):
        pair = pair_from_infrared(np.zeros((4, 4)))
        with pytest.raises(ConfigError):
            surrogate_segment(pair, num_bands=1)

    def test_labels_are_integer_map(self, small_pair):
        labels = surrogate_segment(small_pair)
        assert labels.shape == small_pair.dims[::-1]
        assert labels.dtype == np.int64
        assert labels.min() >= 0 and labels.max() <= 3


class TestSurrogateFusion:
    def test_max_rule(self, small_pair):
        fused = surrogate_fuse(small_pair)
        expected = np.maximum(to_grayscale(small_pair.visible), small_pair.infrared)
        assert np.array_equal(fused, expected)

    def test_dominated_channel_is_ignored(self):
        pair = ImagePair(visible=np.full((6, 6, 3), 0.2), infrared=np.full((6, 6), 0.8))
        assert np.all(surrogate_fuse(pair) == 0.8)


class TestMakeModel:
    def test_counting_dispatch(self, small_pair):
        model = make_model("counting", TargetKind.SURROGATE_COUNTING)
        count, density = model(small_pair)
        expected_count, expected_density = surrogate_count(small_pair)
        assert count == expected_count
        assert np.array_equal(density, expected_density)

    def test_segmentation_dispatch(self, small_pair):
        model = make_model("segmentation", "surrogate_segmentation", num_bands=3)
        assert np.array_equal(model(small_pair), surrogate_segment(small_pair, 3))

    def test_fusion_dispatch(self, small_pair):
        model = make_model("fusion", "surrogate_fusion")
        assert np.array_equal(model(small_pair), surrogate_fuse(small_pair))

    def test_mismatched_kind_rejected(self):
        with pytest.raises(ConfigError):
            make_model("counting", TargetKind.SURROGATE_FUSION)

    def test_unknown_task_rejected(self):
        with pytest.raises(ConfigError):
            make_model("detection", TargetKind.SURROGATE_COUNTING)

    def test_remote_requires_endpoint(self):
        with pytest.raises(ConfigError):
            make_model("counting", TargetKind.REMOTE)


# ---------------------------------------------------------------------------
# remote client against the fake protocol peer


def fake_endpoint(*extra_args: str, **kwargs) -> RemoteEndpoint:
    command = (sys.executable, str(FAKE_SERVER), *extra_args)
    return RemoteEndpoint(transport="subprocess", command=command, **kwargs)


def canned_endpoint(payload: dict, **kwargs) -> RemoteEndpoint:
    """Endpoint whose server echoes `payload` (with the request's id) forever."""
    script = (
        "import sys, json\n"
        f"payload = json.loads({json.dumps(json.dumps(payload))})\n"
        "for line in sys.stdin:\n"
        "    obj = json.loads(line)\n"
        "    payload['id'] = obj['id']\n"
        "    sys.stdout.write(json.dumps(payload) + '\\n')\n"
        "    sys.stdout.flush()\n"
    )
    return RemoteEndpoint(transport="subprocess", command=(sys.executable, "-c", script), **kwargs)


class TestRemoteModel:
    def test_count_round_trip(self, rng):
        pair = random_pair(rng, 16, 24)
        with RemoteModel(fake_endpoint()) as model:
            assert model.query("count", pair) == infrared_checksum(pair)

    def test_segment_round_trip(self, rng):
        pair = random_pair(rng, 16, 24)
        with RemoteModel(fake_endpoint()) as model:
            labels = model.query("segment", pair)
        assert labels.shape == (16, 24)
        assert labels.dtype == np.int64
        assert np.all(labels[0] == 1) and np.all(labels[1:] == 0)

    def test_fuse_round_trip(self, rng):
        # The fake fuses by echoing the infrared image, so the round trip
        # reproduces the byte-quantized infrared exactly.
        pair = random_pair(rng, 16, 24)
        with RemoteModel(fake_endpoint()) as model:
            fused = model.query("fuse", pair)
        expected = intensity_to_byte(pair.infrared).astype(np.float64) / 255.0
        assert np.array_equal(fused, expected)

    def test_sequential_queries_reuse_connection(self, rng):
        pairs = [random_pair(rng, 12, 12) for _ in range(4)]
        with RemoteModel(fake_endpoint()) as model:
            for pair in pairs:
                assert model.query("count", pair) == infrared_checksum(pair)

    def test_out_of_order_responses_are_matched(self):
        # The server buffers two requests and answers them in reverse; the
        # two concurrent callers must still each get their own count.
        dark = pair_from_infrared(np.zeros((8, 8)))
        bright = pair_from_infrared(np.full((8, 8), 0.5))
        results: dict[str, float] = {}
        with RemoteModel(fake_endpoint("--reorder", "2", max_in_flight=2)) as model:
            def ask(name: str, pair: ImagePair) -> None:
                results[name] = model.query("count", pair)

            threads = [
                threading.Thread(target=ask, args=("dark", dark)),
                threading.Thread(target=ask, args=("bright", bright)),
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        assert results["dark"] == infrared_checksum(dark)
        assert results["bright"] == infrared_checksum(bright)
        assert results["dark"] != results["bright"]

    def test_garbage_line_raises_protocol_error(self, rng):
        pair = random_pair(rng, 8, 8)
        with RemoteModel(fake_endpoint("--garbage")) as model:
            with pytest.raises(ProtocolError, match="not JSON"):
                model.query("count", pair)

    def test_reported_failure_raises_oracle_error(self, rng):
        pair = random_pair(rng, 8, 8)
        with RemoteModel(fake_endpoint("--error")) as model:
            with pytest.raises(OracleError, match="synthetic failure"):
                model.query("count", pair)

    def test_slow_server_times_out(self, rng):
        pair = random_pair(rng, 8, 8)
        with RemoteModel(fake_endpoint("--sleep", "2.0", timeout_ms=300)) as model:
            with pytest.raises(RemoteTimeoutError):
                model.query("count", pair)

    def test_server_exit_raises_oracle_error(self, rng):
        pair = random_pair(rng, 8, 8)
        with RemoteModel(fake_endpoint("--quit-after", "1")) as model:
            assert model.query("count", pair) == infrared_checksum(pair)
            with pytest.raises(OracleError):
                model.query("count", pair)

    def test_unknown_wire_task_rejected(self, rng):
        pair = random_pair(rng, 8, 8)
        with RemoteModel(fake_endpoint()) as model:
            with pytest.raises(ConfigError):
                model.query("detect", pair)

    def test_remote_query_one_shot(self, rng):
        pair = random_pair(rng, 8, 8)
        assert remote_query(fake_endpoint(), "count", pair) == infrared_checksum(pair)

    def test_make_model_remote_counting(self, rng):
        pair = random_pair(rng, 8, 8)
        with RemoteModel(fake_endpoint()) as client:
            model = make_model("counting", TargetKind.REMOTE, remote_model=client)
            count, density = model(pair)
        assert count == infrared_checksum(pair)
        assert density is None

    def test_tcp_transport(self, rng):
        pair = random_pair(rng, 8, 8)
        proc = subprocess.Popen(
            [sys.executable, str(FAKE_SERVER), "--tcp"],
            stdout=subprocess.PIPE,
            text=True,
        )
        try:
            banner = proc.stdout.readline().split()
            assert banner[0] == "PORT"
            endpoint = RemoteEndpoint(transport="tcp", address=f"127.0.0.1:{banner[1]}")
            with RemoteModel(endpoint) as model:
                assert model.query("count", pair) == infrared_checksum(pair)
        finally:
            proc.terminate()
            proc.wait(timeout=5)


class TestResponseValidation:
    def query_canned(self, payload: dict, task: str = "count"):
        pair = pair_from_infrared(np.full((4, 6), 0.5))
        with RemoteModel(canned_endpoint(payload)) as model:
            return model.query(task, pair)

    def test_count_must_be_numeric(self):
        with pytest.raises(ProtocolError, match="numeric count"):
            self.query_canned({"ok": True, "count": "three"})

    def test_boolean_count_rejected(self):
        with pytest.raises(ProtocolError, match="numeric count"):
            self.query_canned({"ok": True, "count": True})

    def test_missing_ok_field_rejected(self):
        with pytest.raises(ProtocolError, match="id/ok"):
            self.query_canned({"count": 3})

    def test_labels_length_must_match_dims(self):
        short = base64.b64encode(b"\x00" * 5).decode()
        with pytest.raises(ProtocolError, match="expected 24"):
            self.query_canned({"ok": True, "labels_b64": short}, task="segment")

    def test_labels_must_be_base64(self):
        with pytest.raises(ProtocolError, match="labels"):
            self.query_canned({"ok": True, "labels_b64": "not base64!!"}, task="segment")

    def test_fused_shape_must_match_dims(self):
        buf = io.BytesIO()
        Image.new("L", (2, 2)).save(buf, format="PNG")
        wrong = base64.b64encode(buf.getvalue()).decode()
        with pytest.raises(ProtocolError, match="shape"):
            self.query_canned({"ok": True, "fused_png_b64": wrong}, task="fuse")

    def test_fused_must_be_png(self):
        junk = base64.b64encode(b"never a png").decode()
        with pytest.raises(ProtocolError, match="undecodable"):
            self.query_canned({"ok": True, "fused_png_b64": junk}, task="fuse")

    def test_color_fused_image_is_collapsed(self):
        buf = io.BytesIO()
        Image.new("RGB", (6, 4), color=(255, 255, 255)).save(buf, format="PNG")
        payload = {"ok": True, "fused_png_b64": base64.b64encode(buf.getvalue()).decode()}
        fused = self.query_canned(payload, task="fuse")
        assert fused.shape == (4, 6)
        # Grayscale weights sum to 1 only up to float rounding.
        assert fused == pytest.approx(np.ones((4, 6)), abs=1e-12)


class TestEndpointValidation:
    def test_unknown_transport(self):
        with pytest.raises(ConfigError):
            RemoteEndpoint(transport="carrier-pigeon", command=("x",))

    def test_subprocess_needs_command(self):
        with pytest.raises(ConfigError):
            RemoteEndpoint(transport="subprocess")

    def test_tcp_needs_address(self):
        with pytest.raises(ConfigError):
            RemoteEndpoint(transport="tcp")

    def test_timeout_must_be_positive(self):
        with pytest.raises(ConfigError):
            RemoteEndpoint(transport="tcp", address="h:1", timeout_ms=0)

    def test_in_flight_floor(self):
        with pytest.raises(ConfigError):
            RemoteEndpoint(transport="tcp", address="h:1", max_in_flight=0)

    def test_bad_tcp_address_shape(self):
        endpoint = RemoteEndpoint(transport="tcp", address="no-port-here")
        with pytest.raises(ConfigError, match="host:port"):
            RemoteModel(endpoint)
