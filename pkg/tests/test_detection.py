"""Builtin peak detector behavior and the external detection protocol."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from csibench.detection import (
    Detection,
    DetectionProtocolError,
    DetectionTransportError,
    EmptyDetectionsError,
    ExternalDetectorClient,
    PeakDetectorConfig,
    bbox_to_path,
    detect_external,
    detect_peaks_builtin,
)

from stub_detection import (
    free_port,
    make_echo_app,
    make_empty_app,
    make_error_app,
    make_malformed_app,
    make_size_keyed_app,
    make_text_app,
    start_server,
)


def _client(app):
    return TestClient(app, raise_server_exceptions=False)


# --- builtin detector ---


def test_single_peak_found_at_exact_pixel():
    a = np.zeros((16, 16))
    a[5, 9] = 3.0
    dets = detect_peaks_builtin(a)
    assert len(dets) == 1
    assert (dets[0].center_h, dets[0].center_w) == (5.0, 9.0)
    assert dets[0].confidence == 3.0


def test_two_separated_peaks_ordered_by_value():
    a = np.zeros((64, 64))
    a[10, 10] = 1.0
    a[40, 40] = 2.0
    dets = detect_peaks_builtin(a)
    assert [(d.center_h, d.center_w) for d in dets] == [(40.0, 40.0), (10.0, 10.0)]
    assert dets[0].confidence >= dets[1].confidence


def test_nearby_peak_suppressed_within_window():
    a = np.zeros((32, 32))
    a[10, 10] = 1.0
    a[12, 14] = 0.9  # inside the default +-8 window of the first peak
    a[10, 30] = 0.5  # outside horizontally (distance 20 > 8)
    dets = detect_peaks_builtin(a)
    centers = {(d.center_h, d.center_w) for d in dets}
    assert (10.0, 10.0) in centers
    assert (10.0, 30.0) in centers
    assert (12.0, 14.0) not in centers


def test_suppression_window_wraps_circularly():
    # peak at the left edge must suppress a neighbor across the wrap
    a = np.zeros((32, 32))
    a[5, 1] = 1.0
    a[5, 29] = 0.9  # circular column distance 4, linear distance 28
    dets = detect_peaks_builtin(a)
    centers = {(d.center_h, d.center_w) for d in dets}
    assert (5.0, 1.0) in centers
    assert (5.0, 29.0) not in centers


def test_tie_breaks_to_smallest_row_then_column():
    a = np.zeros((40, 40))
    a[30, 2] = 1.0
    a[7, 35] = 1.0
    a[7, 5] = 1.0
    cfg = PeakDetectorConfig(suppression_radius_w=1, suppression_radius_h=1)
    dets = detect_peaks_builtin(a, cfg)
    assert (dets[0].center_h, dets[0].center_w) == (7.0, 5.0)


def test_threshold_stops_weak_peaks():
    a = np.zeros((64, 64))
    a[5, 5] = 1.0
    a[40, 40] = 0.19
    dets = detect_peaks_builtin(a, PeakDetectorConfig(threshold_ratio=0.2))
    assert len(dets) == 1


def test_threshold_boundary_value_is_kept():
    # stop rule is strictly below tau * g0
    a = np.zeros((64, 64))
    a[5, 5] = 1.0
    a[40, 40] = 0.2
    dets = detect_peaks_builtin(a, PeakDetectorConfig(threshold_ratio=0.2))
    assert len(dets) == 2


def test_known_count_overrides_threshold_and_cap():
    a = np.zeros((64, 64))
    a[5, 5] = 1.0
    a[40, 40] = 0.01  # far below any threshold
    cfg = PeakDetectorConfig(threshold_ratio=0.5, max_peaks=1, known_count=2)
    dets = detect_peaks_builtin(a, cfg)
    assert len(dets) == 2


def test_known_count_stops_when_matrix_exhausted():
    a = np.zeros((8, 8))
    a[2, 2] = 1.0  # one real peak; suppression wipes the whole 8x8 board
    dets = detect_peaks_builtin(a, PeakDetectorConfig(known_count=5))
    assert len(dets) == 1


def test_max_peaks_caps_output():
    a = np.zeros((64, 64))
    for i in range(5):
        a[i * 12 + 2, i * 12 + 2] = 1.0 - 0.01 * i
    dets = detect_peaks_builtin(a, PeakDetectorConfig(max_peaks=3, threshold_ratio=0.0))
    assert len(dets) == 3


def test_all_zero_matrix_gives_no_detections():
    assert detect_peaks_builtin(np.zeros((16, 16))) == []


def test_box_is_clipped_but_center_is_exact():
    a = np.zeros((32, 32))
    a[1, 30] = 1.0
    d = detect_peaks_builtin(a)[0]
    assert d.box == (22.0, 0.0, 31.0, 9.0)
    assert (d.center_w, d.center_h) == (30.0, 1.0)


def test_detector_config_validation():
    with pytest.raises(ValueError):
        PeakDetectorConfig(threshold_ratio=1.5)
    with pytest.raises(ValueError):
        PeakDetectorConfig(max_peaks=0)
    with pytest.raises(ValueError):
        PeakDetectorConfig(known_count=0)
    with pytest.raises(ValueError):
        PeakDetectorConfig(suppression_radius_w=-1)


# --- detection to path inversion ---


def test_bbox_to_path_inverts_on_grid_placement():
    beta_m, gamma_n = 256, 256
    for k, q in [(0, 0), (3, 5), (255, 1), (100, 255)]:
        w = (beta_m - k) % beta_m
        det = Detection(box=(w, q, w, q), center_w=float(w), center_h=float(q), confidence=1.0)
        p = bbox_to_path(det, beta_m, gamma_n)
        assert p.angle_hat == pytest.approx(k / beta_m)
        assert p.delay_hat == pytest.approx(q / gamma_n)


def test_bbox_to_path_wraps_angle_at_zero_column():
    det = Detection(box=(0, 4, 0, 4), center_w=0.0, center_h=4.0, confidence=1.0)
    p = bbox_to_path(det, 128, 128)
    assert p.angle_hat == 0.0


def test_bbox_to_path_rejects_out_of_bounds():
    det = Detection(box=(0, 0, 0, 0), center_w=300.0, center_h=4.0, confidence=1.0)
    with pytest.raises(ValueError):
        bbox_to_path(det, 256, 256)


# --- wire protocol client (stub services injected as the HTTP client) ---

_PNG = None


def _png():
    global _PNG
    if _PNG is None:
        from csibench.service.conformance import spot_png

        _PNG = spot_png()
    return _PNG


def test_external_parses_and_sorts_by_score():
    app = make_echo_app([((1, 2, 5, 6), 0.4), ((10, 10, 20, 20), 0.9)])
    dets = detect_external(_png(), "bright spot", "http://stub", client=_client(app))
    assert [d.confidence for d in dets] == [0.9, 0.4]
    assert dets[0].center_w == 15.0 and dets[0].center_h == 15.0
    assert dets[1].box == (1.0, 2.0, 5.0, 6.0)


def test_external_sends_image_prompt_and_extra():
    app = make_echo_app([((0, 0, 1, 1), 1.0)])
    detect_external(_png(), "two spots", "http://stub", client=_client(app), extra={"known_count": 2})
    sent = app.state.requests[0]
    assert sent["prompt"] == "two spots"
    assert sent["known_count"] == 2
    import base64

    assert base64.b64decode(sent["image"]) == _png()


def test_external_score_clamped_to_unit_interval():
    app = make_echo_app([((0, 0, 1, 1), 7.5), ((2, 2, 3, 3), -1.0)])
    dets = detect_external(_png(), "bright spot", "http://stub", client=_client(app))
    assert dets[0].confidence == 1.0
    assert dets[1].confidence == 0.0


def test_external_empty_raises():
    with pytest.raises(EmptyDetectionsError):
        detect_external(_png(), "bright spot", "http://stub", client=_client(make_empty_app()))


@pytest.mark.parametrize(
    "payload",
    [
        {"not": "a list"},
        [{"bbox": [1, 2, 3], "score": 0.5}],
        [{"bbox": [1, 2, 3, 4]}],
        [{"score": 0.5}],
        [{"bbox": [1, 2, 3, "x"], "score": 0.5}],
        [{"bbox": [1, 2, 3, 4], "score": "high"}],
    ],
)
def test_external_malformed_payloads_raise_protocol_error(payload):
    app = make_malformed_app(payload)
    with pytest.raises(DetectionProtocolError):
        detect_external(_png(), "bright spot", "http://stub", client=_client(app))


def test_external_non_json_raises_protocol_error():
    app = make_text_app("here are your detections")
    with pytest.raises(DetectionProtocolError):
        detect_external(_png(), "bright spot", "http://stub", client=_client(app))


def test_external_http_error_raises_transport_error():
    app = make_error_app(500)
    with pytest.raises(DetectionTransportError):
        detect_external(_png(), "bright spot", "http://stub", client=_client(app))


def test_external_url_normalization():
    app = make_echo_app([((0, 0, 1, 1), 1.0)])
    # trailing slash and explicit /detect both route to the same handler
    for endpoint in ("http://stub", "http://stub/", "http://stub/detect"):
        dets = detect_external(_png(), "bright spot", endpoint, client=_client(app))
        assert len(dets) == 1


def test_external_connection_refused_is_transport_error():
    port = free_port()
    with pytest.raises(DetectionTransportError):
        detect_external(_png(), "bright spot", f"http://127.0.0.1:{port}", timeout=2.0)


def test_external_over_real_socket():
    app = make_echo_app([((4, 6, 8, 10), 0.7)])
    base, stop = start_server(app)
    try:
        dets = detect_external(_png(), "bright spot", base, timeout=5.0)
        assert len(dets) == 1
        assert dets[0].box == (4.0, 6.0, 8.0, 10.0)
    finally:
        stop()


def test_detect_many_results_align_with_inputs():
    from csibench.service.conformance import spot_png

    # stub keys its answer on payload size: the tiny PNG gets zero detections
    small = spot_png(height=8, width=8, spots=())
    big = spot_png(height=64, width=64, spots=((10, 20),))
    threshold = (len(small) + len(big)) // 2
    app = make_size_keyed_app(threshold)
    client = ExternalDetectorClient("http://stub", max_in_flight=3, client=_client(app))
    pngs = [big, small, big, small, big]
    results, errors = client.detect_many(pngs)
    for i, png in enumerate(pngs):
        if len(png) >= threshold:
            assert errors[i] is None
            assert len(results[i]) == 1
        else:
            assert results[i] is None
            assert isinstance(errors[i], EmptyDetectionsError)
    client.close()
