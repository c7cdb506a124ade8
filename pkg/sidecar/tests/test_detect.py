"""Detection endpoint tests over synthetic frame directories."""

import pytest
from PIL import Image, ImageDraw


@pytest.fixture(scope="module")
def video_dir(tmp_path_factory):
    """100 gray frames; a red square sits at (30,40)-(70,80) on frames 20-59."""
    root = tmp_path_factory.mktemp("frames")
    for i in range(100):
        img = Image.new("RGB", (160, 120), color=(120, 120, 120))
        if 20 <= i < 60:
            ImageDraw.Draw(img).rectangle([30, 40, 69, 79], fill=(220, 30, 30))
        img.save(root / f"{i:04d}.png")
    return str(root)


def test_detections_cluster_on_target_frames(client, video_dir):
    resp = client.post(
        "/detect",
        json={"video_ref": video_dir, "captions": ["red square"], "stride": 1},
    )
    assert resp.status_code == 200
    dets = resp.json()
    frames = sorted(d["frame_index"] for d in dets)
    assert frames == list(range(20, 60))
    sample = dets[0]
    assert sample["caption"] == "red square"
    assert sample["box"] == [30, 40, 70, 80]
    assert sample["confidence"] == pytest.approx(1.0, abs=1e-6)


def test_stride_skips_frames(client, video_dir):
    resp = client.post(
        "/detect",
        json={"video_ref": video_dir, "captions": ["red square"], "stride": 10},
    )
    frames = [d["frame_index"] for d in resp.json()]
    assert frames and all(f % 10 == 0 for f in frames)


def test_colorless_caption_detects_nothing(client, video_dir):
    resp = client.post(
        "/detect", json={"video_ref": video_dir, "captions": ["dog run"], "stride": 5}
    )
    assert resp.status_code == 200
    assert resp.json() == []


def test_unreadable_video_404(client):
    resp = client.post(
        "/detect",
        json={"video_ref": "/nonexistent/dir", "captions": ["red box"], "stride": 1},
    )
    assert resp.status_code == 404


def test_empty_captions_400(client, video_dir):
    resp = client.post(
        "/detect", json={"video_ref": video_dir, "captions": [], "stride": 1}
    )
    assert resp.status_code == 400
