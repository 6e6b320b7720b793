import multiprocessing as mp
import struct
import threading
import time

import numpy as np
import pytest

from splatbus import framebus as fb


def make_frames(w=16, h=16, seed=0):
    rng = np.random.default_rng(seed)
    color = rng.random((h, w, 4), dtype=np.float32)
    depth = rng.random((h, w), dtype=np.float32) + 0.1
    return color, depth


@pytest.mark.parametrize(
    "width,bpp,expected", [(800, 16, 12800), (1, 4, 64), (333, 16, 5376)]
)
def test_compute_pitch(width, bpp, expected):
    # 333*16 = 5328; the next multiple of 64 is 5376
    assert fb.compute_pitch(width, bpp) == expected


def test_compute_pitch_rejects_zero_width():
    with pytest.raises(fb.InvalidDescriptorError):
        fb.compute_pitch(0, 16)


def test_descriptor_validation():
    with pytest.raises(fb.InvalidDescriptorError):
        fb.FrameDescriptor(width=0, height=4, color_pitch=64, depth_pitch=64).validate()
    desc = fb.FrameDescriptor.for_size(64, 64)
    desc.validate()
    assert desc.color_pitch == 1024 and desc.depth_pitch == 256
    assert desc.region_bytes == 4096 + 64 * 1024 + 64 * 256


@pytest.mark.parametrize("transport", ["inprocess", "shared_memory"])
def test_create_attach_descriptor_matches(transport):
    desc = fb.FrameDescriptor.for_size(32, 24)
    with fb.create_region(desc, transport) as writer:
        reader = fb.attach_region(writer.attachment_token)
        assert reader.desc == desc
        reader.close()


@pytest.mark.parametrize("transport", ["inprocess", "shared_memory"])
def test_duplicate_name_rejected(transport):
    desc = fb.FrameDescriptor.for_size(8, 8)
    with fb.create_region(desc, transport, name="dup-test-region") as _:
        with pytest.raises(fb.RegionExistsError):
            fb.create_region(desc, transport, name="dup-test-region")


def test_corrupt_token_rejected():
    with pytest.raises(fb.AttachError):
        fb.attach_region("!!!not base64!!!")
    with pytest.raises(fb.AttachError):
        fb.attach_region("aGVsbG8=")  # valid base64, not a token


def test_stale_token_after_teardown():
    desc = fb.FrameDescriptor.for_size(8, 8)
    writer = fb.create_region(desc, "shared_memory")
    token = writer.attachment_token
    writer.close()
    with pytest.raises(fb.AttachError):
        fb.attach_region(token)


def test_layout_version_gate():
    desc = fb.FrameDescriptor.for_size(8, 8)
    with fb.create_region(desc, "inprocess") as writer:
        import base64
        import json

        doc = json.loads(base64.b64decode(writer.attachment_token))
        doc["layout_version"] = 99
        bad = base64.b64encode(json.dumps(doc).encode()).decode()
        with pytest.raises(fb.IncompatibleLayoutError):
            fb.attach_region(bad)


@pytest.mark.parametrize("transport", ["inprocess", "shared_memory"])
def test_publish_acquire_identity(transport):
    desc = fb.FrameDescriptor.for_size(16, 16)
    color, depth = make_frames()
    with fb.create_region(desc, transport, stamp_checksums=True) as writer:
        reader = fb.attach_region(writer.attachment_token)
        assert reader.acquire_latest("nonblocking") is None  # nothing published yet
        writer.publish(color, depth, frame_index=1, timestamp_ns=123)
        snap = reader.acquire_latest("nonblocking")
        assert snap is not None
        assert snap.frame_index == 1
        assert snap.timestamp_ns == 123
        assert np.array_equal(snap.color, color)
        assert np.array_equal(snap.depth, depth)
        assert snap.checksum == snap.compute_checksum() == fb.plane_checksum(color, depth)
        reader.close()


def test_publish_dimension_mismatch():
    desc = fb.FrameDescriptor.for_size(64, 64)
    color, depth = make_frames(32, 32)
    with fb.create_region(desc, "inprocess") as writer:
        with pytest.raises(ValueError):
            writer.publish(color, depth)


def test_frame_index_must_increase():
    desc = fb.FrameDescriptor.for_size(8, 8)
    color, depth = make_frames(8, 8)
    with fb.create_region(desc, "inprocess") as writer:
        writer.publish(color, depth, frame_index=5)
        with pytest.raises(ValueError):
            writer.publish(color, depth, frame_index=5)


def test_latest_wins():
    desc = fb.FrameDescriptor.for_size(8, 8)
    c1, d1 = make_frames(8, 8, seed=1)
    c2, d2 = make_frames(8, 8, seed=2)
    with fb.create_region(desc, "inprocess") as writer:
        reader = fb.attach_region(writer.attachment_token)
        writer.publish(c1, d1)
        writer.publish(c2, d2)
        snap = reader.acquire_latest("nonblocking")
        assert snap.frame_index == 2
        assert np.array_equal(snap.color, c2)
        # no newer frame now
        assert reader.acquire_latest("nonblocking") is None


def test_block_until_new_monotonic():
    desc = fb.FrameDescriptor.for_size(8, 8)
    color, depth = make_frames(8, 8)
    with fb.create_region(desc, "inprocess") as writer:
        reader = fb.attach_region(writer.attachment_token)
        seen = []

        def consume():
            for _ in range(5):
                seen.append(reader.acquire_latest("block_until_new", timeout=5.0).frame_index)

        t = threading.Thread(target=consume)
        t.start()
        for i in range(1, 6):
            writer.publish(color, depth, frame_index=i)
            time.sleep(0.01)
        t.join(timeout=10)
        assert not t.is_alive()
        assert seen == sorted(seen)
        assert len(set(seen)) == len(seen)


def test_writer_close_disconnects_blocked_reader():
    desc = fb.FrameDescriptor.for_size(8, 8)
    writer = fb.create_region(desc, "inprocess")
    reader = fb.attach_region(writer.attachment_token)
    result = {}

    def wait_for_frame():
        try:
            reader.acquire_latest("block_until_new", timeout=10.0)
        except fb.DisconnectedError as exc:
            result["error"] = exc

    t = threading.Thread(target=wait_for_frame)
    t.start()
    time.sleep(0.05)
    writer.close()
    t.join(timeout=5)
    assert not t.is_alive()
    assert "error" in result


def test_header_layout_is_stable():
    """Byte offsets are the cross-language contract (LAYOUT.md, layout_version 1)."""
    desc = fb.FrameDescriptor.for_size(33, 7)
    color = np.full((7, 33, 4), 0.25, dtype=np.float32)
    depth = np.full((7, 33), 2.0, dtype=np.float32)
    with fb.create_region(desc, "inprocess") as writer:
        writer.publish(color, depth, frame_index=9, timestamp_ns=77)
        raw = bytes(writer._buf[:80])
        assert raw[0:8] == b"SPLATBUS"
        assert struct.unpack_from("<I", raw, 8)[0] == 1  # layout_version
        assert struct.unpack_from("<I", raw, 12)[0] == 4096  # header size
        assert struct.unpack_from("<Q", raw, 16)[0] == 2  # seq, even after one publish
        assert struct.unpack_from("<Q", raw, 24)[0] == 9  # frame_index
        assert struct.unpack_from("<Q", raw, 32)[0] == 77  # timestamp_ns
        assert struct.unpack_from("<I", raw, 56)[0] == 33  # width
        assert struct.unpack_from("<I", raw, 60)[0] == 7  # height
        assert struct.unpack_from("<I", raw, 72)[0] == fb.compute_pitch(33, 16)
        assert struct.unpack_from("<I", raw, 76)[0] == fb.compute_pitch(33, 4)
        # color plane starts at 4096: first pixel is 0.25f
        first = struct.unpack_from("<f", bytes(writer._buf[4096:4100]))[0]
        assert first == 0.25


def _tear_reader(reader, stop, failures, counts):
    last = 0
    while not stop.is_set():
        try:
            snap = reader.acquire_latest("block_until_new", timeout=0.2)
        except fb.DisconnectedError:
            continue  # idle gap; the stop flag decides when to quit
        counts[0] += 1
        if snap.frame_index <= last:
            failures.append(f"non-monotonic index {snap.frame_index} after {last}")
            return
        last = snap.frame_index
        if snap.checksum != snap.compute_checksum():
            failures.append(f"checksum mismatch at frame {snap.frame_index}")
            return
        # alternating solid frames: a single snapshot must never mix colors
        unique = np.unique(snap.color[:, :, 0])
        if unique.size != 1:
            failures.append(f"torn frame {snap.frame_index}: {unique}")
            return


@pytest.mark.parametrize("transport", ["inprocess", "shared_memory"])
def test_no_tearing_under_load(transport):
    desc = fb.FrameDescriptor.for_size(64, 64)
    red = np.zeros((64, 64, 4), dtype=np.float32)
    red[:] = [1.0, 0.0, 0.0, 1.0]
    blue = np.zeros((64, 64, 4), dtype=np.float32)
    blue[:] = [0.0, 0.0, 1.0, 1.0]
    depth_r = np.full((64, 64), 1.0, dtype=np.float32)
    depth_b = np.full((64, 64), 2.0, dtype=np.float32)

    with fb.create_region(desc, transport, stamp_checksums=True) as writer:
        reader = fb.attach_region(writer.attachment_token)
        stop = threading.Event()
        failures, counts = [], [0]
        t = threading.Thread(target=_tear_reader, args=(reader, stop, failures, counts))
        t.start()
        for i in range(1, 5001):
            if i % 2:
                writer.publish(red, depth_r, frame_index=i)
            else:
                writer.publish(blue, depth_b, frame_index=i)
            if i % 8 == 0:
                time.sleep(0)  # yield the GIL so the reader interleaves mid-burst
        stop.set()
        t.join(timeout=10)
        reader.close()
    assert not failures, failures
    assert counts[0] > 50


def _child_reader(token, n_frames, ready, out_queue):
    from splatbus import framebus

    reader = framebus.attach_region(token)
    ready.set()
    verified = 0
    mismatches = 0
    last = 0
    try:
        while last < n_frames:
            snap = reader.acquire_latest("block_until_new", timeout=30.0)
            if snap.frame_index <= last:
                out_queue.put(("order", snap.frame_index, last))
                return
            last = snap.frame_index
            if snap.checksum != snap.compute_checksum():
                mismatches += 1
            verified += 1
    except framebus.DisconnectedError:
        pass
    out_queue.put(("ok", verified, mismatches))


def test_cross_process_attach_and_verify():
    desc = fb.FrameDescriptor.for_size(64, 64)
    rng = np.random.default_rng(5)
    n_frames = 400
    ctx = mp.get_context("fork")
    with fb.create_region(desc, "shared_memory", stamp_checksums=True) as writer:
        q = ctx.Queue()
        ready = ctx.Event()
        child = ctx.Process(target=_child_reader, args=(writer.attachment_token, n_frames, ready, q))
        child.start()
        assert ready.wait(timeout=30)
        for i in range(1, n_frames + 1):
            color = rng.random((64, 64, 4), dtype=np.float32)
            depth = rng.random((64, 64), dtype=np.float32) + 0.5
            writer.publish(color, depth, frame_index=i)
        status, verified, mismatches = q.get(timeout=60)
        child.join(timeout=30)
    assert status == "ok"
    assert mismatches == 0
    assert verified > 10


def test_bounded_retry_at_1khz():
    """Writer at ~1 kHz, copies well under 1 ms: acquires finish with few retries."""
    desc = fb.FrameDescriptor.for_size(64, 64)
    color, depth = make_frames(64, 64)
    with fb.create_region(desc, "inprocess") as writer:
        reader = fb.attach_region(writer.attachment_token)
        stop = threading.Event()
        got = [0]

        def consume():
            while not stop.is_set():
                try:
                    reader.acquire_latest("block_until_new", timeout=0.2)
                    got[0] += 1
                except fb.DisconnectedError:
                    continue

        t = threading.Thread(target=consume)
        t.start()
        for i in range(1, 501):
            writer.publish(color, depth, frame_index=i)
            time.sleep(0.001)
        stop.set()
        t.join(timeout=5)
        reader.close()
    assert got[0] > 100
    assert reader.retries <= 100, f"{reader.retries} seqlock retries over {got[0]} acquires"


def test_reader_handles_no_leak():
    import glob

    desc = fb.FrameDescriptor.for_size(8, 8)
    before = set(glob.glob("/dev/shm/splatbus-*"))
    for _ in range(50):
        writer = fb.create_region(desc, "shared_memory")
        reader = fb.attach_region(writer.attachment_token)
        reader.close()
        writer.close()
    after = set(glob.glob("/dev/shm/splatbus-*"))
    assert after <= before
