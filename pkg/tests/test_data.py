import numpy as np
import pytest

from mvpl import data as dt
from mvpl import model as mdl
from mvpl import views as vw
from mvpl.data import Dataset, MotionShapesSpec


SMALL = MotionShapesSpec(frames=4, height=20, width=20)


@pytest.fixture(scope="module")
def small_dataset():
    return dt.generate(SMALL, n_per_class=4, seed=11, eval_per_class=2)


def test_generate_counts_and_balance(small_dataset):
    m = small_dataset.manifest
    assert len(m.train_ids()) == 4 * 8
    assert len(m.eval_ids()) == 2 * 8
    labels = [m.record(i).label for i in m.train_ids()]
    assert all(labels.count(c) == 4 for c in range(8))
    assert set(m.train_ids()).isdisjoint(m.eval_ids())


def test_translation_ground_truth_velocity():
    spec = MotionShapesSpec(frames=4, height=20, width=20, speed_range=(1.0, 1.0))
    ds = dt.generate(spec, n_per_class=1, seed=3, eval_per_class=1)
    right = next(r for r in ds.manifest.records if r.class_name == "right")
    assert right.motion["kind"] == "translate"
    np.testing.assert_allclose(right.motion["velocity"], [1.0, 0.0])
    left = next(r for r in ds.manifest.records if r.class_name == "left")
    np.testing.assert_allclose(left.motion["velocity"], [-1.0, 0.0])


def test_estimated_flow_matches_ground_truth_on_support():
    spec = MotionShapesSpec(frames=4, height=24, width=24, speed_range=(1.0, 1.0),
                            noise_sigma=2.0)
    ds = dt.generate(spec, n_per_class=1, seed=5, eval_per_class=1)
    rec = next(r for r in ds.manifest.records if r.class_name == "right")
    clip = ds.clip(rec.clip_id)
    flow = vw.estimate_flow(clip).displacements
    # support: pixels whose value changes between the first two frames
    moving = np.abs(clip.frames[1] - clip.frames[0]).sum(axis=-1) > 20.0
    assert moving.sum() > 20
    err = np.sqrt((flow[0, ..., 0] - 1.0) ** 2 + flow[0, ..., 1] ** 2)
    assert err[moving].mean() < 0.6


def test_generate_deterministic_bytes(tmp_path, small_dataset):
    again = dt.generate(SMALL, n_per_class=4, seed=11, eval_per_class=2)
    p1, p2 = tmp_path / "a.mvpl", tmp_path / "b.mvpl"
    dt.save_dataset(p1, small_dataset)
    dt.save_dataset(p2, again)
    assert p1.read_bytes() == p2.read_bytes()


def test_clips_are_integer_valued_in_range(small_dataset):
    for frames in small_dataset.clips.values():
        assert frames.min() >= 0.0 and frames.max() <= 255.0
        np.testing.assert_array_equal(frames, np.round(frames))


def test_single_frame_probe_is_near_chance():
    ds = dt.generate(MotionShapesSpec(frames=2, height=16, width=16),
                     n_per_class=30, seed=7, eval_per_class=10)
    m = ds.manifest

    def frame0_features(ids):
        x = np.stack([ds.clips[i][0].reshape(-1) for i in ids]) / 255.0
        return x - x.mean(axis=0, keepdims=True)

    train_ids, eval_ids = m.train_ids(), m.eval_ids()
    xtr = frame0_features(train_ids)
    ytr = np.array([m.record(i).label for i in train_ids])
    xev = frame0_features(eval_ids)
    yev = np.array([m.record(i).label for i in eval_ids])
    # multinomial logistic probe, plain gradient descent
    w = np.zeros((xtr.shape[1], 8))
    onehot = np.eye(8)[ytr]
    for _ in range(200):
        z = xtr @ w
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        w -= 0.5 * xtr.T @ (p - onehot) / len(ytr)
    acc = ((xev @ w).argmax(axis=1) == yev).mean()
    assert acc <= 1.0 / 8.0 + 0.1, acc


def test_make_splits_fractions(small_dataset):
    m = dt.make_splits(small_dataset.manifest, 1.0, seed=0)
    assert len(m.labeled_train_ids()) == len(m.train_ids())
    m = dt.make_splits(small_dataset.manifest, 0.5, seed=0)
    labeled = m.labeled_train_ids()
    assert len(labeled) == 8 * 2  # ceil(0.5*4) per class
    per_class = {}
    for i in labeled:
        per_class[m.record(i).label] = per_class.get(m.record(i).label, 0) + 1
    assert all(v == 2 for v in per_class.values())
    # labeled stays a subset of the train pool; eval records untouched
    assert set(labeled) <= set(m.train_ids())
    before_eval = [r for r in small_dataset.manifest.records if r.split == "eval"]
    after_eval = [r for r in m.records if r.split == "eval"]
    assert before_eval == after_eval


def test_make_splits_seeds_differ_sizes_match(small_dataset):
    a = dt.make_splits(small_dataset.manifest, 0.5, seed=1)
    b = dt.make_splits(small_dataset.manifest, 0.5, seed=2)
    assert len(a.labeled_train_ids()) == len(b.labeled_train_ids())
    assert set(a.labeled_train_ids()) != set(b.labeled_train_ids())


def test_make_splits_rejects_bad_fraction(small_dataset):
    for p in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError, match="fraction"):
            dt.make_splits(small_dataset.manifest, p, seed=0)


def test_container_round_trip_bitwise(tmp_path, small_dataset):
    path = tmp_path / "ds.mvpl"
    dt.save_dataset(path, small_dataset)
    loaded = dt.load_dataset(path)
    assert set(loaded.clips) == set(small_dataset.clips)
    for cid in small_dataset.clips:
        assert np.array_equal(loaded.clips[cid], small_dataset.clips[cid])
    assert loaded.manifest == small_dataset.manifest


def test_container_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.mvpl"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(dt.ContainerMagicError):
        dt.read_container_file(path)


def test_container_rejects_unknown_version(tmp_path, small_dataset):
    path = tmp_path / "ds.mvpl"
    dt.save_dataset(path, small_dataset)
    raw = bytearray(path.read_bytes())
    raw[4:8] = (99).to_bytes(4, "little")
    path.write_bytes(bytes(raw))
    with pytest.raises(dt.ContainerVersionError):
        dt.read_container_file(path)


def test_container_rejects_truncation(tmp_path, small_dataset):
    path = tmp_path / "ds.mvpl"
    dt.save_dataset(path, small_dataset)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 1000])
    with pytest.raises(dt.ContainerTruncatedError):
        dt.read_container_file(path)
    path.write_bytes(raw[:10])
    with pytest.raises(dt.ContainerTruncatedError):
        dt.read_container_file(path)


def test_precomputed_views_equal_on_the_fly(tmp_path):
    spec = MotionShapesSpec(frames=3, height=16, width=16)
    ds = dt.generate(spec, n_per_class=1, seed=9, eval_per_class=1)
    with_views = dt.extract_views(ds)
    assert with_views.has_views()
    path = tmp_path / "views.mvpl"
    dt.save_dataset(path, with_views)
    loaded = dt.load_dataset(path)
    for cid in list(ds.clips)[:4]:
        fresh = ds.viewset(cid)
        cached = loaded.viewset(cid)
        assert np.array_equal(fresh.flow_view.frames, cached.flow_view.frames)
        assert np.array_equal(fresh.tg_view.frames, cached.tg_view.frames)


def test_checkpoint_round_trip(tmp_path):
    cfg = mdl.ModelConfig(input_shape=(4, 8, 8), widths=(4, 6), classes=8)
    state = mdl.init_parameters(cfg, seed=4)
    state.step = 57
    path = tmp_path / "model.mvpl"
    mdl.save_checkpoint(path, state)
    loaded = mdl.load_checkpoint(path)
    assert loaded.config == cfg
    assert loaded.step == 57
    assert loaded.state_bytes() == state.state_bytes()
