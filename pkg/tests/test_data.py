import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitformer import data as D
from gaitformer.errors import ConfigError, SchemaError


def _stream(total, c=6, seed=0):
    return np.random.default_rng(seed).normal(size=(c, total))


# -- windowing


def test_window_counts_examples():
    assert len(D.window_stream(_stream(1000), 80, 2)) == 461
    one = D.window_stream(_stream(80), 80, 2)
    assert len(one) == 1 and one[0].origin == 0
    assert len(D.window_stream(_stream(178), 128, 50)) == 2


def test_short_stream_warns_and_is_empty():
    with pytest.warns(UserWarning):
        assert D.window_stream(_stream(50), 80, 2) == []


def test_windows_copy_the_right_samples():
    s = _stream(300)
    ws = D.window_stream(s, 80, 2, subject=3, stream=1)
    for w in ws[:5] + ws[-3:]:
        assert np.array_equal(w.values, s[:, w.origin:w.origin + 80])
        assert w.subject == 3 and w.stream == 1


@settings(max_examples=1000, deadline=None)
@given(total=st.integers(0, 3000), length=st.integers(1, 300), stride=st.integers(1, 200))
def test_window_count_formula_fuzz(total, length, stride):
    expect = 0 if total < length else (total - length) // stride + 1
    assert D.window_count(total, length, stride) == expect


def test_protocol_overlaps():
    assert D.PROTOCOLS["whugait"].overlap == 0.975
    assert round(D.PROTOCOLS["ouisir"].overlap, 3) == 0.609
    s = _stream(400)
    for name in ("whugait", "ouisir"):
        p = D.PROTOCOLS[name]
        a, b = D.window_stream(s, p.length, p.stride)[:2]
        shared = a.origin + p.length - b.origin
        assert shared == 78
        assert np.array_equal(a.values[:, p.stride:], b.values[:, :shared])


# -- splitting


def _grouped(counts):
    return {s: [D.SensorWindow(np.zeros((6, 4)), s, i) for i in range(n)] for s, n in counts.items()}


def test_split_examples():
    whu = D.split_protocol(_grouped({0: 10}), "whugait")
    assert (len(whu.development), len(whu.evaluation)) == (9, 1)
    assert [w.origin for w in whu.evaluation] == [9]
    oui = D.split_protocol(_grouped({0: 8}), "ouisir")
    assert (len(oui.development), len(oui.evaluation)) == (7, 1)
    for name in ("whugait", "ouisir"):
        two = D.split_protocol(_grouped({0: 2}), name)
        assert (len(two.development), len(two.evaluation)) == (1, 1)


def test_split_excludes_tiny_subjects():
    with pytest.warns(UserWarning, match="subject 1"):
        split = D.split_protocol(_grouped({0: 20, 1: 1}), "whugait")
    assert split.excluded == [1]
    assert split.subjects == [0]


@settings(max_examples=200, deadline=None)
@given(counts=st.lists(st.integers(2, 300), min_size=1, max_size=6), name=st.sampled_from(["whugait", "ouisir"]))
def test_split_fractions_and_disjointness(counts, name):
    split = D.split_protocol(_grouped(dict(enumerate(counts))), name)
    frac = float(D.PROTOCOLS[name].dev_fraction)
    for s, n in enumerate(counts):
        dev = [w for w in split.development if w.subject == s]
        ev = [w for w in split.evaluation if w.subject == s]
        assert len(dev) + len(ev) == n
        assert abs(len(dev) - frac * n) <= 1
        assert max(w.origin for w in dev) < min(w.origin for w in ev)


def test_custom_protocol_needs_fraction():
    with pytest.raises(ConfigError):
        D.split_protocol(_grouped({0: 5}), "synthetic")
    split = D.split_protocol(_grouped({0: 10}), "synthetic", dev_fraction=0.5)
    assert len(split.evaluation) == 5


def test_thin_evaluation_removes_all_shared_samples():
    streams = {0: [_stream(600, seed=1), _stream(600, seed=2)], 1: [_stream(600, seed=3)]}
    split = D.split_protocol(D.window_streams(streams, 80, 2), "whugait")
    thin = D.thin_evaluation(split, 80)
    assert 0 < len(thin.evaluation) < len(split.evaluation)
    for key in {(w.subject, w.stream) for w in thin.evaluation}:
        ev = sorted(w.origin for w in thin.evaluation if (w.subject, w.stream) == key)
        assert all(b - a >= 80 for a, b in zip(ev, ev[1:]))
        for w in thin.development:
            if (w.subject, w.stream) == key:
                assert all(abs(w.origin - e) >= 80 for e in ev)


# -- synthetic gait


def test_synthetic_determinism_and_shape():
    a = D.synthetic_gait(3, 2, 400, seed=5)
    b = D.synthetic_gait(3, 2, 400, seed=5)
    assert sorted(a) == [0, 1, 2] and all(len(v) == 2 for v in a.values())
    for s in a:
        for x, y in zip(a[s], b[s]):
            assert x.shape == (6, 400) and np.array_equal(x, y)
    c = D.synthetic_gait(3, 2, 400, seed=6)
    assert not np.array_equal(a[0][0], c[0][0])


def test_synthetic_noiseless_walks_repeat():
    streams = D.synthetic_gait(2, 3, 300, seed=1, noise=0.0, jitter=0.0)
    assert np.array_equal(streams[0][0], streams[0][2])


def test_synthetic_spectral_peak_at_step_frequency():
    fs, total = 50.0, 2000
    traits = D.subject_traits(4, seed=2, spread=0.5)
    streams = D.synthetic_gait(4, 1, total, seed=2, noise=0.0, jitter=0.0, fs=fs)
    bin_hz = fs / total
    for s, tr in enumerate(traits):
        ax = streams[s][0][0]
        spec = np.abs(np.fft.rfft(ax - ax.mean()))
        peak = int(spec.argmax()) * bin_hz
        assert abs(peak - tr.step_freq) <= bin_hz


def _spectral_signature(walk):
    spec = np.abs(np.fft.rfft(walk - walk.mean(axis=1, keepdims=True), axis=1))[:, :200]
    return (spec / np.linalg.norm(spec)).ravel()


def test_synthetic_subjects_are_separable_on_average():
    streams = D.synthetic_gait(6, 4, 1000, seed=7)
    sig = {s: [_spectral_signature(w) for w in walks] for s, walks in streams.items()}
    intra, inter = [], []
    for s in sig:
        for t in sig:
            for i, a in enumerate(sig[s]):
                for j, b in enumerate(sig[t]):
                    if s == t and i < j:
                        intra.append(np.linalg.norm(a - b))
                    elif s < t:
                        inter.append(np.linalg.norm(a - b))
    assert np.mean(inter) > np.mean(intra)


def test_synthetic_gravity_on_vertical_axis():
    walk = D.synthetic_gait(2, 1, 1000, seed=3, jitter=0.0)[0][0]
    assert abs(walk[2].mean() - D.GRAVITY) < 1.0


# -- CSV


def _write(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_csv_happy_path(tmp_path):
    rows = ["subject_id,t,ax,ay,az,gx,gy,gz"]
    for s in (4, 9):
        rows += [f"{s},{i * 0.02},{i},1,2,3,4,{s}" for i in range(100)]
    path = tmp_path / "imu.csv"
    _write(path, rows)
    streams = D.load_imu_csv(path)
    assert sorted(streams) == [4, 9]
    assert streams[4][0].shape == (6, 100)
    assert streams[9][0][5, 0] == 9.0 and streams[4][0][0, 99] == 99.0


def test_csv_round_trip_with_walks(tmp_path):
    streams = D.synthetic_gait(2, 3, 50, seed=0)
    path = tmp_path / "syn.csv"
    D.write_imu_csv(path, streams)
    back = D.load_imu_csv(path)
    for s in streams:
        assert len(back[s]) == 3
        for a, b in zip(streams[s], back[s]):
            assert np.array_equal(a, b)


def test_csv_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    _write(path, ["subject_id,t,ax,ay,az,gx,gy", "0,0,1,1,1,1,1"])
    with pytest.raises(SchemaError, match="subject_id,t,ax,ay,az,gx,gy,gz"):
        D.load_imu_csv(path)


def test_csv_malformed_row_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    _write(path, ["subject_id,t,ax,ay,az,gx,gy,gz", "0,0,1,1,1,1,1,1", "0,0.02,1,x,1,1,1,1"])
    with pytest.raises(SchemaError, match=":3:"):
        D.load_imu_csv(path)
    _write(path, ["subject_id,t,ax,ay,az,gx,gy,gz", "0,0,1,1,1,1,1"])
    with pytest.raises(SchemaError, match=":2:"):
        D.load_imu_csv(path)


def test_csv_out_of_order_timestamps(tmp_path):
    path = tmp_path / "bad.csv"
    _write(path, ["subject_id,t,ax,ay,az,gx,gy,gz", "7,0.04,1,1,1,1,1,1", "7,0.02,1,1,1,1,1,1"])
    with pytest.raises(SchemaError, match="subject 7"):
        D.load_imu_csv(path)


def test_csv_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(SchemaError):
        D.load_imu_csv(path)


# -- archives


def test_window_archive_round_trip(tmp_path):
    streams = D.synthetic_gait(3, 2, 200, seed=4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        split = D.thin_evaluation(D.split_protocol(D.window_streams(streams, 80, 2), "whugait"), 80)
    path = tmp_path / "w.bin"
    D.save_windows(path, split, {"length": 80})
    back, meta = D.load_windows(path)
    assert meta["length"] == 80 and back.protocol == "whugait"
    for a, b in zip(split.development + split.evaluation, back.development + back.evaluation):
        assert np.array_equal(a.values, b.values)
        assert (a.subject, a.origin, a.stream) == (b.subject, b.origin, b.stream)


def test_window_archive_rejects_other_kinds(tmp_path):
    from gaitformer.archive import write_archive

    path = tmp_path / "x.bin"
    write_archive(path, {"a": np.zeros(3)}, {"kind": "checkpoint"})
    with pytest.raises(SchemaError):
        D.load_windows(path)
