"""IMU ingestion, overlapped windowing, protocol splits and a synthetic gait source.

Streams are ``float64`` arrays shaped ``[6, T]``: accelerometer x/y/z in m/s^2
then gyroscope x/y/z in rad/s.  Collections of streams are
``dict[subject_id, list[stream]]``, one list entry per recording (walk).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import archive
from .errors import ConfigError, SchemaError

CHANNELS = ("ax", "ay", "az", "gx", "gy", "gz")
CSV_HEADER = ("subject_id", "t") + CHANNELS
GRAVITY = 9.80665


@dataclass(frozen=True)
class Protocol:
    name: str
    length: int
    stride: int
    dev_fraction: Fraction

    @property
    def overlap(self) -> float:
        return overlap(self.length, self.stride)


# 97% overlap at L=80 means stride 2.4, rounded to 2 (97.5%).
# 61% overlap at L=128 means stride 49.9, rounded to 50 (60.9%).
PROTOCOLS = {
    "whugait": Protocol("whugait", 80, 2, Fraction(9, 10)),
    "ouisir": Protocol("ouisir", 128, 50, Fraction(7, 8)),
}


def overlap(length: int, stride: int) -> float:
    return 1.0 - stride / length


@dataclass
class SensorWindow:
    values: np.ndarray  # [c, L]
    subject: int
    origin: int  # first sample index in the source stream
    stream: int = 0

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass
class DatasetSplit:
    development: list[SensorWindow]
    evaluation: list[SensorWindow]
    protocol: str
    excluded: list[int] = field(default_factory=list)

    @property
    def subjects(self) -> list[int]:
        return sorted({w.subject for w in self.development} | {w.subject for w in self.evaluation})


# ---------------------------------------------------------------------------
# windowing


def window_count(total: int, length: int, stride: int) -> int:
    return 0 if total < length else (total - length) // stride + 1


def window_stream(signal: np.ndarray, length: int, stride: int, subject: int = 0, stream: int = 0) -> list[SensorWindow]:
    """Cut ``[c, T]`` into windows starting at 0, stride, 2*stride, ... while they fit."""
    if length < 1 or stride < 1:
        raise ConfigError(f"window length and stride must be positive, got {length}, {stride}")
    signal = np.asarray(signal, dtype=np.float64)
    total = signal.shape[1]
    if total < length:
        warnings.warn(f"subject {subject}: stream of {total} samples is shorter than window {length}; skipped")
        return []
    return [
        SensorWindow(signal[:, start : start + length].copy(), subject, start, stream)
        for start in range(0, total - length + 1, stride)
    ]


def window_streams(streams: dict, length: int, stride: int) -> dict[int, list[SensorWindow]]:
    """Window every recording; windows per subject are ordered by recording then offset."""
    return {
        subject: [w for i, s in enumerate(streams[subject]) for w in window_stream(s, length, stride, subject, i)]
        for subject in sorted(streams)
    }


def split_protocol(
    windows: dict[int, list[SensorWindow]],
    protocol: str | Protocol,
    dev_fraction: Fraction | float | None = None,
) -> DatasetSplit:
    """Per subject, send the chronologically last ``ceil((1 - f) n)`` windows to evaluation."""
    if isinstance(protocol, str):
        if protocol in PROTOCOLS:
            proto_name, frac = protocol, PROTOCOLS[protocol].dev_fraction
        elif dev_fraction is None:
            raise ConfigError(f"protocol {protocol!r} needs an explicit dev_fraction")
        else:
            proto_name, frac = protocol, None
    else:
        proto_name, frac = protocol.name, protocol.dev_fraction
    if dev_fraction is not None:
        frac = Fraction(dev_fraction).limit_denominator(10_000)
    if not 0 < frac < 1:
        raise ConfigError(f"development fraction must lie in (0, 1), got {frac}")

    dev, ev, excluded = [], [], []
    for subject in sorted(windows):
        ws = windows[subject]
        n = len(ws)
        if n < 2:
            excluded.append(subject)
            warnings.warn(f"subject {subject} has {n} window(s); excluded from the split")
            continue
        n_eval = min(n - 1, math.ceil(n * (1 - frac)))
        dev.extend(ws[: n - n_eval])
        ev.extend(ws[n - n_eval :])
    return DatasetSplit(dev, ev, proto_name, excluded)


def thin_evaluation(split: DatasetSplit, length: int | None = None) -> DatasetSplit:
    """Make evaluation windows non-overlapping and purge development windows touching them.

    Within every recording the evaluation tail keeps one window per ``length``
    samples.  Development windows from the same recording that overlap a kept
    evaluation window are dropped, so no sample is shared across the split.
    """
    kept: list[SensorWindow] = []
    last: dict[tuple[int, int], int] = {}
    for w in split.evaluation:
        span = length or w.length
        key = (w.subject, w.stream)
        if key not in last or w.origin >= last[key] + span:
            kept.append(w)
            last[key] = w.origin
    spans: dict[tuple[int, int], list[int]] = {}
    for w in kept:
        spans.setdefault((w.subject, w.stream), []).append(w.origin)
    dev = [
        w
        for w in split.development
        if not any(abs(w.origin - e) < (length or w.length) for e in spans.get((w.subject, w.stream), ()))
    ]
    return DatasetSplit(dev, kept, split.protocol, list(split.excluded))


def stack_windows(windows: list[SensorWindow]) -> tuple[np.ndarray, np.ndarray]:
    if not windows:
        return np.zeros((0, 0, 0)), np.zeros(0, dtype=np.int64)
    x = np.stack([w.values for w in windows])
    y = np.array([w.subject for w in windows], dtype=np.int64)
    return x, y


# ---------------------------------------------------------------------------
# synthetic gait


@dataclass(frozen=True)
class SubjectTraits:
    step_freq: float  # Hz
    amplitude: np.ndarray  # [6]
    harmonics: np.ndarray  # [6, H] relative amplitude of harmonic k+1
    phases: np.ndarray  # [6, H]
    coupling: np.ndarray  # [6, 6] axis mixing


def subject_traits(
    num_subjects: int, seed: int, n_harmonics: int = 4, coupling: float = 0.15, spread: float = 1.0
) -> list[SubjectTraits]:
    """Draw per-subject traits around a shared population template.

    ``spread`` scales how far each subject's waveform shape (amplitudes,
    harmonic mix, phases, coupling) departs from the template; step frequency
    is always uniform in 1.4-2.3 Hz.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    h = n_harmonics
    base_amp = np.concatenate([rng.uniform(1.0, 3.0, 3), rng.uniform(0.5, 2.0, 3)])
    base_harm = rng.uniform(0.05, 0.6, (6, h - 1))
    base_phase = rng.uniform(0.0, 2.0 * np.pi, (6, h))
    base_mix = coupling * rng.standard_normal((6, 6))
    traits = []
    for _ in range(num_subjects):
        freq = rng.uniform(1.4, 2.3)
        amplitude = base_amp * np.exp(0.3 * spread * rng.standard_normal(6))
        # the fundamental dominates: harmonic k+1 stays below 0.6 / (k+1)
        harmonics = np.ones((6, h))
        mix_h = np.clip(base_harm + 0.25 * spread * rng.standard_normal((6, h - 1)), 0.02, 0.6)
        harmonics[:, 1:] = mix_h / np.arange(2, h + 1)
        phases = base_phase + spread * rng.uniform(-np.pi, np.pi, (6, h))
        mix = np.eye(6) + base_mix + 0.5 * spread * coupling * rng.standard_normal((6, 6))
        traits.append(SubjectTraits(freq, amplitude, harmonics, phases, mix))
    return traits


def _rotation(angles: np.ndarray) -> np.ndarray:
    ax, ay, az = angles
    rx = np.array([[1, 0, 0], [0, np.cos(ax), -np.sin(ax)], [0, np.sin(ax), np.cos(ax)]])
    ry = np.array([[np.cos(ay), 0, np.sin(ay)], [0, 1, 0], [-np.sin(ay), 0, np.cos(ay)]])
    rz = np.array([[np.cos(az), -np.sin(az), 0], [np.sin(az), np.cos(az), 0], [0, 0, 1]])
    return rz @ ry @ rx


def render_walk(traits: SubjectTraits, total: int, fs: float, rng: np.random.Generator, noise: float, jitter: float):
    """One recording: subject harmonics with per-walk jitter, device tilt and noise.

    Jitter covers start phase, tempo (3% per unit), per-axis gain (10% per
    unit), slow phase drift and a small random device rotation (5 degrees per
    unit, applied to both sensors).
    """
    t = np.arange(total) / fs
    freq = traits.step_freq * (1.0 + 0.03 * jitter * rng.standard_normal())
    gain = 1.0 + 0.1 * jitter * rng.standard_normal(6)
    tilt = _rotation(np.deg2rad(5.0) * jitter * rng.standard_normal(3))
    phase0 = jitter * rng.uniform(0.0, 2.0 * np.pi)
    drift = np.cumsum(0.02 * jitter * rng.standard_normal(total))
    theta = 2.0 * np.pi * freq * t + phase0 + drift  # [T]
    k = np.arange(1, traits.harmonics.shape[1] + 1)
    waves = np.sin(k[None, :, None] * theta[None, None, :] + traits.phases[:, :, None])  # [6, H, T]
    base = (traits.harmonics[:, :, None] * waves).sum(axis=1) * (traits.amplitude * gain)[:, None]
    signal = traits.coupling @ base
    signal[2] += GRAVITY
    signal[:3] = tilt @ signal[:3]
    signal[3:] = tilt @ signal[3:]
    if noise > 0:
        # RMS of the oscillation, so gravity does not inflate the noise on tilted axes
        rms = signal.std(axis=1, keepdims=True)
        signal = signal + noise * rms * rng.standard_normal(signal.shape)
    return signal


def synthetic_gait(
    num_subjects: int,
    walks_per_subject: int,
    total: int,
    seed: int,
    noise: float = 0.05,
    jitter: float = 2.0,
    spread: float = 0.5,
    fs: float = 50.0,
) -> dict[int, list[np.ndarray]]:
    """Labeled synthetic IMU recordings, ``{subject: [walk [6, total], ...]}``.

    Each subject has persistent traits (step frequency in 1.4-2.3 Hz, per-axis
    amplitude, harmonic mix, axis coupling).  ``noise`` is the Gaussian noise
    standard deviation relative to each channel's RMS; ``jitter`` scales the
    walk-to-walk variation (0 disables it); ``spread`` scales how distinct the
    subjects' waveforms are.
    """
    if num_subjects < 2:
        raise ConfigError(f"need at least two subjects, got {num_subjects}")
    traits = subject_traits(num_subjects, seed, spread=spread)
    streams = {}
    for s, tr in enumerate(traits):
        walks = []
        for w in range(walks_per_subject):
            rng = np.random.default_rng(np.random.SeedSequence([seed, 1, s, w]))
            walks.append(render_walk(tr, total, fs, rng, noise, jitter))
        streams[s] = walks
    return streams


# ---------------------------------------------------------------------------
# CSV


def write_imu_csv(path, streams: dict, fs: float = 50.0) -> None:
    """Write streams with an extra ``walk`` column separating recordings."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        out = csv.writer(f)
        out.writerow(("subject_id", "walk", "t") + CHANNELS)
        for subject in sorted(streams):
            for w, s in enumerate(streams[subject]):
                for i in range(s.shape[1]):
                    out.writerow([subject, w, repr(i / fs)] + [repr(float(v)) for v in s[:, i]])


def load_imu_csv(path) -> dict[int, list[np.ndarray]]:
    """Read ``subject_id,t,ax,ay,az,gx,gy,gz`` rows into per-subject ``[6, T]`` streams.

    An optional ``walk`` column splits a subject's rows into separate
    recordings.  Timestamps must increase strictly within each recording.
    """
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file; expected header {','.join(CSV_HEADER)}") from None
        missing = [c for c in CSV_HEADER if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}; expected header {','.join(CSV_HEADER)}")
        col = {name: header.index(name) for name in CSV_HEADER}
        walk_col = header.index("walk") if "walk" in header else None
        rows: dict[tuple[int, int], list[list[float]]] = {}
        last_t: dict[tuple[int, int], float] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                subject = int(row[col["subject_id"]])
                walk = int(row[walk_col]) if walk_col is not None else 0
                t = float(row[col["t"]])
                values = [float(row[col[c]]) for c in CHANNELS]
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: malformed row ({exc})") from None
            key = (subject, walk)
            if key in last_t and t <= last_t[key]:
                raise SchemaError(f"{path}:{lineno}: timestamps for subject {subject} are not increasing")
            last_t[key] = t
            rows.setdefault(key, []).append(values)
    streams: dict[int, list[np.ndarray]] = {}
    for subject, walk in sorted(rows):
        streams.setdefault(subject, []).append(np.asarray(rows[(subject, walk)], dtype=np.float64).T)
    return streams


# ---------------------------------------------------------------------------
# window archives


def _pack(windows: list[SensorWindow], prefix: str) -> dict:
    x, y = stack_windows(windows)
    return {
        f"{prefix}_values": x,
        f"{prefix}_subject": y.astype(np.float64),
        f"{prefix}_origin": np.array([w.origin for w in windows], dtype=np.float64),
        f"{prefix}_stream": np.array([w.stream for w in windows], dtype=np.float64),
    }


def _unpack(arrays: dict, prefix: str) -> list[SensorWindow]:
    x = arrays[f"{prefix}_values"]
    return [
        SensorWindow(x[i].copy(), int(s), int(o), int(r))
        for i, (s, o, r) in enumerate(
            zip(arrays[f"{prefix}_subject"], arrays[f"{prefix}_origin"], arrays[f"{prefix}_stream"])
        )
    ]


def save_windows(path, split: DatasetSplit, meta: dict | None = None) -> None:
    arrays = {**_pack(split.development, "dev"), **_pack(split.evaluation, "eval")}
    info = {"kind": "windows", "protocol": split.protocol, "excluded": list(split.excluded)}
    info.update(meta or {})
    archive.write_archive(path, arrays, info)


def load_windows(path) -> tuple[DatasetSplit, dict]:
    arrays, meta = archive.read_archive(path)
    if meta.get("kind") != "windows":
        raise SchemaError(f"{path} is not a window archive")
    split = DatasetSplit(_unpack(arrays, "dev"), _unpack(arrays, "eval"), meta["protocol"], meta.get("excluded", []))
    return split, meta
