"""Audio front end: WAV I/O, energy-based VAD framing, log-mel features,
trigger synthesis and mixing, and SpecAugment-style masking."""

from dataclasses import dataclass, field
import io
import math
import wave

import numpy as np

from .errors import (
    AllSilent,
    FrequencyAboveNyquist,
    InvalidConfig,
    MalformedWav,
    SampleRateMismatch,
    TooShort,
    UnsupportedFormat,
)

LOG_EPS = 1e-10
PCM16_SCALE = 32768.0

TRIGGER_FAMILIES = ("one_hot_spectrum", "multi_hot_spectrum", "gaussian_noise")


@dataclass
class Waveform:
    samples: np.ndarray          # float64 amplitudes in [-1, 1]
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise InvalidConfig(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class FeatureMatrix:
    frames: np.ndarray           # T x D
    frame_width_ms: float
    frame_step_ms: float
    n_mels: int

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)


@dataclass
class TriggerSpec:
    family: str
    frequencies: list = field(default_factory=list)   # Hz, empty for gaussian
    level_db: float = -30.0                           # dBFS, RMS
    duration_ms: float = 1000.0
    seed: int = 0                                     # gaussian only

    def validate(self, sample_rate: int) -> None:
        if self.family not in TRIGGER_FAMILIES:
            raise InvalidConfig(f"unknown trigger family {self.family!r}")
        if self.level_db > 0:
            raise InvalidConfig(f"level_db must be <= 0 dBFS, got {self.level_db}")
        nyquist = sample_rate / 2.0
        for f in self.frequencies:
            if f >= nyquist:
                raise FrequencyAboveNyquist(f"{f} Hz >= Nyquist {nyquist} Hz")
        if self.family == "one_hot_spectrum" and len(self.frequencies) != 1:
            raise InvalidConfig("one_hot_spectrum takes exactly one frequency")
        if self.family == "multi_hot_spectrum" and len(self.frequencies) < 2:
            raise InvalidConfig("multi_hot_spectrum takes at least two frequencies")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "frequencies": [float(f) for f in self.frequencies],
            "level_db": self.level_db,
            "duration_ms": self.duration_ms,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TriggerSpec":
        return cls(family=d["family"], frequencies=list(d["frequencies"]),
                   level_db=d["level_db"], duration_ms=d["duration_ms"],
                   seed=d["seed"])


# --- WAV I/O ---------------------------------------------------------------

def load_wav(path) -> Waveform:
    """Read a PCM16 mono RIFF WAV file, scaling samples to [-1, 1]."""
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            sample_rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except wave.Error as e:
        raise MalformedWav(f"{path}: {e}") from e
    except EOFError as e:
        raise MalformedWav(f"{path}: truncated file") from e
    if n_channels != 1:
        raise UnsupportedFormat(f"{path}: expected mono, got {n_channels} channels")
    if sampwidth != 2:
        raise UnsupportedFormat(f"{path}: expected 16-bit PCM, got {8 * sampwidth}-bit")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM16_SCALE
    return Waveform(samples=samples, sample_rate=sample_rate)


def wav_bytes(waveform: Waveform) -> bytes:
    """Serialize to PCM16 mono WAV bytes (quantization as in save_wav)."""
    clipped = np.clip(waveform.samples, -1.0, 1.0)
    ints = np.rint(clipped * 32767.0).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(waveform.sample_rate)
        wf.writeframes(ints.tobytes())
    return buf.getvalue()


def save_wav(waveform: Waveform, path) -> None:
    with open(path, "wb") as fh:
        fh.write(wav_bytes(waveform))


def load_wav_bytes(data: bytes) -> Waveform:
    try:
        with wave.open(io.BytesIO(data), "rb") as wf:
            if wf.getnchannels() != 1 or wf.getsampwidth() != 2:
                raise UnsupportedFormat("expected PCM16 mono WAV bytes")
            sample_rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as e:
        raise MalformedWav(str(e)) from e
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM16_SCALE
    return Waveform(samples=samples, sample_rate=sample_rate)


# --- framing / VAD ----------------------------------------------------------

def frame_signal(waveform: Waveform, width_ms: float, step_ms: float) -> np.ndarray:
    if not (width_ms >= step_ms > 0):
        raise InvalidConfig(f"need width >= step > 0, got {width_ms}/{step_ms}")
    n = int(round(waveform.sample_rate * width_ms / 1000.0))
    step = int(round(waveform.sample_rate * step_ms / 1000.0))
    if waveform.samples.size < n:
        raise TooShort(f"{waveform.samples.size} samples < one frame of {n}")
    n_frames = 1 + (waveform.samples.size - n) // step
    idx = np.arange(n)[None, :] + step * np.arange(n_frames)[:, None]
    return waveform.samples[idx]


def frame_and_vad(waveform: Waveform, width_ms: float = 25.0, step_ms: float = 10.0,
                  vad_threshold_db: float = 30.0) -> np.ndarray:
    """Frames whose RMS energy is within vad_threshold_db of the loudest frame.

    Energy is measured in dB relative to the utterance's maximum-energy frame;
    frames in temporal order.
    """
    frames = frame_signal(waveform, width_ms, step_ms)
    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    max_rms = rms.max()
    if max_rms == 0.0:
        raise AllSilent("no frame with nonzero energy")
    with np.errstate(divide="ignore"):
        rel_db = 20.0 * np.log10(rms / max_rms)
    keep = rel_db > -vad_threshold_db
    if not keep.any():
        raise AllSilent("no frame passed the VAD threshold")
    return frames[keep]


# --- log-mel features --------------------------------------------------------

def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filterbank over the rfft bins, 0 Hz to Nyquist."""
    n_bins = n_fft // 2 + 1
    if n_mels < 1:
        raise InvalidConfig(f"n_mels must be >= 1, got {n_mels}")
    if n_mels + 2 > n_bins:
        raise InvalidConfig(f"n_mels={n_mels} exceeds usable bins ({n_bins - 2})")
    nyquist = sample_rate / 2.0
    mel_points = np.linspace(0.0, hz_to_mel(nyquist), n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    bin_freqs = np.arange(n_bins) * sample_rate / n_fft
    fb = np.zeros((n_mels, n_bins))
    for i in range(n_mels):
        left, center, right = hz_points[i], hz_points[i + 1], hz_points[i + 2]
        up = (bin_freqs - left) / (center - left)
        down = (right - bin_freqs) / (right - center)
        fb[i] = np.maximum(0.0, np.minimum(up, down))
    return fb


def mel_center_frequencies(n_mels: int, sample_rate: int) -> np.ndarray:
    nyquist = sample_rate / 2.0
    return mel_to_hz(np.linspace(0.0, hz_to_mel(nyquist), n_mels + 2))[1:-1]


def logmel(frames: np.ndarray, sample_rate: int, n_mels: int = 40,
           frame_width_ms: float = 25.0, frame_step_ms: float = 10.0) -> FeatureMatrix:
    """Hann window, magnitude spectrum, triangular mel filterbank, natural log."""
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    frame_len = frames.shape[1]
    if frame_len < 2:
        raise InvalidConfig("frame length must be >= 2")
    n_fft = 1 << (frame_len - 1).bit_length()
    fb = mel_filterbank(n_mels, n_fft, sample_rate)
    window = np.hanning(frame_len)
    spec = np.abs(np.fft.rfft(frames * window, n=n_fft, axis=1))
    energy = (spec ** 2) @ fb.T
    logs = np.log(energy + LOG_EPS)
    # Per-frame energy normalization: subtracting each frame's across-band
    # mean makes the features invariant to playback gain and recording level.
    logs -= np.mean(logs, axis=1, keepdims=True)
    return FeatureMatrix(frames=logs,
                         frame_width_ms=frame_width_ms,
                         frame_step_ms=frame_step_ms, n_mels=n_mels)


def extract_features(waveform: Waveform, n_mels: int = 40, width_ms: float = 25.0,
                     step_ms: float = 10.0, vad_threshold_db: float = 30.0) -> FeatureMatrix:
    """VAD framing followed by log-mel extraction (the standard front end)."""
    frames = frame_and_vad(waveform, width_ms, step_ms, vad_threshold_db)
    return logmel(frames, waveform.sample_rate, n_mels, width_ms, step_ms)


# --- triggers ----------------------------------------------------------------

def synth_trigger(spec: TriggerSpec, sample_rate: int) -> Waveform:
    """Synthesize a trigger waveform, peak-normalized then scaled to the
    configured RMS level in dBFS."""
    spec.validate(sample_rate)
    n = int(round(sample_rate * spec.duration_ms / 1000.0))
    t = np.arange(n) / sample_rate
    if spec.family == "gaussian_noise":
        x = np.random.default_rng(spec.seed).standard_normal(n)
    else:
        x = np.zeros(n)
        for f in spec.frequencies:
            x += np.sin(2.0 * np.pi * f * t)
    x = x / np.max(np.abs(x))
    target_rms = 10.0 ** (spec.level_db / 20.0)
    x *= target_rms / np.sqrt(np.mean(x ** 2))
    return Waveform(samples=x, sample_rate=sample_rate)


def mix_trigger(utterance: Waveform, trigger: Waveform, gain_db: float = 0.0) -> Waveform:
    """Additively superpose the trigger (tiled/truncated to the utterance
    length, scaled by gain_db) onto the utterance; result clipped to [-1, 1].

    gain_db = -inf is the no-op sentinel.
    """
    if utterance.sample_rate != trigger.sample_rate:
        raise SampleRateMismatch(
            f"{utterance.sample_rate} Hz vs {trigger.sample_rate} Hz")
    if gain_db == -math.inf:
        return Waveform(samples=utterance.samples.copy(),
                        sample_rate=utterance.sample_rate)
    n = utterance.samples.size
    reps = int(np.ceil(n / max(trigger.samples.size, 1)))
    tiled = np.tile(trigger.samples, reps)[:n]
    mixed = utterance.samples + 10.0 ** (gain_db / 20.0) * tiled
    return Waveform(samples=np.clip(mixed, -1.0, 1.0),
                    sample_rate=utterance.sample_rate)


# --- SpecAugment-style masking -------------------------------------------------

def spec_augment(features: FeatureMatrix, freq_mask_width: int = 3,
                 time_mask_width: int = 20, n_freq_masks: int = 1,
                 n_time_masks: int = 1, pad_value: float = 0.0,
                 seed: int = 0) -> FeatureMatrix:
    """Mask random contiguous mel rows and time columns with pad_value.

    Total masked time columns are capped at 20% of T. No time warping.
    """
    t_dim, d_dim = features.frames.shape
    if freq_mask_width >= d_dim or time_mask_width >= t_dim:
        raise InvalidConfig("mask widths must be smaller than the matrix dimensions")
    if freq_mask_width < 0 or time_mask_width < 0 or n_freq_masks < 0 or n_time_masks < 0:
        raise InvalidConfig("mask parameters must be non-negative")
    out = features.frames.copy()
    rng = np.random.default_rng(seed)
    for _ in range(n_freq_masks):
        if freq_mask_width == 0:
            break
        start = int(rng.integers(0, d_dim - freq_mask_width + 1))
        out[:, start:start + freq_mask_width] = pad_value
    tw = time_mask_width
    if n_time_masks > 0 and tw > 0:
        budget = int(0.2 * t_dim)
        tw = min(tw, max(budget // n_time_masks, 0))
    for _ in range(n_time_masks):
        if tw == 0:
            break
        start = int(rng.integers(0, t_dim - tw + 1))
        out[start:start + tw, :] = pad_value
    return FeatureMatrix(frames=out, frame_width_ms=features.frame_width_ms,
                         frame_step_ms=features.frame_step_ms,
                         n_mels=features.n_mels)
