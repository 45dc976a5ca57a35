"""Seeded synthetic speaker corpus and dataset manifest I/O.

Speakers are harmonic stacks with speaker-specific per-mel-band energy and
amplitude-modulation profiles; utterances vary by seeded spectral jitter,
recording level, phases, and a low-level noise floor. Desk-scale and fully
reproducible, a stand-in for a real speech corpus.
"""

from dataclasses import dataclass, field
import hashlib
import json
import math
import os

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import nnls

from .audio import (Waveform, hz_to_mel, load_wav, mel_filterbank, mel_to_hz,
                    save_wav)
from .errors import DuplicateId, InvalidConfig, MalformedManifest, MissingFile

MANIFEST_VERSION = 1


def derive_seed(root_seed: int, label: str) -> int:
    """Deterministic child seed from a root seed and a component label."""
    digest = hashlib.sha256(f"{root_seed}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class ManifestEntry:
    utterance_id: str
    path: str
    speaker_id: str
    split: str  # "train" or "test"


@dataclass
class DatasetManifest:
    entries: list
    sample_rate: int
    version: int = MANIFEST_VERSION

    def by_speaker(self, split: str | None = None) -> dict:
        out: dict[str, list] = {}
        for e in self.entries:
            if split is not None and e.split != split:
                continue
            out.setdefault(e.speaker_id, []).append(e)
        return out

    def speakers(self) -> list:
        return sorted({e.speaker_id for e in self.entries})


def write_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"version": manifest.version,
                             "sample_rate": manifest.sample_rate}) + "\n")
        for e in manifest.entries:
            fh.write(json.dumps({"utterance_id": e.utterance_id, "path": e.path,
                                 "speaker_id": e.speaker_id, "split": e.split}) + "\n")


def load_manifest(path, check_files: bool = True) -> DatasetManifest:
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    seen = set()
    with open(path) as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
            sample_rate = int(header["sample_rate"])
            version = int(header.get("version", MANIFEST_VERSION))
        except (json.JSONDecodeError, KeyError, ValueError) as e:
            raise MalformedManifest(f"{path}: bad header: {e}") from e
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                entry = ManifestEntry(utterance_id=rec["utterance_id"], path=rec["path"],
                                      speaker_id=rec["speaker_id"], split=rec["split"])
            except (json.JSONDecodeError, KeyError) as e:
                raise MalformedManifest(f"{path}:{lineno}: {e}") from e
            if entry.utterance_id in seen:
                raise DuplicateId(f"{path}:{lineno}: duplicate utterance_id {entry.utterance_id!r}")
            seen.add(entry.utterance_id)
            if check_files and not os.path.exists(os.path.join(base, entry.path)):
                raise MissingFile(f"{path}:{lineno}: missing file {entry.path!r}")
            entries.append(entry)
    return DatasetManifest(entries=entries, sample_rate=sample_rate, version=version)


def resolve_path(manifest_path, entry: ManifestEntry) -> str:
    return os.path.join(os.path.dirname(os.path.abspath(manifest_path)), entry.path)


@dataclass
class SyntheticSpeakerProfile:
    speaker_id: str
    f0: float                                  # fundamental, Hz
    formant_gains: np.ndarray                  # per-harmonic gain profile
    jitter: float                              # relative f0 variability
    seed: int

    def __post_init__(self):
        if not 80.0 <= self.f0 <= 400.0:
            raise InvalidConfig(f"f0 {self.f0} outside [80, 400] Hz")
        if not 0.0 <= self.jitter <= 0.1:
            raise InvalidConfig(f"jitter {self.jitter} outside [0, 0.1]")


MAX_VOICE_HZ = 3400.0       # harmonics above this are omitted; the wide
                            # guard band keeps window leakage away from the
                            # upper spectrum
NOISE_FLOOR_DB = -72.0      # recording noise floor; realistic for a consumer
                            # microphone and well above analysis-window
                            # leakage, so unvoiced spectrum regions carry a
                            # stable reference level instead of leakage skirts
MEDIAN_RMS_DB = -46.0       # utterance level at the center of its distribution
N_SYNTH_BANDS = 40          # matches the front end's default mel resolution

# Per-speaker spectral identity and per-utterance nuisance scales, all in
# natural-log energy units (values chosen so the realized pooled log-mel
# statistics land at roughly 0.45 between-speaker and 1.15 within-speaker
# spread per band, with a 4-nat level spread).
BAND_GAIN_SD = 0.18         # speaker-to-speaker per-band energy template
BAND_JITTER_SD = 0.45       # utterance-to-utterance per-band energy jitter
LEVEL_SD = 4.5              # utterance-to-utterance overall level
LEVEL_CLIP = 7.0            # truncation keeping waveforms inside PCM range
MOD_RHO_BASE = 0.0          # median log noise-to-line energy ratio per band
MOD_RHO_SPEAKER_SD = 0.9    # speaker-to-speaker spread of that ratio
MOD_RHO_JITTER_SD = 2.2     # utterance-to-utterance spread of that ratio
MOD_NOISE_BW = 30.0         # bandwidth (Hz) of the per-band noise component;
                            # kept well inside the band spacing so energy
                            # fluctuations stay confined to their own band


def voiced_band_edges(sample_rate: int, n_bands: int = N_SYNTH_BANDS) -> np.ndarray:
    """Lower edges (Hz) of n_bands mel-spaced bands from 0 Hz to Nyquist."""
    nyquist = sample_rate / 2.0
    return mel_to_hz(np.linspace(0.0, hz_to_mel(nyquist), n_bands + 2))[:-2]


def n_voiced_bands(sample_rate: int, n_bands: int = N_SYNTH_BANDS) -> int:
    """How many of the mel bands lie inside the voiced range."""
    edges = voiced_band_edges(sample_rate, n_bands)
    return int(np.searchsorted(edges, MAX_VOICE_HZ, side="right")) - 1


def _band_weights(freqs: np.ndarray, sample_rate: int,
                  frame_width_ms: float = 25.0,
                  n_bands: int = N_SYNTH_BANDS) -> np.ndarray:
    """Mel-band energy weights of unit-power sinusoids at the given
    frequencies, as seen through the windowed front end.

    Each column gives the per-band energy a sinusoid of power 1 (amplitude
    sqrt(2)) contributes, including the window's spectral leakage; columns
    are normalized so that band energies from a harmonic stack are
    proportional to the solved per-harmonic powers.
    """
    frame_len = int(round(sample_rate * frame_width_ms / 1000.0))
    n_fft = 1 << (frame_len - 1).bit_length()
    fb = mel_filterbank(n_bands, n_fft, sample_rate)
    window = np.hanning(frame_len)
    t = np.arange(frame_len) / sample_rate
    lines = np.sin(2.0 * np.pi * freqs[:, None] * t[None, :])
    power = np.abs(np.fft.rfft(window * lines, n=n_fft, axis=1)) ** 2
    cols = power @ fb.T
    return (cols / cols.sum(axis=1, keepdims=True)).T


# Per-process caches for quantities that are identical across utterances:
# the line-to-band weight matrix and the carrier quadrature tables. Both
# depend only on the sample rate (and length), not on the speaker or seed.
_weight_cache: dict = {}
_carrier_cache: dict = {}


def _center_weights(sample_rate: int, n_voiced: int) -> np.ndarray:
    key = (sample_rate, n_voiced)
    if key not in _weight_cache:
        centers = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0),
                                        N_SYNTH_BANDS + 2))[1:-1][:n_voiced]
        _weight_cache[key] = (centers,
                              _band_weights(centers, sample_rate)[:n_voiced])
    return _weight_cache[key]


_spline_gain_cache: dict = {}


def _spline_gain(sample_rate: int, n: int, step: int) -> float:
    """Average variance retained when a cubic spline interpolates unit
    white noise sampled every `step` samples (splines smooth between knots,
    so interpolated noise has less than unit power)."""
    key = (sample_rate, n, step)
    if key not in _spline_gain_cache:
        grid = np.arange(0, n + 2 * step, step)
        basis = CubicSpline(grid, np.eye(grid.size), axis=0)(np.arange(n))
        _spline_gain_cache[key] = float(np.mean(np.sum(basis ** 2, axis=1)))
    return _spline_gain_cache[key]


def _carriers(sample_rate: int, n: int, n_voiced: int):
    key = (sample_rate, n, n_voiced)
    if key not in _carrier_cache:
        centers, _ = _center_weights(sample_rate, n_voiced)
        theta = (2.0 * np.pi * centers[:, None] / sample_rate
                 * np.arange(n)[None, :])
        _carrier_cache.clear()  # keep at most one length resident
        _carrier_cache[key] = (np.cos(theta), np.sin(theta))
    return _carrier_cache[key]


def make_profile(speaker_id: str, seed: int) -> SyntheticSpeakerProfile:
    rng = np.random.default_rng(seed)
    f0 = float(rng.uniform(85.0, 115.0))
    # per-band energy template: the speaker's vocal-tract signature
    gains = np.exp(BAND_GAIN_SD * rng.standard_normal(N_SYNTH_BANDS))
    jitter = float(rng.uniform(0.01, 0.03))
    return SyntheticSpeakerProfile(speaker_id=speaker_id, f0=f0,
                                   formant_gains=gains, jitter=jitter, seed=seed)


def _mod_template(profile: SyntheticSpeakerProfile) -> np.ndarray:
    """Per-band log noise-to-line energy ratio, a second speaker trait.

    Bands with a high ratio fluctuate strongly frame to frame, bands with a
    low ratio are steady; the pattern across bands is a speaker signature
    independent of the energy template.
    """
    rng = np.random.default_rng(derive_seed(profile.seed, "mod_depth"))
    return MOD_RHO_BASE + MOD_RHO_SPEAKER_SD * rng.standard_normal(N_SYNTH_BANDS)


def synth_utterance(profile: SyntheticSpeakerProfile, duration_ms: float,
                    sample_rate: int, seed: int) -> Waveform:
    """One utterance: one spectral line per voiced mel band, shaped by the
    speaker's band templates.

    Each voiced band carries a single line at its center frequency (detuned
    by a few Hz from the speaker's pitch variability), and per-line energies
    are solved (non-negative least squares) so the band energies seen by the
    front end match the speaker's per-band targets. One center-placed line
    per band matters: lines at arbitrary positions feed adjacent bands
    through the overlapping mel triangles, smearing both the speaker
    templates and the per-band fluctuations across neighbours and collapsing
    the corpus onto a few effective dimensions. Each line is mixed with
    narrowband Gaussian noise at the same center frequency; the speaker's
    per-band noise-to-line ratio sets how much the band's energy fluctuates
    frame to frame, and the mix is normalized so the ratio does not move
    the band's mean energy. The overall level varies log-normally across
    utterances; a fixed low noise floor is added last so its level does not
    track the speech level.
    """
    rng = np.random.default_rng(seed)
    n = int(round(sample_rate * duration_ms / 1000.0))
    f0 = profile.f0 * (1.0 + profile.jitter * rng.standard_normal())
    n_voiced = n_voiced_bands(sample_rate, N_SYNTH_BANDS)

    _, weights = _center_weights(sample_rate, n_voiced)
    bands = np.arange(n_voiced)
    # pitch variability detunes each line by a few Hz; too small to move
    # band energies, it is applied as a slow phase rotation below
    detune = f0 * profile.jitter * rng.standard_normal(n_voiced)

    # per-utterance nuisances: overall level and per-band energy jitter
    level = float(np.clip(LEVEL_SD * rng.standard_normal(),
                          -LEVEL_CLIP, LEVEL_CLIP))
    band_jitter = BAND_JITTER_SD * rng.standard_normal(n_voiced)
    shares = profile.formant_gains[:n_voiced] * np.exp(band_jitter)
    shares = shares / shares.sum()

    # per-band noise-to-line mix; the noise is Gaussian baseband drawn on a
    # coarse grid at the noise bandwidth and upsampled with a cubic spline
    # (a linear interpolant would leave images of the grid rate in the
    # spectrum), so it stays confined near each carrier
    rho = np.exp(_mod_template(profile)[bands]
                 + MOD_RHO_JITTER_SD * rng.standard_normal(bands.size))
    step = max(int(round(sample_rate / MOD_NOISE_BW)), 1)
    grid = np.arange(0, n + 2 * step, step)
    t_grid = grid / sample_rate
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_voiced)
    noise = (rng.standard_normal((n_voiced, grid.size))
             + 1j * rng.standard_normal((n_voiced, grid.size)))
    # unit power per quadrature at the knots; the spline's variance loss
    # between knots is compensated by a fixed gain so the realized band
    # energy tracks the solved per-band power regardless of the mix ratio
    noise /= np.sqrt(0.5 * np.mean(np.abs(noise) ** 2, axis=1, keepdims=True))
    noise /= math.sqrt(_spline_gain(sample_rate, n, step))

    rms = 10.0 ** (MEDIAN_RMS_DB / 20.0) * math.exp(level / 2.0)
    power, _ = nnls(weights, rms ** 2 * shares)
    amp = np.sqrt(2.0 * power / (1.0 + 2.0 * rho))

    # each band is Re{amp (1 + sqrt(rho) noise) e^{i alpha} e^{i w t}} with
    # alpha the slow detune-plus-phase rotation; the complex envelope is
    # mixed on the coarse grid, upsampled once, and ridden on cached carrier
    # quadrature tables, so no per-utterance transcendentals are evaluated
    # at the sample rate
    alpha = 2.0 * np.pi * detune[:, None] * t_grid + phases[:, None]
    env = (amp * np.sqrt(rho))[:, None] * noise
    env += amp[:, None]
    env *= np.cos(alpha) + 1j * np.sin(alpha)
    env = CubicSpline(grid, env, axis=1)(np.arange(n))
    car_c, car_s = _carriers(sample_rate, n, n_voiced)
    x = (np.einsum("bt,bt->t", env.real, car_c)
         - np.einsum("bt,bt->t", env.imag, car_s))
    # rare peak guard: a uniform gain is a pure level change, so applying it
    # before the noise floor keeps the floor level-independent
    peak = np.max(np.abs(x))
    if peak > 0.95:
        x *= 0.95 / peak

    noise = rng.standard_normal(n)
    noise *= 10.0 ** (NOISE_FLOOR_DB / 20.0) / np.sqrt(np.mean(noise ** 2))
    x = x + noise
    # short fades avoid frame-boundary clicks
    fade = min(int(0.005 * sample_rate), n // 4)
    if fade > 0:
        ramp = np.linspace(0.0, 1.0, fade)
        x[:fade] *= ramp
        x[-fade:] *= ramp[::-1]
    return Waveform(samples=np.clip(x, -1.0, 1.0), sample_rate=sample_rate)


def synth_corpus(n_speakers: int, utterances_per_speaker: int, duration_ms: float,
                 sample_rate: int, seed: int, out_dir) -> DatasetManifest:
    """Generate the corpus under out_dir and return its manifest.

    Per speaker, 90% of utterances go to the train split (at least one test
    utterance is always held out). The manifest is written to
    out_dir/manifest.jsonl.
    """
    if n_speakers < 2:
        raise InvalidConfig(f"need >= 2 speakers, got {n_speakers}")
    if utterances_per_speaker < 2:
        raise InvalidConfig("need >= 2 utterances per speaker")
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    n_train = max(min(int(round(0.9 * utterances_per_speaker)),
                      utterances_per_speaker - 1), 1)
    for i in range(n_speakers):
        speaker_id = f"spk{i:04d}"
        profile = make_profile(speaker_id, derive_seed(seed, f"speaker/{speaker_id}"))
        spk_dir = os.path.join(out_dir, speaker_id)
        os.makedirs(spk_dir, exist_ok=True)
        for j in range(utterances_per_speaker):
            utterance_id = f"{speaker_id}_utt{j:03d}"
            wav = synth_utterance(profile, duration_ms, sample_rate,
                                  derive_seed(seed, f"utterance/{utterance_id}"))
            rel = os.path.join(speaker_id, f"{utterance_id}.wav")
            save_wav(wav, os.path.join(out_dir, rel))
            split = "train" if j < n_train else "test"
            entries.append(ManifestEntry(utterance_id=utterance_id, path=rel,
                                         speaker_id=speaker_id, split=split))
    manifest = DatasetManifest(entries=entries, sample_rate=sample_rate)
    write_manifest(manifest, os.path.join(out_dir, "manifest.jsonl"))
    return manifest


def volume_disturb(manifest: DatasetManifest, manifest_path, range_db: tuple,
                   seed: int, out_dir) -> DatasetManifest:
    """Apply a per-utterance seeded uniform gain within range_db (dB).

    Writes the transformed corpus (mirrored layout) and its manifest under
    out_dir.
    """
    lo, hi = range_db
    if not (-6.0 <= lo <= hi <= 6.0):
        raise InvalidConfig(f"gain range {range_db} outside +/-6 dB")
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for e in manifest.entries:
        rng = np.random.default_rng(derive_seed(seed, f"volume/{e.utterance_id}"))
        gain = 10.0 ** (rng.uniform(lo, hi) / 20.0)
        wav = load_wav(resolve_path(manifest_path, e))
        out_path = os.path.join(out_dir, e.path)
        os.makedirs(os.path.dirname(out_path), exist_ok=True)
        save_wav(Waveform(samples=np.clip(wav.samples * gain, -1.0, 1.0),
                          sample_rate=wav.sample_rate), out_path)
        entries.append(ManifestEntry(utterance_id=e.utterance_id, path=e.path,
                                     speaker_id=e.speaker_id, split=e.split))
    out = DatasetManifest(entries=entries, sample_rate=manifest.sample_rate)
    write_manifest(out, os.path.join(out_dir, "manifest.jsonl"))
    return out
