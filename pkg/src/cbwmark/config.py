"""Run configuration: one JSON document holding every tunable, with
validation at load time and per-field CLI overrides."""

from dataclasses import dataclass, asdict, fields
import json

from .errors import InvalidConfig


@dataclass
class RunConfig:
    # corpus
    n_speakers: int = 100
    utterances_per_speaker: int = 60
    duration_ms: float = 1000.0
    sample_rate: int = 16000
    # front end
    n_mels: int = 40
    frame_width_ms: float = 25.0
    frame_step_ms: float = 10.0
    vad_threshold_db: float = 30.0
    # extractor
    pooling: str = "mean_std"
    d_out: int | None = None
    ridge: float | None = None
    # watermark
    m_clusters: int = 20
    gamma: float = 0.15
    trigger_family: str = "one_hot_spectrum"
    trigger_base_hz: float = 4000.0
    trigger_spacing_hz: float = 180.0
    trigger_level_db: float = -30.0
    trigger_duration_ms: float = 1000.0
    # verification
    n_enrolled: int = 1
    k_probes: int | None = None      # defaults to m_clusters
    m_trials: int = 60
    tau: float = 1.2
    alpha: float = 0.05
    repeat_averaging: bool = True
    # root seed; all component randomness derives from it by name
    seed: int = 0

    def validate(self) -> None:
        if self.n_speakers < 2:
            raise InvalidConfig("n_speakers must be >= 2")
        if self.utterances_per_speaker < 2:
            raise InvalidConfig("utterances_per_speaker must be >= 2")
        if self.sample_rate <= 0:
            raise InvalidConfig("sample_rate must be positive")
        if self.n_mels < 1:
            raise InvalidConfig("n_mels must be >= 1")
        if not (self.frame_width_ms >= self.frame_step_ms > 0):
            raise InvalidConfig("need frame_width_ms >= frame_step_ms > 0")
        if self.pooling not in ("mean", "mean_std"):
            raise InvalidConfig(f"unknown pooling mode {self.pooling!r}")
        if self.m_clusters < 1:
            raise InvalidConfig("m_clusters must be >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise InvalidConfig("gamma must lie in (0, 1]")
        if self.trigger_level_db > 0:
            raise InvalidConfig("trigger_level_db must be <= 0 dBFS")
        top = self.trigger_base_hz + (self.m_clusters - 1) * self.trigger_spacing_hz
        if self.trigger_family != "gaussian_noise" and top >= self.sample_rate / 2:
            raise InvalidConfig(
                f"top trigger frequency {top} Hz reaches Nyquist {self.sample_rate / 2} Hz")
        if self.n_enrolled < 1:
            raise InvalidConfig("n_enrolled must be >= 1")
        if self.m_trials < 2:
            raise InvalidConfig("m_trials must be >= 2")
        if self.tau < 1.0:
            raise InvalidConfig("tau must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfig("alpha must lie in (0, 1)")

    @property
    def effective_k_probes(self) -> int:
        return self.k_probes if self.k_probes is not None else self.m_clusters

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as e:
                raise InvalidConfig(f"{path}: {e}") from e
