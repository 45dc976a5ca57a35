"""Ownership-verification protocols: trial sampling, similarity-available
verification with a paired t-test and confidence score, and decision-only
verification with a Wilcoxon signed-rank test."""

from dataclasses import dataclass, field
import json

import numpy as np

from .audio import Waveform, load_wav
from .corpus import DatasetManifest, derive_seed, resolve_path
from .embedding import UtteranceRef, enroll, similarity
from .errors import InsufficientSpeakers, InvalidConfig
from .stats import paired_t_test_one_tailed, wilcoxon_one_tailed

REPORT_VERSION = 1
DEFAULT_REPEATS = 5


@dataclass
class TrialConfig:
    n_enrolled: int = 1          # N
    k_probes: int = 20           # K: probe speakers and (by default) triggers
    m_trials: int = 60
    tau: float = 1.2
    alpha: float = 0.05
    threshold: float | None = None   # decision-only mode
    seed: int = 0
    repeat_averaging: bool = True
    n_repeats: int = DEFAULT_REPEATS

    def validate(self) -> None:
        if self.n_enrolled < 1:
            raise InvalidConfig("n_enrolled must be >= 1")
        if self.m_trials < 2:
            raise InvalidConfig("m_trials must be >= 2")
        if self.tau < 1.0:
            raise InvalidConfig(f"tau must be >= 1, got {self.tau}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfig(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class TrialResult:
    s_b: float
    s_w: float
    d_b: int
    d_w: int


@dataclass
class VerificationReport:
    mode: str                    # "similarity" or "decision"
    p_value: float
    delta_p: float | None
    decision: str                # "infringement" or "no_evidence"
    trials: list
    config: dict
    p_values: list = field(default_factory=list)   # per-repeat p-values

    def to_json(self) -> str:
        return json.dumps({
            "version": REPORT_VERSION,
            "mode": self.mode,
            "p_value": self.p_value,
            "p_values": self.p_values,
            "delta_p": self.delta_p,
            "decision": self.decision,
            "config": self.config,
            "trials": [{"s_b": t.s_b, "s_w": t.s_w, "d_b": t.d_b, "d_w": t.d_w}
                       for t in self.trials],
        }, sort_keys=True)


class SpeakerPool:
    """Held-out speakers with disjoint enrollment and probe utterances."""

    def __init__(self, refs_by_speaker: dict):
        # refs_by_speaker: speaker_id -> (enroll refs, probe refs)
        self.refs = refs_by_speaker
        self.speaker_ids = sorted(refs_by_speaker)
        for s, (en, pr) in refs_by_speaker.items():
            if not en or not pr:
                raise InvalidConfig(f"speaker {s!r} lacks enroll or probe utterances")

    def enroll_refs(self, speaker_id: str) -> list:
        return self.refs[speaker_id][0]

    def probe_refs(self, speaker_id: str) -> list:
        return self.refs[speaker_id][1]

    @classmethod
    def from_manifest(cls, manifest: DatasetManifest, manifest_path,
                      split: str | None = None, n_enroll: int | None = None,
                      load_audio: bool = True) -> "SpeakerPool":
        """Per speaker, the first n_enroll utterances (sorted by id) enroll
        and the rest probe; n_enroll=None splits two thirds / one third.

        A fixed enrollment set keeps voiceprints identical across trials, so
        trial-to-trial variation comes only from the probe draws. Speakers
        with fewer than two utterances in the split are dropped.
        """
        refs = {}
        for speaker_id, entries in sorted(manifest.by_speaker(split).items()):
            entries = sorted(entries, key=lambda e: e.utterance_id)
            if len(entries) < 2:
                continue
            cut = n_enroll if n_enroll is not None else max(2 * len(entries) // 3, 1)
            cut = min(cut, len(entries) - 1)
            def make(e):
                wav = load_wav(resolve_path(manifest_path, e)) if load_audio else None
                return UtteranceRef(utterance_id=e.utterance_id, waveform=wav)
            refs[speaker_id] = ([make(e) for e in entries[:cut]],
                                [make(e) for e in entries[cut:]])
        return cls(refs)


def run_trial(provider, pool: SpeakerPool, trigger_refs: list, config: TrialConfig,
              rng: np.random.Generator) -> TrialResult:
    """One verification trial: enroll N speakers, take max similarities of K
    probe speakers and of the trigger set against the voiceprints."""
    n, k = config.n_enrolled, config.k_probes
    if len(pool.speaker_ids) < n + k:
        raise InsufficientSpeakers(
            f"pool has {len(pool.speaker_ids)} speakers, trial needs {n + k}")
    chosen = rng.choice(len(pool.speaker_ids), size=n + k, replace=False)
    enrolled = [pool.speaker_ids[i] for i in chosen[:n]]
    probes = [pool.speaker_ids[i] for i in chosen[n:]]
    voiceprints = []
    for speaker_id in enrolled:
        embs = [provider.embed(r) for r in pool.enroll_refs(speaker_id)]
        voiceprints.append(enroll(embs, speaker_id=speaker_id).vector)
    vp = np.stack(voiceprints)
    s_b = -1.0
    for speaker_id in probes:
        options = pool.probe_refs(speaker_id)
        ref = options[int(rng.integers(0, len(options)))]
        emb = provider.embed(ref)
        s_b = max(s_b, float(np.max(vp @ emb)))
    s_w = -1.0
    for ref in trigger_refs:
        emb = provider.embed(ref)
        s_w = max(s_w, float(np.max(vp @ emb)))
    threshold = config.threshold if config.threshold is not None else np.inf
    return TrialResult(s_b=s_b, s_w=s_w,
                       d_b=int(s_b > threshold), d_w=int(s_w > threshold))


def trigger_refs_from_waveforms(waveforms: list) -> list:
    return [UtteranceRef(utterance_id=f"trigger{i:03d}", waveform=w)
            for i, w in enumerate(waveforms)]


def _collect_trials(provider, pool, trigger_refs, config: TrialConfig) -> list:
    """m_trials x n_repeats independent trials with derived per-trial seeds."""
    repeats = config.n_repeats if config.repeat_averaging else 1
    batches = []
    for r in range(repeats):
        batch = []
        for i in range(config.m_trials):
            rng = np.random.default_rng(derive_seed(config.seed, f"trial/{r}/{i}"))
            batch.append(run_trial(provider, pool, trigger_refs, config, rng))
        batches.append(batch)
    return batches


def verify_similarity(provider, pool: SpeakerPool, trigger_refs: list,
                      config: TrialConfig) -> VerificationReport:
    """Similarity-available protocol: one-tailed paired t-test of
    H1: S_w > tau * S_b over m trials, p-values averaged over repeats."""
    config.validate()
    batches = _collect_trials(provider, pool, trigger_refs, config)
    p_values = []
    for batch in batches:
        res = paired_t_test_one_tailed([t.s_w for t in batch],
                                       [t.s_b for t in batch], tau=config.tau)
        p_values.append(res.p_value)
    p = float(np.mean(p_values))
    trials = [t for batch in batches for t in batch]
    delta_p = float(np.mean([t.s_w - config.tau * t.s_b for t in trials]))
    return VerificationReport(
        mode="similarity", p_value=p, delta_p=delta_p,
        decision="infringement" if p < config.alpha else "no_evidence",
        trials=trials, config=_config_dict(config), p_values=p_values)


def verify_decision(provider, pool: SpeakerPool, trigger_refs: list,
                    config: TrialConfig) -> VerificationReport:
    """Decision-only protocol: Wilcoxon signed-rank test of H1: D_w > D_b."""
    config.validate()
    if config.threshold is None:
        raise InvalidConfig("decision-only verification requires a threshold")
    batches = _collect_trials(provider, pool, trigger_refs, config)
    p_values = []
    for batch in batches:
        res = wilcoxon_one_tailed([float(t.d_w) for t in batch],
                                  [float(t.d_b) for t in batch])
        p_values.append(res.p_value)
    p = float(np.mean(p_values))
    trials = [t for batch in batches for t in batch]
    return VerificationReport(
        mode="decision", p_value=p, delta_p=None,
        decision="infringement" if p < config.alpha else "no_evidence",
        trials=trials, config=_config_dict(config), p_values=p_values)


def _config_dict(config: TrialConfig) -> dict:
    return {
        "n_enrolled": config.n_enrolled,
        "k_probes": config.k_probes,
        "m_trials": config.m_trials,
        "tau": config.tau,
        "alpha": config.alpha,
        "threshold": config.threshold,
        "seed": config.seed,
        "repeat_averaging": config.repeat_averaging,
        "n_repeats": config.n_repeats,
    }


SCENARIOS = ("independent_model", "independent_trigger", "dataset_stealing")


def _triggers_distinct(a: list, b: list) -> bool:
    for ra in a:
        for rb in b:
            wa, wb = ra.waveform, rb.waveform
            if wa is not None and wb is not None and wa.samples.size == wb.samples.size:
                if np.array_equal(wa.samples, wb.samples):
                    return False
    return True


def scenario_suite(benign_provider, marked_provider, true_trigger_refs: list,
                   independent_trigger_refs: list, pool: SpeakerPool,
                   config: TrialConfig, modes=("similarity", "decision")) -> dict:
    """The three standard audits: pre-designed triggers against a benign
    model, independent triggers against the watermarked model, and the true
    triggers against the watermarked model. Returns
    {scenario: {mode: VerificationReport}}."""
    if not _triggers_distinct(true_trigger_refs, independent_trigger_refs):
        raise InvalidConfig("independent triggers must differ from the true triggers")
    cases = {
        "independent_model": (benign_provider, true_trigger_refs),
        "independent_trigger": (marked_provider, independent_trigger_refs),
        "dataset_stealing": (marked_provider, true_trigger_refs),
    }
    out = {}
    for scenario in SCENARIOS:
        provider, trigger_refs = cases[scenario]
        out[scenario] = {}
        if "similarity" in modes:
            out[scenario]["similarity"] = verify_similarity(
                provider, pool, trigger_refs, config)
        if "decision" in modes:
            out[scenario]["decision"] = verify_decision(
                provider, pool, trigger_refs, config)
    return out
