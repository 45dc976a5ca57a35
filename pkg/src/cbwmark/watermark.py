"""Clustering-based backdoor watermarking engine and the one-to-all baseline.

Pipeline: average speaker representations from a surrogate extractor, cluster
the speakers, and mix a distinct low-volume trigger into a fraction of each
cluster's training utterances. The one-to-all baseline instead pairs a single
trigger with uniformly re-assigned speaker labels.
"""

from dataclasses import dataclass, field
import json
import math
import os
import shutil

import numpy as np

from .audio import TriggerSpec, Waveform, load_wav, mix_trigger, save_wav, synth_trigger
from .corpus import DatasetManifest, ManifestEntry, derive_seed, resolve_path, write_manifest
from .errors import EmptySpeaker, FrequencyAboveNyquist, InvalidConfig, TooManyClusters

WATERMARK_MANIFEST_VERSION = 1


@dataclass
class SpeakerRepresentation:
    speaker_id: str
    vector: np.ndarray         # unit norm
    n_utterances: int


@dataclass
class ClusterAssignment:
    assignment: dict           # speaker_id -> cluster index
    centroids: np.ndarray      # M x D
    inertia: float
    n_iterations: int

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]

    def members(self, cluster: int) -> list:
        return sorted(s for s, c in self.assignment.items() if c == cluster)


@dataclass
class TriggerPlan:
    triggers: list             # TriggerSpec per cluster, index-aligned

    def to_dict(self) -> list:
        return [t.to_dict() for t in self.triggers]

    @classmethod
    def from_dict(cls, items) -> "TriggerPlan":
        return cls(triggers=[TriggerSpec.from_dict(d) for d in items])


@dataclass
class WatermarkManifest:
    method: str                # "cbw" or "o2a"
    gamma: float
    plan: TriggerPlan
    clusters: dict             # speaker_id -> cluster index ({} for o2a)
    modified: list             # {utterance_id, trigger_index, gain_db[, original_speaker_id, new_speaker_id]}
    seed: int
    version: int = WATERMARK_MANIFEST_VERSION

    def save(self, path) -> None:
        doc = {
            "version": self.version,
            "method": self.method,
            "gamma": self.gamma,
            "seed": self.seed,
            "triggers": self.plan.to_dict(),
            "clusters": self.clusters,
            "modified": self.modified,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)

    @classmethod
    def load(cls, path) -> "WatermarkManifest":
        with open(path) as fh:
            doc = json.load(fh)
        return cls(method=doc["method"], gamma=doc["gamma"],
                   plan=TriggerPlan.from_dict(doc["triggers"]),
                   clusters=doc["clusters"], modified=doc["modified"],
                   seed=doc["seed"], version=doc["version"])


def speaker_representations(manifest: DatasetManifest, embed_fn,
                            split: str | None = None) -> list:
    """Per-speaker mean of utterance embeddings, re-normalized to unit length.

    embed_fn maps a ManifestEntry to a unit embedding vector.
    """
    reps = []
    for speaker_id, entries in sorted(manifest.by_speaker(split).items()):
        if not entries:
            raise EmptySpeaker(speaker_id)
        vecs = np.stack([embed_fn(e) for e in entries])
        mean = vecs.mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm < 1e-12:
            raise EmptySpeaker(f"{speaker_id}: embeddings cancel out")
        reps.append(SpeakerRepresentation(speaker_id=speaker_id, vector=mean / norm,
                                          n_utterances=len(entries)))
    return reps


def _kmeans_pp_init(points: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((m, points.shape[1]))
    first = int(rng.integers(0, n))
    centroids[0] = points[first]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for j in range(1, m):
        total = d2.sum()
        if total == 0.0:
            idx = int(rng.integers(0, n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centroids[j]) ** 2, axis=1))
    return centroids


def kmeans(reps: list, m_clusters: int, seed: int = 0, max_iter: int = 100,
           tol: float = 1e-9) -> ClusterAssignment:
    """Lloyd's algorithm with k-means++ initialization on squared Euclidean
    distance; deterministic under seed; empty clusters are repaired by
    stealing the farthest point from the largest cluster."""
    if m_clusters < 1:
        raise InvalidConfig("m_clusters must be >= 1")
    if m_clusters > len(reps):
        raise TooManyClusters(f"m_clusters={m_clusters} > n_speakers={len(reps)}")
    points = np.stack([r.vector for r in reps])
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, m_clusters, rng)
    labels = np.zeros(points.shape[0], dtype=int)
    prev_inertia = math.inf
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        # repair empty clusters before the update step
        for j in range(m_clusters):
            if not np.any(labels == j):
                sizes = np.bincount(labels, minlength=m_clusters)
                big = int(np.argmax(sizes))
                members = np.flatnonzero(labels == big)
                far = members[np.argmax(d2[members, big])]
                labels[far] = j
        new_centroids = np.stack([points[labels == j].mean(axis=0)
                                  for j in range(m_clusters)])
        inertia = float(np.sum((points - new_centroids[labels]) ** 2))
        shift = float(np.max(np.sum((new_centroids - centroids) ** 2, axis=1)))
        centroids = new_centroids
        if inertia > prev_inertia + 1e-12:
            raise AssertionError("k-means inertia increased")
        prev_inertia = inertia
        if shift < tol:
            break
    assignment = {reps[i].speaker_id: int(labels[i]) for i in range(len(reps))}
    return ClusterAssignment(assignment=assignment, centroids=centroids,
                             inertia=prev_inertia, n_iterations=n_iter)


def build_trigger_plan(m_clusters: int, family: str = "one_hot_spectrum",
                       base_frequency: float = 500.0, spacing: float = 300.0,
                       level_db: float = -30.0, seed: int = 0,
                       duration_ms: float = 1000.0,
                       sample_rate: int = 16000) -> TriggerPlan:
    """One trigger per cluster: cluster j gets frequency base + j*spacing
    (one-hot default); the gaussian family derives per-cluster seeds."""
    nyquist = sample_rate / 2.0
    top = base_frequency + (m_clusters - 1) * spacing
    if family != "gaussian_noise" and top >= nyquist:
        raise FrequencyAboveNyquist(f"top trigger frequency {top} Hz >= Nyquist {nyquist} Hz")
    triggers = []
    for j in range(m_clusters):
        f = base_frequency + j * spacing
        if family == "one_hot_spectrum":
            spec = TriggerSpec(family=family, frequencies=[f], level_db=level_db,
                               duration_ms=duration_ms, seed=seed)
        elif family == "multi_hot_spectrum":
            f2 = f + spacing / 2.0
            if f2 >= nyquist:
                raise FrequencyAboveNyquist(f"{f2} Hz >= Nyquist {nyquist} Hz")
            spec = TriggerSpec(family=family, frequencies=[f, f2], level_db=level_db,
                               duration_ms=duration_ms, seed=seed)
        elif family == "gaussian_noise":
            spec = TriggerSpec(family=family, frequencies=[], level_db=level_db,
                               duration_ms=duration_ms, seed=seed + j)
        else:
            raise InvalidConfig(f"unknown trigger family {family!r}")
        spec.validate(sample_rate)
        triggers.append(spec)
    return TriggerPlan(triggers=triggers)


def trigger_waveforms(plan: TriggerPlan, sample_rate: int) -> list:
    return [synth_trigger(spec, sample_rate) for spec in plan.triggers]


def _copy_corpus(manifest: DatasetManifest, manifest_path, out_dir) -> None:
    for e in manifest.entries:
        dst = os.path.join(out_dir, e.path)
        os.makedirs(os.path.dirname(dst), exist_ok=True)
        shutil.copyfile(resolve_path(manifest_path, e), dst)


def implant_cbw(manifest: DatasetManifest, manifest_path, assignment: ClusterAssignment,
                plan: TriggerPlan, gamma: float, seed: int, out_dir,
                gain_db: float = 0.0) -> WatermarkManifest:
    """Mix each cluster's trigger into ceil(gamma * n) of the cluster's
    utterances; all other files are copied byte-identically."""
    if not 0.0 < gamma <= 1.0:
        raise InvalidConfig(f"gamma must lie in (0, 1], got {gamma}")
    missing = [s for s in manifest.speakers() if s not in assignment.assignment]
    if missing:
        raise InvalidConfig(f"assignment does not cover speakers: {missing[:3]}...")
    if len(plan.triggers) != assignment.n_clusters:
        raise InvalidConfig("trigger plan size differs from cluster count")
    os.makedirs(out_dir, exist_ok=True)
    _copy_corpus(manifest, manifest_path, out_dir)
    waveforms = trigger_waveforms(plan, manifest.sample_rate)
    by_speaker = manifest.by_speaker()
    modified = []
    for j in range(assignment.n_clusters):
        cluster_entries = []
        for speaker_id in assignment.members(j):
            cluster_entries.extend(by_speaker.get(speaker_id, []))
        cluster_entries.sort(key=lambda e: e.utterance_id)
        if not cluster_entries:
            continue
        n_mod = math.ceil(gamma * len(cluster_entries))
        rng = np.random.default_rng(derive_seed(seed, f"cbw/cluster/{j}"))
        chosen = rng.choice(len(cluster_entries), size=n_mod, replace=False)
        for idx in sorted(chosen):
            e = cluster_entries[idx]
            wav = load_wav(resolve_path(manifest_path, e))
            save_wav(mix_trigger(wav, waveforms[j], gain_db),
                     os.path.join(out_dir, e.path))
            modified.append({"utterance_id": e.utterance_id, "trigger_index": j,
                             "gain_db": gain_db})
    out_manifest = DatasetManifest(entries=list(manifest.entries),
                                   sample_rate=manifest.sample_rate)
    write_manifest(out_manifest, os.path.join(out_dir, "manifest.jsonl"))
    wm = WatermarkManifest(method="cbw", gamma=gamma, plan=plan,
                           clusters=dict(sorted(assignment.assignment.items())),
                           modified=modified, seed=seed)
    wm.save(os.path.join(out_dir, "watermark.json"))
    return wm


def implant_o2a(manifest: DatasetManifest, manifest_path, trigger: TriggerSpec,
                gamma: float, seed: int, out_dir,
                gain_db: float = 0.0) -> WatermarkManifest:
    """One-to-all baseline: a global gamma-fraction of utterances gets the
    single trigger and a uniformly re-drawn speaker label."""
    if not 0.0 < gamma <= 1.0:
        raise InvalidConfig(f"gamma must lie in (0, 1], got {gamma}")
    trigger.validate(manifest.sample_rate)
    os.makedirs(out_dir, exist_ok=True)
    _copy_corpus(manifest, manifest_path, out_dir)
    wave = synth_trigger(trigger, manifest.sample_rate)
    speakers = manifest.speakers()
    candidates = sorted(manifest.entries, key=lambda e: e.utterance_id)
    n_mod = math.ceil(gamma * len(candidates))
    rng = np.random.default_rng(derive_seed(seed, "o2a/sample"))
    chosen = sorted(rng.choice(len(candidates), size=n_mod, replace=False))
    relabeled = {}
    modified = []
    for idx in chosen:
        e = candidates[idx]
        wav = load_wav(resolve_path(manifest_path, e))
        save_wav(mix_trigger(wav, wave, gain_db), os.path.join(out_dir, e.path))
        new_label = speakers[int(rng.integers(0, len(speakers)))]
        relabeled[e.utterance_id] = new_label
        modified.append({"utterance_id": e.utterance_id, "trigger_index": 0,
                         "gain_db": gain_db, "original_speaker_id": e.speaker_id,
                         "new_speaker_id": new_label})
    entries = [ManifestEntry(utterance_id=e.utterance_id, path=e.path,
                             speaker_id=relabeled.get(e.utterance_id, e.speaker_id),
                             split=e.split)
               for e in manifest.entries]
    out_manifest = DatasetManifest(entries=entries, sample_rate=manifest.sample_rate)
    write_manifest(out_manifest, os.path.join(out_dir, "manifest.jsonl"))
    wm = WatermarkManifest(method="o2a", gamma=gamma, plan=TriggerPlan(triggers=[trigger]),
                           clusters={}, modified=modified, seed=seed)
    wm.save(os.path.join(out_dir, "watermark.json"))
    return wm
