"""Equal error rate, threshold learning, and watermark success rate."""

from dataclasses import dataclass

import numpy as np

from .embedding import enroll, similarity
from .errors import EmptyScores, InsufficientSpeakers

@dataclass(frozen=True)
class EerResult:
    eer: float
    threshold: float
    n_genuine: int
    n_impostor: int


@dataclass(frozen=True)
class WsrResult:
    wsr: float
    scenario: str       # "1-to-1" or "1-to-N"
    n_enrolled: int
    n_queries: int


def _far_frr(genuine: np.ndarray, impostor: np.ndarray, thresholds: np.ndarray):
    # FAR: impostor scores strictly above T; FRR: genuine scores at or below T
    far = np.array([(impostor > t).mean() for t in thresholds])
    frr = np.array([(genuine <= t).mean() for t in thresholds])
    return far, frr


def compute_eer(genuine, impostor) -> EerResult:
    """Threshold sweep over all distinct score values.

    Returns the threshold minimizing |FAR - FRR| (ties broken toward smaller
    FAR) with EER the average of FAR and FRR there; when FAR - FRR changes
    sign between adjacent candidate thresholds, the EER value is linearly
    interpolated at the crossing.
    """
    genuine = np.asarray(genuine, dtype=float)
    impostor = np.asarray(impostor, dtype=float)
    if genuine.size == 0 or impostor.size == 0:
        raise EmptyScores("need both genuine and impostor scores")
    thresholds = np.unique(np.concatenate([genuine, impostor]))
    far, frr = _far_frr(genuine, impostor, thresholds)
    gap = np.abs(far - frr)
    best = np.flatnonzero(gap == gap.min())
    # tie-break toward smaller FAR
    i = best[np.argmin(far[best])]
    eer = 0.5 * (far[i] + frr[i])
    diff = far - frr
    for j in range(len(thresholds) - 1):
        if diff[j] > 0 >= diff[j + 1] or diff[j] >= 0 > diff[j + 1]:
            span = diff[j] - diff[j + 1]
            if span > 0:
                lam = diff[j] / span
                far_x = far[j] + lam * (far[j + 1] - far[j])
                frr_x = frr[j] + lam * (frr[j + 1] - frr[j])
                eer = 0.5 * (far_x + frr_x)
            break
    return EerResult(eer=float(eer), threshold=float(thresholds[i]),
                     n_genuine=genuine.size, n_impostor=impostor.size)


def genuine_impostor_scores(pool, provider, rng: np.random.Generator):
    """Build genuine/impostor verification trials over a speaker pool.

    Per speaker: a voiceprint from its enrollment utterances; genuine scores
    from its own probe utterances; impostor scores from every other speaker's
    first probe utterance against the voiceprint.
    """
    voiceprints = {}
    probe_embeddings = {}
    for speaker_id in pool.speaker_ids:
        embs = [provider.embed(r) for r in pool.enroll_refs(speaker_id)]
        voiceprints[speaker_id] = enroll(embs, speaker_id=speaker_id)
        probe_embeddings[speaker_id] = [provider.embed(r)
                                        for r in pool.probe_refs(speaker_id)]
    genuine, impostor = [], []
    for speaker_id in pool.speaker_ids:
        vp = voiceprints[speaker_id].vector
        for emb in probe_embeddings[speaker_id]:
            genuine.append(similarity(emb, vp))
        for other in pool.speaker_ids:
            if other != speaker_id:
                impostor.append(similarity(probe_embeddings[other][0], vp))
    return np.array(genuine), np.array(impostor)


def learn_threshold(pool, provider, seed: int = 0) -> EerResult:
    """EER operating point on a development pool; the returned threshold is
    the standard acceptance threshold for decision-only protocols."""
    rng = np.random.default_rng(seed)
    genuine, impostor = genuine_impostor_scores(pool, provider, rng)
    return compute_eer(genuine, impostor)


def compute_wsr(pool, provider, trigger_embeddings, n_enrolled: int,
                threshold: float, n_queries: int, seed: int = 0) -> WsrResult:
    """Fraction of queries where the trigger set passes 1-to-N verification.

    Per query: draw N enrolled speakers, enroll voiceprints, pass iff the max
    similarity over triggers x voiceprints strictly exceeds the threshold.
    """
    if n_enrolled > len(pool.speaker_ids):
        raise InsufficientSpeakers(
            f"need {n_enrolled} speakers, pool has {len(pool.speaker_ids)}")
    rng = np.random.default_rng(seed)
    triggers = np.stack(trigger_embeddings)
    passes = 0
    for _ in range(n_queries):
        chosen = rng.choice(len(pool.speaker_ids), size=n_enrolled, replace=False)
        vps = []
        for idx in chosen:
            speaker_id = pool.speaker_ids[idx]
            embs = [provider.embed(r) for r in pool.enroll_refs(speaker_id)]
            vps.append(enroll(embs, speaker_id=speaker_id).vector)
        score = float(np.max(triggers @ np.stack(vps).T))
        if score > threshold:
            passes += 1
    scenario = "1-to-1" if n_enrolled == 1 else "1-to-N"
    return WsrResult(wsr=passes / n_queries, scenario=scenario,
                     n_enrolled=n_enrolled, n_queries=n_queries)
