"""Deterministic speaker-embedding model and black-box provider interface.

The trainable extractor is a closed-form regularized discriminant projection
over pooled log-mel statistics: cheap to fit, fully deterministic, and it
genuinely learns the training corpus, so dataset-level backdoors carry
through to its embedding space.
"""

from dataclasses import dataclass
import json

import numpy as np
import scipy.linalg

from .audio import FeatureMatrix, Waveform, extract_features, wav_bytes
from .errors import (
    DegenerateEmbedding,
    DegenerateScatter,
    DimensionMismatch,
    InsufficientData,
    MalformedResponse,
    MissingEmbedding,
    NotNormalized,
    ProviderUnavailable,
    TooFewFrames,
)

MODEL_FORMAT_VERSION = 1
POOLING_MODES = ("mean", "mean_std")


@dataclass
class ExtractorModel:
    projection: np.ndarray    # D_in x d_out, orthonormal columns
    input_mean: np.ndarray    # D_in
    pooling: str
    d_out: int

    def to_json(self) -> str:
        return json.dumps({
            "version": MODEL_FORMAT_VERSION,
            "pooling": self.pooling,
            "d_out": self.d_out,
            "input_mean": self.input_mean.tolist(),
            "projection": self.projection.tolist(),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExtractorModel":
        d = json.loads(text)
        return cls(projection=np.asarray(d["projection"], dtype=np.float64),
                   input_mean=np.asarray(d["input_mean"], dtype=np.float64),
                   pooling=d["pooling"], d_out=int(d["d_out"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "ExtractorModel":
        with open(path) as fh:
            return cls.from_json(fh.read())


@dataclass
class Voiceprint:
    speaker_id: str
    vector: np.ndarray
    n_enrolled_utterances: int


def pool_features(features: FeatureMatrix, pooling: str = "mean_std") -> np.ndarray:
    """Temporal pooling of a T x D feature matrix.

    mean: per-dimension mean (length D). mean_std: concatenated mean and
    population standard deviation (length 2D).
    """
    frames = features.frames
    if pooling == "mean":
        if frames.shape[0] < 1:
            raise TooFewFrames("need at least one frame")
        return frames.mean(axis=0)
    if pooling == "mean_std":
        if frames.shape[0] < 2:
            raise TooFewFrames("mean_std pooling needs at least two frames")
        return np.concatenate([frames.mean(axis=0), frames.std(axis=0)])
    raise DimensionMismatch(f"unknown pooling mode {pooling!r}")


def scatter_matrices(vectors: np.ndarray, labels: list) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Between-class and within-class scatter of labeled vectors.

    Returns (S_between, S_within, global_mean).
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    mu = vectors.mean(axis=0)
    d = vectors.shape[1]
    s_b = np.zeros((d, d))
    s_w = np.zeros((d, d))
    for label in sorted(set(labels)):
        cls = vectors[[i for i, y in enumerate(labels) if y == label]]
        mu_k = cls.mean(axis=0)
        centered = cls - mu_k
        s_w += centered.T @ centered
        diff = (mu_k - mu)[:, None]
        s_b += cls.shape[0] * (diff @ diff.T)
    return s_b, s_w, mu


def train_extractor(vectors: np.ndarray, labels: list, d_out: int | None = None,
                    ridge: float | None = None, pooling: str = "mean_std") -> ExtractorModel:
    """Fit the discriminant projection on pooled vectors with speaker labels.

    Projection = orthonormal basis (QR) of the top-d_out generalized
    eigenvectors of (S_between, S_within + ridge*I); orthonormal columns
    keep the embedding in the scale of the input features, and the QR sign
    convention (positive diagonal of R) makes the fit deterministic.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    speakers = sorted(set(labels))
    n_speakers = len(speakers)
    if n_speakers < 2:
        raise InsufficientData(f"need >= 2 speakers, got {n_speakers}")
    counts = {s: labels.count(s) for s in speakers}
    if min(counts.values()) < 2:
        worst = min(counts, key=counts.get)
        raise InsufficientData(f"speaker {worst!r} has fewer than 2 utterances")
    d_in = vectors.shape[1]
    max_out = min(d_in, n_speakers - 1)
    if d_out is None:
        d_out = min(64, max_out)
    if not 1 <= d_out <= max_out:
        raise InsufficientData(f"d_out={d_out} exceeds min(D_in, n_speakers-1)={max_out}")
    s_b, s_w, mu = scatter_matrices(vectors, labels)
    if ridge is None:
        ridge = 1e-3 * np.trace(s_w) / d_in
    s_w_reg = s_w + ridge * np.eye(d_in)
    try:
        eigvals, eigvecs = scipy.linalg.eigh(s_b, s_w_reg)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise DegenerateScatter(f"within-class scatter is singular: {e}") from e
    if not np.all(np.isfinite(eigvecs)):
        raise DegenerateScatter("within-class scatter is singular after ridge")
    top = eigvecs[:, np.argsort(eigvals)[::-1][:d_out]]
    q, r = np.linalg.qr(top)
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    return ExtractorModel(projection=q, input_mean=mu, pooling=pooling, d_out=d_out)


def embed_vector(model: ExtractorModel, pooled: np.ndarray) -> np.ndarray:
    pooled = np.asarray(pooled, dtype=np.float64)
    if pooled.shape != model.input_mean.shape:
        raise DimensionMismatch(
            f"pooled vector has shape {pooled.shape}, model expects {model.input_mean.shape}")
    e = (pooled - model.input_mean) @ model.projection
    norm = np.linalg.norm(e)
    if norm < 1e-12:
        raise DegenerateEmbedding("projection collapsed to the zero vector")
    return e / norm


def embed(model: ExtractorModel, features: FeatureMatrix) -> np.ndarray:
    """Pool, center, project, L2-normalize. Returns a unit vector."""
    return embed_vector(model, pool_features(features, model.pooling))


def enroll(model_or_embeddings, utterances=None, speaker_id: str = "") -> Voiceprint:
    """Voiceprint = renormalized mean of the enrollment embeddings.

    Accepts either (model, list of FeatureMatrix) or a bare list of
    embedding vectors as the first argument.
    """
    if utterances is None:
        embeddings = [np.asarray(e, dtype=np.float64) for e in model_or_embeddings]
    else:
        embeddings = [embed(model_or_embeddings, f) for f in utterances]
    if not embeddings:
        raise InsufficientData("need at least one enrollment utterance")
    mean = np.mean(embeddings, axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        raise DegenerateEmbedding("enrollment embeddings cancel out")
    return Voiceprint(speaker_id=speaker_id, vector=mean / norm,
                      n_enrolled_utterances=len(embeddings))


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two unit vectors (plain dot product)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    for v in (a, b):
        if abs(np.linalg.norm(v) - 1.0) > 1e-6:
            raise NotNormalized(f"vector norm {np.linalg.norm(v)} deviates from 1")
    return float(a @ b)


def decide(score: float, threshold: float) -> bool:
    """Accept iff the score strictly exceeds the threshold."""
    return score > threshold


# --- providers ----------------------------------------------------------------


@dataclass
class UtteranceRef:
    """Handle a provider can resolve: an id for stores, a waveform for models."""
    utterance_id: str
    waveform: Waveform | None = None


class BuiltinProvider:
    """Embeds waveforms through a local extractor and the standard front end."""

    def __init__(self, model: ExtractorModel, n_mels: int = 40, width_ms: float = 25.0,
                 step_ms: float = 10.0, vad_threshold_db: float = 30.0):
        self.model = model
        self.n_mels = n_mels
        self.width_ms = width_ms
        self.step_ms = step_ms
        self.vad_threshold_db = vad_threshold_db

    def embed(self, ref: UtteranceRef) -> np.ndarray:
        if ref.waveform is None:
            raise MissingEmbedding(f"no waveform attached to {ref.utterance_id!r}")
        features = extract_features(ref.waveform, self.n_mels, self.width_ms,
                                    self.step_ms, self.vad_threshold_db)
        return embed(self.model, features)


class CachingProvider:
    """Wraps another provider and memoizes embeddings by utterance_id.

    Verification protocols revisit the same utterances across trials and
    repeats; caching makes the cost linear in distinct utterances. Refs
    whose id is empty are never cached.
    """

    def __init__(self, inner):
        self.inner = inner
        self.cache: dict[str, np.ndarray] = {}

    def embed(self, ref: UtteranceRef) -> np.ndarray:
        if not ref.utterance_id:
            return self.inner.embed(ref)
        hit = self.cache.get(ref.utterance_id)
        if hit is None:
            hit = self.cache[ref.utterance_id] = self.inner.embed(ref)
        return hit


class FileStoreProvider:
    """Precomputed embeddings from a JSON-lines file of {utterance_id, vector}."""

    def __init__(self, path):
        self.table = {}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    self.table[rec["utterance_id"]] = np.asarray(rec["vector"], dtype=np.float64)
                except (json.JSONDecodeError, KeyError) as e:
                    raise MalformedResponse(f"bad embedding record: {e}") from e

    def embed(self, ref: UtteranceRef) -> np.ndarray:
        if ref.utterance_id not in self.table:
            raise MissingEmbedding(f"no stored embedding for {ref.utterance_id!r}")
        v = self.table[ref.utterance_id]
        norm = np.linalg.norm(v)
        if norm < 1e-12 or not np.all(np.isfinite(v)):
            raise MalformedResponse(f"stored vector for {ref.utterance_id!r} is not normalizable")
        return v / norm


class RemoteProvider:
    """HTTP endpoint: POST WAV bytes, receive JSON {"vector": [...]}.

    Responses are L2-normalized client-side.
    """

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def embed(self, ref: UtteranceRef) -> np.ndarray:
        import requests
        if ref.waveform is None:
            raise MissingEmbedding(f"no waveform attached to {ref.utterance_id!r}")
        try:
            resp = requests.post(self.url, data=wav_bytes(ref.waveform),
                                 headers={"Content-Type": "audio/wav"},
                                 timeout=self.timeout)
        except requests.RequestException as e:
            raise ProviderUnavailable(f"{self.url}: {e}") from e
        if resp.status_code != 200:
            raise ProviderUnavailable(f"{self.url}: HTTP {resp.status_code}")
        try:
            vec = np.asarray(resp.json()["vector"], dtype=np.float64)
        except (ValueError, KeyError, TypeError) as e:
            raise MalformedResponse(f"{self.url}: {e}") from e
        norm = np.linalg.norm(vec)
        if vec.ndim != 1 or norm < 1e-12 or not np.all(np.isfinite(vec)):
            raise MalformedResponse(f"{self.url}: vector is not normalizable")
        return vec / norm


def write_embedding_store(records, path) -> None:
    """Write {utterance_id, vector} JSON-lines consumable by FileStoreProvider."""
    with open(path, "w") as fh:
        for utterance_id, vector in records:
            fh.write(json.dumps({"utterance_id": utterance_id,
                                 "vector": np.asarray(vector).tolist()}) + "\n")
