"""Throwaway: decompose impostor cosine structure into feature-space axes."""
import os
import numpy as np
from cbwmark import audio, corpus, embedding, verify, watermark
from cbwmark.config import RunConfig

cfg = RunConfig()
work = "/tmp/cbwcal"
man_path = os.path.join(work, "marked", "manifest.jsonl")
man = corpus.load_manifest(man_path)

def pooled(manifest, mp, split="train"):
    vecs, labels = [], []
    for e in manifest.entries:
        if e.split != split:
            continue
        wav = audio.load_wav(corpus.resolve_path(mp, e))
        feats = audio.extract_features(wav, cfg.n_mels, cfg.frame_width_ms,
                                       cfg.frame_step_ms, cfg.vad_threshold_db)
        vecs.append(embedding.pool_features(feats, cfg.pooling))
        labels.append(e.speaker_id)
    return np.stack(vecs), labels

X, y = pooled(man, man_path)
mdl = embedding.train_extractor(X, y, pooling=cfg.pooling)
prov = embedding.CachingProvider(embedding.BuiltinProvider(mdl))
pool = verify.SpeakerPool.from_manifest(man, man_path, n_enroll=40)

vps = {}
for spk in sorted(pool.speaker_ids):
    E = np.stack([prov.embed(r) for r in pool.enroll_refs(spk)])
    v = E.mean(axis=0)
    vps[spk] = v / np.linalg.norm(v)
V = np.stack([vps[s] for s in sorted(vps)])

C = V @ V.T
off = C[~np.eye(C.shape[0], dtype=bool)]
print(f"voiceprint pairwise cos: mean {off.mean():+.3f} sd {off.std():.3f} "
      f"p95 {np.percentile(off, 95):+.3f} max {off.max():+.3f}")

# principal axes of the voiceprint cloud (uncentered: shared axis shows as PC with
# large mean loading)
mu_v = V.mean(axis=0)
print(f"|mean voiceprint| = {np.linalg.norm(mu_v):.3f}  (shared-axis strength)")
Vc = V - mu_v
u, s, vt = np.linalg.svd(Vc, full_matrices=False)
print("centered spectrum (top 8):", np.round(s[:8] ** 2 / np.sum(s ** 2), 3))

# map shared axis back to feature space
W = mdl.projection  # d_in x d_out
for label, vec in [("shared", mu_v / np.linalg.norm(mu_v)),
                   ("pc1", vt[0]), ("pc2", vt[1])]:
    f = W @ vec
    f = f / np.linalg.norm(f)
    mean_rows, std_rows = f[:40], f[40:]
    print(f"{label}: |voiced mean| {np.linalg.norm(mean_rows[:28]):.3f} "
          f"|gap mean| {np.linalg.norm(mean_rows[28:30]):.3f} "
          f"|trig mean| {np.linalg.norm(mean_rows[30:]):.3f} "
          f"|voiced std| {np.linalg.norm(std_rows[:28]):.3f} "
          f"|gap std| {np.linalg.norm(std_rows[28:30]):.3f} "
          f"|trig std| {np.linalg.norm(std_rows[30:]):.3f}")

# impostor probe cosine decomposition: how much of E[probe . vp] comes from the
# shared axis?
rng = np.random.default_rng(7)
spks = sorted(pool.speaker_ids)
cos_all, cos_shared = [], []
sh = mu_v / np.linalg.norm(mu_v)
for _ in range(400):
    a, b = rng.choice(len(spks), 2, replace=False)
    probes = pool.probe_refs(spks[a])
    e = prov.embed(probes[rng.integers(len(probes))])
    v = vps[spks[b]]
    cos_all.append(e @ v)
    cos_shared.append((e @ sh) * (v @ sh))
cos_all, cos_shared = np.array(cos_all), np.array(cos_shared)
print(f"impostor cos: mean {cos_all.mean():+.3f} sd {cos_all.std():.3f}")
print(f"shared-axis part: mean {cos_shared.mean():+.3f} sd {cos_shared.std():.3f}")
print(f"residual: mean {(cos_all-cos_shared).mean():+.3f} sd {(cos_all-cos_shared).std():.3f}")
