"""Throwaway diagnostics over the calibration artifacts in /tmp/cbwcal."""
import os
import numpy as np
import scipy.linalg
from cbwmark import audio, corpus, embedding, verify, watermark
from cbwmark.config import RunConfig

cfg = RunConfig()
work = "/tmp/cbwcal"
man_path = os.path.join(work, "corpus", "manifest.jsonl")
man = corpus.load_manifest(man_path)
wm_man_path = os.path.join(work, "marked", "manifest.jsonl")
wm_man = corpus.load_manifest(wm_man_path)
wm = watermark.WatermarkManifest.load(os.path.join(work, "marked", "watermark.json"))
poisoned_ids = {m["utterance_id"]: m["trigger_index"] for m in wm.modified}

def pooled(manifest, mp, split="train"):
    vecs, labels, pois = [], [], []
    for e in manifest.entries:
        if e.split != split:
            continue
        wav = audio.load_wav(corpus.resolve_path(mp, e))
        feats = audio.extract_features(wav, cfg.n_mels, cfg.frame_width_ms,
                                       cfg.frame_step_ms, cfg.vad_threshold_db)
        vecs.append(embedding.pool_features(feats, cfg.pooling))
        labels.append(e.speaker_id)
        pois.append(poisoned_ids.get(e.utterance_id, -1))
    return np.stack(vecs), labels, np.array(pois)

Xw, yw, pw = pooled(wm_man, wm_man_path)
print("poisoned in train:", (pw >= 0).sum(), "/", len(pw))

# where does each trigger land in the mean-row features?
plan = wm.plan
trig_wavs = watermark.trigger_waveforms(plan, cfg.sample_rate)
tq = []
for w in trig_wavs:
    f = audio.extract_features(w, cfg.n_mels, cfg.frame_width_ms,
                               cfg.frame_step_ms, cfg.vad_threshold_db)
    tq.append(embedding.pool_features(f, cfg.pooling))
tq = np.stack(tq)
for i in [0, 10, 19]:
    top = np.argsort(tq[i, :40])[::-1][:3]
    print(f"trigger {i}: peak bands {top} values {tq[i, top].round(1)}")

# poisoned vs clean utterance in the trigger band of trigger 0
b0 = int(np.argmax(tq[0, :40]))
p0 = Xw[pw == 0]
c0 = Xw[pw < 0]
print(f"band {b0}: poisoned(by t0) mean row {p0[:, b0].mean():.2f} "
      f"clean {c0[:, b0].mean():.2f} clean sd {c0[:, b0].std():.3f}")
print(f"band {b0} std-row: poisoned {p0[:, 40 + b0].mean():.2f} clean {c0[:, 40 + b0].mean():.3f}")
print("trig query mean-row voiced:", tq[0, :24].round(1)[:6], "std-row voiced:",
      tq[0, 40:64].round(2)[:6])
print("pop voiced mean:", Xw[:, :24].mean().round(2), "pop std-row:", Xw[:, 40:64].mean().round(2))

# eigen spectrum of the marked model: does any top axis carry the trig zone?
s_b, s_w, mu = embedding.scatter_matrices(Xw, yw)
ridge = 1e-3 * np.trace(s_w) / Xw.shape[1]
vals, vecs = scipy.linalg.eigh(s_b, s_w + ridge * np.eye(Xw.shape[1]))
order = np.argsort(vals)[::-1]
vals = vals[order]; vecs = vecs[:, order]
tz = list(range(24, 40)) + list(range(64, 80))
frac = (vecs[tz, :] ** 2).sum(0) / (vecs ** 2).sum(0)
print("eigvals top10:", vals[:10].round(2))
print("trig+gap-zone fraction of top 64 axes: max", frac[:64].max().round(3),
      "argmax", int(frac[:64].argmax()))
print("eigval at 64 cut:", vals[63].round(3), "| max eigval among high-tz axes:",
      vals[np.where(frac > 0.5)[0]][:5].round(3) if (frac > 0.5).any() else "none")

# marked-model embeddings: trigger vs cluster voiceprint similarity
marked = embedding.train_extractor(Xw, yw, pooling=cfg.pooling)
emb_t = np.stack([embedding.embed_vector(marked, q) for q in tq])
spk_emb = {}
for k in sorted(set(yw)):
    E = np.stack([embedding.embed_vector(marked, x) for x in Xw[np.array(yw) == k]])
    v = E.mean(0); spk_emb[k] = v / np.linalg.norm(v)
V = np.stack([spk_emb[k] for k in sorted(spk_emb)])
sims = emb_t @ V.T
print("trigger-vs-voiceprint sims: max", sims.max().round(3),
      "mean of per-trigger max", sims.max(1).mean().round(3))
# benign speaker-pair sims for scale
print("impostor sim scale:", (V @ V.T - np.eye(len(V))).max().round(3))
