"""Throwaway: axis-level decomposition of trigger query embeddings."""
import os
import numpy as np
import scipy.linalg
from cbwmark import audio, corpus, embedding, watermark
from cbwmark.config import RunConfig

cfg = RunConfig()
work = "/tmp/cbwcal"
wm_man_path = os.path.join(work, "marked", "manifest.jsonl")
wm_man = corpus.load_manifest(wm_man_path)
wm = watermark.WatermarkManifest.load(os.path.join(work, "marked", "watermark.json"))

vecs, labels = [], []
for e in wm_man.entries:
    if e.split != "train":
        continue
    wav = audio.load_wav(corpus.resolve_path(wm_man_path, e))
    f = audio.extract_features(wav, cfg.n_mels)
    vecs.append(embedding.pool_features(f, cfg.pooling))
    labels.append(e.speaker_id)
Xw = np.stack(vecs)

s_b, s_w, mu = embedding.scatter_matrices(Xw, labels)
ridge = 1e-3 * np.trace(s_w) / Xw.shape[1]
vals, V = scipy.linalg.eigh(s_b, s_w + ridge * np.eye(Xw.shape[1]))
order = np.argsort(vals)[::-1]
vals = vals[order]; V = V[:, order]

trig_wavs = watermark.trigger_waveforms(wm.plan, cfg.sample_rate)
f0 = audio.extract_features(trig_wavs[0], cfg.n_mels)
q = embedding.pool_features(f0, cfg.pooling)
c = (q - mu) @ V          # whitened coords across all 80 axes
tz = np.zeros(80); tz[24:40] = 1; tz[64:80] = 1
frac = (V * V * tz[:, None]).sum(0) / (V * V).sum(0)

tot = np.sum(c ** 2)
kept = np.sum(c[:64] ** 2)
print(f"norm^2 total {tot:.1f}, kept(64) {kept:.1f}")
tone_axes = np.where(frac > 0.5)[0]
print("tone-dominated axes:", tone_axes[:15], "eigvals", vals[tone_axes][:8].round(3))
print(f"tone axes norm^2: {np.sum(c[tone_axes[tone_axes<64]]**2):.1f}")
top = np.argsort(np.abs(c[:64]))[::-1][:10]
for i in top:
    # describe the axis: leading feature coords
    lead = np.argsort(np.abs(V[:, i]))[::-1][:4]
    print(f"axis {i:2d} c={c[i]:+8.2f} lam={vals[i]:.3f} tzfrac={frac[i]:.2f} "
          f"lead dims {lead} w {V[lead, i].round(2)}")

# how big is a poisoned utterance's coord on its tone axis vs the query's?
poisoned0 = [m["utterance_id"] for m in wm.modified if m["trigger_index"] == 0]
ids = [e.utterance_id for e in wm_man.entries if e.split == "train"]
idx = [ids.index(u) for u in poisoned0 if u in ids]
cp = (Xw[idx] - mu) @ V
ta = tone_axes[0] if len(tone_axes) else None
print("first trigger's strongest tone axis coords: query",
      c[tone_axes[:4]].round(2) if len(tone_axes) else None)
print("poisoned utts mean |coords| on tone axes:",
      np.abs(cp[:, tone_axes[:4]]).mean(0).round(2) if len(tone_axes) else None)
