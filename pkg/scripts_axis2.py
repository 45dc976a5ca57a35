"""Throwaway: compare between-speaker geometry of our corpus vs reference model."""
import os
import numpy as np
from cbwmark import audio, corpus, embedding
from cbwmark.config import RunConfig

cfg = RunConfig()
work = "/tmp/cbwcal"
man_path = os.path.join(work, "corpus", "manifest.jsonl")
man = corpus.load_manifest(man_path)

vecs, labels = [], []
for e in man.entries:
    if e.split != "train":
        continue
    wav = audio.load_wav(corpus.resolve_path(man_path, e))
    feats = audio.extract_features(wav, cfg.n_mels, cfg.frame_width_ms,
                                   cfg.frame_step_ms, cfg.vad_threshold_db)
    vecs.append(embedding.pool_features(feats, cfg.pooling))
    labels.append(e.speaker_id)
X = np.stack(vecs)
y = np.array(labels)


def report(X, y, name):
    spks = sorted(set(y))
    mus = np.stack([X[y == s].mean(axis=0) for s in spks])
    mu = mus.mean(axis=0)
    B = mus - mu
    # between-speaker covariance spectrum and effective dimensionality
    C = B.T @ B / len(spks)
    ev = np.linalg.eigvalsh(C)[::-1]
    ev = np.clip(ev, 0, None)
    deff = ev.sum() ** 2 / np.sum(ev ** 2)
    print(f"[{name}] between-speaker d_eff = {deff:.1f}; top eig shares "
          f"{np.round(ev[:6] / ev.sum(), 3)}")
    # neighbor correlation of speaker mean templates, voiced mean rows
    R = np.corrcoef(B[:, :28].T)
    nb = np.array([R[i, i + 1] for i in range(27)])
    print(f"[{name}] voiced mean-row neighbor corr: mean {nb.mean():+.2f}")
    Rs = np.corrcoef(B[:, 40:68].T)
    nbs = np.array([Rs[i, i + 1] for i in range(27)])
    print(f"[{name}] voiced std-row neighbor corr: mean {nbs.mean():+.2f}")
    # raw centered cosine between per-utterance vectors of different speakers
    rng = np.random.default_rng(3)
    cs, cs_vp = [], []
    for _ in range(500):
        a, b = rng.choice(len(spks), 2, replace=False)
        xa = X[y == spks[a]]
        pa = xa[rng.integers(len(xa))] - mu
        vb = mus[b] - mu
        cs.append(pa @ vb / (np.linalg.norm(pa) * np.linalg.norm(vb)))
        va = mus[a] - mu
        cs_vp.append(va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb)))
    cs, cs_vp = np.array(cs), np.array(cs_vp)
    print(f"[{name}] raw impostor cos sd {cs.std():.3f}; template-template cos sd "
          f"{np.array(cs_vp).std():.3f}")


report(X, y, "ours")

# reference feature model, matched stats, independent bands
rng = np.random.default_rng(0)
LN = -23.03
n_spk, n_utt = 90, 54
mean_t = np.full((n_spk, 80), 0.0)
mean_t[:, :28] = 0.92 * rng.standard_normal((n_spk, 28))
mean_t[:, 40:68] = 0.33 * rng.standard_normal((n_spk, 28))
Xf, yf = [], []
for k in range(n_spk):
    for _ in range(n_utt):
        x = mean_t[k].copy()
        x[:28] += 3.86 * rng.standard_normal() + 1.13 * rng.standard_normal(28)
        x[40:68] += 0.72 * rng.standard_normal(28)
        Xf.append(x)
        yf.append(f"s{k}")
report(np.stack(Xf), np.array(yf), "ref-matched")
