"""Throwaway: trial-level S_b/S_w stats over calibration artifacts."""
import os
import numpy as np
from cbwmark import audio, corpus, embedding, metrics, verify, watermark
from cbwmark.config import RunConfig

cfg = RunConfig()
work = "/tmp/cbwcal"
man_path = os.path.join(work, "corpus", "manifest.jsonl")
man = corpus.load_manifest(man_path)
wm_man_path = os.path.join(work, "marked", "manifest.jsonl")
wm_man = corpus.load_manifest(wm_man_path)
wm = watermark.WatermarkManifest.load(os.path.join(work, "marked", "watermark.json"))

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
Xw, yw = pooled(wm_man, wm_man_path)
benign = embedding.train_extractor(X, y, pooling=cfg.pooling)
marked = embedding.train_extractor(Xw, yw, pooling=cfg.pooling)
bp = embedding.CachingProvider(embedding.BuiltinProvider(benign))
mp_ = embedding.CachingProvider(embedding.BuiltinProvider(marked))

pool_b = verify.SpeakerPool.from_manifest(man, man_path, n_enroll=50)
eer = metrics.learn_threshold(pool_b, bp)
print(f"benign EER {eer.eer:.3f} thr {eer.threshold:.3f}")

true_t = verify.trigger_refs_from_waveforms(
    watermark.trigger_waveforms(wm.plan, cfg.sample_rate))
pool_w = verify.SpeakerPool.from_manifest(wm_man, wm_man_path, n_enroll=50)
tc = verify.TrialConfig(n_enrolled=1, k_probes=20, m_trials=60, tau=1.2,
                        threshold=eer.threshold, seed=0, repeat_averaging=False)

for name, prov, pool in [("steal", mp_, pool_w), ("ind_model", bp, pool_w)]:
    trials = verify._collect_trials(prov, pool, true_t, tc)[0]
    sb = np.array([t.s_b for t in trials]); sw = np.array([t.s_w for t in trials])
    d = sw - 1.2 * sb
    print(f"{name}: Sb {sb.mean():.3f}+-{sb.std():.3f}  Sw {sw.mean():.3f}+-{sw.std():.3f}"
          f"  d {d.mean():+.3f}  Db {np.mean([t.d_b for t in trials]):.2f}"
          f"  Dw {np.mean([t.d_w for t in trials]):.2f}")
