"""Throwaway pilot: realized pooled log-mel statistics of the synthesizer."""
import time
import numpy as np
from cbwmark import audio, corpus
from cbwmark.config import RunConfig

cfg = RunConfig()
sr = cfg.sample_rate
nspk, nutt = 12, 12
nv = corpus.n_voiced_bands(sr)
print("n_voiced:", nv)

t0 = time.time()
mean_rows, std_rows, labels, levels = [], [], [], []
for i in range(nspk):
    prof = corpus.make_profile(f"p{i}", corpus.derive_seed(7, f"spk/{i}"))
    for j in range(nutt):
        wav = corpus.synth_utterance(prof, cfg.duration_ms, sr,
                                     corpus.derive_seed(7, f"utt/{i}/{j}"))
        # emulate PCM16 round trip
        q = np.round(np.clip(wav.samples, -1, 1) * 32767) / 32767.0
        feats = audio.extract_features(audio.Waveform(q, sr), cfg.n_mels,
                                       cfg.frame_width_ms, cfg.frame_step_ms,
                                       cfg.vad_threshold_db)
        mean_rows.append(feats.frames.mean(axis=0))
        std_rows.append(feats.frames.std(axis=0))
        labels.append(i)
        levels.append(np.mean(feats.frames.mean(axis=0)[:nv]))
print(f"synth+feat: {(time.time()-t0)/nspk/nutt*1000:.1f} ms/utt")

M = np.array(mean_rows); S = np.array(std_rows)
lab = np.array(labels); lev = np.array(levels)

# level proxy: mean voiced log energy per utterance
print(f"level sd: {lev.std():.2f}")

# voiced-band structure after removing level
Mv = M[:, :nv] - lev[:, None]
spk_means = np.array([Mv[lab == i].mean(axis=0) for i in range(nspk)])
within = np.concatenate([Mv[lab == i] - spk_means[i] for i in range(nspk)])
print(f"band template sd: {spk_means.std():.3f} | band jitter sd: {within.std():.3f}")

# trigger zone and gap bands: want level-independent floor
for name, bands in [("gap", range(nv, 30)), ("trig", range(30, 40))]:
    Z = M[:, bands]
    corr = np.corrcoef(Z.mean(axis=1), lev)[0, 1]
    zs = np.array([Z[lab == i] - Z[lab == i].mean(axis=0) for i in range(nspk)])
    print(f"{name} bands: mean {Z.mean():.2f} within-sd {zs.std():.3f} "
          f"level corr {corr:.3f}")

# std rows, voiced region
Sv = S[:, :nv]
s_spk = np.array([Sv[lab == i].mean(axis=0) for i in range(nspk)])
s_within = np.concatenate([Sv[lab == i] - s_spk[i] for i in range(nspk)])
print(f"std rows: pop {Sv.mean():.3f}, between {s_spk.std():.3f}, "
      f"within {s_within.std():.3f}")
print(f"std trig zone: {S[:, 30:].mean():.3f} +- {S[:, 30:].std():.3f}")
