"""Throwaway: small-scale EER grid over corpus knobs."""
import itertools, sys, time
import numpy as np
from cbwmark import audio, corpus, embedding, metrics, verify
from cbwmark import corpus as C
from cbwmark.config import RunConfig

cfg = RunConfig()
NSPK, NUTT, NENR = 40, 30, 20

def run_eer(seed=5):
    vecs, labels = [], []
    refs = {}
    for i in range(NSPK):
        prof = C.make_profile(f"s{i}", C.derive_seed(seed, f"spk/{i}"))
        en, pr = [], []
        for j in range(NUTT):
            w = C.synth_utterance(prof, cfg.duration_ms, cfg.sample_rate,
                                  C.derive_seed(seed, f"utt/{i}/{j}"))
            q = np.round(np.clip(w.samples, -1, 1) * 32767) / 32767.0
            w = audio.Waveform(q, cfg.sample_rate)
            f = audio.extract_features(w, cfg.n_mels)
            vecs.append(embedding.pool_features(f, cfg.pooling))
            labels.append(f"s{i}")
            ref = embedding.UtteranceRef(f"s{i}_u{j}", w)
            (en if j < NENR else pr).append(ref)
        refs[f"s{i}"] = (en, pr)
    model = embedding.train_extractor(np.stack(vecs), labels, pooling=cfg.pooling)
    prov = embedding.CachingProvider(embedding.BuiltinProvider(model))
    pool = verify.SpeakerPool(refs)
    return metrics.learn_threshold(pool, prov).eer

base = dict(BAND_GAIN_SD=C.BAND_GAIN_SD, BAND_JITTER_SD=C.BAND_JITTER_SD,
            LEVEL_SD=C.LEVEL_SD, MOD_DEPTH_BASE=C.MOD_DEPTH_BASE,
            MOD_DEPTH_SPEAKER_SD=C.MOD_DEPTH_SPEAKER_SD,
            MOD_DEPTH_JITTER_SD=C.MOD_DEPTH_JITTER_SD)

variants = {
    "base": {},
    "jit1.0": {"BAND_JITTER_SD": 1.0},
    "jit0.7": {"BAND_JITTER_SD": 0.7},
    "lvl1.5": {"LEVEL_SD": 1.5},
    "depjit0.8": {"MOD_DEPTH_JITTER_SD": 0.8},
    "depspk0.5": {"MOD_DEPTH_SPEAKER_SD": 0.5},
    "gain1.0": {"BAND_GAIN_SD": 1.0},
}
for name, over in variants.items():
    for k, v in {**base, **over}.items():
        setattr(C, k, v)
    t0 = time.time()
    e = run_eer()
    print(f"{name:12s} eer={e:.3f}  ({time.time()-t0:.0f}s)", flush=True)
