"""Throwaway end-to-end calibration driver (deleted before finishing)."""
import sys, time, tempfile, os
import numpy as np

from cbwmark import audio, corpus, embedding, metrics, verify, watermark
from cbwmark.config import RunConfig

t0 = time.time()
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
cfg = RunConfig(seed=seed)
work = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="cbwcal_")
print("work dir:", work, "seed:", seed)

src_dir = os.path.join(work, "corpus")
man_path = os.path.join(src_dir, "manifest.jsonl")
if not os.path.exists(man_path):
    man = corpus.synth_corpus(cfg.n_speakers, cfg.utterances_per_speaker,
                              cfg.duration_ms, cfg.sample_rate, cfg.seed, src_dir)
else:
    man = corpus.load_manifest(man_path)
print(f"corpus ready t={time.time()-t0:.1f}s entries={len(man.entries)}")

def pooled_dataset(manifest, manifest_path, split="train"):
    vecs, labels = [], []
    for e in manifest.entries:
        if e.split != split:
            continue
        wav = audio.load_wav(corpus.resolve_path(manifest_path, e))
        feats = audio.extract_features(wav, cfg.n_mels, cfg.frame_width_ms,
                                       cfg.frame_step_ms, cfg.vad_threshold_db)
        vecs.append(embedding.pool_features(feats, cfg.pooling))
        labels.append(e.speaker_id)
    return np.stack(vecs), labels

X, y = pooled_dataset(man, man_path)
print(f"features t={time.time()-t0:.1f}s shape={X.shape}")
benign = embedding.train_extractor(X, y, d_out=cfg.d_out, ridge=cfg.ridge, pooling=cfg.pooling)
benign_provider = embedding.CachingProvider(
    embedding.BuiltinProvider(benign, cfg.n_mels, cfg.frame_width_ms,
                              cfg.frame_step_ms, cfg.vad_threshold_db))

# benign pool for threshold learning and EER, 40 enroll / 20 probe
benign_pool = verify.SpeakerPool.from_manifest(man, man_path, n_enroll=50)
eer = metrics.learn_threshold(benign_pool, benign_provider)
print(f"benign EER={eer.eer:.3f} threshold={eer.threshold:.3f} t={time.time()-t0:.1f}s")

# watermark
def entry_embed(e):
    wav = audio.load_wav(corpus.resolve_path(man_path, e))
    feats = audio.extract_features(wav, cfg.n_mels, cfg.frame_width_ms,
                                   cfg.frame_step_ms, cfg.vad_threshold_db)
    return embedding.embed(benign, feats)

reps = watermark.speaker_representations(man, entry_embed)
assign = watermark.kmeans(reps, cfg.m_clusters, seed=corpus.derive_seed(cfg.seed, "kmeans"))
plan = watermark.build_trigger_plan(cfg.m_clusters, cfg.trigger_family, cfg.trigger_base_hz,
                                    cfg.trigger_spacing_hz, cfg.trigger_level_db,
                                    corpus.derive_seed(cfg.seed, "triggers"),
                                    cfg.trigger_duration_ms, cfg.sample_rate)
wm_dir = os.path.join(work, "marked")
if not os.path.exists(os.path.join(wm_dir, "manifest.jsonl")):
    wm = watermark.implant_cbw(man, man_path, assign, plan, cfg.gamma,
                               corpus.derive_seed(cfg.seed, "implant"), wm_dir)
    print(f"implanted {len(wm.modified)} utterances t={time.time()-t0:.1f}s")
wm_man_path = os.path.join(wm_dir, "manifest.jsonl")
wm_man = corpus.load_manifest(wm_man_path)

Xw, yw = pooled_dataset(wm_man, wm_man_path)
marked = embedding.train_extractor(Xw, yw, d_out=cfg.d_out, ridge=cfg.ridge, pooling=cfg.pooling)
marked_provider = embedding.CachingProvider(
    embedding.BuiltinProvider(marked, cfg.n_mels, cfg.frame_width_ms,
                              cfg.frame_step_ms, cfg.vad_threshold_db))
eer_m = metrics.learn_threshold(benign_pool, marked_provider)
print(f"marked EER={eer_m.eer:.3f} t={time.time()-t0:.1f}s")

true_trigs = verify.trigger_refs_from_waveforms(watermark.trigger_waveforms(plan, cfg.sample_rate))
ind_plan = watermark.build_trigger_plan(cfg.m_clusters, cfg.trigger_family,
                                        800.0, 80.0, cfg.trigger_level_db,
                                        corpus.derive_seed(cfg.seed, "ind-triggers"),
                                        cfg.trigger_duration_ms, cfg.sample_rate)
ind_trigs = verify.trigger_refs_from_waveforms(watermark.trigger_waveforms(ind_plan, cfg.sample_rate))

# verification pool drawn from the watermarked corpus
wm_pool = verify.SpeakerPool.from_manifest(wm_man, wm_man_path, n_enroll=50)
tc = verify.TrialConfig(n_enrolled=cfg.n_enrolled, k_probes=cfg.effective_k_probes,
                        m_trials=cfg.m_trials, tau=cfg.tau, alpha=cfg.alpha,
                        threshold=eer.threshold, seed=cfg.seed,
                        repeat_averaging=cfg.repeat_averaging)

suite = verify.scenario_suite(benign_provider, marked_provider, true_trigs,
                              ind_trigs, wm_pool, tc)
for sc in verify.SCENARIOS:
    line = f"{sc:20s}"
    for mode in ("similarity", "decision"):
        r = suite[sc][mode]
        line += f" | {mode} p={r.p_value:.2e} ({r.decision})"
    print(line)
print(f"done t={time.time()-t0:.1f}s")
