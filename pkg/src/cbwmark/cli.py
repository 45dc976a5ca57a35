"""Command-line pipeline: corpus synthesis, feature extraction, extractor
training, watermark implanting, enrollment evaluation, ownership
verification, and the theoretical bound tools, each as a subcommand over one
JSON config.

Every artifact embeds the resolved configuration, all randomness derives
from the root seed by component name, and re-running a command with the same
config and seed reproduces its outputs byte for byte (wall-clock metadata is
confined to a separate sidecar field).
"""

import argparse
import csv
import json
import logging
import os
import sys
import time

import numpy as np

from . import audio, corpus, embedding, metrics, theory, verify, watermark
from .config import RunConfig
from .errors import (
    CbwError,
    DuplicateId,
    InvalidConfig,
    InvalidInput,
    MalformedManifest,
    MissingFile,
)

OUTPUT_VERSION = 1
EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2

_VALIDATION_ERRORS = (InvalidConfig, InvalidInput, MalformedManifest,
                      MissingFile, DuplicateId)

log = logging.getLogger("cbwmark")


def _setup_logging() -> None:
    level = os.environ.get("CBW_LOG_LEVEL", "warn").lower()
    mapping = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}
    if level not in mapping:
        raise InvalidConfig(f"CBW_LOG_LEVEL must be one of {sorted(mapping)}, "
                            f"got {level!r}")
    logging.basicConfig(stream=sys.stderr, level=mapping[level],
                        format="%(levelname)s %(name)s: %(message)s")


def _write_json(path, payload: dict, meta: dict | None = None) -> None:
    """Write a versioned JSON document; wall-clock data only in `meta`."""
    doc = {"version": OUTPUT_VERSION, **payload}
    doc["meta"] = dict(meta or {})
    doc["meta"].setdefault("created_utc",
                           time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_csv(path, rows: list, fieldnames: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in fieldnames})


# --- pipeline steps (shared by subcommands and tests) ---------------------------


def build_corpus(cfg: RunConfig, out_dir):
    """Synthesize the corpus unless its manifest already exists."""
    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    if os.path.exists(manifest_path):
        log.info("corpus already present at %s", manifest_path)
        return corpus.load_manifest(manifest_path), manifest_path
    man = corpus.synth_corpus(cfg.n_speakers, cfg.utterances_per_speaker,
                              cfg.duration_ms, cfg.sample_rate, cfg.seed, out_dir)
    return man, manifest_path


def pooled_dataset(cfg: RunConfig, manifest, manifest_path, split="train"):
    """Pooled per-utterance statistics and labels for extractor training."""
    vectors, labels, ids = [], [], []
    for entry in manifest.entries:
        if split is not None and entry.split != split:
            continue
        wav = audio.load_wav(corpus.resolve_path(manifest_path, entry))
        feats = audio.extract_features(wav, cfg.n_mels, cfg.frame_width_ms,
                                       cfg.frame_step_ms, cfg.vad_threshold_db)
        vectors.append(embedding.pool_features(feats, cfg.pooling))
        labels.append(entry.speaker_id)
        ids.append(entry.utterance_id)
    return np.stack(vectors), labels, ids


def write_pooled(path, vectors: np.ndarray, labels: list, ids: list) -> None:
    with open(path, "w") as fh:
        for vec, label, uid in zip(vectors, labels, ids):
            fh.write(json.dumps({"utterance_id": uid, "speaker_id": label,
                                 "vector": vec.tolist()}) + "\n")


def read_pooled(path):
    vectors, labels, ids = [], [], []
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                vectors.append(np.asarray(rec["vector"], dtype=np.float64))
                labels.append(rec["speaker_id"])
                ids.append(rec["utterance_id"])
    except (json.JSONDecodeError, KeyError) as e:
        raise MalformedManifest(f"{path}: {e}") from e
    if not vectors:
        raise MalformedManifest(f"{path}: no feature records")
    return np.stack(vectors), labels, ids


def make_provider(cfg: RunConfig, model: embedding.ExtractorModel):
    return embedding.CachingProvider(
        embedding.BuiltinProvider(model, cfg.n_mels, cfg.frame_width_ms,
                                  cfg.frame_step_ms, cfg.vad_threshold_db))


def train_model(cfg: RunConfig, manifest, manifest_path) -> embedding.ExtractorModel:
    vectors, labels, _ = pooled_dataset(cfg, manifest, manifest_path)
    return embedding.train_extractor(vectors, labels, d_out=cfg.d_out,
                                     ridge=cfg.ridge, pooling=cfg.pooling)


def implant_watermark(cfg: RunConfig, manifest, manifest_path,
                      model: embedding.ExtractorModel, out_dir, method="cbw"):
    """Cluster speakers on benign embeddings and implant per-cluster triggers
    (or a single trigger with relabeling for the one-to-all baseline)."""
    provider = make_provider(cfg, model)

    def embed_entry(entry):
        wav = audio.load_wav(corpus.resolve_path(manifest_path, entry))
        return provider.embed(embedding.UtteranceRef(
            utterance_id=entry.utterance_id, waveform=wav))

    plan = watermark.build_trigger_plan(
        cfg.m_clusters, cfg.trigger_family, cfg.trigger_base_hz,
        cfg.trigger_spacing_hz, cfg.trigger_level_db,
        corpus.derive_seed(cfg.seed, "triggers"),
        cfg.trigger_duration_ms, cfg.sample_rate)
    if method == "cbw":
        reps = watermark.speaker_representations(manifest, embed_entry)
        assignment = watermark.kmeans(reps, cfg.m_clusters,
                                      seed=corpus.derive_seed(cfg.seed, "kmeans"))
        wm = watermark.implant_cbw(manifest, manifest_path, assignment, plan,
                                   cfg.gamma, corpus.derive_seed(cfg.seed, "implant"),
                                   out_dir)
    elif method == "o2a":
        wm = watermark.implant_o2a(manifest, manifest_path, plan.triggers[0],
                                   cfg.gamma, corpus.derive_seed(cfg.seed, "implant"),
                                   out_dir)
    else:
        raise InvalidConfig(f"unknown watermark method {method!r}")
    return wm, plan


def independent_trigger_plan(cfg: RunConfig) -> watermark.TriggerPlan:
    """A trigger set an honest third party might use: same family, disjoint
    frequencies (placed below the true set's range)."""
    return watermark.build_trigger_plan(
        cfg.m_clusters, cfg.trigger_family, 800.0, 80.0, cfg.trigger_level_db,
        corpus.derive_seed(cfg.seed, "ind-triggers"),
        cfg.trigger_duration_ms, cfg.sample_rate)


def run_pipeline(cfg: RunConfig, work_dir, wsr_queries: int = 200) -> dict:
    """Full end-to-end run: benign pipeline, watermarking, the three audit
    scenarios in both modes, and 1-to-1 vs 1-to-5 watermark success rates.

    Artifacts are cached under work_dir, so a re-run (or a run after a
    partial failure) reuses whatever already exists.
    """
    t_start = time.monotonic()
    os.makedirs(work_dir, exist_ok=True)
    man, man_path = build_corpus(cfg, os.path.join(work_dir, "corpus"))
    log.info("corpus ready (%d entries)", len(man.entries))

    benign_model = train_model(cfg, man, man_path)
    benign_provider = make_provider(cfg, benign_model)
    benign_pool = verify.SpeakerPool.from_manifest(man, man_path,
                                                   n_enroll=cfg.pool_n_enroll)
    operating = metrics.learn_threshold(benign_pool, benign_provider)
    log.info("benign EER %.3f threshold %.3f", operating.eer, operating.threshold)

    marked_dir = os.path.join(work_dir, "marked")
    wm_path = os.path.join(marked_dir, "watermark.json")
    if os.path.exists(wm_path):
        wm = watermark.WatermarkManifest.load(wm_path)
        plan = wm.plan
    else:
        wm, plan = implant_watermark(cfg, man, man_path, benign_model, marked_dir)
    wm_man_path = os.path.join(marked_dir, "manifest.jsonl")
    wm_man = corpus.load_manifest(wm_man_path)

    marked_model = train_model(cfg, wm_man, wm_man_path)
    marked_provider = make_provider(cfg, marked_model)
    marked_eer = metrics.learn_threshold(benign_pool, marked_provider)
    log.info("marked EER %.3f", marked_eer.eer)

    true_triggers = verify.trigger_refs_from_waveforms(
        watermark.trigger_waveforms(plan, cfg.sample_rate))
    ind_triggers = verify.trigger_refs_from_waveforms(
        watermark.trigger_waveforms(independent_trigger_plan(cfg), cfg.sample_rate))

    pool = verify.SpeakerPool.from_manifest(wm_man, wm_man_path,
                                            n_enroll=cfg.pool_n_enroll)
    trial_cfg = verify.TrialConfig(
        n_enrolled=cfg.n_enrolled, k_probes=cfg.effective_k_probes,
        m_trials=cfg.m_trials, tau=cfg.tau, alpha=cfg.alpha,
        threshold=operating.threshold, seed=cfg.seed,
        repeat_averaging=cfg.repeat_averaging)
    suite = verify.scenario_suite(benign_provider, marked_provider,
                                  true_triggers, ind_triggers, pool, trial_cfg)

    trigger_embeddings = [marked_provider.embed(r) for r in true_triggers]
    wsr = {}
    for n_enrolled in (1, 5):
        res = metrics.compute_wsr(pool, marked_provider, trigger_embeddings,
                                  n_enrolled, operating.threshold, wsr_queries,
                                  seed=corpus.derive_seed(cfg.seed, f"wsr/{n_enrolled}"))
        wsr[n_enrolled] = res
    return {
        "config": cfg,
        "corpus_manifest_path": man_path,
        "marked_manifest_path": wm_man_path,
        "benign_model": benign_model,
        "marked_model": marked_model,
        "benign_eer": operating,
        "marked_eer": marked_eer,
        "watermark": wm,
        "suite": suite,
        "wsr": wsr,
        "elapsed_s": time.monotonic() - t_start,
    }


# --- subcommand handlers --------------------------------------------------------


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {name: getattr(args, name) for name in _OVERRIDE_FIELDS
                 if getattr(args, name, None) is not None}
    if overrides:
        cfg = RunConfig.from_dict({**cfg.to_dict(), **overrides})
    cfg.validate()
    return cfg


def cmd_synth_corpus(args) -> int:
    cfg = _load_config(args)
    out_dir = os.path.join(args.out, "corpus")
    man, man_path = build_corpus(cfg, out_dir)
    _write_json(os.path.join(args.out, "synth_corpus.json"), {
        "config": cfg.to_dict(),
        "manifest_path": man_path,
        "n_entries": len(man.entries),
        "n_speakers": len(man.speakers()),
    })
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = _load_config(args)
    man_path = args.manifest or os.path.join(args.out, "corpus", "manifest.jsonl")
    man = corpus.load_manifest(man_path)
    vectors, labels, ids = pooled_dataset(cfg, man, man_path, split=args.split)
    out_path = args.features or os.path.join(args.out, "features.jsonl")
    write_pooled(out_path, vectors, labels, ids)
    _write_json(os.path.join(args.out, "extract.json"), {
        "config": cfg.to_dict(),
        "manifest_path": man_path,
        "features_path": out_path,
        "n_vectors": len(ids),
        "dim": int(vectors.shape[1]),
    })
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    feat_path = args.features or os.path.join(args.out, "features.jsonl")
    vectors, labels, _ = read_pooled(feat_path)
    model = embedding.train_extractor(vectors, labels, d_out=cfg.d_out,
                                      ridge=cfg.ridge, pooling=cfg.pooling)
    model_path = args.model or os.path.join(args.out, "model.json")
    model.save(model_path)
    _write_json(os.path.join(args.out, "train.json"), {
        "config": cfg.to_dict(),
        "features_path": feat_path,
        "model_path": model_path,
        "d_out": model.d_out,
    })
    return EXIT_OK


def cmd_watermark(args) -> int:
    cfg = _load_config(args)
    man_path = args.manifest or os.path.join(args.out, "corpus", "manifest.jsonl")
    man = corpus.load_manifest(man_path)
    model = embedding.ExtractorModel.load(
        args.model or os.path.join(args.out, "model.json"))
    marked_dir = os.path.join(args.out, "marked")
    wm, _ = implant_watermark(cfg, man, man_path, model, marked_dir,
                              method=args.method)
    _write_json(os.path.join(args.out, "watermark_summary.json"), {
        "config": cfg.to_dict(),
        "method": wm.method,
        "marked_dir": marked_dir,
        "n_modified": len(wm.modified),
        "n_clusters": len(set(wm.clusters.values())) if wm.clusters else 0,
    })
    return EXIT_OK


def cmd_enroll_eval(args) -> int:
    cfg = _load_config(args)
    man_path = args.manifest or os.path.join(args.out, "corpus", "manifest.jsonl")
    man = corpus.load_manifest(man_path)
    model = embedding.ExtractorModel.load(
        args.model or os.path.join(args.out, "model.json"))
    provider = make_provider(cfg, model)
    pool = verify.SpeakerPool.from_manifest(man, man_path,
                                            n_enroll=cfg.pool_n_enroll)
    operating = metrics.learn_threshold(pool, provider)
    payload = {
        "config": cfg.to_dict(),
        "manifest_path": man_path,
        "eer": operating.eer,
        "threshold": operating.threshold,
        "n_genuine": operating.n_genuine,
        "n_impostor": operating.n_impostor,
    }
    if args.watermark:
        wm = watermark.WatermarkManifest.load(args.watermark)
        refs = verify.trigger_refs_from_waveforms(
            watermark.trigger_waveforms(wm.plan, cfg.sample_rate))
        trigger_embeddings = [provider.embed(r) for r in refs]
        payload["wsr"] = {}
        for n_enrolled in args.wsr_n:
            res = metrics.compute_wsr(
                pool, provider, trigger_embeddings, n_enrolled,
                operating.threshold, args.wsr_queries,
                seed=corpus.derive_seed(cfg.seed, f"wsr/{n_enrolled}"))
            payload["wsr"][str(n_enrolled)] = {
                "wsr": res.wsr, "scenario": res.scenario,
                "n_enrolled": res.n_enrolled, "n_queries": res.n_queries,
            }
    _write_json(os.path.join(args.out, "enroll_eval.json"), payload)
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    if args.mode == "decision" and args.threshold is None:
        raise InvalidConfig("verify --mode decision requires --threshold "
                            "(config path: threshold)")
    man_path = args.manifest or os.path.join(args.out, "marked", "manifest.jsonl")
    man = corpus.load_manifest(man_path)
    if args.embeddings:
        provider = embedding.FileStoreProvider(args.embeddings)
        load_audio = False
    elif args.endpoint:
        provider = embedding.CachingProvider(embedding.RemoteProvider(args.endpoint))
        load_audio = True
    else:
        model = embedding.ExtractorModel.load(
            args.model or os.path.join(args.out, "model.json"))
        provider = make_provider(cfg, model)
        load_audio = True
    wm = watermark.WatermarkManifest.load(
        args.watermark or os.path.join(args.out, "marked", "watermark.json"))
    trigger_refs = verify.trigger_refs_from_waveforms(
        watermark.trigger_waveforms(wm.plan, cfg.sample_rate))
    pool = verify.SpeakerPool.from_manifest(man, man_path,
                                            n_enroll=cfg.pool_n_enroll,
                                            load_audio=load_audio)
    trial_cfg = verify.TrialConfig(
        n_enrolled=cfg.n_enrolled, k_probes=cfg.effective_k_probes,
        m_trials=cfg.m_trials, tau=cfg.tau, alpha=cfg.alpha,
        threshold=args.threshold, seed=cfg.seed,
        repeat_averaging=cfg.repeat_averaging)
    if args.mode == "similarity":
        report = verify.verify_similarity(provider, pool, trigger_refs, trial_cfg)
    else:
        report = verify.verify_decision(provider, pool, trigger_refs, trial_cfg)
    _write_json(os.path.join(args.out, f"verify_{args.mode}.json"), {
        "config": cfg.to_dict(),
        "report": json.loads(report.to_json()),
    })
    # the decision is data, not an error: always exit 0 when the run completes
    return EXIT_OK


def cmd_bound(args) -> int:
    cfg = _load_config(args)
    inp = theory.BoundInput(m=args.m if args.m is not None else cfg.m_trials,
                            alpha=args.alpha if args.alpha is not None else cfg.alpha,
                            p_beta_tau=args.p)
    res = theory.wsr_bound(inp)
    rows = [{"m": inp.m, "alpha": inp.alpha, "p_beta_tau": inp.p_beta_tau,
             "w_min": res.w_min}]
    _write_json(os.path.join(args.out, "bound.json"), {
        "config": cfg.to_dict(),
        "m": inp.m, "alpha": inp.alpha, "p_beta_tau": inp.p_beta_tau,
        "w_min": res.w_min, "t_quantile": res.t_quantile_used,
    })
    _write_csv(os.path.join(args.out, "bound.csv"), rows,
               ["m", "alpha", "p_beta_tau", "w_min"])
    print(json.dumps({"w_min": res.w_min}))
    return EXIT_OK


def cmd_mc_validate(args) -> int:
    cfg = _load_config(args)
    inp = theory.BoundInput(m=args.m if args.m is not None else cfg.m_trials,
                            alpha=args.alpha if args.alpha is not None else cfg.alpha,
                            p_beta_tau=args.p)
    if args.grid:
        grid = [float(tok) for tok in args.grid.split(",")]
    else:
        w_min = theory.wsr_bound(inp).w_min
        grid = sorted({inp.p_beta_tau, w_min, min(w_min + 0.1, 1.0)})
    rows = theory.mc_validate_bound(inp, grid, n_sims=args.n_sims,
                                    seed=corpus.derive_seed(cfg.seed, "mc-validate"))
    _write_json(os.path.join(args.out, "mc_validate.json"), {
        "config": cfg.to_dict(),
        "m": inp.m, "alpha": inp.alpha, "p_beta_tau": inp.p_beta_tau,
        "rows": rows,
    })
    _write_csv(os.path.join(args.out, "mc_validate.csv"), rows,
               ["w", "w_min", "empirical_rejection_rate"])
    return EXIT_OK


def cmd_scenario_suite(args) -> int:
    cfg = _load_config(args)
    result = run_pipeline(cfg, args.out, wsr_queries=args.wsr_queries)
    payload = {
        "config": cfg.to_dict(),
        "benign_eer": result["benign_eer"].eer,
        "marked_eer": result["marked_eer"].eer,
        "threshold": result["benign_eer"].threshold,
        "wsr": {str(n): r.wsr for n, r in result["wsr"].items()},
        "scenarios": {
            scenario: {mode: json.loads(report.to_json())
                       for mode, report in by_mode.items()}
            for scenario, by_mode in result["suite"].items()
        },
    }
    _write_json(os.path.join(args.out, "scenario_suite.json"), payload,
                meta={"elapsed_s": round(result["elapsed_s"], 3)})
    return EXIT_OK


# --- argument parsing -----------------------------------------------------------

_OVERRIDE_FIELDS = tuple(RunConfig.__dataclass_fields__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", default=".", help="output directory")
    for name, field in RunConfig.__dataclass_fields__.items():
        flag = "--" + name.replace("_", "-")
        if field.type in ("int", "int | None"):
            parser.add_argument(flag, dest=name, type=int, default=None,
                                help=argparse.SUPPRESS)
        elif field.type in ("float", "float | None"):
            parser.add_argument(flag, dest=name, type=float, default=None,
                                help=argparse.SUPPRESS)
        elif field.type == "bool":
            parser.add_argument(flag, dest=name, type=lambda s: s == "true",
                                choices=None, default=None, help=argparse.SUPPRESS)
        else:
            parser.add_argument(flag, dest=name, default=None,
                                help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbwmark",
        description="Dataset watermarking and ownership verification for "
                    "speaker-verification corpora.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-corpus", help="generate the synthetic corpus")
    _add_common(p)
    p.set_defaults(handler=cmd_synth_corpus)

    p = sub.add_parser("extract", help="pooled features for a manifest")
    _add_common(p)
    p.add_argument("--manifest")
    p.add_argument("--features", help="output feature file")
    p.add_argument("--split", default="train", choices=("train", "test"))
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("train", help="train the speaker embedding extractor")
    _add_common(p)
    p.add_argument("--features")
    p.add_argument("--model", help="output model file")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("watermark", help="implant a dataset watermark")
    _add_common(p)
    p.add_argument("--manifest")
    p.add_argument("--model")
    p.add_argument("--method", default="cbw", choices=("cbw", "o2a"))
    p.set_defaults(handler=cmd_watermark)

    p = sub.add_parser("enroll-eval",
                       help="EER operating point and watermark success rate")
    _add_common(p)
    p.add_argument("--manifest")
    p.add_argument("--model")
    p.add_argument("--watermark", help="watermark manifest for WSR")
    p.add_argument("--wsr-n", type=int, nargs="*", default=(1, 5))
    p.add_argument("--wsr-queries", type=int, default=200)
    p.set_defaults(handler=cmd_enroll_eval)

    p = sub.add_parser("verify", help="run one ownership-verification audit")
    _add_common(p)
    p.add_argument("--mode", required=True, choices=("similarity", "decision"))
    p.add_argument("--manifest", help="pool manifest (default: marked corpus)")
    p.add_argument("--model")
    p.add_argument("--embeddings", help="precomputed embedding store")
    p.add_argument("--endpoint", help="remote embedding endpoint URL")
    p.add_argument("--watermark")
    p.add_argument("--threshold", type=float)
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("bound", help="minimum detectable watermark success rate")
    _add_common(p)
    p.add_argument("--m", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--p", type=float, required=True, help="null pass rate")
    p.set_defaults(handler=cmd_bound)

    p = sub.add_parser("mc-validate", help="Monte Carlo check of the bound")
    _add_common(p)
    p.add_argument("--m", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--grid", help="comma-separated true success rates")
    p.add_argument("--n-sims", type=int, default=10000)
    p.set_defaults(handler=cmd_mc_validate)

    p = sub.add_parser("scenario-suite",
                       help="end-to-end pipeline and the three audit scenarios")
    _add_common(p)
    p.add_argument("--wsr-queries", type=int, default=200)
    p.set_defaults(handler=cmd_scenario_suite)

    return parser


def main(argv=None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        os.makedirs(args.out, exist_ok=True)
        return args.handler(args)
    except _VALIDATION_ERRORS as e:
        log.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except CbwError as e:
        log.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
