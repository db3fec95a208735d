"""Command-line interface.

Subcommands::

    respiq simulate  --out DIR [--scenes N] [--config C] [--seed S]
    respiq train     --manifest M --out MODEL.mvm [--r0 F] [--config C] [--seed S]
    respiq select    --recording R [--model MODEL.mvm] [--method NAME] [--truth T]
    respiq evaluate  --manifest M --model MODEL.mvm --out DIR [--ablation]
    respiq rr        --waveform W.csv [--fs HZ] [--spectral]

Every command is reproducible from (inputs, config, seed); resolved
configuration is echoed next to the outputs. Exit codes: 0 success,
2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import baselines, evaluation, figures, scoring
from .armodel import build_train_set, load_model, save_model, train
from .candidates import bank_to_csv, extract_candidates
from .config import RunConfig, load_config
from .errors import ConfigError, DataError, RespiqError
from .ingest import load_manifest, load_session, read_recording, read_truth
from .inversion import detect_inversion
from .simulator import make_corpus, write_corpus

METHODS = ("quality", "snr", "cfar", "variance", "oracle")


def _parse_band(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(part) for part in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--band expects LO,HI in Hz, got {text!r}") from exc
    if not 0.0 < lo < hi:
        raise ConfigError(f"--band must satisfy 0 < LO < HI, got {text!r}")
    return lo, hi


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "r0", None) is not None:
        cfg.r0 = args.r0
    if getattr(args, "r_th", None) is not None:
        cfg.inversion.r_th = args.r_th
    if getattr(args, "band", None) is not None:
        cfg.band_hz = _parse_band(args.band)
        cfg.cfar.band_hz = cfg.band_hz
    return cfg.validate()


def _echo_config(cfg: RunConfig, path: Path, extra: dict | None = None) -> None:
    data = cfg.to_dict()
    if extra:
        data.update(extra)
    path.write_text(json.dumps(data, indent=2, sort_keys=True))


def cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    spec = dataclasses.replace(cfg.corpus, seed=cfg.seed)
    if args.scenes is not None:
        spec = dataclasses.replace(spec, n_scenes=args.scenes)
    spec.validate()
    scenes = make_corpus(spec)
    out_dir = Path(args.out)
    manifest = write_corpus(scenes, out_dir)
    _echo_config(cfg, out_dir / "corpus_config.json", {"resolved_corpus": dataclasses.asdict(spec)})
    print(f"wrote {len(scenes)} scenes to {out_dir} (seed {spec.seed}, manifest {manifest.name})")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    sessions = []
    for session in load_manifest(args.manifest):
        rec, truth = load_session(session)
        if truth is None:
            continue
        sessions.append((extract_candidates(rec, cfg.extraction), truth))
    from .errors import NoQualifyingSequences

    if not sessions:
        raise NoQualifyingSequences("manifest has no sessions with ground truth")
    train_set = build_train_set(sessions, r0=cfg.r0, hp=cfg.model)
    model, curve = train(train_set, cfg.model, seed=cfg.seed)
    out = Path(args.out)
    save_model(model, out)
    loss_path = out.with_suffix(out.suffix + ".loss.csv")
    with open(loss_path, "w") as fh:
        fh.write("epoch,mse\n")
        for epoch, mse in enumerate(curve):
            fh.write(f"{epoch},{mse:.9g}\n")
    _echo_config(cfg, out.with_suffix(out.suffix + ".config.json"))
    print(
        json.dumps(
            {
                "checkpoint": str(out),
                "windows": len(train_set),
                "epochs": len(curve),
                "final_mse": curve[-1] if curve else None,
            }
        )
    )
    return 0


def _baseline_waveform(bank, choice, cfg, flip_policy: str):
    cand = bank.by_key(choice.selected_key)
    flipped = False
    wave = cand.samples
    if flip_policy == "post" or (flip_policy == "fallback" and choice.used_fallback):
        verdict = detect_inversion(cand.samples, cfg=cfg.inversion)
        if verdict.inverted and verdict.confident:
            from . import dsp

            wave = dsp.min_max_normalize(-cand.samples)
            flipped = True
    return cand, wave, flipped


def cmd_select(args) -> int:
    cfg = _resolve_config(args)
    rec = read_recording(args.recording)
    bank = extract_candidates(rec, cfg.extraction)
    if args.dump_candidates:
        bank_to_csv(bank, args.dump_candidates)
    method = args.method
    if method == "quality":
        if not args.model:
            raise ConfigError("--model is required for the quality method")
        model = load_model(args.model)
        result = scoring.select(bank, model, inv_cfg=cfg.inversion)
        payload = {"method": method}
        payload.update(result.to_dict())
        wave = result.selected.samples
    else:
        if method == "snr":
            choice = baselines.select_snr(bank, cfg.band_hz, inv_cfg=cfg.inversion)
            cand, wave, flipped = _baseline_waveform(bank, choice, cfg, "fallback")
        elif method == "cfar":
            choice = baselines.select_cfar(bank, cfg.cfar)
            cand, wave, flipped = _baseline_waveform(bank, choice, cfg, "post")
        elif method == "variance":
            choice = baselines.select_variance(bank)
            cand, wave, flipped = _baseline_waveform(bank, choice, cfg, "post")
        elif method == "oracle":
            if not args.truth:
                raise ConfigError("--truth is required for the oracle method")
            truth = read_truth(args.truth)
            choice = baselines.select_oracle(bank, truth)
            cand, wave, flipped = bank.by_key(choice.selected_key), bank.by_key(choice.selected_key).samples, False
        else:
            raise ConfigError(f"unknown method {method!r}")
        payload = {
            "method": method,
            "selected": choice.selected_key,
            "score": choice.score_raw if np.isfinite(choice.score_raw) else None,
            "flipped": flipped,
        }
    if args.out:
        scoring.waveform_to_csv(wave, args.out, header=payload["selected"])
        payload["waveform_csv"] = str(args.out)
    print(json.dumps(payload, indent=2))
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve_config(args)
    scenes = evaluation.scenes_from_manifest(args.manifest)
    model = load_model(args.model)
    eval_cfg = evaluation.EvalConfig(
        extraction=cfg.extraction,
        inversion=cfg.inversion,
        cfar=cfg.cfar,
        band_hz=cfg.band_hz,
        ablation=args.ablation,
    )
    report = evaluation.evaluate_methods(scenes, model, eval_cfg)
    out_dir = Path(args.out)
    paths = evaluation.export_report(report, out_dir)
    _echo_config(cfg, out_dir / "resolved_config.json", {"ablation": args.ablation, "model": str(args.model)})
    if not args.no_figures:
        figures.render_report_figures(report, out_dir)
    summary = {m: round(report.per_method[m]["mean_r"], 4) for m in report.methods}
    print(json.dumps({"out": str(out_dir), "scenes": len(scenes), "mean_r": summary}))
    return 0


def _read_waveform_csv(path) -> np.ndarray:
    values = []
    with open(path) as fh:
        for line in fh:
            token = line.strip().split(",")[0]
            if not token:
                continue
            try:
                values.append(float(token))
            except ValueError:
                continue  # header line
    if not values:
        raise DataError(f"{path}: no numeric samples found")
    return np.asarray(values)


def cmd_rr(args) -> int:
    cfg = _resolve_config(args)
    wave = _read_waveform_csv(args.waveform)
    if args.spectral:
        rr = evaluation.estimate_rr_spectral(wave, args.fs, cfg.band_hz)
    else:
        rr = evaluation.estimate_rr(wave, args.fs)
    print(json.dumps({"rr_bpm": round(rr, 3), "method": "spectral" if args.spectral else "peak-interval"}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="respiq",
        description="Respiration waveform extraction from IR-UWB recordings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--r-th", dest="r_th", type=float, help="inversion width-ratio threshold")
        p.add_argument("--band", help="respiration band LO,HI in Hz")

    p = sub.add_parser("simulate", help="generate a synthetic corpus")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scenes", type=int, help="override corpus scene count")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the quality predictor")
    common(p)
    p.add_argument("--manifest", required=True, help="session manifest JSON")
    p.add_argument("--out", required=True, help="checkpoint path (.mvm)")
    p.add_argument("--r0", type=float, help="training-set correlation threshold")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("select", help="pick the best waveform from a recording")
    common(p)
    p.add_argument("--recording", required=True, help="MVR1 recording")
    p.add_argument("--model", help="MVM1 checkpoint (required for --method quality)")
    p.add_argument("--method", choices=METHODS, default="quality")
    p.add_argument("--truth", help="MVG1 truth file (oracle method only)")
    p.add_argument("--out", help="write the selected waveform CSV here")
    p.add_argument("--dump-candidates", help="write the full candidate bank CSV here")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="compare selection methods over a corpus")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--ablation", action="store_true", help="also run methods without inversion handling")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rr", help="respiration rate of a waveform CSV")
    common(p)
    p.add_argument("--waveform", required=True)
    p.add_argument("--fs", type=float, default=50.0, help="sample rate in Hz")
    p.add_argument("--spectral", action="store_true", help="use the spectral estimator")
    p.set_defaults(func=cmd_rr)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RespiqError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
