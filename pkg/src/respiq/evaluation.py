"""Evaluation harness: per-method correlation statistics and rate errors.

Runs every selection method over a corpus of (recording, truth) scenes,
applies each method's inversion policy (pre-filtering for the quality
selector and SNR, post-flip for variance and CFAR), and aggregates
correlation-with-truth statistics, empirical CDFs, and downstream
respiration-rate errors. With ``ablation`` enabled, every method is also
run with its inversion handling disabled so the detector's contribution
can be isolated.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, dsp, scoring
from .armodel import ArModel
from .candidates import CandidateBank, ExtractionConfig, extract_candidates
from .errors import EmptyCorpus, IoFailure, TooFewPeaks, TooShort
from .ingest import GroundTruthWaveform, SessionManifest, load_manifest, load_session
from .inversion import InversionConfig, bank_verdicts, prefilter_bank

BASE_METHODS = ["oracle", "quality", "snr", "cfar", "variance"]
ABLATION_METHODS = ["quality_noinv", "snr_noinv", "cfar_noinv", "variance_noinv"]


@dataclass
class EvalScene:
    scene_id: str
    recording: object  # UwbRecording
    truth: GroundTruthWaveform


@dataclass
class EvalConfig:
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    inversion: InversionConfig = field(default_factory=InversionConfig)
    cfar: baselines.CfarConfig = field(default_factory=baselines.CfarConfig)
    band_hz: tuple[float, float] = baselines.RESPIRATION_BAND_HZ
    ablation: bool = False


@dataclass
class EvalReport:
    methods: list[str]
    scene_rows: list[dict]  # scene_id, method, selected_key, r_with_truth
    rr_rows: list[dict]  # scene_id, method, rr_est_bpm, rr_true_bpm, abs_err_bpm
    scored_rows: list[dict]  # scene_id, candidate_key, score, r_with_truth
    per_method: dict[str, dict]

    def mean_r(self, method: str) -> float:
        return self.per_method[method]["mean_r"]


def estimate_rr(y, sample_rate_hz: float, savgol_order: int = 5, savgol_frame: int = 101, prominence: float = 0.1) -> float:
    """Respiration rate in bpm from the mean inter-peak interval.

    The waveform is normalized, smoothed, and peak-detected; at least two
    peaks are required.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.size < savgol_frame:
        raise TooShort(f"need at least {savgol_frame} samples, got {y.size}")
    smooth = dsp.savitzky_golay(dsp.min_max_normalize(y), savgol_order, savgol_frame)
    peaks = dsp.find_peaks(smooth, prominence)
    if len(peaks) < 2:
        raise TooFewPeaks(f"found {len(peaks)} peaks, need at least 2")
    return float(60.0 * sample_rate_hz / np.mean(np.diff(peaks.indices)))


def estimate_rr_spectral(y, sample_rate_hz: float, band_hz=baselines.RESPIRATION_BAND_HZ) -> float:
    """Cross-check rate estimate: the strongest in-band spectral line."""
    freqs, power = dsp.power_spectrum(y, sample_rate_hz)
    mask = (freqs >= band_hz[0]) & (freqs <= band_hz[1])
    if not mask.any():
        raise TooFewPeaks("frequency resolution too coarse for the band")
    return float(freqs[mask][np.argmax(power[mask])] * 60.0)


def scenes_from_manifest(manifest_path) -> list[EvalScene]:
    """Load every session of a manifest as an evaluation scene (truth required)."""
    sessions = load_manifest(manifest_path)
    scenes = []
    for session in sessions:
        if session.truth_path is None:
            continue
        rec, truth = load_session(session)
        scenes.append(EvalScene(scene_id=session.session_id, recording=rec, truth=truth))
    return scenes


def _r_or_zero(samples, truth) -> float:
    r = dsp.pearson_r(samples, truth)
    return 0.0 if r is None else r


def _flip(samples: np.ndarray) -> np.ndarray:
    return dsp.min_max_normalize(-samples)


def _method_waveforms(bank: CandidateBank, model: ArModel, cfg: EvalConfig, methods: list[str]):
    """Selected (key, waveform) per method, plus the quality score table."""
    verdicts = bank_verdicts(bank, cfg=cfg.inversion)
    kept, _ = prefilter_bank(bank, cfg=cfg.inversion, verdicts=verdicts)
    verdict_of = {c.key: v for c, v in zip(bank.candidates, verdicts)}
    need_all_scores = any(m.startswith("quality_noinv") for m in methods)
    score_pool = bank if (need_all_scores or len(kept) == 0) else kept
    scores, _ = scoring.score_many(model, [c.samples for c in score_pool.candidates])
    score_of = dict(zip([c.key for c in score_pool.candidates], scores))

    def postflip_if_inverted(cand):
        v = verdict_of[cand.key]
        return _flip(cand.samples) if (v.inverted and v.confident) else cand.samples

    kept_keys = {c.key for c in kept.candidates}

    def best_by_score(pool):
        keys = [c.key for c in pool.candidates]
        vals = np.array([score_of[k] for k in keys])
        return pool.candidates[scoring.argmax_canonical(vals)]

    out = {}
    for method in methods:
        if method == "oracle":
            continue  # needs the truth; the caller fills it in
        if method == "quality":
            if len(kept):
                cand = best_by_score(kept)
                out[method] = (cand.key, cand.samples, float(score_of[cand.key]))
            else:
                cand = best_by_score(bank)
                out[method] = (cand.key, _flip(cand.samples), float(score_of[cand.key]))
        elif method == "quality_noinv":
            cand = best_by_score(bank)
            out[method] = (cand.key, cand.samples, float(score_of[cand.key]))
        elif method == "snr":
            choice = baselines.select_snr(bank, cfg.band_hz, inv_cfg=cfg.inversion)
            cand = bank.by_key(choice.selected_key)
            wave = postflip_if_inverted(cand) if choice.used_fallback else cand.samples
            out[method] = (cand.key, wave, choice.score_raw)
        elif method == "snr_noinv":
            pool_snrs = [baselines.band_snr(c.raw_samples, bank.sample_rate_hz, cfg.band_hz) for c in bank.candidates]
            cand = bank.candidates[int(np.argmax(pool_snrs))]
            out[method] = (cand.key, cand.samples, float(np.max(pool_snrs)))
        elif method in ("cfar", "cfar_noinv"):
            choice = baselines.select_cfar(bank, cfg.cfar)
            cand = bank.by_key(choice.selected_key)
            wave = cand.samples if method.endswith("noinv") else postflip_if_inverted(cand)
            out[method] = (cand.key, wave, choice.score_raw)
        elif method in ("variance", "variance_noinv"):
            choice = baselines.select_variance(bank)
            cand = bank.by_key(choice.selected_key)
            wave = cand.samples if method.endswith("noinv") else postflip_if_inverted(cand)
            out[method] = (cand.key, wave, choice.score_raw)
        else:
            raise ValueError(f"unknown method {method!r}")
    # Diagnostics mirror the operational scoring pass: only candidates
    # that survive the inversion prefilter carry a quality score.
    quality_scores = {k: float(score_of[k]) for k in score_of if k in kept_keys}
    return out, quality_scores


def evaluate_methods(scenes: list[EvalScene], model: ArModel, cfg: EvalConfig | None = None) -> EvalReport:
    """Run all methods over the corpus and aggregate the comparison report."""
    cfg = cfg or EvalConfig()
    if not scenes:
        raise EmptyCorpus("no scenes to evaluate")
    methods = BASE_METHODS + (ABLATION_METHODS if cfg.ablation else [])
    scene_rows, rr_rows, scored_rows = [], [], []
    for scene in sorted(scenes, key=lambda s: s.scene_id):
        bank = extract_candidates(scene.recording, cfg.extraction)
        n = min(bank.num_samples, scene.truth.num_samples)
        truth = scene.truth.samples[:n]
        try:
            rr_true = estimate_rr(truth, scene.recording.sample_rate_hz)
        except (TooFewPeaks, TooShort):
            rr_true = np.nan
        selected, quality_scores = _method_waveforms(bank, model, cfg, methods)
        if "oracle" in methods:
            choice = baselines.select_oracle(bank, truth)
            cand = bank.by_key(choice.selected_key)
            selected["oracle"] = (cand.key, cand.samples, choice.score_raw)
        for key, score in quality_scores.items():
            scored_rows.append(
                {
                    "scene_id": scene.scene_id,
                    "candidate_key": key,
                    "score": score,
                    "r_with_truth": _r_or_zero(bank.by_key(key).samples[:n], truth),
                }
            )
        for method in methods:
            key, waveform, _raw = selected[method]
            r = _r_or_zero(waveform[:n], truth)
            scene_rows.append(
                {
                    "scene_id": scene.scene_id,
                    "method": method,
                    "selected_key": key,
                    "r_with_truth": r,
                }
            )
            try:
                rr_est = estimate_rr(waveform, scene.recording.sample_rate_hz)
            except (TooFewPeaks, TooShort):
                rr_est = np.nan
            rr_rows.append(
                {
                    "scene_id": scene.scene_id,
                    "method": method,
                    "rr_est_bpm": rr_est,
                    "rr_true_bpm": rr_true,
                    "abs_err_bpm": abs(rr_est - rr_true),
                }
            )
    per_method = {}
    for method in methods:
        rs = np.array([row["r_with_truth"] for row in scene_rows if row["method"] == method])
        errs = np.array([row["abs_err_bpm"] for row in rr_rows if row["method"] == method])
        order = np.sort(rs)
        per_method[method] = {
            "mean_r": float(rs.mean()),
            "fraction_negative_r": float((rs < 0).mean()),
            "mean_abs_rr_err_bpm": float(np.nanmean(errs)) if np.any(np.isfinite(errs)) else None,
            "cdf": [[float(v), (i + 1) / len(order)] for i, v in enumerate(order)],
        }
    return EvalReport(
        methods=methods,
        scene_rows=scene_rows,
        rr_rows=rr_rows,
        scored_rows=scored_rows,
        per_method=per_method,
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if np.isnan(value) else f"{value:.9g}"
    return str(value)


def _write_csv(path, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fieldnames])


def export_report(report: EvalReport, out_dir) -> dict[str, Path]:
    """Write the report bundle: per-scene CSVs, CDF points, and a JSON summary."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "scenes": out_dir / "scenes.csv",
            "rr": out_dir / "rr.csv",
            "scored": out_dir / "scored_candidates.csv",
            "cdf": out_dir / "cdf.csv",
            "summary": out_dir / "summary.json",
        }
        _write_csv(paths["scenes"], ["scene_id", "method", "selected_key", "r_with_truth"], report.scene_rows)
        _write_csv(paths["rr"], ["scene_id", "method", "rr_est_bpm", "rr_true_bpm", "abs_err_bpm"], report.rr_rows)
        _write_csv(paths["scored"], ["scene_id", "candidate_key", "score", "r_with_truth"], report.scored_rows)
        cdf_rows = [
            {"method": m, "r": point[0], "cumulative": point[1]}
            for m in report.methods
            for point in report.per_method[m]["cdf"]
        ]
        _write_csv(paths["cdf"], ["method", "r", "cumulative"], cdf_rows)
        summary = {
            "methods": report.methods,
            "per_method": {
                m: {k: v for k, v in stats.items() if k != "cdf"} for m, stats in report.per_method.items()
            },
            "num_scenes": len({row["scene_id"] for row in report.scene_rows}),
        }
        paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True))
    except OSError as exc:
        raise IoFailure(f"cannot write report to {out_dir}: {exc}") from exc
    return paths
