"""Respiration waveform extraction from IR-UWB radar recordings.

The pipeline turns a complex range-time matrix into the best available
respiration waveform: per-bin magnitude/phase candidates, a
biology-informed inversion detector, a self-supervised autoregressive
quality score, and the final selection. A physics-based simulator and an
evaluation harness make every stage testable without hardware.
"""

from .armodel import ArHyperParams, ArModel, build_train_set, forward, gradient_check, load_model, save_model, train
from .baselines import BaselineChoice, CfarConfig, select_cfar, select_oracle, select_snr, select_variance
from .candidates import CandidateBank, CandidateSeries, ExtractionConfig, candidate_key, extract_candidates
from .config import RunConfig, load_config
from .evaluation import EvalConfig, EvalReport, estimate_rr, evaluate_methods, export_report
from .ingest import GroundTruthWaveform, SessionManifest, UwbRecording, read_recording, resample_to, write_recording
from .inversion import InversionConfig, InversionVerdict, detect_inversion, postflip, prefilter_bank
from .scoring import SelectionResult, quality_score, select
from .simulator import BreathSpec, CorpusSpec, SimScenario, SimTruth, breath_waveform, make_corpus, synthesize

__version__ = "0.1.0"
