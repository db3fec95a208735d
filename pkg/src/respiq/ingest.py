"""Recording and ground-truth containers plus their on-disk formats.

Two little-endian binary formats:

* ``MVR1`` radar recording: ``"MVR1"`` | version u32 | num_bins u32 |
  num_samples u64 | sample_rate_hz f64 | range_start_m f64 |
  bin_size_m f64 | payload of num_bins*num_samples (I f32, Q f32) pairs,
  bin-major. Header is 44 bytes.
* ``MVG1`` ground-truth waveform: ``"MVG1"`` | version u32 |
  num_samples u64 | sample_rate_hz f64 | f32 samples. Header is 24 bytes.

Session manifests are JSON arrays of
``{subject_id, session_id, recording, truth}`` with paths resolved
relative to the manifest file. Streams are assumed pre-aligned; use
:func:`resample_to` to bring a truth waveform to the radar rate.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    ConfigError,
    DimensionOverflow,
    InvariantViolation,
    IoFailure,
    TooShort,
    TruncatedFile,
    VersionMismatch,
)

RECORDING_MAGIC = b"MVR1"
TRUTH_MAGIC = b"MVG1"
_RECORDING_HEADER = struct.Struct("<4sIIQddd")
_TRUTH_HEADER = struct.Struct("<4sIQd")
# Anything above this is a corrupt header, not a real recording.
_MAX_ENTRIES = 1 << 33


@dataclass
class UwbRecording:
    """Complex range-time matrix with its geometry metadata.

    ``iq`` has shape (num_bins, num_samples); rows are range bins, columns
    slow-time samples.
    """

    num_bins: int
    num_samples: int
    sample_rate_hz: float
    range_start_m: float
    bin_size_m: float
    iq: np.ndarray

    def validate(self) -> "UwbRecording":
        if self.num_bins < 1 or self.num_samples < 1:
            raise InvariantViolation("num_bins and num_samples must be >= 1")
        if self.sample_rate_hz <= 0 or self.bin_size_m <= 0:
            raise InvariantViolation("sample_rate_hz and bin_size_m must be positive")
        if self.iq.shape != (self.num_bins, self.num_samples):
            raise InvariantViolation(
                f"iq shape {self.iq.shape} != ({self.num_bins}, {self.num_samples})"
            )
        if not np.all(np.isfinite(self.iq.view(np.float64))):
            raise InvariantViolation("iq contains non-finite samples")
        return self

    def bin_centers_m(self) -> np.ndarray:
        return self.range_start_m + (np.arange(self.num_bins) + 0.5) * self.bin_size_m


@dataclass
class GroundTruthWaveform:
    """Reference chest-expansion waveform from a wearable sensor."""

    num_samples: int
    sample_rate_hz: float
    samples: np.ndarray

    def validate(self) -> "GroundTruthWaveform":
        if self.sample_rate_hz <= 0:
            raise InvariantViolation("sample_rate_hz must be positive")
        if self.samples.shape != (self.num_samples,):
            raise InvariantViolation("samples length disagrees with num_samples")
        if not np.all(np.isfinite(self.samples)):
            raise InvariantViolation("samples contain non-finite values")
        return self


@dataclass
class SessionManifest:
    """One recorded session: radar file plus optional aligned truth file."""

    subject_id: str
    session_id: str
    recording_path: Path
    truth_path: Path | None = None


def write_recording(rec: UwbRecording, path) -> None:
    rec.validate()
    header = _RECORDING_HEADER.pack(
        RECORDING_MAGIC,
        1,
        rec.num_bins,
        rec.num_samples,
        rec.sample_rate_hz,
        rec.range_start_m,
        rec.bin_size_m,
    )
    interleaved = np.empty((rec.num_bins, rec.num_samples, 2), dtype="<f4")
    interleaved[:, :, 0] = rec.iq.real
    interleaved[:, :, 1] = rec.iq.imag
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(interleaved.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_recording(path) -> UwbRecording:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(raw) < 4:
        raise TruncatedFile(f"{path}: shorter than a magic header")
    if raw[:4] != RECORDING_MAGIC:
        raise BadMagic(f"{path}: expected {RECORDING_MAGIC!r}, found {raw[:4]!r}")
    if len(raw) < _RECORDING_HEADER.size:
        raise TruncatedFile(f"{path}: header truncated")
    _, version, num_bins, num_samples, rate, range_start, bin_size = _RECORDING_HEADER.unpack_from(raw)
    if version != 1:
        raise VersionMismatch(f"{path}: unsupported version {version}")
    if num_bins * num_samples > _MAX_ENTRIES:
        raise DimensionOverflow(f"{path}: {num_bins}x{num_samples} entries exceed sanity bound")
    payload = raw[_RECORDING_HEADER.size :]
    expected = num_bins * num_samples * 2 * 4
    if len(payload) < expected:
        raise TruncatedFile(f"{path}: payload has {len(payload)} bytes, header declares {expected}")
    flat = np.frombuffer(payload[:expected], dtype="<f4").reshape(num_bins, num_samples, 2)
    iq = flat[:, :, 0].astype(np.float64) + 1j * flat[:, :, 1].astype(np.float64)
    return UwbRecording(
        num_bins=num_bins,
        num_samples=num_samples,
        sample_rate_hz=rate,
        range_start_m=range_start,
        bin_size_m=bin_size,
        iq=iq,
    ).validate()


def write_truth(truth: GroundTruthWaveform, path) -> None:
    truth.validate()
    header = _TRUTH_HEADER.pack(TRUTH_MAGIC, 1, truth.num_samples, truth.sample_rate_hz)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(truth.samples.astype("<f4").tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_truth(path) -> GroundTruthWaveform:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(raw) < 4:
        raise TruncatedFile(f"{path}: shorter than a magic header")
    if raw[:4] != TRUTH_MAGIC:
        raise BadMagic(f"{path}: expected {TRUTH_MAGIC!r}, found {raw[:4]!r}")
    if len(raw) < _TRUTH_HEADER.size:
        raise TruncatedFile(f"{path}: header truncated")
    _, version, num_samples, rate = _TRUTH_HEADER.unpack_from(raw)
    if version != 1:
        raise VersionMismatch(f"{path}: unsupported version {version}")
    payload = raw[_TRUTH_HEADER.size :]
    if len(payload) < num_samples * 4:
        raise TruncatedFile(f"{path}: payload has {len(payload)} bytes, need {num_samples * 4}")
    samples = np.frombuffer(payload[: num_samples * 4], dtype="<f4").astype(np.float64)
    return GroundTruthWaveform(num_samples=num_samples, sample_rate_hz=rate, samples=samples).validate()


def resample_to(truth: GroundTruthWaveform, target_hz: float) -> GroundTruthWaveform:
    """Linear-interpolation resampling to ``target_hz``.

    Output length is ``floor((N-1) * target / source) + 1`` so no sample
    is extrapolated beyond the source span. Linear interpolation is
    plenty here: the respiration band sits far below Nyquist at the rates
    involved.
    """
    if target_hz <= 0:
        raise ConfigError("target_hz must be positive")
    if truth.num_samples < 2:
        raise TooShort("resampling needs at least 2 samples")
    n_out = int(np.floor((truth.num_samples - 1) * target_hz / truth.sample_rate_hz)) + 1
    positions = np.arange(n_out) * (truth.sample_rate_hz / target_hz)
    samples = np.interp(positions, np.arange(truth.num_samples), truth.samples)
    return GroundTruthWaveform(num_samples=n_out, sample_rate_hz=target_hz, samples=samples)


def load_manifest(path) -> list[SessionManifest]:
    path = Path(path)
    try:
        entries = json.loads(path.read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise ConfigError(f"{path}: manifest must be a JSON array")
    sessions = []
    for entry in entries:
        unknown = set(entry) - {"subject_id", "session_id", "recording", "truth"}
        if unknown:
            raise ConfigError(f"{path}: unknown manifest keys {sorted(unknown)}")
        if "recording" not in entry:
            raise ConfigError(f"{path}: manifest entry missing 'recording'")
        base = path.parent
        truth = entry.get("truth")
        sessions.append(
            SessionManifest(
                subject_id=str(entry.get("subject_id", "")),
                session_id=str(entry.get("session_id", "")),
                recording_path=base / entry["recording"],
                truth_path=base / truth if truth else None,
            )
        )
    return sessions


def load_session(session: SessionManifest) -> tuple[UwbRecording, GroundTruthWaveform | None]:
    """Read a session's files, resampling the truth to the radar rate if needed."""
    rec = read_recording(session.recording_path)
    truth = None
    if session.truth_path is not None:
        truth = read_truth(session.truth_path)
        if truth.sample_rate_hz != rec.sample_rate_hz:
            truth = resample_to(truth, rec.sample_rate_hz)
    return rec, truth
