"""Synthetic IR-UWB recordings with planted ground truth.

Each propagation path (the breathing subject plus static clutter)
deposits a Gaussian range envelope, sigma = c/(2*bandwidth), centered on
its time-varying distance, and multiplies the complex baseband phase
rotation exp(-j*2*pi*fc*(2*range/c)) of the two-way trip. Chest expansion
moves the subject's reflector toward the radar, so both the magnitude
envelope and the phase of nearby bins encode the breathing waveform; bins
on the far slope of the envelope move opposite to the chest, which is
exactly the discretization-induced inversion seen on real hardware.

Supported corruptions: a global breathing-habit sign flip, and per-bin
modes that invert the displacement coupling, add in-band interference,
or replace the bin with noise.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadRate, ScenarioInvalid
from .ingest import GroundTruthWaveform, UwbRecording, write_recording, write_truth

C_LIGHT = 299792458.0

BIN_EMPTY = "empty"
BIN_CLUTTER = "clutter"
BIN_BREATH = "breath"
BIN_INVERTED = "inverted"
BIN_DISTORTED = "distorted"
BIN_NOISE = "noise"


@dataclass
class BreathSpec:
    rate_bpm: float = 15.0
    duty: float = 0.35  # fraction of each cycle spent above half expansion
    depth_m: float = 0.005
    jitter_frac: float = 0.05  # per-cycle period jitter, uniform +-


@dataclass
class ClutterSpec:
    range_m: float
    amplitude: float


@dataclass
class BadBin:
    bin: int
    mode: str  # "invert" | "distort" | "noise"
    gain: float = 1.0


@dataclass
class SimScenario:
    duration_s: float = 30.0
    sample_rate_hz: float = 50.0
    num_bins: int = 120
    bin_size_m: float = 0.0514
    range_start_m: float = 0.3
    carrier_hz: float = 7.29e9
    bandwidth_hz: float = 1.4e9
    subject_range_m: float = 1.5
    subject_amplitude: float = 1.0
    breath: BreathSpec = field(default_factory=BreathSpec)
    clutter: list[ClutterSpec] = field(default_factory=list)
    noise_snr_db: float | None = 15.0
    bad_bins: list[BadBin] = field(default_factory=list)
    habit_inverted: bool = False
    # Residual chest motion between breaths (postural sway, cardiac
    # ballistics), as a fraction of the breath depth. Real chests are
    # never perfectly still; a zero baseline is available by setting 0.
    sway_frac: float = 0.06
    seed: int = 0

    @property
    def range_span_m(self) -> float:
        return self.num_bins * self.bin_size_m

    @property
    def envelope_sigma_m(self) -> float:
        return C_LIGHT / (2.0 * self.bandwidth_hz)

    def bin_centers_m(self) -> np.ndarray:
        return self.range_start_m + (np.arange(self.num_bins) + 0.5) * self.bin_size_m

    def subject_bin(self) -> int:
        return int(np.argmin(np.abs(self.bin_centers_m() - self.subject_range_m)))

    def validate(self) -> "SimScenario":
        if self.duration_s <= 0 or self.sample_rate_hz <= 0:
            raise ScenarioInvalid("duration and sample rate must be positive")
        if self.num_bins < 1 or self.bin_size_m <= 0:
            raise ScenarioInvalid("bad range geometry")
        if not 0.0 < self.breath.duty <= 0.5:
            raise ScenarioInvalid(f"duty must be in (0, 0.5], got {self.breath.duty}")
        if not 4.0 <= self.breath.rate_bpm <= 40.0:
            raise BadRate(f"rate {self.breath.rate_bpm} bpm outside 4-40")
        lo = self.range_start_m
        hi = self.range_start_m + self.range_span_m
        if not lo <= self.subject_range_m <= hi:
            raise ScenarioInvalid(f"subject at {self.subject_range_m} m outside [{lo}, {hi}] m")
        for bad in self.bad_bins:
            if not 0 <= bad.bin < self.num_bins:
                raise ScenarioInvalid(f"bad bin {bad.bin} out of range")
            if bad.mode not in ("invert", "distort", "noise"):
                raise ScenarioInvalid(f"unknown bad-bin mode {bad.mode!r}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimScenario":
        data = dict(data)
        if "breath" in data:
            data["breath"] = BreathSpec(**data["breath"])
        if "clutter" in data:
            data["clutter"] = [ClutterSpec(**c) for c in data["clutter"]]
        if "bad_bins" in data:
            data["bad_bins"] = [BadBin(**b) for b in data["bad_bins"]]
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ScenarioInvalid(f"unknown scenario keys {sorted(unknown)}")
        return cls(**data)


@dataclass
class SimTruth:
    chest_waveform: np.ndarray  # meters, relative expansion
    bin_labels: list[str]
    rr_bpm: float


def breath_waveform(breath: BreathSpec, n_samples: int, fs: float, seed) -> np.ndarray:
    """Unit-amplitude train of raised-cosine breath pulses.

    Each cycle holds one pulse of full width ``2 * duty * period`` (so
    the time above half maximum is ``duty`` of the cycle) followed by a
    flat zero baseline; per-cycle timing jitter is uniform within
    ``+-jitter_frac``. At duty 0.5 the pulses merge into a symmetric
    cosine train.
    """
    if not 4.0 <= breath.rate_bpm <= 40.0:
        raise BadRate(f"rate {breath.rate_bpm} bpm outside 4-40")
    if not 0.0 < breath.duty <= 0.5:
        raise ScenarioInvalid(f"duty must be in (0, 0.5], got {breath.duty}")
    rng = np.random.default_rng(seed)
    period_nom = 60.0 / breath.rate_bpm
    y = np.zeros(n_samples)
    t_end = n_samples / fs
    t = -rng.uniform(0.0, period_nom)  # random phase so pulses are not locked to t=0
    while t < t_end:
        period = period_nom * (1.0 + breath.jitter_frac * rng.uniform(-1.0, 1.0))
        width = 2.0 * breath.duty * period
        i0 = max(int(np.ceil(t * fs)), 0)
        i1 = min(int(np.ceil((t + width) * fs)), n_samples)
        if i1 > i0:
            phase = (np.arange(i0, i1) / fs - t) / width
            y[i0:i1] = 0.5 * (1.0 - np.cos(2.0 * np.pi * phase))
        t += period
    return y


def _path_field(bin_centers: np.ndarray, ranges_m: np.ndarray, amplitude: float, scn: SimScenario) -> np.ndarray:
    """Complex (num_bins, n) contribution of one reflector at ``ranges_m``(t)."""
    sigma = scn.envelope_sigma_m
    delta = bin_centers[:, np.newaxis] - ranges_m[np.newaxis, :]
    envelope = amplitude * np.exp(-(delta**2) / (2.0 * sigma**2))
    phase = np.exp(-1j * (4.0 * np.pi * scn.carrier_hz / C_LIGHT) * ranges_m)
    return envelope * phase[np.newaxis, :]


def _smooth_sway(n: int, fs: float, rng) -> np.ndarray:
    """Unit-std band-limited (0.02-0.2 Hz) baseline motion."""
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    spectrum[(freqs < 0.02) | (freqs > 0.2)] = 0.0
    sway = np.fft.irfft(spectrum, n)
    sd = sway.std()
    return sway / sd if sd > 0 else sway


def synthesize(scn: SimScenario) -> tuple[UwbRecording, SimTruth]:
    """Render the scenario into a recording plus its planted truth."""
    scn.validate()
    n = int(round(scn.duration_s * scn.sample_rate_hz))
    fs = scn.sample_rate_hz
    centers = scn.bin_centers_m()
    unit = breath_waveform(scn.breath, n, fs, scn.seed)
    if scn.sway_frac > 0.0:
        sway_rng = np.random.default_rng([int(scn.seed) & 0x7FFFFFFF, 0x51AB])
        unit = unit + scn.sway_frac * _smooth_sway(n, fs, sway_rng)
    chest = scn.breath.depth_m * unit
    coupling = -chest if not scn.habit_inverted else chest
    subject_ranges = scn.subject_range_m + coupling  # expansion moves the chest toward the radar

    iq = _path_field(centers, subject_ranges, scn.subject_amplitude, scn)
    for spec in scn.clutter:
        iq += _path_field(centers, np.full(n, spec.range_m), spec.amplitude, scn)

    labels = [BIN_EMPTY] * scn.num_bins
    sigma = scn.envelope_sigma_m
    for spec in scn.clutter:
        for d in np.flatnonzero(np.abs(centers - spec.range_m) <= 2.0 * sigma):
            labels[d] = BIN_CLUTTER
    for d in np.flatnonzero(np.abs(centers - scn.subject_range_m) <= 2.0 * sigma):
        labels[d] = BIN_BREATH

    # Reference level: magnitude fluctuation of the strongest
    # breathing-modulated bin. The configured SNR bounds the best
    # magnitude candidate; phase candidates ride a much larger
    # carrier-phase swing and come out cleaner at the same noise level,
    # as they do on real hardware.
    subj = _path_field(centers, subject_ranges, scn.subject_amplitude, scn)
    mag_fluct_ref = float(np.abs(subj).std(axis=1).max())

    t = np.arange(n) / fs
    rng = np.random.default_rng([int(scn.seed) & 0x7FFFFFFF, 0xBAD])
    for bad in scn.bad_bins:
        d = bad.bin
        if bad.mode == "invert":
            inverted_ranges = scn.subject_range_m - coupling
            row = _path_field(centers[d : d + 1], inverted_ranges, scn.subject_amplitude * bad.gain, scn)
            iq[d] = row[0]
            labels[d] = BIN_INVERTED
        elif bad.mode == "distort":
            # In-band complex tones comparable to the subject path: lots
            # of respiration-band energy, wrong waveform shape.
            for _ in range(2):
                freq = rng.uniform(0.2, 0.7)
                phi = rng.uniform(0.0, 2.0 * np.pi)
                iq[d] = iq[d] + bad.gain * 0.45 * scn.subject_amplitude * np.exp(1j * (2.0 * np.pi * freq * t + phi))
            labels[d] = BIN_DISTORTED
        elif bad.mode == "noise":
            # Garbage bin whose magnitude variance rivals (not dwarfs)
            # the breathing bins, like a flickering reflection would.
            scale = bad.gain * 3.0 * mag_fluct_ref
            iq[d] = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
            labels[d] = BIN_NOISE

    if scn.noise_snr_db is not None:
        sigma_n = mag_fluct_ref * 10.0 ** (-scn.noise_snr_db / 20.0)
        noise = rng.standard_normal((scn.num_bins, n)) + 1j * rng.standard_normal((scn.num_bins, n))
        iq = iq + sigma_n / np.sqrt(2.0) * noise

    rec = UwbRecording(
        num_bins=scn.num_bins,
        num_samples=n,
        sample_rate_hz=fs,
        range_start_m=scn.range_start_m,
        bin_size_m=scn.bin_size_m,
        iq=iq,
    ).validate()
    truth = SimTruth(chest_waveform=chest, bin_labels=labels, rr_bpm=scn.breath.rate_bpm)
    return rec, truth


# ---------------------------------------------------------------------------
# corpora


@dataclass
class CorpusSpec:
    """Parameter ranges for a randomized scene corpus.

    Two-element lists/tuples are uniform ranges. ``frac_invert_dominant``
    scenes (exactly, not in expectation) get a strong inverted bin that
    outshines the clean ones, which is what post/pre-inversion policies
    are judged against.
    """

    n_scenes: int = 100
    duration_s: float = 30.0
    sample_rate_hz: float = 50.0
    num_bins: int = 120
    rate_bpm: tuple[float, float] = (8.0, 25.0)
    duty: tuple[float, float] = (0.25, 0.4)
    depth_m: tuple[float, float] = (0.004, 0.006)
    jitter_frac: tuple[float, float] = (0.05, 0.1)
    subject_range_m: tuple[float, float] = (0.8, 5.0)
    n_clutter: tuple[int, int] = (2, 5)
    clutter_amplitude: tuple[float, float] = (0.5, 2.0)
    noise_snr_db: tuple[float, float] = (8.0, 20.0)
    frac_invert_dominant: float = 0.35
    invert_gain: tuple[float, float] = (1.6, 2.4)
    prob_distort: float = 0.5
    prob_noise_bins: float = 0.7
    seed: int = 0

    def validate(self) -> "CorpusSpec":
        if self.n_scenes < 1:
            raise ScenarioInvalid("n_scenes must be >= 1")
        if not 0.0 < self.duty[0] <= self.duty[1] <= 0.5:
            raise ScenarioInvalid(f"duty range {self.duty} outside (0, 0.5]")
        if not 0.0 <= self.frac_invert_dominant <= 1.0:
            raise ScenarioInvalid("frac_invert_dominant must be in [0, 1]")
        return self


@dataclass
class SimScene:
    scene_id: str
    scenario: SimScenario
    recording: UwbRecording
    truth_waveform: GroundTruthWaveform
    sim_truth: SimTruth


def _uniform(rng, lo_hi) -> float:
    return float(rng.uniform(lo_hi[0], lo_hi[1]))


def make_corpus(spec: CorpusSpec) -> list[SimScene]:
    """Reproducible randomized corpus; same spec and seed give identical scenes."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n_dominant = int(round(spec.frac_invert_dominant * spec.n_scenes))
    dominant = np.zeros(spec.n_scenes, dtype=bool)
    dominant[:n_dominant] = True
    rng.shuffle(dominant)
    scenes = []
    for i in range(spec.n_scenes):
        breath = BreathSpec(
            rate_bpm=_uniform(rng, spec.rate_bpm),
            duty=_uniform(rng, spec.duty),
            depth_m=_uniform(rng, spec.depth_m),
            jitter_frac=_uniform(rng, spec.jitter_frac),
        )
        subject_range = _uniform(rng, spec.subject_range_m)
        scenario = SimScenario(
            duration_s=spec.duration_s,
            sample_rate_hz=spec.sample_rate_hz,
            num_bins=spec.num_bins,
            subject_range_m=subject_range,
            breath=breath,
            noise_snr_db=_uniform(rng, spec.noise_snr_db),
            seed=int(rng.integers(2**31)),
        )
        n_clut = int(rng.integers(spec.n_clutter[0], spec.n_clutter[1] + 1))
        span = scenario.range_span_m
        for _ in range(n_clut):
            clutter_range = float(rng.uniform(scenario.range_start_m, scenario.range_start_m + span))
            scenario.clutter.append(ClutterSpec(range_m=clutter_range, amplitude=_uniform(rng, spec.clutter_amplitude)))
        subject_bin = scenario.subject_bin()
        if dominant[i]:
            offset = int(rng.integers(2, 4)) * (1 if rng.uniform() < 0.5 else -1)
            b = int(np.clip(subject_bin + offset, 0, spec.num_bins - 1))
            scenario.bad_bins.append(BadBin(bin=b, mode="invert", gain=_uniform(rng, spec.invert_gain)))
        if rng.uniform() < spec.prob_distort:
            offset = int(rng.integers(2, 4)) * (1 if rng.uniform() < 0.5 else -1)
            b = int(np.clip(subject_bin - offset, 0, spec.num_bins - 1))
            scenario.bad_bins.append(BadBin(bin=b, mode="distort", gain=float(rng.uniform(0.8, 1.5))))
        if rng.uniform() < spec.prob_noise_bins:
            for _ in range(int(rng.integers(1, 3))):
                b = int(rng.integers(0, spec.num_bins))
                if abs(b - subject_bin) > 4:
                    scenario.bad_bins.append(BadBin(bin=b, mode="noise", gain=float(rng.uniform(0.5, 1.5))))
        recording, sim_truth = synthesize(scenario)
        truth_waveform = GroundTruthWaveform(
            num_samples=recording.num_samples,
            sample_rate_hz=recording.sample_rate_hz,
            samples=sim_truth.chest_waveform,
        )
        scenes.append(
            SimScene(
                scene_id=f"scene{i:04d}",
                scenario=scenario,
                recording=recording,
                truth_waveform=truth_waveform,
                sim_truth=sim_truth,
            )
        )
    return scenes


def write_corpus(scenes: list[SimScene], out_dir) -> Path:
    """Write recordings, truths, per-scene metadata, and the session manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for scene in scenes:
        rec_name = f"{scene.scene_id}.mvr"
        truth_name = f"{scene.scene_id}.mvg"
        write_recording(scene.recording, out_dir / rec_name)
        write_truth(scene.truth_waveform, out_dir / truth_name)
        meta = {
            "scene_id": scene.scene_id,
            "rr_bpm": scene.sim_truth.rr_bpm,
            "bin_labels": scene.sim_truth.bin_labels,
            "scenario": scene.scenario.to_dict(),
        }
        (out_dir / f"{scene.scene_id}.json").write_text(json.dumps(meta, indent=2))
        manifest.append(
            {
                "subject_id": "sim",
                "session_id": scene.scene_id,
                "recording": rec_name,
                "truth": truth_name,
            }
        )
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest_path
