"""Real-audio pipeline: WAV ingestion, RIR convolution, STFT analysis with
phase adjustment, band selection and the speech RTF experiment.

The experiment path is fixed to 16 kHz audio (no resampling). The analysis
restricts the wideband covariance to bins inside a frequency band both for
estimation and scoring, and scores only bins whose target power is within a
threshold of the loudest band.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.io.wavfile
import scipy.signal

from .covariance import phase_adjusted_covariance, sample_covariance
from .metrics import hermitian_angle
from .rtf import Rtf, covariance_whitening, normalize_rtf, svd_direct
from .scenario import FrameBlock, trial_rng

__all__ = [
    "AudioClip",
    "StftConfig",
    "SpeechExperimentConfig",
    "load_wav",
    "stft",
    "convolve_rir",
    "ground_truth_tf",
    "frequency_band_bins",
    "power_mask",
    "run_speech_experiment",
]

EXPERIMENT_SAMPLE_RATE = 16000


@dataclass(frozen=True)
class AudioClip:
    sample_rate: int
    samples: np.ndarray  # (n_samples,) mono or (n_samples, n_channels)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim not in (1, 2):
            raise ValueError("samples must be 1-D (mono) or 2-D (multichannel)")
        object.__setattr__(self, "samples", s)

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def n_channels(self):
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]

    def channel(self, i):
        return self.samples if self.samples.ndim == 1 else self.samples[:, i]


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 1024
    hop: int = 256

    def __post_init__(self):
        if self.fft_size % self.hop:
            raise ValueError("hop must divide fft_size")

    @property
    def n_bins(self):
        return self.fft_size // 2 + 1

    @property
    def window(self):
        # Square-root Hann, periodic, length fft_size.
        return np.sqrt(scipy.signal.get_window("hann", self.fft_size, fftbins=True))


def load_wav(path):
    """Read a PCM 16/24/32-bit or float-32 WAV as a float AudioClip."""
    rate, data = scipy.io.wavfile.read(path)
    if data.dtype.kind == "i":
        data = data.astype(float) / float(np.iinfo(data.dtype).max)
    elif data.dtype.kind == "u":
        info = np.iinfo(data.dtype)
        data = (data.astype(float) - info.max / 2) / (info.max / 2)
    else:
        data = data.astype(float)
    return AudioClip(sample_rate=int(rate), samples=data)


def stft(clip, cfg: StftConfig):
    """Per-channel STFT, positive-frequency half.

    Returns an array of shape (n_channels, n_bins, L); frame l covers samples
    [l*hop, l*hop + fft_size).
    """
    n = clip.n_samples
    if n < cfg.fft_size:
        raise ValueError(f"clip of {n} samples is shorter than one frame ({cfg.fft_size})")
    L = 1 + (n - cfg.fft_size) // cfg.hop
    win = cfg.window
    out = np.empty((clip.n_channels, cfg.n_bins, L), dtype=complex)
    for ch in range(clip.n_channels):
        x = clip.channel(ch)
        idx = np.arange(cfg.fft_size)[np.newaxis, :] + cfg.hop * np.arange(L)[:, np.newaxis]
        out[ch] = np.fft.rfft(x[idx] * win, axis=1).T
    return out


def frames_to_block(spectra, bins, block_shift=None, fft_size=None):
    """Stack selected bins of an STFT array into a frequency-major FrameBlock.

    ``spectra`` has shape (M, n_bins, L); the block has frames of length
    len(bins) * M in the order (bin, sensor).
    """
    M, _, L = spectra.shape
    sel = spectra[:, bins, :]           # (M, K, L)
    frames = sel.transpose(2, 1, 0).reshape(L, len(bins) * M)
    return FrameBlock(K=len(bins), M=M, frames=frames,
                      block_shift=block_shift, fft_size=fft_size)


def convolve_rir(clip, rir, truncate_to=None):
    """Convolve a mono clip with a (possibly multichannel) RIR.

    ``truncate_to`` cuts the RIR to that many samples first (used for the
    target RIR so that it fits within a single STFT frame).
    """
    if clip.n_channels != 1:
        raise ValueError("source clips must be mono")
    if clip.sample_rate != rir.sample_rate:
        raise ValueError("clip and RIR sample rates differ")
    h = rir.samples if rir.samples.ndim == 2 else rir.samples[:, np.newaxis]
    if truncate_to is not None:
        h = h[:truncate_to]
    x = clip.channel(0)
    out = np.stack(
        [scipy.signal.fftconvolve(x, h[:, ch])[: x.shape[0]] for ch in range(h.shape[1])],
        axis=1,
    )
    return AudioClip(sample_rate=clip.sample_rate, samples=out)


def ground_truth_tf(rir, cfg: StftConfig):
    """Transfer function from the early RIR: rfft of its first fft_size
    samples per sensor, stacked frequency-major over all positive bins."""
    h = rir.samples if rir.samples.ndim == 2 else rir.samples[:, np.newaxis]
    if h.shape[0] < cfg.fft_size:
        h = np.vstack([h, np.zeros((cfg.fft_size - h.shape[0], h.shape[1]))])
    spec = np.fft.rfft(h[:cfg.fft_size], axis=0)  # (n_bins, M)
    return spec.reshape(-1)  # frequency-major: bin 0 sensors, bin 1 sensors, ...


def frequency_band_bins(cfg: StftConfig, sample_rate, f_lo=80.0, f_hi=4000.0):
    """Indices of positive-frequency bins inside [f_lo, f_hi]."""
    freqs = np.fft.rfftfreq(cfg.fft_size, 1.0 / sample_rate)
    return np.flatnonzero((freqs >= f_lo) & (freqs <= f_hi))


def power_mask(band_powers, threshold_db=35.0):
    """True for bands within threshold_db of the loudest band."""
    band_powers = np.asarray(band_powers, dtype=float)
    peak = band_powers.max()
    if peak <= 0.0:
        return np.zeros(band_powers.shape, dtype=bool)
    return band_powers >= peak * 10.0 ** (-threshold_db / 10.0)


@dataclass(frozen=True)
class SpeechExperimentConfig:
    M: int = 4
    frames_per_segment: int = 5       # non-overlapping frames worth of samples
    snr_db: float = 0.0
    n_repetitions: int = 50
    seed: int = 0
    stft: StftConfig = field(default_factory=StftConfig)
    ref_sensor: int = 0
    f_lo: float = 80.0
    f_hi: float = 4000.0
    power_threshold_db: float = 35.0
    silence_threshold_db: float = 40.0
    noise_est_seconds: float = 2.0
    include_orig_phase: bool = True
    # Number of adjacent band bins estimated jointly per wideband problem;
    # 0 processes the whole band as a single problem. Short segments give
    # far fewer frames than band bins, so modest groups keep the covariance
    # pencil well conditioned.
    group_size: int = 0
    # Per-channel white sensor noise this many dB below the interferer
    # segment power; None disables it. A small floor keeps the estimated
    # noise covariance full rank when the interferer is a single point
    # source.
    sensor_noise_db: float | None = None

    def __post_init__(self):
        if self.group_size < 0:
            raise ValueError("group_size must be >= 0")


def _segment_energy(x, start, length):
    seg = x[start:start + length]
    return float(np.sum(seg**2))


def _draw_segment_start(x, length, rng, silence_threshold_db):
    """Random segment start avoiding silence.

    Segments whose energy is more than silence_threshold_db below the clip's
    median segment energy are rejected.
    """
    n = x.shape[0]
    if n < length:
        raise ValueError("clip too short for the requested segment length")
    starts = np.arange(0, n - length + 1, length // 4 or 1)
    energies = np.array([_segment_energy(x, s, length) for s in starts])
    median = np.median(energies[energies > 0]) if np.any(energies > 0) else 0.0
    floor = median * 10.0 ** (-silence_threshold_db / 10.0)
    for _ in range(1000):
        start = int(rng.integers(0, n - length + 1))
        if _segment_energy(x, start, length) > floor:
            return start
    raise ValueError("could not find a non-silent segment")


def _mix_to_snr(target, noise, snr_db):
    """Scale noise so the trace-power ratio of the segments hits snr_db."""
    p_t = float(np.sum(target**2))
    p_n = float(np.sum(noise**2))
    if p_n <= 0.0:
        raise ValueError("noise segment has zero power")
    scale = np.sqrt(p_t / (p_n * 10.0 ** (snr_db / 10.0)))
    return noise * scale, scale


def run_speech_experiment(target_clip, noise_clip, target_rir, noise_rir,
                          cfg: SpeechExperimentConfig):
    """Monte-Carlo speech RTF experiment; returns a list of metric rows.

    Per repetition: random non-silent target and noise segments are convolved
    (target RIR truncated to one STFT frame), mixed at the configured SNR,
    and analyzed with both estimators on phase-adjusted covariances (plus
    plain-covariance "orig-phase" variants). The Hermitian angle is scored
    against the ground-truth RTF on the masked bands.
    """
    for name, clip in (("target", target_clip), ("noise", noise_clip),
                       ("target RIR", target_rir), ("noise RIR", noise_rir)):
        if clip.sample_rate != EXPERIMENT_SAMPLE_RATE:
            raise ValueError(f"{name} must be sampled at {EXPERIMENT_SAMPLE_RATE} Hz")
    if target_rir.n_channels < cfg.M or noise_rir.n_channels < cfg.M:
        raise ValueError(f"RIRs provide fewer than M={cfg.M} channels")

    st = cfg.stft
    M = cfg.M
    t_rir = AudioClip(target_rir.sample_rate, np.atleast_2d(target_rir.samples.T).T[:, :M])
    n_rir = AudioClip(noise_rir.sample_rate, np.atleast_2d(noise_rir.samples.T).T[:, :M])

    target_sensors = convolve_rir(target_clip, t_rir, truncate_to=st.fft_size)
    noise_sensors = convolve_rir(noise_clip, n_rir)

    bins = frequency_band_bins(st, EXPERIMENT_SAMPLE_RATE, cfg.f_lo, cfg.f_hi)
    K = len(bins)
    a_full = ground_truth_tf(AudioClip(t_rir.sample_rate, t_rir.samples[:st.fft_size]), st)
    a_sel = a_full.reshape(st.n_bins, M)[bins].reshape(-1)
    a_true = normalize_rtf(a_sel, K, M, cfg.ref_sensor)

    seg_len = cfg.frames_per_segment * st.fft_size
    noise_est_len = max(int(cfg.noise_est_seconds * EXPERIMENT_SAMPLE_RATE), seg_len)

    # Scoring mask: bands whose target power is within the threshold of the
    # loudest band, measured on the full convolved target signal.
    t_spec = stft(AudioClip(EXPERIMENT_SAMPLE_RATE, target_sensors.samples), st)
    band_power = np.mean(np.abs(t_spec[:, bins, :]) ** 2, axis=(0, 2))
    mask = power_mask(band_power, cfg.power_threshold_db)

    ref_energy = target_sensors.channel(cfg.ref_sensor)

    rows = []
    for rep in range(cfg.n_repetitions):
        rng = trial_rng(cfg.seed, rep)
        t_start = _draw_segment_start(ref_energy, seg_len, rng, cfg.silence_threshold_db)
        n_start = _draw_segment_start(noise_sensors.channel(0), seg_len, rng,
                                      cfg.silence_threshold_db)
        v_start = _draw_segment_start(noise_sensors.channel(0), noise_est_len, rng,
                                      cfg.silence_threshold_db)

        t_seg = target_sensors.samples[t_start:t_start + seg_len]
        n_seg = noise_sensors.samples[n_start:n_start + seg_len]
        n_seg, noise_scale = _mix_to_snr(t_seg, n_seg, cfg.snr_db)
        x_seg = t_seg + n_seg
        v_seg = noise_sensors.samples[v_start:v_start + noise_est_len] * noise_scale
        if cfg.sensor_noise_db is not None:
            floor = np.sqrt(np.mean(n_seg**2) * 10.0 ** (-cfg.sensor_noise_db / 10.0))
            x_seg = x_seg + floor * rng.standard_normal(x_seg.shape)
            v_seg = v_seg + floor * rng.standard_normal(v_seg.shape)

        x_spec = stft(AudioClip(EXPERIMENT_SAMPLE_RATE, x_seg), st)
        v_spec = stft(AudioClip(EXPERIMENT_SAMPLE_RATE, v_seg), st)
        X = frames_to_block(x_spec, bins, block_shift=st.hop, fft_size=st.fft_size)
        V = frames_to_block(v_spec, bins, block_shift=st.hop, fft_size=st.fft_size)

        estimators = {"svd-direct": svd_direct, "cw": covariance_whitening}
        variants = [("", phase_adjusted_covariance)]
        if cfg.include_orig_phase:
            variants.append(("-orig-phase", sample_covariance))
        group = cfg.group_size if cfg.group_size else K
        for suffix, cov_fn in variants:
            estimates = {name: [] for name in estimators}
            for g0 in range(0, K, group):
                g1 = min(g0 + group, K)
                sub_X = _slice_block(X, g0, g1)
                sub_V = _slice_block(V, g0, g1)
                Rx = cov_fn(sub_X)
                Rv = cov_fn(sub_V)
                for name, est in estimators.items():
                    estimates[name].append(est(Rx, Rv, g1 - g0, M, cfg.ref_sensor))
            for name, parts in estimates.items():
                a_hat = Rtf(
                    K=K, M=M, ref_sensor=cfg.ref_sensor,
                    values=np.concatenate([p.values for p in parts]),
                    undetermined=np.concatenate([p.undetermined for p in parts]),
                    low_confidence=np.concatenate([p.low_confidence for p in parts]),
                )
                rows.append({
                    "repetition": rep,
                    "method": name + suffix,
                    "hermitian_angle_rad": hermitian_angle(a_hat, a_true, mask=mask),
                })
    return rows


def _slice_block(block, k0, k1):
    """Frames restricted to the contiguous bin range [k0, k1) of a block.

    The phase adjustment only depends on bin-position differences, so a
    contiguous sub-range of a contiguous selection keeps it valid.
    """
    if k0 == 0 and k1 == block.K:
        return block
    return FrameBlock(K=k1 - k0, M=block.M,
                      frames=block.frames[:, k0 * block.M:k1 * block.M],
                      block_shift=block.block_shift, fft_size=block.fft_size)
