"""Objective evaluation: STOI intelligibility, delta-STOI, and the
noise-reduction / speech-distortion pair.

STOI follows the standard published parameterization: both signals are
resampled to 10 kHz, frames more than 40 dB below the loudest clean frame
are removed, a 256-sample Hann STFT (hop 128, 512-point DFT) feeds 15
one-third-octave bands starting at 150 Hz, and clipped normalized
correlations over 384 ms (30-frame) segments are averaged.

NR and SD are computed by shadow filtering: the gain trace the system
produced on the mixture is applied separately to the subband analyses of
the noise and speech components.  NR = attenuation of the noise component;
SD = energy of the speech alteration relative to the speech (in dB, more
negative = less distortion).
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.signal import resample_poly

from .errors import DataError
from .filterbank import FilterbankConfig, analyze

STOI_FS = 10000
STOI_FRAME = 256
STOI_HOP = 128
STOI_NFFT = 512
STOI_NUM_BANDS = 15
STOI_LOWEST_CF = 150.0
STOI_SEG_FRAMES = 30          # 384 ms at 10 kHz / 128 hop
STOI_BETA_DB = -15.0          # clipping bound
STOI_DYN_RANGE_DB = 40.0      # silent-frame removal
SD_FLOOR_DB = -100.0          # reported instead of -inf for a unity trace

_EPS = 1e-12


@dataclass
class EvalRecord:
    mixture_id: str
    snr_db: float
    system: str  # noisy | dnn | baseline | anchor | ideal_wiener
    stoi: float
    delta_stoi: float
    nr_db: float
    sd_db: float


def _third_octave_matrix(fs=STOI_FS, nfft=STOI_NFFT, num_bands=STOI_NUM_BANDS,
                         lowest_cf=STOI_LOWEST_CF):
    f = np.linspace(0, fs / 2, nfft // 2 + 1)
    mat = np.zeros((num_bands, len(f)))
    for j in range(num_bands):
        cf = lowest_cf * 2.0 ** (j / 3.0)
        lo, hi = cf / 2.0 ** (1.0 / 6.0), cf * 2.0 ** (1.0 / 6.0)
        mat[j, (f >= lo) & (f < hi)] = 1.0
    return mat


def _stft(x):
    w = np.hanning(STOI_FRAME + 1)[:-1]
    n_frames = (len(x) - STOI_FRAME) // STOI_HOP + 1
    frames = np.stack([x[k * STOI_HOP:k * STOI_HOP + STOI_FRAME] * w
                       for k in range(n_frames)])
    return np.fft.rfft(frames, n=STOI_NFFT, axis=1)


def _remove_silent_frames(clean, degraded):
    w = np.hanning(STOI_FRAME + 1)[:-1]
    n_frames = (len(clean) - STOI_FRAME) // STOI_HOP + 1
    if n_frames < 1:
        raise DataError("signal too short for STOI")
    energy = np.array([20.0 * np.log10(np.linalg.norm(
        clean[k * STOI_HOP:k * STOI_HOP + STOI_FRAME] * w) + _EPS)
        for k in range(n_frames)])
    keep = energy > energy.max() - STOI_DYN_RANGE_DB
    if not np.any(keep):
        raise DataError("no speech-active frames for STOI")
    out_c = np.zeros_like(clean)
    out_d = np.zeros_like(degraded)
    pos = 0
    for k in np.flatnonzero(keep):
        seg = slice(k * STOI_HOP, k * STOI_HOP + STOI_FRAME)
        out_c[pos:pos + STOI_FRAME] += clean[seg] * w
        out_d[pos:pos + STOI_FRAME] += degraded[seg] * w
        pos += STOI_HOP
    return out_c[:pos + STOI_FRAME], out_d[:pos + STOI_FRAME]


def stoi(clean, degraded, fs=24000):
    """Short-time objective intelligibility of `degraded` given `clean`."""
    clean = np.asarray(clean, dtype=np.float64)
    degraded = np.asarray(degraded, dtype=np.float64)
    if clean.shape != degraded.shape:
        raise DataError("clean/degraded length mismatch; align them first")
    if len(clean) < fs:
        raise DataError("need at least 1 s of signal for STOI")
    if np.max(np.abs(clean)) <= _EPS:
        raise DataError("clean reference is silent")
    if fs != STOI_FS:
        g = np.gcd(int(fs), STOI_FS)
        clean = resample_poly(clean, STOI_FS // g, fs // g)
        degraded = resample_poly(degraded, STOI_FS // g, fs // g)
    clean, degraded = _remove_silent_frames(clean, degraded)
    X = np.abs(_stft(clean))
    Y = np.abs(_stft(degraded))
    band = _third_octave_matrix()
    Xb = np.sqrt(band @ (X.T ** 2))  # bands x frames
    Yb = np.sqrt(band @ (Y.T ** 2))
    n_frames = Xb.shape[1]
    if n_frames < STOI_SEG_FRAMES:
        raise DataError("too few speech-active frames for STOI")
    clip = 10.0 ** (-STOI_BETA_DB / 20.0)
    scores = []
    for m in range(STOI_SEG_FRAMES, n_frames + 1):
        xs = Xb[:, m - STOI_SEG_FRAMES:m]
        ys = Yb[:, m - STOI_SEG_FRAMES:m]
        alpha = np.linalg.norm(xs, axis=1, keepdims=True) / (
            np.linalg.norm(ys, axis=1, keepdims=True) + _EPS)
        ys = np.minimum(alpha * ys, (1.0 + clip) * xs)
        xs_c = xs - xs.mean(axis=1, keepdims=True)
        ys_c = ys - ys.mean(axis=1, keepdims=True)
        corr = np.sum(xs_c * ys_c, axis=1) / (
            np.linalg.norm(xs_c, axis=1) * np.linalg.norm(ys_c, axis=1) + _EPS)
        scores.append(corr)
    return float(np.clip(np.mean(scores), 0.0, 1.0))


def delta_stoi(clean, noisy, enhanced, fs=24000):
    """stoi(clean, enhanced) - stoi(clean, noisy) on an aligned triplet."""
    return stoi(clean, enhanced, fs) - stoi(clean, noisy, fs)


def nr_sd(speech, noise, gain_trace, fbank_cfg: FilterbankConfig = None,
          skip_frames=0):
    """Noise reduction and speech distortion via shadow filtering.

    The per-frame gain trace produced on the mixture is applied to the
    subband analyses of the separated components.  Frames before
    skip_frames (warm-up / initialization) are excluded from the sums.
    """
    cfg = fbank_cfg or FilterbankConfig()
    gain_trace = np.asarray(gain_trace, dtype=np.float64)
    S = np.stack([f.bins for f in analyze(speech, cfg)])
    N = np.stack([f.bins for f in analyze(noise, cfg)])
    n_frames = min(len(S), len(N))
    if gain_trace.shape[0] < n_frames:
        raise DataError(
            f"gain trace has {gain_trace.shape[0]} frames, need {n_frames}")
    G = gain_trace[:n_frames]
    S, N = S[:n_frames], N[:n_frames]
    sl = slice(skip_frames, None)
    noise_in = np.sum(np.abs(N[sl]) ** 2)
    noise_out = np.sum(np.abs(G[sl] * N[sl]) ** 2)
    speech_in = np.sum(np.abs(S[sl]) ** 2)
    speech_err = np.sum(np.abs(S[sl] - G[sl] * S[sl]) ** 2)
    if noise_in <= 0.0 or speech_in <= 0.0:
        raise DataError("component energy is zero after warm-up")
    nr_db = 10.0 * np.log10(noise_in / max(noise_out, _EPS * noise_in))
    if speech_err <= 0.0:
        sd_db = SD_FLOOR_DB
    else:
        sd_db = max(10.0 * np.log10(speech_err / speech_in), SD_FLOOR_DB)
    return float(nr_db), float(sd_db)


def write_records_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mixture_id", "snr_db", "system", "stoi", "delta_stoi",
                    "nr_db", "sd_db"])
        for r in records:
            w.writerow([r.mixture_id, f"{r.snr_db:.9g}", r.system,
                        f"{r.stoi:.9g}", f"{r.delta_stoi:.9g}",
                        f"{r.nr_db:.9g}", f"{r.sd_db:.9g}"])


def summarize_records(records):
    """Median and quartiles of each metric grouped by system and SNR."""
    groups = {}
    for r in records:
        groups.setdefault((r.system, r.snr_db), []).append(r)
    rows = []
    for (system, snr), recs in sorted(groups.items()):
        row = {"system": system, "snr_db": snr, "count": len(recs)}
        for name in ("stoi", "delta_stoi", "nr_db", "sd_db"):
            vals = np.array([getattr(r, name) for r in recs])
            q1, med, q3 = np.percentile(vals, [25, 50, 75])
            row[f"{name}_q1"] = float(q1)
            row[f"{name}_median"] = float(med)
            row[f"{name}_q3"] = float(q3)
        rows.append(row)
    return rows


def write_summary_csv(rows, path):
    if not rows:
        raise DataError("nothing to summarize")
    fields = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for row in rows:
            w.writerow([row[f] if isinstance(row[f], str)
                        else f"{row[f]:.9g}" for f in fields])
