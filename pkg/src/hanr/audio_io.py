"""WAV file I/O: mono RIFF/WAVE, 16-bit PCM or 32-bit float, little-endian.

Samples are represented internally as float64 in [-1, 1).  Files with a
sample rate other than the one requested are rejected; there is no implicit
resampling.
"""

import numpy as np
from scipy.io import wavfile

from .errors import ConfigError, DataError


def read_wav(path, expect_rate=None):
    """Read a mono wav file, returning (samples, sample_rate).

    Samples are float64 in [-1, 1).  16-bit PCM is scaled by 1/32768;
    32-bit float data is passed through.
    """
    try:
        rate, data = wavfile.read(path)
    except (ValueError, EOFError) as exc:
        raise DataError(f"{path}: not a readable wav file ({exc})") from exc
    if data.ndim != 1:
        raise DataError(f"{path}: expected mono, got {data.shape[1]} channels")
    if expect_rate is not None and rate != expect_rate:
        raise ConfigError(
            f"{path}: sample rate {rate} Hz, expected {expect_rate} Hz "
            "(no implicit resampling)")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    elif data.dtype == np.float64:
        samples = data.copy()
    else:
        raise DataError(f"{path}: unsupported sample format {data.dtype}")
    if not np.all(np.isfinite(samples)):
        raise DataError(f"{path}: non-finite samples")
    return samples, rate


def write_wav(path, samples, rate, fmt="float32"):
    """Write mono samples to a wav file. fmt is 'pcm16' or 'float32'."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise DataError("write_wav expects a 1-D sample array")
    if not np.all(np.isfinite(samples)):
        raise DataError("refusing to write non-finite samples")
    if fmt == "pcm16":
        clipped = np.clip(samples, -1.0, 32767.0 / 32768.0)
        wavfile.write(path, rate, np.round(clipped * 32768.0).astype(np.int16))
    elif fmt == "float32":
        wavfile.write(path, rate, samples.astype(np.float32))
    else:
        raise ConfigError(f"unknown wav format {fmt!r}")
