"""Log-power features, asymmetric context buffering and buffer-local
normalization.

The gain predictor sees a window of tau1 past frames, the current frame and
tau2 future frames of log-power values.  Each window is normalized per
frequency bin by subtracting the mean over the buffered frames; the mean and
standard deviation vectors are appended to the flattened window as side
inputs, so no global signal statistics are needed and the chain stays
on-line.  Waiting for the tau2 future frames is the only algorithmic delay
this stage adds.
"""

import struct
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .filterbank import NUM_BANDS, SubbandFrame

LOG_POWER_EPS = 1e-12

FEATURE_DUMP_MAGIC = b"HADF"
FEATURE_DUMP_VERSION = 1


@dataclass
class ContextConfig:
    tau1_frames: int = 200  # look-back (200 ms at 1 ms hop)
    tau2_frames: int = 2    # lookahead, bounds the algorithmic delay
    num_bands: int = NUM_BANDS

    @property
    def tau(self):
        return self.tau1_frames + 1 + self.tau2_frames

    @property
    def feature_dim(self):
        # flattened normalized window plus mu and sigma vectors
        return self.tau * self.num_bands + 2 * self.num_bands

    def validate(self, hop_samples=24, deployment=False):
        if self.tau1_frames < 0 or self.tau2_frames < 0:
            raise ConfigError("context lengths must be non-negative")
        if self.num_bands != NUM_BANDS:
            raise ConfigError(f"num_bands must be {NUM_BANDS}")
        if deployment and self.tau2_frames * hop_samples > 48:
            raise ConfigError("lookahead exceeds the 2 ms deployment budget")
        return self


@dataclass
class ContextWindow:
    logpow: np.ndarray  # tau x num_bands, mean-removed per bin
    mu: np.ndarray
    sigma: np.ndarray
    center_frame_index: int


def log_power(frame: SubbandFrame):
    """ln of per-bin power, floored at 1e-12 so digital silence stays finite."""
    return np.log(np.maximum(np.abs(frame.bins) ** 2, LOG_POWER_EPS))


def normalize(window):
    """Remove the per-bin mean over the buffered frames.

    Returns (normalized window, mu, sigma).  sigma uses the population
    divisor (the buffer length) and is a side output only; the window is not
    divided by it.
    """
    window = np.asarray(window, dtype=np.float64)
    mu = window.mean(axis=0)
    sigma = window.std(axis=0)
    return window - mu, mu, sigma


class ContextBuffer:
    """Sliding asymmetric context over a frame stream.

    push() returns a ContextWindow centered tau2 frames behind the newest
    frame once the buffer is full, None during warm-up.
    """

    def __init__(self, cfg: ContextConfig):
        cfg.validate()
        self.cfg = cfg
        self._frames = deque(maxlen=cfg.tau)
        self._last_index = None

    def push(self, frame: SubbandFrame):
        if self._last_index is not None and frame.frame_index <= self._last_index:
            raise DataError(
                f"frame index {frame.frame_index} not increasing "
                f"(last was {self._last_index})")
        self._last_index = frame.frame_index
        self._frames.append((frame.frame_index, log_power(frame)))
        if len(self._frames) < self.cfg.tau:
            return None
        raw = np.stack([lp for _, lp in self._frames])
        norm, mu, sigma = normalize(raw)
        center = self._frames[self.cfg.tau1_frames][0]
        return ContextWindow(logpow=norm, mu=mu, sigma=sigma,
                             center_frame_index=center)


def assemble_input(win: ContextWindow):
    """Flatten a window to the network input layout: time-major normalized
    log powers (oldest frame first), then mu, then sigma."""
    return np.concatenate([win.logpow.reshape(-1), win.mu, win.sigma])


class FeatureDumpWriter:
    """Binary training dump: header then float32 LE records of
    (feature vector || 48 target gains)."""

    def __init__(self, path, ctx: ContextConfig):
        self.ctx = ctx
        self._fh = open(path, "wb")
        self._fh.write(FEATURE_DUMP_MAGIC)
        self._fh.write(struct.pack("<4I", FEATURE_DUMP_VERSION,
                                   ctx.tau1_frames, ctx.tau2_frames,
                                   ctx.num_bands))
        self.count = 0

    def write(self, features, targets):
        features = np.asarray(features, dtype="<f4")
        targets = np.asarray(targets, dtype="<f4")
        if features.shape != (self.ctx.feature_dim,):
            raise DataError(f"feature vector has shape {features.shape}, "
                            f"expected ({self.ctx.feature_dim},)")
        if targets.shape != (self.ctx.num_bands,):
            raise DataError("target vector must hold one gain per band")
        self._fh.write(features.tobytes())
        self._fh.write(targets.tobytes())
        self.count += 1

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_feature_dump(path):
    """Load a feature dump; returns (ContextConfig, X, Y) with float32
    arrays of shape (n, feature_dim) and (n, num_bands)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != FEATURE_DUMP_MAGIC:
        raise DataError(f"{path}: not a feature dump (bad magic)")
    version, tau1, tau2, bands = struct.unpack_from("<4I", blob, 4)
    if version != FEATURE_DUMP_VERSION:
        raise DataError(f"{path}: unsupported dump version {version}")
    ctx = ContextConfig(tau1_frames=tau1, tau2_frames=tau2, num_bands=bands)
    rec = ctx.feature_dim + bands
    if (len(blob) - 20) % (4 * rec) != 0:
        raise DataError(f"{path}: truncated feature dump")
    body = np.frombuffer(blob, dtype="<f4", offset=20)
    body = body.reshape(-1, rec)
    return ctx, body[:, :ctx.feature_dim].copy(), body[:, ctx.feature_dim:].copy()
