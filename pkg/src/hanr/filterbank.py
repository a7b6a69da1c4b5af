"""Uniform 48-band weighted overlap-add analysis/synthesis filter bank.

24 kHz mono input, 48 complex subbands spaced 250 Hz, 1 ms hop.  The
prototype is a 96-sample square-root periodic Hann window with a 96-point
real DFT; the rDFT yields 49 unique bins, of which bins 0..47 form the
subband frame and the Nyquist bin (12 kHz) is carried through unmodified.

Streaming contract: frame k is produced from the most recent
window_len samples once (k+1)*hop input samples have arrived, so no input
sample beyond k*hop + window_len is consulted.  The synthesis output is
emitted sample-synchronously in hop-sized blocks, which adds the blocking
delay of hop-1 samples on top of the overlap-add alignment; the cascade
delay is window_len - 1 samples (95 at the defaults, i.e. < 6 ms).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

SAMPLE_RATE = 24000
NUM_BANDS = 48
MAX_GROUP_DELAY_SAMPLES = 144  # 6 ms at 24 kHz


@dataclass
class FilterbankConfig:
    sample_rate_hz: int = SAMPLE_RATE
    num_bands: int = NUM_BANDS
    hop_samples: int = 24
    window_len_samples: int = 96
    window_kind: str = "sqrt_hann"
    prototype: np.ndarray | None = None  # used when window_kind == "custom_prototype"

    @property
    def dft_size(self):
        return 2 * self.num_bands

    def window(self):
        L = self.window_len_samples
        if self.window_kind == "sqrt_hann":
            n = np.arange(L)
            return np.sqrt(0.5 - 0.5 * np.cos(2.0 * np.pi * n / L))
        if self.window_kind == "custom_prototype":
            if self.prototype is None:
                raise ConfigError("custom_prototype requires a prototype array")
            w = np.asarray(self.prototype, dtype=np.float64)
            if w.shape != (L,):
                raise ConfigError(
                    f"prototype length {w.shape} does not match "
                    f"window_len_samples={L}")
            return w
        raise ConfigError(f"unknown window_kind {self.window_kind!r}")

    def validate(self):
        if self.sample_rate_hz != SAMPLE_RATE:
            raise ConfigError(f"sample rate must be {SAMPLE_RATE} Hz")
        if self.num_bands != NUM_BANDS:
            raise ConfigError(f"num_bands must be {NUM_BANDS}")
        if self.window_len_samples % self.hop_samples != 0:
            raise ConfigError("window_len_samples must be a multiple of hop_samples")
        # perfect reconstruction needs the squared prototype to overlap-add
        # to a constant at the configured hop
        w2 = self.window() ** 2
        cola = w2.reshape(-1, self.hop_samples).sum(axis=0)
        if np.ptp(cola) > 1e-6 * cola.mean():
            raise ConfigError("prototype is not COLA at this hop; "
                              "reconstruction would not be exact")
        return self

    def cola_constant(self):
        w2 = self.window() ** 2
        return float(w2.reshape(-1, self.hop_samples).sum(axis=0).mean())


@dataclass
class SubbandFrame:
    bins: np.ndarray  # 48 complex values, bin f centered at f*250 Hz
    frame_index: int
    nyquist: complex = 0.0 + 0.0j

    def power(self):
        return np.abs(self.bins) ** 2


class AnalysisFilterBank:
    """Streaming analysis: push hop-sized blocks, get one SubbandFrame each."""

    def __init__(self, cfg: FilterbankConfig):
        cfg.validate()
        self.cfg = cfg
        self._window = cfg.window()
        self._buf = np.zeros(cfg.window_len_samples)
        self._index = 0

    def push(self, block):
        block = np.asarray(block, dtype=np.float64)
        R = self.cfg.hop_samples
        if block.shape != (R,):
            raise DataError(f"push expects blocks of {R} samples")
        if not np.all(np.isfinite(block)):
            raise DataError("non-finite input samples")
        self._buf[:-R] = self._buf[R:]
        self._buf[-R:] = block
        M = self.cfg.dft_size
        seg = self._window * self._buf
        if len(seg) > M:
            # prototypes longer than the DFT are time-aliased (folded)
            pad = -len(seg) % M
            seg = np.concatenate([seg, np.zeros(pad)]).reshape(-1, M).sum(axis=0)
        spec = np.fft.rfft(seg, n=M)
        frame = SubbandFrame(bins=spec[:self.cfg.num_bands],
                             frame_index=self._index,
                             nyquist=complex(spec[self.cfg.num_bands]))
        self._index += 1
        return frame


class SynthesisFilterBank:
    """Streaming synthesis: push one SubbandFrame, get a hop of output."""

    def __init__(self, cfg: FilterbankConfig):
        cfg.validate()
        self.cfg = cfg
        self._window = cfg.window()
        self._scale = 1.0 / cfg.cola_constant()
        self._ola = np.zeros(cfg.window_len_samples)
        # sample-synchronous emission: each hop-sized block waits for its
        # last sample, adding hop-1 samples of delay
        self._delay = np.zeros(cfg.hop_samples - 1)
        self._expect = 0

    def push(self, frame: SubbandFrame):
        if frame.bins.shape != (self.cfg.num_bands,):
            raise ConfigError(
                f"frame has {frame.bins.shape[0]} bands, expected "
                f"{self.cfg.num_bands}")
        R = self.cfg.hop_samples
        L = self.cfg.window_len_samples
        spec = np.concatenate([frame.bins, [frame.nyquist]])
        base = np.fft.irfft(spec, n=self.cfg.dft_size)
        seg = np.tile(base, -(-L // len(base)))[:L]
        self._ola += self._window * seg * self._scale
        aligned = self._ola[:R].copy()
        self._ola[:-R] = self._ola[R:]
        self._ola[-R:] = 0.0
        joined = np.concatenate([self._delay, aligned])
        out, self._delay = joined[:R], joined[R:]
        self._expect += 1
        return out


def analyze(pcm, cfg: FilterbankConfig):
    """Analyze a whole signal; one frame per hop (a trailing partial hop is
    zero-padded)."""
    pcm = np.asarray(pcm, dtype=np.float64)
    if not np.all(np.isfinite(pcm)):
        raise DataError("non-finite input samples")
    R = cfg.hop_samples
    n_frames = -(-len(pcm) // R)
    padded = np.zeros(n_frames * R)
    padded[:len(pcm)] = pcm
    afb = AnalysisFilterBank(cfg)
    return [afb.push(padded[k * R:(k + 1) * R]) for k in range(n_frames)]


def synthesize(frames, cfg: FilterbankConfig):
    """Synthesize a frame sequence back to a sample stream."""
    sfb = SynthesisFilterBank(cfg)
    if not frames:
        return np.zeros(0)
    return np.concatenate([sfb.push(f) for f in frames])


def warmup_frames(cfg: FilterbankConfig):
    """Frames at stream start dominated by the zero-padded edge."""
    return cfg.window_len_samples // cfg.hop_samples


def group_delay(cfg: FilterbankConfig):
    """Measured analysis+synthesis cascade delay in samples.

    Runs a unit impulse through the cascade and takes the argmax of the
    cross-correlation with the input (which for an impulse is the argmax of
    the output magnitude).
    """
    n = 4 * cfg.window_len_samples
    x = np.zeros(n)
    x[0] = 1.0
    y = synthesize(analyze(x, cfg), cfg)
    return int(np.argmax(np.abs(y)))


def check_latency(cfg: FilterbankConfig):
    """Enforce the 6 ms filter-bank latency budget."""
    d = group_delay(cfg)
    if d > MAX_GROUP_DELAY_SAMPLES:
        raise ConfigError(
            f"filter bank group delay {d} samples exceeds the "
            f"{MAX_GROUP_DELAY_SAMPLES}-sample (6 ms) budget")
    return d
