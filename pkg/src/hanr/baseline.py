"""Classical comparison systems.

Baseline: recursive minimum tracking of the smoothed subband power, as used
in commercial hearing instruments.  The noise estimate follows the minimum
of the smoothed power and may only rise by a bounded factor per frame, so
speech onsets do not leak into the estimate.

Anchor: a deliberately badly tuned minimum-statistics estimator (short
minimum window, no bias compensation) driving the same gain rule; it
over-attenuates and produces musical noise, serving as the degraded
perceptual reference.

Both feed a power-subtraction Wiener rule limited to 14 dB attenuation.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .filterbank import NUM_BANDS, SubbandFrame
from .wiener import DEFAULT_MAX_ATTEN_DB, clamp_gain

POWER_EPS = 1e-12


@dataclass
class MinTrackConfig:
    alpha: float = 0.85            # power smoothing constant
    inc_per_frame: float = 1.0012  # ~5 dB/s max rise at a 1 ms hop

    def validate(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError("alpha must be in [0, 1)")
        if self.inc_per_frame < 1.0:
            raise ConfigError("inc_per_frame must be >= 1")
        return self


class MinTracker:
    """Recursive minimum-tracking noise PSD estimator, per-bin independent."""

    def __init__(self, cfg: MinTrackConfig = None, num_bands=NUM_BANDS):
        self.cfg = (cfg or MinTrackConfig()).validate()
        self.smoothed_power = None
        self.noise_estimate = None
        self.num_bands = num_bands

    def update(self, frame: SubbandFrame):
        """Returns the current noise PSD estimate (48-vector)."""
        power = np.maximum(frame.power(), POWER_EPS)
        if self.smoothed_power is None:
            self.smoothed_power = power.copy()
            self.noise_estimate = power.copy()
        else:
            a = self.cfg.alpha
            self.smoothed_power = a * self.smoothed_power + (1.0 - a) * power
            self.noise_estimate = np.minimum(
                self.smoothed_power,
                self.noise_estimate * self.cfg.inc_per_frame)
        return self.noise_estimate.copy()


@dataclass
class AnchorConfig:
    alpha: float = 0.96        # heavy smoothing lets speech pull the minimum up
    window_frames: int = 24    # far too short for minimum statistics

    def validate(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError("alpha must be in [0, 1)")
        if self.window_frames < 1:
            raise ConfigError("window_frames must be >= 1")
        return self


class AnchorTracker:
    """Short-window minimum statistics without bias compensation."""

    def __init__(self, cfg: AnchorConfig = None, num_bands=NUM_BANDS):
        self.cfg = (cfg or AnchorConfig()).validate()
        self.smoothed_power = None
        self._history = deque(maxlen=self.cfg.window_frames)

    def update(self, frame: SubbandFrame):
        power = np.maximum(frame.power(), POWER_EPS)
        if self.smoothed_power is None:
            self.smoothed_power = power.copy()
        else:
            a = self.cfg.alpha
            self.smoothed_power = a * self.smoothed_power + (1.0 - a) * power
        self._history.append(self.smoothed_power.copy())
        return np.min(np.stack(self._history), axis=0)


def spectral_gain(frame: SubbandFrame, noise_psd,
                  max_atten_db=DEFAULT_MAX_ATTEN_DB):
    """Power-subtraction Wiener rule with the shared attenuation limit."""
    noise_psd = np.asarray(noise_psd)
    power = np.maximum(frame.power(), POWER_EPS)
    g = np.maximum(1.0 - noise_psd / power, 0.0)
    return clamp_gain(g, max_atten_db)


def run_baseline(frames, cfg: MinTrackConfig = None,
                 max_atten_db=DEFAULT_MAX_ATTEN_DB):
    """Gain trace of the minimum-tracking baseline over a frame sequence."""
    tracker = MinTracker(cfg)
    return np.stack([spectral_gain(f, tracker.update(f), max_atten_db)
                     for f in frames])


def run_anchor(frames, cfg: AnchorConfig = None,
               max_atten_db=DEFAULT_MAX_ATTEN_DB):
    """Gain trace of the badly tuned minimum-statistics anchor."""
    tracker = AnchorTracker(cfg)
    return np.stack([spectral_gain(f, tracker.update(f), max_atten_db)
                     for f in frames])
