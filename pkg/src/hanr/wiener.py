"""Ideal Wiener gains from parallel clean/noise subband signals.

All gains are per-bin real multipliers applied to the complex noisy bins, so
the noisy phase is always preserved.  Gains are limited to the maximum
attenuation of the system (14 dB by default), giving a gain floor of
10^(-14/20) ~= 0.1995.
"""

import numpy as np

from .errors import ConfigError
from .filterbank import SubbandFrame

DEFAULT_MAX_ATTEN_DB = 14.0
POWER_EPS = 1e-12


def gain_floor(max_atten_db=DEFAULT_MAX_ATTEN_DB):
    if max_atten_db < 0:
        raise ConfigError("max_atten_db must be non-negative")
    return 10.0 ** (-max_atten_db / 20.0)


def ideal_gain(speech: SubbandFrame, noise: SubbandFrame):
    """Per-bin Wiener gain |S|^2 / (|S|^2 + |N|^2) from oracle components.

    Bins where both powers are below the floor get gain 1: with no evidence
    of either signal there is nothing to attenuate.
    """
    ps = np.abs(speech.bins) ** 2
    pn = np.abs(noise.bins) ** 2
    denom = ps + pn
    g = np.ones_like(ps)
    active = denom >= POWER_EPS
    g[active] = ps[active] / denom[active]
    return g


def clamp_gain(gains, max_atten_db=DEFAULT_MAX_ATTEN_DB):
    """Limit gains to [10^(-max_atten_db/20), 1]."""
    return np.clip(np.asarray(gains, dtype=np.float64),
                   gain_floor(max_atten_db), 1.0)


def apply_gain(frame: SubbandFrame, gains):
    """Scale each complex bin by its real gain; the Nyquist bin passes
    through unmodified."""
    gains = np.asarray(gains)
    if gains.shape != frame.bins.shape:
        raise ConfigError(
            f"gain vector length {gains.shape} does not match "
            f"{frame.bins.shape} bands")
    return SubbandFrame(bins=gains * frame.bins,
                        frame_index=frame.frame_index,
                        nyquist=frame.nyquist)
