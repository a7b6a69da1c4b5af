"""Mixture corpus construction.

A mixture is x = g_L * (n0 + g_S * s0) = s + n, where s0 is a speech file,
n0 a sum of up to four offset noise segments, g_S sets the target SNR and
g_L in {-6, 0, +6} dB jitters the absolute level without touching the SNR.
Every mixture is described by a manifest line (JSON) that, together with the
corpus, reproduces it bit for bit.

Train/validation/test splits are made at original-file level so no speech
or noise source ever appears in more than one split.

Since the recorded noise corpus and the speech database behind the original
experiments are not distributable, `make_desk_corpus` synthesizes small
stand-ins: tone-complex "speech" with syllabic modulation and colored /
modulated noises.  All tests run hermetically on these.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .audio_io import read_wav, write_wav
from .errors import ConfigError, DataError
from .filterbank import SAMPLE_RATE

DEFAULT_SNR_SET_DB = (-10.0, -5.0, 0.0, 5.0, 10.0, 20.0)
LEVEL_JITTER_DB = (-6.0, 0.0, 6.0)
MAX_NOISES = 4


@dataclass
class NoiseComponent:
    noise_id: str
    offset_samples: int


@dataclass
class MixManifest:
    mixture_id: str
    speech_id: str
    noises: list  # list[NoiseComponent]
    target_snr_db: float
    g_s: float
    g_l_db: float
    split: str
    rng_seed: int
    num_samples: int
    peak_norm: float = 1.0  # >1 means the triplet was divided by this peak

    def to_json(self):
        d = asdict(self)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line):
        d = json.loads(line)
        d["noises"] = [NoiseComponent(**n) for n in d["noises"]]
        return cls(**d)


def build_noise_mixture(noises, offsets, num_samples):
    """Sum 1..4 offset noise segments into n0."""
    if not 1 <= len(noises) <= MAX_NOISES:
        raise ConfigError(f"need 1..{MAX_NOISES} noises, got {len(noises)}")
    if len(offsets) != len(noises):
        raise ConfigError("one offset per noise required")
    n0 = np.zeros(num_samples)
    for noise, off in zip(noises, offsets):
        if off < 0 or off + num_samples > len(noise):
            raise DataError(
                f"offset {off} + {num_samples} samples exceeds noise length "
                f"{len(noise)}")
        n0 += noise[off:off + num_samples]
    return n0


def compute_gs(s0, n0, target_snr_db):
    """Speech gain that puts g_S*s0 at target_snr_db above n0 (full-segment
    RMS)."""
    rms_s = float(np.sqrt(np.mean(np.square(s0))))
    rms_n = float(np.sqrt(np.mean(np.square(n0))))
    if rms_s <= 0.0 or rms_n <= 0.0:
        raise DataError("zero-energy speech or noise segment")
    return 10.0 ** (target_snr_db / 20.0) * rms_n / rms_s


def mix(s0, n0, manifest: MixManifest):
    """Realize (x, s, n) from aligned sources; x is computed as s + n so the
    additivity holds exactly in the float domain.

    If the mixture would clip, all three signals are divided by its peak and
    manifest.peak_norm records the factor.
    """
    if len(s0) != len(n0):
        raise DataError("speech and noise segments differ in length")
    g_l = 10.0 ** (manifest.g_l_db / 20.0)
    s = g_l * manifest.g_s * np.asarray(s0, dtype=np.float64)
    n = g_l * np.asarray(n0, dtype=np.float64)
    x = s + n
    peak = float(np.max(np.abs(x)))
    if peak > 1.0:
        manifest.peak_norm = peak
        s /= peak
        n /= peak
        x = s + n
    return x, s, n


def split_corpus(speech_ids, noise_ids, ratios=(0.8, 0.1, 0.1), seed=0):
    """Partition original file ids into train/val/test.

    Returns ({speech_id: split}, {noise_id: split}).  Mixtures always take
    the split of their sources; sources never span splits.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {sum(ratios)}")
    rng = np.random.default_rng(seed)

    def assign(ids, kind):
        ids = sorted(ids)
        n = len(ids)
        n_train = int(round(ratios[0] * n))
        n_val = int(round(ratios[1] * n))
        n_test = n - n_train - n_val
        if min(n_train, n_val, n_test) < 1:
            raise DataError(
                f"cannot split {n} {kind} files into three non-empty sets; "
                "supply more files rather than risking leakage")
        order = rng.permutation(n)
        out = {}
        for pos, idx in enumerate(order):
            if pos < n_train:
                out[ids[idx]] = "train"
            elif pos < n_train + n_val:
                out[ids[idx]] = "val"
            else:
                out[ids[idx]] = "test"
        return out

    return assign(speech_ids, "speech"), assign(noise_ids, "noise")


def realize_manifest(man: MixManifest, corpus_dir):
    """Regenerate (x, s, n) for a manifest from the corpus files."""
    corpus = Path(corpus_dir)
    s0, _ = read_wav(corpus / f"{man.speech_id}.wav", expect_rate=SAMPLE_RATE)
    s0 = s0[:man.num_samples]
    noises = []
    offsets = []
    for comp in man.noises:
        sig, _ = read_wav(corpus / f"{comp.noise_id}.wav",
                          expect_rate=SAMPLE_RATE)
        noises.append(sig)
        offsets.append(comp.offset_samples)
    n0 = build_noise_mixture(noises, offsets, man.num_samples)
    return mix(s0, n0, man)


def generate_mixtures(corpus_dir, out_dir, counts=(8, 2, 2),
                      snr_set_db=DEFAULT_SNR_SET_DB, seed=0,
                      split_ratios=(0.6, 0.2, 0.2), write_audio=True):
    """Draw manifests and (optionally) render wav triplets.

    counts = number of mixtures per (train, val, test) split.  Returns the
    manifest list; also writes manifests.jsonl into out_dir.
    """
    corpus = Path(corpus_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    speech_ids = sorted(p.stem for p in corpus.glob("speech_*.wav"))
    noise_ids = sorted(p.stem for p in corpus.glob("noise_*.wav"))
    if not speech_ids or not noise_ids:
        raise DataError(f"{corpus}: no speech_*/noise_* wav files found")
    s_split, n_split = split_corpus(speech_ids, noise_ids,
                                    ratios=split_ratios, seed=seed)
    rng = np.random.default_rng(seed + 1)
    lengths = {nid: len(read_wav(corpus / f"{nid}.wav")[0])
               for nid in noise_ids}
    manifests = []
    for split, count in zip(("train", "val", "test"), counts):
        sp = [i for i in speech_ids if s_split[i] == split]
        no = [i for i in noise_ids if n_split[i] == split]
        for j in range(count):
            speech_id = sp[int(rng.integers(len(sp)))]
            s0, _ = read_wav(corpus / f"{speech_id}.wav",
                             expect_rate=SAMPLE_RATE)
            num = len(s0)
            k = int(rng.integers(1, MAX_NOISES + 1))
            comps = []
            sigs = []
            for _ in range(k):
                nid = no[int(rng.integers(len(no)))]
                max_off = lengths[nid] - num
                if max_off < 0:
                    raise DataError(f"noise {nid} shorter than speech "
                                    f"{speech_id}")
                off = int(rng.integers(max_off + 1))
                comps.append(NoiseComponent(noise_id=nid, offset_samples=off))
                sigs.append(read_wav(corpus / f"{nid}.wav")[0])
            n0 = build_noise_mixture(sigs, [c.offset_samples for c in comps],
                                     num)
            snr = float(snr_set_db[int(rng.integers(len(snr_set_db)))])
            g_l_db = float(LEVEL_JITTER_DB[int(rng.integers(len(LEVEL_JITTER_DB)))])
            man = MixManifest(
                mixture_id=f"{split}_{j:04d}",
                speech_id=speech_id,
                noises=comps,
                target_snr_db=snr,
                g_s=compute_gs(s0[:num], n0, snr),
                g_l_db=g_l_db,
                split=split,
                rng_seed=seed,
                num_samples=num)
            x, s, n = mix(s0[:num], n0, man)
            if write_audio:
                for tag, sig in (("x", x), ("s", s), ("n", n)):
                    write_wav(out / f"{man.mixture_id}_{tag}.wav", sig,
                              SAMPLE_RATE, fmt="float32")
            manifests.append(man)
    with open(out / "manifests.jsonl", "w") as fh:
        for man in manifests:
            fh.write(man.to_json() + "\n")
    return manifests


def load_manifests(path):
    with open(path) as fh:
        return [MixManifest.from_json(line) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# synthetic desk-scale corpus


def _syllabic_envelope(n, rate, rng):
    """4 Hz-ish raised-cosine bursts with random pauses."""
    env = np.zeros(n)
    pos = 0
    while pos < n:
        syl = int(rate * rng.uniform(0.12, 0.3))
        burst = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(syl) / syl)
        end = min(pos + syl, n)
        env[pos:end] = burst[:end - pos]
        pos = end + int(rate * rng.uniform(0.02, 0.15))
    return env


def synth_speech(duration_s, seed, rate=SAMPLE_RATE):
    """Tone-complex stand-in for speech: modulated harmonics plus
    fricative-like high-frequency bursts."""
    rng = np.random.default_rng(seed)
    n = int(duration_s * rate)
    t = np.arange(n) / rate
    f0 = rng.uniform(110.0, 220.0)
    vib = 1.0 + 0.01 * np.sin(2 * np.pi * rng.uniform(4.0, 7.0) * t)
    voiced = np.zeros(n)
    for h in range(1, 24):
        if h * f0 > 5000.0:
            break
        voiced += (1.0 / h) * np.sin(2 * np.pi * h * f0 * vib * t +
                                     rng.uniform(0, 2 * np.pi))
    voiced *= _syllabic_envelope(n, rate, rng)
    fric = rng.standard_normal(n)
    b, a = sps.butter(4, [3000.0 / (rate / 2), 8000.0 / (rate / 2)], "band")
    fric = sps.lfilter(b, a, fric) * _syllabic_envelope(n, rate, rng) * 0.5
    x = voiced + fric
    return 0.3 * x / np.max(np.abs(x))


def synth_noise(duration_s, seed, rate=SAMPLE_RATE):
    """Colored, optionally modulated noise stand-in."""
    rng = np.random.default_rng(seed)
    n = int(duration_s * rate)
    white = rng.standard_normal(n)
    kind = seed % 3
    if kind == 0:  # low-pass rumble
        b, a = sps.butter(2, rng.uniform(300.0, 1200.0) / (rate / 2))
        x = sps.lfilter(b, a, white)
    elif kind == 1:  # band-passed hiss
        lo = rng.uniform(500.0, 2000.0)
        hi = lo + rng.uniform(1500.0, 6000.0)
        b, a = sps.butter(2, [lo / (rate / 2), min(hi, 11000.0) / (rate / 2)],
                          "band")
        x = sps.lfilter(b, a, white)
    else:  # slowly modulated broadband
        mod = 1.0 + 0.5 * np.sin(2 * np.pi * rng.uniform(0.3, 1.5) *
                                 np.arange(n) / rate)
        b, a = sps.butter(1, rng.uniform(2000.0, 8000.0) / (rate / 2))
        x = sps.lfilter(b, a, white) * mod
    return 0.2 * x / np.max(np.abs(x))


def make_desk_corpus(corpus_dir, n_speech=8, n_noise=6, speech_duration_s=2.0,
                     noise_duration_s=4.0, seed=0):
    """Write a hermetic synthetic corpus of speech_*/noise_* wav files."""
    corpus = Path(corpus_dir)
    corpus.mkdir(parents=True, exist_ok=True)
    for i in range(n_speech):
        write_wav(corpus / f"speech_{i:03d}.wav",
                  synth_speech(speech_duration_s, seed=seed * 1000 + i),
                  SAMPLE_RATE, fmt="float32")
    for i in range(n_noise):
        write_wav(corpus / f"noise_{i:03d}.wav",
                  synth_noise(noise_duration_s, seed=seed * 2000 + i),
                  SAMPLE_RATE, fmt="float32")
    return corpus
