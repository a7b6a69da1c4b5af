"""Pipeline configuration and profiles.

Two presets: `paper_scale` (200 ms look-back, width 2048) for users with
real corpora and hardware, and `desk_scale` (30 ms look-back, width 256)
which everything hermetic runs on.  The deployment latency budget is
8 ms total: filter-bank group delay plus the lookahead.
"""

from dataclasses import asdict, dataclass, field

import yaml

from .errors import ConfigError
from .features import ContextConfig
from .filterbank import FilterbankConfig, group_delay
from .network import NetworkTopology
from .wiener import gain_floor

MAX_TOTAL_LATENCY_SAMPLES = 192  # 8 ms at 24 kHz

PROFILES = {
    "desk_scale": dict(tau1_frames=30, tau2_frames=2,
                       hidden_layers=3, hidden_width=256),
    "paper_scale": dict(tau1_frames=200, tau2_frames=2,
                        hidden_layers=3, hidden_width=2048),
}


@dataclass
class PipelineConfig:
    filterbank: FilterbankConfig = field(default_factory=FilterbankConfig)
    context: ContextConfig = field(default_factory=ContextConfig)
    hidden_layers: int = 3
    hidden_width: int = 2048
    max_atten_db: float = 14.0
    profile: str = "paper_scale"

    @classmethod
    def from_profile(cls, name, **overrides):
        if name not in PROFILES:
            raise ConfigError(
                f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
        p = dict(PROFILES[name])
        p.update(overrides)
        return cls(
            context=ContextConfig(tau1_frames=p["tau1_frames"],
                                  tau2_frames=p["tau2_frames"]),
            hidden_layers=p["hidden_layers"],
            hidden_width=p["hidden_width"],
            max_atten_db=p.get("max_atten_db", 14.0),
            profile=name)

    def topology(self):
        return NetworkTopology(
            input_dim=self.context.feature_dim,
            hidden_layers=self.hidden_layers,
            hidden_width=self.hidden_width,
            output_dim=self.context.num_bands,
            gain_floor=gain_floor(self.max_atten_db)).validate()

    def latency_samples(self):
        return (group_delay(self.filterbank) +
                self.context.tau2_frames * self.filterbank.hop_samples)

    def validate(self, deployment=False):
        self.filterbank.validate()
        self.context.validate(hop_samples=self.filterbank.hop_samples,
                              deployment=deployment)
        self.topology()
        if deployment and self.latency_samples() > MAX_TOTAL_LATENCY_SAMPLES:
            raise ConfigError(
                f"total latency {self.latency_samples()} samples exceeds the "
                f"{MAX_TOTAL_LATENCY_SAMPLES}-sample (8 ms) budget")
        return self

    def snapshot(self):
        """Resolved-config dict for run provenance files."""
        d = {
            "profile": self.profile,
            "filterbank": {k: v for k, v in asdict(self.filterbank).items()
                           if k != "prototype"},
            "context": asdict(self.context),
            "hidden_layers": self.hidden_layers,
            "hidden_width": self.hidden_width,
            "max_atten_db": self.max_atten_db,
            "latency_samples": self.latency_samples(),
        }
        return d

    def write_snapshot(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.snapshot(), fh, sort_keys=True)

    @classmethod
    def from_yaml(cls, path):
        with open(path) as fh:
            d = yaml.safe_load(fh)
        cfg = cls.from_profile(d.get("profile", "desk_scale"))
        if "filterbank" in d:
            cfg.filterbank = FilterbankConfig(**d["filterbank"])
        if "context" in d:
            cfg.context = ContextConfig(**d["context"])
        for key in ("hidden_layers", "hidden_width", "max_atten_db"):
            if key in d:
                setattr(cfg, key, d[key])
        return cfg.validate()
