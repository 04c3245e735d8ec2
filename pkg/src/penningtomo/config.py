"""Run configuration: true state, cutoffs, drive, detector and statistics."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .states import EntangledState, build_entangled_state

DESK_EVENTS = 100_000
FULL_EVENTS = 1_000_000


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _default_pulses():
    return [{"chi": math.pi / 2, "phi_d": 0.0}, {"chi": math.pi / 2, "phi_d": math.pi / 2}]


@dataclass
class TomographyConfig:
    c1: float = 0.5
    c2_mod: float = math.sqrt(3) / 2
    theta: float = math.pi
    gamma: float = 1.0
    xi: float = math.pi
    nc: int = 10
    n: int = 12
    alpha_mod: float = 0.7
    phases: int | None = None
    eta: float = 0.9
    events: int = DESK_EVENTS
    seed: int = 42
    out_dir: str = "out"
    psd_projection: bool = False
    exact_mode: bool = False
    state_cutoff: int | None = None
    spin_pulses: list = field(default_factory=_default_pulses)
    cond_max: float = 1e10
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.phases is None:
            self.phases = 2 * self.nc + 2
        if self.state_cutoff is None:
            self.state_cutoff = self.nc
        self.validate()

    def validate(self):
        if self.nc < 0:
            raise ConfigError("nc", "must be >= 0")
        if self.n < self.nc:
            raise ConfigError("n", f"measured range N={self.n} must be >= Nc={self.nc}")
        if self.phases < 2 * self.nc + 1:
            raise ConfigError("phases", f"K={self.phases} < 2*Nc+1={2 * self.nc + 1}; Fourier bands alias")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("eta", f"must lie in (0, 1], got {self.eta}")
        if abs(self.c1**2 + self.c2_mod**2 - 1.0) > 1e-9:
            raise ConfigError("c1", "c1^2 + c2_mod^2 must equal 1")
        if self.c1 < 0 or self.c2_mod < 0:
            raise ConfigError("c1", "c1 and c2_mod must be non-negative")
        if self.alpha_mod < 0:
            raise ConfigError("alpha_mod", "must be >= 0")
        if self.events < 1:
            raise ConfigError("events", "must be >= 1")
        if self.state_cutoff < 0:
            raise ConfigError("state_cutoff", "must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        for i, pulse in enumerate(self.spin_pulses):
            if set(pulse) != {"chi", "phi_d"}:
                raise ConfigError(f"spin_pulses[{i}]", "needs exactly the keys 'chi' and 'phi_d'")

    def true_state(self) -> EntangledState:
        return build_entangled_state(self.c1, self.c2_mod, self.theta, self.gamma, self.xi, self.state_cutoff)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> TomographyConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config field")
        return cls(**data)

    @classmethod
    def load(cls, path) -> TomographyConfig:
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"not valid JSON ({exc})") from exc
        return cls.from_dict(data)

    def dump(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))


def asymmetric_config(**overrides) -> TomographyConfig:
    """Asymmetric superposition, gamma = 1, |alpha| = 0.7.

    Nc = 6 balances truncation bias against the noise amplification of the
    far bands at this drive strength; the state itself is simulated to n = 16.
    """
    base = dict(c1=0.5, c2_mod=math.sqrt(3) / 2, theta=math.pi, gamma=1.0, xi=math.pi,
                nc=6, n=12, state_cutoff=16, alpha_mod=0.7, eta=0.9)
    base.update(overrides)
    return TomographyConfig(**base)


def symmetric_config(**overrides) -> TomographyConfig:
    """Symmetric superposition, gamma = 1.5, |alpha| = 1.2 (Nc = 9, state to n = 20)."""
    base = dict(c1=math.sqrt(2) / 2, c2_mod=math.sqrt(2) / 2, theta=0.0, gamma=1.5, xi=math.pi,
                nc=9, n=16, state_cutoff=20, alpha_mod=1.2, eta=0.9)
    base.update(overrides)
    return TomographyConfig(**base)


PRESETS = {"asymmetric": asymmetric_config, "symmetric": symmetric_config}
