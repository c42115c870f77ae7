"""Experiment configuration: INI-style sections, CLI overrides, round-trip IO.

A config is a plain dataclass tree.  Files use ``configparser`` sections
([model], [band], [run], [pde], [mc], [gheat], [output]); every value can be
overridden on the command line with ``--set section.key=value``.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import asdict, dataclass, field, fields, replace

__all__ = [
    "ModelConfig",
    "BandConfig",
    "RunConfig",
    "PdeConfig",
    "McConfig",
    "GheatConfig",
    "OutputConfig",
    "ExperimentConfig",
    "dothan_defaults",
    "expvasicek_defaults",
]


@dataclass(frozen=True)
class ModelConfig:
    type: str = "dothan"  # "dothan" | "expvasicek"
    alpha: float = 0.3
    beta: float = 0.8
    gamma: float = -0.2
    x0: float = 3.0
    strike: float = 3.0
    k: float = 0.3
    theta: float = 0.2
    k_tilde: float = 0.3
    theta_tilde: float = 0.2

    def validate(self):
        if self.type not in ("dothan", "expvasicek"):
            raise ValueError(f"unknown model type {self.type!r}")
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if self.x0 <= 0.0:
            raise ValueError("x0 must be positive")


@dataclass(frozen=True)
class BandConfig:
    sigma_lo: float = 0.5
    sigma_hi: float = 1.0

    def validate(self):
        if not (0.0 <= self.sigma_lo <= self.sigma_hi):
            raise ValueError("need 0 <= sigma_lo <= sigma_hi")


@dataclass(frozen=True)
class RunConfig:
    horizon: float = 1.0
    eps: float = 1e-6
    hbar_center: str = "inv_eps"

    def validate(self):
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if not (0.0 < self.eps < 1.0):
            raise ValueError("eps must lie in (0, 1)")


@dataclass(frozen=True)
class PdeConfig:
    x_lo: float = 0.0
    x_hi: float = 15.0
    dx: float = 0.015
    dt: float = 0.0  # 0 means 0.8 * CFL bound
    mode: str = "sup"
    boundary: str = "dirichlet"  # "dirichlet" | "shrinking"
    store_levels: int = 801

    def validate(self):
        if self.x_hi <= self.x_lo:
            raise ValueError("x_hi must exceed x_lo")
        if self.dx <= 0.0:
            raise ValueError("dx must be positive")
        if self.mode not in ("sup", "inf"):
            raise ValueError("mode must be sup or inf")
        if self.boundary not in ("dirichlet", "shrinking"):
            raise ValueError("boundary must be dirichlet or shrinking")


@dataclass(frozen=True)
class McConfig:
    # n_steps * refinement sets the sampled drift of the uncertain paths;
    # 16 x 10 reproduces the reference terminal trajectory statistics
    n_paths: int = 100_000
    n_steps: int = 16
    refinement: int = 10
    seed: int = 12345
    chunk: int = 20_000
    dump_paths: int = 50

    def validate(self):
        if min(self.n_paths, self.n_steps, self.refinement, self.chunk) < 1:
            raise ValueError("Monte Carlo sizes must be positive")
        if self.dump_paths < 0:
            raise ValueError("dump_paths must be nonnegative")


@dataclass(frozen=True)
class GheatConfig:
    a_points: int = 201
    a_span: float = 5.0  # in units of sigma_hi
    halfwidth: float = 8.0  # in units of sigma_hi
    dx_scale: float = 0.02  # dx in units of sigma_hi
    dt_safety: float = 0.9

    def validate(self):
        if self.a_points < 3:
            raise ValueError("a_points must be >= 3")
        if not (0.0 < self.dt_safety <= 1.0):
            raise ValueError("dt_safety must lie in (0, 1]")
        if self.a_span >= self.halfwidth:
            raise ValueError("a_span must stay inside the spatial halfwidth")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    figures: bool = True

    def validate(self):
        pass


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    band: BandConfig = field(default_factory=BandConfig)
    run: RunConfig = field(default_factory=RunConfig)
    pde: PdeConfig = field(default_factory=PdeConfig)
    mc: McConfig = field(default_factory=McConfig)
    gheat: GheatConfig = field(default_factory=GheatConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> "ExperimentConfig":
        for f in fields(self):
            getattr(self, f.name).validate()
        return self

    # -- serialization ------------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for f in fields(self):
            cp[f.name] = {k: repr(v) for k, v in asdict(getattr(self, f.name)).items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_ini())

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        cfg = cls()
        for section in cp.sections():
            for key, raw in cp[section].items():
                cfg = cfg.with_override(section, key, raw)
        return cfg.validate()

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_ini(fh.read())

    def with_override(self, section: str, key: str, raw: str) -> "ExperimentConfig":
        """Apply one 'section.key=value' override with type coercion."""
        sub = getattr(self, section, None)
        if sub is None:
            raise KeyError(f"unknown config section {section!r}")
        spec = {f.name: f.type for f in fields(sub)}
        if key not in spec:
            raise KeyError(f"unknown key {key!r} in section [{section}]")
        current = getattr(sub, key)
        raw = raw.strip()
        if isinstance(current, bool):
            val = raw.lower() in ("1", "true", "yes", "on")
        elif isinstance(current, int):
            val = int(float(raw))
        elif isinstance(current, float):
            val = float(raw)
        else:
            val = raw.strip("'\"")
        return replace(self, **{section: replace(sub, **{key: val})})

    def apply_overrides(self, pairs) -> "ExperimentConfig":
        cfg = self
        for pair in pairs:
            if "=" not in pair or "." not in pair.split("=", 1)[0]:
                raise ValueError(f"override must look like section.key=value: {pair!r}")
            lhs, value = pair.split("=", 1)
            section, key = lhs.split(".", 1)
            cfg = cfg.with_override(section.strip(), key.strip(), value)
        return cfg.validate()


def dothan_defaults() -> ExperimentConfig:
    """Proportional short-rate call experiment defaults."""
    return ExperimentConfig().validate()


def expvasicek_defaults() -> ExperimentConfig:
    """Log-mean-reverting bond experiment defaults."""
    return ExperimentConfig(
        model=ModelConfig(type="expvasicek", alpha=0.3, x0=0.2, strike=0.0,
                          k=0.3, theta=0.2, k_tilde=0.3, theta_tilde=0.2),
        pde=PdeConfig(x_lo=0.02, x_hi=2.0, dx=0.002),
    ).validate()
