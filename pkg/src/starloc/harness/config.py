"""Experiment configuration: profiles, the flat ``key = value`` file format and hashing."""

from dataclasses import asdict, dataclass, fields, replace
import hashlib
import json
import math

from .. import channel as ch
from ..errors import ConfigError
from ..scenario import TABLE1_POSITIONS, Scenario
from ..star_ris import PowerConfig, dft_design, random_design

FILE_KEYS = (
    "m", "n", "k", "snr_db_list", "eps1", "eta1", "schedule", "trials", "seed",
    "pathloss", "fc_ghz", "p_b", "p_r", "p_u1", "p_u2", "d_hat", "phi_hat", "mpc_case",
)
STUDIES = ("crlb", "monte-carlo", "design", "imperfect-h4", "mpc")
SCHEDULES = ("dft", "random")
PATHLOSS = ("squared", "free_space", "umi")
MPC_CASES = ("none", "i", "ii")
DEFAULT_SNR_GRID = tuple(float(s) for s in range(-10, 45, 5))
# Fields that do not change results and are left out of the hash.
UNHASHED = ("workers",)


@dataclass(frozen=True)
class ExperimentConfig:
    m: int = 16
    n: int = 16
    k: int = 33
    snr_db_list: tuple = DEFAULT_SNR_GRID
    eps1: float = math.sqrt(0.9)
    eta1: float = math.sqrt(0.5)
    schedule: str = "dft"
    trials: int = 50
    seed: int = 0
    pathloss: str = "squared"
    fc_ghz: float = ch.DEFAULT_FC_GHZ
    p_b: tuple = TABLE1_POSITIONS["p_b"]
    p_r: tuple = TABLE1_POSITIONS["p_r"]
    p_u1: tuple = TABLE1_POSITIONS["p_u1"]
    p_u2: tuple = TABLE1_POSITIONS["p_u2"]
    d_hat: float = 0.0
    phi_hat: float = 0.0
    mpc_case: str = "none"
    study: str = "monte-carlo"
    mu_scale: float = 1.0
    workers: int = 1

    def __post_init__(self):
        for name in ("p_b", "p_r", "p_u1", "p_u2"):
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != 3:
                raise ConfigError(f"{name} needs three coordinates, got {len(v)}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "snr_db_list", tuple(float(s) for s in self.snr_db_list))
        self.validate()

    def validate(self):
        if not self.snr_db_list:
            raise ConfigError("snr_db_list must not be empty")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        for name, value in (("m", self.m), ("n", self.n)):
            if value < 1 or math.isqrt(value) ** 2 != value:
                raise ConfigError(f"{name} = {value} is not the size of a square array")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.schedule == "dft" and self.k < 2 * self.n + 1:
            raise ConfigError(f"dft schedule needs k >= 2n+1 = {2 * self.n + 1}, got k = {self.k}")
        if self.k < 1:
            raise ConfigError("k must be positive")
        for name in ("eps1", "eta1"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.pathloss not in PATHLOSS:
            raise ConfigError(f"pathloss must be one of {PATHLOSS}, got {self.pathloss!r}")
        if not self.fc_ghz > 0:
            raise ConfigError("fc_ghz must be positive")
        if self.d_hat < 0 or self.phi_hat < 0:
            raise ConfigError("d_hat and phi_hat must be non-negative")
        if self.mpc_case not in MPC_CASES:
            raise ConfigError(f"mpc_case must be one of {MPC_CASES}, got {self.mpc_case!r}")
        if self.study not in STUDIES:
            raise ConfigError(f"study must be one of {STUDIES}, got {self.study!r}")
        if not self.mu_scale > 0:
            raise ConfigError("mu_scale must be positive")

    def replace(self, **changes):
        try:
            return replace(self, **changes)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    # Derived objects

    def pathloss_model(self):
        if self.pathloss == "squared":
            return ch.PathLossModel.squared()
        if self.pathloss == "free_space":
            return ch.PathLossModel.free_space(self.fc_ghz * 1e6)
        return ch.PathLossModel.umi(self.fc_ghz)

    def scenario(self):
        try:
            return Scenario.table1(
                m=self.m,
                n=self.n,
                p_b=self.p_b,
                p_r=self.p_r,
                p_u1=self.p_u1,
                p_u2=self.p_u2,
                wavelength=ch.wavelength_from_ghz(self.fc_ghz),
                pathloss=self.pathloss_model(),
            )
        except ValueError as exc:
            raise ConfigError(f"invalid scenario: {exc}") from exc

    def power(self):
        return PowerConfig(self.eps1, self.eta1)

    def phase_schedule(self, kind=None):
        kind = self.schedule if kind is None else kind
        if kind == "dft":
            return dft_design(self.n, self.k)
        return random_design(self.n, self.k, self.seed)

    def hashed_fields(self):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in UNHASHED}


def config_hash(cfg):
    """Short digest of every result-relevant field (floats by exact repr)."""
    payload = json.dumps(
        {k: (repr(v) if isinstance(v, float) else [repr(x) for x in v] if isinstance(v, tuple) else v)
         for k, v in cfg.hashed_fields().items()},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


PROFILES = {
    "desk": ExperimentConfig(),
    "paper": ExperimentConfig(n=36, k=100),
}


def profile(name):
    try:
        return PROFILES[name]
    except KeyError:
        raise ConfigError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None


def _vector(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


_PARSERS = {
    "m": int, "n": int, "k": int, "trials": int, "seed": int,
    "eps1": float, "eta1": float, "fc_ghz": float, "d_hat": float, "phi_hat": float,
    "snr_db_list": _vector, "p_b": _vector, "p_r": _vector, "p_u1": _vector, "p_u2": _vector,
    "schedule": str.strip, "pathloss": str.strip, "mpc_case": str.strip,
}


def parse_config_text(text):
    """Parse ``key = value`` lines (``#`` starts a comment) into a dict of typed overrides."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            out[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return out


def load_config(path=None, base="desk", **overrides):
    """Profile ``base`` updated by the file at ``path`` and then by ``overrides``."""
    changes = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                changes.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    changes.update({k: v for k, v in overrides.items() if v is not None})
    return profile(base).replace(**changes)


def format_config(cfg):
    """Render the file-level keys of ``cfg`` in the ``key = value`` format."""
    lines = []
    values = asdict(cfg)
    for key in FILE_KEYS:
        v = values[key]
        lines.append(f"{key} = {', '.join(repr(x) for x in v) if isinstance(v, tuple) else v}")
    return "\n".join(lines) + "\n"
