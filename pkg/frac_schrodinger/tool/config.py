"""Run configuration for the frac-schrodinger tools.

Two layers:
  - environment settings (output directory, worker count, log level) read
    from the process environment or ~/.config/frac-schrodinger/.env
  - RunConfig, parsed from an INI file ([run] plus one section per
    subcommand) with command-line flags overriding file values
"""
import configparser
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from dotenv import load_dotenv

USER_ENV = Path.home() / ".config" / "frac-schrodinger" / ".env"

ENV_OUTPUT = "FRAC_SCHRODINGER_OUTPUT"
ENV_WORKERS = "FRAC_SCHRODINGER_WORKERS"
ENV_LOG_LEVEL = "FRAC_SCHRODINGER_LOG_LEVEL"

RUN_SECTION = "run"

# Subcommands whose theory needs p > 1/alpha
REQUIRES_ALPHA_P = {
    "semilinear", "quasilinear",
    "verify continuity", "verify embedding", "verify fklemma",
}

# Subcommands that accept the classical limit alpha = 1
ALLOWS_ALPHA_ONE = {"mlf eval", "mlf scan", "oracle regen"}

FORCINGS = ("zero", "ensemble")

log = logging.getLogger("frac-schrodinger.config")

# Track if we've loaded the env file
_env_loaded = False


# --- Custom Exceptions ---

class ConfigError(ValueError):
    """A run configuration value violates its constraint."""

    def __init__(self, key: str, constraint: str):
        super().__init__(constraint)
        self.key = key
        self.constraint = constraint


# --- Environment settings ---

def get_setting(key: str, default: str = "") -> str:
    """Get a setting from the environment or ~/.config/frac-schrodinger/.env.

    Args:
        key: Name of the environment variable (e.g., "FRAC_SCHRODINGER_WORKERS")
        default: Default value if key not found

    Returns:
        The setting value or default
    """
    global _env_loaded

    value = os.getenv(key)
    if value:
        return value

    if not _env_loaded and USER_ENV.exists():
        load_dotenv(USER_ENV)
        _env_loaded = True
        value = os.getenv(key)
        if value:
            return value

    return default


def default_output_dir() -> str:
    return get_setting(ENV_OUTPUT, "runs")


def default_workers() -> int:
    raw = get_setting(ENV_WORKERS, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("Ignoring non-integer %s=%r", ENV_WORKERS, raw)
        return 1


def default_log_level() -> str:
    return get_setting(ENV_LOG_LEVEL, "WARNING").upper()


# --- Run configuration ---

@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation needs; echoed as effective_config.ini."""
    subcommand: str = "solve"
    alpha: float = 0.5
    p: float = 2.0
    T: float = 1.0
    N: int = 1024
    M: int = 64
    operator: str = "dirichlet_laplacian_1d"
    ensemble: int = 100
    seed: int = 20240607
    mode_decay: float = 1.0
    smoothness: int = 4
    output: str = "runs"
    workers: int = 1
    beta: Optional[float] = None
    t_max: float = 100.0
    samples: int = 200
    s_max: float = 1.0e4
    tol: float = 1.0e-8
    max_iter: int = 50
    radius: float = 1.0
    delta: float = 0.05
    amplitude: float = 0.05
    digits: int = 60
    quadrature: str = "moments"
    plot_data: bool = False
    forcing: str = "zero"
    damping: float = 0.0
    quick: bool = False
    only: str = ""

    def validate(self) -> "RunConfig":
        """Check the constraints of this subcommand; raise ConfigError."""
        if self.subcommand in ALLOWS_ALPHA_ONE:
            if not 0.0 < self.alpha <= 1.0:
                raise ConfigError("alpha", "alpha must lie in (0,1]")
        elif not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha", "alpha must lie in (0,1)")
        if self.N < 8:
            raise ConfigError("N", "N must be at least 8")
        if self.M < 1:
            raise ConfigError("M", "M must be at least 1")
        if self.T <= 0.0:
            raise ConfigError("T", "T must be positive")
        if self.p < 1.0:
            raise ConfigError("p", "p must be at least 1")
        if self.ensemble < 1:
            raise ConfigError("ensemble", "ensemble must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers", "workers must be at least 1")
        if self.quadrature not in ("moments", "midpoint"):
            raise ConfigError("quadrature", "quadrature must be moments or midpoint")
        if self.forcing not in FORCINGS:
            raise ConfigError("forcing", "forcing must be zero or ensemble")
        if self.beta is not None and self.subcommand == "semilinear" and self.damping != 0.0 \
                and not 0.0 < self.beta < self.alpha:
            raise ConfigError("beta", "damping order beta must lie in (0, alpha)")
        if self.radius <= 0.0:
            raise ConfigError("radius", "radius must be positive")
        if self.only:
            try:
                numbers = [int(part) for part in self.only.split(",") if part.strip()]
            except ValueError:
                raise ConfigError("only", "only must be a comma-separated list of criteria") from None
            if any(not 1 <= n <= 15 for n in numbers):
                raise ConfigError("only", "criteria are numbered 1 to 15")
        if self.subcommand in REQUIRES_ALPHA_P and self.alpha * self.p <= 1.0:
            raise ConfigError("p", "alpha*p must exceed 1")
        if self.subcommand == "verify mrconstant" and self.p <= 1.0:
            raise ConfigError("p", "p must exceed 1")
        return self

    def to_ini(self) -> str:
        """Render as an INI document whose [run] section parses back to self."""
        parser = configparser.ConfigParser()
        parser[RUN_SECTION] = {k: _format_value(v) for k, v in asdict(self).items()}
        lines = []
        for key, value in parser[RUN_SECTION].items():
            lines.append(f"{key} = {value}")
        return f"[{RUN_SECTION}]\n" + "\n".join(lines) + "\n"

    def write_effective(self, directory: Path) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "effective_config.ini"
        path.write_text(self.to_ini(), encoding="utf-8", newline="\n")
        return path


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_FIELD_NAMES = {f.name.lower(): f.name for f in fields(RunConfig)}


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(key: str, raw: Any) -> Any:
    kind = _FIELD_TYPES[key]
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if kind in ("float", float):
            return float(text)
        if kind in ("int", int):
            return int(text)
        if kind in ("bool", bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind in ("Optional[float]",) or "Optional" in str(kind):
            return float(text) if text else None
    except ValueError:
        raise ConfigError(key, f"{key} has an invalid value '{text}'") from None
    return text


def read_ini(path: Path, subcommand: str) -> Dict[str, Any]:
    """Read [run] and the subcommand's own section from an INI file."""
    if not path.exists():
        raise ConfigError("config", f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path, encoding="utf-8")
    values: Dict[str, Any] = {}
    sections = [RUN_SECTION, subcommand.split()[0], subcommand.replace(" ", ".")]
    for section in sections:
        if parser.has_section(section):
            for key, raw in parser.items(section):
                values[key] = raw
    return values


def parse_config(
    path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    subcommand: str = "solve",
) -> RunConfig:
    """Build and validate a RunConfig.

    Precedence: flags (overrides) > subcommand section > [run] > env > defaults.

    Args:
        path: Optional INI file
        overrides: Flag values; None entries are ignored
        subcommand: e.g. "solve" or "verify ialpha"

    Returns:
        The validated RunConfig
    """
    base = RunConfig(
        subcommand=subcommand,
        output=default_output_dir(),
        workers=default_workers(),
    )
    values: Dict[str, Any] = {}
    if path is not None:
        values.update(read_ini(Path(path), subcommand))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    values.pop("subcommand", None)
    coerced = {}
    for key, raw in values.items():
        name = _FIELD_NAMES.get(key.lower())
        if name is None:
            raise ConfigError(key, f"unknown configuration key '{key}'")
        coerced[name] = _coerce(name, raw)
    config = replace(base, **coerced)
    log.debug("Effective config: %s", config)
    return config.validate()
