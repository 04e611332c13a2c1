"""Run configuration: typed INI sections with line/key diagnostics."""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError

# (section, key, attribute, type)
_SCHEMA: list[tuple[str, str, str, type]] = [
    ("geometry", "length", "length", float),
    ("geometry", "height", "height", float),
    ("geometry", "kappa", "kappa", float),
    ("geometry", "alpha", "alpha", float),
    ("mesh", "nx", "nx", int),
    ("mesh", "ny_lower", "ny_lower", int),
    ("mesh", "ny_upper", "ny_upper", int),
    ("boundary", "inlet", "inlet", str),
    ("boundary", "outlet", "outlet", str),
    ("boundary", "bottom", "bottom", str),
    ("fluid", "density", "density", float),
    ("fluid", "viscosity", "viscosity", float),
    ("shell", "lame_lambda", "lame_lambda", float),
    ("shell", "lame_mu", "lame_mu", float),
    ("shell", "thickness_half", "thickness_half", float),
    ("shell", "density", "shell_density", float),
    ("shell", "basis", "shell_basis", str),
    ("shell", "n_modes", "n_shell_modes", int),
    ("shell", "quad_order", "shell_quad_order", int),
    ("galerkin", "path", "path", str),
    ("galerkin", "n_fluid_modes", "n_fluid_modes", int),
    ("galerkin", "quad_order", "quad_order", int),
    ("time", "dt", "dt", float),
    ("time", "T", "T", float),
    ("time", "theta", "theta", float),
    ("regularization", "epsilon", "epsilon", float),
    ("regularization", "levels", "eps_levels", int),
    ("regularization", "kernel_points", "kernel_points", int),
    ("regularization", "velocity_kernel_points", "velocity_kernel_points", int),
    ("regularization", "velocity_grid_factor", "velocity_grid_factor", float),
    ("picard", "tol", "picard_tol", float),
    ("picard", "max_iter", "picard_max_iter", int),
    ("picard", "relaxation", "relaxation", float),
    ("picard", "max_bisections", "max_bisections", int),
    ("data", "scenario", "scenario", str),
    ("data", "eta0_amp", "eta0_amp", float),
    ("data", "eta1_amp", "eta1_amp", float),
    ("data", "vortex_amp", "vortex_amp", float),
    ("data", "f_amp", "f_amp", float),
    ("data", "g_amp", "g_amp", float),
    ("data", "delta_amp", "delta_amp", float),
    ("output", "snapshot_every", "snapshot_every", int),
    ("output", "trace_points", "trace_points", int),
    ("output", "plot", "plot", bool),
    ("run", "seed", "seed", int),
]

SCENARIOS = {
    "zero": dict(eta0_amp=0.0, eta1_amp=0.0, vortex_amp=0.0, f_amp=0.0, g_amp=0.0, delta_amp=0.0),
    "free": dict(eta0_amp=0.0, eta1_amp=0.1, vortex_amp=0.2, f_amp=0.0, g_amp=0.0, delta_amp=0.05),
    "forced": dict(eta0_amp=0.02, eta1_amp=0.0, vortex_amp=0.0, f_amp=0.5, g_amp=0.5, delta_amp=0.0),
}
DATA_KEYS = tuple(SCENARIOS["zero"])


@dataclass(frozen=True)
class RunConfig:
    length: float = 2.0
    height: float = 1.0
    kappa: float = 0.8
    alpha: float = 0.3
    nx: int = 16
    ny_lower: int = 7
    ny_upper: int = 3
    inlet: str = "natural"
    outlet: str = "natural"
    bottom: str = "natural"
    density: float = 1.0
    viscosity: float = 1.0
    lame_lambda: float = 1.0
    lame_mu: float = 1.0
    thickness_half: float = 1.0
    shell_density: float = 1.0
    shell_basis: str = "quadratic-bsplines-clamped"
    n_shell_modes: int = 0
    shell_quad_order: int = 8
    path: str = "saddle"
    n_fluid_modes: int = 0
    quad_order: int = 6
    dt: float = 0.01
    T: float = 0.5
    theta: float = 0.5
    epsilon: float = 0.0
    eps_levels: int = 4
    kernel_points: int = 8
    velocity_kernel_points: int = 6
    velocity_grid_factor: float = 0.5
    picard_tol: float = 1e-7
    picard_max_iter: int = 40
    relaxation: float = 0.7
    max_bisections: int = 3
    scenario: str = "zero"
    eta0_amp: float = 0.0
    eta1_amp: float = 0.0
    vortex_amp: float = 0.0
    f_amp: float = 0.0
    g_amp: float = 0.0
    delta_amp: float = 0.0
    snapshot_every: int = 10
    trace_points: int = 9
    plot: bool = True
    seed: int = 0
    source_text: str = field(default="", compare=False, repr=False)

    def __post_init__(self):
        validate(self)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_ini(self) -> str:
        lines, current = [], None
        for section, key, attr, _ in _SCHEMA:
            if section != current:
                if current is not None:
                    lines.append("")
                lines.append(f"[{section}]")
                current = section
            val = getattr(self, attr)
            lines.append(f"{key} = {str(val).lower() if isinstance(val, bool) else val}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()


def scenario_config(name: str, **changes) -> RunConfig:
    if name not in SCENARIOS:
        raise ConfigurationError(f"unknown scenario {name!r}; choose one of {sorted(SCENARIOS)}")
    return RunConfig(scenario=name, **{**SCENARIOS[name], **changes})


def validate(cfg: RunConfig) -> None:
    def need(cond, key, msg):
        if not cond:
            raise ConfigurationError(f"{key}: {msg}")

    need(cfg.length > 0 and cfg.height > 0, "geometry", "length and height must be positive")
    need(0 < cfg.alpha < cfg.kappa < cfg.height, "geometry", "need 0 < alpha < kappa < height")
    need(cfg.nx >= 4 and cfg.ny_lower >= 1 and cfg.ny_upper >= 1, "mesh", "mesh counts too small")
    for k in ("inlet", "outlet", "bottom"):
        need(getattr(cfg, k) in ("natural", "no-slip"), k, "must be 'natural' or 'no-slip'")
    need(cfg.density >= 0 and cfg.viscosity >= 0, "fluid", "density and viscosity must be non-negative")
    need(cfg.path in ("saddle", "modal"), "path", "must be 'saddle' or 'modal'")
    need(cfg.n_shell_modes >= 0 and cfg.n_fluid_modes >= -1, "modes", "mode counts must be non-negative")
    need(cfg.quad_order >= 4 and cfg.shell_quad_order >= 4, "quad_order", "quadrature order must be at least 4")
    need(cfg.dt > 0 and cfg.T > 0 and cfg.dt <= cfg.T, "time", "need 0 < dt <= T")
    need(abs(cfg.n_steps * cfg.dt - cfg.T) < 1e-9 * cfg.T, "time", "T must be a multiple of dt")
    need(0.5 <= cfg.theta <= 1.0, "theta", "theta must lie in [0.5, 1]")
    need(cfg.epsilon >= 0 and cfg.eps_levels >= 1, "regularization", "epsilon >= 0 and levels >= 1")
    need(cfg.kernel_points >= 2 and cfg.velocity_kernel_points >= 2, "regularization", "kernel points >= 2")
    need(cfg.velocity_grid_factor > 0, "velocity_grid_factor", "must be positive")
    need(cfg.picard_tol > 0 and cfg.picard_max_iter >= 1, "picard", "tol > 0 and max_iter >= 1")
    need(0 < cfg.relaxation <= 1, "relaxation", "must lie in (0, 1]")
    need(cfg.max_bisections >= 0, "max_bisections", "must be non-negative")
    need(cfg.scenario in (*SCENARIOS, "custom"), "scenario", f"unknown scenario {cfg.scenario!r}")
    need(cfg.snapshot_every >= 1 and cfg.trace_points >= 2, "output", "snapshot_every >= 1, trace_points >= 2")
    need(0 <= cfg.seed < 2**64, "seed", "seed must be an unsigned 64-bit integer")


def _line_index(text: str) -> dict:
    where, section = {}, None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            where.setdefault((section, None), no)
        elif section is not None:
            key = line.split("=", 1)[0].split(":", 1)[0].strip()
            where[(section, key)] = no
    return where


def _convert(raw: str, typ: type):
    if typ is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if typ is int:
        return int(raw.strip(), 0)
    return typ(raw.strip())


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse INI text.  A ``data.scenario`` preset fills unset data keys."""
    where = _line_index(text)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    table = {(s, k): (a, t) for s, k, a, t in _SCHEMA}
    sections = {s for s, *_ in _SCHEMA}
    values = {}
    for section in parser.sections():
        if section not in sections:
            raise ConfigurationError(f"{source}:{where.get((section, None), '?')}: unknown section [{section}]")
        for key, raw in parser.items(section):
            line = where.get((section, key), "?")
            if (section, key) not in table:
                raise ConfigurationError(f"{source}:{line}: unknown key {key!r} in [{section}]")
            attr, typ = table[(section, key)]
            try:
                values[attr] = _convert(raw, typ)
            except ValueError as exc:
                raise ConfigurationError(f"{source}:{line}: [{section}] {key}: {exc}") from exc
    scen = values.get("scenario", "zero")
    if scen in SCENARIOS:
        values = {**SCENARIOS[scen], **values}
    elif scen != "custom":
        line = where.get(("data", "scenario"), "?")
        raise ConfigurationError(f"{source}:{line}: [data] scenario: unknown scenario {scen!r}")
    try:
        return RunConfig(**values, source_text=text)
    except ConfigurationError as exc:
        key = str(exc).split(":", 1)[0]
        hit = [(s, k) for s, k, a, _ in _SCHEMA if a == key or s == key or k == key]
        line = next((where[h] for h in hit if h in where), "?")
        raise ConfigurationError(f"{source}:{line}: {exc}") from exc


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read configuration {p}: {exc}") from exc
    return parse_config(text, str(p))
