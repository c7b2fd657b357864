"""Run configuration: a flat sectioned ``key = value`` file.

Example::

    [domain]
    nx = 64
    ny = 64

    [model]
    beta = 3.0

    [initial]
    preset = perturbed_uniform
    seed = 7

Unknown sections or keys, malformed values and inadmissible parameters are
reported as ``path:line: message``.  :func:`emit` writes a config back out
with ``repr`` floats so that ``parse(emit(cfg)) == cfg``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .grid import Grid
from .model import InitialData, ModelConfig, ModelError, ResupplySpec, validate_initial_data
from .presets import PRESETS, TIME_PROFILES, make_initial, make_resupply


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = "<config>", line: int | None = None):
        self.path = path
        self.line = line
        self.message = message
        loc = f"{path}:{line}" if line is not None else path
        super().__init__(f"{loc}: {message}")


@dataclass(frozen=True)
class DomainSection:
    nx: int = 64
    ny: int = 64
    lx: float = 1.0
    ly: float = 1.0


@dataclass(frozen=True)
class ModelSection:
    beta: float = 3.0
    epsilon: float = 0.0
    chi_u: float = 1.0
    chi_v: float = 1.0
    kinetics: float = 1.0
    w_floor: float = 1e-10
    u_floor: float = 1e-10


@dataclass(frozen=True)
class InitialSection:
    preset: str = "perturbed_uniform"
    u_level: float = 1.0
    v_level: float = 0.5
    w_level: float = 1.0
    amplitude: float = 0.1
    modes: int = 3
    seed: int | None = None
    center_x: float | None = None
    center_y: float | None = None
    width: float = 0.1


@dataclass(frozen=True)
class ResupplySection:
    kind: str = "constant"
    r0: float = 0.3
    peak: float = 1.0
    center_x: float | None = None
    center_y: float | None = None
    width: float = 0.15
    time: str = "constant"
    rate: float = 1.0


@dataclass(frozen=True)
class TimeSection:
    t_final: float = 10.0
    dt_init: float = 1e-2
    cfl_advect: float = 0.25
    cfl_react: float = 0.5


@dataclass(frozen=True)
class OutputSection:
    directory: str = "run"
    snapshot_stride: int = 100
    formats: tuple[str, ...] = ("csv", "snapshots")


@dataclass(frozen=True)
class AuditSection:
    C: float = 1.0
    M: float | None = None  # defaults to sup w0 + r_star
    delta: float = 1.0
    # weight of int |grad w|^2 in the combined functional
    lam: float = 1.0
    fraction: float = 0.99
    mass_tol: float = 1e-10
    w_tol: float = 1e-8
    solver_tol: float = 1e-10
    gronwall_a: float = 1.0
    gronwall_slack: float = 0.0
    weak_rel_tol: float = 0.02
    slack_factor: float = 3.0


SECTIONS = {
    "domain": DomainSection,
    "model": ModelSection,
    "initial": InitialSection,
    "resupply": ResupplySection,
    "time": TimeSection,
    "output": OutputSection,
    "audit": AuditSection,
}

# config key -> attribute name, where they differ
_KEY_ALIASES = {("audit", "lambda"): "lam"}
_ATTR_KEYS = {(s, a): k for (s, k), a in _KEY_ALIASES.items()}

FORMATS = ("csv", "snapshots")
RESUPPLY_KINDS = ("zero", "constant", "separable")


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSection = field(default_factory=DomainSection)
    model: ModelSection = field(default_factory=ModelSection)
    initial: InitialSection = field(default_factory=InitialSection)
    resupply: ResupplySection = field(default_factory=ResupplySection)
    time: TimeSection = field(default_factory=TimeSection)
    output: OutputSection = field(default_factory=OutputSection)
    audit: AuditSection = field(default_factory=AuditSection)

    # -- builders ---------------------------------------------------------

    def grid(self) -> Grid:
        d = self.domain
        return Grid(d.nx, d.ny, d.lx, d.ly)

    def model_config(self) -> ModelConfig:
        m, t = self.model, self.time
        return ModelConfig(
            beta=m.beta,
            epsilon=m.epsilon,
            t_final=t.t_final,
            dt_init=t.dt_init,
            cfl_advect=t.cfl_advect,
            cfl_react=t.cfl_react,
            w_floor=m.w_floor,
            u_floor=m.u_floor,
            solver_tol=self.audit.solver_tol,
            combined_weight=self.audit.lam,
            chi_u=m.chi_u,
            chi_v=m.chi_v,
            kinetics=m.kinetics,
        )

    def initial_data(self, grid: Grid | None = None) -> InitialData:
        i = self.initial
        return make_initial(
            grid or self.grid(),
            i.preset,
            u_level=i.u_level,
            v_level=i.v_level,
            w_level=i.w_level,
            amplitude=i.amplitude,
            modes=i.modes,
            seed=i.seed,
            center_x=i.center_x,
            center_y=i.center_y,
            width=i.width,
        )

    def resupply_spec(self, grid: Grid | None = None) -> ResupplySpec:
        r = self.resupply
        return make_resupply(
            grid or self.grid(),
            r.kind,
            r0=r.r0,
            peak=r.peak,
            center_x=r.center_x,
            center_y=r.center_y,
            width=r.width,
            time=r.time,
            rate=r.rate,
        )


# -- parsing --------------------------------------------------------------------

_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_][A-Za-z0-9_]*)\s*\]$")
_KV_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


def _convert(raw: str, typ: str):
    """Convert a raw value according to the annotation string of the field."""
    optional = "None" in typ
    if optional and raw.lower() in ("none", ""):
        return None
    base = typ.replace(" | None", "")
    if base == "int":
        if not re.fullmatch(r"[+-]?\d+", raw):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(raw)
    if base == "float":
        try:
            x = float(raw)
        except ValueError:
            raise ValueError(f"expected a number, got {raw!r}") from None
        if not math.isfinite(x):
            raise ValueError(f"expected a finite number, got {raw!r}")
        return x
    if base == "str":
        if not raw:
            raise ValueError("empty value")
        return raw
    if base.startswith("tuple"):
        return tuple(p.strip() for p in raw.split(",") if p.strip())
    raise TypeError(f"unsupported field type {typ}")


def parse(text: str, path: str = "<config>") -> RunConfig:
    """Parse config text; every error carries ``path:line``."""
    values: dict[str, dict[str, object]] = {s: {} for s in SECTIONS}
    lines: dict[tuple[str, str], int] = {}
    section_lines: dict[str, int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1)
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]; expected one of {', '.join(SECTIONS)}", path, lineno)
            if section in section_lines:
                raise ConfigError(f"duplicate section [{section}]", path, lineno)
            section_lines[section] = lineno
            continue
        m = _KV_RE.match(line)
        if not m:
            raise ConfigError(f"cannot parse line {raw.strip()!r}; expected 'key = value' or '[section]'", path, lineno)
        if section is None:
            raise ConfigError("key outside of any section", path, lineno)
        key, rawval = m.group(1), m.group(2).strip()
        attr = _KEY_ALIASES.get((section, key), key)
        ftypes = {f.name: f.type for f in fields(SECTIONS[section])}
        if attr not in ftypes or (section, attr) in _ATTR_KEYS and key != _ATTR_KEYS[(section, attr)]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", path, lineno)
        if (section, attr) in lines:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", path, lineno)
        try:
            values[section][attr] = _convert(rawval, str(ftypes[attr]))
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}", path, lineno) from None
        lines[(section, attr)] = lineno

    def where(section: str, *attrs: str) -> int | None:
        for a in attrs:
            if (section, a) in lines:
                return lines[(section, a)]
        return section_lines.get(section)

    try:
        cfg = RunConfig(**{s: SECTIONS[s](**values[s]) for s in SECTIONS})
    except TypeError as exc:  # pragma: no cover - keys are checked above
        raise ConfigError(str(exc), path) from None
    _check(cfg, path, where)
    return cfg


def _check(cfg: RunConfig, path: str, where) -> None:
    """Semantic checks, attributed to the most relevant line."""

    def fail(msg, section, *attrs):
        raise ConfigError(msg, path, where(section, *attrs))

    try:
        cfg.grid()
    except ValueError as exc:
        fail(str(exc), "domain", "nx", "ny", "lx", "ly")
    try:
        cfg.model_config()
    except ModelError as exc:
        msg = str(exc)
        if "epsilon" in msg:
            fail(msg, "model", "epsilon", "beta")
        if "beta" in msg:
            fail(msg, "model", "beta")
        if "cfl" in msg or "dt_init" in msg or "t_final" in msg:
            fail(msg, "time", *(a for a in ("cfl_advect", "cfl_react", "dt_init", "t_final") if a in msg))
        fail(msg, "model")
    i = cfg.initial
    if i.preset not in PRESETS:
        fail(f"unknown preset {i.preset!r}; expected one of {', '.join(PRESETS)}", "initial", "preset")
    if i.preset == "perturbed_uniform" and i.seed is None:
        fail("preset perturbed_uniform is randomized and needs a seed", "initial", "preset")
    if i.modes < 1:
        fail("modes must be >= 1", "initial", "modes")
    if not i.width > 0:
        fail("width must be positive", "initial", "width")
    r = cfg.resupply
    if r.kind not in RESUPPLY_KINDS:
        fail(f"unknown resupply kind {r.kind!r}; expected one of {', '.join(RESUPPLY_KINDS)}", "resupply", "kind")
    if r.time not in TIME_PROFILES:
        fail(f"unknown time profile {r.time!r}; expected one of {', '.join(TIME_PROFILES)}", "resupply", "time")
    try:
        cfg.resupply_spec()
    except ModelError as exc:
        fail(str(exc), "resupply", "r0", "peak", "kind")
    if r.kind == "separable" and not (r.width > 0 and r.peak >= 0):
        fail("separable resupply needs width > 0 and peak >= 0", "resupply", "width", "peak")
    rep = validate_initial_data(cfg.initial_data())
    if not rep.ok:
        first = rep.violations[0]
        attr = {"u0": "u_level", "v0": "v_level", "w0": "w_level"}.get(first[:2], "preset")
        fail("; ".join(rep.violations), "initial", attr)
    o = cfg.output
    bad = [f for f in o.formats if f not in FORMATS]
    if bad:
        fail(f"unknown output format(s) {', '.join(bad)}; expected a subset of {', '.join(FORMATS)}", "output", "formats")
    if o.snapshot_stride < 0:
        fail("snapshot_stride must be >= 0 (0 keeps only the first and last snapshot)", "output", "snapshot_stride")
    a = cfg.audit
    for name in ("mass_tol", "w_tol", "solver_tol", "gronwall_a", "slack_factor", "weak_rel_tol"):
        if not getattr(a, name) > 0:
            fail(f"{name} must be positive", "audit", name)
    if not 0 < a.fraction <= 1:
        fail("fraction must lie in (0, 1]", "audit", "fraction")
    if a.M is not None and not a.M > 0:
        fail("M must be positive", "audit", "M")


def load(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(p)) from None
    return parse(text, str(p))


# -- emission -------------------------------------------------------------------


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(value)
    return str(value)


def emit(cfg: RunConfig) -> str:
    """Render ``cfg`` as config text; ``None`` values are omitted."""
    out = []
    for name in SECTIONS:
        sec = getattr(cfg, name)
        out.append(f"[{name}]")
        for f in fields(sec):
            v = getattr(sec, f.name)
            if v is None:
                continue
            key = _ATTR_KEYS.get((name, f.name), f.name)
            out.append(f"{key} = {_format(v)}")
        out.append("")
    return "\n".join(out)


def with_overrides(cfg: RunConfig, section: str, **kwargs) -> RunConfig:
    return replace(cfg, **{section: replace(getattr(cfg, section), **kwargs)})
