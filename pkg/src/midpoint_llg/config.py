"""Run configuration: a flat ``key = value`` text format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import model as mdl
from .integrator import hedgehog_initial
from .mesh import Mesh

__all__ = ["RunConfig", "ConfigError", "parse_config", "load_config", "build_model", "initial_state"]

MODES = ("fixedpoint", "newton", "ideal")
PRESETS = ("exchange", "exchange_dmi", "general")
PI_KINDS = ("zero", "scaling", "uniaxial")
INITIAL = ("hedgehog", "uniform", "random")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _floats(text: str, count: int | None = None) -> tuple[float, ...]:
    parts = [p for p in text.replace(",", " ").split() if p]
    values = tuple(float(p) for p in parts)
    if count is not None and len(values) != count:
        raise ValueError(f"expected {count} numbers, got {len(values)}")
    return values


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    N: int = 4
    k: float = 1e-3
    T: float = 0.01
    alpha: float = 1.0
    eps: float = 1e-8
    mode: str = "newton"
    preset: str = "exchange"
    lex: float = 1.0
    ldm: float = 1.0
    paper_literal_pi: bool = False
    pi: str = "zero"
    pi_c: float = 0.0
    pi_axis: tuple = (0.0, 0.0, 1.0)
    f: tuple = (0.0, 0.0, 0.0)
    A: tuple = ()  # 27 numbers: A_1, A_2, A_3 row-major (general preset)
    J: tuple = ()  # 27 numbers: J_1, J_2, J_3 row-major (general preset)
    initial: str = "hedgehog"
    seed: int = 0
    output: str = "results"
    iteration_cap: int = 100
    linear_tol: float = 1e-14
    linear_max_iter: int = 1000
    vtk_every: int = 0
    # sweeps
    N_list: tuple = (2, 4, 8, 16)
    k0: float = 0.00016
    q: float = 1.25
    j_max: int = 27
    k_list: tuple = ()  # eps-sweep time-step per entry of N_list; empty = half the fixed-point threshold
    k_fraction: float = 0.5
    eps_j_max: int = 24
    sweep_modes: tuple = ("fixedpoint", "newton")
    stop_at_first_infeasible: bool = True
    source_lines: dict = field(default_factory=dict, repr=False, compare=False)

    def k_schedule(self) -> np.ndarray:
        return self.k0 * self.q ** np.arange(self.j_max + 1)

    def eps_list(self) -> np.ndarray:
        return 10.0 ** (-np.arange(self.eps_j_max + 1) / 2.0)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("source_lines")
        return d


_PARSERS = {
    "N": int, "k": float, "T": float, "alpha": float, "eps": float,
    "mode": str, "preset": str, "lex": float, "ldm": float,
    "paper_literal_pi": _bool, "pi": str, "pi_c": float,
    "pi_axis": lambda s: _floats(s, 3), "f": lambda s: _floats(s, 3),
    "A": lambda s: _floats(s, 27), "J": lambda s: _floats(s, 27),
    "initial": str, "seed": int, "output": str,
    "iteration_cap": int, "linear_tol": float, "linear_max_iter": int, "vtk_every": int,
    "N_list": _ints, "k0": float, "q": float, "j_max": int,
    "k_list": _floats, "k_fraction": float, "eps_j_max": int,
    "sweep_modes": lambda s: tuple(p for p in s.replace(",", " ").split()),
    "stop_at_first_infeasible": _bool,
}

_POSITIVE = ("N", "k", "T", "alpha", "eps", "lex", "iteration_cap", "linear_tol", "linear_max_iter",
             "k0", "q", "k_fraction")
_NONNEGATIVE = ("ldm", "vtk_every", "j_max", "eps_j_max", "seed")


def _check(cfg: RunConfig) -> None:
    def fail(key, msg):
        raise ConfigError(f"{key}: {msg}", cfg.source_lines.get(key))

    for key in _POSITIVE:
        if not getattr(cfg, key) > 0:
            fail(key, f"must be positive, got {getattr(cfg, key)}")
    for key in _NONNEGATIVE:
        if getattr(cfg, key) < 0:
            fail(key, f"must be non-negative, got {getattr(cfg, key)}")
    if cfg.q <= 1:
        fail("q", f"growth factor must exceed 1, got {cfg.q}")
    if cfg.mode not in MODES:
        fail("mode", f"unknown mode {cfg.mode!r}; expected one of {', '.join(MODES)}")
    if cfg.preset not in PRESETS:
        fail("preset", f"unknown preset {cfg.preset!r}; expected one of {', '.join(PRESETS)}")
    if cfg.pi not in PI_KINDS:
        fail("pi", f"unknown pi kind {cfg.pi!r}; expected one of {', '.join(PI_KINDS)}")
    if cfg.initial not in INITIAL:
        fail("initial", f"unknown initial state {cfg.initial!r}; expected one of {', '.join(INITIAL)}")
    for m in cfg.sweep_modes:
        if m not in MODES:
            fail("sweep_modes", f"unknown mode {m!r}")
    if any(n < 1 for n in cfg.N_list) or not cfg.N_list:
        fail("N_list", "entries must be positive integers")
    if cfg.k_list and len(cfg.k_list) != len(cfg.N_list):
        fail("k_list", f"needs one entry per N_list entry ({len(cfg.N_list)})")
    if any(k <= 0 for k in cfg.k_list):
        fail("k_list", "entries must be positive")
    if cfg.preset == "general" and (len(cfg.A) != 27 or len(cfg.J) != 27):
        fail("A" if len(cfg.A) != 27 else "J", "general preset needs 27 numbers each for A and J")
    if not all(np.isfinite(v) for v in cfg.f + cfg.pi_axis):
        fail("f", "values must be finite")


def parse_config(text: str) -> RunConfig:
    """Parse flat ``key = value`` lines (``#`` starts a comment) into a validated config."""
    values: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{key}: cannot parse {value!r} ({exc})", lineno) from None
        lines[key] = lineno
    cfg = RunConfig(**values, source_lines=lines)
    _check(cfg)
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_model(cfg: RunConfig, mesh: Mesh | None = None) -> mdl.MaterialModel:
    """Material model described by the config; ``f`` needs the mesh when nonzero."""
    if cfg.pi == "scaling":
        pi = mdl.ScalingPi(cfg.pi_c)
    elif cfg.pi == "uniaxial":
        pi = mdl.UniaxialAnisotropy(cfg.pi_c, np.asarray(cfg.pi_axis))
    else:
        pi = None
    f = None
    if any(cfg.f):
        if mesh is None:
            raise ValueError("a nonzero source needs the mesh")
        f = np.broadcast_to(np.asarray(cfg.f, dtype=float), (mesh.n_nodes, 3)).copy()

    if cfg.preset == "exchange":
        base = mdl.exchange_only(cfg.lex, cfg.alpha)
    elif cfg.preset == "exchange_dmi":
        base = mdl.exchange_dmi(cfg.lex, cfg.ldm, cfg.alpha, paper_literal_pi=cfg.paper_literal_pi)
    else:
        A = np.asarray(cfg.A, dtype=float).reshape(3, 3, 3)
        J = np.asarray(cfg.J, dtype=float).reshape(3, 3, 3)
        return mdl.general_model(A, J, pi=pi, f=f, alpha=cfg.alpha)
    if pi is None and f is None:
        return base
    # presets fix A and J; an explicit pi or f in the config is layered on top
    return mdl.general_model(base.A, base.J, pi=pi if pi is not None else base.pi, f=f, alpha=cfg.alpha)


def initial_state(cfg: RunConfig, mesh: Mesh) -> np.ndarray:
    if cfg.initial == "hedgehog":
        return hedgehog_initial(mesh)
    if cfg.initial == "uniform":
        return np.tile([0.0, 0.0, 1.0], (mesh.n_nodes, 1))
    rng = np.random.default_rng(cfg.seed)
    m = rng.normal(size=(mesh.n_nodes, 3))
    return m / np.linalg.norm(m, axis=1, keepdims=True)
