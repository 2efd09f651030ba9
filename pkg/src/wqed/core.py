"""Domain types and unit conventions shared by the physics modules.

Units
-----
Frequencies and rates are multiples of the reference transition frequency
``omega_1`` (set to 1). Velocities are multiples of ``v_ref`` (set to 1).
Lengths (atom positions, lattice spacings) are multiples of the reference
wavelength ``lambda = 2*pi*v_ref/omega_1``, so the physical coordinate used in
propagation phases is ``2*pi*x``.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

WAVELENGTH = 2.0 * math.pi  # reference wavelength in internal length units


class ConfigError(ValueError):
    """Invalid configuration or precondition violation."""


class WaveguideKind(str, enum.Enum):
    CHIRAL = "chiral"
    BIDIRECTIONAL = "bidirectional"


@dataclass(frozen=True)
class WaveguideConfig:
    kind: WaveguideKind = WaveguideKind.BIDIRECTIONAL
    v_r: float = 1.0
    v_l: float = 1.0
    omega_0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", WaveguideKind(self.kind))
        if not self.v_r > 0:
            raise ConfigError(f"v_r must be positive, got {self.v_r}")
        if self.kind is WaveguideKind.BIDIRECTIONAL and not self.v_l > 0:
            raise ConfigError(f"v_l must be positive, got {self.v_l}")
        if not self.omega_0 >= 0:
            raise ConfigError(f"omega_0 must be non-negative, got {self.omega_0}")

    @property
    def is_chiral(self) -> bool:
        return self.kind is WaveguideKind.CHIRAL

    def wavenumbers(self, omega):
        """Return ``(q_R, q_L)`` in inverse internal length units."""
        q_r = (omega - self.omega_0) / self.v_r
        q_l = 0.0 if self.is_chiral else (omega - self.omega_0) / self.v_l
        return q_r, q_l

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "v_r": self.v_r, "v_l": self.v_l,
                "omega_0": self.omega_0}

    @classmethod
    def from_dict(cls, d: dict) -> "WaveguideConfig":
        _reject_unknown(d, {"kind", "v_r", "v_l", "omega_0"}, "waveguide")
        try:
            kind = WaveguideKind(d.get("kind", "bidirectional"))
        except ValueError as exc:
            raise ConfigError(f"unknown waveguide kind {d.get('kind')!r}") from exc
        return cls(kind=kind, v_r=_num(d, "v_r", 1.0), v_l=_num(d, "v_l", 1.0),
                   omega_0=_num(d, "omega_0", 0.0))


@dataclass(frozen=True)
class Atom:
    """A two-level emitter side-coupled to the waveguide.

    ``gamma`` is the loss rate into non-guided modes; ``gamma_r``/``gamma_l``
    are the waveguide emission rates into the right/left continua (for a
    chiral waveguide only ``gamma_r`` is used).
    """

    x: float = 0.0
    omega: float = 1.0
    gamma: float = 0.0
    gamma_r: float = 0.1
    gamma_l: float = 0.0


@dataclass(frozen=True)
class AtomChain:
    atoms: tuple[Atom, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))

    @property
    def n(self) -> int:
        return len(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(a, name) for a in self.atoms], dtype=float)

    def with_positions(self, xs: Sequence[float]) -> "AtomChain":
        return AtomChain(tuple(replace(a, x=float(x)) for a, x in zip(self.atoms, xs)))

    def sorted(self) -> "AtomChain":
        return AtomChain(tuple(sorted(self.atoms, key=lambda a: a.x)))


def build_periodic_chain(n: int, spacing_l: float, atom_template: Atom) -> AtomChain:
    """Identical atoms at ``x_j = j * spacing_l`` for ``j = 1..n``."""
    if n < 1:
        raise ConfigError(f"chain needs at least one atom, got n={n}")
    if not spacing_l > 0:
        raise ConfigError(f"spacing must be positive, got {spacing_l}")
    return AtomChain(tuple(replace(atom_template, x=j * spacing_l) for j in range(1, n + 1)))


def validate_chain(chain: AtomChain) -> list[str]:
    """Return the list of violated invariants; empty means the chain is valid."""
    problems = []
    if chain.n < 1:
        problems.append("empty chain: at least one atom is required")
    for j, a in enumerate(chain.atoms, start=1):
        for name in ("x", "omega", "gamma", "gamma_r", "gamma_l"):
            if not math.isfinite(getattr(a, name)):
                problems.append(f"atom {j}: {name} is not finite")
        for name in ("gamma", "gamma_r", "gamma_l"):
            if getattr(a, name) < 0:
                problems.append(f"atom {j}: negative rate {name}={getattr(a, name)}")
        if not a.omega > 0:
            problems.append(f"atom {j}: transition frequency must be positive")
    for j in range(1, chain.n):
        if chain.atoms[j].x < chain.atoms[j - 1].x:
            problems.append(f"unsorted positions: x[{j + 1}] < x[{j}]")
    return problems


def require_valid(chain: AtomChain) -> None:
    problems = validate_chain(chain)
    if problems:
        raise ConfigError("; ".join(problems))


# -- JSON configuration --------------------------------------------------------

@dataclass(frozen=True)
class ChainSpec:
    """Periodic chain description as it appears in a config file."""

    n: int = 1
    spacing: float = 0.5
    omega: float = 1.0
    gamma: float = 0.0
    gamma_r: float = 0.1
    gamma_l: float = 0.0

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ConfigError(f"chain.n must be a positive integer, got {self.n!r}")
        if not self.spacing > 0:
            raise ConfigError(f"chain.spacing must be positive, got {self.spacing}")
        for name in ("gamma", "gamma_r", "gamma_l"):
            if getattr(self, name) < 0:
                raise ConfigError(f"chain.{name} must be non-negative")
        if not self.omega > 0:
            raise ConfigError("chain.omega must be positive")

    @property
    def template(self) -> Atom:
        return Atom(x=0.0, omega=self.omega, gamma=self.gamma,
                    gamma_r=self.gamma_r, gamma_l=self.gamma_l)

    def build(self, n: int | None = None) -> AtomChain:
        return build_periodic_chain(self.n if n is None else n, self.spacing, self.template)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ChainSpec":
        _reject_unknown(d, {"n", "spacing", "omega", "gamma", "gamma_r", "gamma_l"}, "chain")
        n = d.get("n", 1)
        if isinstance(n, float) and n.is_integer():
            n = int(n)
        return cls(n=n, spacing=_num(d, "spacing", 0.5), omega=_num(d, "omega", 1.0),
                   gamma=_num(d, "gamma", 0.0), gamma_r=_num(d, "gamma_r", 0.1),
                   gamma_l=_num(d, "gamma_l", 0.0))


@dataclass(frozen=True)
class Sweep:
    min: float
    max: float
    steps: int = 1

    def __post_init__(self):
        if isinstance(self.steps, bool) or not isinstance(self.steps, int) or self.steps < 1:
            raise ConfigError(f"sweep.steps must be a positive integer, got {self.steps!r}")
        if not (math.isfinite(self.min) and math.isfinite(self.max)) or self.min > self.max:
            raise ConfigError(f"sweep needs finite min <= max, got [{self.min}, {self.max}]")

    def grid(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([self.min])
        return np.linspace(self.min, self.max, self.steps)

    def to_dict(self) -> dict:
        return {"min": self.min, "max": self.max, "steps": self.steps}


def photon_grid(d: dict) -> tuple[np.ndarray, dict]:
    """Parse ``photon{omega | sweep{min,max,steps}}``; returns grid and resolved dict."""
    _reject_unknown(d, {"omega", "sweep"}, "photon")
    if ("omega" in d) == ("sweep" in d):
        raise ConfigError("photon needs exactly one of 'omega' or 'sweep'")
    if "omega" in d:
        omega = _num(d, "omega", None)
        return np.array([omega]), {"omega": omega}
    s = d["sweep"]
    if not isinstance(s, dict):
        raise ConfigError("photon.sweep must be an object")
    _reject_unknown(s, {"min", "max", "steps"}, "photon.sweep")
    steps = s.get("steps", 1)
    if isinstance(steps, float) and steps.is_integer():
        steps = int(steps)
    sweep = Sweep(_num(s, "min", None), _num(s, "max", None), steps)
    return sweep.grid(), {"sweep": sweep.to_dict()}


def load_json(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return data


def _num(d: dict, key: str, default: Any) -> float:
    if key not in d:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite")
    return v


def _reject_unknown(d: Any, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")
