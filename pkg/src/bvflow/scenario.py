"""Scenario files: one YAML or JSON document describing what to build and which suites to run.

Rationals are written as "p/q" strings so exact mode never sees a float.  A report
written by the CLI is itself a valid scenario (its ``scenario`` field is read back),
which is how runs are replayed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from fractions import Fraction
from pathlib import Path

import yaml

from .gl11 import (FixtureError, FreeModel, Gl11Structure, load_fixture, sample_gl11,
                   FIXTURE_DIR)
from .linear import MODES, RATIONAL, GradedBasis, to_scalar
from .suites import SUITES


class ScenarioError(ValueError):
    """Unparseable or inconsistent scenario (CLI exit code 2)."""


DEFAULT_GRID = ("0", "1/4", "1/2", "3/4", "1")

_KEYS = {"fixture", "sample", "zero_structure", "scalar", "max_degree", "hbar_order", "grid",
         "fd_step", "steps", "tolerance", "seed", "interaction", "checks", "output",
         "allow_truncation", "samples", "identity_max_degree", "span", "flow_steps",
         "complete"}


@dataclass
class Scenario:
    fixture: str | None = None
    sample: dict | None = None
    zero_structure: dict | None = None
    scalar: str = RATIONAL
    max_degree: int = 6
    hbar_order: int = 4
    grid: list = field(default_factory=lambda: list(DEFAULT_GRID))
    fd_step: str = "1/10000"
    steps: int | None = None
    tolerance: str | None = None
    seed: int = 0
    interaction: list | None = None
    checks: list = field(default_factory=lambda: list(SUITES))
    output: str = "json"
    allow_truncation: bool = False
    samples: int = 200
    identity_max_degree: int = 5
    span: list = field(default_factory=lambda: ["0", "1"])
    flow_steps: int = 20
    complete: bool = True
    base_dir: str = field(default=".", repr=False)

    def to_dict(self):
        """Normalized echo (everything needed to replay the run)."""
        d = asdict(self)
        d.pop("base_dir")
        return d

    # -- derived values --------------------------------------------------------

    def scalar_value(self, value, mode=None):
        return to_scalar(value, mode or self.scalar)

    def grid_values(self, mode=None):
        return [self.scalar_value(g, mode) for g in self.grid]

    def tolerance_value(self):
        return None if self.tolerance is None else float(Fraction(str(self.tolerance)))


def _literal(value):
    """Numbers as strings: ints/Fractions exactly, floats via repr."""
    if isinstance(value, bool):
        raise ScenarioError(f"expected a number, got {value!r}")
    if isinstance(value, (int, Fraction)):
        return str(Fraction(value))
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        try:
            Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ScenarioError(f"not a number: {value!r}") from None
        return value.strip()
    raise ScenarioError(f"expected a number, got {value!r}")


def _int(name, value, low=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{name} must be an integer, got {value!r}")
    if low is not None and value < low:
        raise ScenarioError(f"{name} must be >= {low}, got {value}")
    return value


def parse_scenario(data, base_dir="."):
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping")
    if "scenario" in data and isinstance(data["scenario"], dict):
        data = data["scenario"]          # a report: replay its echo
    unknown = set(data) - _KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
    sc = Scenario(base_dir=str(base_dir))
    sources = [k for k in ("fixture", "sample", "zero_structure") if data.get(k) is not None]
    if len(sources) > 1:
        raise ScenarioError(f"give only one of fixture / sample / zero_structure, got {sources}")
    for key, value in data.items():
        if value is None:
            continue
        if key in ("max_degree", "hbar_order", "seed", "samples", "identity_max_degree"):
            value = _int(key, value, 0)
        elif key in ("steps", "flow_steps"):
            value = _int(key, value, 0)
        elif key == "scalar":
            if value not in MODES:
                raise ScenarioError(f"scalar must be one of {MODES}, got {value!r}")
        elif key == "grid":
            if not isinstance(value, (list, tuple)):
                raise ScenarioError("grid must be a list")
            value = [_literal(v) for v in value]
        elif key == "span":
            if not isinstance(value, (list, tuple)) or len(value) != 2:
                raise ScenarioError("span must be a pair [s, t]")
            value = [_literal(v) for v in value]
        elif key in ("fd_step", "tolerance"):
            value = _literal(value)
        elif key == "checks":
            if isinstance(value, str):
                value = [value]
            bad = [c for c in value if c not in SUITES]
            if bad:
                raise ScenarioError(f"unknown checks {bad}; available: {list(SUITES)}")
            value = list(value)
        elif key == "output":
            if value not in ("json", "csv"):
                raise ScenarioError(f"output must be json or csv, got {value!r}")
        elif key in ("allow_truncation", "complete"):
            value = bool(value)
        elif key == "fixture":
            value = str(value)
        elif key in ("sample", "zero_structure"):
            if not isinstance(value, dict):
                raise ScenarioError(f"{key} must be a mapping")
        elif key == "interaction":
            if not isinstance(value, list):
                raise ScenarioError("interaction must be a list of {coeff, exponents, hbar_power}")
        setattr(sc, key, value)
    validate_scenario(sc)
    return sc


def validate_scenario(sc):
    grid = [Fraction(g) for g in sc.grid]
    if len(grid) < 3:
        raise ScenarioError("grid needs at least 3 points")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ScenarioError(f"grid must be strictly increasing: {sc.grid}")
    if Fraction(sc.fd_step) <= 0:
        raise ScenarioError("fd_step must be positive")
    if sc.tolerance is not None and Fraction(sc.tolerance) <= 0:
        raise ScenarioError("tolerance must be positive")
    if Fraction(sc.span[1]) == Fraction(sc.span[0]):
        raise ScenarioError("span must have distinct endpoints")


def load_scenario(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse scenario {path}: {exc}") from None
    return parse_scenario(data if data is not None else {}, path.parent)


def _fixture_path(sc):
    name = sc.fixture
    p = Path(name)
    if p.suffix == ".json":
        return p if p.is_absolute() else Path(sc.base_dir) / p
    shipped = FIXTURE_DIR / f"gl11_{name}.json"
    if not shipped.exists():
        raise ScenarioError(f"no fixture named {name!r} (shipped: "
                            f"{', '.join(shipped_names())})")
    return shipped


def shipped_names():
    return sorted(p.stem[len("gl11_"):] for p in FIXTURE_DIR.glob("gl11_*.json"))


def build_model(sc):
    """FreeModel for the scenario.  Fixture validation failures raise FixtureError."""
    mode = sc.scalar
    if sc.fixture is not None:
        return load_fixture(_fixture_path(sc), mode)
    if sc.sample is not None:
        kw = dict(sc.sample)
        unknown = set(kw) - {"dim", "seed", "nilpotent", "degrees"}
        if unknown:
            raise ScenarioError(f"unknown sample keys: {sorted(unknown)}")
        if "dim" not in kw:
            raise ScenarioError("sample needs a dim")
        kw.setdefault("seed", sc.seed)
        try:
            return FreeModel(sample_gl11(mode=mode, **kw))
        except (ValueError, RuntimeError) as exc:
            raise ScenarioError(str(exc)) from None
    zs = sc.zero_structure or {"degrees": [-1, 0]}
    try:
        basis = GradedBasis.standard(zs.get("degrees", [-1, 0]), mode) if "omega" not in zs \
            else GradedBasis(zs["degrees"], zs["omega"], mode)
    except (ValueError, TypeError) as exc:
        raise FixtureError(f"invalid basis: {exc}") from None
    return FreeModel(Gl11Structure.zero(basis))


__all__ = ["Scenario", "ScenarioError", "parse_scenario", "load_scenario", "build_model",
           "validate_scenario", "shipped_names", "DEFAULT_GRID"]
