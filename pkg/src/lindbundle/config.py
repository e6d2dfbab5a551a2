"""Scenario configuration: presets, JSON round-trip and validation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

from .dissipator import RandomVectorKind
from .errors import ConfigError, ParameterError
from .model import MorseParams, build_grid, build_model
from .propagator import PropagationConfig
from .spectral import CouplingParams

MODES = ("full", "bundled", "jk1", "jk2")
SCENARIOS = ("cooling", "heating", "custom")

# fields a named scenario pins down
PRESETS = {
    "cooling": {"s": 0.0, "xi": 3.4, "kbt": 0.25, "t_final": 1000.0},
    "heating": {"s": 0.5, "xi": 0.7, "kbt": 1.0, "t_final": 2000.0},
    "custom": {},
}
PINNED = ("s", "xi", "kbt")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "cooling"
    # oscillator and spin
    mass: float = 1.0
    x0: float = -10.0
    dx: float = 1.0
    nx: int = 30
    v_inf: float = 4.0
    u_max: float = 6.0
    a: float = 0.2
    s: float = 0.0
    gap: float = 0.1
    alpha: float = 0.1225
    # bath
    gamma_star: float = 0.02
    omega_c: float = math.sqrt(2.0)
    kbt: float = 0.25
    # initial state
    xi: float = 3.4
    # propagation
    dt: float = 0.125
    record_every: float = 1.0
    t_final: float = 1000.0
    interaction_picture: bool = True
    # dissipator and sampling
    mode: str = "full"
    bundles: int = 8
    rng_kind: str = RandomVectorKind.UNIT_CIRCLE.value
    seed: int = 0
    realizations: int = 100
    compute_stats: bool = True
    bin_tol: float | None = None
    output_dir: str = "out"

    @classmethod
    def preset(cls, scenario: str = "cooling", **overrides) -> "ScenarioConfig":
        return cls.from_dict({"scenario": scenario, **overrides})

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        """Build from a flat mapping, filling preset values for the scenario.

        Accepts a run manifest too (its ``config`` entry is used).
        """
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([(k, "unknown field") for k in unknown])
        scenario = data.get("scenario", "cooling")
        if scenario not in SCENARIOS:
            raise ConfigError([("scenario", f"must be one of {', '.join(SCENARIOS)}")])
        merged = {**PRESETS[scenario], **data}
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def with_overrides(self, **kw) -> "ScenarioConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    # -- validation -------------------------------------------------------

    def problems(self) -> list[tuple[str, str]]:
        out = []

        def positive(name):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                out.append((name, f"must be a positive number, got {v!r}"))

        for name in ("mass", "dx", "v_inf", "u_max", "a", "gamma_star",
                     "omega_c", "kbt", "xi", "dt", "record_every"):
            positive(name)
        for name in ("x0", "gap", "alpha", "t_final"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                out.append((name, f"must be a finite number, got {v!r}"))
        if isinstance(self.t_final, (int, float)) and self.t_final < 0:
            out.append(("t_final", "must be non-negative"))

        if not _is_int(self.nx) or self.nx < 6:
            out.append(("nx", f"must be an integer >= 6 (seven-point stencil), got {self.nx!r}"))
        try:
            twice = Fraction(self.s).limit_denominator(1000) * 2
            if twice.denominator != 1 or twice < 0:
                raise ValueError
        except (TypeError, ValueError):
            out.append(("s", f"must be a non-negative half-integer, got {self.s!r}"))

        if self.scenario not in SCENARIOS:
            out.append(("scenario", f"must be one of {', '.join(SCENARIOS)}"))
        else:
            for k in PINNED:
                want = PRESETS[self.scenario].get(k)
                if want is not None and getattr(self, k) != want:
                    out.append((k, f"scenario {self.scenario!r} fixes {k}={want}; "
                                   "use scenario 'custom' to change it"))

        if self.mode not in MODES:
            out.append(("mode", f"must be one of {', '.join(MODES)}"))
        if not _is_int(self.bundles) or self.bundles < 1:
            out.append(("bundles", f"must be a positive integer, got {self.bundles!r}"))
        elif self.mode in ("jk1", "jk2") and self.bundles % 2:
            out.append(("bundles", f"jackknife modes need an even bundle count, got {self.bundles}"))
        try:
            RandomVectorKind(self.rng_kind)
        except ValueError:
            out.append(("rng_kind", f"must be one of {[k.value for k in RandomVectorKind]}"))
        if not _is_int(self.seed) or self.seed < 0 or self.seed >= 2**64:
            out.append(("seed", "must be an unsigned 64-bit integer"))
        if not _is_int(self.realizations) or self.realizations < 1:
            out.append(("realizations", f"must be a positive integer, got {self.realizations!r}"))
        elif self.mode != "full" and self.compute_stats and self.realizations < 2:
            out.append(("realizations", "statistics need at least 2 realizations"))
        if self.bin_tol is not None and not (isinstance(self.bin_tol, (int, float)) and self.bin_tol >= 0):
            out.append(("bin_tol", "must be a non-negative number or null"))

        if not any(p[0] in ("dt", "record_every", "t_final") for p in out):
            try:
                self.propagation()
            except ParameterError as exc:
                out.append(("dt/record_every/t_final", str(exc)))
        return out

    def validate(self) -> None:
        probs = self.problems()
        if probs:
            raise ConfigError(probs)

    # -- derived objects --------------------------------------------------

    @property
    def stochastic(self) -> bool:
        return self.mode != "full"

    def morse(self) -> MorseParams:
        return MorseParams(v_inf=self.v_inf, a=self.a, u_max=self.u_max, mass=self.mass)

    def coupling(self) -> CouplingParams:
        return CouplingParams(gamma_star=self.gamma_star, omega_c=self.omega_c, kbt=self.kbt)

    def propagation(self) -> PropagationConfig:
        return PropagationConfig(
            dt=self.dt,
            record_every=self.record_every,
            t_final=self.t_final,
            interaction_picture=self.interaction_picture,
        )

    def build_model(self):
        return build_model(build_grid(self.x0, self.dx, self.nx), self.morse(),
                           s=self.s, gap=self.gap, alpha=self.alpha)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)
