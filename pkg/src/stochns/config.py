"""Flat JSON experiment configuration: parsing, validation, object wiring.

The schema mirrors the module surfaces.  Parsing is total: any byte stream
either yields a validated configuration or a single-line diagnostic naming
the offending key (or the parse position for malformed JSON).  Unknown keys
are rejected at every level so sweep scripts fail loudly on typos.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dynamics import CUTOFF_V_DIST, CUTOFF_W1INF, CutoffConfig, SolverConfig
from .ensemble import VARIANT_HM, VARIANT_V
from .noise import NoiseModel
from .spectral import (
    SpectralField,
    TorusGrid,
    pairing,
    random_field,
    single_mode_field,
    zero_field,
)

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config"]

INITIAL_KINDS = ("zero", "single-mode", "random-decay")


class ConfigError(ValueError):
    """Configuration rejected; the message names the offending key."""


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    amplitude: float
    decay: float
    seed: int

    def build(self, grid: TorusGrid) -> SpectralField:
        if self.kind == "zero":
            return zero_field(grid)
        if self.kind == "single-mode":
            k = (1,) + (0,) * (grid.d - 1)
            base = single_mode_field(grid, k, amplitude=1.0)
            scale = self.amplitude / np.sqrt(pairing("V", base, base))
            return SpectralField(grid, base.coeffs * scale)
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, 0)))
        return random_field(grid, rng, decay=self.decay, v_norm=self.amplitude)


@dataclass(frozen=True)
class BoundSpec:
    a: float
    b: float
    c1: float | None
    c2: float
    epsilon: float
    variant: str
    m: int


@dataclass(frozen=True)
class EnsembleSpec:
    paths: int
    base_seed: int


@dataclass(frozen=True)
class ExperimentConfig:
    grid: TorusGrid
    solver: SolverConfig
    noise: NoiseModel
    initial: InitialSpec
    ensemble: EnsembleSpec | None
    bound: BoundSpec | None


def _require(mapping: dict, key: str, section: str):
    if key not in mapping:
        raise ConfigError(f"missing required key `{section}.{key}`" if section else f"missing required key `{key}`")
    return mapping[key]


def _reject_unknown(mapping, allowed: set[str], section: str):
    if not isinstance(mapping, dict):
        raise ConfigError(f"section `{section or '<root>'}` must be a JSON object")
    unknown = set(mapping) - allowed
    if unknown:
        name = sorted(unknown)[0]
        where = f"{section}.{name}" if section else name
        raise ConfigError(f"unknown key `{where}`")


def _number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"key `{key}` must be a number, got {value!r}")
    return float(value)


def _integer(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"key `{key}` must be an integer, got {value!r}")
    return value


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a single JSON object")
    _reject_unknown(data, {"grid", "solver", "noise", "initial", "ensemble", "bound"}, "")

    try:
        grid_d = _require(data, "grid", "")
        _reject_unknown(grid_d, {"d", "N", "dealias_fraction"}, "grid")
        grid = TorusGrid(
            _integer(_require(grid_d, "d", "grid"), "grid.d"),
            _integer(_require(grid_d, "N", "grid"), "grid.N"),
            _number(grid_d.get("dealias_fraction", 2.0 / 3.0), "grid.dealias_fraction"),
        )

        sol = _require(data, "solver", "")
        _reject_unknown(
            sol, {"nu", "dt", "T", "n", "cutoff", "overflow_guard", "advection"}, "solver"
        )
        cutoff = None
        if sol.get("cutoff") is not None:
            cd = sol["cutoff"]
            _reject_unknown(cd, {"kappa", "norm_kind"}, "solver.cutoff")
            kind = cd.get("norm_kind", CUTOFF_V_DIST)
            if kind not in (CUTOFF_V_DIST, CUTOFF_W1INF):
                raise ConfigError(
                    f"key `solver.cutoff.norm_kind` must be "
                    f"{CUTOFF_V_DIST!r} or {CUTOFF_W1INF!r}, got {kind!r}"
                )
            cutoff = CutoffConfig(
                kappa=_number(_require(cd, "kappa", "solver.cutoff"), "solver.cutoff.kappa"),
                norm_kind=kind,
            )
        n_level = sol.get("n")
        if n_level is not None:
            n_level = _integer(n_level, "solver.n")
        advection = sol.get("advection", True)
        if not isinstance(advection, bool):
            raise ConfigError(f"key `solver.advection` must be a boolean, got {advection!r}")
        solver = SolverConfig(
            nu=_number(_require(sol, "nu", "solver"), "solver.nu"),
            dt=_number(_require(sol, "dt", "solver"), "solver.dt"),
            T=_number(_require(sol, "T", "solver"), "solver.T"),
            n=n_level,
            cutoff=cutoff,
            overflow_guard=_number(sol.get("overflow_guard", 1e6), "solver.overflow_guard"),
            advection=advection,
        )

        noz = _require(data, "noise", "")
        _reject_unknown(noz, {"K", "sigma", "kind"}, "noise")
        sigma = _require(noz, "sigma", "noise")
        if not isinstance(sigma, list):
            raise ConfigError("key `noise.sigma` must be a list of numbers")
        noise = NoiseModel(
            sigma=tuple(_number(s, "noise.sigma[]") for s in sigma),
            kind=noz.get("kind", "linear-diagonal"),
        )
        if "K" in noz and _integer(noz["K"], "noise.K") != noise.K:
            raise ConfigError(
                f"key `noise.K` = {noz['K']} disagrees with {noise.K} sigma entries"
            )

        init = _require(data, "initial", "")
        _reject_unknown(init, {"kind", "amplitude", "decay", "seed"}, "initial")
        kind = _require(init, "kind", "initial")
        if kind not in INITIAL_KINDS:
            raise ConfigError(f"key `initial.kind` must be one of {INITIAL_KINDS}, got {kind!r}")
        amplitude = _number(init.get("amplitude", 0.0), "initial.amplitude")
        if kind != "zero" and amplitude <= 0:
            raise ConfigError("key `initial.amplitude` must be positive for nonzero initial data")
        initial = InitialSpec(
            kind=kind,
            amplitude=amplitude,
            decay=_number(init.get("decay", 2.0), "initial.decay"),
            seed=_integer(init.get("seed", 0), "initial.seed"),
        )

        ens = None
        if data.get("ensemble") is not None:
            ed = data["ensemble"]
            _reject_unknown(ed, {"paths", "base_seed"}, "ensemble")
            ens = EnsembleSpec(
                paths=_integer(_require(ed, "paths", "ensemble"), "ensemble.paths"),
                base_seed=_integer(_require(ed, "base_seed", "ensemble"), "ensemble.base_seed"),
            )
            if ens.paths < 1:
                raise ConfigError("key `ensemble.paths` must be >= 1")

        bound = None
        if data.get("bound") is not None:
            bd = data["bound"]
            _reject_unknown(bd, {"a", "b", "C1", "C2", "epsilon", "variant", "m"}, "bound")
            variant = bd.get("variant", VARIANT_V)
            if variant not in (VARIANT_V, VARIANT_HM):
                raise ConfigError(
                    f"key `bound.variant` must be {VARIANT_V!r} or {VARIANT_HM!r}, got {variant!r}"
                )
            c1 = bd.get("C1")
            if c1 is not None:
                c1 = _number(c1, "bound.C1")
            eps = _number(bd.get("epsilon", 0.5), "bound.epsilon")
            if not 0 < eps < 1:
                raise ConfigError("key `bound.epsilon` must lie in (0, 1)")
            bound = BoundSpec(
                a=_number(bd.get("a", 1.5), "bound.a"),
                b=_number(bd.get("b", 1.5), "bound.b"),
                c1=c1,
                c2=_number(bd.get("C2", 1.0), "bound.C2"),
                epsilon=eps,
                variant=variant,
                m=_integer(bd.get("m", 3), "bound.m"),
            )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc

    return ExperimentConfig(
        grid=grid, solver=solver, noise=noise, initial=initial, ensemble=ens, bound=bound
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config file {path} is not UTF-8 text: {exc}") from exc
    return parse_config(text)
