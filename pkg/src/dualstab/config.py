"""Experiment configuration: JSON schema validation and object builders."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import jsonschema
import numpy as np

from .errors import ConfigError, MarketSpecError
from .harness import PerturbationFamily, SpikeDensity, constant_family, drift_family
from .market import EndowmentBundle, FiniteMarket, build_market, call_payoff, put_payoff
from .utility import UtilityFunction, normalize

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM}

SCHEMA: Dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "market": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["multinomial", "binomial", "trinomial", "one_period", "explicit"]},
                "s0": _NUM,
                "factors": _VEC,
                "probabilities": _VEC,
                "steps": {"type": "integer", "minimum": 1},
                "initial_prices": _VEC,
                "terminal_values": {"type": "array", "items": _VEC},
                "tree": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["id"],
                        "properties": {"id": {"type": ["string", "integer"]},
                                       "parent": {"type": ["string", "integer", "null"]}},
                    },
                },
                "prices": {"type": "object", "additionalProperties": _VEC},
                "atoms": {
                    "type": "array",
                    "items": {
                        "oneOf": [
                            _NUM,
                            {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["node", "probability"],
                                "properties": {"node": {"type": ["string", "integer"]}, "probability": _NUM},
                            },
                        ]
                    },
                },
            },
        },
        "endowments": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {
                    "name": {"type": "string"},
                    "kind": {"enum": ["call", "put", "asset", "payoff"]},
                    "strike": _NUM,
                    "asset": {"type": "integer", "minimum": 0},
                    "values": _VEC,
                },
            },
        },
        "utility": {
            "type": "object",
            "additionalProperties": False,
            "required": ["family"],
            "properties": {
                "family": {"enum": ["log", "power", "tabulated"]},
                "alpha": {"type": "number", "exclusiveMaximum": 1},
                "grid": _VEC,
                "values": _VEC,
                "marginals": _VEC,
            },
        },
        "point": {
            "type": "object",
            "additionalProperties": False,
            "required": ["x"],
            "properties": {"x": _NUM, "q": _VEC},
        },
        "dual_point": {
            "type": "object",
            "additionalProperties": False,
            "required": ["y"],
            "properties": {"y": _NUM, "r": _VEC},
        },
        "family": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["constant", "drift"]},
                "zeta": {"oneOf": [_VEC, {"const": "random"}]},
                "zeta_amplitude": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "alpha_bar": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "point_drift": _NUM,
                "point_power": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "stability": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_max": {"type": "integer", "minimum": 1},
                "indices": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "value_tol": {"type": "number", "exclusiveMinimum": 0},
                "kyfan_tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "counterexample": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["diagonal", "fixed"]},
                "levels": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                "fixed_m": {"type": "integer", "minimum": 2},
                "n_values": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "eps_scale": {"type": "number", "minimum": 0},
                "width": {"type": "number", "exclusiveMinimum": 0},
                "profile": {"enum": ["indicator", "gaussian"]},
                "amplitude": {"type": "number", "minimum": 0},
                "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "x": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"tol": {"type": "number", "exclusiveMinimum": 0}},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}


@dataclass
class ExperimentConfig:
    """Validated configuration document plus lazily built objects."""

    raw: Dict[str, Any]
    path: Optional[Path] = None
    _market: Optional[FiniteMarket] = field(default=None, repr=False)

    def section(self, name: str) -> Dict[str, Any]:
        return self.raw.get(name, {})

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def market(self) -> FiniteMarket:
        if self._market is None:
            if "market" not in self.raw:
                raise ConfigError("configuration has no 'market' section")
            try:
                self._market = build_market(self.raw["market"])
            except (MarketSpecError, KeyError, ValueError) as exc:
                raise ConfigError(f"invalid market: {exc}") from exc
        return self._market

    @property
    def endowments(self) -> EndowmentBundle:
        return build_endowments(self.market, self.raw.get("endowments", []))

    @property
    def utility(self) -> UtilityFunction:
        return build_utility(self.raw.get("utility", {"family": "log"}))

    def primal_point(self):
        pt = self.raw.get("point", {"x": 1.0})
        return float(pt["x"]), np.asarray(pt.get("q", [0.0] * self.endowments.N), dtype=float)

    def dual_point(self):
        pt = self.raw.get("dual_point")
        if pt is None:
            return None
        return float(pt["y"]), np.asarray(pt.get("r", [0.0] * self.endowments.N), dtype=float)

    def family(self) -> PerturbationFamily:
        return build_family(self, self.section("family"))

    def spike(self) -> SpikeDensity:
        ce = self.section("counterexample")
        kw = {k: ce[k] for k in ("eps_scale", "width", "profile", "amplitude") if k in ce}
        return SpikeDensity(**kw)


def build_endowments(market: FiniteMarket, items) -> EndowmentBundle:
    rows, names = [], []
    for j, item in enumerate(items):
        kind = item["kind"]
        asset = int(item.get("asset", 0))
        if asset >= market.n_assets:
            raise ConfigError(f"endowment {j}: asset index {asset} out of range")
        if kind in ("call", "put"):
            if "strike" not in item:
                raise ConfigError(f"endowment {j}: {kind} needs a strike")
            fn = call_payoff if kind == "call" else put_payoff
            rows.append(fn(market, float(item["strike"]), asset))
        elif kind == "asset":
            rows.append(market.terminal_prices(asset))
        else:
            vals = np.asarray(item.get("values", []), dtype=float)
            if vals.shape != (market.n_atoms,):
                raise ConfigError(f"endowment {j}: payoff needs {market.n_atoms} values")
            rows.append(vals)
        names.append(item.get("name", f"f{j + 1}"))
    if not rows:
        return EndowmentBundle.empty(market.n_atoms)
    return EndowmentBundle(np.vstack(rows), tuple(names))


def build_utility(spec: Dict[str, Any]) -> UtilityFunction:
    fam = spec["family"]
    try:
        if fam == "log":
            return UtilityFunction.log()
        if fam == "power":
            if "alpha" not in spec:
                raise ConfigError("power utility needs 'alpha'")
            return normalize(UtilityFunction.power(spec["alpha"]))
        grid, values = spec.get("grid"), spec.get("values")
        if grid is None or values is None:
            raise ConfigError("tabulated utility needs 'grid' and 'values'")
        return normalize(UtilityFunction.tabulated(grid, values, spec.get("marginals")))
    except ValueError as exc:
        raise ConfigError(f"invalid utility: {exc}") from exc


def build_family(cfg: ExperimentConfig, spec: Dict[str, Any]) -> PerturbationFamily:
    market = cfg.market
    x, q = cfg.primal_point()
    dp = cfg.dual_point()
    if dp is None:
        raise ConfigError("stability experiments need a 'dual_point'")
    y, r = dp
    kind = spec.get("kind", "constant")
    if kind == "constant":
        return constant_family(cfg.utility, x, q, y, r, market.n_atoms)
    zeta = spec.get("zeta", "random")
    if zeta == "random":
        rng = np.random.default_rng(cfg.seed)
        amp = float(spec.get("zeta_amplitude", 0.05))
        zeta = rng.uniform(-amp, amp, market.n_atoms)
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (market.n_atoms,):
        raise ConfigError(f"zeta needs {market.n_atoms} entries")
    alpha = float(spec.get("alpha", 0.5))
    try:
        return drift_family(market.P, zeta, alpha, float(spec.get("alpha_bar", alpha)), x, q, y, r,
                            float(spec.get("point_drift", 0.0)), float(spec.get("point_power", 2.0)))
    except ValueError as exc:
        raise ConfigError(f"invalid perturbation family: {exc}") from exc


def validate(raw: Dict[str, Any]) -> None:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None


def load_config(path) -> ExperimentConfig:
    """Read, schema-validate and structurally check a configuration file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    validate(raw)
    cfg = ExperimentConfig(raw, path)
    if "market" in raw:
        cfg.market  # noqa: B018 - builds and checks the tree
        cfg.endowments
    if "utility" in raw:
        cfg.utility
    if "family" in raw:
        cfg.family().validate(cfg.market.P, [1, 2, 5, 10])
    return cfg
