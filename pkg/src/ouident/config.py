"""Verification configs: JSON documents validated against a bundled schema.

Complex matrix entries are ``[re, im]`` pairs; S is real. Bundled configs
ship in ``ouident/configs`` and can be named without a path.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
import json
from pathlib import Path

import jsonschema
import numpy as np

from .spectral import OUProblem

DEFAULT_TOLERANCES = {
    "moment0": 1e-7,
    "moment1": 1e-9,
    "moment2": 1e-6,
    "moment_bound": 1e-3,
    "exponent": 0.05,
    "law_rotating": 1e-5,
    "law_static": 1e-10,
    "generator_order": 0.5,
    "residual": 1e-3,
    "estimate": 1e-3,
    "dissipativity": 1e-6,
    "ibp": 1e-6,
    "ibp_equality": 1e-8,
}

DEFAULT_SUITES = {
    "kernel": {"t": [0.05, 0.5, 2.0], "orders": [0, 1, 2, 3]},
    "semigroup": {"t": 0.25, "s": 0.25, "h": [0.2, 0.1, 0.05, 0.025], "generator_grid": [256, 8.0]},
    "resolvent": {"lambdas": [[1.0, 0.0], [2.0, 2.0], [5.0, 0.0]], "gradient_p": [1.5, 2.0]},
    "dissipativity": {"lambdas": [0.1, 1.0, 10.0], "p": [1.5, 2.0, 3.0], "samples": 3},
    "ibp": {"p": [1.5, 2.0, 3.0], "shift": 3.0},
}


def schema() -> dict:
    with resources.files("ouident.schemas").joinpath("config.schema.json").open() as fh:
        return json.load(fh)


def report_schema() -> dict:
    with resources.files("ouident.schemas").joinpath("report.schema.json").open() as fh:
        return json.load(fh)


class ConfigError(ValueError):
    """Malformed or inconsistent configuration; the message names the field."""


@dataclass
class Config:
    name: str
    A: np.ndarray
    B: np.ndarray
    S: np.ndarray
    p: float
    n: int
    L: float
    quadrature: dict
    tolerances: dict
    suites: dict
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def problem(self) -> OUProblem:
        return OUProblem(self.A, self.B, self.S, self.p)

    @property
    def lambdas(self) -> list[complex]:
        return [complex(re, im) for re, im in self.suites.get("resolvent", {}).get("lambdas", [])]

    def echo(self) -> dict:
        def cm(M):
            return [[[float(z.real), float(z.imag)] for z in row] for row in M]

        return {
            "name": self.name,
            "A": cm(self.A),
            "B": cm(self.B),
            "S": [[float(x) for x in row] for row in self.S],
            "p": self.p,
        }

    def override(self, seed=None, grid=None, p=None, lam=None) -> "Config":
        """Copy with CLI overrides applied and re-validated."""
        raw = copy.deepcopy(self.raw)
        if seed is not None:
            raw["seed"] = int(seed)
        if grid is not None:
            raw["grid"] = {"n": int(grid[0]), "L": float(grid[1])}
        if p is not None:
            raw["exponent"]["p"] = float(p)
        if lam is not None:
            raw.setdefault("suites", {}).setdefault("resolvent", dict(DEFAULT_SUITES["resolvent"]))
            raw["suites"]["resolvent"]["lambdas"] = [[float(lam.real), float(lam.imag)]]
        return parse_config(raw)


def _path(err: jsonschema.ValidationError) -> str:
    out = ""
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def _complex_matrix(rows, where: str) -> np.ndarray:
    if any(len(r) != len(rows) for r in rows):
        raise ConfigError(f"{where}: matrix must be square")
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def parse_config(raw: dict) -> Config:
    try:
        jsonschema.validate(raw, schema())
    except jsonschema.ValidationError as err:
        raise ConfigError(f"{_path(err)}: {err.message}") from None
    mats = raw["matrices"]
    A = _complex_matrix(mats["A"], "matrices.A")
    B = _complex_matrix(mats["B"], "matrices.B")
    if B.shape != A.shape:
        raise ConfigError(f"matrices.B: shape {B.shape} does not match matrices.A {A.shape}")
    S = np.array(mats["S"], dtype=float)
    if len({len(r) for r in mats["S"]}) != 1 or S.shape[0] != S.shape[1]:
        raise ConfigError("matrices.S: matrix must be square")
    grid = raw.get("grid", {"n": 128, "L": 8.0})
    tolerances = {**DEFAULT_TOLERANCES, **raw.get("tolerances", {})}
    suites = {k: {**DEFAULT_SUITES[k], **v} for k, v in raw.get("suites", DEFAULT_SUITES).items()}
    return Config(
        name=raw["name"],
        A=A,
        B=B,
        S=S,
        p=float(raw["exponent"]["p"]),
        n=int(grid["n"]),
        L=float(grid["L"]),
        quadrature=dict(raw.get("quadrature", {})),
        tolerances=tolerances,
        suites=suites,
        seed=int(raw.get("seed", 0)),
        raw=raw,
    )


def bundled_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("ouident.configs").iterdir() if p.name.endswith(".json"))


def load_config(source) -> Config:
    """Load from a path, or by bundled name (with or without ``.json``)."""
    if isinstance(source, dict):
        return parse_config(source)
    path = Path(source)
    if path.is_file():
        text = path.read_text()
    else:
        stem = path.name[:-5] if path.name.endswith(".json") else path.name
        if stem not in bundled_names():
            raise ConfigError(f"config {source!s} not found (bundled: {', '.join(bundled_names())})")
        text = resources.files("ouident.configs").joinpath(stem + ".json").read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{source}: invalid JSON ({err})") from None
    return parse_config(raw)
