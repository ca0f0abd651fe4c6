from __future__ import annotations

import math
import re
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ConfigError

NUMBER = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
TERM_RE = re.compile(
    rf"\s*(?P<sign>[+-])?\s*(?:(?P<coef>{NUMBER})\s*(?P<star>\*)?\s*)?"
    rf"(?:(?P<name>[a-z]+)\s*\((?P<args>[^()]*)\))?\s*"
)
ARG_RE = re.compile(rf"^\s*(?P<sign>[+-])?\s*(?P<value>{NUMBER})?\s*(?P<pi>pi)?\s*$")

ARITY = {"sin": 2, "cos": 2, "sinx": 1, "siny": 1, "const": 0, "gauss": 3}


@dataclass(frozen=True)
class LoadTerm:
    name: str
    coefficient: float
    params: tuple[float, ...]

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        p = self.params
        if self.name == "sin":
            values = np.sin(p[0] * x) * np.sin(p[1] * y)
        elif self.name == "cos":
            values = np.cos(p[0] * x) * np.cos(p[1] * y)
        elif self.name == "sinx":
            values = np.sin(p[0] * x)
        elif self.name == "siny":
            values = np.sin(p[0] * y)
        elif self.name == "gauss":
            values = np.exp(-((x - p[0]) ** 2 + (y - p[1]) ** 2) / (2.0 * p[2] ** 2))
        else:
            values = np.ones_like(x)
        return self.coefficient * values


@dataclass(frozen=True)
class ScalarExpr:
    text: str
    terms: tuple[LoadTerm, ...]

    @property
    def is_zero(self) -> bool:
        return all(term.coefficient == 0.0 for term in self.terms)

    def __call__(self, x: Any, y: Any) -> np.ndarray:
        xx = np.asarray(x, dtype=float)
        yy = np.asarray(y, dtype=float)
        total = np.zeros(np.broadcast(xx, yy).shape)
        for term in self.terms:
            total = total + term.evaluate(xx, yy)
        return total


def _parse_arg(text: str, field: str) -> float:
    match = ARG_RE.match(text)
    if match is None or (match.group("value") is None and match.group("pi") is None):
        raise ConfigError(field, f"invalid argument {text!r} (examples: 2, 0.5, pi, 2pi)")
    value = float(match.group("value")) if match.group("value") is not None else 1.0
    if match.group("sign") == "-":
        value = -value
    return value * math.pi if match.group("pi") else value


def _make_term(name: str, coefficient: float, raw_args: str, field: str) -> LoadTerm:
    if name not in ARITY:
        raise ConfigError(field, f"unknown load function {name!r}; known: {', '.join(ARITY)}")
    pieces = raw_args.split(",") if raw_args.strip() else []
    if len(pieces) != ARITY[name]:
        raise ConfigError(field, f"{name} takes {ARITY[name]} argument(s), got {len(pieces)}")
    params = tuple(_parse_arg(piece, field) for piece in pieces)
    if name == "gauss" and not params[2] > 0:
        raise ConfigError(field, "gauss width must be positive")
    return LoadTerm(name=name, coefficient=coefficient, params=params)


def parse_expression(text: str, *, field: str = "load.f") -> ScalarExpr:
    """Parse a sum of registry terms such as "2.5*sin(1,1) - 0.5*cos(1,1)" or "0"."""
    source = text.strip()
    if not source:
        raise ConfigError(field, "expression must be non-empty (example: 2*sinx(1))")

    terms: list[LoadTerm] = []
    position = 0
    while position < len(source):
        match = TERM_RE.match(source, position)
        if match is None or match.end() == position:
            raise ConfigError(field, f"cannot parse {source!r} at offset {position}")
        if match.group("coef") is None and match.group("name") is None:
            raise ConfigError(field, f"cannot parse {source!r} at offset {position}")
        if terms and match.group("sign") is None:
            raise ConfigError(field, f"terms must be joined by + or - in {source!r}")
        if match.group("star") and match.group("name") is None:
            raise ConfigError(field, f"dangling '*' in {source!r}")

        sign = -1.0 if match.group("sign") == "-" else 1.0
        coefficient = sign * (float(match.group("coef")) if match.group("coef") else 1.0)
        if match.group("name") is None:
            terms.append(LoadTerm(name="const", coefficient=coefficient, params=()))
        else:
            terms.append(_make_term(match.group("name"), coefficient, match.group("args"), field))
        position = match.end()
    return ScalarExpr(text=source, terms=tuple(terms))


@dataclass(frozen=True)
class VectorLoad:
    components: tuple[ScalarExpr, ScalarExpr]

    @property
    def text(self) -> tuple[str, str]:
        return self.components[0].text, self.components[1].text

    @property
    def is_zero(self) -> bool:
        return all(component.is_zero for component in self.components)

    def __call__(self, points: Any) -> np.ndarray:
        """Values at points of shape (..., 2), returned with shape (..., 2)."""
        pts = np.asarray(points, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([self.components[0](x, y), self.components[1](x, y)], axis=-1)


def parse_load(value: str | Sequence[str], *, field: str = "load.f") -> VectorLoad:
    if isinstance(value, str) or len(value) != 2:
        raise ConfigError(field, "load must be a pair of expressions [f1, f2]")
    first, second = value
    return VectorLoad(
        components=(
            parse_expression(str(first), field=f"{field}[0]"),
            parse_expression(str(second), field=f"{field}[1]"),
        )
    )


@dataclass(frozen=True)
class LoadSpec:
    """Load f with per-phase weights a (zeroth order, bounded below by alpha) and b."""

    f: VectorLoad
    a: tuple[float, float] = (1.0, 1.0)
    b: tuple[float, float] = (1.0, 1.0)
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ConfigError("load.alpha", f"alpha must be positive, got {self.alpha}")
        for index, value in enumerate(self.a):
            if value < self.alpha:
                raise ConfigError(
                    f"load.a[{index}]", f"weight {value} is below alpha={self.alpha}"
                )

    def phase_weights(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.a, dtype=float), np.asarray(self.b, dtype=float)

    def averaged(self, theta: float) -> tuple[float, float]:
        """Volume averages (abar, bbar) for a phase-1 fraction theta."""
        abar = theta * self.a[0] + (1.0 - theta) * self.a[1]
        bbar = theta * self.b[0] + (1.0 - theta) * self.b[1]
        return abar, bbar


def load_spec(f: str | Sequence[str], **weights: Any) -> LoadSpec:
    return LoadSpec(f=parse_load(f), **weights)
