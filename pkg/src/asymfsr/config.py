"""JSON problem/run configuration.

A coefficient is described by one of

    {"type": "constant", "value": [re, im]}
    {"type": "poly", "coeffs": [[re, im], ...]}      ascending powers of x
    {"type": "samples", "values": [[re, im], ...]}   uniform nodes on [0, 1]
    {"type": "jump", "left": [re, im], "right": [re, im], "at": x0}

and is sampled onto the ``grid.cells`` mesh.  A matrix is a list of rows
whose entries are coefficient specs or null (zero).
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .funcspace import GridFn, MatrixFn, Weight, mesh
from .highorder import HighOrderProblem
from .model import SystemCoeffs
from .sectors import DiagB


def parse_complex(v, what="value"):
    if isinstance(v, complex):
        return v
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v):
        return complex(float(v[0]), float(v[1]))
    raise ValidationError(f"{what}: expected a number or [re, im], got {v!r}")


def sample_spec(spec, N):
    """Nodal values of a coefficient spec on the N-cell mesh."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ValidationError(f"coefficient spec must be an object with a 'type', got {spec!r}")
    x = mesh(N)
    kind = spec["type"]
    if kind == "constant":
        return np.full(N + 1, parse_complex(spec.get("value"), "constant value"))
    if kind == "poly":
        coeffs = [parse_complex(c, "poly coefficient") for c in spec.get("coeffs", [])]
        if not coeffs:
            raise ValidationError("poly spec needs at least one coefficient")
        return np.polynomial.polynomial.polyval(x, np.array(coeffs))
    if kind == "samples":
        vals = np.array([parse_complex(c, "sample") for c in spec.get("values", [])])
        if vals.size < 2:
            raise ValidationError("samples spec needs at least two values")
        src = np.linspace(0.0, 1.0, vals.size)
        return np.interp(x, src, vals.real) + 1j * np.interp(x, src, vals.imag)
    if kind == "jump":
        left = parse_complex(spec.get("left"), "jump left")
        right = parse_complex(spec.get("right"), "jump right")
        at = spec.get("at")
        if not isinstance(at, (int, float)) or not 0.0 <= at <= 1.0:
            raise ValidationError(f"jump location must lie in [0, 1], got {at!r}")
        out = np.where(x < at, left, right).astype(complex)
        out[np.isclose(x, at, rtol=0, atol=1e-14)] = 0.5 * (left + right)
        return out
    raise ValidationError(f"unknown coefficient type {kind!r}")


def _weight(spec, N, name):
    vals = sample_spec(spec, N)
    if np.any(vals.imag != 0):
        raise ValidationError(f"{name} must be real")
    return vals.real


def _matrix(rows, n, N, name):
    if not isinstance(rows, list) or len(rows) != n or any(not isinstance(r, list) or len(r) != n for r in rows):
        raise ValidationError(f"{name} must be an {n}x{n} list of specs")
    vals = np.zeros((N + 1, n, n), dtype=complex)
    for j, row in enumerate(rows):
        for k, spec in enumerate(row):
            if spec is not None:
                vals[:, j, k] = sample_spec(spec, N)
    return MatrixFn(vals)


def _cells(cfg, override=None):
    if override is not None:
        N = override
    else:
        N = cfg.get("grid", {}).get("cells")
    if not isinstance(N, int) or isinstance(N, bool) or N < 2:
        raise ValidationError(f"grid.cells must be an integer >= 2, got {N!r}")
    return N


def _mu(v):
    if v is None:
        return None
    if isinstance(v, str):
        if v.lower() == "inf":
            return math.inf
        try:
            v = float(v)
        except ValueError:
            raise ValidationError(f"mu must be a number >= 1 or 'inf', got {v!r}") from None
    if not float(v) >= 1:
        raise ValidationError(f"mu must be >= 1 or 'inf', got {v!r}")
    return float(v)


def build_system_config(cfg, cells=None):
    N = _cells(cfg, cells)
    if "B" not in cfg:
        raise ValidationError("system config needs B")
    b = [parse_complex(v, "B entry") for v in cfg["B"]]
    n = cfg.get("n", len(b))
    if n != len(b):
        raise ValidationError(f"n = {n} but B has {len(b)} entries")
    B = DiagB(b)
    rho = Weight(_weight(cfg.get("rho", {"type": "constant", "value": 1.0}), N, "rho"))
    A = _matrix(cfg["A"], n, N, "A") if cfg.get("A") is not None else MatrixFn.zeros(n, N)
    Ct = tuple(_matrix(C, n, N, f"Ctail[{k}]") for k, C in enumerate(cfg.get("Ctail", [])))
    return SystemCoeffs(B, rho, A, Ct, _mu(cfg.get("mu_prime")))


def build_highorder_config(cfg, cells=None):
    N = _cells(cfg, cells)
    m = cfg.get("m")
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise ValidationError(f"m must be a positive integer, got {m!r}")
    tau0 = GridFn(sample_spec(cfg.get("tau0", {"type": "constant", "value": 1.0}), N))
    rho = GridFn(sample_spec(cfg.get("rho", {"type": "constant", "value": 1.0}), N))
    zero = {"type": "constant", "value": 0.0}
    T = cfg.get("T", [zero] * m)
    S = cfg.get("S", [zero] * m)
    if len(T) != m or len(S) != m:
        raise ValidationError(f"need {m} T specs and {m} S specs")
    return HighOrderProblem(m, tau0, rho, [GridFn(sample_spec(t, N)) for t in T],
                            [GridFn(sample_spec(s, N)) for s in S], _mu(cfg.get("mu_prime")))


@dataclass(frozen=True)
class RunConfig:
    sector: int = 1
    shift: float = 5.0
    lambdas: tuple = ()
    ray: float = None
    moduli: tuple = ()
    mu: float = math.inf
    max_iter: int = 40
    tol: float = 1e-12
    fmt: str = "csv"
    out: str = None

    def __post_init__(self):
        if self.fmt not in ("csv", "json"):
            raise ValidationError(f"format must be csv or json, got {self.fmt!r}")
        if not isinstance(self.sector, int) or self.sector < 1:
            raise ValidationError(f"sector index must be a positive integer, got {self.sector!r}")
        if not self.shift >= 0:
            raise ValidationError("shift must be non-negative")
        if any(b <= a for a, b in zip(self.moduli, self.moduli[1:])):
            raise ValidationError("moduli must be strictly increasing")


def parse_lambda(text):
    parts = str(text).split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise ValidationError(f"lambda must be RE or RE,IM, got {text!r}")


def parse_moduli(text):
    if isinstance(text, (list, tuple)):
        items = text
    else:
        items = [t for t in str(text).split(",") if t.strip()]
    try:
        return tuple(float(t) for t in items)
    except (TypeError, ValueError):
        raise ValidationError(f"moduli must be a comma-separated list of numbers, got {text!r}") from None


def run_config(cfg, overrides=None):
    """Merge the config's "run" block with command-line overrides (None means unset)."""
    base = dict(cfg.get("run", {}))
    ov = {k: v for k, v in (overrides or {}).items() if v is not None}
    merged = {**base, **ov}
    lams = merged.get("lambda", [])
    lams = tuple(parse_lambda(l) if isinstance(l, str) else parse_complex(l, "lambda") for l in lams)
    ray = merged.get("ray")
    if isinstance(ray, dict):
        merged.setdefault("moduli", ray.get("moduli", []))
        ray = ray.get("angle")
    try:
        return RunConfig(
            sector=int(merged.get("sector", 1)),
            shift=float(merged.get("shift", 5.0)),
            lambdas=lams,
            ray=None if ray is None else float(ray),
            moduli=parse_moduli(merged.get("moduli", [])),
            mu=_mu(merged.get("mu", "inf")),
            max_iter=int(merged.get("max_iter", 40)),
            tol=float(merged.get("tol", 1e-12)),
            fmt=merged.get("format", "csv"),
            out=merged.get("out"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"invalid run options: {exc}") from None


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict) or cfg.get("kind") not in ("system", "high_order"):
        raise ValidationError("config must be an object with kind 'system' or 'high_order'")
    return cfg
