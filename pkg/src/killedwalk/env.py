"""Single-site potential laws and i.i.d. environments on integer windows.

A potential law assigns each site of Z a nonnegative killing weight; the
walk survives one visit to site x with probability exp(-omega(x)).  The
module covers finite-support laws, the exponential family, and point
masses, and samples product environments with per-site counter-based keys
so that widening a window or re-running in parallel never changes a value
that was already drawn.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .rng import keyed_uniform

_WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class PotentialDistribution:
    """A validated single-site law for the killing potential.

    kind is one of "finite" (atoms), "exponential" (rate), "point"
    (mass_value).  Atoms are stored sorted by value with weights summing
    to one exactly after normalization.
    """

    kind: str
    atoms: tuple[tuple[float, float], ...] = ()
    rate: float = 0.0
    mass_value: float = 0.0

    @property
    def is_delta_zero(self) -> bool:
        """True iff the law is the point mass at zero (the no-killing case)."""
        if self.kind == "point":
            return self.mass_value == 0.0
        if self.kind == "finite":
            return all(v == 0.0 for v, _ in self.atoms)
        return False

    @property
    def mean(self) -> float:
        if self.kind == "finite":
            return float(sum(v * w for v, w in self.atoms))
        if self.kind == "exponential":
            return 1.0 / self.rate
        return self.mass_value

    @property
    def variance(self) -> float:
        if self.kind == "finite":
            m = self.mean
            return float(sum(w * (v - m) ** 2 for v, w in self.atoms))
        if self.kind == "exponential":
            return 1.0 / self.rate**2
        return 0.0

    def support_values(self) -> np.ndarray:
        if self.kind == "finite":
            return np.array([v for v, _ in self.atoms])
        if self.kind == "point":
            return np.array([self.mass_value])
        raise ValueError("exponential law has continuous support")

    def ppf(self, u) -> np.ndarray:
        """Inverse CDF, the common-random-number transform of uniforms."""
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "point":
            return np.full_like(u, self.mass_value)
        if self.kind == "exponential":
            return -np.log1p(-u) / self.rate
        values = np.array([v for v, _ in self.atoms])
        cum = np.cumsum([w for _, w in self.atoms])
        idx = np.minimum(np.searchsorted(cum, u, side="right"), len(values) - 1)
        return values[idx]

    def laplace(self, ell: float) -> float:
        """E[exp(-ell * omega)], in (0, 1], equal to 1 at ell = 0."""
        if ell < 0:
            raise ValueError("laplace transform argument must be >= 0")
        if self.kind == "point":
            return float(np.exp(-ell * self.mass_value))
        if self.kind == "exponential":
            return self.rate / (self.rate + ell)
        return float(sum(w * np.exp(-ell * v) for v, w in self.atoms))

    def to_spec(self) -> dict:
        if self.kind == "finite":
            return {"kind": "finite", "atoms": [[v, w] for v, w in self.atoms]}
        if self.kind == "exponential":
            return {"kind": "exponential", "rate": self.rate}
        return {"kind": "point", "value": self.mass_value}


def make_distribution(spec) -> PotentialDistribution:
    """Build and validate a potential law from a structured description.

    Accepts a dict such as {"kind": "finite", "atoms": [[0.0, 0.5], [1.0, 0.5]]},
    {"kind": "exponential", "rate": 1.0} or {"kind": "point", "value": 0.3},
    or an already-built PotentialDistribution (returned unchanged).
    """
    if isinstance(spec, PotentialDistribution):
        return spec
    if not isinstance(spec, dict):
        raise ValueError(f"distribution spec must be a dict, got {type(spec).__name__}")
    kind = spec.get("kind")
    if kind in ("finite", "finite-support"):
        atoms = spec.get("atoms")
        if not atoms:
            raise ValueError("finite-support law needs a nonempty 'atoms' list")
        vals, weights = [], []
        for entry in atoms:
            v, w = float(entry[0]), float(entry[1])
            if v < 0:
                raise ValueError(f"atom value must be >= 0, got {v}")
            if w <= 0:
                raise ValueError(f"atom weight must be > 0, got {w}")
            vals.append(v)
            weights.append(w)
        total = sum(weights)
        if abs(total - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"atom weights must sum to 1, got {total}")
        order = np.argsort(vals, kind="stable")
        merged: dict[float, float] = {}
        for i in order:
            merged[vals[i]] = merged.get(vals[i], 0.0) + weights[i] / total
        pairs = tuple((v, w) for v, w in merged.items())
        return PotentialDistribution(kind="finite", atoms=pairs)
    if kind in ("exponential", "exponential-rate"):
        rate = float(spec.get("rate", 0.0))
        if rate <= 0:
            raise ValueError(f"exponential rate must be > 0, got {rate}")
        return PotentialDistribution(kind="exponential", rate=rate)
    if kind in ("point", "point-mass"):
        value = float(spec.get("value", spec.get("mass_value", 0.0)))
        if value < 0:
            raise ValueError(f"point mass value must be >= 0, got {value}")
        return PotentialDistribution(kind="point", mass_value=value)
    raise ValueError(f"unknown distribution kind {kind!r}")


def laplace_transform(dist: PotentialDistribution, ell: float) -> float:
    """E[exp(-ell * omega)] under the law of one site."""
    return dist.laplace(ell)


@dataclass(frozen=True, eq=False)
class Environment:
    """A realized window of potentials with its generating key.

    values[i] is the potential at site window_lo + i.  Regenerating with
    the same (seed, stream_id) and any window containing a site always
    reproduces the same value at that site.
    """

    window_lo: int
    window_hi: int
    values: np.ndarray = field(repr=False)
    seed: int = 0
    stream_id: int = 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.window_lo == other.window_lo
            and self.window_hi == other.window_hi
            and self.seed == other.seed
            and self.stream_id == other.stream_id
            and np.array_equal(self.values, other.values)
        )

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.window_hi - self.window_lo + 1,):
            raise ValueError("values length must match the window")
        if np.any(vals < 0):
            raise ValueError("potentials must be >= 0")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    def covers(self, lo: int, hi: int) -> bool:
        return self.window_lo <= lo and hi <= self.window_hi

    def value_at(self, x: int) -> float:
        if not self.window_lo <= x <= self.window_hi:
            raise ValueError(f"site {x} outside window [{self.window_lo}, {self.window_hi}]")
        return float(self.values[x - self.window_lo])

    def slice_values(self, lo: int, hi: int) -> np.ndarray:
        """Values on sites lo..hi inclusive."""
        if not self.covers(lo, hi):
            raise ValueError(
                f"window too small: need [{lo}, {hi}], have [{self.window_lo}, {self.window_hi}]"
            )
        i = lo - self.window_lo
        return self.values[i : i + (hi - lo + 1)]

    def to_dict(self) -> dict:
        return {
            "window_lo": self.window_lo,
            "window_hi": self.window_hi,
            "values": [float(v) for v in self.values],
            "seed": int(self.seed),
            "stream_id": int(self.stream_id),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Environment":
        return cls(
            window_lo=int(d["window_lo"]),
            window_hi=int(d["window_hi"]),
            values=np.asarray(d["values"], dtype=np.float64),
            seed=int(d.get("seed", 0)),
            stream_id=int(d.get("stream_id", 0)),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "Environment":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def sample_environment(
    dist: PotentialDistribution,
    window: tuple[int, int],
    seed: int,
    stream_id: int = 0,
) -> Environment:
    """Draw an i.i.d. environment on window = (lo, hi), inclusive.

    The value at site x is dist.ppf(keyed_uniform(seed, stream_id, x)):
    a pure function of the key, so extending the window is a superset
    operation on values.
    """
    lo, hi = int(window[0]), int(window[1])
    if lo > hi:
        raise ValueError(f"window_lo must be <= window_hi, got ({lo}, {hi})")
    sites = np.arange(lo, hi + 1, dtype=np.int64)
    u = keyed_uniform(seed, stream_id, sites)
    return Environment(lo, hi, dist.ppf(u), seed=seed, stream_id=stream_id)


def shift(env: Environment, i: int) -> Environment:
    """Translate the environment by i sites: output value at x equals
    input value at x - i."""
    return Environment(
        env.window_lo + i,
        env.window_hi + i,
        env.values.copy(),
        seed=env.seed,
        stream_id=env.stream_id,
    )


class EnvironmentSource:
    """Lazy environment backed by the keyed sampler.

    Yields values on any requested window; used by the limit solver,
    which does not know in advance how far left it must look.
    """

    def __init__(self, dist: PotentialDistribution, seed: int, stream_id: int = 0):
        self.dist = dist
        self.seed = int(seed)
        self.stream_id = int(stream_id)

    def slice_values(self, lo: int, hi: int) -> np.ndarray:
        sites = np.arange(lo, hi + 1, dtype=np.int64)
        return self.dist.ppf(keyed_uniform(self.seed, self.stream_id, sites))

    def covers(self, lo: int, hi: int) -> bool:
        return True

    def materialize(self, lo: int, hi: int) -> Environment:
        return sample_environment(self.dist, (lo, hi), self.seed, self.stream_id)
