"""Reduction of killed walks on d-regular trees to killed walks on Z.

Fix a doubly infinite geodesic.  A walk travelling along it repeatedly
leaves into the d-2 side branches hanging off each geodesic vertex; folding
the survival weight of those excursions into the vertex produces an
effective potential rho = -ln h per geodesic site, after which the tree
problem is exactly a line problem for the induced walk on the geodesic.

The excursion weight h is computed by a bottom-up recursion over branch
subtrees, truncated at a depth cap with two-sided frontier bounds:
killing the frontier undercounts returns, granting the frontier the
zero-potential return weight overcounts them, so every reported h (and
rho) is a certified bracket.  Trajectory simulation on the same lazily
keyed potentials serves as an independent cross-check, not as the primary
computation.

Orientation convention for drifted walks: the positive geodesic direction
points toward predecessors (uphill), which is the direction the one-step
drift p favours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import Environment, PotentialDistribution
from .line_solver import forward_step_weights, two_point_a
from .lyapunov import iterate_configs
from .rng import keyed_uniform, stream_generator, substream

_EXCURSION_TAG = 0x6578
_PASSAGE_TAG = 0x7061
_FOREST_VERTEX_BUDGET = 40_000_000
_LOG_WEIGHT_CUTOFF = -80.0  # a walk this dead contributes < 2e-35 to any mean


def _max_walk_level(d: int) -> int:
    """Deepest branch level trajectory simulation follows.

    Level-order counters through level L number (d-1)^L - 1, which must
    stay inside int64.  For the symmetric walk a trajectory at that depth
    returns to the geodesic with probability at most (d-1)^(-L) < 3e-19,
    so declaring it lost is far below Monte Carlo noise; see
    _depth_truncation_factor for general drifts.
    """
    return int(62 / math.log2(d - 1))


def _depth_truncation_factor(cfg: TreeConfig) -> float:
    """Per-level factor bounding what depth truncation can discard.

    A trajectory is dropped at depth L; it would still have to come back
    up (per-level return weight min(1, p/(1-p))) and it had to get down
    there first (per-level passage min(1, (1-p)/p)), so its contribution
    carries a factor [min(p, 1-p)/max(p, 1-p)]^L.  This vanishes fast
    except at p = 1/2 exactly, where dropped trajectories are only
    controlled through the reported lost counters.
    """
    p = cfg.p
    return min(p, 1.0 - p) / max(p, 1.0 - p)


@dataclass(frozen=True)
class TreeConfig:
    """Degree, drift and the branch-recursion truncation depth.

    drift_p is the probability of stepping to the predecessor (uphill);
    None means the symmetric walk, p = 1/d.  Each of the d-1 children
    receives probability (1 - p) / (d - 1).
    """

    d: int
    drift_p: float | None = None
    depth_cap_D: int = 10

    def __post_init__(self):
        if self.d < 3:
            raise ValueError("need degree d >= 3")
        if self.depth_cap_D < 1:
            raise ValueError("need depth_cap_D >= 1")
        p = self.p
        if not 0.0 < p < 1.0:
            raise ValueError("drift must lie in (0, 1)")

    @property
    def p(self) -> float:
        return 1.0 / self.d if self.drift_p is None else float(self.drift_p)

    @property
    def s_child(self) -> float:
        return (1.0 - self.p) / (self.d - 1)

    @property
    def is_symmetric(self) -> bool:
        return self.p == 1.0 / self.d


@dataclass(frozen=True)
class BranchSurvival:
    """Two-sided bracket on a return or excursion survival weight."""

    lower: float
    upper: float
    depth_used: int

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True)
class RhoPotential:
    """Effective line potential of one geodesic site, with its bracket.

    rho = -ln h, so the h bracket maps order-reversingly:
    rho_lower = -ln(h upper), rho_upper = -ln(h lower).
    """

    site_index: int
    rho_lower: float
    rho_upper: float
    h_bracket: BranchSurvival

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.rho_lower + self.rho_upper)

    @property
    def halfwidth(self) -> float:
        return 0.5 * (self.rho_upper - self.rho_lower)


def first_passage_gf(d: int, z: float) -> float:
    """Generating function of the first-passage time to a fixed neighbour
    for the symmetric walk on the d-regular tree (smaller root of
    F = z/d + ((d-1)/d) z F**2)."""
    if d < 3:
        raise ValueError("need d >= 3")
    if not 0.0 <= z <= 1.0:
        raise ValueError("need z in [0, 1]")
    if z == 0.0:
        return 0.0
    disc = d * d - 4.0 * (d - 1.0) * z * z
    return (d - math.sqrt(disc)) / (2.0 * (d - 1.0) * z)


def sigma_finite_prob(d: int) -> float:
    """Probability that the symmetric tree walk ever steps onto one of the
    two geodesic neighbours of its starting vertex.

    Returns the closed form 2(d-1)/((d-1)^2 + 1) after checking it against
    the generating-function recursion at z = 1.
    """
    if d < 3:
        raise ValueError("need d >= 3")
    value = 2.0 * (d - 1.0) / ((d - 1.0) ** 2 + 1.0)
    recursed = (2.0 / d) / (1.0 - ((d - 2.0) / d) * first_passage_gf(d, 1.0))
    if abs(value - recursed) > 1e-12:
        raise AssertionError(
            f"generating-function identity violated for d={d}: {value} vs {recursed}"
        )
    return value


def zero_potential_return_weight(cfg: TreeConfig) -> float:
    """Return probability from a child to its parent with no potentials:
    the largest value any branch return weight can take."""
    p = cfg.p
    return min(1.0, p / (1.0 - p))


def _forest_level_sizes(d: int, n_roots: int, depth: int) -> list[int]:
    sizes = [n_roots]
    for _ in range(depth - 1):
        sizes.append(sizes[-1] * (d - 1))
    return sizes


def _forest_bracket(
    cfg: TreeConfig,
    dist: PotentialDistribution,
    seed: int,
    stream_id: int,
    n_roots: int,
    depth: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Bottom-up return-weight brackets for every root of a branch forest.

    Vertex counters are level-ordered starting at 1 (counter 0 belongs to
    the geodesic site that owns the forest), so trajectory simulation on
    the same keys sees identical potentials.
    """
    d, p, s_child = cfg.d, cfg.p, cfg.s_child
    gamma = zero_potential_return_weight(cfg)
    if dist.kind == "point":
        s = math.exp(-dist.mass_value)
        w_lo, w_hi = 0.0, gamma
        for _ in range(depth):
            w_lo = p * s / (1.0 - s * s_child * (d - 1) * w_lo)
            w_hi = p * s / (1.0 - s * s_child * (d - 1) * w_hi)
        return np.full(n_roots, w_lo), np.full(n_roots, w_hi)

    sizes = _forest_level_sizes(d, n_roots, depth)
    if sum(sizes) > _FOREST_VERTEX_BUDGET:
        raise ValueError(
            f"branch forest of depth {depth} needs {sum(sizes)} vertices; "
            "lower the depth cap (only point-mass laws collapse to scalars)"
        )
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    w_lo: np.ndarray | float = 0.0
    w_hi: np.ndarray | float = gamma
    for level in range(depth, 0, -1):
        counters = 1 + offsets[level - 1] + np.arange(sizes[level - 1], dtype=np.int64)
        omega = dist.ppf(keyed_uniform(seed, stream_id, counters))
        s = np.exp(-omega)
        if level == depth:
            child_lo = s_child * (d - 1) * w_lo
            child_hi = s_child * (d - 1) * w_hi
        else:
            child_lo = s_child * w_lo.reshape(sizes[level - 1], d - 1).sum(axis=1)
            child_hi = s_child * w_hi.reshape(sizes[level - 1], d - 1).sum(axis=1)
        denom_lo = 1.0 - s * child_lo
        denom_hi = 1.0 - s * child_hi
        if np.any(denom_lo <= 0.0) or np.any(denom_hi <= 0.0):
            raise AssertionError("return-weight denominator not positive; bracket logic violated")
        w_lo = p * s / denom_lo
        w_hi = p * s / denom_hi
    return np.atleast_1d(w_lo), np.atleast_1d(w_hi)


def branch_return_weight(
    cfg: TreeConfig,
    dist: PotentialDistribution,
    depth: int,
    seed: int = 0,
    stream_id: int = 0,
) -> BranchSurvival:
    """Bracketed return weight of one branch: the survival weight of
    starting at the branch root and coming back to its parent.

    The lower bound kills the walk at the depth frontier; the upper bound
    grants frontier subtrees the zero-potential return weight, the largest
    value compatible with nonnegative potentials.
    """
    if not 1 <= depth <= cfg.depth_cap_D:
        raise ValueError("depth must lie in [1, depth_cap_D]")
    lo, hi = _forest_bracket(cfg, dist, seed, stream_id, n_roots=1, depth=depth)
    return BranchSurvival(float(lo[0]), float(hi[0]), depth)


def excursion_survival_h(
    cfg: TreeConfig,
    dist: PotentialDistribution,
    seed: int = 0,
    stream_id: int = 0,
    depth_cap: int | None = None,
) -> BranchSurvival:
    """Bracketed excursion survival weight h of one geodesic site: survive
    the site and its branch excursions until first stepping onto one of
    the two geodesic neighbours."""
    depth = cfg.depth_cap_D if depth_cap is None else depth_cap
    if depth < 1:
        raise ValueError("need depth >= 1")
    omega_site = float(dist.ppf(keyed_uniform(seed, stream_id, 0)))
    lo, hi = _forest_bracket(cfg, dist, seed, stream_id, n_roots=cfg.d - 2, depth=depth)
    s = math.exp(-omega_site)
    s_geo = cfg.p + cfg.s_child

    def fold(weights: np.ndarray) -> float:
        denom = 1.0 - s * cfg.s_child * float(weights.sum())
        if denom <= 0.0:
            raise AssertionError("excursion denominator not positive; bracket logic violated")
        return s_geo * s / denom

    return BranchSurvival(fold(lo), fold(hi), depth)


def rho_for_site(
    cfg: TreeConfig,
    dist: PotentialDistribution,
    site_index: int,
    seed: int = 0,
    stream_id: int = 0,
    depth_cap: int | None = None,
) -> RhoPotential:
    """Effective potential bracket of one geodesic site.

    Each site owns a derived stream keyed by its index, so the rho values
    are independent across sites and resampling one site never perturbs
    another.
    """
    h = excursion_survival_h(cfg, dist, seed, substream(stream_id, site_index), depth_cap)
    return RhoPotential(
        site_index=site_index,
        rho_lower=-math.log(h.upper),
        rho_upper=-math.log(h.lower),
        h_bracket=h,
    )


def rho_sequence(
    cfg: TreeConfig,
    dist: PotentialDistribution,
    n: int,
    seed: int = 0,
    stream_id: int = 0,
    depth_cap: int | None = None,
    threads: int = 1,
) -> list[RhoPotential]:
    """Independent rho brackets for geodesic sites 0 .. n-1.

    Sites own disjoint streams, so they can be computed on any number of
    workers without changing a digit.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    from ._parallel import ordered_map

    return ordered_map(
        lambda i: rho_for_site(cfg, dist, i, seed, stream_id, depth_cap),
        range(n),
        threads=threads,
    )


def geodesic_step_prob(cfg: TreeConfig) -> float:
    """Probability that the induced geodesic walk steps uphill (toward the
    predecessor), conditional on stepping at all: p / (p + (1-p)/(d-1))."""
    return cfg.p / (cfg.p + cfg.s_child)


@dataclass(frozen=True)
class EffectiveLineModel:
    """The reduced line problem: rho environments (bracket midpoints plus
    both envelopes) and the induced step probability."""

    env_mid: Environment
    env_lower: Environment
    env_upper: Environment
    step_right_prob: float
    brackets: list[RhoPotential]
    max_halfwidth: float
    cfg: TreeConfig


def rho_environment(
    cfg: TreeConfig,
    dist: PotentialDistribution,
    window: tuple[int, int],
    seed: int = 0,
    stream_id: int = 0,
    depth_cap: int | None = None,
    threads: int = 1,
) -> tuple[list[RhoPotential], Environment, Environment, Environment]:
    """rho brackets on an inclusive window, packaged as three environments
    (midpoint, lower envelope, upper envelope) sharing the window."""
    from ._parallel import ordered_map

    lo, hi = int(window[0]), int(window[1])
    brackets = ordered_map(
        lambda i: rho_for_site(cfg, dist, i, seed, stream_id, depth_cap),
        range(lo, hi + 1),
        threads=threads,
    )
    def pack(vals):
        return Environment(lo, hi, np.asarray(vals), seed=seed, stream_id=stream_id)
    mids = pack([b.midpoint for b in brackets])
    lows = pack([b.rho_lower for b in brackets])
    highs = pack([b.rho_upper for b in brackets])
    return brackets, mids, lows, highs


def reduce_to_line(
    cfg: TreeConfig,
    dist: PotentialDistribution,
    n: int,
    seed: int = 0,
    stream_id: int = 0,
    r_ratio: float = 4.0,
    orientation: str = "uphill",
    depth_cap: int | None = None,
    threads: int = 1,
) -> EffectiveLineModel:
    """Build the effective line model for journeys to geodesic site n.

    The window spans [-ceil(r_ratio * n), n] so downstream line solves can
    place their barrier inside it.  orientation "uphill" points the
    positive direction toward predecessors (step probability
    geodesic_step_prob); "downhill" is the complementary ray.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if orientation not in ("uphill", "downhill"):
        raise ValueError("orientation must be 'uphill' or 'downhill'")
    r = -math.ceil(r_ratio * n)
    brackets, mids, lows, highs = rho_environment(
        cfg, dist, (r, n), seed, stream_id, depth_cap, threads=threads
    )
    q_up = geodesic_step_prob(cfg)
    step = q_up if orientation == "uphill" else 1.0 - q_up
    return EffectiveLineModel(
        env_mid=mids,
        env_lower=lows,
        env_upper=highs,
        step_right_prob=step,
        brackets=brackets,
        max_halfwidth=max(b.halfwidth for b in brackets),
        cfg=cfg,
    )


# ---------------------------------------------------------------------------
# Trajectory simulation: the independent cross-check on the recursion.
# ---------------------------------------------------------------------------


class _LazyForestPotentials:
    """Per-vertex potentials of one geodesic site's branch forest, sampled
    on demand with the same counters the recursion uses."""

    def __init__(self, cfg: TreeConfig, dist: PotentialDistribution, seed: int, stream_id: int):
        self.cfg = cfg
        self.dist = dist
        self.seed = seed
        self.stream_id = stream_id
        self._cache: dict[int, float] = {}
        self._offsets = [0]

    def _offset(self, level: int) -> int:
        d = self.cfg.d
        while len(self._offsets) < level:
            last = len(self._offsets)
            width = (d - 2) * (d - 1) ** (last - 1)
            self._offsets.append(self._offsets[-1] + width)
        return self._offsets[level - 1]

    def counter(self, level: int, idx: int) -> int:
        return 1 + self._offset(level) + idx

    def value(self, counter: int) -> float:
        cached = self._cache.get(counter)
        if cached is None:
            cached = float(self.dist.ppf(keyed_uniform(self.seed, self.stream_id, counter)))
            self._cache[counter] = cached
        return cached


def simulate_excursions(
    cfg: TreeConfig,
    dist: PotentialDistribution,
    site_index: int = 0,
    n_excursions: int = 100_000,
    seed: int = 0,
    stream_id: int = 0,
    max_steps: int = 100_000,
) -> tuple[float, float, int]:
    """Monte Carlo estimate of the excursion survival weight h of one site.

    Walks the actual tree with lazily keyed potentials (identical keys to
    the recursion bracket for the same site) and accumulates the survival
    weight until the walk first steps onto a geodesic neighbour.  Returns
    (mean, standard error, number of lost excursions); an excursion is
    lost, and scored zero, if it exceeds max_steps, wanders below the
    escape level, or carries a dead weight.  Each truncation is one-sided;
    depth losses are bounded per level by _depth_truncation_factor, which
    is negligible except at drift 1/2 exactly, where the lost counter is
    the honest measure of what was discarded.
    """
    d, p, s_child = cfg.d, cfg.p, cfg.s_child
    level_cap = _max_walk_level(d)
    site_stream = substream(stream_id, site_index)
    forest = _LazyForestPotentials(cfg, dist, seed, site_stream)
    omega_site = float(dist.ppf(keyed_uniform(seed, site_stream, 0)))
    gen = stream_generator(seed, _EXCURSION_TAG, site_stream)
    total = 0.0
    total_sq = 0.0
    n_lost = 0
    for _ in range(n_excursions):
        level, idx = 0, 0  # level 0 encodes the geodesic site itself
        log_weight = 0.0
        weight = 0.0
        for _ in range(max_steps):
            if log_weight < _LOG_WEIGHT_CUTOFF:
                n_lost += 1
                break
            if level == 0:
                log_weight -= omega_site
                u = gen.random()
                if u < p + s_child:
                    weight = math.exp(log_weight)  # stepped onto the geodesic
                    break
                branch = int((u - (p + s_child)) / s_child)
                level, idx = 1, min(branch, d - 3)
            else:
                log_weight -= forest.value(forest.counter(level, idx))
                u = gen.random()
                if u < p:
                    level, idx = (0, 0) if level == 1 else (level - 1, idx // (d - 1))
                else:
                    child = min(int((u - p) / s_child), d - 2)
                    level, idx = level + 1, idx * (d - 1) + child
                    if level > level_cap:
                        n_lost += 1
                        break
        else:
            n_lost += 1
        total += weight
        total_sq += weight * weight
    mean = total / n_excursions
    var = max(total_sq / n_excursions - mean**2, 0.0)
    se = math.sqrt(var / n_excursions)
    return mean, se, n_lost


def simulate_geodesic_passage(
    cfg: TreeConfig,
    dist: PotentialDistribution,
    target: int = 1,
    n_walks: int = 20_000,
    seed: int = 0,
    stream_id: int = 0,
    escape_horizon: int = 60,
    max_steps: int = 1_000_000,
) -> tuple[float, float, int]:
    """Monte Carlo estimate of the survival weight from geodesic site 0 to
    geodesic site target > 0 by walking the full tree.

    The same per-site streams as the reduction are used, so this estimates
    the quantity the effective line model computes.  Walks farther than
    escape_horizon from the target are declared lost: a one-sided
    truncation whose contribution shrinks per level by
    _depth_truncation_factor (for the symmetric walk, (d-1)^(-distance)).
    Returns (mean, standard error, walks lost to the step cap rather than
    the horizon).
    """
    if target <= 0:
        raise ValueError("target must be a positive geodesic index")
    d, p, s_child = cfg.d, cfg.p, cfg.s_child
    escape_horizon = min(escape_horizon, _max_walk_level(d))
    forests: dict[int, _LazyForestPotentials] = {}
    site_omega: dict[int, float] = {}

    def forest_of(i: int) -> _LazyForestPotentials:
        f = forests.get(i)
        if f is None:
            f = _LazyForestPotentials(cfg, dist, seed, substream(stream_id, i))
            forests[i] = f
        return f

    def omega_of(i: int) -> float:
        v = site_omega.get(i)
        if v is None:
            v = float(dist.ppf(keyed_uniform(seed, substream(stream_id, i), 0)))
            site_omega[i] = v
        return v

    gen = stream_generator(seed, _PASSAGE_TAG, stream_id)
    total = 0.0
    total_sq = 0.0
    n_capped = 0
    for _ in range(n_walks):
        geo, level, idx = 0, 0, 0
        log_weight = 0.0
        weight = 0.0
        for _ in range(max_steps):
            if log_weight < _LOG_WEIGHT_CUTOFF:
                break  # contributes below 2e-35 even if it would arrive
            if level == 0:
                if geo == target:
                    weight = math.exp(log_weight)
                    break
                if (target - geo) > escape_horizon:
                    break  # certified negligible hitting probability
                log_weight -= omega_of(geo)
                u = gen.random()
                if u < p:
                    geo += 1  # uphill, toward the predecessor
                elif u < p + s_child:
                    geo -= 1
                else:
                    branch = int((u - (p + s_child)) / s_child)
                    level, idx = 1, min(branch, d - 3)
            else:
                if level + abs(target - geo) > escape_horizon:
                    break
                f = forest_of(geo)
                log_weight -= f.value(f.counter(level, idx))
                u = gen.random()
                if u < p:
                    level, idx = (0, 0) if level == 1 else (level - 1, idx // (d - 1))
                else:
                    child = min(int((u - p) / s_child), d - 2)
                    level, idx = level + 1, idx * (d - 1) + child
        else:
            n_capped += 1
        total += weight
        total_sq += weight * weight
    mean = total / n_walks
    var = max(total_sq / n_walks - mean**2, 0.0)
    se = math.sqrt(var / n_walks)
    return mean, se, n_capped


# ---------------------------------------------------------------------------
# Turning-point geodesics for drifted walks.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeodesicSpec:
    """Geometry of the journey: monotone ray or a geodesic whose height
    peaks at turning_index_k, where the drift direction flips."""

    kind: str
    turning_index_k: int = 0
    start_index: int = 0
    target_index: int = 1

    def __post_init__(self):
        if self.kind not in ("monotone", "turning-point"):
            raise ValueError("kind must be 'monotone' or 'turning-point'")
        if self.target_index <= self.start_index:
            raise ValueError("target must lie beyond the start")


@dataclass(frozen=True)
class TurningPointReport:
    """Quenched decomposition across the peak and the annealed orderings.

    a_total = a_uphill + a_beyond holds exactly (additivity along the
    geodesic); on the annealed side the longer journey is never less
    costly than its tail, and never costlier than the tail plus the
    negative log mean uphill weight.
    """

    spec: GeodesicSpec
    barrier_r: int
    a_total: float
    a_uphill: float
    a_beyond: float
    additivity_residual: float
    b_total: float | None
    b_beyond: float | None
    ln_mean_uphill_weight: float | None
    slack_longer_journey: float | None
    slack_mean_weight: float | None
    line_model: EffectiveLineModel | None
    line_dist: PotentialDistribution | None


def _quantize_to_atoms(samples: np.ndarray, n_atoms: int = 3) -> PotentialDistribution:
    """Finite-support summary of sampled rho values (quantile bins)."""
    samples = np.sort(np.asarray(samples, dtype=np.float64))
    bins = np.array_split(samples, n_atoms)
    atoms: dict[float, float] = {}
    for part in bins:
        if part.size == 0:
            continue
        v = float(part.mean())
        atoms[v] = atoms.get(v, 0.0) + part.size / samples.size
    return PotentialDistribution(kind="finite", atoms=tuple(sorted(atoms.items())))


def turning_point_decompose(
    spec: GeodesicSpec,
    cfg: TreeConfig,
    dist: PotentialDistribution,
    seed: int = 0,
    stream_id: int = 0,
    barrier_r: int = -3,
    depth_cap: int | None = None,
    line_dist: PotentialDistribution | None = None,
    surrogate_samples: int = 240,
) -> TurningPointReport:
    """Decompose the journey 0 -> target across the geodesic peak at k.

    For k <= 0 the peak is behind the start: the geodesic is cut there,
    extended by predecessors into a monotone ray, and the standard
    reduction applies (the walk travels downhill).  For 0 < k < target the
    quenched cost splits exactly at the peak, and the annealed orderings
    are verified by exact enumeration over a finite-support line law
    (line_dist, by default a quantile summary of sampled rho midpoints).
    """
    if spec.kind != "turning-point":
        raise ValueError("spec.kind must be 'turning-point'")
    if spec.start_index != 0:
        raise ValueError("decomposition is set up for start_index = 0")
    n = spec.target_index
    k = spec.turning_index_k
    if k >= n:
        raise ValueError(f"invalid turning index k={k}: must be < target")
    if k <= 0:
        line = reduce_to_line(
            cfg, dist, n, seed, stream_id, orientation="downhill", depth_cap=depth_cap
        )
        a_total = two_point_a(line.env_mid, 0, n, barrier_r, line.step_right_prob)
        return TurningPointReport(
            spec=spec, barrier_r=barrier_r, a_total=a_total, a_uphill=0.0,
            a_beyond=a_total, additivity_residual=0.0, b_total=None, b_beyond=None,
            ln_mean_uphill_weight=None, slack_longer_journey=None,
            slack_mean_weight=None, line_model=line, line_dist=None,
        )

    r = int(barrier_r)
    if r >= 0:
        raise ValueError("barrier must be negative")
    q_up = geodesic_step_prob(cfg)
    sites = np.arange(r + 1, n)  # the sites a path from 0 to n can pay
    p_sites = np.where(sites < k, q_up, np.where(sites == k, 0.5, 1.0 - q_up))

    brackets, env_mid, _, _ = rho_environment(cfg, dist, (r, n), seed, stream_id, depth_cap)
    omega_mid = env_mid.slice_values(r + 1, n - 1)
    _, log_w = forward_step_weights(omega_mid, p_sites)
    a_of = lambda x, y: float(-np.sum(log_w[x - (r + 1) : y - (r + 1)]))
    a_total = a_of(0, n)
    a_uphill = a_of(0, k)
    a_beyond = a_of(k, n)

    if line_dist is None:
        mids = np.array(
            [
                rho_for_site(cfg, dist, 100_000 + i, seed, stream_id, depth_cap).midpoint
                for i in range(surrogate_samples)
            ]
        )
        line_dist = _quantize_to_atoms(mids)
    f_total = 0.0
    f_beyond = 0.0
    mean_c = 0.0
    col_of = lambda site: site - (r + 1)
    for values, probs in iterate_configs(line_dist, sites.size):
        _, lw = forward_step_weights(values, p_sites)
        e_total = np.exp(np.sum(lw[:, col_of(0) :], axis=1))
        e_beyond = np.exp(np.sum(lw[:, col_of(k) :], axis=1))
        c = np.exp(np.sum(lw[:, col_of(0) : col_of(k)], axis=1))
        f_total += float(probs @ e_total)
        f_beyond += float(probs @ e_beyond)
        mean_c += float(probs @ c)
    b_total = -math.log(f_total)
    b_beyond = -math.log(f_beyond)
    ln_mean_c = math.log(mean_c)
    return TurningPointReport(
        spec=spec,
        barrier_r=r,
        a_total=a_total,
        a_uphill=a_uphill,
        a_beyond=a_beyond,
        additivity_residual=a_total - (a_uphill + a_beyond),
        b_total=b_total,
        b_beyond=b_beyond,
        ln_mean_uphill_weight=ln_mean_c,
        slack_longer_journey=b_total - b_beyond,
        slack_mean_weight=(-ln_mean_c + b_beyond) - b_total,
        line_model=None,
        line_dist=line_dist,
    )
