"""Per-block channel gain law.

The normalized gain (channel power gain over noise variance) is i.i.d.
across fading blocks. The shipped law is a truncated exponential: the raw
exponential has E[1/h] = inf, which would make the last-block value
function infinite, so the support is clipped to [h_min, h_max] and the
density renormalized. Sampling (for simulation) and quadrature expectation
(for the dynamic program) both use the same truncated law.
"""
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_H_MIN_FRACTION = 1e-3  # h_min = fraction * mean unless given
DEFAULT_H_MAX_FACTOR = 50.0    # h_max = factor * mean unless given
_NODES_PER_PANEL = 8


@dataclass(frozen=True)
class GainDistribution:
    """Truncated exponential gain law.

    mean: mean of the untruncated exponential (the Rayleigh-fading mean gain)
    h_min: truncation floor, > 0 so that E[1/h] is finite
    h_max: truncation cap; ``math.inf`` leaves the upper tail open
    """

    mean: float
    h_min: float
    h_max: float

    def __post_init__(self):
        if not (self.mean > 0 and math.isfinite(self.mean)):
            raise ValueError(f"mean must be positive finite, got {self.mean}")
        if not (0 < self.h_min < self.h_max):
            raise ValueError(f"need 0 < h_min < h_max, got [{self.h_min}, {self.h_max}]")

    @property
    def normalizer(self) -> float:
        hi = 0.0 if math.isinf(self.h_max) else math.exp(-self.h_max / self.mean)
        return math.exp(-self.h_min / self.mean) - hi


def truncated_exponential(mean: float, h_min: float | None = None,
                          h_max: float | None = None) -> GainDistribution:
    """Build the gain law with the default truncation for a given mean."""
    if h_min is None:
        h_min = DEFAULT_H_MIN_FRACTION * mean
    if h_max is None:
        h_max = DEFAULT_H_MAX_FACTOR * mean
    return GainDistribution(mean=mean, h_min=h_min, h_max=h_max)


@dataclass(frozen=True)
class FixedGain:
    """Degenerate law: every block sees the same gain. Diagnostic/testing use."""

    value: float

    def __post_init__(self):
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ValueError(f"gain must be positive finite, got {self.value}")


def density(dist: GainDistribution, h) -> np.ndarray | float:
    """Renormalized truncated-exponential pdf; zero outside the support."""
    h = np.asarray(h, dtype=float)
    inside = (h >= dist.h_min) & (h <= dist.h_max)
    out = np.where(inside, np.exp(-np.where(inside, h, dist.h_min) / dist.mean), 0.0)
    out = out / (dist.mean * dist.normalizer)
    return out if out.ndim else float(out)


def cdf(dist: GainDistribution, h) -> np.ndarray | float:
    h = np.asarray(h, dtype=float)
    lo = math.exp(-dist.h_min / dist.mean)
    hc = np.clip(h, dist.h_min, dist.h_max)
    out = np.clip((lo - np.exp(-hc / dist.mean)) / dist.normalizer, 0.0, 1.0)
    return out if out.ndim else float(out)


def sample(dist, rng: np.random.Generator, size=None):
    """Inverse-CDF draw(s) from the gain law."""
    if isinstance(dist, FixedGain):
        if size is None:
            return dist.value
        return np.full(size, dist.value)
    u = rng.random(size)
    lo = math.exp(-dist.h_min / dist.mean)
    out = -dist.mean * np.log(lo - u * dist.normalizer)
    if not math.isinf(dist.h_max):
        out = np.minimum(out, dist.h_max)
    return out


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and probability weights realizing E[g(h)] as a weighted sum."""

    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        weights = np.ascontiguousarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1 or nodes.size == 0:
            raise ValueError("nodes and weights must be matching 1-D arrays")
        if (weights < 0).any():
            raise ValueError("quadrature weights must be nonnegative")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def node_count(self) -> int:
        return self.nodes.size


def effective_h_max(dist: GainDistribution) -> float:
    """Upper integration limit: the cap, or where the open tail mass is ~1e-18."""
    if math.isfinite(dist.h_max):
        return dist.h_max
    return dist.h_min + dist.mean * 41.5


def build_quadrature(dist, node_count: int = 64) -> QuadratureRule:
    """Composite Gauss-Legendre panels on a log-spaced cover of the support.

    Weights absorb the renormalized density and are rescaled to sum to one,
    so a rule is exactly a discrete probability law over its nodes.
    """
    if isinstance(dist, FixedGain):
        return QuadratureRule(nodes=np.array([dist.value]), weights=np.array([1.0]))
    if node_count < _NODES_PER_PANEL:
        raise ValueError(f"node_count must be >= {_NODES_PER_PANEL}, got {node_count}")
    panels = node_count // _NODES_PER_PANEL
    counts = [_NODES_PER_PANEL] * panels
    for i in range(node_count - _NODES_PER_PANEL * panels):
        counts[i % panels] += 1
    edges = np.geomspace(dist.h_min, effective_h_max(dist), panels + 1)
    nodes, weights = [], []
    for k in range(panels):
        x, w = np.polynomial.legendre.leggauss(counts[k])
        a, b = edges[k], edges[k + 1]
        hn = 0.5 * (b - a) * x + 0.5 * (a + b)
        nodes.append(hn)
        weights.append(0.5 * (b - a) * w * density(dist, hn))
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    return QuadratureRule(nodes=nodes, weights=weights / weights.sum())


def expect(rule: QuadratureRule, g) -> float:
    """Deterministic expectation of g(h) under the rule."""
    return float(rule.weights @ np.asarray(g(rule.nodes), dtype=float))


def inverse_gain_mean(rule: QuadratureRule) -> float:
    """E[1/h], the constant in the last-block value function."""
    return expect(rule, lambda h: 1.0 / h)


@dataclass(frozen=True)
class Channel:
    """A gain law paired with the quadrature rule the planner uses for it."""

    dist: GainDistribution | FixedGain
    rule: QuadratureRule


def make_channel(mean: float, h_min: float | None = None, h_max: float | None = None,
                 node_count: int = 64) -> Channel:
    dist = truncated_exponential(mean, h_min, h_max)
    return Channel(dist=dist, rule=build_quadrature(dist, node_count))


def fixed_channel(value: float) -> Channel:
    dist = FixedGain(value)
    return Channel(dist=dist, rule=build_quadrature(dist))
