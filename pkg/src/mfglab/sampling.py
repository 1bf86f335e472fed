"""Mini-batch generation for the mesh-free training loops.

Time points follow a scaled Beta(a, b) law on [0, T]; with the default
a = b = 1/2 they are drawn by the exact arcsine transform sin^2(pi U / 2),
no rejection.  Space points are uniform on the domain.  Every consumer gets
its own deterministic stream derived from (master seed, stream index).
"""

from dataclasses import dataclass
import math

import numpy as np


@dataclass(frozen=True)
class Domain:
    """Either the unit torus [0,1]^d or the interval [-L, L] (d = 1)."""

    kind: str = "torus"
    d: int = 1
    L: float = 1.0

    def __post_init__(self):
        if self.kind not in ("torus", "interval"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "interval" and self.d != 1:
            raise ValueError("interval domain is 1-D")

    @property
    def volume(self):
        return 1.0 if self.kind == "torus" else 2.0 * self.L

    def contains(self, x):
        x = np.asarray(x)
        if self.kind == "torus":
            return bool(np.all(x >= 0.0) and np.all(x <= 1.0))
        return bool(np.all(np.abs(x) <= self.L))


@dataclass(frozen=True)
class BatchSpec:
    """Batch sizes and sampling parameters for one training setup."""

    Mt: int = 10
    Mx: int = 1024
    Mb: int = 1024
    beta_a: float = 0.5
    beta_b: float = 0.5
    domain: Domain = Domain()
    T: float = 1.0

    def __post_init__(self):
        if min(self.Mt, self.Mx, self.Mb) <= 0:
            raise ValueError("batch sizes must be positive")
        if self.beta_a <= 0 or self.beta_b <= 0:
            raise ValueError("Beta parameters must be positive")
        if self.T <= 0:
            raise ValueError("horizon must be positive")


def stream_rng(seed, stream):
    """Independent generator for (master seed, stream index)."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(stream))))


def sample_times(spec, rng, count=None):
    n = spec.Mt if count is None else count
    if spec.beta_a == 0.5 and spec.beta_b == 0.5:
        u = rng.random(n)
        x = np.sin(0.5 * math.pi * u) ** 2
    else:
        x = rng.beta(spec.beta_a, spec.beta_b, size=n)
    return spec.T * x


def sample_space(spec, rng, count):
    dom = spec.domain
    if dom.kind == "torus":
        return rng.random((count, dom.d))
    return rng.uniform(-dom.L, dom.L, size=(count, 1))


def boundary_pairs(spec, rng, count):
    """Point pairs differing only in one coordinate pinned to 0 and 1.

    Returns (t, x_lo, x_hi, axis) arrays: for each sample, x_lo has the
    chosen coordinate at 0 and x_hi the same coordinate at 1; all remaining
    coordinates coincide.  Only defined on the torus.
    """
    dom = spec.domain
    if dom.kind != "torus":
        raise ValueError("boundary pairs are only defined on the torus")
    t = sample_times(spec, rng, count)
    x = rng.random((count, dom.d))
    axis = rng.integers(0, dom.d, size=count) if dom.d > 1 else np.zeros(count, dtype=int)
    x_lo = x.copy()
    x_hi = x.copy()
    x_lo[np.arange(count), axis] = 0.0
    x_hi[np.arange(count), axis] = 1.0
    return t, x_lo, x_hi, axis


def arcsine_cdf(x):
    """CDF of Beta(1/2, 1/2) on [0, 1]."""
    return 2.0 / math.pi * np.arcsin(np.sqrt(np.clip(x, 0.0, 1.0)))
