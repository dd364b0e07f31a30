"""
Sample domains and deterministic point sets.
"""

from collections.abc import Sequence
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.stats import qmc

DEFAULT_GRID = (8, 8, 16)
DEFAULT_SEED = 7


class SampleDomain(BaseModel):
    """Chart box with an optional period per axis."""

    bounds: list[tuple[float, float]]
    periods: list[float | None] = [None, None, None]
    # Forbid unknown fields
    model_config = ConfigDict(extra="forbid")

    @field_validator("bounds")
    @classmethod
    def validate_bounds(cls, v):
        if len(v) != 3:
            raise ValueError("bounds must list 3 [low, high] pairs")
        for lo, hi in v:
            if not lo < hi:
                raise ValueError(f"empty domain: bound [{lo}, {hi}]")
        return v

    @field_validator("periods")
    @classmethod
    def validate_periods(cls, v):
        if len(v) != 3:
            raise ValueError("periods must list 3 entries (number or null)")
        if any(p is not None and p <= 0 for p in v):
            raise ValueError("periods must be positive")
        return v

    @model_validator(mode="after")
    def periods_cover_box(self):
        for (lo, hi), p in zip(self.bounds, self.periods, strict=True):
            if p is not None and abs((hi - lo) - p) > 1e-12 * max(1.0, p):
                raise ValueError(
                    f"periodic axis must span exactly one period: [{lo}, {hi}] vs {p}"
                )
        return self


class SamplingSpec(BaseModel):
    strategy: Literal["grid", "random"] = "grid"
    grid: tuple[int, int, int] = DEFAULT_GRID
    count: int = 1024
    seed: int = DEFAULT_SEED
    # Forbid unknown fields
    model_config = ConfigDict(extra="forbid")

    @field_validator("grid")
    @classmethod
    def validate_grid(cls, v):
        if any(k < 1 for k in v):
            raise ValueError("grid dimensions must be >= 1")
        return v

    @field_validator("count")
    @classmethod
    def validate_count(cls, v):
        if v < 1:
            raise ValueError("count must be >= 1")
        return v

    def describe(self) -> str:
        if self.strategy == "grid":
            return "grid " + "x".join(str(k) for k in self.grid)
        return f"random {self.count}"


def _axis_nodes(lo: float, hi: float, k: int, periodic: bool) -> np.ndarray:
    if periodic:
        # seam excluded: hi is the same point as lo
        return lo + (hi - lo) * np.arange(k) / k
    if k == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, k)


def sample_points(
    domain: SampleDomain,
    n: int | Sequence[int],
    strategy: Literal["grid", "random"] = "grid",
    seed: int = DEFAULT_SEED,
) -> np.ndarray:
    """Deterministic sample of `domain` as an (N, 3) array.

    Args:
        domain: chart box and periods.
        n: grid dimensions (3 ints) for "grid", point count for "random".
        strategy: "grid" covers the box uniformly in x-major order; periodic
            axes leave out the seam duplicate. "random" takes the first n
            points of a seeded scrambled Halton sequence.
        seed: generator seed for "random".
    """
    if strategy == "grid":
        dims = (n, n, n) if isinstance(n, int) else tuple(n)
        if len(dims) != 3 or any(k < 1 for k in dims):
            raise ValueError(f"grid needs 3 positive dimensions, got {n}")
        axes = [
            _axis_nodes(lo, hi, k, p is not None)
            for (lo, hi), k, p in zip(domain.bounds, dims, domain.periods, strict=True)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)
    if strategy == "random":
        if not isinstance(n, int) or n < 1:
            raise ValueError(f"random sampling needs a positive count, got {n}")
        halton = qmc.Halton(d=3, scramble=True, rng=np.random.default_rng(seed))
        lo = np.array([b[0] for b in domain.bounds])
        hi = np.array([b[1] for b in domain.bounds])
        return qmc.scale(halton.random(n), lo, hi)
    raise ValueError(f"Unknown sampling strategy '{strategy}'")


def sample_with(domain: SampleDomain, spec: SamplingSpec) -> np.ndarray:
    n = spec.grid if spec.strategy == "grid" else spec.count
    return sample_points(domain, n, spec.strategy, spec.seed)


def probe_vectors(points: np.ndarray, seed: int, count: int) -> np.ndarray:
    """`count` vectors per point with components in [-1, 1], shape (count, N, 3).

    Each point seeds its own generator from (seed, point bits), so the vectors
    do not depend on how the points are chunked.
    """
    out = np.empty((count, points.shape[0], 3))
    for i, p in enumerate(np.ascontiguousarray(points, dtype=np.float64)):
        words = np.frombuffer(p.tobytes(), dtype=np.uint32).tolist()
        rng = np.random.default_rng([seed, *words])
        out[:, i, :] = rng.uniform(-1.0, 1.0, size=(count, 3))
    return out


def chunks(points: np.ndarray, size: int) -> list[np.ndarray]:
    """Split points into consecutive chunks of fixed `size` (last may be short)."""
    if size < 1:
        raise ValueError("chunk size must be >= 1")
    return [points[i : i + size] for i in range(0, points.shape[0], size)]
