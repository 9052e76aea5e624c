"""Discrete Hilbert transform on a large periodic grid.

The Hilbert transform is realized as the Fourier multiplier -i*sgn(k) on a
symmetric interval [-L, L] treated periodically.  For functions supported
well inside the interval this approximates the real-line transform with an
O(1/L) periodization error.  Sample points sit at half-cell offsets
x_i = -L + (i + 1/2) * (2L/N) so that the closed-form basis
log|x/(x-1)| is finite at every node.

The zero mode of the transform output is set to zero (principal-value
convention); the Nyquist mode is annihilated as well, which makes
H(H(f)) = -f hold to round-off on mean-zero band-limited grid functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_HALF_WIDTH = 32.0
DEFAULT_N_POINTS = 2 ** 16


@dataclass(frozen=True)
class SignConvention:
    """Orientation of the Hilbert transform, +1 or -1.

    The default +1 gives H(indicator of [0,1])(x) = (1/pi) log|x/(x-1)|;
    -1 selects the opposite sign everywhere a transform is applied.
    """

    orientation: int = 1

    def __post_init__(self):
        if self.orientation not in (1, -1):
            raise ValueError(f"orientation must be +1 or -1, got {self.orientation}")


PLUS = SignConvention(1)
MINUS = SignConvention(-1)


@dataclass(frozen=True)
class GridFunction:
    """Real function sampled at the midpoints of N uniform cells on [-L, L].

    Immutable: the sample array is copied on construction and marked
    read-only.  N must be a power of two, at least 16, and every sample
    finite.  Construction also verifies that log|x/(x-1)| is finite at all
    nodes, i.e. no node coincides with 0 or 1.
    """

    half_width: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float)
        n = arr.shape[0]
        if arr.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if n < 16 or (n & (n - 1)) != 0:
            raise ValueError(f"n_points must be a power of two >= 16, got {n}")
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples contain non-finite values")
        x = grid_nodes(self.half_width, n)
        basis = np.log(np.abs(x / (x - 1.0)))
        if not np.all(np.isfinite(basis)):
            raise ValueError(
                "grid places a node on the basis singularities {0, 1}; "
                "choose a different half_width or n_points"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def n_points(self) -> int:
        return self.samples.shape[0]

    @property
    def cell(self) -> float:
        return 2.0 * self.half_width / self.n_points

    def nodes(self) -> np.ndarray:
        return grid_nodes(self.half_width, self.n_points)

    @classmethod
    def from_callable(cls, half_width: float, n_points: int, fn) -> "GridFunction":
        x = grid_nodes(half_width, n_points)
        return cls(half_width, np.asarray(fn(x), dtype=float))

    def with_samples(self, samples: np.ndarray) -> "GridFunction":
        return GridFunction(self.half_width, samples)

    def same_grid(self, other: "GridFunction") -> bool:
        return (
            self.half_width == other.half_width and self.n_points == other.n_points
        )


def grid_nodes(half_width: float, n_points: int) -> np.ndarray:
    h = 2.0 * half_width / n_points
    return -half_width + (np.arange(n_points) + 0.5) * h


def _require_same_grid(f: GridFunction, g: GridFunction):
    if not f.same_grid(g):
        raise ValueError(
            f"grid mismatch: (L={f.half_width}, N={f.n_points}) vs "
            f"(L={g.half_width}, N={g.n_points})"
        )


def indicator(half_width: float = DEFAULT_HALF_WIDTH,
              n_points: int = DEFAULT_N_POINTS) -> GridFunction:
    """Sharp 0/1 sampling of the indicator of [0, 1]."""
    x = grid_nodes(half_width, n_points)
    return GridFunction(half_width, ((x > 0.0) & (x < 1.0)).astype(float))


def mollified_indicator(half_width: float = DEFAULT_HALF_WIDTH,
                        n_points: int = DEFAULT_N_POINTS,
                        width: float = 0.1) -> GridFunction:
    """Cosine-taper mollification of the indicator of [0, 1].

    Ramps from 0 to 1 over [-w, w] and back down over [1-w, 1+w]; C^1 and in
    particular Dini continuous.  Used for convergence studies and as the
    smooth multiplier in the growth-contrast experiment.
    """
    if not 0 < width < 0.5:
        raise ValueError(f"taper width must be in (0, 0.5), got {width}")
    x = grid_nodes(half_width, n_points)
    y = np.zeros_like(x)
    up = (x > -width) & (x < width)
    y[up] = 0.5 * (1.0 + np.sin(0.5 * np.pi * x[up] / width))
    y[(x >= width) & (x <= 1.0 - width)] = 1.0
    down = (x > 1.0 - width) & (x < 1.0 + width)
    y[down] = 0.5 * (1.0 - np.sin(0.5 * np.pi * (x[down] - 1.0) / width))
    return GridFunction(half_width, y)


def hilbert_multiplier_apply(samples: np.ndarray, orientation: int = 1) -> np.ndarray:
    """Apply -i*sgn(k) (times orientation) to a raw sample array.

    Internal fast path used by the PDE solver; zero and Nyquist modes are
    annihilated.
    """
    spec = np.fft.rfft(samples)
    spec *= -1j * orientation
    spec[0] = 0.0
    spec[-1] = 0.0
    return np.fft.irfft(spec, n=samples.shape[0])


def hilbert_transform(f: GridFunction, sign: SignConvention = PLUS) -> GridFunction:
    """Periodic conjugate-function approximation of the Hilbert transform."""
    return f.with_samples(hilbert_multiplier_apply(f.samples, sign.orientation))


def hilbert_indicator(x: float) -> float:
    """Closed form (1/pi) log|x/(x-1)| of the transformed indicator of [0,1]."""
    if x == 0.0 or x == 1.0:
        raise ValueError(f"log|x/(x-1)| is singular at x={x}")
    return math.log(abs(x / (x - 1.0))) / math.pi


def indicator_log_ratio(x: np.ndarray) -> np.ndarray:
    """Vectorized (1/pi) log|x/(x-1)|; caller guarantees x avoids {0, 1}."""
    x = np.asarray(x, dtype=float)
    return np.log(np.abs(x / (x - 1.0))) / math.pi


def tricomi_residual(f: GridFunction, g: GridFunction,
                     sign: SignConvention = PLUS) -> float:
    """Max-norm defect of H(fg) - gH(f) - fH(g) - H(H(f)H(g)) on the grid."""
    _require_same_grid(f, g)
    o = sign.orientation
    hf = hilbert_multiplier_apply(f.samples, o)
    hg = hilbert_multiplier_apply(g.samples, o)
    lhs = hilbert_multiplier_apply(f.samples * g.samples, o)
    rhs = g.samples * hf + f.samples * hg + hilbert_multiplier_apply(hf * hg, o)
    return float(np.max(np.abs(lhs - rhs)))


def commutator(a: GridFunction, f: GridFunction,
               sign: SignConvention = PLUS) -> GridFunction:
    """a*H(f) - H(a*f), the commutator of multiplication by a with H."""
    _require_same_grid(a, f)
    o = sign.orientation
    out = a.samples * hilbert_multiplier_apply(f.samples, o) \
        - hilbert_multiplier_apply(a.samples * f.samples, o)
    return a.with_samples(out)


def inner_product(f: GridFunction, g: GridFunction) -> float:
    """Discrete L^2 inner product (cell-weighted)."""
    _require_same_grid(f, g)
    return float(np.dot(f.samples, g.samples) * f.cell)


def l2_norm(f: GridFunction) -> float:
    return math.sqrt(max(inner_product(f, f), 0.0))
