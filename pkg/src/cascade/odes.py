"""Truncated coefficient ODE systems driving the cascade.

Two generators are built mechanically from the exact algebra operators, so
the coordinate systems are correct by construction rather than transcribed:

* the autonomous transport generator for d/dt f = sigma * H(a f), acting on
  stacked coefficients (alpha_0..alpha_K, beta_0..beta_K) of an element of
  the span;
* the nonautonomous four-term family for the exponentially weighted system
  d/dt M = sigma * [ -H(M) - (e^t-1) a H(M) + (1-e^{-t}) H(a M)
                     + (e^t+e^{-t}-2) a H(a M) ],
  which arises from the substitution M = e^{t*chi} g applied to the damped
  transport equation d/dt g + chi*g = sigma * (-H(g)).

Generators are built with exact rational entries and converted to float64
once; integration is classical RK4 (or exponential Euler) in doubles.
Band checks run in log space to avoid underflow at high mode numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebra import (
    CascadeElement,
    CoeffTable,
    apply_H,
    apply_H_mult_a,
    mult_by_indicator,
)
from .grid import PLUS, SignConvention

BLOWUP_LIMIT = 1e300


@dataclass(frozen=True)
class OperatorMatrix:
    """Coordinate form of a linear operator on truncated span coefficients.

    Maps the stacked vector (alpha_0..alpha_K, beta_0..beta_K) to the
    coefficients of the operator image truncated at degree K.  Columns are
    the operator applied to the basis elements P_j and a*P_j; the absolute
    coefficient mass dropped by truncating each column is recorded.
    """

    K: int
    exact: tuple[tuple[Fraction, ...], ...]  # row-major, size 2(K+1) square
    tail_mass: tuple[float, ...]
    description: str = ""

    @property
    def dim(self) -> int:
        return 2 * (self.K + 1)

    def to_numpy(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.exact])

    def apply_exact(self, vec: list[Fraction]) -> list[Fraction]:
        if len(vec) != self.dim:
            raise ValueError(f"vector length {len(vec)} != {self.dim}")
        return [sum(r * v for r, v in zip(row, vec)) for row in self.exact]


def _element_to_stacked(e: CascadeElement, K: int) -> tuple[list[Fraction], float]:
    truncated = e.truncate(K)
    alpha = list(truncated.alpha) + [Fraction(0)] * (K - truncated.degree)
    beta = list(truncated.beta) + [Fraction(0)] * (K - truncated.degree)
    return alpha + beta, float(truncated.tail_dropped)


def _basis_element(idx: int, K: int) -> CascadeElement:
    """Basis element for stacked index idx: P_j for idx=j, a*P_j for idx=K+1+j."""
    j = idx % (K + 1)
    alpha = [Fraction(0)] * (j + 1)
    beta = [Fraction(0)] * (j + 1)
    if idx <= K:
        alpha[j] = Fraction(1)
    else:
        beta[j] = Fraction(1)
    return CascadeElement(tuple(alpha), tuple(beta), True)


def _matrix_from_operator(op, K: int, description: str) -> OperatorMatrix:
    dim = 2 * (K + 1)
    cols = []
    tails = []
    for idx in range(dim):
        image = op(_basis_element(idx, K))
        stacked, tail = _element_to_stacked(image, K)
        cols.append(stacked)
        tails.append(tail)
    rows = tuple(tuple(cols[c][r] for c in range(dim)) for r in range(dim))
    return OperatorMatrix(K, rows, tuple(tails), description)


def build_transport_generator(table: CoeffTable, K: int,
                              sign: SignConvention = PLUS) -> OperatorMatrix:
    """Generator of d/dt f = sigma*H(a f) on coefficients truncated at K."""
    if K > table.max_power:
        raise ValueError(f"K={K} exceeds table max_power {table.max_power}")
    sigma = Fraction(sign.orientation)

    def op(e: CascadeElement) -> CascadeElement:
        return apply_H_mult_a(e, table).scale(sigma)

    return _matrix_from_operator(op, K, f"sigma*H(a .), sigma={sign.orientation}, K={K}")


@dataclass(frozen=True)
class GeneratorFamily:
    """Time-dependent generator sum_i w_i(t) * A_i."""

    K: int
    parts: tuple[OperatorMatrix, ...]
    weights: callable
    description: str = ""

    @property
    def dim(self) -> int:
        return 2 * (self.K + 1)

    def matrices(self) -> tuple[np.ndarray, ...]:
        return tuple(p.to_numpy() for p in self.parts)

    def matrix_at(self, t: float) -> np.ndarray:
        mats = self.matrices()
        w = self.weights(t)
        out = np.zeros_like(mats[0])
        for wi, mi in zip(w, mats):
            out += wi * mi
        return out


def build_weighted_generator(table: CoeffTable, K: int,
                             sign: SignConvention = PLUS) -> GeneratorFamily:
    """Four-part family for the exponentially weighted system.

    Parts are the constant matrices for H, chi*H, H(chi .), chi*H(chi .);
    the time weights are sigma * (-1, -(e^t-1), (1-e^{-t}), (e^t+e^{-t}-2)).
    With sigma=-1 all four weights flip, which is the same system written
    for the opposite Hilbert-transform orientation.
    """
    if K > table.max_power:
        raise ValueError(f"K={K} exceeds table max_power {table.max_power}")
    lam = table.lam

    a1 = _matrix_from_operator(lambda e: apply_H(e, table), K, "H")
    a2 = _matrix_from_operator(
        lambda e: mult_by_indicator(apply_H(e, table), lam), K, "chi*H")
    a3 = _matrix_from_operator(
        lambda e: apply_H_mult_a(e, table), K, "H(chi .)")
    a4 = _matrix_from_operator(
        lambda e: mult_by_indicator(apply_H_mult_a(e, table), lam), K, "chi*H(chi .)")

    sigma = float(sign.orientation)

    def weights(t: float):
        return (
            -sigma,
            -sigma * math.expm1(t),
            sigma * (-math.expm1(-t)),
            sigma * (math.expm1(t) + math.expm1(-t)),
        )

    return GeneratorFamily(K, (a1, a2, a3, a4), weights,
                           f"weighted transport, sigma={sign.orientation}, K={K}")


def _family_from_matrix_fn(K: int, fn, description: str) -> GeneratorFamily:
    """Wrap a matrix-valued function of t as a GeneratorFamily."""
    fam = GeneratorFamily(K, (), lambda t: (), description)
    object.__setattr__(fam, "_matrix_fn", fn)
    return fam


def decoupled_transport_generator(K: int) -> GeneratorFamily:
    """Pure triangular system d gamma_k/dt = gamma_{k-1}/k with no tail.

    Realized on the stacked (alpha, beta) vector as d alpha_k/dt =
    (alpha_{k-1}+beta_{k-1})/k, so gamma_k = alpha_k + beta_k solves the
    triangular system exactly; closed form gamma_k(t) = t^k/(k!)^2.
    """
    dim = 2 * (K + 1)
    mat = np.zeros((dim, dim))
    for k in range(1, K + 1):
        mat[k, k - 1] = 1.0 / k
        mat[k, K + 1 + k - 1] = 1.0 / k
    return _family_from_matrix_fn(K, lambda t: mat, "decoupled triangular")


def _family_matrix_at(gen, t: float) -> np.ndarray:
    fn = getattr(gen, "_matrix_fn", None)
    if fn is not None:
        return fn(t)
    return gen.matrix_at(t)


@dataclass(frozen=True)
class GammaTrajectory:
    """Uniform-step trajectory of stacked span coefficients.

    states[m] holds (alpha_0..alpha_K, beta_0..beta_K) at times[m]; gamma
    denotes the combined coefficients alpha + beta seen on (0, 1).
    """

    times: np.ndarray
    states: np.ndarray
    K: int
    dt: float
    scheme: str
    description: str = ""

    def alpha(self) -> np.ndarray:
        return self.states[:, : self.K + 1]

    def beta(self) -> np.ndarray:
        return self.states[:, self.K + 1:]

    def gamma(self) -> np.ndarray:
        return self.alpha() + self.beta()

    def element_at(self, m: int) -> CascadeElement:
        return CascadeElement.from_coeffs(
            [float(v) for v in self.states[m, : self.K + 1]],
            [float(v) for v in self.states[m, self.K + 1:]],
            exact=False,
        )


def initial_indicator_state(K: int) -> np.ndarray:
    """Stacked coefficients of f0 = a: only beta_0 nonzero."""
    v = np.zeros(2 * (K + 1))
    v[K + 1] = 1.0
    return v


def integrate(gen, init: np.ndarray, t_end: float, dt: float,
              scheme: str = "rk4") -> GammaTrajectory:
    """Integrate d/dt y = A(t) y with constant step size.

    gen may be an OperatorMatrix (autonomous) or a GeneratorFamily.
    Schemes: classical RK4 (default) or exponential Euler (matrix
    exponential of the midpoint generator each step).
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_end < 0:
        raise ValueError(f"t_end must be >= 0, got {t_end}")
    init = np.asarray(init, dtype=float)
    if not np.all(np.isfinite(init)):
        raise ValueError("initial state must be finite")

    if isinstance(gen, OperatorMatrix):
        K = gen.K
        mat = gen.to_numpy()
        desc = gen.description

        def matrix_at(t):
            return mat
    else:
        K = gen.K
        desc = gen.description

        def matrix_at(t):
            return _family_matrix_at(gen, t)

    if init.shape[0] != 2 * (K + 1):
        raise ValueError(f"state length {init.shape[0]} != {2 * (K + 1)}")

    n_steps = math.ceil(t_end / dt - 1e-9)
    times = np.arange(n_steps + 1) * dt
    states = np.empty((n_steps + 1, init.shape[0]))
    states[0] = init
    y = init.copy()

    with np.errstate(over="ignore", invalid="ignore"):
        if scheme == "rk4":
            for m in range(n_steps):
                t = times[m]
                a1 = matrix_at(t)
                a2 = matrix_at(t + 0.5 * dt)
                a3 = matrix_at(t + dt)
                k1 = a1 @ y
                k2 = a2 @ (y + 0.5 * dt * k1)
                k3 = a2 @ (y + 0.5 * dt * k2)
                k4 = a3 @ (y + dt * k3)
                y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                _guard(y, times[m + 1], desc)
                states[m + 1] = y
        elif scheme == "expEuler":
            from scipy.linalg import expm

            for m in range(n_steps):
                t = times[m]
                y = expm(dt * matrix_at(t + 0.5 * dt)) @ y
                _guard(y, times[m + 1], desc)
                states[m + 1] = y
        else:
            raise ValueError(f"unknown scheme {scheme!r}; use 'rk4' or 'expEuler'")

    return GammaTrajectory(times, states, K, dt, scheme, desc)


def _guard(y: np.ndarray, t: float, desc: str):
    bad = ~np.isfinite(y)
    if bad.any() or np.max(np.abs(y)) > BLOWUP_LIMIT:
        raise FloatingPointError(
            f"blow-up detected at t={t:.6g} in {desc or 'integration'}: "
            f"max |value| = {np.max(np.abs(y[np.isfinite(y)])) if (~bad).any() else 'nan'}"
        )


def integrate_transport(table: CoeffTable, K: int, t_end: float, dt: float,
                        sign: SignConvention = PLUS,
                        scheme: str = "rk4") -> GammaTrajectory:
    """Transport run with indicator initial data (only beta_0 = 1)."""
    gen = build_transport_generator(table, K, sign)
    return integrate(gen, initial_indicator_state(K), t_end, dt, scheme)


def integrate_M_system(table: CoeffTable, K: int, t_end: float, dt: float,
                       sign: SignConvention = PLUS,
                       scheme: str = "rk4") -> GammaTrajectory:
    """Weighted-system run with indicator initial data."""
    gen = build_weighted_generator(table, K, sign)
    return integrate(gen, initial_indicator_state(K), t_end, dt, scheme)


def simplified_M_generator(K: int) -> GeneratorFamily:
    """Leading-order model of the weighted system with the tail dropped:

        d alpha_k/dt = beta_{k-1}/(pi k) - t (alpha_{k-1}+beta_{k-1})/(pi k)
        d beta_k /dt = t beta_{k-1}/(pi k)

    in the log-power basis (coefficients of log|x/(x-1)|^k).  Closed form of
    the beta family: beta_k(t) = (t^2/(2 pi))^k / (k!)^2.
    """
    dim = 2 * (K + 1)

    def matrix_fn(t: float) -> np.ndarray:
        mat = np.zeros((dim, dim))
        for k in range(1, K + 1):
            w = 1.0 / (math.pi * k)
            mat[k, K + 1 + k - 1] += w              # beta_{k-1} -> alpha_k
            mat[k, k - 1] += -t * w                 # alpha_{k-1} -> alpha_k
            mat[k, K + 1 + k - 1] += -t * w         # beta_{k-1} -> alpha_k
            mat[K + 1 + k, K + 1 + k - 1] += t * w  # beta_{k-1} -> beta_k
        return mat

    return _family_from_matrix_fn(K, matrix_fn, "simplified weighted model")


def measure_tail_constant(table: CoeffTable) -> tuple[float, tuple[int, int]]:
    """Empirical C = max |b[j][k] + c[j][k]| / j^(j-k) over the table."""
    best = 0.0
    arg = (1, 0)
    for j in range(1, table.max_power + 1):
        row_b, row_c = table.row(j)
        for k in range(j):
            d = abs(float(row_b[k] + row_c[k]))
            ratio = d / float(j ** (j - k))
            if ratio > best:
                best = ratio
                arg = (j, k)
    return best, arg


def delta_from_constant(c_emp: float) -> float:
    """Bootstrap horizon 1/(20*sqrt(C))."""
    if c_emp <= 0:
        raise ValueError("tail constant must be positive")
    return 1.0 / (20.0 * math.sqrt(c_emp))


def _log_reference(k: int, t: float) -> float:
    """log of t^k/(k!)^2, -inf at t = 0 for k >= 1."""
    if t <= 0.0:
        return -math.inf if k >= 1 else 0.0
    return k * math.log(t) - 2.0 * math.lgamma(k + 1)


@dataclass
class BandEntry:
    k: int
    t: float
    value: float
    log_reference: float
    ratio: float
    ok: bool


@dataclass
class BootstrapReport:
    """Per-(k, t) comparison of gamma_k against the band

        c_low * t^k/(k!)^2  <=  gamma_k(t)  <=  c_high * t^k/(k!)^2

    computed in log space.  passed is the conjunction over all entries."""

    c_low: float
    c_high: float
    delta: float
    entries: list[BandEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.ok for e in self.entries)

    def failures(self) -> list[BandEntry]:
        return [e for e in self.entries if not e.ok]

    def worst_low(self) -> float:
        ratios = [e.ratio for e in self.entries if math.isfinite(e.ratio)]
        return min(ratios) if ratios else math.nan

    def worst_high(self) -> float:
        ratios = [e.ratio for e in self.entries if math.isfinite(e.ratio)]
        return max(ratios) if ratios else math.nan


def check_gamma_lower_bound(traj: GammaTrajectory, c: float, delta: float,
                            k_max: int | None = None,
                            c_high: float = 1.0,
                            t_min: float = 0.0,
                            stride: int = 1) -> BootstrapReport:
    """Check the two-sided band on gamma = alpha + beta over t in (0, delta]."""
    if traj.times[-1] < delta - 1e-12:
        raise ValueError(
            f"trajectory covers [0, {traj.times[-1]:.6g}] < delta = {delta:.6g}"
        )
    k_max = traj.K if k_max is None else k_max
    report = BootstrapReport(c, c_high, delta)
    gamma = traj.gamma()
    log_c = math.log(c)
    log_ch = math.log(c_high)
    for m in range(0, traj.times.shape[0], stride):
        t = float(traj.times[m])
        if t <= t_min or t > delta + 1e-12:
            continue
        for k in range(k_max + 1):
            val = float(gamma[m, k])
            ref = _log_reference(k, t)
            if val <= 0.0:
                ratio = 0.0 if val == 0.0 else -math.inf
                ok = False
            else:
                log_ratio = math.log(val) - ref
                ratio = math.exp(log_ratio)
                ok = (log_c - 1e-12 <= log_ratio <= log_ch + 1e-12)
            report.entries.append(BandEntry(k, t, val, ref, ratio, ok))
    return report


def check_beta_band(traj: GammaTrajectory, c_low: float, c_high: float,
                    delta: float, k_max: int,
                    t_min: float = 0.0, stride: int = 1) -> BootstrapReport:
    """Band check for the weighted system's indicator-weighted coefficients.

    The trajectory evolves coefficients of P^k = ((1/pi) log|x/(x-1)|)^k;
    the band references (t^2/(2 pi))^k/(k!)^2 live in the log-power basis,
    so beta_k is rescaled by pi^{-k} before comparison.
    """
    report = BootstrapReport(c_low, c_high, delta)
    beta = traj.beta()
    log_cl, log_ch = math.log(c_low), math.log(c_high)
    for m in range(0, traj.times.shape[0], stride):
        t = float(traj.times[m])
        if t <= t_min or t > delta + 1e-12:
            continue
        for k in range(k_max + 1):
            val = float(beta[m, k]) / math.pi ** k
            if t <= 0.0:
                ref = 0.0 if k == 0 else -math.inf
            else:
                ref = k * (2.0 * math.log(t) - math.log(2.0 * math.pi)) \
                    - 2.0 * math.lgamma(k + 1)
            if val <= 0.0:
                ratio = 0.0 if val == 0.0 else -abs(val) / math.exp(ref)
                ok = False
            else:
                log_ratio = math.log(val) - ref
                ratio = math.exp(log_ratio)
                ok = (log_cl - 1e-12 <= log_ratio <= log_ch + 1e-12)
            report.entries.append(BandEntry(k, t, val, ref, ratio, ok))
    return report


@dataclass
class TailSummabilityReport:
    """Numerical profile of a_k = k^k/(k!)^2 tail sums.

    ratio_to_previous[k] = a_{k+1}/a_k; tail_ratio[k] = (sum of the next 200
    terms) / a_k; halving_from is the smallest k with a_{k+1} <= a_k/2."""

    ratio_to_previous: dict[int, float]
    tail_ratio: dict[int, float]
    halving_from: int | None


def check_tail_summability(k_max: int = 100, terms: int = 200) -> TailSummabilityReport:
    def log_a(k: int) -> float:
        return k * math.log(k) - 2.0 * math.lgamma(k + 1)

    ratios = {}
    tails = {}
    halving = None
    for k in range(1, k_max + 1):
        la = log_a(k)
        ratios[k] = math.exp(log_a(k + 1) - la)
        if halving is None and ratios[k] <= 0.5:
            halving = k
        logs = np.array([log_a(j) for j in range(k + 1, k + 1 + terms)])
        m = logs.max()
        tails[k] = float(math.exp(m - la) * np.exp(logs - m).sum())
    return TailSummabilityReport(ratios, tails, halving)


@dataclass
class TruncationConvergenceReport:
    K_list: list[int]
    diffs: list[float]  # successive max differences on shared low modes

    @property
    def monotone(self) -> bool:
        return all(b <= a for a, b in zip(self.diffs, self.diffs[1:]))


def truncation_convergence(builder, K_list, t_end: float, dt: float,
                           scheme: str = "rk4") -> TruncationConvergenceReport:
    """Integrate at each K with identical dt and compare successive runs on
    modes k <= min(K)/2 over the whole time range."""
    K_list = list(K_list)
    k_shared = min(K_list) // 2
    runs = []
    for K in K_list:
        gen = builder(K)
        init = initial_indicator_state(K)
        runs.append(integrate(gen, init, t_end, dt, scheme))
    diffs = []
    for a, b in zip(runs, runs[1:]):
        ga = a.gamma()[:, : k_shared + 1]
        gb = b.gamma()[:, : k_shared + 1]
        diffs.append(float(np.max(np.abs(ga - gb))))
    return TruncationConvergenceReport(K_list, diffs)


def gamma_csv_rows(traj: GammaTrajectory, stride: int = 1):
    """CSV rows (t, k, gamma_k, reference, log10_gamma_k, log10_reference)."""
    gamma = traj.gamma()
    for m in range(0, traj.times.shape[0], stride):
        t = float(traj.times[m])
        for k in range(traj.K + 1):
            val = float(gamma[m, k])
            ref = _log_reference(k, t)
            log10_val = math.log10(abs(val)) if val != 0 else -math.inf
            yield (
                repr(t), str(k), repr(val),
                repr(math.exp(ref)) if ref > -700 else "0.0",
                repr(log10_val) if math.isfinite(log10_val) else "-inf",
                repr(ref / math.log(10)) if math.isfinite(ref) else "-inf",
            )


def msystem_csv_rows(traj: GammaTrajectory, stride: int = 1):
    """CSV rows (t, k, alpha_k, beta_k, beta_reference) in the log-power basis."""
    alpha = traj.alpha()
    beta = traj.beta()
    for m in range(0, traj.times.shape[0], stride):
        t = float(traj.times[m])
        for k in range(traj.K + 1):
            scale = math.pi ** k
            if t > 0:
                ref = math.exp(k * (2 * math.log(t) - math.log(2 * math.pi))
                               - 2 * math.lgamma(k + 1))
            else:
                ref = 1.0 if k == 0 else 0.0
            yield (
                repr(t), str(k),
                repr(float(alpha[m, k]) / scale),
                repr(float(beta[m, k]) / scale),
                repr(ref),
            )
