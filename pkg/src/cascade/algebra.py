"""Exact rational algebra of the indicator/Hilbert cascade.

Write a for the indicator of [0, 1] (more generally any a with a^2 = lam*a)
and P = H(a) = (1/pi) log|x/(x-1)|.  The span of
{P^j, a*P^j : j >= 0} is closed under both multiplication by a and
application of H.  The closure of H on the products a*P^k is

    H(a P^k) = 1/(k+1) P^{k+1} + sum_{j=0}^{k-1} (b[k][j] + c[k][j] a) P^j

and the coefficient rows b, c are computed here by an exact rational
recursion: each row k is obtained from row k-1 by multiplying the k-1
identity by a, applying H, and reducing with the product rule
H(fg) = gH(f) + fH(g) + H(H(f)H(g)) together with H^2 = -1 and a^2 = lam*a.

Everything in this module is exact (fractions.Fraction); a float mode on
CascadeElement exists only for large numeric sweeps and is tagged so that
exact and floating coefficients are never silently mixed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .grid import GridFunction, hilbert_indicator

Scalar = Fraction | float


@dataclass(frozen=True)
class CoeffTable:
    """Triangular tables b[k][j], c[k][j], 1 <= k <= max_power, 0 <= j < k.

    b[k][j] multiplies the pure power P^j in the expansion of H(a P^k);
    c[k][j] multiplies the indicator-weighted power a P^j.  Entries are
    exact rationals.  lam is the scalar in a^2 = lam*a (1 for an indicator).
    """

    max_power: int
    b: tuple[tuple[Fraction, ...], ...]
    c: tuple[tuple[Fraction, ...], ...]
    lam: Fraction = Fraction(1)

    def row(self, k: int) -> tuple[Sequence[Fraction], Sequence[Fraction]]:
        if not 1 <= k <= self.max_power:
            raise ValueError(f"row {k} outside table range 1..{self.max_power}")
        return self.b[k - 1], self.c[k - 1]


def build_coeff_table(max_power: int, lam: Scalar = 1) -> CoeffTable:
    """Build the exact coefficient table up to the given power.

    Row 1 is H(a P) = 1/2 P^2 - (lam/2) a.  Row k follows from row k-1:
    multiply the row-(k-1) identity by a, apply H, expand the left side with
    the product rule, and substitute the already-known rows.  Collecting
    powers gives H(a P^k) = 1/(k+1) P^{k+1} + k/(k+1) * R with

        R = sum_n (b[k-1][n] + c[k-1][n] a) P^{n+1}
            - lam * a P^{k-1}
            - sum_n g_n/(n+1) * P^{n+1}
            - sum_n sum_{l<n} g_n (b[n][l] + c[n][l] a) P^l,

    where g_n = b[k-1][n] + lam*c[k-1][n] and the sums run over
    0 <= n <= k-3 resp. the row indices below.
    """
    if max_power < 1:
        raise ValueError(f"max_power must be >= 1, got {max_power}")
    lam = Fraction(lam)
    b_rows: list[tuple[Fraction, ...]] = [(Fraction(0),)]
    c_rows: list[tuple[Fraction, ...]] = [(-lam / 2,)]
    for k in range(2, max_power + 1):
        prev_b, prev_c = b_rows[k - 2], c_rows[k - 2]
        new_b = [Fraction(0)] * k
        new_c = [Fraction(0)] * k
        new_c[k - 1] -= lam
        for n in range(k - 1):
            g = prev_b[n] + lam * prev_c[n]
            new_b[n + 1] += prev_b[n] - g / (n + 1)
            new_c[n + 1] += prev_c[n]
            row_b, row_c = b_rows[n - 1] if n >= 1 else (), c_rows[n - 1] if n >= 1 else ()
            for l in range(n):
                new_b[l] -= g * row_b[l]
                new_c[l] -= g * row_c[l]
        scale = Fraction(k, k + 1)
        b_rows.append(tuple(v * scale for v in new_b))
        c_rows.append(tuple(v * scale for v in new_c))
    return CoeffTable(max_power, tuple(b_rows), tuple(c_rows), lam)


@dataclass(frozen=True)
class CascadeElement:
    """Finite combination sum_j (alpha[j] + beta[j]*a) P^j.

    Coefficient vectors always have equal length degree+1.  exact=True means
    Fraction coefficients, exact=False means floats; operations require both
    operands in the same mode.  tail_dropped records the absolute coefficient
    mass removed by the most recent truncation.
    """

    alpha: tuple[Scalar, ...]
    beta: tuple[Scalar, ...]
    exact: bool = True
    tail_dropped: Scalar = 0

    def __post_init__(self):
        if len(self.alpha) != len(self.beta):
            raise ValueError("alpha and beta must have equal length")
        if len(self.alpha) == 0:
            raise ValueError("element needs at least the degree-0 coefficient")
        want = Fraction if self.exact else float
        for v in itertools.chain(self.alpha, self.beta):
            if not isinstance(v, want):
                raise TypeError(
                    f"{'exact' if self.exact else 'float'} element holds {type(v).__name__}"
                )

    @property
    def degree(self) -> int:
        return len(self.alpha) - 1

    @classmethod
    def zero(cls, degree: int = 0, exact: bool = True) -> "CascadeElement":
        z = Fraction(0) if exact else 0.0
        return cls((z,) * (degree + 1), (z,) * (degree + 1), exact)

    @classmethod
    def from_coeffs(cls, alpha: Sequence[Scalar], beta: Sequence[Scalar],
                    exact: bool = True) -> "CascadeElement":
        conv = Fraction if exact else float
        return cls(tuple(conv(v) for v in alpha), tuple(conv(v) for v in beta), exact)

    @classmethod
    def indicator(cls, exact: bool = True) -> "CascadeElement":
        return cls.from_coeffs([0], [1], exact)

    @classmethod
    def power(cls, j: int, exact: bool = True) -> "CascadeElement":
        alpha = [0] * (j + 1)
        alpha[j] = 1
        return cls.from_coeffs(alpha, [0] * (j + 1), exact)

    def to_float(self) -> "CascadeElement":
        if not self.exact:
            return self
        return CascadeElement(tuple(float(v) for v in self.alpha),
                              tuple(float(v) for v in self.beta), False)

    def _check_mode(self, other: "CascadeElement"):
        if self.exact != other.exact:
            raise TypeError("cannot mix exact and float elements")

    def add(self, other: "CascadeElement") -> "CascadeElement":
        self._check_mode(other)
        n = max(len(self.alpha), len(other.alpha))
        z = Fraction(0) if self.exact else 0.0
        a = [z] * n
        b = [z] * n
        for j, (va, vb) in enumerate(zip(self.alpha, self.beta)):
            a[j] += va
            b[j] += vb
        for j, (va, vb) in enumerate(zip(other.alpha, other.beta)):
            a[j] += va
            b[j] += vb
        return CascadeElement(tuple(a), tuple(b), self.exact)

    def scale(self, factor: Scalar) -> "CascadeElement":
        f = Fraction(factor) if self.exact else float(factor)
        return CascadeElement(tuple(f * v for v in self.alpha),
                              tuple(f * v for v in self.beta), self.exact)

    def shift_power(self, by: int = 1) -> "CascadeElement":
        """Multiply by P^by, shifting all coefficients up."""
        z = Fraction(0) if self.exact else 0.0
        pad = (z,) * by
        return CascadeElement(pad + self.alpha, pad + self.beta, self.exact)

    def truncate(self, degree: int) -> "CascadeElement":
        """Drop powers above the given degree, recording the dropped mass."""
        if degree >= self.degree:
            return self
        dropped = sum(abs(v) for v in self.alpha[degree + 1:]) \
            + sum(abs(v) for v in self.beta[degree + 1:])
        return CascadeElement(self.alpha[:degree + 1], self.beta[:degree + 1],
                              self.exact, dropped)

    def trimmed(self) -> "CascadeElement":
        """Canonical form with trailing zero coefficients removed."""
        top = 0
        for j in range(self.degree, -1, -1):
            if self.alpha[j] != 0 or self.beta[j] != 0:
                top = j
                break
        return CascadeElement(self.alpha[:top + 1], self.beta[:top + 1], self.exact)


def mult_by_indicator(e: CascadeElement, lam: Scalar = 1) -> CascadeElement:
    """Multiply by a: (alpha + beta*a) P^j  ->  (alpha + lam*beta) a P^j."""
    lam = Fraction(lam) if e.exact else float(lam)
    z = Fraction(0) if e.exact else 0.0
    beta = tuple(va + lam * vb for va, vb in zip(e.alpha, e.beta))
    return CascadeElement((z,) * len(beta), beta, e.exact)


def _h_of_a_power(j: int, table: CoeffTable) -> CascadeElement:
    """Exact expansion of H(a P^j); j = 0 gives H(a) = P."""
    if j == 0:
        return CascadeElement.from_coeffs([0, 1], [0, 0])
    row_b, row_c = table.row(j)
    alpha = list(row_b) + [Fraction(0), Fraction(1, j + 1)]
    beta = list(row_c) + [Fraction(0), Fraction(0)]
    return CascadeElement(tuple(alpha), tuple(beta), True)


def apply_H_mult_a(e: CascadeElement, table: CoeffTable,
                   j_out: int | None = None) -> CascadeElement:
    """Expansion of H(a*e); needs table rows up to the degree of e."""
    if e.degree > table.max_power:
        raise ValueError(
            f"element degree {e.degree} exceeds table max_power {table.max_power}"
        )
    exact = e.exact
    out = CascadeElement.zero(0, True)
    for j, (va, vb) in enumerate(zip(e.alpha, e.beta)):
        g = (Fraction(va) if not isinstance(va, Fraction) else va) \
            + table.lam * (Fraction(vb) if not isinstance(vb, Fraction) else vb)
        if g == 0:
            continue
        out = out.add(_h_of_a_power(j, table).scale(g))
    if not exact:
        out = out.to_float()
    if j_out is not None:
        out = out.truncate(j_out)
    return out


def expand_H_power(j: int, table: CoeffTable) -> CascadeElement:
    """Exact expansion of H(P^j) in the span basis.

    Base case H(P) = -a; for larger powers the product rule with f = P and
    g = P^{j-1} gives H(P^j) = -a P^{j-1} + P*H(P^{j-1}) + H(-a*H(P^{j-1})),
    where the trailing term reduces to table rows since H(P^{j-1}) is
    already in the span.
    """
    if j < 1:
        raise ValueError(f"power must be >= 1, got {j}")
    if j > table.max_power + 1:
        raise ValueError(
            f"power {j} needs table rows up to {j - 1}, have {table.max_power}"
        )
    cur = CascadeElement.from_coeffs([0], [-1])  # H(P) = -a
    for m in range(2, j + 1):
        prev = cur
        term1 = mult_by_indicator(CascadeElement.power(m - 1), table.lam).scale(-1)
        term2 = prev.shift_power(1)
        term3 = apply_H_mult_a(mult_by_indicator(prev, table.lam).scale(-1), table)
        cur = term1.add(term2).add(term3)
    return cur.trimmed()


def apply_H(e: CascadeElement, table: CoeffTable,
            j_out: int | None = None) -> CascadeElement:
    """Full H action on the span: alpha parts via expand_H_power, beta parts
    via the table rows.  The degree-0 pure term maps to zero (H annihilates
    constants in the principal-value convention)."""
    if e.degree > table.max_power:
        raise ValueError(
            f"element degree {e.degree} exceeds table max_power {table.max_power}"
        )
    out = CascadeElement.zero(0, True)
    for j, (va, vb) in enumerate(zip(e.alpha, e.beta)):
        va = va if isinstance(va, Fraction) else Fraction(va)
        vb = vb if isinstance(vb, Fraction) else Fraction(vb)
        if va != 0 and j >= 1:
            out = out.add(expand_H_power(j, table).scale(va))
        if vb != 0:
            out = out.add(_h_of_a_power(j, table).scale(vb))
    if not e.exact:
        out = out.to_float()
    if j_out is not None:
        out = out.truncate(j_out)
    return out


def evaluate(e: CascadeElement, x: float) -> float:
    """Point value sum_j (alpha[j] + beta[j]*chi(x)) * ((1/pi)log|x/(x-1)|)^j."""
    u = hilbert_indicator(x)  # raises on x in {0, 1}
    chi = 1.0 if 0.0 < x < 1.0 else 0.0
    acc = 0.0
    for va, vb in zip(reversed(e.alpha), reversed(e.beta)):
        acc = acc * u + (float(va) + float(vb) * chi)
    return acc


def evaluate_on_grid(e: CascadeElement, f: GridFunction) -> np.ndarray:
    """Vectorized evaluation at the nodes of a grid (Horner in the basis)."""
    x = f.nodes()
    u = np.log(np.abs(x / (x - 1.0))) / math.pi
    chi = ((x > 0.0) & (x < 1.0)).astype(float)
    acc = np.zeros_like(x)
    for va, vb in zip(reversed(e.alpha), reversed(e.beta)):
        acc = acc * u + (float(va) + float(vb) * chi)
    return acc


@dataclass
class CoeffPropertyReport:
    """Outcome of the exact structural checks on a coefficient table."""

    max_power: int
    parity_ok: bool
    bound_ok: bool
    constant_pure_ok: bool
    violations: list[str] = field(default_factory=list)
    sign_counts: dict[str, int] = field(default_factory=dict)
    max_bound_ratio: dict[int, float] = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return self.parity_ok and self.bound_ok


def verify_coeff_properties(table: CoeffTable) -> CoeffPropertyReport:
    """Exact checks: parity zeros, |entry| <= k^(k-j), and the empirical
    sign pattern.  Also records whether every pure constant coefficient
    b[k][0] vanishes (the structural fact that keeps the span free of
    constants) and, per row, the largest ratio |entry| / k^(k-j)."""
    report = CoeffPropertyReport(table.max_power, True, True, True)
    pos = neg = zero = 0
    for k in range(1, table.max_power + 1):
        row_b, row_c = table.row(k)
        worst = 0.0
        for j in range(k):
            bound = k ** (k - j)
            for name, v in (("b", row_b[j]), ("c", row_c[j])):
                if (k - j) % 2 == 0 and v != 0:
                    report.parity_ok = False
                    report.violations.append(f"parity: {name}[{k}][{j}] = {v} != 0")
                if abs(v) > bound:
                    report.bound_ok = False
                    report.violations.append(
                        f"bound: |{name}[{k}][{j}]| = {abs(v)} > {k}^{k - j}"
                    )
                if v > 0:
                    pos += 1
                elif v < 0:
                    neg += 1
                else:
                    zero += 1
                ratio = float(abs(v)) / float(bound) if v != 0 else 0.0
                worst = max(worst, ratio)
        if row_b[0] != 0:
            report.constant_pure_ok = False
            report.violations.append(f"constant: b[{k}][0] = {row_b[0]} != 0")
        report.max_bound_ratio[k] = worst
    report.sign_counts = {"positive": pos, "negative": neg, "zero": zero}
    return report


def coeff_table_rows(table: CoeffTable):
    """Yield CSV rows (k, j, b_num, b_den, c_num, c_den, bound_k_pow) with
    exact integers rendered as decimal strings."""
    for k in range(1, table.max_power + 1):
        row_b, row_c = table.row(k)
        for j in range(k):
            yield (
                str(k), str(j),
                str(row_b[j].numerator), str(row_b[j].denominator),
                str(row_c[j].numerator), str(row_c[j].denominator),
                str(k ** (k - j)),
            )
