"""Parabolic Harnack ratios, oscillation decay, and Holder continuity.

The measured constant is a lower bound for the cylinder's true Harnack
constant: the supremum defining the inequality runs over the whole cone of
nonnegative caloric functions, and we only probe a finite family.  What
makes the number reportable is its stability in R, which the acceptance
suite checks by doubling the radius.

The oscillation machinery runs on the hatted field.  For the decay
inequality the constant must have seen the normalised forms of the field
on every nested sub-cylinder, so oscillation_profile folds those ratios
into the constant before testing; with that convention a violation would
signal an arithmetic bug, not a modelling choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError
from .balayage import CaloricField, Cylinder

_REL_SLACK = 1e-12


@dataclass
class RatioCase:
    ratio: float
    sup_minus: float
    inf_plus: float


@dataclass
class HarnackReport:
    R: int
    T: int
    family_size: int
    c_h: float
    delta_hat: float
    theta_hat: float
    unbounded_cases: int
    ratios: list[float]


def theta_from_ch(c_h: float) -> float:
    """Holder exponent log(2 C_H / (2 C_H - 1)) / log 2."""
    if c_h < 1.0:
        raise DomainError(f"Harnack constant must be >= 1, got {c_h}")
    return math.log(2.0 * c_h / (2.0 * c_h - 1.0)) / math.log(2.0)


def _window_sup_inf(uhat: np.ndarray, times: tuple[int, int],
                    cols: np.ndarray) -> tuple[float, float]:
    lo, hi = times
    block = uhat[lo:hi + 1][:, cols]
    return float(block.max()), float(block.min())


def phi_ratio(cylinder: Cylinder, fields: list[CaloricField]) -> HarnackReport:
    """max over the family of sup_{Q-} u-hat / inf_{Q+} u-hat.

    Members whose hatted field vanishes somewhere on Q+ cannot enter the
    maximum (the ratio is infinite); they are counted, not silently
    dropped.
    """
    cols = np.flatnonzero(cylinder.in_b0)
    ratios = []
    unbounded = 0
    for f in fields:
        uhat = f.hat()
        sup_m, _ = _window_sup_inf(uhat, cylinder.q_minus, cols)
        _, inf_p = _window_sup_inf(uhat, cylinder.q_plus, cols)
        if inf_p <= 0.0:
            unbounded += 1
            continue
        ratios.append(sup_m / inf_p)
    if not ratios:
        raise PreconditionError("every family member had vanishing inf on Q+")
    c_h = max(max(ratios), 1.0)
    return HarnackReport(R=cylinder.R, T=cylinder.T, family_size=len(fields),
                         c_h=c_h, delta_hat=1.0 / (2.0 * c_h),
                         theta_hat=theta_from_ch(c_h),
                         unbounded_cases=unbounded, ratios=ratios)


def stabilization_radius(c_h_by_radius: dict[int, float],
                         rel_window: float = 0.2) -> int | None:
    """Smallest R whose constant changes by < rel_window when R doubles.

    Observable surrogate for the almost-sure threshold radius beyond which
    the Harnack inequality holds at a fixed constant; None when no doubling
    pair in the measured profile settles down.
    """
    for r in sorted(c_h_by_radius):
        r2 = 2 * r
        if r2 in c_h_by_radius:
            if abs(c_h_by_radius[r2] - c_h_by_radius[r]) \
                    < rel_window * c_h_by_radius[r]:
                return r
    return None


# ---------------------------------------------------------------------------
# nested sub-cylinders (for oscillation decay and Holder continuity)


@dataclass
class NestedWindow:
    """One member Q(k) of the nested family anchored at the cylinder top.

    Q(k) spans clock times (t0 - tk, t0] and the ball of radius rk around
    the centre; its own early/late sub-windows live at quarter horizons.
    Q_plus(k) is Q(k+1) by construction.
    """

    k: int
    rk: float
    tk: int
    rows: tuple[int, int]          # hatted rows inside Q(k)
    cols: np.ndarray               # local ball column indices
    rows_minus: tuple[int, int]
    rows_plus: tuple[int, int]
    cols_half: np.ndarray


def nested_windows(cylinder: Cylinder, r0: float | None = None,
                   t0: int | None = None, r_min: float = 2.0,
                   k_max: int = 8) -> list[NestedWindow]:
    """The chain Q(1) > Q(2) > ... inside the cylinder, hat-compatible."""
    if r0 is None:
        r0 = float(cylinder.R)
    if t0 is None:
        t0 = cylinder.T
    dist_local = cylinder.dist[cylinder.b]
    out = []
    for k in range(1, k_max + 1):
        rk = r0 * 2.0 ** (-k)
        tk = int(math.floor(rk * rk))
        if rk < r_min or tk < 4:
            break
        cols = np.flatnonzero((dist_local >= 0) & (dist_local < math.ceil(rk)))
        cols_half = np.flatnonzero((dist_local >= 0)
                                   & (dist_local < math.ceil(rk / 2.0)))
        lo = t0 - tk + 1
        rows = (lo, t0 - 1)
        rows_minus = (t0 - tk + tk // 4, t0 - tk + tk // 2)
        tk1 = int(math.floor((rk / 2.0) ** 2))
        rows_plus = (t0 - tk1 + 1, t0 - 1)
        if cols.size == 0 or rows[0] > rows[1]:
            break
        out.append(NestedWindow(k=k, rk=rk, tk=tk, rows=rows, cols=cols,
                                rows_minus=rows_minus, rows_plus=rows_plus,
                                cols_half=cols_half))
    if len(out) < 2:
        raise DomainError("cylinder too small for a nested oscillation chain")
    return out


def oscillation(uhat: np.ndarray, rows: tuple[int, int],
                cols: np.ndarray) -> float:
    lo, hi = rows
    block = uhat[lo:hi + 1][:, cols]
    return float(block.max() - block.min())


@dataclass
class OscillationReport:
    oscillations: list[float]
    violations: int
    c_h_used: float
    delta_hat: float
    ratios_added: list[float]


def oscillation_profile(field: CaloricField, windows: list[NestedWindow],
                        c_h_base: float) -> OscillationReport:
    """Oscillation sequence over Q(k) and decay-inequality violations.

    Pass one: measure the Harnack ratios of the normalised forms of the
    hatted field (both v and 1 - v) on every Q(k), and fold them into the
    constant.  Pass two: with delta = 1/(2 C_H) for that enlarged constant,
    count violations of Osc(Q(k+1)) <= (1 - delta) Osc(Q(k)).
    """
    uhat = field.hat()
    oscs = [oscillation(uhat, wdw.rows, wdw.cols) for wdw in windows]

    # only windows with a successor enter the decay check, so only their
    # normalised forms need to feed the constant
    added: list[float] = []
    for wdw, osc in zip(windows[:-1], oscs[:-1]):
        if osc <= 0.0:
            continue
        lo, hi = wdw.rows
        block_min = float(uhat[lo:hi + 1][:, wdw.cols].min())
        for flip in (False, True):
            v = (uhat - block_min) / osc
            if flip:
                v = 1.0 - v
            sup_m, _ = _window_sup_inf(v, wdw.rows_minus, wdw.cols_half)
            _, inf_p = _window_sup_inf(v, wdw.rows_plus, wdw.cols_half)
            if inf_p > 0.0:
                added.append(sup_m / inf_p)
    c_h = max([c_h_base, 1.0] + added)
    delta = 1.0 / (2.0 * c_h)

    violations = 0
    for i in range(len(windows) - 1):
        bound = (1.0 - delta) * oscs[i]
        if oscs[i + 1] > bound + _REL_SLACK * max(1.0, abs(oscs[i])):
            violations += 1
    return OscillationReport(oscillations=oscs, violations=violations,
                             c_h_used=c_h, delta_hat=delta,
                             ratios_added=added)


# ---------------------------------------------------------------------------
# Holder continuity


@dataclass
class HolderReport:
    theta: float
    c_fit: float
    n_samples: int
    sup_qplus: float


def holder_check(field: CaloricField, c_h: float, s_hat: float = 1.0,
                 n_samples: int = 400, seed: int = 0) -> HolderReport:
    """Smallest admissible constant in the Holder bound for this field.

    Samples pairs x1, x2 in the half ball and clock times in
    [t0 - rho^2, t0 - 1] with rho = max(s_hat, d(x0, x1), d(x0, x2)),
    and maximises |u-hat(n1, x1) - u-hat(n2, x2)| over
    (rho / sqrt(t0))^theta * sup_{Q+} |u-hat|.
    """
    cyl = field.cylinder
    theta = theta_from_ch(c_h)
    uhat = field.hat()
    t0 = cyl.T
    dist_local = cyl.dist[cyl.b]
    half = np.flatnonzero((dist_local >= 0) & (dist_local < cyl.R / 2.0))
    qp_cols = np.flatnonzero(cyl.in_b0)
    sup_qp, inf_qp = _window_sup_inf(np.abs(uhat), cyl.q_plus, qp_cols)
    if sup_qp == 0.0:
        return HolderReport(theta=theta, c_fit=0.0, n_samples=0,
                            sup_qplus=0.0)
    rng = np.random.default_rng(seed)
    c_fit = 0.0
    used = 0
    for _ in range(n_samples):
        i1, i2 = rng.integers(0, half.size, size=2)
        x1, x2 = int(half[i1]), int(half[i2])
        rho = max(s_hat, float(dist_local[x1]), float(dist_local[x2]))
        lo = max(0, t0 - int(rho * rho))
        hi = t0 - 1
        if lo > hi:
            continue
        n1, n2 = rng.integers(lo, hi + 1, size=2)
        lhs = abs(uhat[n1, x1] - uhat[n2, x2])
        rhs = (rho / math.sqrt(t0)) ** theta * sup_qp
        if rhs > 0.0:
            c_fit = max(c_fit, lhs / rhs)
            used += 1
    return HolderReport(theta=theta, c_fit=c_fit, n_samples=used,
                        sup_qplus=sup_qp)
