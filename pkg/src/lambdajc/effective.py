"""Drive-renormalized model parameters and their validity audit.

Moving to the frame of the sinusoidal drive turns the static couplings into
Bessel-weighted sideband families.  Picking the slowest counter-rotating
sideband of each mode (integer orders n0, m0) and absorbing the residual
phases into redefined frequencies yields an effective static model:

    detunings      delta1 = 2 omega1 + omega2 - Omega1
                   delta2 = 2 omega2 + omega1 - Omega2
    sidebands      D_n = 2 omega1 + omega2 + Omega1 + n * omega_D   (mode 1)
                   D_m = 2 omega2 + omega1 + Omega2 + m * omega_D   (mode 2)
                   n0, m0 = integer argmin of |D_n|, |D_m|
    frequencies    Omega1_eff = (D_{n0} - delta1) / 2
                   Omega2_eff = (D_{m0} - delta2) / 2
                   omega1_eff = [(2 delta1 - delta2) + (2 D_{n0} - D_{m0})] / 6
                   omega2_eff = [(2 delta2 - delta1) + (2 D_{m0} - D_{n0})] / 6
    couplings      gr1 = g1 J_0(theta),   gr2 = g2 J_0(2 theta)
                   gc1 = g1 J_{n0}(theta), gc2 = g2 J_{m0}(2 theta)

D_{n0}, D_{m0} are stored *signed*: the frequency formulas consume the
signed minimizer, which keeps Omega_eff linear in omega_D across a whole
sideband valley.  A consequence worth knowing: the effective frequencies
can come out negative (e.g. Omega1_eff = -0.01 for the resonant defaults at
omega_D = 0.18), which the phase-diagram engine reports via a window-capped
flag rather than hiding.

The frame change is bookkeeping-exact: delta1 + Omega1_eff = 2 omega1_eff +
omega2_eff and D_{n0} - Omega1_eff = 2 omega1_eff + omega2_eff (same for
mode 2), identities the test suite checks on random draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .params import DriveParams, SystemParams
from .specfun import bessel_j, bessel_j_any

SIDEBAND_SEARCH_LIMIT = 10**6

#: "Much greater" threshold for the fast-oscillation hierarchy: a scale is
#: considered safely below omega_D when the ratio stays under 0.4 (the
#: published operating points themselves run at ratios up to ~0.36).
HIERARCHY_RATIO_MAX = 0.4

#: Counter-rotating sidebands are negligible while |gc/D| stays below 1e-2.
RWA_RATIO_MAX = 0.01


@dataclass(frozen=True)
class SidebandInfo:
    """Resolved sideband orders and the signed minimized phases."""

    n0: int
    m0: int
    Delta_n0: float
    Delta_m0: float
    delta1: float
    delta2: float


@dataclass(frozen=True)
class EffectiveParams:
    Omega1_eff: float
    Omega2_eff: float
    omega1_eff: float
    omega2_eff: float
    gr1: float
    gr2: float
    gc1: float
    gc2: float


@dataclass(frozen=True)
class ValidityReport:
    """Eight dimensionless ratios plus the two derived verdicts.

    hierarchy_ok: every scale the drive must dominate (detunings, minimized
    sideband phases, both couplings) stays below HIERARCHY_RATIO_MAX of
    omega_D.  rwa_ok: both counter-rotating sideband couplings stay below
    RWA_RATIO_MAX of their oscillation frequency.
    """

    ratios: dict[str, float]
    hierarchy_ok: bool
    rwa_ok: bool


def detunings(sys: SystemParams) -> tuple[float, float]:
    """Cavity detunings of the two transition/mode pairs."""
    delta1 = 2.0 * sys.omega1 + sys.omega2 - sys.Omega1
    delta2 = 2.0 * sys.omega2 + sys.omega1 - sys.Omega2
    return delta1, delta2


def _argmin_order(base: float, omega_d: float) -> tuple[int, float]:
    """Integer n in [-LIMIT, LIMIT] minimizing |base + n * omega_d|.

    Exact ties are broken toward the more negative integer so sweeps are
    deterministic.
    """
    target = -base / omega_d
    if target <= -SIDEBAND_SEARCH_LIMIT:
        n = -SIDEBAND_SEARCH_LIMIT
        return n, base + n * omega_d
    if target >= SIDEBAND_SEARCH_LIMIT:
        n = SIDEBAND_SEARCH_LIMIT
        return n, base + n * omega_d
    lo = int(math.floor(target))
    hi = int(math.ceil(target))
    v_lo = base + lo * omega_d
    v_hi = base + hi * omega_d
    if abs(v_lo) < abs(v_hi):
        return lo, v_lo
    if abs(v_hi) < abs(v_lo):
        return hi, v_hi
    return min(lo, hi), (v_lo if lo <= hi else v_hi)


def find_sidebands(sys: SystemParams, drive: DriveParams) -> SidebandInfo:
    """Resolve the dominant counter-rotating sideband order of each mode."""
    if drive.frequency <= 0:
        raise ValueError(f"drive frequency > 0 required, got {drive.frequency}")
    delta1, delta2 = detunings(sys)
    base1 = 2.0 * sys.omega1 + sys.omega2 + sys.Omega1
    base2 = 2.0 * sys.omega2 + sys.omega1 + sys.Omega2
    n0, dn0 = _argmin_order(base1, drive.frequency)
    m0, dm0 = _argmin_order(base2, drive.frequency)
    return SidebandInfo(n0=n0, m0=m0, Delta_n0=dn0, Delta_m0=dm0,
                        delta1=delta1, delta2=delta2)


def effective_parameters(sys: SystemParams, drive: DriveParams,
                         sb: SidebandInfo) -> EffectiveParams:
    """Effective frequencies and couplings for the resolved sidebands."""
    theta = drive.theta
    d1, d2 = sb.delta1, sb.delta2
    dn, dm = sb.Delta_n0, sb.Delta_m0
    return EffectiveParams(
        Omega1_eff=(dn - d1) / 2.0,
        Omega2_eff=(dm - d2) / 2.0,
        omega1_eff=((2.0 * d1 - d2) + (2.0 * dn - dm)) / 6.0,
        omega2_eff=((2.0 * d2 - d1) + (2.0 * dm - dn)) / 6.0,
        gr1=sys.g1 * bessel_j(0, theta),
        gr2=sys.g2 * bessel_j(0, 2.0 * theta),
        gc1=sys.g1 * bessel_j_any(sb.n0, theta),
        gc2=sys.g2 * bessel_j_any(sb.m0, 2.0 * theta),
    )


def effective_for_drive(sys: SystemParams, drive: DriveParams) -> tuple[SidebandInfo, EffectiveParams]:
    """Convenience: sidebands and effective parameters in one call."""
    sb = find_sidebands(sys, drive)
    return sb, effective_parameters(sys, drive, sb)


@dataclass(frozen=True)
class ZeroCrossing:
    """Drive frequency at which one effective cavity frequency vanishes."""

    mode: int
    order: int
    omega_d: float


def omega_zero_frequencies(sys: SystemParams,
                           order_range: tuple[int, int]) -> list[ZeroCrossing]:
    """Drive frequencies where Omega1_eff (mode 1) or Omega2_eff (mode 2)
    crosses zero, one candidate per sideband order in the closed interval
    order_range.

    Only positive frequencies are reported.  Order 0 never produces a zero
    and is rejected (the formula divides by the order).  The formulas hold
    in the zero-detuning regime where the sideband-valley analysis applies.
    """
    lo, hi = int(order_range[0]), int(order_range[1])
    if lo > hi:
        raise ValueError(f"empty order range {order_range}")
    if lo <= 0 <= hi:
        raise ValueError("order range must exclude 0 (zero order has no zero crossing)")
    out: list[ZeroCrossing] = []
    base1 = 2.0 * sys.omega1 + sys.omega2
    base2 = 2.0 * sys.omega2 + sys.omega1
    for order in range(lo, hi + 1):
        wd1 = -2.0 * base1 / order
        if wd1 > 0:
            out.append(ZeroCrossing(mode=1, order=order, omega_d=wd1))
        wd2 = -2.0 * base2 / order
        if wd2 > 0:
            out.append(ZeroCrossing(mode=2, order=order, omega_d=wd2))
    return out


def validity_report(sys: SystemParams, drive: DriveParams, sb: SidebandInfo,
                    eff: EffectiveParams,
                    hierarchy_max: float = HIERARCHY_RATIO_MAX,
                    rwa_max: float = RWA_RATIO_MAX) -> ValidityReport:
    """Audit the two approximation layers behind the effective model."""
    wd = drive.frequency
    ratios = {
        "delta1/omega_D": abs(sb.delta1) / wd,
        "delta2/omega_D": abs(sb.delta2) / wd,
        "Delta_n0/omega_D": abs(sb.Delta_n0) / wd,
        "Delta_m0/omega_D": abs(sb.Delta_m0) / wd,
        "g1/omega_D": sys.g1 / wd,
        "g2/omega_D": sys.g2 / wd,
    }
    hierarchy_ok = all(r < hierarchy_max for r in ratios.values())
    # A vanishing sideband phase makes the counter-rotating term secular:
    # report the ratio as infinite and fail the audit outright.
    gc_ratios = []
    for gc, delta in ((eff.gc1, sb.Delta_n0), (eff.gc2, sb.Delta_m0)):
        gc_ratios.append(abs(gc / delta) if delta != 0.0 else math.inf)
    ratios["gc1/Delta_n0"] = gc_ratios[0]
    ratios["gc2/Delta_m0"] = gc_ratios[1]
    rwa_ok = gc_ratios[0] < rwa_max and gc_ratios[1] < rwa_max
    return ValidityReport(ratios=ratios, hierarchy_ok=hierarchy_ok, rwa_ok=rwa_ok)
