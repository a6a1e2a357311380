"""Independent reference implementations used to pin expected values.

Everything here is deliberately brute force and shares no code with the
package: ascending power series for Bessel values, bisection for roots,
exhaustive integer scans for sideband minima, dense eigensolvers and dense
matrix exponentials for dynamics.
"""

import math

import numpy as np
import scipy.linalg


def bessel_series(n: int, x: float) -> float:
    """J_n(x) by the ascending power series (n >= 0)."""
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term
    k = 0
    while True:
        k += 1
        term *= -(half * half) / (k * (n + k))
        total += term
        if abs(term) <= 1e-22 * max(abs(total), 1e-300) and k >= 6:
            return total


def bessel_signed(n: int, x: float) -> float:
    sign = 1.0
    if n < 0:
        n = -n
        if n % 2:
            sign = -sign
    if x < 0:
        x = -x
        if n % 2:
            sign = -sign
    return sign * bessel_series(n, x)


def bisect_root(fn, lo: float, hi: float, tol: float = 1e-14) -> float:
    f_lo = fn(lo)
    assert f_lo * fn(hi) < 0, "bracket does not straddle a root"
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f_lo * fn(mid) <= 0:
            hi = mid
        else:
            lo, f_lo = mid, fn(mid)
    return 0.5 * (lo + hi)


def brute_sideband(base: float, omega_d: float, span: int = 2_000_000):
    """Exhaustive argmin of |base + n*omega_d| near the continuous optimum."""
    center = int(round(-base / omega_d))
    best_n, best_v = None, math.inf
    for n in range(center - 40, center + 41):
        v = base + n * omega_d
        if abs(v) < best_v or (abs(v) == best_v and n < best_n):
            best_n, best_v = n, abs(v)
    return best_n, base + best_n * omega_d


def brute_cutoff(z: float, eps: float, max_order: int = 64) -> int:
    vals = [abs(bessel_series(p, abs(z))) for p in range(max_order + 1)]
    above = [p for p, v in enumerate(vals) if v >= eps]
    return max(above) if above else 0


def resonant_block_ground(n: int, m: int, g1: float, g2: float,
                          omega1=0.5, omega2=0.25, Omega1=1.25, Omega2=1.0):
    """Closed form at zero detuning: common diagonal minus the coupling norm."""
    diag = omega1 + omega2 + Omega1 * n + Omega2 * (m - 1)
    return diag - math.sqrt(g1 * g1 * (n + 1) + g2 * g2 * m)


def dense_block_ground(sys, n: int, m: int) -> float:
    h11 = sys.omega1 + sys.omega2 + sys.Omega1 * n + sys.Omega2 * (m - 1)
    h22 = -sys.omega1 + sys.Omega1 * (n + 1) + sys.Omega2 * (m - 1)
    h33 = -sys.omega2 + sys.Omega1 * n + sys.Omega2 * m
    h12 = sys.g1 * math.sqrt(n + 1)
    h13 = sys.g2 * math.sqrt(m)
    mat = np.array([[h11, h12, h13], [h12, h22, 0.0], [h13, 0.0, h33]])
    return float(np.linalg.eigvalsh(mat)[0])


def expm_propagate(H: np.ndarray, psi0: np.ndarray, times) -> np.ndarray:
    """Dense matrix-exponential propagation for a constant Hamiltonian."""
    out = np.empty((len(times), psi0.size), dtype=complex)
    for i, t in enumerate(times):
        out[i] = scipy.linalg.expm(-1j * H * t) @ psi0
    return out
