"""Dressed-state block spectrum and ground-state phase diagrams.

The excitation-conserving model couples each product state to at most two
others, so the full Hamiltonian splits into 3x3 blocks labelled by a photon
pair (n_ph, m_ph).  In the ordered basis

    |upper,  n_ph,   m_ph-1>,  |lower1, n_ph+1, m_ph-1>,  |lower2, n_ph, m_ph>

the block reads

    H11 = omega1 + omega2 + Omega1*n_ph + Omega2*(m_ph - 1)
    H22 = -omega1 + Omega1*(n_ph + 1) + Omega2*(m_ph - 1)
    H33 = -omega2 + Omega1*n_ph + Omega2*m_ph
    H12 = g1*sqrt(n_ph + 1)     H13 = g2*sqrt(m_ph)     H23 = 0

with the identities H11 - H22 = delta1 and H11 - H33 = delta2.

m_ph = 0 blocks are evaluated verbatim from these formulas, including the
formally unphysical Omega2*(m-1) = -Omega2 offset and the two basis states
with photon index -1.  This convention is deliberate: it is the block
family whose level crossings put the first mode-1 transition at
g1/Omega1 = 1/(sqrt(2)-1) ~ 2.414, the first mode-2 transition at
g2/Omega2 = 1 (for g1 = 0), and the triple point near (2.414, 2.652) - the
critical topology the phase diagrams are built on.  The physical
one-dimensional edge sectors (lower2 with both modes empty, etc.) are
intentionally excluded from the ground search.

Phase taxonomy over the block label of the global ground state:
(0,0) normal; (n>0, 0) type y1; (0, m>0) type y2; (n>0, m>0) mixed.

The lowest eigenvalue of each block is computed by the closed-form
trigonometric solution of the symmetric 3x3 characteristic polynomial with
a Newton polish and an exact-diagonal fallback; grid sweeps evaluate
millions of blocks, so this is the hot path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .effective import (
    EffectiveParams,
    SidebandInfo,
    ValidityReport,
    effective_parameters,
    find_sidebands,
    validity_report,
)
from .params import DriveParams, SystemParams

STATIC_BLOCK_WINDOW = 8
DRIVEN_BLOCK_WINDOW = 5
BOUNDARY_RATIO_TOL = 1e-4

_TWO_PI_3 = 2.0 * np.pi / 3.0


class PhaseCategory(str, Enum):
    NORMAL = "normal"
    Y1 = "y1"
    Y2 = "y2"
    MIXED = "mixed"


def categorize(n_label: int, m_label: int) -> PhaseCategory:
    if n_label == 0 and m_label == 0:
        return PhaseCategory.NORMAL
    if m_label == 0:
        return PhaseCategory.Y1
    if n_label == 0:
        return PhaseCategory.Y2
    return PhaseCategory.MIXED


@dataclass(frozen=True)
class DressedBlock:
    n_ph: int
    m_ph: int
    matrix: np.ndarray


@dataclass(frozen=True)
class PhasePoint:
    label: tuple[int, int]
    category: PhaseCategory
    energy: float
    gap: float
    window_capped: bool = False

    @property
    def n_label(self) -> int:
        return self.label[0]

    @property
    def m_label(self) -> int:
        return self.label[1]


@dataclass(frozen=True)
class AxisSpec:
    """One sweep axis: a display name, the model field it drives, and the
    strictly increasing raw values it takes."""

    name: str
    parameter: str
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError(f"axis {self.name!r} must hold at least one value")
        if vals.size > 1 and not np.all(np.diff(vals) > 0):
            raise ValueError(f"axis {self.name!r} must be strictly increasing")
        object.__setattr__(self, "values", vals)


@dataclass
class PhaseGrid:
    axis1: AxisSpec
    axis2: AxisSpec
    block_window: int
    energy: np.ndarray
    n_label: np.ndarray
    m_label: np.ndarray
    gap: np.ndarray
    window_capped: np.ndarray
    rwa_ok: np.ndarray
    hierarchy_ok: np.ndarray
    deviations: list[str] = field(default_factory=list)

    def cell(self, i: int, j: int) -> PhasePoint:
        label = (int(self.n_label[i, j]), int(self.m_label[i, j]))
        return PhasePoint(
            label=label,
            category=categorize(*label),
            energy=float(self.energy[i, j]),
            gap=float(self.gap[i, j]),
            window_capped=bool(self.window_capped[i, j]),
        )


# ---------------------------------------------------------------------------
# block construction and the closed-form 3x3 ground energy


def _block_elements(omega1, omega2, Omega1, Omega2, g1, g2, n, m):
    """Vectorized block matrix elements; n, m may be arrays."""
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    h11 = omega1 + omega2 + Omega1 * n + Omega2 * (m - 1.0)
    h22 = -omega1 + Omega1 * (n + 1.0) + Omega2 * (m - 1.0)
    h33 = -omega2 + Omega1 * n + Omega2 * m
    h12 = g1 * np.sqrt(n + 1.0)
    h13 = g2 * np.sqrt(m)
    return h11, h22, h33, h12, h13


def block_matrix(sys: SystemParams, n_ph: int, m_ph: int) -> DressedBlock:
    """The 3x3 symmetric block for photon label (n_ph, m_ph)."""
    if n_ph < 0 or m_ph < 0:
        raise ValueError(f"photon labels must be non-negative, got ({n_ph}, {m_ph})")
    h11, h22, h33, h12, h13 = _block_elements(
        sys.omega1, sys.omega2, sys.Omega1, sys.Omega2, sys.g1, sys.g2, n_ph, m_ph)
    mat = np.array([
        [h11, h12, h13],
        [h12, h22, 0.0],
        [h13, 0.0, h33],
    ])
    return DressedBlock(n_ph=n_ph, m_ph=m_ph, matrix=mat)


def _lowest_eig_sym3(h11, h22, h33, h12, h13):
    """Smallest eigenvalue of [[h11,h12,h13],[h12,h22,0],[h13,0,h33]].

    Trigonometric closed form, then up to two guarded Newton steps on the
    characteristic polynomial.  Exactly diagonal inputs short-circuit to
    min of the diagonal.
    """
    h11 = np.asarray(h11, dtype=float)
    b = np.broadcast(h11, h22, h33, h12, h13)
    h11, h22, h33, h12, h13 = (np.broadcast_to(a, b.shape).astype(float)
                               for a in (h11, h22, h33, h12, h13))
    q = (h11 + h22 + h33) / 3.0
    a, bb, e = h11 - q, h22 - q, h33 - q
    p2 = a * a + bb * bb + e * e + 2.0 * (h12 * h12 + h13 * h13)
    diagonal = p2 <= 0.0
    p = np.sqrt(np.where(diagonal, 1.0, p2) / 6.0)
    det_b = (a * (bb * e) - h12 * (h12 * e) - h13 * (h13 * bb)) / (p * p * p)
    r = np.clip(det_b / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    lam = q + 2.0 * p * np.cos(phi + _TWO_PI_3)
    lam = np.where(diagonal, np.minimum(np.minimum(h11, h22), h33), lam)

    scale = np.maximum.reduce([np.abs(h11), np.abs(h22), np.abs(h33),
                               np.abs(h12), np.abs(h13), np.full(b.shape, 1e-300)])
    for _ in range(2):
        u, v, w = h11 - lam, h22 - lam, h33 - lam
        f = u * v * w - h12 * h12 * w - h13 * h13 * v
        df = -(v * w + u * w + u * v) + h12 * h12 + h13 * h13
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(np.abs(df) > 0, f / df, 0.0)
        # keep the polish local so it can never hop to another root
        step = np.where(np.abs(step) < 1e-3 * scale, step, 0.0)
        lam = lam - step
    return lam


def block_ground_energy(block: DressedBlock) -> float:
    """Lowest eigenvalue of one dressed block."""
    m = block.matrix
    return float(_lowest_eig_sym3(m[0, 0], m[1, 1], m[2, 2], m[0, 1], m[0, 2]))


def ground_occupations(block: DressedBlock) -> tuple[float, float]:
    """Mode occupations <n1>, <n2> of the block's ground eigenvector.

    Secondary diagnostic: phase labels are the block indices themselves,
    and this exposes how far the actual photon expectations sit from them
    (the three basis states carry n1 of n, n+1, n and n2 of m-1, m-1, m).
    """
    evals, vecs = np.linalg.eigh(block.matrix)
    weights = np.abs(vecs[:, 0]) ** 2
    n, m = block.n_ph, block.m_ph
    exp_n1 = weights[0] * n + weights[1] * (n + 1) + weights[2] * n
    exp_n2 = weights[0] * (m - 1) + weights[1] * (m - 1) + weights[2] * m
    return float(exp_n1), float(exp_n2)


def ground_energy_table(omega1: float, omega2: float, Omega1: float, Omega2: float,
                        g1: float, g2: float, block_window: int) -> np.ndarray:
    """Ground energies of every block with labels in [0, block_window]^2.

    Takes raw floats rather than SystemParams so the driven engine can feed
    effective parameters that violate the static positivity invariants
    (negative effective frequencies, sign-flipped couplings).  The block
    spectrum only depends on the couplings through their squares.
    """
    if block_window < 1:
        raise ValueError(f"block_window >= 1 required, got {block_window}")
    n, m = np.mgrid[0:block_window + 1, 0:block_window + 1]
    h11, h22, h33, h12, h13 = _block_elements(omega1, omega2, Omega1, Omega2, g1, g2, n, m)
    return _lowest_eig_sym3(h11, h22, h33, h12, h13)


def _search_table(table: np.ndarray, window: int, forced_cap: bool = False) -> PhasePoint:
    flat = table.ravel()
    k = int(np.argmin(flat))  # first minimum in C order = lexicographic tie-break
    n_lab, m_lab = divmod(k, window + 1)
    energy = float(flat[k])
    second = float(np.partition(flat, 1)[1])
    on_edge = n_lab == window or m_lab == window
    return PhasePoint(
        label=(n_lab, m_lab),
        category=categorize(n_lab, m_lab),
        energy=energy,
        gap=max(second - energy, 0.0),
        window_capped=forced_cap or on_edge,
    )


def ground_search(sys: SystemParams, block_window: int = STATIC_BLOCK_WINDOW) -> PhasePoint:
    """Global ground block over labels in [0, block_window]^2.

    Exact energy ties resolve to the lexicographically smallest label.  The
    window_capped flag reports an argmin sitting on the window edge, i.e. a
    window too small to trust.
    """
    table = ground_energy_table(sys.omega1, sys.omega2, sys.Omega1, sys.Omega2,
                                sys.g1, sys.g2, block_window)
    return _search_table(table, block_window)


def driven_phase_point(sys: SystemParams, drive: DriveParams,
                       block_window: int = DRIVEN_BLOCK_WINDOW,
                       ) -> tuple[PhasePoint, ValidityReport]:
    """Ground block of the drive-renormalized model.

    The effective frequencies and zeroth-sideband couplings replace the
    bare parameters verbatim - signs included.  A non-positive effective
    cavity frequency makes the block energies decrease without bound in
    that photon index, so the argmin lands on the window edge by
    construction; the window_capped flag records this rather than
    rejecting the point.
    """
    sb = find_sidebands(sys, drive)
    eff = effective_parameters(sys, drive, sb)
    report = validity_report(sys, drive, sb, eff)
    table = ground_energy_table(eff.omega1_eff, eff.omega2_eff,
                                eff.Omega1_eff, eff.Omega2_eff,
                                eff.gr1, eff.gr2, block_window)
    forced = eff.Omega1_eff <= 0.0 or eff.Omega2_eff <= 0.0
    return _search_table(table, block_window, forced_cap=forced), report


# ---------------------------------------------------------------------------
# grids


_STATIC_AXIS_FIELDS = ("g1", "g2", "Omega1", "Omega2", "omega1", "omega2")
_DRIVE_AXIS_FIELDS = ("A_D", "omega_D")


def _apply_axis(sys: SystemParams, drive: DriveParams | None,
                parameter: str, value: float):
    if parameter in _STATIC_AXIS_FIELDS:
        return sys.replace(**{parameter: value}), drive
    if parameter == "A_D":
        if drive is None:
            raise ValueError("axis maps A_D but no drive block is configured")
        return sys, DriveParams(amplitude=value, frequency=drive.frequency)
    if parameter == "omega_D":
        if drive is None:
            raise ValueError("axis maps omega_D but no drive block is configured")
        return sys, DriveParams(amplitude=drive.amplitude, frequency=value)
    raise ValueError(f"unknown sweep parameter {parameter!r}")


def compute_grid_row(sys_template: SystemParams, drive_template: DriveParams | None,
                     axis1: AxisSpec, axis2: AxisSpec, block_window: int,
                     i: int) -> dict[str, np.ndarray]:
    """All cells of one axis1 row, in axis2 order.

    Each cell is an independent pure computation; the result arrays do not
    depend on how rows are batched across workers.
    """
    n2 = axis2.values.size
    out = {
        "energy": np.empty(n2), "n_label": np.empty(n2, dtype=int),
        "m_label": np.empty(n2, dtype=int), "gap": np.empty(n2),
        "window_capped": np.zeros(n2, dtype=bool),
        "rwa_ok": np.ones(n2, dtype=bool),
        "hierarchy_ok": np.ones(n2, dtype=bool),
    }
    sys_i, drive_i = _apply_axis(sys_template, drive_template, axis1.parameter,
                                 float(axis1.values[i]))
    for j, vj in enumerate(axis2.values):
        sys_ij, drive_ij = _apply_axis(sys_i, drive_i, axis2.parameter, float(vj))
        if drive_template is None:
            point = ground_search(sys_ij, block_window)
        else:
            point, report = driven_phase_point(sys_ij, drive_ij, block_window)
            out["rwa_ok"][j] = report.rwa_ok
            out["hierarchy_ok"][j] = report.hierarchy_ok
        out["energy"][j] = point.energy
        out["n_label"][j] = point.n_label
        out["m_label"][j] = point.m_label
        out["gap"][j] = point.gap
        out["window_capped"][j] = point.window_capped
    return out


def _assemble_grid(axis1: AxisSpec, axis2: AxisSpec, block_window: int,
                   rows: list[dict[str, np.ndarray]]) -> PhaseGrid:
    stack = {k: np.stack([r[k] for r in rows]) for k in rows[0]}
    grid = PhaseGrid(axis1=axis1, axis2=axis2, block_window=block_window,
                     energy=stack["energy"], n_label=stack["n_label"],
                     m_label=stack["m_label"], gap=stack["gap"],
                     window_capped=stack["window_capped"],
                     rwa_ok=stack["rwa_ok"], hierarchy_ok=stack["hierarchy_ok"])
    capped = int(grid.window_capped.sum())
    if capped:
        grid.deviations.append(
            f"{capped} of {grid.window_capped.size} cells have the ground label "
            f"on the block-window edge (window={block_window})")
    if not grid.rwa_ok.all():
        grid.deviations.append(
            f"{int((~grid.rwa_ok).sum())} cells fail the counter-rotating audit")
    if not grid.hierarchy_ok.all():
        grid.deviations.append(
            f"{int((~grid.hierarchy_ok).sum())} cells fail the drive-hierarchy audit")
    return grid


def sweep_grid(sys_template: SystemParams, drive_template: DriveParams | None,
               axis1: AxisSpec, axis2: AxisSpec, block_window: int) -> PhaseGrid:
    """Dense ground-state sweep over two axes (static when drive is None)."""
    rows = [compute_grid_row(sys_template, drive_template, axis1, axis2,
                             block_window, i)
            for i in range(axis1.values.size)]
    return _assemble_grid(axis1, axis2, block_window, rows)


def phase_grid(sys_template: SystemParams, g1_over_Omega1: np.ndarray,
               g2_over_Omega2: np.ndarray,
               block_window: int = STATIC_BLOCK_WINDOW) -> PhaseGrid:
    """Static phase diagram over the two coupling ratios."""
    ax1 = AxisSpec("g1/Omega1", "g1",
                   np.asarray(g1_over_Omega1, dtype=float) * sys_template.Omega1)
    ax2 = AxisSpec("g2/Omega2", "g2",
                   np.asarray(g2_over_Omega2, dtype=float) * sys_template.Omega2)
    return sweep_grid(sys_template, None, ax1, ax2, block_window)


def driven_phase_grid(sys_template: SystemParams, drive_template: DriveParams,
                      theta_axis: np.ndarray, detuning_ratio_axis: np.ndarray,
                      block_window: int = DRIVEN_BLOCK_WINDOW,
                      theta_factor: float = 1.0,
                      detuning_mode: int = 2) -> PhaseGrid:
    """Driven diagram over (theta, detuning ratio) at fixed drive frequency.

    The theta axis is realized by varying the drive amplitude at fixed
    omega_D.  The detuning axis varies the chosen cavity frequency at fixed
    atomic frequencies: for detuning_mode=2 the ratio is delta2/Omega2 and
    Omega2 = (2 omega2 + omega1)/(1 + ratio); mode 1 is the mirror image.
    Pass theta_factor=2 to interpret the first axis as 2*theta.
    """
    theta = np.asarray(theta_axis, dtype=float) / theta_factor
    amp = theta * drive_template.frequency
    if amp.size > 1 and not np.all(np.diff(amp) > 0):
        raise ValueError("theta axis must be strictly increasing")
    if detuning_mode not in (1, 2):
        raise ValueError(f"detuning_mode must be 1 or 2, got {detuning_mode}")
    if detuning_mode == 2:
        base = 2.0 * sys_template.omega2 + sys_template.omega1
        parameter, ratio_name = "Omega2", "delta2/Omega2"
    else:
        base = 2.0 * sys_template.omega1 + sys_template.omega2
        parameter, ratio_name = "Omega1", "delta1/Omega1"
    ratios = np.asarray(detuning_ratio_axis, dtype=float)
    cavity_vals = base / (1.0 + ratios)
    name1 = "theta" if theta_factor == 1.0 else f"{theta_factor:g}*theta"
    ax1 = AxisSpec(name1, "A_D", amp)
    # the cavity frequency decreases as the ratio grows; AxisSpec wants
    # increasing values, so sweep in reversed order and flip back
    order = np.argsort(cavity_vals)
    ax2 = AxisSpec(ratio_name, parameter, cavity_vals[order])
    grid = sweep_grid(sys_template, drive_template, ax1, ax2, block_window)
    inverse = np.argsort(order)
    for key in ("energy", "n_label", "m_label", "gap", "window_capped",
                "rwa_ok", "hierarchy_ok"):
        setattr(grid, key, getattr(grid, key)[:, inverse])
    grid.axis2 = AxisSpec(ratio_name, f"detuning{detuning_mode}_ratio", ratios)
    return grid


# ---------------------------------------------------------------------------
# boundary localization


def block_energy_at(sys: SystemParams, parameter: str, value: float,
                    label: tuple[int, int]) -> float:
    sys_v = sys.replace(**{parameter: value})
    return block_ground_energy(block_matrix(sys_v, *label))


def locate_boundary(sys: SystemParams, parameter: str,
                    block_a: tuple[int, int], block_b: tuple[int, int],
                    lo: float, hi: float, tol: float | None = None) -> float:
    """Bisect the level crossing E_a(x) = E_b(x) of two blocks along one
    model parameter.  tol defaults to BOUNDARY_RATIO_TOL scaled by the
    matching cavity frequency for coupling parameters.
    """
    if tol is None:
        scale = {"g1": sys.Omega1, "g2": sys.Omega2}.get(parameter, 1.0)
        tol = BOUNDARY_RATIO_TOL * scale
    diff_lo = (block_energy_at(sys, parameter, lo, block_a)
               - block_energy_at(sys, parameter, lo, block_b))
    diff_hi = (block_energy_at(sys, parameter, hi, block_a)
               - block_energy_at(sys, parameter, hi, block_b))
    if diff_lo == 0.0:
        return lo
    if diff_hi == 0.0:
        return hi
    if np.sign(diff_lo) == np.sign(diff_hi):
        raise ValueError(
            f"no crossing of blocks {block_a}/{block_b} in [{lo}, {hi}] "
            f"along {parameter}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        diff_mid = (block_energy_at(sys, parameter, mid, block_a)
                    - block_energy_at(sys, parameter, mid, block_b))
        if diff_mid == 0.0:
            return mid
        if np.sign(diff_mid) == np.sign(diff_lo):
            lo, diff_lo = mid, diff_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def label_sequence(grid_or_labels) -> list[tuple[int, int]]:
    """Ordered distinct labels along a 1-D scan (consecutive duplicates
    collapsed)."""
    if isinstance(grid_or_labels, PhaseGrid):
        n = grid_or_labels.n_label.ravel()
        m = grid_or_labels.m_label.ravel()
        labels = list(zip(n.tolist(), m.tolist()))
    else:
        labels = [tuple(map(int, lab)) for lab in grid_or_labels]
    out: list[tuple[int, int]] = []
    for lab in labels:
        if not out or out[-1] != lab:
            out.append(lab)
    return out
