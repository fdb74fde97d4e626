"""Channel conditions under which the blind scheme provably scales.

For a double-surface system the strong conditions are:

  C1  the two-hop coefficient block h[n1, n2] (n1, n2 >= 1) is an outer
      product u1[n1] * u2[n2] with every factor entry nonzero;
  C2  both phase grids have at least 3 levels;
  C3  the one-hop coefficients through surface 1 are weak relative to the
      two-hop row sums: gamma_min = max_m arcsin(|h[m,0]| / |sum_n h[m,n]|)
      stays below pi/2 - pi/K1.

The zero-leakage variant (C'1..C'3) asks instead for continuous phases and
for the direct and one-hop coefficients to vanish outright.

For L surfaces the generalization (D1..D3) factors the full-path block
h[n1..nL] = prod u_ell[n_ell], bounds the grid resolutions, and requires a
margin angle gamma such that every "leakage" sum (paths using element m of
surface ell but skipping some later or earlier surface) is dominated by the
aligned path mass through that element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

import numpy as np

from .channel import CascadedChannelTensor, Channel, dims
from .phases import PhaseAssignment, PhaseGrid, as_grids, wrap_angle

DEFAULT_TOL = 1e-8
DEFAULT_GAMMA_POINTS = 10**4
# float slack when comparing the leakage inequality at a grid point
_SLACK = 1e-12


@dataclass(frozen=True)
class RankOneFactors:
    """Per-surface factor vectors of the full-path coefficient block.

    Gauge convention: vectors[0..L-2] each start with a real nonnegative
    entry; vectors[L-1] absorbs the accumulated phase.  Only phases are
    gauged, so factor magnitudes are whatever the caller supplied.
    """

    vectors: tuple[np.ndarray, ...]

    def __post_init__(self):
        vs = []
        n = None
        for v in self.vectors:
            a = np.array(v, dtype=np.complex128, copy=True)
            if a.ndim != 1 or a.size < 1:
                raise ValueError("factor vectors must be nonempty 1-D arrays")
            if n is None:
                n = a.size
            elif a.size != n:
                raise ValueError("factor vectors must share a common length")
            a.flags.writeable = False
            vs.append(a)
        if not vs:
            raise ValueError("need at least one factor vector")
        for v in vs[:-1]:
            lead = v[0]
            if abs(lead.imag) > 1e-9 * max(1.0, abs(lead)) or lead.real < -1e-12:
                raise ValueError(
                    "gauge violation: leading factors must start with a real "
                    "nonnegative entry (use RankOneFactors.from_raw)"
                )
        object.__setattr__(self, "vectors", tuple(vs))

    @property
    def num_surfaces(self) -> int:
        return len(self.vectors)

    @property
    def num_elements(self) -> int:
        return self.vectors[0].size

    @classmethod
    def from_raw(cls, vectors) -> "RankOneFactors":
        """Gauge-fix arbitrary factor vectors without changing their outer
        product: rotate each leading vector so its first entry is real
        nonnegative, pushing the accumulated phase into the last vector."""
        vs = [np.asarray(v, dtype=np.complex128).copy() for v in vectors]
        carry = 1.0 + 0.0j
        for i in range(len(vs) - 1):
            lead = vs[i][0]
            if lead != 0:
                rot = lead / abs(lead)
                vs[i] /= rot
                carry *= rot
        vs[-1] = vs[-1] * carry
        return cls(tuple(vs))

    def outer_product(self) -> np.ndarray:
        """Reconstructed block, shape (N,) * L."""
        out = self.vectors[0]
        for v in self.vectors[1:]:
            out = np.multiply.outer(out, v)
        return out

    def mean_gains(self) -> tuple[float, ...]:
        """Per-surface mean element gain (1/N) * sum |u[n]|."""
        return tuple(float(np.mean(np.abs(v))) for v in self.vectors)

    def coherent_sums(self) -> np.ndarray:
        return np.array([np.abs(v.sum()) for v in self.vectors])

    def absolute_sums(self) -> np.ndarray:
        return np.array([np.abs(v).sum() for v in self.vectors])


@dataclass(frozen=True)
class RankOneCheck:
    passed: bool
    factors: Optional[RankOneFactors]
    singular_ratio: float
    residual_rel: float
    reason: Optional[str] = None


def check_rank_one(matrix, tol: float = DEFAULT_TOL) -> RankOneCheck:
    """Test whether an (N, N) coefficient block is an outer product with all
    entries nonzero; on success return the gauge-fixed factors.

    Rank is judged by the singular value ratio s2/s1 <= tol; entries of a
    recovered factor count as zero below tol times the vector's peak.
    """
    m = np.asarray(matrix, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    scale = float(np.abs(m).max())
    if scale == 0.0:
        return RankOneCheck(False, None, math.inf, math.inf, "zero matrix")
    u_mat, s, vh = np.linalg.svd(m)
    ratio = float(s[1] / s[0]) if s.size > 1 else 0.0
    factors = RankOneFactors.from_raw((u_mat[:, 0], s[0] * vh[0]))
    recon = factors.outer_product()
    residual = float(np.abs(m - recon).max() / scale)
    if ratio > tol:
        return RankOneCheck(False, factors, ratio, residual,
                            f"singular value ratio {ratio:.3e} above {tol:.1e}")
    for which, v in enumerate(factors.vectors):
        mags = np.abs(v)
        if mags.min() <= tol * mags.max():
            n = int(np.argmin(mags))
            return RankOneCheck(False, factors, ratio, residual,
                                f"factor {which + 1} entry {n + 1} is zero")
    return RankOneCheck(True, factors, ratio, residual)


def recover_full_path_factors(block: np.ndarray, tol: float = DEFAULT_TOL):
    """Peel per-surface factors off an all-active coefficient block.

    Returns (factors, residual_rel, worst_singular_ratio); factors is None
    when some unfolding is rank-deficient to working precision.
    """
    w = np.asarray(block, dtype=np.complex128)
    scale = float(np.abs(w).max())
    if scale == 0.0:
        return None, math.inf, math.inf
    vectors = []
    rest = w
    worst_ratio = 0.0
    while rest.ndim > 1:
        m = rest.reshape(rest.shape[0], -1)
        u_mat, s, _ = np.linalg.svd(m, full_matrices=False)
        if s[0] == 0.0:
            return None, math.inf, math.inf
        if s.size > 1:
            worst_ratio = max(worst_ratio, float(s[1] / s[0]))
        u = u_mat[:, 0]
        vectors.append(u)
        rest = np.tensordot(np.conj(u), rest, axes=(0, 0))
    vectors.append(rest)
    factors = RankOneFactors.from_raw(vectors)
    residual = float(np.abs(w - factors.outer_product()).max() / scale)
    return factors, residual, worst_ratio


@dataclass(frozen=True)
class IndexSetSpec:
    """Families of path index tuples tied to element `element` of surface
    `surface` (both 0-based surface, 1-based element).

    kind "through":    n_surface = element, other surfaces unrestricted.
    kind "all_active": additionally every other surface reflects (index >= 1).
    kind "some_skip":  the difference, i.e. at least one other surface is
                       skipped.  These are the leakage paths of the surface.
    """

    surface: int
    element: int
    kind: str

    def __post_init__(self):
        if self.kind not in ("through", "all_active", "some_skip"):
            raise ValueError(f"unknown index set kind {self.kind!r}")
        if self.surface < 0 or self.element < 1:
            raise ValueError("surface is 0-based, element is 1-based")

    def count(self, num_surfaces: int, num_elements: int) -> int:
        rest = num_surfaces - 1
        if self.kind == "through":
            return (num_elements + 1) ** rest
        if self.kind == "all_active":
            return num_elements**rest
        return (num_elements + 1) ** rest - num_elements**rest

    def tuples(self, num_surfaces: int, num_elements: int):
        """Yield the member tuples (reference implementation for tests)."""
        if not (0 <= self.surface < num_surfaces):
            raise ValueError("surface index out of range")
        if self.element > num_elements:
            raise ValueError("element index out of range")
        lo = 1 if self.kind == "all_active" else 0
        others = [range(lo, num_elements + 1)] * (num_surfaces - 1)
        for combo in product(*others):
            tup = list(combo)
            tup.insert(self.surface, self.element)
            tup = tuple(tup)
            if self.kind == "some_skip" and all(
                x >= 1 for i, x in enumerate(tup) if i != self.surface
            ):
                continue
            yield tup


def leakage_abs_sum(tensor: CascadedChannelTensor, surface: int, element: int) -> float:
    """sum |h| over the "some_skip" set of (surface, element), computed as the
    through-slice total minus the all-active restriction."""
    a = np.abs(tensor.entries)
    sub = np.take(a, element, axis=surface)
    full = float(sub.sum())
    active = float(sub[(slice(1, None),) * sub.ndim].sum()) if sub.ndim else float(sub)
    return full - active


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of a condition-set check.

    subconditions maps short labels to booleans; the overall verdict is their
    conjunction.  gamma_min is the smallest workable margin angle in radians
    (None when infeasible), gamma_upper the exclusive upper end of the valid
    range.  delta holds per-surface mean element gains when factors are
    known.  margins carry signed slack diagnostics (positive = satisfied).
    """

    condition_set: str
    subconditions: dict
    gamma_min: Optional[float] = None
    gamma_upper: Optional[float] = None
    delta: Optional[tuple] = None
    margins: dict = field(default_factory=dict)
    notes: tuple = ()

    @property
    def passed(self) -> bool:
        return all(self.subconditions.values())

    def to_json_dict(self) -> dict:
        def num(x):
            if x is None:
                return None
            x = float(x)
            return x if math.isfinite(x) else None

        return {
            "condition_set": self.condition_set,
            "passed": self.passed,
            "subconditions": {k: bool(v) for k, v in self.subconditions.items()},
            "gamma_min": num(self.gamma_min),
            "gamma_upper": num(self.gamma_upper),
            "delta": None if self.delta is None else [float(d) for d in self.delta],
            "margins": {k: num(v) for k, v in self.margins.items()},
            "notes": list(self.notes),
        }


def _require_tensor(channel) -> CascadedChannelTensor:
    if not isinstance(channel, CascadedChannelTensor):
        raise TypeError("condition checks need the dense tensor form")
    return channel


def gamma_min_double(tensor: CascadedChannelTensor):
    """Smallest workable margin angle of a double-surface system.

    Per element m of the first surface the leakage ratio is
    |h[m, 0]| / |sum_n h[m, n]|; gamma_min = arcsin of the largest ratio.
    Returns (gamma_min, ratios); gamma_min is None when some ratio exceeds 1
    or a nonzero one-hop coefficient sits on a zero two-hop row sum.
    """
    t = _require_tensor(tensor)
    if t.num_surfaces != 2:
        raise ValueError("gamma_min_double needs exactly two surfaces")
    one_hop = np.abs(t.entries[1:, 0])
    row_sums = np.abs(t.entries[1:, 1:].sum(axis=1))
    n = one_hop.size
    ratios = np.zeros(n)
    feasible = True
    for m in range(n):
        if one_hop[m] == 0.0:
            ratios[m] = 0.0
        elif row_sums[m] == 0.0 or one_hop[m] > row_sums[m]:
            ratios[m] = math.inf
            feasible = False
        else:
            ratios[m] = one_hop[m] / row_sums[m]
    if not feasible:
        return None, ratios
    return float(np.arcsin(ratios.max())), ratios


def check_c_conditions(tensor: CascadedChannelTensor, grids,
                       tol: float = DEFAULT_TOL) -> ConditionReport:
    """C1..C3 for a double-surface system."""
    t = _require_tensor(tensor)
    if t.num_surfaces != 2:
        raise ValueError("C conditions apply to exactly two surfaces")
    grids = as_grids(grids, 2)
    k1, k2 = grids[0].num_levels, grids[1].num_levels
    rank = check_rank_one(t.entries[1:, 1:], tol)
    c2 = k1 >= 3 and k2 >= 3
    gamma_upper = math.pi / 2 - math.pi / k1
    gamma_min, _ratios = gamma_min_double(t)
    c3 = gamma_min is not None and gamma_min < gamma_upper
    margins = {
        "c1_singular_ratio": rank.singular_ratio,
        "c2_levels": float(min(k1, k2) - 3),
        "c3_slack": (-math.inf if gamma_min is None else gamma_upper - gamma_min),
    }
    notes = () if rank.reason is None else (f"c1: {rank.reason}",)
    return ConditionReport(
        condition_set="C",
        subconditions={"c1": rank.passed, "c2": c2, "c3": c3},
        gamma_min=gamma_min,
        gamma_upper=gamma_upper,
        delta=None if rank.factors is None else rank.factors.mean_gains(),
        margins=margins,
        notes=notes,
    )


def check_cprime(tensor: CascadedChannelTensor, grids, zero_tol: float = 0.0,
                 continuous: bool = False) -> ConditionReport:
    """Zero-leakage variant for a double-surface system.

    C'1: two-hop block is rank one with nonzero entries.
    C'2: phases are continuous; discrete grids cannot satisfy this, so it
         passes only when the caller asserts the continuous idealization.
    C'3: the direct and every one-hop coefficient vanish (within zero_tol).
    """
    t = _require_tensor(tensor)
    if t.num_surfaces != 2:
        raise ValueError("the zero-leakage conditions apply to exactly two surfaces")
    grids = as_grids(grids, 2)
    rank = check_rank_one(t.entries[1:, 1:])
    worst_leak = max(
        abs(t.direct),
        float(np.abs(t.entries[1:, 0]).max()),
        float(np.abs(t.entries[0, 1:]).max()),
    )
    cp3 = worst_leak <= zero_tol
    notes = [
        "c'2 is a modeling assumption: it holds only in the continuous-phase "
        "idealization, never for a finite grid",
    ]
    if rank.reason is not None:
        notes.append(f"c'1: {rank.reason}")
    return ConditionReport(
        condition_set="Cprime",
        subconditions={"c'1": rank.passed, "c'2": bool(continuous), "c'3": cp3},
        gamma_min=0.0 if cp3 else None,
        gamma_upper=None,
        delta=None if rank.factors is None else rank.factors.mean_gains(),
        margins={
            "c'1_singular_ratio": rank.singular_ratio,
            "c'3_slack": zero_tol - worst_leak,
        },
        notes=tuple(notes),
    )


def _d3_scan(tensor: CascadedChannelTensor, factors: RankOneFactors, grids,
             gamma_points: int):
    """Scan the margin angle range for the leakage-domination inequality.

    Returns (feasible, gamma_min, gamma_upper, best_slack).  The inequality
    at margin gamma, for surface ell < L (0-based) and element m, is

        leakage(ell, m) <= |u_ell[m]| * sin(gamma)
                           * prod_{i > ell} |sum_n u_i[n]|
                           * prod_{i < ell} (sum_n |u_i[n]|) * cos(gamma + pi/K_i).

    The later-surface factors enter coherently (their phases will be aligned
    when surface ell is decided) while earlier surfaces contribute their
    rounded mass, hence the per-factor grid penalty pi/K_i.
    """
    L = tensor.num_surfaces
    n = tensor.num_elements
    ks = np.array([g.num_levels for g in grids], dtype=float)
    budget = 0.5 - float(np.sum(1.0 / ks[: L - 1]))
    gamma_upper = (math.pi / (L - 1)) * budget
    leak = np.array([[leakage_abs_sum(tensor, ell, m) for m in range(1, n + 1)]
                     for ell in range(L - 1)])
    gains = np.array([np.abs(v) for v in factors.vectors])  # (L, N)
    coherent = factors.coherent_sums()
    absolute = factors.absolute_sums()
    if gamma_upper <= 0.0:
        return False, None, gamma_upper, -math.inf
    gammas = np.linspace(0.0, gamma_upper, gamma_points, endpoint=False)
    slack = np.full(gammas.size, math.inf)
    for ell in range(L - 1):
        later = float(np.prod(coherent[ell + 1:]))
        earlier = np.ones_like(gammas)
        for i in range(ell):
            earlier = earlier * absolute[i] * np.cos(gammas + math.pi / ks[i])
        rhs = (np.sin(gammas) * later * earlier)[:, None] * gains[ell][None, :]
        slack = np.minimum(slack, (rhs - leak[ell][None, :]).min(axis=1))
    scale = max(1.0, float(np.abs(tensor.entries).max()))
    ok = slack >= -_SLACK * scale
    if not np.any(ok):
        return False, None, gamma_upper, float(slack.max())
    first = int(np.argmax(ok))
    return True, float(gammas[first]), gamma_upper, float(slack.max())


def check_d_conditions(tensor: CascadedChannelTensor, grids,
                       factors: Optional[RankOneFactors] = None,
                       tol: float = DEFAULT_TOL,
                       gamma_points: int = DEFAULT_GAMMA_POINTS) -> ConditionReport:
    """D1..D3 for a system of L >= 2 surfaces.

    D1: the all-active coefficient block factors into per-surface vectors
        with every entry nonzero (factors are recovered when not supplied).
    D2: the last grid has >= 3 levels and sum_{ell<L} 1/K_ell < 1/2.
    D3: some margin angle gamma in [0, gamma_upper) satisfies the leakage
        inequality for every (surface < L, element).
    """
    t = _require_tensor(tensor)
    L, n = dims(t)
    if L < 2:
        raise ValueError("the multi-surface conditions need at least two surfaces")
    grids = as_grids(grids, L)
    block = t.entries[(slice(1, None),) * L]
    notes = []
    if factors is None:
        factors, residual, ratio = recover_full_path_factors(block, tol)
        if factors is None:
            notes.append("d1: all-active block is numerically zero")
    else:
        if factors.num_surfaces != L or factors.num_elements != n:
            raise ValueError("factor dimensions do not match the tensor")
        scale = float(np.abs(block).max())
        residual = (math.inf if scale == 0.0 else
                    float(np.abs(block - factors.outer_product()).max() / scale))
        ratio = 0.0
    d1 = factors is not None and residual <= tol
    if factors is not None:
        for which, v in enumerate(factors.vectors):
            mags = np.abs(v)
            if mags.min() <= tol * mags.max():
                d1 = False
                notes.append(f"d1: factor {which + 1} has a zero entry")
                break
    ks = [g.num_levels for g in grids]
    budget = 0.5 - sum(1.0 / k for k in ks[: L - 1])
    d2 = ks[-1] >= 3 and budget > 0.0
    if factors is not None:
        d3, gamma_min, gamma_upper, best_slack = _d3_scan(t, factors, grids, gamma_points)
    else:
        d3, gamma_min, gamma_upper, best_slack = False, None, None, -math.inf
    return ConditionReport(
        condition_set="D",
        subconditions={"d1": d1, "d2": d2, "d3": d3},
        gamma_min=gamma_min,
        gamma_upper=gamma_upper,
        delta=None if factors is None else factors.mean_gains(),
        margins={
            "d1_residual": residual,
            "d1_singular_ratio": ratio,
            "d2_budget": budget,
            "d2_last_levels": float(ks[-1] - 3),
            "d3_best_slack": best_slack,
        },
        notes=tuple(notes),
    )


def theta_hat_star_all(channel: Channel, factors: RankOneFactors,
                       decided: PhaseAssignment, ell: int) -> np.ndarray:
    """Ideal aligning phases of every element of surface ell, given the
    decisions already made for surfaces before it (later surfaces at phase 0).

    For element n the target is

        angle(S0) - angle(u_ell[n]) - angle(E_n / u_ell[n])

    where S0 aggregates every path skipping surface ell and E_n aggregates
    the all-active paths through element n.  Zero aggregates take angle 0,
    matching the deciders' convention.
    """
    t = _require_tensor(channel)
    L, n = dims(t)
    if not (0 <= ell < L):
        raise ValueError(f"surface index {ell} out of range")
    if factors.num_surfaces != L or factors.num_elements != n:
        raise ValueError("factor dimensions do not match the channel")
    ones_skip = np.ones(n + 1, dtype=np.complex128)
    # paths that skip surface ell, earlier surfaces at their decisions
    sub = np.take(t.entries, 0, axis=ell)
    others = [i for i in range(L) if i != ell]
    for pos in range(len(others) - 1, -1, -1):
        i = others[pos]
        vec = decided.factors_with_skip(i) if i < ell else ones_skip
        sub = np.tensordot(sub, vec, axes=(pos, 0))
    s0 = complex(sub)
    # all-active paths, split by the element of surface ell
    active = t.entries
    for i in range(L - 1, -1, -1):
        if i == ell:
            continue
        take = slice(1, None)
        vec = decided.factors(i) if i < ell else np.ones(n, dtype=np.complex128)
        idx = [slice(None)] * active.ndim
        idx[i] = take
        active = np.tensordot(active[tuple(idx)], vec, axes=(i, 0))
    e_by_element = active[1:]
    if np.any(e_by_element == 0):
        bad = int(np.argmax(e_by_element == 0))
        raise ValueError(
            f"all-active aggregate of surface {ell + 1}, element {bad + 1} is "
            "zero; the ideal phase is undefined there"
        )
    u = factors.vectors[ell]
    target = (np.angle(s0) - np.angle(u) - np.angle(e_by_element / u))
    return wrap_angle(target)


def theta_hat_star(channel: Channel, factors: RankOneFactors,
                   decided: PhaseAssignment, ell: int, element: int) -> float:
    """Ideal aligning phase of one element (1-based) of surface ell."""
    all_targets = theta_hat_star_all(channel, factors, decided, ell)
    if not (1 <= element <= all_targets.size):
        raise ValueError("element index out of range")
    return float(all_targets[element - 1])


@dataclass(frozen=True)
class Lemma1Report:
    """Per-element comparison of decided phases against the ideal targets.

    For every surface the decided phase must land within gamma + pi/K of the
    ideal one; violations lists (surface, element, deviation, bound)."""

    all_ok: bool
    max_deviation: float
    gamma: float
    per_surface: tuple
    violations: tuple

    def to_json_dict(self) -> dict:
        return {
            "all_ok": self.all_ok,
            "max_deviation": self.max_deviation,
            "gamma": self.gamma,
            "per_surface": [dict(d) for d in self.per_surface],
            "violations": [list(v) for v in self.violations],
        }


def lemma1_verify(channel: Channel, factors: RankOneFactors, grids,
                  assignment: PhaseAssignment, gamma: float,
                  slack: float = 1e-9) -> Lemma1Report:
    """Check that every decided phase lies within gamma + pi/K_ell of its
    ideal target, replaying the sequential decision state surface by surface."""
    t = _require_tensor(channel)
    L, n = dims(t)
    grids = as_grids(grids, L)
    if not (0.0 <= gamma):
        raise ValueError("gamma must be nonnegative")
    per_surface = []
    violations = []
    worst = 0.0
    for ell in range(L):
        targets = theta_hat_star_all(t, factors, assignment, ell)
        decided = assignment.phase_values(ell)
        dev = np.abs(wrap_angle(decided - targets))
        bound = gamma + math.pi / grids[ell].num_levels
        worst = max(worst, float(dev.max()))
        per_surface.append({
            "surface": ell + 1,
            "bound": bound,
            "max_deviation": float(dev.max()),
        })
        for m in np.nonzero(dev > bound + slack)[0]:
            violations.append((ell + 1, int(m) + 1, float(dev[m]), bound))
    return Lemma1Report(
        all_ok=not violations,
        max_deviation=worst,
        gamma=float(gamma),
        per_surface=tuple(per_surface),
        violations=tuple(violations),
    )
