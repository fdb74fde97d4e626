"""Hand-constructed channels with known optima, and random instances that
satisfy the multi-surface scaling conditions by construction.

The example channels come in numbered pairs: each "bad" variant breaks one of
the double-surface conditions and caps the received power at quadratic growth
in N, while the "good" sibling satisfies them and reaches quartic growth.
All of them use parity-patterned coefficients so the optimal decisions have
closed forms; element counts must be odd (and at least 3) so the alternating
sums take their intended values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import CascadedChannelTensor
from .conditions import (
    ConditionReport,
    RankOneFactors,
    check_d_conditions,
    leakage_abs_sum,
)
from .phases import PhaseGrid, as_grids

EXAMPLE_IDS = (1, 2, 3)
EXAMPLE_VARIANTS = ("bad", "good")


@dataclass(frozen=True)
class ExampleFixture:
    """A constructed double-surface channel with its known optimum.

    expected_indices holds the per-surface phase decisions (grid indices)
    that a perfect-knowledge sequential optimizer makes, valid at the default
    coefficient scale beta = 1.  boost_exponent is the growth order of the
    received power in N: 2 for the "bad" variants, 4 for the "good" ones.
    """

    example_id: int
    variant: str
    tensor: CascadedChannelTensor
    grids: tuple[PhaseGrid, ...]
    expected_indices: tuple[np.ndarray, np.ndarray]
    boost_exponent: int
    note: str = ""


def _parity_masks(n: int):
    elems = np.arange(1, n + 1)
    odd = elems % 2 == 1
    return odd, ~odd


def build_example(example_id: int, variant: str, num_elements: int,
                  beta: float = 1.0) -> ExampleFixture:
    """Construct one of the numbered double-surface example channels.

    num_elements must be odd and >= 3; beta > 0 scales the coefficients.
    The stated expected decisions are exact for beta = 1 (and for any beta in
    example 1); the parity-mixed cases shift some rounding boundaries when
    beta strays far from 1.
    """
    if example_id not in EXAMPLE_IDS:
        raise ValueError(f"example_id must be one of {EXAMPLE_IDS}")
    if variant not in EXAMPLE_VARIANTS:
        raise ValueError(f"variant must be one of {EXAMPLE_VARIANTS}")
    n = int(num_elements)
    if n % 2 == 0 or n < 3:
        raise ValueError("num_elements must be odd and at least 3")
    if not (beta > 0):
        raise ValueError("beta must be positive")
    odd, even = _parity_masks(n)
    sign = np.where(odd, -1.0, 1.0)  # (-1)^n for n = 1..N
    entries = np.zeros((n + 1, n + 1), dtype=np.complex128)
    k4 = (PhaseGrid(4), PhaseGrid(4))
    idx = {"zero": np.zeros(n, dtype=np.int64)}

    if example_id == 1:
        two_hop = beta * np.outer(sign, sign)
        if variant == "bad":
            entries[1:, 1:] = two_hop + 2.0 * beta * np.eye(n)
            expected = (idx["zero"], idx["zero"])
            note = "diagonal specular ridge breaks the outer-product structure"
        else:
            entries[1:, 1:] = two_hop
            pick = np.where(odd, 0, 2).astype(np.int64)
            expected = (pick, pick.copy())
            note = "pure parity outer product; both surfaces flip even elements"
        return ExampleFixture(example_id, variant, CascadedChannelTensor(entries),
                              k4, expected, 2 if variant == "bad" else 4, note)

    if example_id == 2:
        u1 = math.sqrt(beta) * 1j * sign      # e^{j(n + 1/2) pi}
        u2 = math.sqrt(beta) * sign
        entries[1:, 1:] = np.outer(u1, u2)
        one_hop = np.where(
            odd,
            beta / 3.0 * np.exp(1j * math.pi / 4),
            math.sqrt(beta) / 3.0 * np.exp(-1j * math.pi / 4),
        )
        entries[1:, 0] = one_hop
        if variant == "bad":
            grids = (PhaseGrid(2), PhaseGrid(2))
            expected = (idx["zero"], np.where(odd, 0, 1).astype(np.int64))
            note = "binary grids lack the quarter turns the first surface needs"
        else:
            grids = k4
            expected = (
                np.where(odd, 3, 1).astype(np.int64),
                np.where(odd, 0, 2).astype(np.int64),
            )
            note = ("quarter-turn grid recovers quartic growth despite the "
                    "parity-mixed one-hop magnitudes (beta/3 vs sqrt(beta)/3)")
        return ExampleFixture(example_id, variant, CascadedChannelTensor(entries),
                              grids, expected, 2 if variant == "bad" else 4, note)

    # example 3: strong one-hop leakage through the first surface
    entries[1:, 0] = 2.0 * beta * 1j
    if variant == "bad":
        entries[1:, 1:] = beta * np.outer(sign, sign)
        expected = (
            np.full(n, 3, dtype=np.int64),
            np.where(odd, 1, 3).astype(np.int64),
        )
        note = "one-hop paths dominate the alternating two-hop rows"
    else:
        entries[1:, 1:] = beta
        expected = (idx["zero"], np.full(n, 1, dtype=np.int64))
        note = "constant two-hop rows outweigh the same one-hop leakage"
    return ExampleFixture(example_id, variant, CascadedChannelTensor(entries),
                          k4, expected, 2 if variant == "bad" else 4, note)


@dataclass(frozen=True)
class DInstance:
    """Random multi-surface channel built to satisfy the scaling conditions.

    The all-active block is an outer product of unit-modulus factor vectors;
    every other entry is a_scale times a unit-modulus random phase, so the
    total leakage through any element is exactly a_scale times the count of
    its skip paths.  a_max is the largest leakage scale for which the margin
    inequality still admits some angle; report is the condition check of the
    built tensor (None for a single surface, where the conditions are
    vacuous).
    """

    tensor: CascadedChannelTensor
    factors: RankOneFactors
    grids: tuple[PhaseGrid, ...]
    a_scale: float
    a_max: float
    report: Optional[ConditionReport]


# a single surface has no skip-path constraints; cap the leakage scale at the
# unit path magnitude instead
_SINGLE_SURFACE_CAP = 1.0


def _unit_phases(rng, shape) -> np.ndarray:
    return np.exp(2j * math.pi * rng.random(shape))


def max_leakage_scale(num_surfaces: int, num_elements: int, grids,
                      factors: RankOneFactors,
                      gamma_points: int = 10**4) -> float:
    """Largest a_scale the margin inequality tolerates for unit-modulus
    leakage entries, scanning the valid margin angle range.

    The per-element leakage sum is a_scale * ((N+1)^(L-1) - N^(L-1)); the
    generator enforces the inequality for every surface index (the condition
    set only constrains surfaces before the last, but holding it everywhere
    keeps the ideal-phase targets well separated on all surfaces).
    """
    L, n = num_surfaces, num_elements
    if L == 1:
        return _SINGLE_SURFACE_CAP
    ks = np.array([g.num_levels for g in grids], dtype=float)
    budget = 0.5 - float(np.sum(1.0 / ks[: L - 1]))
    gamma_upper = (math.pi / (L - 1)) * budget
    if gamma_upper <= 0.0:
        return 0.0
    skip_count = float((n + 1) ** (L - 1) - n ** (L - 1))
    gains = np.array([np.abs(v) for v in factors.vectors])
    coherent = factors.coherent_sums()
    absolute = factors.absolute_sums()
    gammas = np.linspace(0.0, gamma_upper, gamma_points, endpoint=False)[1:]
    bound = np.full(gammas.size, math.inf)
    for ell in range(L):
        later = float(np.prod(coherent[ell + 1:]))
        earlier = np.ones_like(gammas)
        for i in range(ell):
            earlier = earlier * absolute[i] * np.cos(gammas + math.pi / ks[i])
        rhs = np.sin(gammas) * later * np.maximum(earlier, 0.0) * float(gains[ell].min())
        bound = np.minimum(bound, rhs / skip_count)
    return float(bound.max())


def make_d_instance(num_surfaces: int, num_elements: int, grids, rng,
                    a_scale: Optional[float] = None,
                    margin: float = 0.5) -> DInstance:
    """Draw a random channel that satisfies the multi-surface conditions.

    Factor vectors get i.i.d. uniform phases and unit modulus (so every
    per-surface mean element gain is exactly 1); all skip-path entries share
    the magnitude a_scale with i.i.d. uniform phases.  When a_scale is not
    given it defaults to margin * a_max.  An explicit a_scale above a_max is
    rejected so the returned instance always satisfies the conditions.
    """
    L, n = int(num_surfaces), int(num_elements)
    if L < 1 or n < 1:
        raise ValueError("need at least one surface and one element")
    grids = as_grids(grids, L)
    ks = [g.num_levels for g in grids]
    if ks[-1] < 3 or (L >= 2 and sum(1.0 / k for k in ks[: L - 1]) >= 0.5):
        raise ValueError(
            f"grids {ks} violate the resolution requirements (last grid >= 3 "
            "levels and the leading grids' 1/K budget under 1/2)"
        )
    if not (0.0 < margin <= 1.0):
        raise ValueError("margin must lie in (0, 1]")
    factors = RankOneFactors.from_raw([_unit_phases(rng, n) for _ in range(L)])
    shape = (n + 1,) * L
    entries = _unit_phases(rng, shape)
    entries[(slice(1, None),) * L] = factors.outer_product()
    a_max = max_leakage_scale(L, n, grids, factors)
    if a_scale is None:
        a = margin * a_max
    else:
        a = float(a_scale)
        if a < 0:
            raise ValueError("a_scale must be nonnegative")
        if a > a_max * (1 + 1e-12):
            raise ValueError(
                f"a_scale {a:g} exceeds the largest feasible leakage scale "
                f"{a_max:g} for this draw"
            )
    skip_mask = np.ones(shape, dtype=bool)
    skip_mask[(slice(1, None),) * L] = False
    entries[skip_mask] *= a
    tensor = CascadedChannelTensor(entries)
    report = None
    if L >= 2:
        report = check_d_conditions(tensor, grids, factors=factors)
    return DInstance(tensor=tensor, factors=factors, grids=grids,
                     a_scale=a, a_max=a_max, report=report)
