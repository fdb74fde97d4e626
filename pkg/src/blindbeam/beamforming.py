"""Blind beamforming by conditional sample means, plus reference optimizers.

The sequential scheme configures one surface at a time.  While surface ell is
being configured the other surfaces hold their current assignment, so the
effective channel is linear in the reflection factors of surface ell:

    g = c0 + sum_n c_n * exp(j * theta_n).

Random probing draws phase indices uniformly per element, measures received
power, and groups the measurements by (element, phase index).  The group
means separate the contribution of each element, and picking the per-element
argmax approaches the closest-point-projection (CPP) decision that perfect
channel knowledge would make.

All optimizers count every power measurement they take in
``BeamformingResult.evaluations``; the sequential scheme takes exactly
samples_per_surface measurements per surface, L * T total.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import (
    NOISELESS,
    Channel,
    NoiseModel,
    RadioParams,
    direct_gain,
    dims,
    effective_batch,
    effective_channel,
    received_power,
    stage_coefficients,
)
from .phases import PhaseAssignment, PhaseGrid, as_grids, wrap_angle

# Keep exhaustive per-stage enumeration honest but bounded.
MAX_EXACT_CONFIGS = 10**6

# Measurement chunk size for large sample counts.
_CHUNK = 1 << 16


class EmptyGroupError(ValueError):
    """A (element, phase index) group received no samples."""

    def __init__(self, element: int, phase_index: int):
        self.element = element
        self.phase_index = phase_index
        super().__init__(
            f"no samples hit element {element + 1} at phase index {phase_index}; "
            "increase the sample count"
        )


@dataclass(frozen=True)
class SampleBatch:
    """T random probes of one surface: per-sample phase indices and powers."""

    indices: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices)
        pw = np.asarray(self.powers, dtype=np.float64)
        if idx.ndim != 2:
            raise ValueError("indices must be (T, N)")
        if pw.shape != (idx.shape[0],):
            raise ValueError("powers must be a vector of length T")
        if idx.shape[0] < 1:
            raise ValueError("need at least one sample")
        if idx.min() < 0:
            raise ValueError("phase indices must be nonnegative")
        if np.any(pw < 0):
            raise ValueError("powers must be nonnegative")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "powers", pw)

    @property
    def num_samples(self) -> int:
        return self.indices.shape[0]

    @property
    def num_elements(self) -> int:
        return self.indices.shape[1]


@dataclass(frozen=True)
class CsmTable:
    """Conditional sample means per (element, phase index).

    means[n, k]: average measured power over the samples where element n+1
    used phase index k.  counts[n, k] is the size of that group; every row
    sums to the total sample count.
    """

    means: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.means, dtype=np.float64)
        c = np.asarray(self.counts, dtype=np.int64)
        if m.ndim != 2 or m.shape != c.shape:
            raise ValueError("means and counts must be matching (N, K) arrays")
        if np.any(c < 1):
            bad = np.argwhere(c < 1)[0]
            raise EmptyGroupError(int(bad[0]), int(bad[1]))
        totals = c.sum(axis=1)
        if np.any(totals != totals[0]):
            raise ValueError("per-element group counts must sum to the same total")
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "counts", c)

    @property
    def num_samples(self) -> int:
        return int(self.counts[0].sum())


@dataclass(frozen=True)
class BeamformingResult:
    """Outcome of one optimizer run.

    stage_powers[ell] is the noiseless received power after the assignment of
    surfaces 0..ell was fixed (later surfaces still at phase 0); it is a
    diagnostic trace and is not guaranteed to be monotone.  reflect_to_direct
    is, per stage, the mean reflected power share (1/N) * sum |c_n|^2 / |c0|^2
    when the stage had a nonzero skip-path aggregate c0, else None.
    element_gains[ell] = mean |reflection coefficient| of the surface when
    rank-one factors were supplied, else None.
    """

    method: str
    assignment: PhaseAssignment
    stage_powers: tuple[float, ...]
    evaluations: int
    reflect_to_direct: Optional[tuple] = None
    element_gains: Optional[tuple] = None

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "assignment": self.assignment.to_json_dict(),
            "stage_powers": list(self.stage_powers),
            "evaluations": self.evaluations,
            "reflect_to_direct": None if self.reflect_to_direct is None
            else list(self.reflect_to_direct),
            "element_gains": None if self.element_gains is None
            else list(self.element_gains),
        }


def generate_samples(num_elements: int, grid: PhaseGrid, num_samples: int, rng) -> np.ndarray:
    """Uniform i.i.d. phase indices, shape (T, N)."""
    if num_samples < 1:
        raise ValueError("need at least one sample")
    return rng.integers(0, grid.num_levels, size=(num_samples, num_elements), dtype=np.int64)


def conditional_sample_mean(batch: SampleBatch, grid: PhaseGrid) -> CsmTable:
    """Group measured powers by (element, phase index) and average."""
    k = grid.num_levels
    if batch.indices.max() >= k:
        raise ValueError("sample indices exceed the grid size")
    n = batch.num_elements
    sums = np.empty((n, k))
    counts = np.empty((n, k), dtype=np.int64)
    for col in range(n):
        idx = batch.indices[:, col]
        counts[col] = np.bincount(idx, minlength=k)
        sums[col] = np.bincount(idx, weights=batch.powers, minlength=k)
    if np.any(counts == 0):
        bad = np.argwhere(counts == 0)[0]
        raise EmptyGroupError(int(bad[0]), int(bad[1]))
    return CsmTable(sums / counts, counts)


def csm_decide(table: CsmTable, rel_tol: float = 1e-9) -> np.ndarray:
    """Per-element argmax of the conditional means.

    Ties within rel_tol of the row maximum go to the smallest phase index, so
    exactly flat rows decide deterministically.
    """
    means = table.means
    row_max = means.max(axis=1)
    thresh = row_max - rel_tol * np.abs(row_max)
    return np.argmax(means >= thresh[:, None], axis=1).astype(np.int64)


def cpp_decide(direct_eff: complex, reflected_eff: complex, grid: PhaseGrid,
               tol: float = 1e-12) -> int:
    """Closest grid point to the phase that aligns a reflected path with the
    rest of the signal.

    The ideal continuous phase is angle(direct_eff) - angle(reflected_eff);
    the decision is the grid index minimizing the wrapped distance to it.
    Zero aggregates take angle 0, and a zero reflected path returns index 0.
    Near-exact ties (within tol radians) go to the smallest index.
    """
    if reflected_eff == 0:
        return 0
    target = np.angle(direct_eff) - np.angle(reflected_eff)
    dist = np.abs(wrap_angle(grid.values() - target))
    return int(np.argmax(dist <= dist.min() + tol))


def _cpp_decide_vector(c0: complex, c: np.ndarray, grid: PhaseGrid,
                       tol: float = 1e-12) -> np.ndarray:
    """cpp_decide applied to every element of a stage at once."""
    target = np.angle(complex(c0)) - np.angle(c)
    dist = np.abs(wrap_angle(grid.values()[None, :] - target[:, None]))
    picks = np.argmax(dist <= dist.min(axis=1, keepdims=True) + tol, axis=1)
    return np.where(c == 0, 0, picks).astype(np.int64)


def _stage_diagnostic(c0: complex, c: np.ndarray) -> Optional[float]:
    if c0 == 0:
        return None
    return float(np.mean(np.abs(c) ** 2) / abs(c0) ** 2)


def _element_gains(factors) -> Optional[tuple]:
    if factors is None:
        return None
    return tuple(float(np.mean(np.abs(u))) for u in factors.vectors)


def _normalize_t(samples_per_surface, num_surfaces: int) -> list[int]:
    if isinstance(samples_per_surface, (int, np.integer)):
        ts = [int(samples_per_surface)] * num_surfaces
    else:
        ts = [int(t) for t in samples_per_surface]
        if len(ts) != num_surfaces:
            raise ValueError(f"need {num_surfaces} sample counts, got {len(ts)}")
    if any(t < 1 for t in ts):
        raise ValueError("sample counts must be positive")
    return ts


def sequential_csm(channel: Channel, grids, samples_per_surface,
                   params: RadioParams, noise: NoiseModel = NOISELESS,
                   rng=None, factors=None, trace: bool = False):
    """Blind sequential optimizer: one conditional-sample-mean pass per surface.

    Surfaces are processed in increasing index order; earlier decisions stay
    applied while later surfaces rest at phase index 0.  Stage ell draws its
    samples_per_surface probes uniformly, measures received power under the
    configured noise model, and keeps the per-element argmax of the
    conditional means.  Exactly sum(samples_per_surface) power measurements
    are taken.

    With trace=True the returned tuple is (result, batches) where batches[ell]
    is the full SampleBatch of stage ell; otherwise measurements are processed
    in chunks and never materialized whole.
    """
    L, n = dims(channel)
    grids = as_grids(grids, L)
    ts = _normalize_t(samples_per_surface, L)
    if rng is None and noise.kind != "noiseless":
        raise ValueError("noisy measurement needs an rng")
    if rng is None:
        rng = np.random.default_rng(0)
    phases = PhaseAssignment.zeros(grids, n)
    stage_powers = []
    ratios = []
    evaluations = 0
    batches = [] if trace else None
    for ell in range(L):
        grid = grids[ell]
        c0, c = stage_coefficients(channel, phases, ell)
        k = grid.num_levels
        sums = np.zeros((n, k))
        counts = np.zeros((n, k), dtype=np.int64)
        kept_idx = [] if trace else None
        kept_pow = [] if trace else None
        remaining = ts[ell]
        while remaining > 0:
            t = min(remaining, _CHUNK)
            remaining -= t
            idx = generate_samples(n, grid, t, rng)
            g = c0 + np.exp(1j * grid.omega * idx) @ c
            powers = received_power(g, params, noise, rng)
            powers = np.atleast_1d(np.asarray(powers, dtype=np.float64))
            for col in range(n):
                counts[col] += np.bincount(idx[:, col], minlength=k)
                sums[col] += np.bincount(idx[:, col], weights=powers, minlength=k)
            evaluations += t
            if trace:
                kept_idx.append(idx)
                kept_pow.append(powers)
        if np.any(counts == 0):
            bad = np.argwhere(counts == 0)[0]
            raise EmptyGroupError(int(bad[0]), int(bad[1]))
        table = CsmTable(sums / counts, counts)
        phases = phases.with_stage(ell, csm_decide(table))
        stage_powers.append(received_power(effective_channel(channel, phases), params))
        ratios.append(_stage_diagnostic(c0, c))
        if trace:
            batches.append(SampleBatch(np.concatenate(kept_idx), np.concatenate(kept_pow)))
    result = BeamformingResult(
        method="csm",
        assignment=phases,
        stage_powers=tuple(stage_powers),
        evaluations=evaluations,
        reflect_to_direct=tuple(ratios),
        element_gains=_element_gains(factors),
    )
    if trace:
        return result, batches
    return result


def exact_csm_small(channel: Channel, grids, factors=None) -> BeamformingResult:
    """Sequential optimizer using exact conditional means.

    Each stage enumerates every joint phase configuration of its surface
    (K^N of them, capped), computes noiseless powers at unit transmit power,
    and applies the same per-element argmax as the sampled scheme.  Decisions
    are invariant to the power scale.
    """
    L, n = dims(channel)
    grids = as_grids(grids, L)
    params = RadioParams(transmit_power_w=1.0)
    phases = PhaseAssignment.zeros(grids, n)
    stage_powers = []
    ratios = []
    evaluations = 0
    for ell in range(L):
        grid = grids[ell]
        k = grid.num_levels
        total = k**n
        if total > MAX_EXACT_CONFIGS:
            raise ValueError(
                f"exact enumeration needs {total} configurations for surface "
                f"{ell + 1}, above the {MAX_EXACT_CONFIGS} cap"
            )
        c0, c = stage_coefficients(channel, phases, ell)
        # decode 0..K^N-1 into mixed-radix index rows, most significant first
        codes = np.arange(total)
        idx = (codes[:, None] // (k ** np.arange(n - 1, -1, -1))[None, :]) % k
        g = c0 + np.exp(1j * grid.omega * idx) @ c
        powers = received_power(g, params)
        table = conditional_sample_mean(SampleBatch(idx, powers), grid)
        phases = phases.with_stage(ell, csm_decide(table))
        evaluations += total
        stage_powers.append(received_power(effective_channel(channel, phases), params))
        ratios.append(_stage_diagnostic(c0, c))
    return BeamformingResult(
        method="exact_csm",
        assignment=phases,
        stage_powers=tuple(stage_powers),
        evaluations=evaluations,
        reflect_to_direct=tuple(ratios),
        element_gains=_element_gains(factors),
    )


def sequential_cpp_oracle(channel: Channel, grids, params: Optional[RadioParams] = None,
                          factors=None) -> BeamformingResult:
    """Perfect-knowledge reference: per stage, project the ideal aligning
    phase of every element onto the grid.

    Takes no power measurements (evaluations = 0).  The ideal phase of
    element n at stage ell is angle(c0) - angle(c_n) with the current earlier
    decisions applied; elements with a zero path coefficient stay at index 0.
    """
    L, n = dims(channel)
    grids = as_grids(grids, L)
    params = params or RadioParams()
    phases = PhaseAssignment.zeros(grids, n)
    stage_powers = []
    ratios = []
    for ell in range(L):
        c0, c = stage_coefficients(channel, phases, ell)
        phases = phases.with_stage(ell, _cpp_decide_vector(c0, c, grids[ell]))
        stage_powers.append(received_power(effective_channel(channel, phases), params))
        ratios.append(_stage_diagnostic(c0, c))
    return BeamformingResult(
        method="cpp",
        assignment=phases,
        stage_powers=tuple(stage_powers),
        evaluations=0,
        reflect_to_direct=tuple(ratios),
        element_gains=_element_gains(factors),
    )


def random_beamforming(channel: Channel, grids, budget: int,
                       params: RadioParams, noise: NoiseModel = NOISELESS,
                       rng=None) -> BeamformingResult:
    """Joint random search: draw `budget` full assignments, keep the best
    measured one.  Ties keep the earliest draw."""
    if budget < 1:
        raise ValueError("budget must be positive")
    L, n = dims(channel)
    grids = as_grids(grids, L)
    if rng is None:
        raise ValueError("random beamforming needs an rng")
    best_power = -1.0
    best_idx = None
    done = 0
    while done < budget:
        b = min(budget - done, _CHUNK)
        done += b
        draws = [generate_samples(n, grids[ell], b, rng) for ell in range(L)]
        g = effective_batch(channel, grids, draws)
        powers = np.atleast_1d(np.asarray(
            received_power(g, params, noise, rng), dtype=np.float64))
        top = int(np.argmax(powers))
        if powers[top] > best_power:
            best_power = float(powers[top])
            best_idx = [d[top].copy() for d in draws]
    assignment = PhaseAssignment(grids, tuple(best_idx))
    final = received_power(effective_channel(channel, assignment), params)
    return BeamformingResult(
        method="random",
        assignment=assignment,
        stage_powers=(final,),
        evaluations=budget,
    )


def zero_phase_baseline(channel: Channel, params: RadioParams,
                        grids=None) -> BeamformingResult:
    """All phase shifts zero; the effective channel is the plain sum of path
    coefficients.  The grid only labels the result (index 0 exists in every
    grid), so it defaults to the smallest one."""
    L, n = dims(channel)
    grids = as_grids(grids if grids is not None else 2, L)
    assignment = PhaseAssignment.zeros(grids, n)
    final = received_power(effective_channel(channel, assignment), params)
    return BeamformingResult(
        method="zero",
        assignment=assignment,
        stage_powers=(final,),
        evaluations=0,
    )


def virtual_single_irs(channel: Channel, grids, total_samples: int,
                       params: RadioParams, noise: NoiseModel = NOISELESS,
                       rng=None) -> BeamformingResult:
    """Single-stage baseline that ignores the cascade structure.

    All L surfaces are treated as one long surface of L * N elements: every
    probe draws all phases jointly, and one conditional-sample-mean table over
    the L * N virtual elements decides everything at once.  Cross-surface
    product terms do not separate under joint uniform sampling, so this
    baseline only aligns what a single reflection can see.  Requires equal
    grids.  For L = 1 it coincides with the sequential scheme.
    """
    L, n = dims(channel)
    grids = as_grids(grids, L)
    if any(g.num_levels != grids[0].num_levels for g in grids):
        raise ValueError("virtual single-surface baseline needs equal grids")
    grid = grids[0]
    if total_samples < 1:
        raise ValueError("need at least one sample")
    if rng is None:
        rng = np.random.default_rng(0)
    k = grid.num_levels
    wide = L * n
    sums = np.zeros((wide, k))
    counts = np.zeros((wide, k), dtype=np.int64)
    remaining = total_samples
    while remaining > 0:
        t = min(remaining, _CHUNK)
        remaining -= t
        idx = generate_samples(wide, grid, t, rng)
        draws = [idx[:, ell * n:(ell + 1) * n] for ell in range(L)]
        g = effective_batch(channel, grids, draws)
        powers = np.atleast_1d(np.asarray(
            received_power(g, params, noise, rng), dtype=np.float64))
        for col in range(wide):
            counts[col] += np.bincount(idx[:, col], minlength=k)
            sums[col] += np.bincount(idx[:, col], weights=powers, minlength=k)
    if np.any(counts == 0):
        bad = np.argwhere(counts == 0)[0]
        raise EmptyGroupError(int(bad[0]), int(bad[1]))
    decisions = csm_decide(CsmTable(sums / counts, counts))
    assignment = PhaseAssignment(
        grids, tuple(decisions[ell * n:(ell + 1) * n] for ell in range(L)))
    final = received_power(effective_channel(channel, assignment), params)
    return BeamformingResult(
        method="virtual_single",
        assignment=assignment,
        stage_powers=(final,),
        evaluations=total_samples,
    )


def exhaustive_search(channel: Channel, grids, params: Optional[RadioParams] = None):
    """Global optimum by full enumeration of all K^(L*N) joint assignments.

    Only feasible for tiny systems; used as a reference ceiling.  Returns
    (assignment, noiseless power).
    """
    L, n = dims(channel)
    grids = as_grids(grids, L)
    params = params or RadioParams()
    total = math.prod(g.num_levels**n for g in grids)
    if total > MAX_EXACT_CONFIGS:
        raise ValueError(f"{total} joint assignments exceed the enumeration cap")
    best = (-1.0, None)
    per_surface = [list(itertools.product(range(g.num_levels), repeat=n)) for g in grids]
    for combo in itertools.product(*per_surface):
        assignment = PhaseAssignment(grids, tuple(np.asarray(c, dtype=np.int64) for c in combo))
        p = received_power(effective_channel(channel, assignment), params)
        if p > best[0]:
            best = (p, assignment)
    return best[1], best[0]
