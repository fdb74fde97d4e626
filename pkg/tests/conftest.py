"""Shared test helpers: brute-force oracles kept deliberately dumb."""

import sys

import numpy as np
import pytest

from blindbeam import (
    CascadedChannelTensor,
    LinkChannelGraph,
    PhaseAssignment,
    as_grids,
)


def brute_force_gain(tensor: CascadedChannelTensor, phases: PhaseAssignment) -> complex:
    """Path-sum oracle: explicit loop over every index tuple."""
    t = tensor.entries
    total = 0.0 + 0.0j
    for idx in np.ndindex(*t.shape):
        phase = 0.0
        for ell, n in enumerate(idx):
            if n > 0:
                phase += phases.phase_values(ell)[n - 1]
        total += t[idx] * np.exp(1j * phase)
    return complex(total)


def random_tensor(rng, num_surfaces: int, num_elements: int) -> CascadedChannelTensor:
    shape = (num_elements + 1,) * num_surfaces
    entries = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return CascadedChannelTensor(entries)


def random_graph(rng, num_surfaces: int, num_elements: int,
                 edge_prob: float = 0.8) -> LinkChannelGraph:
    """Random link graph; each optional hop present with edge_prob."""

    def vec():
        return rng.standard_normal(num_elements) + 1j * rng.standard_normal(num_elements)

    def mat():
        return (rng.standard_normal((num_elements, num_elements))
                + 1j * rng.standard_normal((num_elements, num_elements)))

    tx_to_irs = tuple(vec() if rng.random() < edge_prob else np.zeros(num_elements, complex)
                      for _ in range(num_surfaces))
    irs_to_rx = tuple(vec() if rng.random() < edge_prob else np.zeros(num_elements, complex)
                      for _ in range(num_surfaces))
    irs_to_irs = {}
    for i in range(num_surfaces - 1):
        for j in range(i + 1, num_surfaces):
            if rng.random() < edge_prob:
                irs_to_irs[(i, j)] = mat()
    direct = complex(rng.standard_normal() + 1j * rng.standard_normal())
    return LinkChannelGraph(tx_to_irs, irs_to_rx, irs_to_irs, direct)


def random_assignment(rng, grids, num_elements: int) -> PhaseAssignment:
    grids = tuple(grids)
    return PhaseAssignment(
        grids,
        tuple(rng.integers(0, g.num_levels, size=num_elements) for g in grids),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_VERDICTS: list = []


def pass_line(tag: str, ok: bool, detail: str = ""):
    """One verdict line per acceptance criterion.

    Collected and replayed in the terminal summary, which pytest renders
    outside capture, so the verdicts appear for passing and failing criteria
    alike."""
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    line = f"[{tag}] {status}{suffix}"
    _VERDICTS.append(line)
    print(f"\n{line}")


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
