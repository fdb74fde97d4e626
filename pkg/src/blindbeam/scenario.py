"""Physical deployment scenarios: geometry, pathloss, and link synthesis.

Nodes are numbered 0 (transmitter), 1..L (reflecting surfaces), L+1
(receiver).  Each surface is a uniform linear array of N elements with
spacing xi; the carrier wavelength is lam.  A line-of-sight link carries a
deterministic distance phase and per-element steering factors; a
non-line-of-sight link carries an i.i.d. CN(0, 1) fading factor per element
pair.  Either way the amplitude follows a log-distance pathloss law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np

from .channel import LinkChannelGraph

DEFAULT_SPACING_M = 0.03
DEFAULT_WAVELENGTH_M = 0.06
DEFAULT_TX_POWER_DBM = 30.0
DEFAULT_NOISE_DBM = -98.0


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def pathloss_amplitude(distance_m: float, los: bool) -> float:
    """Amplitude (not power) attenuation at the given distance.

    Log-distance laws with a 30 dB / exponent-2.2 intercept for
    line-of-sight and 32.6 dB / exponent-3.67 otherwise.
    """
    if not (distance_m > 0):
        raise ValueError(f"distance must be positive, got {distance_m}")
    if los:
        return 10.0 ** (-(30.0 + 22.0 * math.log10(distance_m)) / 20.0)
    return 10.0 ** (-(32.6 + 36.7 * math.log10(distance_m)) / 20.0)


@dataclass(frozen=True)
class Geometry:
    """2-D node coordinates in meters, row i = node i.

    positions has L+2 rows: transmitter, the L surfaces in order, receiver.
    """

    positions: np.ndarray
    spacing_m: float = DEFAULT_SPACING_M
    wavelength_m: float = DEFAULT_WAVELENGTH_M

    def __post_init__(self):
        p = np.array(self.positions, dtype=np.float64, copy=True)
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 2:
            raise ValueError(f"positions must be (L+2, 2) with L >= 0, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("positions must be finite")
        diff = p[:, None, :] - p[None, :, :]
        d = np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(d, np.inf)
        if d.min() <= 0:
            raise ValueError("all pairwise node distances must be positive")
        if not (self.spacing_m > 0 and self.wavelength_m > 0):
            raise ValueError("element spacing and wavelength must be positive")
        p.flags.writeable = False
        object.__setattr__(self, "positions", p)

    @property
    def num_surfaces(self) -> int:
        return self.positions.shape[0] - 2

    @property
    def num_nodes(self) -> int:
        return self.positions.shape[0]

    def distance(self, i: int, j: int) -> float:
        return float(np.hypot(*(self.positions[i] - self.positions[j])))

    def bearing(self, i: int, j: int) -> float:
        """Planar bearing of node j as seen from node i, in [0, 2*pi)."""
        dx, dy = self.positions[j] - self.positions[i]
        return float(math.atan2(dy, dx) % (2.0 * math.pi))


@dataclass(frozen=True)
class AngleTable:
    """Departure and arrival angles for every ordered node pair, in radians.

    aod[i, j]: angle of departure from node i toward node j.
    aoa[i, j]: angle of arrival at node i from node j.
    Only entries involving at least one surface are ever read.
    """

    aod: np.ndarray
    aoa: np.ndarray

    def __post_init__(self):
        aod = np.array(self.aod, dtype=np.float64, copy=True)
        aoa = np.array(self.aoa, dtype=np.float64, copy=True)
        if aod.ndim != 2 or aod.shape[0] != aod.shape[1] or aod.shape != aoa.shape:
            raise ValueError("angle tables must be square and matching")
        if not (np.all(np.isfinite(aod)) and np.all(np.isfinite(aoa))):
            raise ValueError("angles must be finite")
        aod.flags.writeable = False
        aoa.flags.writeable = False
        object.__setattr__(self, "aod", aod)
        object.__setattr__(self, "aoa", aoa)

    @classmethod
    def from_geometry(cls, geometry: Geometry) -> "AngleTable":
        """Planar bearings: departure toward the peer, arrival from the peer."""
        n = geometry.num_nodes
        aod = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i != j:
                    aod[i, j] = geometry.bearing(i, j)
        return cls(aod, aod.copy())

    @classmethod
    def fixed(cls, num_nodes: int, angle_rad: float) -> "AngleTable":
        """Every departure and arrival angle set to the same constant."""
        a = np.full((num_nodes, num_nodes), float(angle_rad))
        return cls(a, a.copy())


@dataclass(frozen=True)
class PropagationMap:
    """Which node pairs are line-of-sight."""

    los: np.ndarray

    def __post_init__(self):
        a = np.array(self.los, dtype=bool, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(a)):
            raise ValueError("adjacency diagonal must be zero")
        a.flags.writeable = False
        object.__setattr__(self, "los", a)

    @property
    def num_nodes(self) -> int:
        return self.los.shape[0]

    def is_los(self, i: int, j: int) -> bool:
        return bool(self.los[i, j])


def forced_chain_edges(num_surfaces: int) -> list[tuple[int, int]]:
    """Edges kept line-of-sight in deployment studies: the relay chain
    tx -> surface 1 -> ... -> surface L -> rx."""
    L = num_surfaces
    return [(ell, ell + 1) for ell in range(L + 1)]


def sample_propagation(eta: float, forced_edges: Sequence[tuple[int, int]],
                       num_nodes: int, rng) -> PropagationMap:
    """Random propagation map: forced edges are always LoS, every other pair
    is LoS independently with probability eta."""
    if not (0.0 <= eta <= 1.0):
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    a = np.zeros((num_nodes, num_nodes), dtype=bool)
    for i in range(num_nodes):
        for j in range(i + 1, num_nodes):
            a[i, j] = a[j, i] = rng.random() < eta
    for i, j in forced_edges:
        a[i, j] = a[j, i] = True
    return PropagationMap(a)


def load_adjacency(path=None) -> PropagationMap:
    """Load a 0/1 adjacency grid from a text file; default is the packaged
    10-node deployment fixture."""
    if path is None:
        ref = resources.files("blindbeam.data").joinpath("adjacency_10node.txt")
        text = ref.read_text()
    else:
        with open(path) as f:
            text = f.read()
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append([int(tok) for tok in line.split()])
    return PropagationMap(np.asarray(rows, dtype=bool))


def steering_vector(num_elements: int, angle_rad: float, spacing_m: float,
                    wavelength_m: float) -> np.ndarray:
    """Per-element phase ramp of a uniform linear array:
    exp(-j * 2*pi * spacing * (n - 1) * cos(angle) / wavelength), n = 1..N."""
    n = np.arange(num_elements)
    return np.exp(-2j * math.pi * spacing_m * n * math.cos(angle_rad) / wavelength_m)


def _check_pair(i: int, j: int, num_nodes: int):
    if not (0 <= i < num_nodes and 0 <= j < num_nodes) or i == j:
        raise ValueError(f"bad node pair ({i}, {j}) for {num_nodes} nodes")


def los_link_channels(geometry: Geometry, angles: AngleTable, i: int, j: int,
                      num_elements: int) -> np.ndarray:
    """Deterministic line-of-sight channel for the ordered pair i -> j.

    The pair must involve at least one surface.  Returns a length-N vector
    when exactly one endpoint is a surface (transmitter -> elements or
    elements -> receiver) and an (N, N) matrix when both are surfaces.  The
    common factor is sqrt(pathloss) * exp(-j * 2*pi * d / wavelength); each
    surface endpoint contributes a steering ramp (departure angle at the
    source surface, arrival angle at the destination surface).
    """
    nn = geometry.num_nodes
    _check_pair(i, j, nn)
    tx_node, rx_node = 0, nn - 1
    if {i, j} == {tx_node, rx_node}:
        raise ValueError("pair must involve at least one surface")
    d = geometry.distance(i, j)
    base = pathloss_amplitude(d, los=True) * np.exp(-2j * math.pi * d / geometry.wavelength_m)
    xi, lam = geometry.spacing_m, geometry.wavelength_m
    if i == tx_node:
        # arrival ramp at surface j, angle of arrival from the transmitter
        return base * steering_vector(num_elements, angles.aoa[j, i], xi, lam)
    if j == rx_node:
        # departure ramp at surface i toward the receiver
        return base * steering_vector(num_elements, angles.aod[i, j], xi, lam)
    dep = steering_vector(num_elements, angles.aod[i, j], xi, lam)
    arr = steering_vector(num_elements, angles.aoa[j, i], xi, lam)
    return base * np.outer(dep, arr)


def nlos_link_channels(geometry: Geometry, i: int, j: int, num_elements: int,
                       rng) -> np.ndarray | complex:
    """Random non-line-of-sight channel for the ordered pair i -> j.

    Entries are sqrt(pathloss) * zeta with zeta ~ CN(0, 1) i.i.d.  Shapes
    follow los_link_channels; the direct transmitter-receiver pair is allowed
    here and yields a scalar.
    """
    nn = geometry.num_nodes
    _check_pair(i, j, nn)
    tx_node, rx_node = 0, nn - 1
    amp = pathloss_amplitude(geometry.distance(i, j), los=False)
    if {i, j} == {tx_node, rx_node}:
        shape = ()
    elif i == tx_node or j == rx_node:
        shape = (num_elements,)
    else:
        shape = (num_elements, num_elements)
    zeta = (rng.normal(0.0, math.sqrt(0.5), size=shape)
            + 1j * rng.normal(0.0, math.sqrt(0.5), size=shape))
    out = amp * zeta
    return complex(out) if shape == () else out


def build_link_graph(geometry: Geometry, angles: AngleTable,
                     propagation: PropagationMap, num_elements: int, rng,
                     zero_nlos: bool = False) -> LinkChannelGraph:
    """Assemble the full link graph of a scenario.

    Links are generated in a fixed order (transmitter -> surfaces by index,
    surface pairs in lexicographic order, surfaces -> receiver by index,
    direct link last) so a given rng seed always yields the same channels.
    With zero_nlos=True, non-line-of-sight links are exactly zero instead of
    random fading.
    """
    L = geometry.num_surfaces
    nn = geometry.num_nodes
    if propagation.num_nodes != nn:
        raise ValueError(
            f"propagation map has {propagation.num_nodes} nodes, geometry has {nn}"
        )
    if L < 1:
        raise ValueError("need at least one surface")
    n = int(num_elements)
    if n < 1:
        raise ValueError("need at least one element per surface")
    rx_node = nn - 1

    def make(i, j, shape):
        if propagation.is_los(i, j):
            return los_link_channels(geometry, angles, i, j, n)
        if zero_nlos:
            return np.zeros(shape, dtype=np.complex128)
        return nlos_link_channels(geometry, i, j, n, rng)

    tx_to_irs = tuple(make(0, ell, (n,)) for ell in range(1, L + 1))
    irs_to_irs = {}
    for i in range(1, L + 1):
        for j in range(i + 1, L + 1):
            irs_to_irs[(i - 1, j - 1)] = make(i, j, (n, n))
    irs_to_rx = tuple(make(ell, rx_node, (n,)) for ell in range(1, L + 1))
    if propagation.is_los(0, rx_node):
        d = geometry.distance(0, rx_node)
        direct = pathloss_amplitude(d, True) * np.exp(-2j * math.pi * d / geometry.wavelength_m)
    elif zero_nlos:
        direct = 0.0 + 0.0j
    else:
        direct = nlos_link_channels(geometry, 0, rx_node, n, rng)
    return LinkChannelGraph(tx_to_irs=tx_to_irs, irs_to_rx=irs_to_rx,
                            irs_to_irs=irs_to_irs, tx_to_rx=direct)


def place_random(num_surfaces: int, rng,
                 tx=(5.0, 5.0), rx=(95.0, 95.0), span: float = 90.0) -> Geometry:
    """Random staircase placement in a square area.

    Surface ell (1-based) is uniform in [5 + span*(ell-1)/L, 5 + span*ell/L]^2,
    so successive surfaces progress from the transmitter corner toward the
    receiver corner.
    """
    L = int(num_surfaces)
    if L < 1:
        raise ValueError("need at least one surface")
    pos = [tx]
    x0 = 5.0
    for ell in range(1, L + 1):
        lo = x0 + span * (ell - 1) / L
        hi = x0 + span * ell / L
        x = rng.uniform(lo, hi)
        y = rng.uniform(lo, hi)
        pos.append((x, y))
    pos.append(rx)
    return Geometry(np.asarray(pos, dtype=float))
