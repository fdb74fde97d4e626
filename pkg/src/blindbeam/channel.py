"""Cascaded channel models for a transmitter, L reflecting surfaces, and a receiver.

Two representations are supported:

* ``CascadedChannelTensor`` stores the aggregate coefficient h[n_1, ..., n_L]
  for every tuple in [0:N]^L, where index 0 means "surface skipped" and index
  n >= 1 means the path bounces off element n of that surface.  The effective
  scalar channel under a phase assignment theta is

      g(theta) = sum_h h[n_1..n_L] * exp(j * sum_{ell: n_ell>0} theta_{n_ell}).

* ``LinkChannelGraph`` stores the individual node-to-node links (transmitter
  to elements, elements to elements of a later surface, elements to receiver,
  plus the direct scalar).  Paths visit surfaces in strictly increasing order;
  expanding all path products reproduces the tensor exactly.

Both forms answer the same queries through the dispatch helpers below:
``effective_channel``, ``stage_coefficients``, ``direct_gain``, ``dims``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .phases import PhaseAssignment

# Dense tensors get big fast: (N+1)^L complex entries.
MAX_TENSOR_ENTRIES = 10**7


@dataclass(frozen=True)
class RadioParams:
    """Transmit power and noise power, both in watts."""

    transmit_power_w: float = 1.0
    noise_power_w: float = 10.0 ** (-12.8)

    def __post_init__(self):
        if not (self.transmit_power_w > 0):
            raise ValueError("transmit power must be positive")
        if not (self.noise_power_w >= 0):
            raise ValueError("noise power must be nonnegative")


@dataclass(frozen=True)
class NoiseModel:
    """How a power measurement is taken.

    kind = "noiseless":  |g|^2 * P exactly.
    kind = "one_draw":   |g*sqrt(P) + z|^2 for one z ~ CN(0, sigma^2).
    kind = "averaged":   mean of `draws` independent one-draw measurements.
    """

    kind: str = "noiseless"
    draws: int = 1

    def __post_init__(self):
        if self.kind not in ("noiseless", "one_draw", "averaged"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "averaged" and self.draws < 1:
            raise ValueError("averaged noise model needs draws >= 1")


NOISELESS = NoiseModel("noiseless")
ONE_DRAW = NoiseModel("one_draw")


def averaged(draws: int) -> NoiseModel:
    return NoiseModel("averaged", draws)


def parse_noise_model(text: str) -> NoiseModel:
    """Parse "noiseless", "one_draw", or "averaged:<M>"."""
    t = text.strip().lower()
    if t in ("noiseless", "one_draw"):
        return NoiseModel(t)
    if t.startswith("averaged:"):
        return averaged(int(t.split(":", 1)[1]))
    if t == "averaged":
        raise ValueError("averaged noise model needs a draw count, e.g. averaged:100")
    raise ValueError(f"unknown noise model {text!r}")


@dataclass(frozen=True)
class CascadedChannelTensor:
    """Aggregate path coefficients over [0:N]^L.

    entries[n_1, ..., n_L]: n_ell = 0 skips surface ell, n_ell >= 1 reflects
    off element n_ell.  entries[0, ..., 0] is the direct channel.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.complex128, copy=True)
        if a.ndim < 1:
            raise ValueError("tensor must have at least one axis")
        shape = a.shape
        if any(s != shape[0] for s in shape) or shape[0] < 2:
            raise ValueError(f"tensor axes must all equal N+1 >= 2, got shape {shape}")
        if a.size > MAX_TENSOR_ENTRIES:
            raise ValueError(
                f"tensor with {a.size} entries exceeds the {MAX_TENSOR_ENTRIES} cap; "
                "use the link-graph form for large systems"
            )
        if not np.all(np.isfinite(a.view(np.float64))):
            raise ValueError("tensor entries must be finite")
        a = np.ascontiguousarray(a)
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)

    @property
    def num_surfaces(self) -> int:
        return self.entries.ndim

    @property
    def num_elements(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def direct(self) -> complex:
        return complex(self.entries[(0,) * self.num_surfaces])


def _as_complex_vector(v, n: int, what: str) -> np.ndarray:
    a = np.array(v, dtype=np.complex128, copy=True)
    if a.shape != (n,):
        raise ValueError(f"{what} must have shape ({n},), got {a.shape}")
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LinkChannelGraph:
    """Individual links of the cascaded system.

    tx_to_irs[ell][n-1]      : transmitter -> element n of surface ell
    irs_to_rx[ell][n-1]      : element n of surface ell -> receiver
    irs_to_irs[(i, j)][m-1, n-1] : element m of surface i -> element n of
                                   surface j, defined only for i < j
    tx_to_rx                 : direct scalar channel
    """

    tx_to_irs: tuple[np.ndarray, ...]
    irs_to_rx: tuple[np.ndarray, ...]
    irs_to_irs: dict = field(default_factory=dict)
    tx_to_rx: complex = 0.0 + 0.0j

    def __post_init__(self):
        tx = tuple(np.asarray(v, dtype=np.complex128) for v in self.tx_to_irs)
        rx = tuple(np.asarray(v, dtype=np.complex128) for v in self.irs_to_rx)
        if not tx or len(tx) != len(rx):
            raise ValueError("need matching tx_to_irs and irs_to_rx vectors, one per surface")
        n = tx[0].size
        if n < 1:
            raise ValueError("surfaces must have at least one element")
        tx = tuple(_as_complex_vector(v, n, f"tx_to_irs[{i}]") for i, v in enumerate(tx))
        rx = tuple(_as_complex_vector(v, n, f"irs_to_rx[{i}]") for i, v in enumerate(rx))
        L = len(tx)
        hops = {}
        for key, mat in dict(self.irs_to_irs).items():
            i, j = key
            if not (0 <= i < j < L):
                raise ValueError(f"irs_to_irs key {key} must satisfy 0 <= i < j < L={L}")
            m = np.array(mat, dtype=np.complex128, copy=True)
            if m.shape != (n, n):
                raise ValueError(f"irs_to_irs[{key}] must have shape ({n}, {n})")
            m.flags.writeable = False
            hops[(int(i), int(j))] = m
        for v in list(tx) + list(rx) + list(hops.values()):
            if not np.all(np.isfinite(v.view(np.float64))):
                raise ValueError("link entries must be finite")
        object.__setattr__(self, "tx_to_irs", tx)
        object.__setattr__(self, "irs_to_rx", rx)
        object.__setattr__(self, "irs_to_irs", hops)
        object.__setattr__(self, "tx_to_rx", complex(self.tx_to_rx))

    @property
    def num_surfaces(self) -> int:
        return len(self.tx_to_irs)

    @property
    def num_elements(self) -> int:
        return self.tx_to_irs[0].size

    def hop(self, i: int, j: int) -> np.ndarray:
        """Surface i -> surface j coupling matrix, zeros if the link is absent."""
        m = self.irs_to_irs.get((i, j))
        if m is None:
            n = self.num_elements
            return np.zeros((n, n), dtype=np.complex128)
        return m


Channel = Union[CascadedChannelTensor, LinkChannelGraph]


def dims(channel: Channel) -> tuple[int, int]:
    """(number of surfaces L, elements per surface N)."""
    return channel.num_surfaces, channel.num_elements


def direct_gain(channel: Channel) -> complex:
    if isinstance(channel, CascadedChannelTensor):
        return channel.direct
    return complex(channel.tx_to_rx)


def _check_assignment(channel: Channel, phases: PhaseAssignment):
    L, n = dims(channel)
    if phases.num_surfaces != L or phases.num_elements != n:
        raise ValueError(
            f"assignment for {phases.num_surfaces} surfaces x {phases.num_elements} "
            f"elements does not match channel with {L} surfaces x {n} elements"
        )


def eval_effective_dense(tensor: CascadedChannelTensor, phases: PhaseAssignment) -> complex:
    """Effective scalar channel of a dense tensor under a phase assignment."""
    _check_assignment(tensor, phases)
    g = tensor.entries
    for ell in range(tensor.num_surfaces):
        # contract axis 0 repeatedly; axis ell of the original is axis 0 now
        g = np.tensordot(phases.factors_with_skip(ell), g, axes=(0, 0))
    return complex(g)


def eval_effective_chain(graph: LinkChannelGraph, phases: PhaseAssignment) -> complex:
    """Effective scalar channel of a link graph under a phase assignment.

    Forward pass over surfaces in order; w[i] is the field re-radiated by
    surface i with its phase shifts applied.
    """
    _check_assignment(graph, phases)
    g = complex(graph.tx_to_rx)
    w = []
    for ell in range(graph.num_surfaces):
        incoming = graph.tx_to_irs[ell].astype(np.complex128, copy=True)
        for i in range(ell):
            m = graph.irs_to_irs.get((i, ell))
            if m is not None:
                incoming += w[i] @ m
        w_ell = phases.factors(ell) * incoming
        w.append(w_ell)
        g += complex(w_ell @ graph.irs_to_rx[ell])
    return g


def effective_channel(channel: Channel, phases: PhaseAssignment) -> complex:
    if isinstance(channel, CascadedChannelTensor):
        return eval_effective_dense(channel, phases)
    return eval_effective_chain(channel, phases)


def _stage_coefficients_dense(tensor, phases, ell):
    g = tensor.entries
    L = tensor.num_surfaces
    # contract highest remaining axis first so lower axis positions stay put
    for i in range(L - 1, -1, -1):
        if i == ell:
            continue
        g = np.tensordot(g, phases.factors_with_skip(i), axes=(i, 0))
    return complex(g[0]), np.ascontiguousarray(g[1:])


def _stage_coefficients_chain(graph, phases, ell):
    L = graph.num_surfaces
    # forward pass with surface ell absorbing (its re-radiated field zeroed)
    c0 = complex(graph.tx_to_rx)
    w = []
    incoming_ell = None
    for i in range(L):
        incoming = graph.tx_to_irs[i].astype(np.complex128, copy=True)
        for j in range(i):
            m = graph.irs_to_irs.get((j, i))
            if m is not None:
                incoming += w[j] @ m
        if i == ell:
            incoming_ell = incoming
            w.append(np.zeros(graph.num_elements, dtype=np.complex128))
        else:
            w_i = phases.factors(i) * incoming
            w.append(w_i)
            c0 += complex(w_i @ graph.irs_to_rx[i])
    # backward pass from the receiver through the later surfaces
    b = [None] * L
    for i in range(L - 1, ell - 1, -1):
        out = graph.irs_to_rx[i].astype(np.complex128, copy=True)
        for j in range(i + 1, L):
            m = graph.irs_to_irs.get((i, j))
            if m is not None:
                out += m @ (phases.factors(j) * b[j])
        b[i] = out
    return c0, incoming_ell * b[ell]


def stage_coefficients(channel: Channel, phases: PhaseAssignment, ell: int):
    """Linear decomposition of g in the phases of surface ell.

    Returns (c0, c) with c of shape (N,) such that, holding every other
    surface at the given assignment,

        g(theta_ell) = c0 + sum_n c[n-1] * exp(j * theta_{n}).

    c0 collects every path that skips surface ell; c[n-1] collects the paths
    through its element n, with the other surfaces' phases already applied.
    """
    _check_assignment(channel, phases)
    L = channel.num_surfaces
    if not (0 <= ell < L):
        raise ValueError(f"surface index {ell} out of range for L={L}")
    if isinstance(channel, CascadedChannelTensor):
        return _stage_coefficients_dense(channel, phases, ell)
    return _stage_coefficients_chain(channel, phases, ell)


def effective_batch(channel: Channel, grids, index_batches) -> np.ndarray:
    """Effective channel for a batch of joint assignments.

    index_batches: sequence of (B, N) integer arrays, one per surface.
    Returns a complex vector of length B.
    """
    L, n = dims(channel)
    if len(index_batches) != L:
        raise ValueError(f"need {L} index batches, got {len(index_batches)}")
    factors = [np.exp(1j * grids[ell].omega * np.asarray(index_batches[ell]))
               for ell in range(L)]
    b = factors[0].shape[0]
    for ell, f in enumerate(factors):
        if f.shape != (b, n):
            raise ValueError(f"index batch {ell} must have shape ({b}, {n})")
    if isinstance(channel, CascadedChannelTensor):
        g = np.broadcast_to(channel.entries, (b,) + channel.entries.shape)
        for ell in range(L):
            skip = np.concatenate([np.ones((b, 1), dtype=np.complex128), factors[ell]], axis=1)
            # contract the first tensor axis (axis 1 of g) against the batch
            g = np.einsum("bk,bk...->b...", skip, g)
        return np.ascontiguousarray(g)
    out = np.full(b, complex(channel.tx_to_rx), dtype=np.complex128)
    w = []
    for ell in range(L):
        incoming = np.broadcast_to(channel.tx_to_irs[ell], (b, n)).copy()
        for i in range(ell):
            m = channel.irs_to_irs.get((i, ell))
            if m is not None:
                incoming += w[i] @ m
        w_ell = factors[ell] * incoming
        w.append(w_ell)
        out += w_ell @ channel.irs_to_rx[ell]
    return out


def expand_links_to_tensor(graph: LinkChannelGraph) -> CascadedChannelTensor:
    """Expand a link graph into the dense path-product tensor.

    Entry (n_1, ..., n_L) with nonzero positions p_1 < ... < p_r is the product

        tx_to_irs[p_1][n] * hop(p_1, p_2)[.,.] * ... * irs_to_rx[p_r][n],

    the all-zero entry being the direct channel.  Absent hop links count as 0.
    """
    L, n = graph.num_surfaces, graph.num_elements
    if (n + 1) ** L > MAX_TENSOR_ENTRIES:
        raise ValueError(
            f"expanding would create {(n + 1) ** L} entries, above the "
            f"{MAX_TENSOR_ENTRIES} cap"
        )
    shape = (n + 1,) * L
    out = np.empty(shape, dtype=np.complex128)
    for idx in np.ndindex(shape):
        stops = [(ell, k) for ell, k in enumerate(idx) if k > 0]
        if not stops:
            out[idx] = graph.tx_to_rx
            continue
        first_ell, first_k = stops[0]
        amp = graph.tx_to_irs[first_ell][first_k - 1]
        for (i, m), (j, k) in zip(stops, stops[1:]):
            hop = graph.irs_to_irs.get((i, j))
            if hop is None:
                amp = 0.0 + 0.0j
                break
            amp = amp * hop[m - 1, k - 1]
        else:
            last_ell, last_k = stops[-1]
            amp = amp * graph.irs_to_rx[last_ell][last_k - 1]
        out[idx] = amp
    return CascadedChannelTensor(out)


def received_power(g, params: RadioParams, noise: NoiseModel = NOISELESS, rng=None):
    """Received power for effective channel g (scalar or array).

    Noiseless mode returns |g|^2 * P.  The other modes add circularly
    symmetric complex Gaussian receiver noise of power sigma^2 to the received
    symbol sqrt(P) * g before squaring; "averaged" averages `draws`
    independent measurements.
    """
    g = np.asarray(g, dtype=np.complex128)
    p = params.transmit_power_w
    if noise.kind == "noiseless":
        out = (g.real**2 + g.imag**2) * p
        return float(out) if out.ndim == 0 else out
    if rng is None:
        raise ValueError(f"noise model {noise.kind!r} needs an rng")
    m = 1 if noise.kind == "one_draw" else noise.draws
    scale = math.sqrt(params.noise_power_w / 2.0)
    shape = (m,) + g.shape
    z = rng.normal(0.0, scale, size=shape) + 1j * rng.normal(0.0, scale, size=shape)
    y = math.sqrt(p) * g + z
    out = np.mean(y.real**2 + y.imag**2, axis=0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SnrBoost:
    """SNR boost of an assignment.

    mode "ratio": |g(theta)|^2 / |g_direct|^2 (transmit power cancels).
    mode "absolute_power": the direct channel is exactly zero, so the ratio is
    undefined; value is the received signal power |g(theta)|^2 * P in watts.
    """

    value: float
    mode: str


def snr_boost(channel: Channel, phases: PhaseAssignment, params: RadioParams) -> SnrBoost:
    g = effective_channel(channel, phases)
    d = direct_gain(channel)
    if d == 0:
        return SnrBoost(abs(g) ** 2 * params.transmit_power_w, "absolute_power")
    return SnrBoost(abs(g) ** 2 / abs(d) ** 2, "ratio")


# ---------------------------------------------------------------------------
# JSON serialization.  Complex scalars encode as [re, im]; arrays as nested
# lists of such pairs.


def _c2p(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _arr_to_json(a: np.ndarray):
    if a.ndim == 0:
        return _c2p(a[()])
    return [_arr_to_json(x) for x in a]


def _arr_from_json(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim < 1 or a.shape[-1] != 2:
        raise ValueError("complex array JSON must have [re, im] leaves")
    return a[..., 0] + 1j * a[..., 1]


def channel_to_json_dict(channel: Channel) -> dict:
    if isinstance(channel, CascadedChannelTensor):
        return {
            "type": "cascaded_tensor",
            "num_surfaces": channel.num_surfaces,
            "num_elements": channel.num_elements,
            "entries": _arr_to_json(channel.entries),
        }
    return {
        "type": "link_graph",
        "num_surfaces": channel.num_surfaces,
        "num_elements": channel.num_elements,
        "tx_to_rx": _c2p(channel.tx_to_rx),
        "tx_to_irs": [_arr_to_json(v) for v in channel.tx_to_irs],
        "irs_to_rx": [_arr_to_json(v) for v in channel.irs_to_rx],
        "irs_to_irs": [
            {"from": i, "to": j, "matrix": _arr_to_json(m)}
            for (i, j), m in sorted(channel.irs_to_irs.items())
        ],
    }


def channel_from_json_dict(d: dict) -> Channel:
    kind = d.get("type")
    if kind == "cascaded_tensor":
        return CascadedChannelTensor(_arr_from_json(d["entries"]))
    if kind == "link_graph":
        return LinkChannelGraph(
            tx_to_irs=tuple(_arr_from_json(v) for v in d["tx_to_irs"]),
            irs_to_rx=tuple(_arr_from_json(v) for v in d["irs_to_rx"]),
            irs_to_irs={
                (e["from"], e["to"]): _arr_from_json(e["matrix"])
                for e in d.get("irs_to_irs", [])
            },
            tx_to_rx=complex(*d.get("tx_to_rx", [0.0, 0.0])),
        )
    raise ValueError(f"unknown channel JSON type {kind!r}")


def save_channel(path, channel: Channel):
    with open(path, "w") as f:
        json.dump(channel_to_json_dict(channel), f)


def load_channel(path) -> Channel:
    with open(path) as f:
        return channel_from_json_dict(json.load(f))
