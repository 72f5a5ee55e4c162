"""Sharded baseband dataflow: chain-group ingest, sub-band exchange,
per-processor detection/precoding, and interconnect rate accounting.

The base station model splits N transceiver chains across P processors.
Uplink samples arrive chain-sharded (each processor sees the full band
for its chain group); before estimation the shards are exchanged into
sub-band shards (each processor sees all chains on its slice of the
band), processed independently, and the outputs concatenated.  The
exchange is a lossless re-tiling, so distributed processing is
arithmetically identical to the centralized path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import chanest, mimo
from .errors import ConfigurationError


def _bounds_from_sizes(total: int, parts: int, align: int = 1) -> tuple[int, ...]:
    if total % align:
        raise ConfigurationError(f"{total} is not a multiple of the alignment {align}")
    blocks = total // align
    if parts > blocks:
        raise ConfigurationError(f"cannot split {blocks} blocks across {parts} processors")
    base, extra = divmod(blocks, parts)
    bounds = [0]
    for p in range(parts):
        bounds.append(bounds[-1] + (base + (1 if p < extra else 0)) * align)
    return tuple(bounds)


def _validate_bounds(bounds, total: int, name: str):
    b = tuple(int(x) for x in bounds)
    if b[0] != 0 or b[-1] != total or any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
        raise ConfigurationError(f"{name} bounds {bounds} do not partition [0, {total})")
    return b


@dataclass(frozen=True)
class PartitionPlan:
    """How chains and sub-bands are split across processors.

    ``chain_bounds`` and ``subband_bounds`` are cumulative boundaries of
    length P+1 describing contiguous, exact partitions.
    """

    n_chains: int
    n_subcarriers: int
    chain_bounds: tuple[int, ...]
    subband_bounds: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "chain_bounds", _validate_bounds(self.chain_bounds, self.n_chains, "chain")
        )
        object.__setattr__(
            self,
            "subband_bounds",
            _validate_bounds(self.subband_bounds, self.n_subcarriers, "sub-band"),
        )
        if len(self.chain_bounds) != len(self.subband_bounds):
            raise ConfigurationError("chain and sub-band partitions must have the same P")

    @property
    def processors(self) -> int:
        return len(self.chain_bounds) - 1

    def chain_slice(self, p: int) -> slice:
        return slice(self.chain_bounds[p], self.chain_bounds[p + 1])

    def subband_slice(self, p: int) -> slice:
        return slice(self.subband_bounds[p], self.subband_bounds[p + 1])


def plan_partition(
    n_chains: int,
    n_subcarriers: int,
    processors: int,
    subband_align: int = 1,
    chain_bounds=None,
    subband_bounds=None,
) -> PartitionPlan:
    """Even partition of chains and sub-bands across ``processors``.

    ``subband_align`` keeps every sub-band boundary a multiple of the
    pilot sub-band size so each processor can estimate independently.
    Explicit boundary tuples override the even split.
    """
    if processors < 1:
        raise ConfigurationError("need at least one processor")
    if chain_bounds is None:
        chain_bounds = _bounds_from_sizes(n_chains, processors, 1)
    if subband_bounds is None:
        subband_bounds = _bounds_from_sizes(n_subcarriers, processors, subband_align)
    else:
        for b in subband_bounds:
            if b % subband_align:
                raise ConfigurationError(
                    f"sub-band boundary {b} not aligned to pilot sub-bands of {subband_align}"
                )
    return PartitionPlan(n_chains, n_subcarriers, tuple(chain_bounds), tuple(subband_bounds))


def partition_uplink(grid: np.ndarray, plan: PartitionPlan) -> list[np.ndarray]:
    """Split a (subcarrier, ..., chain) grid into per-processor chain groups."""
    arr = np.asarray(grid)
    if arr.shape[0] != plan.n_subcarriers or arr.shape[-1] != plan.n_chains:
        raise ConfigurationError(f"grid {arr.shape} does not match plan")
    return [arr[..., plan.chain_slice(p)] for p in range(plan.processors)]


def reassemble_chains(shards: list[np.ndarray], plan: PartitionPlan) -> np.ndarray:
    if len(shards) != plan.processors:
        raise ConfigurationError("shard count does not match plan")
    return np.concatenate(shards, axis=-1)


def exchange(shards: list[np.ndarray], plan: PartitionPlan) -> list[np.ndarray]:
    """Re-tile chain-group shards into all-chain sub-band shards.

    Processor q ends up with every chain restricted to its sub-band
    rows; the (p -> q) message is shard p's rows for q's sub-band.
    """
    if len(shards) != plan.processors:
        raise ConfigurationError("shard count does not match plan")
    return [
        np.concatenate([s[plan.subband_slice(q)] for s in shards], axis=-1)
        for q in range(plan.processors)
    ]


def inverse_exchange(shards: list[np.ndarray], plan: PartitionPlan) -> list[np.ndarray]:
    """Re-tile sub-band shards back into full-band chain-group shards."""
    if len(shards) != plan.processors:
        raise ConfigurationError("shard count does not match plan")
    return [
        np.concatenate([s[..., plan.chain_slice(p)] for s in shards], axis=0)
        for p in range(plan.processors)
    ]


def _detect_block(
    block: np.ndarray,
    x_pilot_block: np.ndarray,
    n_users: int,
    scheme: str,
    noise_var: float | None,
    pilot_symbol: int,
    expansion: str,
) -> np.ndarray:
    """Estimate and detect one contiguous sub-band block (all chains).

    ``block`` is (subcarriers, symbols, chains) holding the pilot symbol
    and the data symbols; returns detected (subcarriers, data symbols, users).
    """
    pmap = chanest.allocate_pilots(n_users, block.shape[0])
    est = chanest.ls_estimate_ul(block[:, pilot_symbol, :], x_pilot_block, pmap, expansion)
    w = mimo.detection_matrix(est, scheme, noise_var)
    data = np.delete(block, pilot_symbol, axis=1)
    return mimo.detect(w, data)


def process_centralized(
    grid: np.ndarray,
    x_pilot: np.ndarray,
    scheme: str,
    noise_var: float | None = None,
    pilot_symbol: int = 0,
    expansion: str = "hold",
) -> np.ndarray:
    """Unsharded reference path: estimate and detect the whole band."""
    x = np.asarray(x_pilot)
    return _detect_block(np.asarray(grid), x, x.shape[1], scheme, noise_var,
                         pilot_symbol, expansion)


def process_distributed(
    shards: list[np.ndarray],
    plan: PartitionPlan,
    x_pilot: np.ndarray,
    scheme: str,
    noise_var: float | None = None,
    pilot_symbol: int = 0,
    expansion: str = "hold",
) -> np.ndarray:
    """Exchange chain-group shards and run estimation/detection per processor.

    Sub-band boundaries must be aligned to the pilot sub-band size so
    each processor sees whole pilot sub-bands.  The concatenated output
    matches :func:`process_centralized` exactly (identical per-subcarrier
    arithmetic).
    """
    x = np.asarray(x_pilot)
    n_users = x.shape[1]
    for b in plan.subband_bounds:
        if b % n_users:
            raise ConfigurationError(
                f"sub-band boundary {b} is not aligned to pilot sub-bands of size {n_users}"
            )
    band_shards = exchange(shards, plan)
    out = []
    for q, block in enumerate(band_shards):
        rows = plan.subband_slice(q)
        x_block = x[rows.start // n_users : rows.stop // n_users]
        out.append(
            _detect_block(block, x_block, n_users, scheme, noise_var, pilot_symbol, expansion)
        )
    return np.concatenate(out, axis=0)


def process_distributed_dl(
    x_grid: np.ndarray,
    plan: PartitionPlan,
    transforms,
) -> list[np.ndarray]:
    """Per-processor precoding followed by the downlink exchange.

    Each processor precodes its sub-band across all chains, then shards
    are re-tiled chain-major for the radio units.  Concatenating the
    returned shards along the chain axis reproduces the centralized
    precoder output exactly.
    """
    f = transforms.matrices if isinstance(transforms, mimo.LinearTransform) else np.asarray(transforms)
    x = np.asarray(x_grid)
    if f.shape[0] != plan.n_subcarriers or x.shape[0] != plan.n_subcarriers:
        raise ConfigurationError("transforms/grid do not cover the planned band")
    band_shards = [
        mimo.precode(f[plan.subband_slice(q)], x[plan.subband_slice(q)])
        for q in range(plan.processors)
    ]
    return inverse_exchange(band_shards, plan)


# ---------------------------------------------------------------------------
# Interconnect rate accounting.


@dataclass(frozen=True)
class RateBudget:
    """Digital sample volume per chain and processing window."""

    samples_per_window: int        # complex samples per chain per window
    window_s: float = 0.5e-3
    sample_width_bits: int = 16
    iq_factor: int = 2
    chains: int = 256

    def __post_init__(self):
        if min(self.samples_per_window, self.sample_width_bits,
               self.iq_factor, self.chains) <= 0 or self.window_s <= 0:
            raise ConfigurationError("rate budget fields must be positive")


def default_rate_budget(n_sc: int = 3168, symbols_per_window: int = 28,
                        chains: int = 256) -> RateBudget:
    """Budget for the prototype dimensioning: N_sc subcarriers over a
    half sub-frame (28 symbols / 0.5 ms), 16-bit I/Q words."""
    return RateBudget(samples_per_window=n_sc * symbols_per_window, chains=chains)


def aggregate_sample_rate(budget: RateBudget) -> float:
    """Total digital sample throughput in bits/s across all chains."""
    per_chain = budget.samples_per_window / budget.window_s
    return per_chain * budget.sample_width_bits * budget.iq_factor * budget.chains


def group_interaction_rate(budget: RateBudget, chains_per_group: int = 16) -> float:
    """Sample throughput of one radio group (16 chains = 4 quad-chain radios)."""
    per_chain = budget.samples_per_window / budget.window_s
    return per_chain * budget.sample_width_bits * budget.iq_factor * chains_per_group


def exchange_report(
    plan: PartitionPlan,
    symbols_per_window: int,
    window_s: float = 0.5e-3,
    sample_width_bits: int = 16,
    iq_factor: int = 2,
    link_capacity_bps: float = 100e9,
) -> dict:
    """Per-link byte volume and utilization for one exchange window.

    The (p -> q) message carries p's chain group restricted to q's
    sub-band rows for every symbol in the window.  Utilization compares
    the implied bit rate against ``link_capacity_bps``.
    """
    links = []
    total_bytes = 0
    for p in range(plan.processors):
        chains = plan.chain_bounds[p + 1] - plan.chain_bounds[p]
        for q in range(plan.processors):
            if p == q:
                continue
            rows = plan.subband_bounds[q + 1] - plan.subband_bounds[q]
            bits = chains * rows * symbols_per_window * sample_width_bits * iq_factor
            rate = bits / window_s
            links.append(
                {
                    "src": p,
                    "dst": q,
                    "bytes": bits // 8,
                    "bits_per_s": rate,
                    "capacity_bps": link_capacity_bps,
                    "utilization": rate / link_capacity_bps,
                }
            )
            total_bytes += bits // 8
    return {
        "processors": plan.processors,
        "window_s": window_s,
        "total_bytes": total_bytes,
        "links": links,
    }
