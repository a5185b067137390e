"""One-shot secret-sharing protocol for fleet-wide cost aggregation.

A round proceeds in four steps:

1. Each vehicle evaluates its private cost at every grid speed, applies the
   fleet-wide affine mask ``a*x + b`` (slope a > 0 preserves the argmin) and
   quantises to fixed point.
2. For each grid point it splits the masked value into one share per
   out-neighbor plus one share it keeps; shares are uniform draws except the
   last, which makes the sum exact.
3. Each participant sums its kept share with everything it received and sends
   that single aggregated table to the base station.
4. The base station sums the tables pointwise — all randomness cancels —
   and broadcasts the grid speed with the smallest aggregate.

All protocol arithmetic is exact integer arithmetic on fixed-point values, so
the aggregate the base station sees is bit-identical to the sum of the masked
tables no matter how the shares were drawn.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .emissions import SpeedGrid, Vehicle
from .errors import (
    ConfigError,
    EncodingError,
    IncompleteRoundError,
    PrivacyPreconditionError,
    ProtocolError,
)
from .graph import CommGraph

#: Fixed-point scale: stored integer = real value * SCALE.
SCALE = 1000

_INT32_MIN = -(2**31)
_INT32_MAX = 2**31 - 1


def to_fixed(value: float) -> int:
    """Quantise a real value to fixed point, rounding half away from zero."""
    scaled = value * SCALE
    if scaled >= 0:
        fixed = int(scaled + 0.5)
    else:
        fixed = -int(-scaled + 0.5)
    if not _INT32_MIN < fixed <= _INT32_MAX:
        raise EncodingError(f"value {value} does not fit the signed 32-bit fixed-point range")
    return fixed


def from_fixed(fixed: int) -> float:
    """Real value represented by a fixed-point integer."""
    return fixed / SCALE


def _check_fixed(fixed: int, what: str) -> None:
    if not _INT32_MIN < fixed <= _INT32_MAX:
        raise EncodingError(f"{what} {fixed} overflows the signed 32-bit range")


@dataclass(frozen=True)
class MaskingParams:
    """Fleet-wide affine mask g(x) = a*x + b, known to vehicles but not the base station."""

    a: float = 1.0
    b: float = 0.0

    def __post_init__(self) -> None:
        if not self.a > 0.0:
            raise ConfigError(f"mask slope must be positive to preserve the argmin, got a={self.a}")

    @classmethod
    def identity(cls) -> "MaskingParams":
        return cls(1.0, 0.0)


def mask(value: float, params: MaskingParams) -> int:
    """Affine-mask a real cost and quantise it to fixed point."""
    return to_fixed(params.a * value + params.b)


def split_shares(masked: int, n_shares: int, rng: random.Random, bound: int) -> tuple[int, ...]:
    """Split a fixed-point value into ``n_shares`` integers that sum to it exactly.

    The first ``n_shares - 1`` entries are independent uniform draws from
    [-bound, +bound] (fixed-point units); the last entry is the residual that
    restores the sum.  Order matters to callers: the draws are what gets
    transmitted, the residual is what the owner keeps.
    """
    if n_shares < 2:
        raise PrivacyPreconditionError(
            f"need at least 2 shares to hide a value, got n_shares={n_shares}"
        )
    if bound <= 0:
        raise ConfigError(f"share bound must be positive, got {bound}")
    _check_fixed(bound, "share bound")
    draws = [rng.randint(-bound, bound) for _ in range(n_shares - 1)]
    residual = masked - sum(draws)
    _check_fixed(residual, "residual share")
    return tuple(draws) + (residual,)


@dataclass(frozen=True)
class CostTable:
    """A participant's per-grid-point values (masked costs or kept shares)."""

    vehicle_id: str
    grid: SpeedGrid
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.values) != self.grid.m:
            raise ProtocolError(
                f"table for {self.vehicle_id!r} has {len(self.values)} values "
                f"for a {self.grid.m}-point grid"
            )


@dataclass(frozen=True)
class ShareMessage:
    """One vehicle-to-vehicle transmission: a full column of shares."""

    sender: str
    receiver: str
    grid: SpeedGrid
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.sender == self.receiver:
            raise ProtocolError(f"{self.sender!r} cannot send shares to itself")
        if len(self.values) != self.grid.m:
            raise ProtocolError(
                f"share message {self.sender!r}->{self.receiver!r} has {len(self.values)} "
                f"values for a {self.grid.m}-point grid"
            )


@dataclass(frozen=True)
class AggregatedTable:
    """What one participant uploads to the base station: kept + received shares."""

    vehicle_id: str
    grid: SpeedGrid
    values: tuple[int, ...]


@dataclass(frozen=True)
class Recommendation:
    """The base station's broadcast: the grid speed minimising the aggregate."""

    best_index: int
    speed: float
    curve: tuple[int, ...]


def prepare_round(
    vehicle: Vehicle,
    grid: SpeedGrid,
    params: MaskingParams,
    g: CommGraph,
    rng: random.Random,
    bound: int,
) -> tuple[CostTable, list[ShareMessage]]:
    """Mask and split one vehicle's table; returns (kept shares, outgoing messages).

    Out-neighbors are served in sorted-id order, one uniform draw per neighbor
    per grid point, so a seeded rng reproduces a round exactly.
    """
    neighbors = g.out_neighbors(vehicle.vehicle_id)
    if not neighbors:
        raise PrivacyPreconditionError(
            f"vehicle {vehicle.vehicle_id!r} has no out-neighbor to split its table with"
        )
    kept: list[int] = []
    outgoing: list[list[int]] = [[] for _ in neighbors]
    for speed in grid:
        shares = split_shares(mask(vehicle.cost(speed), params), len(neighbors) + 1, rng, bound)
        for i in range(len(neighbors)):
            outgoing[i].append(shares[i])
        kept.append(shares[-1])
    messages = [
        ShareMessage(vehicle.vehicle_id, nbr, grid, tuple(col))
        for nbr, col in zip(neighbors, outgoing)
    ]
    return CostTable(vehicle.vehicle_id, grid, tuple(kept)), messages


def aggregate_local(kept: CostTable, inbox: Sequence[ShareMessage]) -> AggregatedTable:
    """Sum kept shares with every received share column (exact integer sums)."""
    totals = list(kept.values)
    for msg in inbox:
        if msg.receiver != kept.vehicle_id:
            raise ProtocolError(
                f"message addressed to {msg.receiver!r} in {kept.vehicle_id!r}'s inbox"
            )
        if len(msg.values) != len(totals):
            raise ProtocolError(
                f"share message from {msg.sender!r} has {len(msg.values)} values, "
                f"expected {len(totals)}"
            )
        for j, v in enumerate(msg.values):
            totals[j] += v
    for t in totals:
        _check_fixed(t, "aggregated share")
    return AggregatedTable(kept.vehicle_id, kept.grid, tuple(totals))


def base_station_aggregate(
    tables: Sequence[AggregatedTable],
    expected_ids: Iterable[str] | None = None,
) -> tuple[int, ...]:
    """Pointwise sum of all uploaded tables; share randomness cancels exactly."""
    if not tables:
        raise ProtocolError("base station received no tables")
    if expected_ids is not None:
        missing = set(expected_ids) - {t.vehicle_id for t in tables}
        if missing:
            raise IncompleteRoundError(
                f"missing aggregated tables from: {sorted(missing)}"
            )
    m = len(tables[0].values)
    curve = [0] * m
    for table in tables:
        if len(table.values) != m:
            raise ProtocolError(
                f"table from {table.vehicle_id!r} has {len(table.values)} values, expected {m}"
            )
        for j, v in enumerate(table.values):
            curve[j] += v
    for v in curve:
        _check_fixed(v, "aggregate value")
    return tuple(curve)


def select_best(curve: Sequence[int], grid: SpeedGrid) -> Recommendation:
    """Pick the grid point with the smallest aggregate (lowest speed on ties)."""
    if len(curve) != grid.m:
        raise ProtocolError(f"curve has {len(curve)} values for a {grid.m}-point grid")
    if not curve:
        raise ProtocolError("cannot select from an empty curve")
    best = min(range(len(curve)), key=lambda j: (curve[j], j))
    return Recommendation(best_index=best, speed=grid.speeds[best], curve=tuple(curve))


def unmask_aggregate(
    curve: Sequence[int], params: MaskingParams, n_participants: int
) -> tuple[float, ...]:
    """Invert the affine mask on an aggregate of ``n_participants`` tables."""
    if n_participants < 1:
        raise ConfigError(f"need at least one participant, got {n_participants}")
    return tuple((from_fixed(v) - n_participants * params.b) / params.a for v in curve)


@dataclass(frozen=True)
class RoundTranscript:
    """Everything observable in one round, for metrics and tests.

    ``kept``/``inboxes``/``tables`` are keyed by participant id and include
    dummy participants; ``messages`` lists every vehicle-to-vehicle share
    column in transmission order.
    """

    grid: SpeedGrid
    kept: Mapping[str, CostTable]
    inboxes: Mapping[str, tuple[ShareMessage, ...]]
    tables: Mapping[str, AggregatedTable]
    messages: tuple[ShareMessage, ...]
    curve: tuple[int, ...]
    recommendation: Recommendation
    dummy_ids: tuple[str, ...]


def execute_round(
    fleet: Sequence[Vehicle],
    g: CommGraph,
    grid: SpeedGrid,
    params: MaskingParams,
    rng: random.Random,
    bound: int,
) -> RoundTranscript:
    """Run one full protocol round and return the complete transcript.

    Graph vertices that are not fleet vehicles act as dummy participants:
    they contribute an all-zero table, receive and aggregate shares, and
    upload like everyone else.  Vehicles are processed in the order given,
    which together with the seeded rng makes rounds reproducible.
    """
    ids = [v.vehicle_id for v in fleet]
    if len(set(ids)) != len(ids):
        raise ProtocolError("fleet contains duplicate vehicle ids")
    if not fleet:
        raise ProtocolError("fleet is empty")
    for vid in ids:
        if vid not in g:
            raise ProtocolError(f"vehicle {vid!r} is not a vertex of the communication graph")
    dummy_ids = tuple(sorted(set(g.vertices) - set(ids)))

    kept: dict[str, CostTable] = {}
    inboxes: dict[str, list[ShareMessage]] = {v: [] for v in g.vertices}
    messages: list[ShareMessage] = []
    for vehicle in fleet:
        table, outgoing = prepare_round(vehicle, grid, params, g, rng, bound)
        kept[vehicle.vehicle_id] = table
        for msg in outgoing:
            inboxes[msg.receiver].append(msg)
            messages.append(msg)
    zero = (0,) * grid.m
    for did in dummy_ids:
        kept[did] = CostTable(did, grid, zero)

    order = ids + list(dummy_ids)
    tables = {pid: aggregate_local(kept[pid], inboxes[pid]) for pid in order}
    curve = base_station_aggregate([tables[pid] for pid in order], expected_ids=order)
    rec = select_best(curve, grid)
    return RoundTranscript(
        grid=grid,
        kept=kept,
        inboxes={pid: tuple(inboxes[pid]) for pid in order},
        tables=tables,
        messages=tuple(messages),
        curve=curve,
        recommendation=rec,
        dummy_ids=dummy_ids,
    )


def run_round(
    fleet: Sequence[Vehicle],
    g: CommGraph,
    grid: SpeedGrid,
    params: MaskingParams,
    rng: random.Random,
    bound: int,
) -> Recommendation:
    """Convenience wrapper: run one round, return only the broadcast recommendation."""
    return execute_round(fleet, g, grid, params, rng, bound).recommendation
