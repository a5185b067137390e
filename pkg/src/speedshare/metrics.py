"""Privacy and traffic measurements over a round transcript.

Privacy: what a curious participant can estimate about its in-neighbors from
the shares it received, and how far the base station's view is from the true
fleet curve.  Traffic: exact wire bytes for every transmission in a round.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .emissions import SpeedGrid, Vehicle
from .graph import CommGraph
from .oracle import fleet_total_cost
from .protocol import MaskingParams, RoundTranscript, ShareMessage, from_fixed, mask
from .wire import PAIR_BYTES, encode_aggregated_table, encode_recommendation, encode_share_message


def local_estimated_error(
    inbox: Sequence[ShareMessage],
    in_neighbor_vehicles: Sequence[Vehicle],
    grid: SpeedGrid,
    params: MaskingParams,
) -> tuple[float, ...]:
    """Best in-neighbor estimate minus the truth, per grid point (real units).

    A receiver's only estimator for the sum of its in-neighbors' masked costs
    is the sum of the shares they sent it; the difference from the true masked
    sum is exactly the (negated) randomness the senders kept or routed
    elsewhere.  Larger share bounds make this curve wider, i.e. the estimate
    more useless.
    """
    received = [0] * grid.m
    for msg in inbox:
        for j, v in enumerate(msg.values):
            received[j] += v
    truth = [0] * grid.m
    for vehicle in in_neighbor_vehicles:
        for j, speed in enumerate(grid):
            truth[j] += mask(vehicle.cost(speed), params)
    return tuple(from_fixed(r - t) for r, t in zip(received, truth))


def base_station_deviation(
    curve: Sequence[int], fleet: Sequence[Vehicle], grid: SpeedGrid
) -> tuple[float, ...]:
    """Base station's unscaled aggregate minus the true total cost, per grid point.

    With identity masking this is only quantisation noise; any affine mask
    shows up here as the (intended) distortion hiding the true curve.
    """
    return tuple(
        from_fixed(v) - float(fleet_total_cost(fleet, speed))
        for v, speed in zip(curve, grid)
    )


@dataclass(frozen=True)
class PrivacyReport:
    """Per-vehicle local estimation error curves plus the base station's deviation.

    ``exact_estimates`` lists vehicles that received shares and whose error
    curve is identically zero — i.e. the randomness degenerated and they
    learned their in-neighbors' masked sum exactly.  Any non-empty value is a
    privacy loss worth flagging.
    """

    local_error: Mapping[str, tuple[float, ...]]
    base_deviation: tuple[float, ...]
    exact_estimates: tuple[str, ...] = ()


def privacy_report(
    transcript: RoundTranscript,
    fleet: Sequence[Vehicle],
    g: CommGraph,
    params: MaskingParams,
) -> PrivacyReport:
    """Evaluate what every participant (and the base station) could infer."""
    by_id = {v.vehicle_id: v for v in fleet}
    local: dict[str, tuple[float, ...]] = {}
    exact: list[str] = []
    for vehicle in fleet:
        vid = vehicle.vehicle_id
        neighbors = [by_id[u] for u in g.in_neighbors(vid) if u in by_id]
        local[vid] = local_estimated_error(
            transcript.inboxes.get(vid, ()), neighbors, transcript.grid, params
        )
        if neighbors and all(x == 0.0 for x in local[vid]):
            exact.append(vid)
    deviation = base_station_deviation(transcript.curve, fleet, transcript.grid)
    return PrivacyReport(
        local_error=local, base_deviation=deviation, exact_estimates=tuple(exact)
    )


@dataclass(frozen=True)
class TrafficReport:
    """Exact byte counts for one round."""

    vehicle_to_vehicle: int
    vehicle_to_base: int
    broadcast: int
    per_message: tuple[int, ...]
    message_count: int
    upload_count: int

    @property
    def total(self) -> int:
        return self.vehicle_to_vehicle + self.vehicle_to_base + self.broadcast


def message_bytes(msg: ShareMessage) -> int:
    """Wire size of one vehicle-to-vehicle share column."""
    return len(encode_share_message(msg))


def traffic_report(transcript: RoundTranscript) -> TrafficReport:
    """Account for every byte a round put on the air.

    Each share column and each upload is an 8*M-byte table; the broadcast is a
    single 8-byte pair.  Totals are computed from the actual encodings, not
    the formula, so the tests can check the two against each other.
    """
    per_message = tuple(message_bytes(m) for m in transcript.messages)
    upload = sum(len(encode_aggregated_table(t)) for t in transcript.tables.values())
    broadcast = len(
        encode_recommendation(transcript.recommendation, transcript.grid)
    )
    return TrafficReport(
        vehicle_to_vehicle=sum(per_message),
        vehicle_to_base=upload,
        broadcast=broadcast,
        per_message=per_message,
        message_count=len(per_message),
        upload_count=len(transcript.tables),
    )


def expected_table_bytes(m: int) -> int:
    """The analytic per-table cost: one int32 pair per grid point."""
    return PAIR_BYTES * m
