"""GPS mobility features: greedy leader clustering, home inference, entropy, homestay.

Points slower than the speed gate are stationary; in chronological order each
stationary point joins the first existing cluster center within the radius or
founds a new one (centers never move, so assignment can be replayed from the
finished model). Dwell credits the gap since the previous sample, capped, to
the later point's cluster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..timeutil import local_seconds_of_day
from .config import FeatureConfig
from .geo import haversine_m
from .stats import sample_variance, shannon_entropy


@dataclass
class ClusterModel:
    centers: list[tuple[float, float]] = field(default_factory=list)
    dwell_seconds: list[float] = field(default_factory=list)
    radius_m: float = 300.0
    home_cluster: int | None = None

    @property
    def n_clusters(self) -> int:
        return len(self.centers)


def _speeds(points) -> list[float]:
    """Speed of each point relative to its predecessor; the first point gets 0."""
    speeds = [0.0]
    for (lat0, lon0, t0), (lat1, lon1, t1) in zip(points, points[1:]):
        dist = haversine_m(lat0, lon0, lat1, lon1)
        dt = t1 - t0
        if dt > 0:
            speeds.append(dist / dt)
        else:
            speeds.append(0.0 if dist == 0.0 else math.inf)
    return speeds


def _assign(point, centers, radius_m) -> int | None:
    lat, lon, _ = point
    for idx, (clat, clon) in enumerate(centers):
        if haversine_m(lat, lon, clat, clon) <= radius_m:
            return idx
    return None


def fit_location_clusters(
    points: list[tuple[float, float, float]],
    cfg: FeatureConfig = FeatureConfig(),
) -> ClusterModel:
    """Cluster time-sorted (lat, lon, epoch) points; < 2 points yields an empty model."""
    model = ClusterModel(radius_m=cfg.cluster_radius_m)
    if len(points) < 2:
        return model
    speeds = _speeds(points)
    assignment: list[int | None] = []
    for i, point in enumerate(points):
        if speeds[i] >= cfg.speed_gate_ms:
            assignment.append(None)
            continue
        idx = _assign(point, model.centers, cfg.cluster_radius_m)
        if idx is None:
            model.centers.append((point[0], point[1]))
            model.dwell_seconds.append(0.0)
            idx = len(model.centers) - 1
        assignment.append(idx)
    for i in range(1, len(points)):
        idx = assignment[i]
        if idx is not None:
            gap = points[i][2] - points[i - 1][2]
            model.dwell_seconds[idx] += min(gap, cfg.dwell_cap_s)
    return model


def infer_home_cluster(
    model: ClusterModel,
    points: list[tuple[float, float, float]],
    tz_offset_min: int,
    cfg: FeatureConfig = FeatureConfig(),
) -> int | None:
    """Cluster with the most dwell between the configured night hours, or None.

    Ties break on overall dwell, then on the lowest cluster index.
    """
    if not model.centers:
        return None
    speeds = _speeds(points)
    night = [0.0] * model.n_clusters
    for i in range(1, len(points)):
        if speeds[i] >= cfg.speed_gate_ms:
            continue
        idx = _assign(points[i], model.centers, model.radius_m)
        if idx is None:
            continue
        hour = local_seconds_of_day(points[i][2], tz_offset_min) / 3600.0
        if cfg.night_start_hour <= hour < cfg.night_end_hour:
            gap = points[i][2] - points[i - 1][2]
            night[idx] += min(gap, cfg.dwell_cap_s)
    if max(night, default=0.0) <= 0.0:
        return None
    best = max(
        range(model.n_clusters),
        key=lambda c: (night[c], model.dwell_seconds[c], -c),
    )
    return best


def location_features(
    points: list[tuple[float, float, float]],
    model: ClusterModel,
    cfg: FeatureConfig = FeatureConfig(),
) -> dict:
    out = {
        "location_variance": None,
        "location_clusters": None,
        "location_entropy": None,
        "location_entropy_normalized": None,
        "homestay": None,
        "moving_time_min": None,
        "moving_distance_m": None,
    }
    if len(points) < 2:
        return out
    var_lat = sample_variance([p[0] for p in points])
    var_lon = sample_variance([p[1] for p in points])
    out["location_variance"] = math.log(var_lat + var_lon + cfg.location_variance_floor)
    out["location_clusters"] = model.n_clusters
    total_dwell = sum(model.dwell_seconds)
    if total_dwell > 0.0:
        out["location_entropy"] = shannon_entropy(model.dwell_seconds)
        if model.n_clusters >= 2:
            out["location_entropy_normalized"] = out["location_entropy"] / math.log(
                model.n_clusters
            )
        if model.home_cluster is not None:
            out["homestay"] = model.dwell_seconds[model.home_cluster] / total_dwell
    moving_s = 0.0
    moving_m = 0.0
    speeds = _speeds(points)
    for i in range(1, len(points)):
        if speeds[i] >= cfg.speed_gate_ms and math.isfinite(speeds[i]):
            moving_s += points[i][2] - points[i - 1][2]
            moving_m += haversine_m(
                points[i - 1][0], points[i - 1][1], points[i][0], points[i][1]
            )
    out["moving_time_min"] = moving_s / 60.0
    out["moving_distance_m"] = moving_m
    return out
