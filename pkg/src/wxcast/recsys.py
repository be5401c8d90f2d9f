"""User-to-location collaborative filtering over an N x M interaction matrix.

Implicit interaction weights, cosine user similarity, k-nearest-neighbor
score prediction, and a comfort blend that re-ranks candidates by the
forecast at each location for a target date.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, datetime, timezone
from math import sqrt
from typing import Optional

from .errors import EmptyStore, NoData, NonPositiveWeight, UnknownLocation, UnknownUser
from .forecast import forecast_at
from .ncgrid import KIND_RAINFALL, KIND_TEMPERATURE
from .store import GeoPoint, StoreSnapshot

DEFAULT_NEIGHBORS = 10
DEFAULT_BLEND = 0.3

COMFORT_TEMP_C = 21.0
COMFORT_TEMP_SPAN = 20.0
COMFORT_RAIN_SPAN_MM = 10.0


@dataclass(frozen=True)
class Recommendation:
    location: str
    cf_score: float
    comfort_score: float
    blended_score: float
    rank: int

    def to_dict(self) -> dict:
        return {"location": self.location, "cf_score": self.cf_score,
                "comfort_score": self.comfort_score,
                "blended_score": self.blended_score, "rank": self.rank}


class InteractionMatrix:
    """Immutable user x location weights; updates return a new matrix."""

    def __init__(self, locations=None, users=None, entries=None, updated=None):
        self.locations = dict(locations or {})  # id -> GeoPoint
        self.users = list(users or [])
        self.entries = dict(entries or {})  # (user, location) -> weight
        self.updated = dict(updated or {})  # (user, location) -> iso timestamp

    def with_location(self, location_id: str, point: GeoPoint) -> "InteractionMatrix":
        locs = dict(self.locations)
        locs[location_id] = point
        return InteractionMatrix(locs, self.users, self.entries, self.updated)

    def record_interaction(self, user: str, location: str, weight: float,
                           when: Optional[str] = None) -> "InteractionMatrix":
        """Add weight to (user, location); unseen users register automatically."""
        if location not in self.locations:
            raise UnknownLocation(location)
        if not weight > 0:
            raise NonPositiveWeight(f"weight must be positive, got {weight}")
        users = list(self.users)
        if user not in users:
            users.append(user)
        entries = dict(self.entries)
        entries[(user, location)] = entries.get((user, location), 0.0) + float(weight)
        updated = dict(self.updated)
        updated[(user, location)] = when or datetime.now(timezone.utc).isoformat()
        return InteractionMatrix(self.locations, users, entries, updated)

    def location_ids(self):
        return sorted(self.locations)

    def weight(self, user: str, location: str) -> float:
        return self.entries.get((user, location), 0.0)

    def row(self, user: str):
        return [self.weight(user, loc) for loc in self.location_ids()]

    def has_user(self, user: str) -> bool:
        return user in self.users

    def content_key(self):
        return tuple(sorted((u, l, w) for (u, l), w in self.entries.items()))

    # --- persistence: JSON lines, location records then interaction records ---

    def to_jsonl(self) -> str:
        lines = []
        for loc in self.location_ids():
            p = self.locations[loc]
            lines.append(json.dumps({"type": "location", "id": loc,
                                     "lat": p.lat, "lon": p.lon}))
        for (user, loc) in sorted(self.entries):
            lines.append(json.dumps({
                "type": "interaction", "user": user, "location": loc,
                "weight": self.entries[(user, loc)],
                "last_updated": self.updated.get((user, loc), ""),
            }))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "InteractionMatrix":
        m = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("type") == "location":
                m = m.with_location(rec["id"], GeoPoint(rec["lat"], rec["lon"]))
            else:
                m = m.record_interaction(rec["user"], rec["location"],
                                         rec["weight"], when=rec.get("last_updated"))
        return m


def user_similarity(matrix: InteractionMatrix, u: str, v: str) -> float:
    """Cosine similarity of two users' location-weight vectors; 0 when either
    vector is all zero."""
    for name in (u, v):
        if not matrix.has_user(name):
            raise UnknownUser(name)
    ru, rv = matrix.row(u), matrix.row(v)
    dot = sum(a * b for a, b in zip(ru, rv))
    nu = sqrt(sum(a * a for a in ru))
    nv = sqrt(sum(b * b for b in rv))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return dot / (nu * nv)


def _neighbors(matrix, u, k):
    sims = []
    for v in matrix.users:
        if v == u:
            continue
        s = user_similarity(matrix, u, v)
        if s > 0.0:
            sims.append((v, s))
    sims.sort(key=lambda t: (-t[1], t[0]))
    return sims[:k]


def predict_score(matrix: InteractionMatrix, u: str, location: str,
                  k: int = DEFAULT_NEIGHBORS) -> float:
    """Similarity-weighted mean of the k nearest users' weights for a location."""
    if not matrix.has_user(u):
        raise UnknownUser(u)
    if location not in matrix.locations:
        raise UnknownLocation(location)
    neigh = _neighbors(matrix, u, k)
    if not neigh:
        return 0.0
    num = sum(s * matrix.weight(v, location) for v, s in neigh)
    den = sum(s for _, s in neigh)
    return num / den


def comfort_score(snapshot: StoreSnapshot, point: GeoPoint, target_date: date) -> float:
    """Bounded [0, 1] heuristic: distance from 21 C scaled over 20 C, damped by
    forecast rain over a 10 mm span; missing temperature scores neutral 0.5."""
    try:
        t = forecast_at(snapshot, point, target_date, KIND_TEMPERATURE).value
        base = 1.0 - min(abs(t - COMFORT_TEMP_C) / COMFORT_TEMP_SPAN, 1.0)
    except NoData:
        base = 0.5
    try:
        precip = max(0.0, forecast_at(snapshot, point, target_date, KIND_RAINFALL).value)
        factor = max(0.0, 1.0 - precip / COMFORT_RAIN_SPAN_MM)
    except NoData:
        factor = 1.0
    return base * factor


def recommend(matrix: InteractionMatrix, u: str, n: int,
              blend: float = DEFAULT_BLEND,
              snapshot: Optional[StoreSnapshot] = None,
              target_date: Optional[date] = None,
              k: int = DEFAULT_NEIGHBORS):
    """Top-n unvisited locations by (1-blend) * normalized CF + blend * comfort.

    Cold-start users (all-zero row) fall back to global popularity for the CF
    side. Ties always break by location id ascending.
    """
    if not matrix.has_user(u):
        raise UnknownUser(u)
    if not 0.0 <= blend <= 1.0:
        raise ValueError(f"blend must be in [0, 1], got {blend}")
    if blend > 0.0 and (snapshot is None or snapshot.is_empty):
        raise EmptyStore("comfort blending needs a nonempty snapshot")
    if blend > 0.0 and target_date is None:
        raise ValueError("comfort blending needs a target date")

    candidates = [loc for loc in matrix.location_ids() if matrix.weight(u, loc) == 0.0]
    if not candidates:
        return []

    cold = all(w == 0.0 for w in matrix.row(u))
    if cold:
        raw = {loc: sum(matrix.weight(v, loc) for v in matrix.users) for loc in candidates}
    else:
        raw = {loc: predict_score(matrix, u, loc, k) for loc in candidates}

    lo, hi = min(raw.values()), max(raw.values())
    if hi > lo:
        cf_norm = {loc: (s - lo) / (hi - lo) for loc, s in raw.items()}
    else:
        cf_norm = {loc: 0.0 for loc in raw}

    out = []
    for loc in candidates:
        comfort = (comfort_score(snapshot, matrix.locations[loc], target_date)
                   if blend > 0.0 else 0.0)
        blended = (1.0 - blend) * cf_norm[loc] + blend * comfort
        out.append((loc, cf_norm[loc], comfort, blended))
    out.sort(key=lambda t: (-t[3], t[0]))
    return [Recommendation(location=loc, cf_score=cf, comfort_score=comfort,
                           blended_score=blended, rank=i + 1)
            for i, (loc, cf, comfort, blended) in enumerate(out[:n])]
