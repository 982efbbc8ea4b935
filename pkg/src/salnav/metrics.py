"""Localization, positioning and navigation metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .navigation import EpisodeRecord
from .scene import wrap_pi


@dataclass(frozen=True)
class PositioningTrial:
    est_position: tuple[float, ...]
    true_position: tuple[float, ...]
    est_heading: float
    true_heading: float

    @property
    def position_error(self) -> float:
        return float(np.linalg.norm(np.subtract(self.est_position, self.true_position)))

    @property
    def heading_error(self) -> float:
        return abs(wrap_pi(self.est_heading - self.true_heading))


@dataclass
class MetricsReport:
    """Aggregate metrics; a field is NaN when its inputs were not supplied."""

    acc: float = math.nan
    sr: float = math.nan
    osr: float = math.nan
    spl: float = math.nan
    e_p: float = math.nan
    e_theta: float = math.nan
    n_queries: int = 0
    n_episodes: int = 0
    n_trials: int = 0
    breakdown: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        return {"acc": self.acc, "sr": self.sr, "osr": self.osr, "spl": self.spl,
                "e_p": self.e_p, "e_theta": self.e_theta}


def spl_term(ep: EpisodeRecord) -> float:
    if not ep.success:
        return 0.0
    return ep.shortest_length / max(ep.shortest_length, ep.actual_length)


def compute_metrics(episodes: Sequence[EpisodeRecord] = (), localizations: Sequence[bool] = (),
                    positioning: Sequence[PositioningTrial] = ()) -> MetricsReport:
    """Means over the supplied episodes, localization outcomes and pose trials.

    SR counts stops at the goal, OSR counts any visit to the goal radius and
    SPL weights each success by shortest / max(shortest, actual).
    """
    if not (episodes or localizations or positioning):
        raise ValueError("compute_metrics needs at least one nonempty input")
    rep = MetricsReport(n_queries=len(localizations), n_episodes=len(episodes), n_trials=len(positioning))
    if localizations:
        rep.acc = float(np.mean([bool(x) for x in localizations]))
    if episodes:
        rep.sr = float(np.mean([ep.success for ep in episodes]))
        rep.osr = float(np.mean([ep.oracle_success or ep.success for ep in episodes]))
        rep.spl = float(np.mean([spl_term(ep) for ep in episodes]))
    if positioning:
        rep.e_p = float(np.mean([t.position_error for t in positioning]))
        rep.e_theta = float(np.mean([t.heading_error for t in positioning]))
    return rep


def format_table(header: Sequence[str], rows: Sequence[Sequence], title: str = "") -> str:
    """Plain text table with aligned columns."""
    def cell(v):
        if isinstance(v, float):
            if math.isnan(v):
                return "-"
            return f"{v:.4g}" if abs(v) < 1e-3 and v != 0 else f"{v:.4f}"
        return str(v)

    body = [[cell(v) for v in r] for r in rows]
    widths = [max(len(str(h)), *(len(r[i]) for r in body)) if body else len(str(h))
              for i, h in enumerate(header)]
    lines = []
    if title:
        lines.append(title)
    lines.append("  ".join(str(h).ljust(w) for h, w in zip(header, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    return "\n".join(lines) + "\n"
