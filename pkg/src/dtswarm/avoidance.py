"""VFH-style heading selection from a polar obstacle histogram.

Single-stage variant: build a sector density histogram from a range scan,
then pick the admissible heading closest to the desired one. Used by the
random-walk fallback and by waypoint following.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import RangeScan

TWO_PI = 2.0 * math.pi


@dataclass
class PolarHistogram:
    sector_count: int
    density: np.ndarray    # (sector_count,), >= 0
    threshold: float

    @property
    def blocked(self) -> np.ndarray:
        return self.density > self.threshold

    def sector_of(self, heading: float) -> int:
        return int((heading % TWO_PI) / (TWO_PI / self.sector_count)) % self.sector_count


def build_histogram(scan: RangeScan, sector_count: int = 36, threshold: float = 0.6) -> PolarHistogram:
    """Each ray contributes (max_range - d)/max_range; sector density is the max."""
    density = np.zeros(sector_count)
    width = TWO_PI / sector_count
    for h, d in zip(scan.headings, scan.distances):
        s = int((h % TWO_PI) / width) % sector_count
        contrib = (scan.max_range_m - d) / scan.max_range_m
        if contrib > density[s]:
            density[s] = contrib
    return PolarHistogram(sector_count, density, threshold)


def _wrap_pi(a: float) -> float:
    return (a + math.pi) % TWO_PI - math.pi


def select_heading(hist: PolarHistogram, desired: float, safety_margin_sectors: int = 1) -> float | None:
    """Desired heading if its sector window is clear, else the nearest clear window center.

    A sector is admissible when it and its +-margin neighbors are all
    unblocked. Ties between equally deviating candidates break
    counterclockwise. Returns None when no admissible sector exists.
    """
    sc = hist.sector_count
    blocked = hist.blocked
    margin = safety_margin_sectors

    def window_clear(s: int) -> bool:
        return not any(blocked[(s + k) % sc] for k in range(-margin, margin + 1))

    desired = desired % TWO_PI
    if window_clear(hist.sector_of(desired)):
        return desired

    width = TWO_PI / sc
    best = None
    best_key = None
    for s in range(sc):
        if not window_clear(s):
            continue
        center = (s + 0.5) * width
        dev = _wrap_pi(center - desired)
        key = (abs(dev), 0 if dev >= 0 else 1)
        if best_key is None or key < best_key:
            best_key = key
            best = center
    return best
