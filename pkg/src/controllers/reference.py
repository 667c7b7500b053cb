"""
Reference Trajectory

Arc-length parameterized polyline with target speed and heading profiles.
Provides nearest-point projection and the per-step reference slices consumed
by the controller.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from utils.exceptions import InvalidBounds

REFERENCE_COLUMNS = ["s", "x", "y", "v_ref", "psi_ref"]


def project_onto_polyline(position: np.ndarray, points: np.ndarray, segments=None):
    """
    Nearest point on a polyline.

    Args:
        position: Planar point (2,)
        points: Polyline vertices (P, 2), P >= 2
        segments: Optional subset of segment indices to search

    Returns:
        (segment index, fraction along segment, signed distance)
        Distance is positive when the point lies left of the path direction.
    """
    p = np.asarray(position, dtype=float)[:2]
    idx = np.arange(len(points) - 1) if segments is None else np.asarray(segments)
    a = points[idx]
    d = points[idx + 1] - a
    len2 = np.einsum("ij,ij->i", d, d)
    rel = p - a
    t = np.where(len2 > 0, np.einsum("ij,ij->i", rel, d) / np.where(len2 > 0, len2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    offset = rel - t[:, None] * d
    dist = np.hypot(offset[:, 0], offset[:, 1])
    k = int(np.argmin(dist))
    cross = d[k, 0] * rel[k, 1] - d[k, 1] * rel[k, 0]
    sign = 1.0 if cross >= 0.0 else -1.0
    return int(idx[k]), float(t[k]), sign * float(dist[k])


@dataclass
class ReferenceTrajectory:
    """
    Attributes:
        points: (P, 2) vertices; closed paths repeat the first point at the end
        speeds: (P,) target speed at each vertex
        headings: (P,) unwrapped path heading at each vertex
        arclength: (P,) cumulative arc length, starting at 0
        closed: Whether the path is a loop
    """

    points: np.ndarray
    speeds: np.ndarray
    headings: np.ndarray
    arclength: np.ndarray
    closed: bool = True

    @classmethod
    def from_polyline(cls, points, speeds, closed: bool = True) -> "ReferenceTrajectory":
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[0] < 2:
            raise InvalidBounds("A reference path needs at least 2 points")
        speeds = np.broadcast_to(np.asarray(speeds, dtype=float), (points.shape[0],)).copy()
        steps = np.diff(points, axis=0)
        seg_len = np.hypot(steps[:, 0], steps[:, 1])
        arclength = np.concatenate([[0.0], np.cumsum(seg_len)])
        seg_heading = np.unwrap(np.arctan2(steps[:, 1], steps[:, 0]))
        headings = np.concatenate([seg_heading, seg_heading[-1:]])
        return cls(points, speeds, headings, arclength, closed)

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    @property
    def num_segments(self) -> int:
        return len(self.points) - 1

    def _heading_turn(self) -> float:
        # net heading change per lap, a multiple of 2*pi for closed loops
        if not self.closed:
            return 0.0
        turns = np.round((self.headings[-1] - self.headings[0]) / (2.0 * np.pi))
        return float(2.0 * np.pi * turns)

    def sample(self, s) -> np.ndarray:
        """Reference rows (p_x, p_y, v, psi) at arc lengths s; closed paths wrap."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.closed:
            laps = np.floor(s / self.length)
            local = s - laps * self.length
        else:
            laps = np.zeros_like(s)
            local = np.clip(s, 0.0, self.length)
        x = np.interp(local, self.arclength, self.points[:, 0])
        y = np.interp(local, self.arclength, self.points[:, 1])
        v = np.interp(local, self.arclength, self.speeds)
        seg = np.clip(np.searchsorted(self.arclength, local, side="right") - 1, 0, self.num_segments - 1)
        psi = self.headings[seg] + laps * self._heading_turn()
        return np.column_stack([x, y, v, psi])

    def project(
        self, position, hint: Optional[float] = None, window: Tuple[float, float] = (1.0, 5.0)
    ) -> Tuple[float, float]:
        """
        Arc length of the nearest path point and signed lateral offset.

        With a hint, only segments starting within [hint - window[0],
        hint + window[1]] (cyclic on closed paths) are searched, so the
        projection cannot jump across a narrow part of the track.
        """
        segments = None
        if hint is not None:
            starts = self.arclength[:-1]
            rel = starts - hint
            if self.closed:
                rel = (rel + 0.5 * self.length) % self.length - 0.5 * self.length
            candidates = np.flatnonzero((rel >= -window[0]) & (rel <= window[1]))
            if len(candidates):
                segments = candidates
        k, t, dist = project_onto_polyline(position, self.points, segments)
        s = self.arclength[k] + t * (self.arclength[k + 1] - self.arclength[k])
        return float(s), dist

    def slice(
        self,
        s0: float,
        horizon: int,
        dt: float,
        speed: float,
        min_progress_speed: float = 1.0,
    ) -> np.ndarray:
        """
        (H+1, 4) reference rows advancing from s0 at the current speed.

        The progression speed is max(speed, min_progress_speed) so the
        reference moves ahead when starting from rest.
        """
        rate = max(float(speed), float(min_progress_speed))
        s = s0 + rate * dt * np.arange(horizon + 1)
        return self.sample(s)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "s": self.arclength,
                "x": self.points[:, 0],
                "y": self.points[:, 1],
                "v_ref": self.speeds,
                "psi_ref": self.headings,
            }
        )

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "ReferenceTrajectory":
        frame = pd.read_csv(path)
        missing = set(REFERENCE_COLUMNS) - set(frame.columns)
        if missing:
            raise InvalidBounds(f"Reference file {path} lacks columns {sorted(missing)}")
        points = frame[["x", "y"]].to_numpy(dtype=float)
        closed = bool(np.allclose(points[0], points[-1], atol=1e-9))
        return cls.from_polyline(points, frame["v_ref"].to_numpy(dtype=float), closed=closed)
