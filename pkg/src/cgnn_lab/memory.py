"""Dense, interpolable storage of a solution on (-inf, t_now].

The initial function phi serves every query at or before t0, in closed form
and forever.  Beyond t0 the record is a contiguous chain of cubic Hermite
segments (state and derivative at both ends), appended by the integrator one
accepted step at a time.  Old segments can be truncated once they fall outside
the kernel horizon; queries below the truncation floor clamp to the oldest
retained knot, charging the error to the distributed-delay tail budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exprlang import Expr, compile_expr

__all__ = ["HistoryError", "Segment", "History", "history_new", "history_to_csv"]

PHI_CHECK_STEP = 0.25


class HistoryError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    t_left: float
    t_right: float
    y_left: np.ndarray
    y_right: np.ndarray
    d_left: np.ndarray
    d_right: np.ndarray


def _hermite(theta, dt, y0, y1, m0, m1):
    """Cubic Hermite basis evaluation; theta may be scalar or a column vector."""
    t2 = theta * theta
    t3 = t2 * theta
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    h01 = -2.0 * t3 + 3.0 * t2
    h10 = t3 - 2.0 * t2 + theta
    h11 = t3 - t2
    return h00 * y0 + h01 * y1 + (h10 * m0 + h11 * m1) * dt


class History:
    """Owned by a single integration run; freeze (by convention) afterwards."""

    def __init__(self, phi: Sequence[Expr], t0: float, bound: float,
                 check_horizon: float = 30.0):
        self.n = len(phi)
        if self.n < 1:
            raise HistoryError("need at least one phi component")
        self.phi = tuple(phi)
        self._phi_fns = [compile_expr(e, ("s",)) for e in phi]
        self.t0 = float(t0)
        self.bound = float(bound)
        self._check_phi_bound(max(check_horizon, 30.0))

        cap = 256
        self._times = np.empty(cap)
        self._states = np.empty((cap, self.n))
        self._derivs = np.zeros((cap, self.n))
        self._times[0] = self.t0
        self._states[0] = self.phi_at(0.0)
        self._count = 1
        self._start = 0
        self.truncation_floor = -np.inf
        self.protected_span = 0.0  # kernel horizon + max delay, set by the integrator

    # -- initial function -------------------------------------------------

    def _check_phi_bound(self, horizon: float) -> None:
        s = -np.arange(0.0, horizon + PHI_CHECK_STEP, PHI_CHECK_STEP)
        for c, fn in enumerate(self._phi_fns):
            vals = np.asarray(fn(s), dtype=float) + np.zeros_like(s)
            if not np.all(np.isfinite(vals)):
                bad = s[~np.isfinite(vals)][0]
                raise HistoryError(f"phi[{c + 1}] non-finite at s={bad}")
            over = np.abs(vals) > self.bound
            if np.any(over):
                bad = s[over][0]
                raise HistoryError(
                    f"phi[{c + 1}] exceeds declared bound {self.bound} at "
                    f"s={bad}: |{vals[over][0]:.6g}|"
                )

    def phi_at(self, s: float) -> np.ndarray:
        return np.array([float(fn(s)) for fn in self._phi_fns])

    def _phi_many(self, s: np.ndarray) -> np.ndarray:
        out = np.empty((len(s), self.n))
        for c, fn in enumerate(self._phi_fns):
            out[:, c] = fn(s)
        return out

    # -- segment bookkeeping ----------------------------------------------

    @property
    def t_now(self) -> float:
        return float(self._times[self._count - 1])

    @property
    def knot_count(self) -> int:
        return self._count - self._start

    @property
    def span(self) -> float:
        return self.t_now - float(self._times[self._start])

    def knots(self) -> tuple[np.ndarray, np.ndarray]:
        """Retained knot times and states (one row per accepted step)."""
        sl = slice(self._start, self._count)
        return self._times[sl].copy(), self._states[sl].copy()

    def append_segment(self, seg: Segment) -> None:
        if seg.t_right <= seg.t_left:
            raise HistoryError(
                f"segment must have positive width, got [{seg.t_left}, {seg.t_right}]"
            )
        if seg.t_left != self.t_now:
            kind = "gap" if seg.t_left > self.t_now else "overlap"
            raise HistoryError(
                f"{kind}: segment starts at {seg.t_left}, history ends at {self.t_now}"
            )
        if self._count == len(self._times):
            self._grow()
        k = self._count
        self._derivs[k - 1] = seg.d_left
        self._times[k] = seg.t_right
        self._states[k] = seg.y_right
        self._derivs[k] = seg.d_right
        self._count += 1

    def _grow(self) -> None:
        cap = 2 * len(self._times)
        for name in ("_times", "_states", "_derivs"):
            old = getattr(self, name)
            new = np.empty((cap,) + old.shape[1:])
            new[: self._count] = old[: self._count]
            setattr(self, name, new)

    def truncate_before(self, t_floor: float) -> None:
        if t_floor > self.t_now - self.protected_span:
            raise HistoryError(
                f"cannot truncate at {t_floor}: inside the protected span "
                f"(t_now={self.t_now}, span={self.protected_span})"
            )
        new_start = int(np.searchsorted(self._times[: self._count], t_floor, "right")) - 1
        if new_start > self._start:
            self._start = min(new_start, self._count - 1)
            self.truncation_floor = max(self.truncation_floor, t_floor)
        if self._start > 1024 and self._start > self._count // 2:
            self._compact()

    def _compact(self) -> None:
        m = self._count - self._start
        for name in ("_times", "_states", "_derivs"):
            arr = getattr(self, name)
            arr[:m] = arr[self._start : self._count]
        self._count = m
        self._start = 0

    # -- queries ------------------------------------------------------------

    def sample(self, t: float, ext: Segment | None = None) -> np.ndarray:
        """State vector at time t <= t_now (or inside the provisional
        extension segment `ext` during an integration step)."""
        if t <= self.t0:
            return self.phi_at(t - self.t0)
        if t > self.t_now:
            if ext is None or t > ext.t_right:
                raise HistoryError(f"future query t={t} beyond t_now={self.t_now}")
            dt = ext.t_right - ext.t_left
            theta = (t - ext.t_left) / dt
            return _hermite(theta, dt, ext.y_left, ext.y_right, ext.d_left, ext.d_right)
        times = self._times
        k = times[: self._count].searchsorted(t, "right") - 1
        if k < self._start:
            return self._states[self._start].copy()  # truncated region: clamp
        if k >= self._count - 1:
            return self._states[self._count - 1].copy()
        dt = times[k + 1] - times[k]
        theta = (t - times[k]) / dt
        return _hermite(theta, dt, self._states[k], self._states[k + 1],
                        self._derivs[k], self._derivs[k + 1])

    def sample_many(self, ts: np.ndarray, ext: Segment | None = None) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        out = np.empty((len(ts), self.n))
        before = ts <= self.t0
        future = ts > self.t_now
        mid = ~(before | future)
        if before.any():
            out[before] = self._phi_many(ts[before] - self.t0)
        if mid.any():
            tm = ts[mid]
            k = self._times[: self._count].searchsorted(tm, "right") - 1
            np.maximum(k, self._start, out=k)
            if self._count == 1:
                out[mid] = self._states[0]
            else:
                np.minimum(k, self._count - 2, out=k)
                tL = self._times[k]
                dt = self._times[k + 1] - tL
                theta = (tm - tL) / dt  # clamp: truncated region reads the oldest knot
                np.maximum(theta, 0.0, out=theta)
                np.minimum(theta, 1.0, out=theta)
                theta = theta[:, None]
                out[mid] = _hermite(theta, dt[:, None], self._states[k],
                                    self._states[k + 1], self._derivs[k],
                                    self._derivs[k + 1])
        if future.any():
            if ext is None:
                bad = ts[future][0]
                raise HistoryError(f"future query t={bad} beyond t_now={self.t_now}")
            tf = ts[future]
            if np.any(tf > ext.t_right + 1e-12):
                raise HistoryError("query beyond the provisional extension")
            dt = ext.t_right - ext.t_left
            theta = ((tf - ext.t_left) / dt)[:, None]
            out[future] = _hermite(theta, dt, ext.y_left, ext.y_right,
                                   ext.d_left, ext.d_right)
        return out


def history_new(phi: Sequence[Expr], t0: float, b_phi: float,
                check_horizon: float = 30.0) -> History:
    """Fresh history seeded by the bounded initial function phi at t0."""
    return History(phi, t0, b_phi, check_horizon)


def history_to_csv(h: History) -> str:
    """One row per accepted step: `t,x1,...,xn`."""
    times, states = h.knots()
    header = "t," + ",".join(f"x{c + 1}" for c in range(h.n))
    lines = [header]
    for t, row in zip(times, states):
        lines.append(",".join([repr(float(t))] + [repr(float(v)) for v in row]))
    return "\n".join(lines) + "\n"
