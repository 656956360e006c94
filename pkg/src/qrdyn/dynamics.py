"""Orbit iteration, escape classification and growth-rate instrumentation.

Orbits are iterated directly in floating point while representable; maps
whose tail behaviour admits a closed-form log-domain surrogate (radial
squaring with a bounded additive translation, or the vertical tower
t -> t + e^t - c) continue in log magnitudes past the overflow threshold.
Doubly-exponential comparisons (orbit versus iterated maximum modulus) are
carried out in a normalized iterated-exponential representation.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

RADIUS_CAP = 1e300        # orbit terminates beyond this magnitude
LOG_SWITCH = 1e150        # surrogate continuation starts beyond this

_EXP_MAX = 700.0          # exp(head) stays finite below this
_HEAD_MIN = 6.6           # > log(_EXP_MAX); keeps (depth, head) lexicographic


class BigExp:
    """A non-negative magnitude exp^depth(head) with canonical head range.

    Canonical form: depth == 0 with 0 <= head < _EXP_MAX, or depth >= 1 with
    _HEAD_MIN <= head < _EXP_MAX.  Comparison is lexicographic on
    (depth, head), which the canonical ranges make order-faithful.
    """

    __slots__ = ("depth", "head")

    def __init__(self, depth, head):
        depth = int(depth)
        head = float(head)
        if head < 0:
            raise ValueError("BigExp represents non-negative magnitudes")
        while head >= _EXP_MAX:
            head = math.log(head)
            depth += 1
        while depth > 0 and head < _HEAD_MIN:
            head = math.exp(head)
            depth -= 1
        self.depth = depth
        self.head = head

    @classmethod
    def from_float(cls, v):
        if not math.isfinite(v):
            raise ValueError("cannot build BigExp from a non-finite float")
        return cls(0, v)

    def exp(self):
        return BigExp(self.depth + 1, self.head)

    def to_float(self):
        if self.depth == 0:
            return self.head
        if self.depth == 1 and self.head < 709.0:
            return math.exp(self.head)
        return math.inf

    def _key(self):
        return (self.depth, self.head)

    def __lt__(self, other):
        return self._key() < other._key()

    def __le__(self, other):
        return self._key() <= other._key()

    def __ge__(self, other):
        return self._key() >= other._key()

    def __gt__(self, other):
        return self._key() > other._key()

    def __eq__(self, other):
        return isinstance(other, BigExp) and self._key() == other._key()

    def __repr__(self):
        return f"BigExp(exp^{self.depth}({self.head:.6g}))"


# ---------------------------------------------------------------------------
# map handles

@dataclass
class SurrogateSpec:
    """Closed-form log-domain continuation for the tail of an orbit.

    kind "radial-square": |x_{k+1}| = |x_k|^2 + c with 0 <= c <= translate
    (direction-independent bound); exact for orbits on the invariant axis.
    kind "axis-tower": x3 follows t -> t + e^t - translate on an invariant
    vertical line.
    """

    kind: str
    translate: float = 0.0
    decay_term: bool = False

    def regime(self, point) -> bool:
        if self.kind == "radial-square":
            return len(point) == 2 or point[2] < 0
        return True


@dataclass
class MapHandle:
    name: str
    fn: Callable
    dim: int = 3
    tracks_h0: bool = False      # third-coordinate sign is the escape proxy
    surrogate: Optional[SurrogateSpec] = None
    translate: float = 0.0       # downward shift, for tower continuations

    def __call__(self, p):
        return self.fn(p)


@dataclass
class OrbitRecord:
    x0: np.ndarray
    points: List[np.ndarray]          # while directly representable
    rho: List[float]                  # log|x_k|, continued by the surrogate
    reason: str                       # budget | entered_h0 | radius_cap | nonfinite
    h0_step: Optional[int] = None
    surrogate_from: Optional[int] = None

    @property
    def steps(self):
        return len(self.rho) - 1


def norm_safe(p):
    """Euclidean norm without intermediate overflow (valid to ~1.7e308)."""
    v = np.asarray(p, dtype=float)
    s = float(np.max(np.abs(v)))
    if s == 0.0 or not math.isfinite(s):
        return s
    w = v / s
    return s * math.sqrt(float(w @ w))


def _log_norm(p):
    v = np.asarray(p, dtype=float)
    s = float(np.max(np.abs(v)))
    if s == 0.0:
        return -math.inf
    if not math.isfinite(s):
        return math.inf
    w = v / s
    return math.log(s) + 0.5 * math.log(float(w @ w))


def iterate(map_handle: MapHandle, x0, k_max: int, radius_cap: float = RADIUS_CAP,
            stop_on_h0: bool = False) -> OrbitRecord:
    """Iterate the map, recording points and log magnitudes.

    Terminates on the iteration budget, on (optional) entry into the lower
    half-space, on exceeding the radius cap, or on a non-finite value; if the
    map declares a surrogate whose regime matched the last representable
    point, the log magnitudes continue to k_max without points.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    x = np.asarray(x0, dtype=float)
    pts = [x.copy()]
    rho = [_log_norm(x)]
    h0_step = None
    if map_handle.tracks_h0 and x[2] < 0:
        h0_step = 0
        if stop_on_h0:
            return OrbitRecord(x0=x.copy(), points=pts, rho=rho,
                               reason="entered_h0", h0_step=0)
    reason = "budget"
    surrogate_from = None
    for k in range(1, k_max + 1):
        nxt = np.asarray(map_handle.fn(tuple(x)), dtype=float)
        if not np.all(np.isfinite(nxt)):
            reason = "nonfinite"
            break
        m = norm_safe(nxt)
        if m > radius_cap:
            reason = "radius_cap"
            break
        pts.append(nxt.copy())
        rho.append(_log_norm(nxt))
        if map_handle.tracks_h0 and h0_step is None and nxt[2] < 0:
            h0_step = k
            if stop_on_h0:
                reason = "entered_h0"
                x = nxt
                break
        sur = map_handle.surrogate
        if sur is not None and m > LOG_SWITCH and sur.regime(nxt):
            surrogate_from = k
            r = rho[-1]
            for _ in range(k + 1, k_max + 1):
                r = _surrogate_rho_step(sur, r)
                rho.append(r)
            reason = "budget"
            x = nxt
            break
        x = nxt
    if h0_step is not None and reason == "budget" and stop_on_h0:
        reason = "entered_h0"
    return OrbitRecord(x0=np.asarray(x0, dtype=float), points=pts, rho=rho,
                       reason=reason, h0_step=h0_step,
                       surrogate_from=surrogate_from)


def _surrogate_rho_step(sur: SurrogateSpec, r: float) -> float:
    if sur.kind != "radial-square":
        raise ValueError("rho continuation only applies to radial squaring")
    return _radial_square_rho_step(r, sur.translate, sur.decay_term)


def _radial_square_rho_step(r, translate, decay_term=False):
    """log of (e^r)^2 + c, computed without overflow."""
    c = translate
    if decay_term:
        e2r = math.exp(2 * r) if 2 * r < 700 else math.inf
        c = c + (math.exp(-e2r) if e2r < 700 else 0.0)
    if c == 0.0:
        return 2 * r
    if 2 * r > 709.0:
        return 2 * r
    return 2 * r + math.log1p(c * math.exp(-2 * r))


# ---------------------------------------------------------------------------
# escape classification

@dataclass(frozen=True)
class EscapeClass:
    kind: str                 # "quasi_fatou" | "radial" | "undecided"
    n: Optional[int] = None   # first entry step for the half-space proxy
    budget: Optional[int] = None

    @property
    def label(self):
        if self.kind == "quasi_fatou":
            return f"H0@{self.n}"
        return self.kind


def classify_escape(f: MapHandle, x, n_max: int,
                    radius_cap: float = RADIUS_CAP) -> EscapeClass:
    """Half-space entry proxy: the least n with third coordinate < 0; radial
    escape once the magnitude passes the cap without entering; undecided
    otherwise."""
    if not f.tracks_h0:
        raise ValueError("escape classification needs the shifted map")
    p = np.asarray(x, dtype=float)
    if p[2] < 0:
        return EscapeClass("quasi_fatou", n=0)
    for n in range(1, n_max + 1):
        nxt = np.asarray(f.fn(tuple(p)), dtype=float)
        if not np.all(np.isfinite(nxt)):
            return EscapeClass("radial")
        if nxt[2] < 0:
            return EscapeClass("quasi_fatou", n=n)
        if norm_safe(nxt) > radius_cap:
            return EscapeClass("radial")
        p = nxt
    return EscapeClass("undecided", budget=n_max)


# ---------------------------------------------------------------------------
# growth-rate series

def log_plus(v):
    return math.log(v) if v > 1.0 else 0.0


def escape_rate_series(map_handle: MapHandle, x, k_max: int, p: int = 1):
    """a_k = log+ log |map^{kp}(x)| / k, from direct or surrogate magnitudes."""
    if p < 1:
        raise ValueError("period must be positive")
    rec = iterate(map_handle, x, k_max * p)
    ks, aks = [], []
    for k in range(1, k_max + 1):
        idx = k * p
        if idx >= len(rec.rho):
            break
        r = rec.rho[idx]
        ks.append(k)
        aks.append(log_plus(r) / k if math.isfinite(r) else math.inf)
    return ks, aks, rec


def log_domain_series(map_kind: str, start: float, k_max: int,
                      translate: float = 0.0, decay_term: bool = False):
    """Closed-form log-domain orbits.

    "radial-square": returns [rho_0..rho_k] with rho the log magnitude and
    rho' = 2 rho + log1p(c e^{-2 rho}); requires the squaring to dominate the
    translation at the start.
    "axis-tower": returns [t_0..t_k] as BigExp values of the third coordinate
    under t -> t + e^t - translate.
    """
    if map_kind == "radial-square":
        if 2 * start <= math.log(max(translate, 1.0)):
            raise ValueError(
                "magnitude too small for the squaring surrogate; iterate directly")
        out = [float(start)]
        for _ in range(k_max):
            out.append(_radial_square_rho_step(out[-1], translate, decay_term))
        return out
    if map_kind == "axis-tower":
        t = BigExp.from_float(start)
        out = [t]
        for _ in range(k_max):
            t = tower_step(t, translate)
            out.append(t)
        return out
    raise ValueError(f"unknown surrogate kind: {map_kind}")


def tower_step(t: BigExp, translate: float) -> BigExp:
    """One step of t -> t + e^t - translate in the iterated-exp representation."""
    if t.depth == 0:
        v = t.head
        if v < _EXP_MAX:
            nxt = v + math.exp(v) - translate
            if nxt < 0:
                raise ArithmeticError("tower step left the growth regime")
            return BigExp.from_float(nxt)
    # beyond float range the additive terms are vanishing relative corrections
    return t.exp()


# ---------------------------------------------------------------------------
# maximum modulus and the fast-escape proxy

def _fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    phi = math.pi * (3.0 - math.sqrt(5.0))
    z = 1 - 2 * i / n
    r = np.sqrt(np.maximum(0.0, 1 - z * z))
    th = phi * i
    return np.column_stack([r * np.cos(th), r * np.sin(th), z])


def sphere_directions(samples, seed=0, lattice_extent=8):
    """Quasi-uniform directions plus the poles and the vertical lattice
    directions on which the exponential part of the map is extremal."""
    dirs = [_fibonacci_sphere(samples)]
    dirs.append(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]))
    lat = []
    for i in range(-lattice_extent, lattice_extent + 1):
        for j in range(-lattice_extent, lattice_extent + 1):
            lat.append((float(i), float(j)))
    dirs.append(np.array([[i, j, 1.0] for (i, j) in lat]))
    out = np.vstack(dirs)
    return out / np.linalg.norm(out, axis=1)[:, None]


def max_modulus_estimate(map_handle: MapHandle, r: float, samples: int = 2000,
                         seed: int = 0) -> float:
    """Sampled lower bound for max_{|x|=r} |map(x)|, biased with the known
    extremal directions."""
    if samples < 1000:
        raise ValueError("use at least 1000 samples")
    best = 0.0
    if map_handle.dim == 2:
        th = np.linspace(0, 2 * math.pi, samples, endpoint=False)
        pts = r * np.column_stack([np.cos(th), np.sin(th)])
    else:
        pts = r * sphere_directions(samples, seed)
    for p in pts:
        v = map_handle.fn(tuple(p))
        m = math.hypot(*v) if len(v) == 2 else math.sqrt(
            v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        if math.isnan(m):
            continue
        if m > best:
            best = m
    return best


@dataclass(frozen=True)
class FastEscapeResult:
    kind: str                      # "fast" | "not_observed"
    ell: Optional[int] = None


def _vertical_line_invariant(p, tol=1e-9):
    """True if the orbit of p stays on the vertical line through p with the
    upward exponential branch (both horizontal coordinates folding to the
    base-square centre with positive parity)."""
    from .zorich import fold_square
    fr = fold_square(p[0], p[1])
    return (abs(fr.u[0]) <= tol and abs(fr.u[1]) <= tol and fr.sigma == 1)


def orbit_magnitudes_bigexp(f: MapHandle, x, count: int, translate: float):
    """|f^k(x)| for k = 0..count as BigExp, continuing past float overflow
    along invariant vertical lines."""
    p = np.asarray(x, dtype=float)
    out = [BigExp.from_float(norm_safe(p))]
    for _ in range(count):
        nxt = np.asarray(f.fn(tuple(p)), dtype=float)
        if np.all(np.isfinite(nxt)) and math.isfinite(norm_safe(nxt)):
            out.append(BigExp.from_float(norm_safe(nxt)))
            p = nxt
            continue
        # overflow: continue only on an invariant vertical line
        if not _vertical_line_invariant(p):
            break
        t = BigExp.from_float(p[2])
        horiz = math.hypot(p[0], p[1])
        while len(out) < count + 1:
            t = tower_step(t, translate)
            # |x| = sqrt(t^2 + horizontal^2) ~ t at these scales
            mag = t if t.depth > 0 or t.head > 1e8 else BigExp.from_float(
                math.hypot(t.head, horiz))
            out.append(mag)
        break
    return out


def mhat_tower(map_handle: MapHandle, R: float, count: int, samples: int = 2000,
               seed: int = 0, direct_limit: float = 500.0):
    """Iterates of the sampled maximum modulus as BigExp values.

    Beyond the radius range where sampling is meaningful the step uses the
    conservative lower bound M(r) >= e^r (valid on the vertical axis once
    r exceeds the downward translation), keeping the fast-escape test
    one-sided."""
    m = BigExp.from_float(R)
    out = [m]
    for _ in range(count):
        if m.depth == 0 and m.head <= direct_limit:
            est = max_modulus_estimate(map_handle, m.head, samples, seed)
            m = BigExp.from_float(max(est, m.head))
        else:
            m = m.exp()
        out.append(m)
    return out


def fast_escape_test(f: MapHandle, x, R: float, ell_max: int = 4,
                     k_max: int = 12, samples: int = 2000,
                     seed: int = 0) -> FastEscapeResult:
    """Least ell with |f^{k+ell}(x)| >= Mhat^k(R) for all k <= k_max."""
    mhat_R = max_modulus_estimate(f, R, samples, seed)
    if mhat_R <= R:
        raise ValueError("R fails the growth precondition M(R) > R")
    orbit = orbit_magnitudes_bigexp(f, x, k_max + ell_max, f.translate)
    tower = mhat_tower(f, R, k_max, samples, seed)
    for ell in range(ell_max + 1):
        if k_max + ell >= len(orbit):
            break
        ok = all(orbit[k + ell] >= tower[k] for k in range(1, k_max + 1))
        if ok:
            return FastEscapeResult("fast", ell)
    return FastEscapeResult("not_observed")


# ---------------------------------------------------------------------------
# expansion of images of small balls in the beam regime

def ball_growth_check(gm, xi, delta: float, samples: int = 500) -> float:
    """min over sphere samples of |f(x) - f(xi)| / delta; the beam regime
    makes this at least 32."""
    xi = np.asarray(xi, dtype=float)
    L = gm.L
    n1 = round(xi[0] / 2.0)
    n2 = round(xi[1] / 2.0)
    if abs(xi[0] - 2 * n1) + delta >= 1 or abs(xi[1] - 2 * n2) + delta >= 1:
        raise ValueError("ball leaves the fundamental half-beam")
    if xi[2] - delta <= L:
        raise ValueError("ball must sit above the expansion level")
    fxi = np.asarray(gm.eval3(xi[0], xi[1], xi[2]))
    if fxi[2] <= L:
        raise ValueError("image point must sit above the expansion level")
    dirs = _fibonacci_sphere(samples)
    worst = math.inf
    for d in dirs:
        p = xi + delta * d
        fp = np.asarray(gm.eval3(p[0], p[1], p[2]))
        worst = min(worst, float(np.linalg.norm(fp - fxi)) / delta)
    return worst


# ---------------------------------------------------------------------------
# CSV emission

def orbit_csv(record: OrbitRecord, escape: Optional[EscapeClass] = None,
              period: int = 1) -> str:
    """One row per step: k, coordinates (while representable) or the log
    magnitude, the rate a_k, and the classification label."""
    buf = io.StringIO()
    dim = len(record.x0)
    cols = ["k"] + [f"x{i+1}" for i in range(dim)] + ["rho", "a_k", "class"]
    buf.write(",".join(cols) + "\n")
    label = escape.label if escape is not None else ""
    for k, r in enumerate(record.rho):
        if k < len(record.points):
            coords = [f"{float(c)!r}" for c in record.points[k]]
        else:
            coords = [""] * dim
        if k >= 1 and k % period == 0 and math.isfinite(r):
            a = f"{log_plus(r) / (k // period)!r}"
        else:
            a = ""
        rho_s = f"{r!r}" if math.isfinite(r) else ""
        buf.write(",".join([str(k)] + coords + [rho_s, a, label]) + "\n")
    return buf.getvalue()


def rates_csv(ks: Sequence[int], aks: Sequence[float], rec: OrbitRecord,
              escape: Optional[EscapeClass] = None) -> str:
    buf = io.StringIO()
    buf.write("k,rho,a_k,class\n")
    label = escape.label if escape is not None else ""
    for k, a in zip(ks, aks):
        r = rec.rho[k] if k < len(rec.rho) else math.nan
        buf.write(f"{k},{r!r},{a!r},{label}\n")
    return buf.getvalue()
