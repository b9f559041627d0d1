"""Adler-Weiss Markov partition of the cat map and cylinder statistics.

The partition is the classical net construction for [[2,1],[1,1]]: the
boundary consists of one segment of the unstable eigenline through the origin
and one of the stable eigenline, with golden-ratio extents chosen so that
every segment endpoint lands back on the other segment modulo Z^2.  The
complement falls into five rectangles whose sides are parallel to the
eigendirections; side lengths are the two golden lengths q = g/sqrt(2-g) and
r = g*q where g = (sqrt(5)-1)/2.

The construction is self-checking: tiling (areas sum to 1), the geometric
Markov property (images cross partition rectangles in single full-width
unstable stripes), invariance of the boundary net under the map, and the
subshift spectral radius (3+sqrt(5))/2 are all verified before the partition
is returned.  Because every image stripe is a single crossing, depth-n
cylinders correspond one-to-one to admissible symbol words and their number
can be counted exactly by transition-matrix powers.

Cylinder tables built from a common start set are exactly shift-consistent:
marginalizing a depth-n table over its last symbol reproduces the depth-(n-1)
table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from toruslab.dynamics import HyperbolicToralMap, wrap
from toruslab.weakstar import DiscreteMeasure
from toruslab.basin import SampleGrid

CAT_MATRIX = ((2, 1), (1, 1))
SPECTRAL_RADIUS_TOL = 1e-6
AREA_TOL = 1e-9
BOUNDARY_TOL = 1e-9
LOCATE_TOL = 1e-12
# expansivity-scale gate on piece size, measured as torus diameter; the
# five-rectangle net tops out at 0.588
DIAMETER_GATE = 0.6
ADEQUACY_FACTOR = 10
_LOCATE_CHUNK = 1 << 20

Itinerary = Tuple[int, ...]


class ConstructionInvalid(RuntimeError):
    """Partition failed its construction-time self-checks."""


class LocationFailure(RuntimeError):
    """A point was not claimed by any partition piece."""


class InsufficientSamples(RuntimeError):
    """No requested depth meets the sample-adequacy rule."""


@dataclass(frozen=True)
class OrbitSource:
    """Cylinder source: one long forward orbit from a seed point."""
    point: tuple
    length: int


CylinderSource = OrbitSource | SampleGrid | DiscreteMeasure


class MarkovPartition:
    """Five-rectangle Markov partition for the linear cat map.

    pieces: polygon vertex lists (xy, inside the unit square); boxes: the same
    rectangles as intervals in unstable/stable coordinates; transition: 0/1
    admissibility matrix of symbol pairs.
    """

    def __init__(self):
        s5 = math.sqrt(5.0)
        g = (s5 - 1.0) / 2.0
        nrm = math.sqrt(2.0 - g)
        self._frame = np.array([[1.0, g], [-g, 1.0]]) / nrm  # rows u_hat, s_hat
        q = g / nrm
        r = (1.0 - g) / nrm
        p = q + r
        # (xi0, xi1, eta0, eta1); index order fixes the symbol alphabet
        self.boxes = [
            (0.0, q, 0.0, q),
            (r, p, -q, 0.0),
            (0.0, r, -q, 0.0),
            (p, p + q, 0.0, r),
            (q, p, 0.0, r),
        ]
        self.k = len(self.boxes)
        self.expansion = (3.0 + s5) / 2.0
        self._lattice = self._lattice_vectors(4)
        self._map = HyperbolicToralMap(CAT_MATRIX)
        self._piece_offsets = self._compute_offsets()
        self.transition = self._transition_matrix()
        self.max_diameter = max(self._torus_diameter(b) for b in self.boxes)
        self.pieces = [self._polygon(b) for b in self.boxes]
        self._validate()

    # -- geometry helpers ----------------------------------------------------

    def _lattice_vectors(self, reach: int) -> np.ndarray:
        basis = self._frame @ np.eye(2)
        out = []
        for m in range(-reach, reach + 1):
            for n in range(-reach, reach + 1):
                out.append(m * basis[:, 0] + n * basis[:, 1])
        return np.array(out)

    def to_frame(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self._frame.T

    def from_frame(self, coords: np.ndarray) -> np.ndarray:
        return np.asarray(coords, dtype=float) @ self._frame

    def _compute_offsets(self) -> list[np.ndarray]:
        """Per piece: lattice offsets whose translate can meet the image of
        the unit square in frame coordinates."""
        corners = self.to_frame(np.array([[0.0, 0.0], [1.0, 0.0],
                                          [0.0, 1.0], [1.0, 1.0]]))
        lo = corners.min(axis=0) - 0.1
        hi = corners.max(axis=0) + 0.1
        out = []
        for (x0, x1, e0, e1) in self.boxes:
            keep = []
            for gvec in self._lattice:
                if (x1 + gvec[0] >= lo[0] and x0 + gvec[0] <= hi[0]
                        and e1 + gvec[1] >= lo[1] and e0 + gvec[1] <= hi[1]):
                    keep.append(gvec)
            out.append(np.array(keep))
        return out

    def _transition_matrix(self) -> np.ndarray:
        """Pair admissibility from exact interval geometry of the images.

        Raises if any image fails to cross a rectangle as one full-width
        unstable stripe (the property that makes words countable by matrix
        powers).
        """
        lam = self.expansion
        M = np.zeros((self.k, self.k), dtype=np.int64)
        for i, (x0, x1, e0, e1) in enumerate(self.boxes):
            ix0, ix1 = lam * x0, lam * x1
            ie0, ie1 = e0 / lam, e1 / lam
            for j, (y0, y1, f0, f1) in enumerate(self.boxes):
                crossings = 0
                for gvec in self._lattice:
                    ox0 = max(ix0, y0 + gvec[0])
                    ox1 = min(ix1, y1 + gvec[0])
                    oy0 = max(ie0, f0 + gvec[1])
                    oy1 = min(ie1, f1 + gvec[1])
                    if ox1 - ox0 < 1e-12 or oy1 - oy0 < 1e-12:
                        continue
                    crossings += 1
                    full_u = (abs(ox0 - (y0 + gvec[0])) < 1e-9
                              and abs(ox1 - (y1 + gvec[0])) < 1e-9)
                    full_s = (abs(oy0 - ie0) < 1e-9 and abs(oy1 - ie1) < 1e-9)
                    if not (full_u and full_s):
                        raise ConstructionInvalid(
                            f"image of piece {i} crosses piece {j} partially")
                if crossings > 1:
                    raise ConstructionInvalid(
                        f"image of piece {i} crosses piece {j} "
                        f"{crossings} times")
                M[i, j] = 1 if crossings else 0
        return M

    def _torus_diameter(self, box, samples: int = 401) -> float:
        du = box[1] - box[0]
        ds = box[3] - box[2]
        aa = np.linspace(-du, du, samples)
        bb = np.linspace(-ds, ds, samples)
        AA, BB = np.meshgrid(aa, bb, indexing="ij")
        best = np.full(AA.shape, np.inf)
        for gvec in self._lattice:
            np.minimum(best, np.hypot(AA - gvec[0], BB - gvec[1]), out=best)
        return float(best.max())

    def _polygon(self, box) -> np.ndarray:
        """Plane lift of the rectangle, anchored with its lower-left corner
        in [0,1)^2 (the polygon may extend past the square; the unit-square
        drawing wraps and is available from piece_fragments)."""
        x0, x1, e0, e1 = box
        corners = np.array([[x0, e0], [x1, e0], [x1, e1], [x0, e1]])
        xy = self.from_frame(corners)
        return xy - np.floor(xy.min(axis=0))

    # -- validation ----------------------------------------------------------

    def _validate(self):
        areas = [(b[1] - b[0]) * (b[3] - b[2]) for b in self.boxes]
        if abs(sum(areas) - 1.0) > AREA_TOL:
            raise ConstructionInvalid(f"piece areas sum to {sum(areas)!r}")
        self.areas = areas
        if self.max_diameter >= DIAMETER_GATE:
            raise ConstructionInvalid(
                f"piece torus diameter {self.max_diameter:.4f} exceeds "
                f"gate {DIAMETER_GATE}")
        rho = self._power_iteration(self.transition)
        if abs(rho - self.expansion) > SPECTRAL_RADIUS_TOL:
            raise ConstructionInvalid(
                f"transition spectral radius {rho!r} != {self.expansion!r}")
        self.validate_markov_boundary(1000)
        # every point of a probe grid must be claimed by some piece
        probe = SampleGrid(resolution=64).chunk(0, 64 * 64)
        locate(self, probe)

    @staticmethod
    def _power_iteration(M: np.ndarray, iters: int = 200) -> float:
        v = np.ones(M.shape[0])
        rho = 0.0
        for _ in range(iters):
            w = M @ v
            rho = float(np.linalg.norm(w) / np.linalg.norm(v))
            v = w / np.linalg.norm(w)
        return rho

    def validate_markov_boundary(self, samples_per_edge: int = 1000) -> float:
        """Re-assert the boundary conditions by sampling.

        Points on stable (vertical, in frame coordinates) edges must map into
        the union of stable edges; unstable edges must pull back into
        unstable edges.  Returns the worst observed defect and raises
        ConstructionInvalid above BOUNDARY_TOL.
        """
        worst = 0.0
        t = np.linspace(0.0, 1.0, samples_per_edge)
        for (x0, x1, e0, e1) in self.boxes:
            for xw in (x0, x1):
                pts = np.column_stack([np.full_like(t, xw),
                                       e0 + (e1 - e0) * t])
                img = self.to_frame(self._map.step(wrap(self.from_frame(pts))))
                worst = max(worst, self._dist_to_edges(img, stable=True))
            for ew in (e0, e1):
                pts = np.column_stack([x0 + (x1 - x0) * t,
                                       np.full_like(t, ew)])
                img = self.to_frame(
                    self._map.step_inverse(wrap(self.from_frame(pts))))
                worst = max(worst, self._dist_to_edges(img, stable=False))
        if worst > BOUNDARY_TOL:
            raise ConstructionInvalid(
                f"boundary net is not invariant: defect {worst:.3e}")
        return worst

    def _dist_to_edges(self, coords: np.ndarray, stable: bool) -> float:
        best = np.full(len(coords), np.inf)
        for (x0, x1, e0, e1) in self.boxes:
            if stable:
                walls = ((x0, e0, e1), (x1, e0, e1))
            else:
                walls = ((e0, x0, x1), (e1, x0, x1))
            for (w, a0, a1) in walls:
                for gvec in self._lattice:
                    if stable:
                        dperp = coords[:, 0] - (w + gvec[0])
                        along = coords[:, 1] - gvec[1]
                    else:
                        dperp = coords[:, 1] - (w + gvec[1])
                        along = coords[:, 0] - gvec[0]
                    dpar = np.maximum(a0 - along, 0) + np.maximum(along - a1, 0)
                    np.minimum(best, np.hypot(dperp, dpar), out=best)
        return float(best.max())

    def piece_fragments(self) -> list[list[np.ndarray]]:
        """Unit-square drawing: each rectangle clipped against the cells it
        crosses and translated back, as in the classical figure.  Every
        fragment polygon has all vertices inside [0,1]^2."""
        out = []
        for poly in self.pieces:
            frags = []
            lo = np.floor(poly.min(axis=0)).astype(int)
            hi = np.floor(poly.max(axis=0) - 1e-12).astype(int)
            for cx in range(lo[0], hi[0] + 1):
                for cy in range(lo[1], hi[1] + 1):
                    clipped = _clip_to_cell(poly, cx, cy)
                    if clipped is not None:
                        frags.append(clipped - np.array([cx, cy], dtype=float))
            out.append(frags)
        return out

    def piece_polygons(self) -> list[list[list[list[float]]]]:
        """JSON-ready nested polygon list, one fragment list per piece."""
        return [[f.tolist() for f in frags] for frags in self.piece_fragments()]


def _clip_to_cell(poly: np.ndarray, cx: int, cy: int) -> np.ndarray | None:
    """Sutherland-Hodgman clip of a convex polygon to [cx,cx+1]x[cy,cy+1]."""
    pts = [tuple(v) for v in poly]
    for axis, bound, keep_le in ((0, cx, False), (0, cx + 1, True),
                                 (1, cy, False), (1, cy + 1, True)):
        if not pts:
            return None
        nxt = []
        for a, b in zip(pts, pts[1:] + pts[:1]):
            ina = a[axis] <= bound if keep_le else a[axis] >= bound
            inb = b[axis] <= bound if keep_le else b[axis] >= bound
            if ina:
                nxt.append(a)
            if ina != inb:
                t = (bound - a[axis]) / (b[axis] - a[axis])
                nxt.append((a[0] + t * (b[0] - a[0]),
                            a[1] + t * (b[1] - a[1])))
        pts = nxt
    if len(pts) < 3:
        return None
    arr = np.array(pts)
    # discard degenerate slivers produced by boundary contact
    if _polygon_area(arr) < 1e-12:
        return None
    return arr


def _polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


_PARTITION_CACHE: MarkovPartition | None = None


def cat_map_partition() -> MarkovPartition:
    """The validated five-rectangle partition (cached; construction runs the
    full self-check suite once per process)."""
    global _PARTITION_CACHE
    if _PARTITION_CACHE is None:
        _PARTITION_CACHE = MarkovPartition()
    return _PARTITION_CACHE


def locate(partition: MarkovPartition, points) -> np.ndarray | int:
    """Symbol of the piece containing each point.

    Boundary points go to the lowest piece index whose closed rectangle
    contains them (tolerance LOCATE_TOL).  Raises LocationFailure if any
    point is unclaimed.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    out = np.full(len(pts), -1, dtype=np.int8)
    for i0 in range(0, len(pts), _LOCATE_CHUNK):
        out[i0:i0 + _LOCATE_CHUNK] = _locate_chunk(partition,
                                                   pts[i0:i0 + _LOCATE_CHUNK])
    if single:
        return int(out[0])
    return out


def _locate_chunk(partition: MarkovPartition, pts: np.ndarray) -> np.ndarray:
    xe = partition.to_frame(pts)
    sym = np.full(len(pts), -1, dtype=np.int8)
    for idx, (x0, x1, e0, e1) in enumerate(partition.boxes):
        todo = sym < 0
        if not np.any(todo):
            break
        xi = xe[todo, 0]
        eta = xe[todo, 1]
        hit = np.zeros(len(xi), dtype=bool)
        for gvec in partition._piece_offsets[idx]:
            hit |= ((xi >= x0 + gvec[0] - LOCATE_TOL)
                    & (xi <= x1 + gvec[0] + LOCATE_TOL)
                    & (eta >= e0 + gvec[1] - LOCATE_TOL)
                    & (eta <= e1 + gvec[1] + LOCATE_TOL))
        target = np.flatnonzero(todo)[hit]
        sym[target] = idx
    if np.any(sym < 0):
        bad = pts[sym < 0][0]
        raise LocationFailure(f"no piece claims point {bad.tolist()}")
    return sym


def itinerary(map: HyperbolicToralMap, partition: MarkovPartition, point,
              n: int) -> Itinerary:
    """Symbols of point, f(point), ..., f^(n-1)(point)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    orbit = map.orbit(point, n)
    return tuple(int(s) for s in locate(partition, orbit))


@dataclass
class CylinderTable:
    """Empirical distribution over depth-n cylinders (itinerary words)."""
    depth: int
    counts: Dict[Itinerary, int]
    total: int

    def marginal(self) -> "CylinderTable":
        """Drop the last symbol: the exact depth-(n-1) table for the same
        start set."""
        out: Dict[Itinerary, int] = {}
        for word, c in self.counts.items():
            key = word[:-1]
            out[key] = out.get(key, 0) + c
        return CylinderTable(depth=self.depth - 1, counts=out,
                             total=self.total)


def _symbol_windows(symbols: np.ndarray, depth: int, n_starts: int,
                    k: int) -> CylinderTable:
    """Table of length-`depth` windows at starts 0..n_starts-1."""
    codes = np.zeros(n_starts, dtype=np.int64)
    for j in range(depth):
        codes = codes * k + symbols[j:j + n_starts]
    vals, cnts = np.unique(codes, return_counts=True)
    counts: Dict[Itinerary, int] = {}
    for v, c in zip(vals.tolist(), cnts.tolist()):
        word = []
        for _ in range(depth):
            word.append(v % k)
            v //= k
        counts[tuple(reversed(word))] = c
    return CylinderTable(depth=depth, counts=counts, total=int(cnts.sum()))


def _source_symbols(map: HyperbolicToralMap, partition: MarkovPartition,
                    source: CylinderSource, max_depth: int):
    """(symbols, n_starts, layout): layout 'orbit' gives a 1-d symbol stream,
    'columns' a (max_depth, N) array of per-start itineraries."""
    if isinstance(source, OrbitSource):
        if source.length < max_depth:
            raise ValueError("orbit shorter than requested depth")
        orbit = map.orbit(np.asarray(source.point, dtype=float),
                          source.length)
        symbols = locate(partition, orbit)
        return symbols, source.length - max_depth + 1, "orbit"
    if isinstance(source, SampleGrid):
        starts = source.chunk(0, source.size,
                              source._offsets() if source.jitter else None)
    elif isinstance(source, DiscreteMeasure):
        if np.ptp(source.weights) > 1e-12:
            raise ValueError(
                "cylinder counts need uniform atom weights; build per-"
                "component tables and combine with weighted_merge")
        starts = source.atoms
    else:
        raise TypeError(f"unsupported source {type(source).__name__}")
    cols = np.empty((max_depth, len(starts)), dtype=np.int8)
    x = starts
    for j in range(max_depth):
        cols[j] = locate(partition, x)
        if j + 1 < max_depth:
            x = map.step(x)
    return cols, len(starts), "columns"


def entropy_tables(map: HyperbolicToralMap, partition: MarkovPartition,
                   source: CylinderSource,
                   depths: Sequence[int]) -> Dict[int, CylinderTable]:
    """Cylinder tables at several depths from one shared start set."""
    depths = sorted(set(int(d) for d in depths))
    if depths[0] < 1:
        raise ValueError("depths must be >= 1")
    max_depth = depths[-1]
    symbols, n_starts, layout = _source_symbols(map, partition, source,
                                                max_depth)
    out = {}
    for d in depths:
        if layout == "orbit":
            out[d] = _symbol_windows(symbols, d, n_starts, partition.k)
        else:
            flat = symbols[:d].T.copy()
            codes = np.zeros(n_starts, dtype=np.int64)
            for j in range(d):
                codes = codes * partition.k + flat[:, j]
            vals, cnts = np.unique(codes, return_counts=True)
            counts: Dict[Itinerary, int] = {}
            for v, c in zip(vals.tolist(), cnts.tolist()):
                word = []
                for _ in range(d):
                    word.append(v % partition.k)
                    v //= partition.k
                counts[tuple(reversed(word))] = c
            out[d] = CylinderTable(depth=d, counts=counts,
                                   total=int(cnts.sum()))
    return out


def cylinder_frequencies(map: HyperbolicToralMap, partition: MarkovPartition,
                         source: CylinderSource, n: int) -> CylinderTable:
    """Empirical cylinder distribution at depth n."""
    return entropy_tables(map, partition, source, [n])[n]


def weighted_merge(tables: Sequence[CylinderTable],
                   weights: Sequence[float]) -> CylinderTable:
    """Mixture table: counts rescaled so component masses match the weights.

    Counts stay integers (rounded); every surviving itinerary was observed in
    some component.
    """
    if len(tables) != len(weights):
        raise ValueError("one weight per table")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")
    depth = tables[0].depth
    if any(t.depth != depth for t in tables):
        raise ValueError("tables must share a depth")
    base = max(t.total for t in tables)
    out: Dict[Itinerary, int] = {}
    total = 0
    for t, w in zip(tables, weights):
        scale = w * base / t.total
        for word, c in t.counts.items():
            add = int(round(c * scale))
            if add > 0:
                out[word] = out.get(word, 0) + add
                total += add
    return CylinderTable(depth=depth, counts=out, total=total)


def partition_entropy(table: CylinderTable) -> float:
    """Plug-in entropy -sum p log p (natural log, 0 log 0 = 0)."""
    if table.total <= 0:
        raise ValueError("table is empty")
    c = np.array(list(table.counts.values()), dtype=float)
    pr = c / table.total
    return float(-np.sum(pr * np.log(pr)))


@dataclass
class EntropyRateResult:
    """H(depth)/depth at the deepest adequate depth, with the full scan."""
    h_est: float
    depth_used: int
    sequence: list  # (depth, h_over_n, observed_cylinders, adequate)
    adequacy_factor: int = ADEQUACY_FACTOR


def entropy_rate_estimate(map: HyperbolicToralMap,
                          partition: MarkovPartition,
                          source: CylinderSource,
                          n_range: Sequence[int]) -> EntropyRateResult:
    """Entropy rate from plug-in cylinder entropies.

    A depth is adequate when the sample count is at least ADEQUACY_FACTOR
    times the number of observed cylinders; the estimate is taken at the
    deepest adequate depth and the whole (depth, H/depth) sequence is
    retained.
    """
    tables = entropy_tables(map, partition, source, n_range)
    seq = []
    best = None
    for d in sorted(tables):
        t = tables[d]
        observed = len(t.counts)
        adequate = t.total >= ADEQUACY_FACTOR * observed
        h_over_n = partition_entropy(t) / d
        seq.append((d, h_over_n, observed, adequate))
        if adequate:
            best = (d, h_over_n)
    if best is None:
        raise InsufficientSamples(
            f"no depth in {list(n_range)} meets the {ADEQUACY_FACTOR}x "
            "sample-adequacy rule")
    return EntropyRateResult(h_est=best[1], depth_used=best[0], sequence=seq)


@dataclass
class CountRates:
    rates: list            # (n, log(#cylinders)/n)
    k0_est: float
    counts: list           # (n, exact word count)


def cylinder_count_rate(partition: MarkovPartition,
                        n_range: Sequence[int]) -> CountRates:
    """log(#words)/n from exact admissible-word counts (matrix powers).

    Counting uses Python integers, so arbitrary depths stay exact.
    """
    ns = sorted(set(int(n) for n in n_range))
    if ns[0] < 1:
        raise ValueError("depths must be >= 1")
    M = [[int(v) for v in row] for row in partition.transition]
    k = partition.k
    vec = [1] * k
    counts = {1: sum(vec)}
    power = vec
    for n in range(2, ns[-1] + 1):
        power = [sum(M[i][j] * power[j] for j in range(k)) for i in range(k)]
        counts[n] = sum(power)
    rates = [(n, math.log(counts[n]) / n) for n in ns]
    return CountRates(rates=rates, k0_est=max(r for _, r in rates),
                      counts=[(n, counts[n]) for n in ns])


def entropy_count_bound_check(map: HyperbolicToralMap,
                              partition: MarkovPartition,
                              source: CylinderSource, epsilon: float, n: int,
                              k0_range: Sequence[int] = range(1, 15)) -> float:
    """Margin of the cylinder-counting entropy bound.

    A is the smallest union of depth-n cylinders with empirical mass above
    1 - epsilon (largest counts first).  Returns

        log #A  -  [ H_n - n K0 eps + eps log eps + (1-eps) log(1-eps) ]

    which should be nonnegative up to sampling error.
    """
    if not 0 < epsilon < 0.25:
        raise ValueError("epsilon must be in (0, 1/4)")
    table = cylinder_frequencies(map, partition, source, n)
    h = partition_entropy(table)
    k0 = cylinder_count_rate(partition, k0_range).k0_est
    counts = sorted(table.counts.values(), reverse=True)
    need = (1.0 - epsilon) * table.total
    mass = 0
    taken = 0
    for c in counts:
        mass += c
        taken += 1
        if mass > need:
            break
    lhs = math.log(taken)
    rhs = (h - n * k0 * epsilon + epsilon * math.log(epsilon)
           + (1.0 - epsilon) * math.log(1.0 - epsilon))
    return lhs - rhs
