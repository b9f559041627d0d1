"""Weak* metric on torus probability measures via truncated Fourier moments.

The test family is phi_0 = 1 and, for each nonzero integer frequency vector
enumerated by increasing max-norm with lexicographic tie-break, the pair
(1 + cos(2 pi k.x))/2 then (1 + sin(2 pi k.x))/2.  All functions take values
in [0,1], so with weights 2^-i the metric is bounded by 2 and omitting the
tail beyond truncation K changes any distance by at most 2^(1-K).

The family separates measures on the torus (the moments are exactly the
Fourier coefficients), hence metrizes weak* convergence; distances computed
at different K agree to the tail bound but are only comparable at fixed K, so
the truncation and enumeration version are stamped into every result record.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from toruslab.dynamics import TWO_PI, HyperbolicToralMap, wrap

FAMILY_VERSION = "fourier-maxnorm-lex-v1"
DEFAULT_TRUNCATION = 33
ATOM_MERGE_TOL = 1e-12


class FamilyMismatch(ValueError):
    """Moment vectors built from different test families."""


def _enumerate_frequencies(count: int) -> np.ndarray:
    """First `count` nonzero frequency vectors: shells of constant max-norm,
    lexicographic within a shell."""
    vecs = []
    shell = 0
    while len(vecs) < count:
        shell += 1
        ring = [(k1, k2)
                for k1 in range(-shell, shell + 1)
                for k2 in range(-shell, shell + 1)
                if max(abs(k1), abs(k2)) == shell]
        ring.sort()
        vecs.extend(ring)
    return np.array(vecs[:count], dtype=np.int64)


class TestFunctionFamily:
    """Truncated weighted family phi_0..phi_(K-1) with weights 2^-i."""

    def __init__(self, truncation: int = DEFAULT_TRUNCATION):
        if truncation < 1:
            raise ValueError("truncation must be >= 1")
        self.truncation = int(truncation)
        self.version = FAMILY_VERSION
        n_modes = self.truncation - 1
        # mode i >= 1 uses frequency vector (i-1)//2; even offset cos, odd sin
        self._freqs = _enumerate_frequencies((n_modes + 1) // 2)
        self._is_cos = np.arange(n_modes) % 2 == 0
        self.weights = 2.0 ** -np.arange(self.truncation)
        self._paired = n_modes % 2 == 0  # every frequency carries cos and sin

    def __eq__(self, other):
        return (isinstance(other, TestFunctionFamily)
                and other.truncation == self.truncation
                and other.version == self.version)

    def __hash__(self):
        return hash((self.truncation, self.version))

    def __repr__(self):
        return f"TestFunctionFamily(K={self.truncation})"

    def tail_bound(self) -> float:
        return 2.0 ** (1 - self.truncation)

    def phi_values(self, points) -> np.ndarray:
        """phi_i at each point, shape (N, K)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty((p.shape[0], self.truncation))
        out[:, 0] = 1.0
        self._trig_into(p, out[:, 1:], accumulate=False)
        return out

    def accumulate(self, points, sums) -> None:
        """Add phi_i(points) into the running sums array (N, K) in place."""
        p = np.asarray(points, dtype=float)
        sums[:, 0] += 1.0
        self._trig_into(p, sums[:, 1:], accumulate=True)

    def _trig_into(self, p, block, accumulate: bool) -> None:
        n_modes = self.truncation - 1
        if n_modes == 0:
            return
        phases = TWO_PI * (p @ self._freqs.T.astype(float))
        if self._paired:
            c = 0.5 + 0.5 * np.cos(phases)
            s = 0.5 + 0.5 * np.sin(phases)
            if accumulate:
                block[:, 0::2] += c
                block[:, 1::2] += s
            else:
                block[:, 0::2] = c
                block[:, 1::2] = s
        else:
            idx_cos = np.flatnonzero(self._is_cos)
            idx_sin = np.flatnonzero(~self._is_cos)
            c = 0.5 + 0.5 * np.cos(phases[:, idx_cos // 2])
            s = 0.5 + 0.5 * np.sin(phases[:, idx_sin // 2])
            if accumulate:
                block[:, idx_cos] += c
                block[:, idx_sin] += s
            else:
                block[:, idx_cos] = c
                block[:, idx_sin] = s

    def lebesgue_moments(self) -> np.ndarray:
        """Exact integrals: 1 for phi_0, 1/2 for every trig mode."""
        m = np.full(self.truncation, 0.5)
        m[0] = 1.0
        return m


@dataclass(frozen=True)
class MomentVector:
    """Truncated moments m_i = integral of phi_i, tagged with the family."""
    values: np.ndarray
    truncation: int
    version: str = FAMILY_VERSION

    def distance(self, other: "MomentVector") -> float:
        if (self.truncation != other.truncation
                or self.version != other.version):
            raise FamilyMismatch(
                f"K={self.truncation}/{self.version} vs "
                f"K={other.truncation}/{other.version}")
        w = 2.0 ** -np.arange(self.truncation)
        return float(np.abs(self.values - other.values) @ w)


class LebesgueMeasure:
    """Normalized Lebesgue measure; moments are known in closed form."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "LEBESGUE"


LEBESGUE = LebesgueMeasure()


class DiscreteMeasure:
    """Finitely supported probability measure: atoms (N,2) and weights (N,)."""

    def __init__(self, atoms, weights=None, merge_atoms: bool = True):
        a = np.atleast_2d(np.asarray(atoms, dtype=float))
        if a.size == 0:
            raise ValueError("atom list must be non-empty")
        a = wrap(a)
        if weights is None:
            w = np.full(len(a), 1.0 / len(a))
        else:
            w = np.asarray(weights, dtype=float)
            if w.shape != (len(a),):
                raise ValueError("weights must match atoms")
            if np.any(w < 0):
                raise ValueError("weights must be nonnegative")
            total = float(w.sum())
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"weights must sum to 1, got {total!r}")
        if merge_atoms:
            a, w = _coalesce(a, w)
        self.atoms = a
        self.weights = w

    @classmethod
    def dirac(cls, point) -> "DiscreteMeasure":
        return cls(np.asarray(point, dtype=float).reshape(1, 2), np.array([1.0]))

    def __len__(self):
        return len(self.atoms)

    def __repr__(self):
        return f"DiscreteMeasure({len(self)} atoms)"


def _coalesce(atoms: np.ndarray, weights: np.ndarray):
    """Merge atoms closer than ATOM_MERGE_TOL (torus metric, via rounding)."""
    keys = np.round(atoms / ATOM_MERGE_TOL).astype(np.int64)
    # identify 1/tol with 0 across the seam
    span = int(round(1.0 / ATOM_MERGE_TOL))
    keys = np.mod(keys, span)
    uniq, first, inverse = np.unique(keys, axis=0, return_index=True,
                                     return_inverse=True)
    if len(uniq) == len(atoms):
        return atoms, weights
    merged_w = np.zeros(len(uniq))
    np.add.at(merged_w, inverse.ravel(), weights)
    return atoms[first], merged_w


MeasureLike = DiscreteMeasure | LebesgueMeasure


def empirical_measure(map: HyperbolicToralMap, point, n: int) -> DiscreteMeasure:
    """Uniform weights 1/n on the length-n forward orbit (atoms coalesced,
    so periodic orbits yield exact finitely-supported measures)."""
    orbit = map.orbit(point, n)
    return DiscreteMeasure(orbit, np.full(n, 1.0 / n))


def moments(measure: MeasureLike, family: TestFunctionFamily) -> MomentVector:
    if isinstance(measure, LebesgueMeasure):
        vals = family.lebesgue_moments()
    elif isinstance(measure, DiscreteMeasure):
        vals = measure.weights @ family.phi_values(measure.atoms)
    else:
        raise TypeError(f"unsupported measure {type(measure).__name__}")
    return MomentVector(values=vals, truncation=family.truncation,
                        version=family.version)


def weak_star_distance(mu: MeasureLike, nu: MeasureLike,
                       family: TestFunctionFamily) -> float:
    """dist*(mu, nu) = sum_i 2^-i |m_i(mu) - m_i(nu)|, bounded by 2."""
    return moments(mu, family).distance(moments(nu, family))


def pushforward(map: HyperbolicToralMap, measure: DiscreteMeasure) -> DiscreteMeasure:
    """Image measure under f: atoms mapped, weights carried along."""
    return DiscreteMeasure(map.step(measure.atoms), measure.weights.copy())


def invariance_defect(map: HyperbolicToralMap, point, n: int,
                      family: TestFunctionFamily) -> float:
    """dist* between the time-n empirical measure and its pushforward.

    The pushforward of the empirical measure of x is the empirical measure of
    f(x), so both moment vectors come from one orbit of length n+1.  The two
    sums differ only in the endpoint terms, which bounds the result by 2/n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    orbit = map.orbit(point, n + 1)
    phis = family.phi_values(orbit)
    m_here = phis[:n].sum(axis=0) / n
    m_next = phis[1:].sum(axis=0) / n
    return float(np.abs(m_here - m_next) @ family.weights)
