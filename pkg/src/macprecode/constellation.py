"""Discrete modulation alphabets and their per-user vector extensions.

All constellations are zero mean with unit average energy, so a precoder
column budget translates directly into transmit power.  Vector alphabets
enumerate every antenna combination of a scalar constellation; the joint
enumeration sizes grow geometrically, so both builders carry an explicit
cap and the search-space counters work in exact integer arithmetic.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SizeLimitError, ValidationError

# Largest per-user vector alphabet we will materialize (Q ** n_tx entries).
DEFAULT_VECTOR_CAP = 2**20

_NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class Constellation:
    """A scalar modulation alphabet.

    points : complex ndarray of shape (Q,), zero mean and unit average energy
    kind   : lowercase family name ("bpsk", "qpsk", "psk", "qam", "pam")
    order  : number of points Q
    """

    points: np.ndarray
    kind: str
    order: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.shape[0] != self.order:
            raise ValidationError("points must be a flat array of length Q")
        if abs(pts.mean()) > _NORMALIZATION_TOL:
            raise ValidationError("constellation is not zero mean")
        if abs(np.mean(np.abs(pts) ** 2) - 1.0) > _NORMALIZATION_TOL:
            raise ValidationError("constellation is not unit energy")
        if len(np.unique(np.round(pts, 12))) != self.order:
            raise ValidationError("constellation points are not distinct")

    @property
    def bits(self) -> float:
        return float(np.log2(self.order))


@dataclass(frozen=True)
class VectorAlphabet:
    """All antenna-stacked symbol vectors of one user.

    vectors : complex ndarray of shape (Q**n_tx, n_tx)
    """

    vectors: np.ndarray
    base: Constellation = field(repr=False)
    n_tx: int = 0

    def __post_init__(self):
        vec = np.asarray(self.vectors, dtype=np.complex128)
        vec.setflags(write=False)
        object.__setattr__(self, "vectors", vec)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def bits(self) -> float:
        return float(np.log2(self.size))


def _psk_points(order: int, offset: float) -> np.ndarray:
    angles = offset + 2.0 * np.pi * np.arange(order) / order
    pts = np.exp(1j * angles)
    # Kill the residual imaginary dust on axis-aligned points so that the
    # zero-mean check is exact for every order.
    pts = np.round(pts, 15)
    return pts - pts.mean()


def _pam_levels(order: int) -> np.ndarray:
    levels = np.arange(-(order - 1), order, 2, dtype=np.float64)
    return levels / np.sqrt(np.mean(levels**2))


def _qam_points(order: int) -> np.ndarray:
    bits = int(np.log2(order))
    n_re = 2 ** ((bits + 1) // 2)
    n_im = order // n_re
    re = np.arange(-(n_re - 1), n_re, 2, dtype=np.float64)
    im = np.arange(-(n_im - 1), n_im, 2, dtype=np.float64)
    grid = (re[None, :] + 1j * im[::-1, None]).ravel()  # row-major, top row first
    return grid / np.sqrt(np.mean(np.abs(grid) ** 2))


def build_constellation(kind: str, order: int) -> Constellation:
    """Build a named constellation with Q points.

    Supported kinds: "bpsk" (Q=2), "qpsk" (Q=4), "psk" (any Q>=2),
    "qam" (Q a power of two, Q>=4), "pam" (any Q>=2).
    """
    name = kind.strip().lower()
    if order < 2:
        raise ConfigurationError(f"constellation order must be >= 2, got {order}")
    if name == "bpsk":
        if order != 2:
            raise ConfigurationError("bpsk requires order 2")
        points = np.array([1.0, -1.0], dtype=np.complex128)
    elif name == "qpsk":
        if order != 4:
            raise ConfigurationError("qpsk requires order 4")
        points = _psk_points(4, np.pi / 4.0)
    elif name == "psk":
        points = _psk_points(order, 0.0)
    elif name == "qam":
        if order < 4 or (order & (order - 1)) != 0:
            raise ConfigurationError("qam requires a power-of-two order >= 4")
        points = _qam_points(order)
    elif name == "pam":
        points = _pam_levels(order).astype(np.complex128)
    else:
        raise ConfigurationError(f"unknown constellation kind {kind!r}")
    return Constellation(points=points, kind=name, order=order)


def vector_alphabet(
    constellation: Constellation, n_tx: int, cap: int = DEFAULT_VECTOR_CAP
) -> VectorAlphabet:
    """Enumerate all Q**n_tx symbol vectors over n_tx antennas.

    Index order is lexicographic with the first antenna cycling fastest:
    vector j has antenna a carrying point index (j // Q**a) % Q.
    """
    if n_tx < 1:
        raise ConfigurationError("n_tx must be >= 1")
    total = constellation.order**n_tx
    if total > cap:
        raise SizeLimitError(
            f"vector alphabet would hold {total} entries, above the cap {cap}"
        )
    grids = np.meshgrid(*([constellation.points] * n_tx), indexing="ij")
    # meshgrid 'ij' makes the LAST axis vary fastest after raveling; stack so
    # that antenna 0 is the fastest-cycling index instead.
    vectors = np.stack([g.ravel(order="F") for g in grids], axis=1)
    return VectorAlphabet(vectors=vectors, base=constellation, n_tx=n_tx)


def search_space_size(orders: list[int], n_tx: int, mode: str) -> int:
    """Exact precoder-search alphabet count for K users with Q_k points each.

    mode "statistical": one per-user enumeration per precoder update,
    sum over users of Q_k ** (2 * n_tx).
    mode "instantaneous": a joint enumeration per channel realization,
    (prod Q_k) ** (2 * n_tx).
    Exact Python integers; no floating point.
    """
    if n_tx < 1:
        raise ConfigurationError("n_tx must be >= 1")
    if not orders or any(int(q) < 2 for q in orders):
        raise ConfigurationError("orders must be a nonempty list of ints >= 2")
    qs = [int(q) for q in orders]
    if mode == "statistical":
        return sum(q ** (2 * n_tx) for q in qs)
    if mode == "instantaneous":
        joint = 1
        for q in qs:
            joint *= q
        return joint ** (2 * n_tx)
    raise ConfigurationError(f"unknown mode {mode!r}")
