"""Sector decomposition of the spectral plane for a constant diagonal B.

The lines Re((b_k - b_l) lam) = 0 cut the plane into sectors inside which the
order of Re(b_j lam) is fixed.  Each sector can be translated outwards along
its bisector so that the neighbouring critical strips are covered; the price
is a lower bound Re((b_k - b_l) lam) > -h for ordered pairs.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import SectorGeometryError, ValidationError

TWO_PI = 2.0 * np.pi
ANGLE_TOL = 1e-12


@dataclass(frozen=True)
class DiagB:
    """Diagonal of the constant matrix B."""

    b: tuple

    def __init__(self, b):
        vals = tuple(complex(v) for v in b)
        if not vals:
            raise ValidationError("B must have at least one entry")
        for j, v in enumerate(vals):
            if v == 0:
                raise ValidationError(f"zero diagonal entry in B (index {j + 1})")
            if not np.isfinite(v):
                raise ValidationError("B entries must be finite")
        object.__setattr__(self, "b", vals)

    @property
    def n(self):
        return len(self.b)

    def array(self):
        return np.array(self.b, dtype=complex)


@dataclass(frozen=True)
class Sector:
    """Open angular sector (alpha_lo, alpha_hi); ``full`` marks the whole plane."""

    kappa: int
    alpha_lo: float
    alpha_hi: float
    full: bool = False

    @property
    def width(self):
        return self.alpha_hi - self.alpha_lo

    @property
    def bisector(self):
        return 0.5 * (self.alpha_lo + self.alpha_hi)


@dataclass(frozen=True)
class ExtendedSector:
    """Sector translated by ``r`` along its bisector, with its constants.

    ``perm[i]`` is the original index of the i-th entry in sector order;
    ``blocks`` are the multiplicities of the distinct ordered values ``beta``.
    """

    base: Sector
    r: float
    apex: complex
    h: float
    lam0: float
    perm: tuple
    blocks: tuple
    beta: tuple
    neighbours: tuple = field(default=())

    @property
    def block_index(self):
        """Block label of every position in sector order."""
        out = []
        for i, size in enumerate(self.blocks):
            out.extend([i] * size)
        return tuple(out)


def _ray_angle(d):
    """Angles alpha in [0, 2 pi) with Re(d e^{i alpha}) = 0."""
    a = (0.5 * np.pi - np.angle(d)) % TWO_PI
    return [a, (a + np.pi) % TWO_PI]


def boundary_rays(B):
    """Sorted, de-duplicated boundary ray angles in [0, 2 pi)."""
    b = B.b if isinstance(B, DiagB) else DiagB(B).b
    angles = []
    for k in range(len(b)):
        for l in range(k + 1, len(b)):
            if b[k] != b[l]:
                angles.extend(_ray_angle(b[k] - b[l]))
    angles = sorted(a % TWO_PI for a in angles)
    out = []
    for a in angles:
        if out and abs(a - out[-1]) < ANGLE_TOL:
            continue
        out.append(a)
    if len(out) > 1 and TWO_PI - out[-1] + out[0] < ANGLE_TOL:
        out.pop()
    # snap values that equal 2 pi up to rounding back to 0
    out = [0.0 if TWO_PI - a < ANGLE_TOL or a < ANGLE_TOL else a for a in out]
    return sorted(set(out))


def make_sectors(B):
    """Sectors Gamma_1..Gamma_J numbered from alpha_0 <= 0 < alpha_1."""
    rays = boundary_rays(B)
    if not rays:
        return [Sector(1, 0.0, TWO_PI, full=True)]
    if rays[0] == 0.0:
        alphas = list(rays)
    else:
        alphas = [rays[-1] - TWO_PI] + rays[:-1]
    alphas.append(alphas[0] + TWO_PI)
    return [Sector(i + 1, alphas[i], alphas[i + 1]) for i in range(len(alphas) - 1)]


def _ordering(b, theta):
    key = [-(bj * np.exp(1j * theta)).real for bj in b]
    perm = sorted(range(len(b)), key=lambda i: key[i])
    ordered = [b[i] for i in perm]
    blocks, beta = [], []
    for v in ordered:
        if beta and v == beta[-1]:
            blocks[-1] += 1
        else:
            beta.append(v)
            blocks.append(1)
    return tuple(perm), tuple(blocks), tuple(beta)


def _arg_in(angle, lo, hi, tol=1e-12):
    """Whether ``angle`` lies in the closed arc [lo, hi] (mod 2 pi)."""
    t = (angle - lo) % TWO_PI
    return t <= (hi - lo) + tol or t >= TWO_PI - tol


def _ray_intersection(p0, d0, p1, d1):
    """Parameters (t, s) >= 0 with p0 + t d0 = p1 + s d1, or None."""
    m = np.array([[d0.real, -d1.real], [d0.imag, -d1.imag]])
    if abs(np.linalg.det(m)) < 1e-14:
        return None
    rhs = np.array([(p1 - p0).real, (p1 - p0).imag])
    t, s = np.linalg.solve(m, rhs)
    if t < -1e-12 or s < -1e-12:
        return None
    return p0 + max(t, 0.0) * d0


def _lambda0_geometric(sectors, index, apex):
    """Largest |lam| in the shifted sector outside the sector and its two neighbours."""
    J = len(sectors)
    if J <= 3:
        return 0.0
    sec = sectors[index]
    prev_sec = sectors[(index - 1) % J]
    next_sec = sectors[(index + 1) % J]
    # closed cone of the remaining sectors: from next.hi round to prev.lo
    k_lo = next_sec.alpha_hi
    k_hi = prev_sec.alpha_lo + TWO_PI
    while k_hi <= k_lo:
        k_hi += TWO_PI
    while k_hi - k_lo > TWO_PI:
        k_hi -= TWO_PI
    d_lo, d_hi = np.exp(1j * sec.alpha_lo), np.exp(1j * sec.alpha_hi)
    k_dirs = [np.exp(1j * k_lo), np.exp(1j * k_hi)]

    def in_shifted(lam):
        if abs(lam - apex) < 1e-14:
            return True
        return _arg_in(np.angle(lam - apex), sec.alpha_lo, sec.alpha_hi, 1e-9)

    def in_cone(lam):
        if abs(lam) < 1e-14:
            return True
        return _arg_in(np.angle(lam), k_lo, k_hi, 1e-9)

    cands = [apex, 0.0 + 0.0j]
    for dg in (d_lo, d_hi):
        for dk in k_dirs:
            pt = _ray_intersection(apex, dg, 0.0j, dk)
            if pt is not None:
                cands.append(pt)
    best = 0.0
    for c in cands:
        if in_shifted(c) and in_cone(c):
            best = max(best, abs(c))
    return best


def extend(sector, r, B, lam_min=1.0, sectors=None):
    """Shift ``sector`` by ``r`` and compute the ordering, h and lambda_0."""
    B = B if isinstance(B, DiagB) else DiagB(B)
    if r < 0:
        raise ValidationError("shift r must be nonnegative")
    if lam_min <= 0:
        raise ValidationError("lambda_min must be positive")
    b = B.b
    theta = sector.bisector
    perm, blocks, beta = _ordering(b, theta)
    if sector.full:
        return ExtendedSector(sector, float(r), 0.0j, 0.0, float(lam_min), perm, blocks, beta)
    apex = -r * np.exp(1j * theta)
    ordered = [b[i] for i in perm]
    h = 0.0
    for k in range(len(ordered)):
        for l in range(k + 1, len(ordered)):
            d = ordered[k] - ordered[l]
            if d == 0:
                continue
            for alpha in (sector.alpha_lo, sector.alpha_hi):
                slope = (d * np.exp(1j * alpha)).real
                if slope < -1e-10 * abs(d):
                    raise SectorGeometryError(
                        f"invalid sector geometry: Re((b_k - b_l) lam) unbounded below on ray {alpha!r}"
                    )
            h = max(h, -(d * apex).real)
    if sectors is None:
        sectors = make_sectors(B)
    index = next(
        (i for i, s in enumerate(sectors)
         if abs(s.alpha_lo - sector.alpha_lo) < 1e-12 and abs(s.alpha_hi - sector.alpha_hi) < 1e-12),
        None,
    )
    lam_geo = 0.0 if index is None else _lambda0_geometric(sectors, index, apex)
    lam0 = max(float(lam_min), lam_geo)
    J = len(sectors)
    neighbours = () if index is None else (sectors[(index - 1) % J].kappa, sectors[(index + 1) % J].kappa)
    return ExtendedSector(sector, float(r), complex(apex), float(h), lam0, perm, blocks, beta, neighbours)


def contains(es, lam):
    """Whether lam lies in the shifted sector with |lam| > lambda_0."""
    lam = complex(lam)
    if abs(lam) <= es.lam0:
        return False
    if es.base.full:
        return True
    rel = lam - es.apex
    if rel == 0:
        return False
    t = (np.angle(rel) - es.base.alpha_lo) % TWO_PI
    return 0.0 < t < es.base.width


def cover(es, lam, tol=1e-9):
    """Closed-domain test used for points on the shifted boundary rays."""
    lam = complex(lam)
    if abs(lam) < es.lam0 * (1 - 1e-12):
        return False
    if es.base.full:
        return True
    rel = lam - es.apex
    if abs(rel) < 1e-14:
        return True
    return _arg_in(np.angle(rel), es.base.alpha_lo, es.base.alpha_hi, tol)
