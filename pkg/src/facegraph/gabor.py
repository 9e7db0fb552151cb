"""Gabor filter bank, jets, jet similarity and displacement estimation.

A bank holds one complex kernel per (frequency, orientation) pair,

    psi_j(x) = (k_j^2 / sigma^2) exp(-k_j^2 |x|^2 / (2 sigma^2))
               * (exp(i k_j . x) - exp(-sigma^2 / 2)),

with wave vectors k_j = k_nu (cos phi_mu, sin phi_mu), k_nu = 2^(-(nu+2)/2) pi
and phi_mu = mu pi / n_orient.  Kernels are sampled on a square grid and then
re-centered by subtracting the residual mean, so the sampled, truncated kernel
is exactly DC-free and responses ignore additive brightness changes.

A jet is the vector of kernel responses at one position, stored as
(magnitude, phase) pairs.  Phase differences between two jets taken at nearby
points encode their relative displacement; solving the linearized phase system
gives that displacement, which the phase-sensitive similarity can compensate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateJet, InvalidConfig, InvalidInput, OutOfBounds, SingularSystem
from .raster import PixelFormat, RasterImage

DEFAULT_SIGMA = 2.0 * math.pi
DEFAULT_N_FREQ = 5
DEFAULT_N_ORIENT = 8
RESTRICTED_BAND = 2          # the k = pi/4 frequency band
DISPLACEMENT_LIMIT = 8.0     # pixels; estimates beyond this are clamped
_RADIUS_FACTOR = 3.0         # kernel support = ceil(3 sigma / k) ~ 3 envelope std-devs
_SINGULAR_RATIO = 1e-12


def frequency_magnitude(nu: int) -> float:
    """k_nu = 2^(-(nu+2)/2) * pi."""
    return 2.0 ** (-(nu + 2) / 2.0) * math.pi


def wave_vectors(
    n_freq: int = DEFAULT_N_FREQ,
    n_orient: int = DEFAULT_N_ORIENT,
    restrict_frequency: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Wave vectors plus their frequency/orientation indices, in j order.

    j runs orientation-fastest (j = mu + n_orient * nu).  With
    ``restrict_frequency`` only the k = pi/4 band is produced.
    """
    freqs = [RESTRICTED_BAND] if restrict_frequency else list(range(n_freq))
    kv, f_idx, o_idx = [], [], []
    for nu in freqs:
        k = frequency_magnitude(nu)
        for mu in range(n_orient):
            phi = mu * math.pi / n_orient
            kv.append((k * math.cos(phi), k * math.sin(phi)))
            f_idx.append(nu)
            o_idx.append(mu)
    return np.array(kv), np.array(f_idx), np.array(o_idx)


@dataclass(frozen=True, eq=False)
class GaborBank:
    sigma: float
    n_freq: int
    n_orient: int
    radius: int | None              # None means per-band automatic support
    restrict_frequency: bool
    kernels: tuple[np.ndarray, ...]  # complex 2-D, one per j
    kvecs: np.ndarray               # (J, 2) wave vectors
    freq_index: np.ndarray          # (J,)
    orient_index: np.ndarray        # (J,)
    radii: np.ndarray               # (J,) per-kernel spatial radius

    @property
    def size(self) -> int:
        return len(self.kernels)

    @property
    def max_radius(self) -> int:
        return int(self.radii.max())

    @cached_property
    def fingerprint(self) -> dict:
        return {
            "sigma": self.sigma,
            "n_freq": self.n_freq,
            "n_orient": self.n_orient,
            "radius": self.radius,
            "restrict_frequency": self.restrict_frequency,
        }


def make_bank(
    sigma: float = DEFAULT_SIGMA,
    n_freq: int = DEFAULT_N_FREQ,
    n_orient: int = DEFAULT_N_ORIENT,
    radius: int | None = None,
    restrict_frequency: bool = False,
) -> GaborBank:
    """Sample the kernel family on integer grids.

    Without an explicit ``radius`` each frequency band gets support
    ceil(3 sigma / k_nu); an explicit radius must still contain the envelope
    of the lowest-frequency kernel (radius >= 2 sigma / k_min).
    """
    if sigma <= 0.0 or n_freq < 1 or n_orient < 1:
        raise InvalidConfig("sigma must be positive and band counts at least 1")
    if restrict_frequency and n_freq <= RESTRICTED_BAND:
        raise InvalidConfig(f"frequency restriction needs n_freq > {RESTRICTED_BAND}")
    kvecs, f_idx, o_idx = wave_vectors(n_freq, n_orient, restrict_frequency)
    k_min = float(np.hypot(kvecs[:, 0], kvecs[:, 1]).min())
    if radius is not None and radius < 2.0 * sigma / k_min:
        raise InvalidConfig(
            f"radius {radius} cannot contain the lowest-frequency envelope "
            f"(need at least {math.ceil(2.0 * sigma / k_min)})"
        )
    kernels = []
    radii = np.empty(len(kvecs), dtype=np.int64)
    for j, (kx, ky) in enumerate(kvecs):
        k2 = kx * kx + ky * ky
        if radius is not None:
            r = radius
        else:
            # band magnitude taken from the index so every orientation in a
            # band shares one support; the epsilon absorbs float residue
            k_band = frequency_magnitude(int(f_idx[j]))
            r = math.ceil(_RADIUS_FACTOR * sigma / k_band - 1e-9)
        radii[j] = r
        grid = np.arange(-r, r + 1, dtype=np.float64)
        xs, ys = np.meshgrid(grid, grid)
        envelope = (k2 / sigma**2) * np.exp(-k2 * (xs * xs + ys * ys) / (2.0 * sigma**2))
        carrier = np.exp(1j * (kx * xs + ky * ys)) - math.exp(-sigma**2 / 2.0)
        kernel = envelope * carrier
        kernel -= kernel.mean()  # re-center the truncated kernel to exact DC-freeness
        kernel.setflags(write=False)
        kernels.append(kernel)
    return GaborBank(
        sigma=float(sigma),
        n_freq=n_freq,
        n_orient=n_orient,
        radius=radius,
        restrict_frequency=restrict_frequency,
        kernels=tuple(kernels),
        kvecs=kvecs,
        freq_index=f_idx,
        orient_index=o_idx,
        radii=radii,
    )


# ---------------------------------------------------------------------------
# jets

@dataclass(frozen=True, eq=False)
class Jet:
    """Kernel responses at one position: magnitudes a_j and phases in (-pi, pi]."""

    magnitudes: np.ndarray
    phases: np.ndarray
    position: tuple[int, int]

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=np.float64).copy()
        phases = np.asarray(self.phases, dtype=np.float64).copy()
        mags.setflags(write=False)
        phases.setflags(write=False)
        object.__setattr__(self, "magnitudes", mags)
        object.__setattr__(self, "phases", phases)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.magnitudes**2)))


def extract_jets(img: RasterImage, positions, bank: GaborBank) -> list[Jet]:
    """Jets at several positions of a grayscale image in one pass.

    The convolution sum_x' I(x') psi(pos - x') is evaluated directly over each
    kernel's support; samples beyond the border are mirrored.  All positions
    must lie inside the image.
    """
    img.require(PixelFormat.GRAY8)
    pos = np.atleast_2d(np.asarray(positions, dtype=np.int64))
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise InvalidInput("positions must be (x, y) pairs")
    h, w = img.pixels.shape
    if pos.size and (pos[:, 0].min() < 0 or pos[:, 0].max() >= w or pos[:, 1].min() < 0 or pos[:, 1].max() >= h):
        raise OutOfBounds("jet position outside image")
    pad = bank.max_radius
    if pad >= h or pad >= w:
        raise InvalidInput(
            f"image {w}x{h} too small to mirror-pad by {pad} (largest kernel support)"
        )
    padded = np.pad(img.pixels.astype(np.float64), pad, mode="reflect")
    responses = np.empty((len(pos), bank.size), dtype=np.complex128)
    for r in np.unique(bank.radii):
        js = np.nonzero(bank.radii == r)[0]
        side = 2 * int(r) + 1
        windows = np.lib.stride_tricks.sliding_window_view(padded, (side, side))
        patches = windows[pos[:, 1] + pad - r, pos[:, 0] + pad - r].reshape(len(pos), -1)
        # response = sum_u I(pos - u) psi(u) = dot with the flipped kernel;
        # real and imaginary parts go through one real matmul
        flipped = np.stack([bank.kernels[j][::-1, ::-1].reshape(-1) for j in js], axis=1)
        parts = patches @ np.concatenate([flipped.real, flipped.imag], axis=1)
        responses[:, js] = parts[:, : len(js)] + 1j * parts[:, len(js) :]
    return [
        Jet(np.abs(responses[i]), np.angle(responses[i]), (int(x), int(y)))
        for i, (x, y) in enumerate(pos)
    ]


def extract_jet(img: RasterImage, pos: tuple[int, int], bank: GaborBank) -> Jet:
    """Jet at a single position; see :func:`extract_jets`."""
    return extract_jets(img, [pos], bank)[0]


def normalize_jet(jet: Jet) -> Jet:
    """Scale magnitudes to unit energy; phases are untouched."""
    n = jet.norm
    if n == 0.0:
        raise DegenerateJet(f"jet at {jet.position} has no energy")
    return Jet(jet.magnitudes / n, jet.phases, jet.position)


# ---------------------------------------------------------------------------
# similarity and displacement
#
# The batch helpers below are the single implementation of the phase math;
# the public single-pair operations call them with 1x1 batches.

def _wrap_phase(x: np.ndarray) -> np.ndarray:
    """Wrap into (-pi, pi]."""
    out = -np.mod(-np.asarray(x, dtype=np.float64) + math.pi, 2.0 * math.pi) + math.pi
    return out


def _as_kvecs(bank) -> np.ndarray:
    return bank.kvecs if isinstance(bank, GaborBank) else np.asarray(bank, dtype=np.float64)


def displacement_matrix(
    mags_a: np.ndarray, phases_a: np.ndarray,
    mags_b: np.ndarray, phases_b: np.ndarray,
    kvecs: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Displacement estimates for every (row of a) x (row of b) pair.

    Returns (d, phase_grad, gram, singular, clamped) with d of shape
    (A, B, 2).  Singular pairs get d = 0.
    """
    w = mags_a[:, None, :] * mags_b[None, :, :]            # (A, B, J)
    dphi = _wrap_phase(phases_a[:, None, :] - phases_b[None, :, :])
    kx, ky = kvecs[:, 0], kvecs[:, 1]
    px = np.sum(w * kx * dphi, axis=-1)
    py = np.sum(w * ky * dphi, axis=-1)
    gxx = np.sum(w * kx * kx, axis=-1)
    gxy = np.sum(w * kx * ky, axis=-1)
    gyy = np.sum(w * ky * ky, axis=-1)
    det = gxx * gyy - gxy * gxy
    singular = np.abs(det) < _SINGULAR_RATIO * np.sum(w, axis=-1) ** 2
    safe_det = np.where(singular, 1.0, det)
    dx = (gyy * px - gxy * py) / safe_det
    dy = (gxx * py - gxy * px) / safe_det
    dx = np.where(singular, 0.0, dx)
    dy = np.where(singular, 0.0, dy)
    norm = np.hypot(dx, dy)
    clamped = norm > DISPLACEMENT_LIMIT
    scale = np.where(clamped, DISPLACEMENT_LIMIT / np.where(norm == 0.0, 1.0, norm), 1.0)
    d = np.stack([dx * scale, dy * scale], axis=-1)
    grad = np.stack([px, py], axis=-1)
    gram = np.stack([gxx, gxy, gxy, gyy], axis=-1)
    return d, grad, gram, singular, clamped


def similarity_matrix(
    mags_a: np.ndarray, phases_a: np.ndarray,
    mags_b: np.ndarray, phases_b: np.ndarray,
    kvecs: np.ndarray,
    d: np.ndarray | None = None,
) -> np.ndarray:
    """Phase-sensitive similarity for every pair, optionally compensated by d.

    S = sum_j a_j a'_j cos(phi_j - phi'_j - d . k_j) / sqrt(sum a^2 sum a'^2).
    """
    norm_a = np.sqrt(np.sum(mags_a**2, axis=-1))
    norm_b = np.sqrt(np.sum(mags_b**2, axis=-1))
    if np.any(norm_a == 0.0) or np.any(norm_b == 0.0):
        raise DegenerateJet("all-zero jet in similarity computation")
    w = mags_a[:, None, :] * mags_b[None, :, :]
    dphi = phases_a[:, None, :] - phases_b[None, :, :]
    if d is not None:
        dphi = dphi - (d[..., 0, None] * kvecs[:, 0] + d[..., 1, None] * kvecs[:, 1])
    return np.sum(w * np.cos(dphi), axis=-1) / (norm_a[:, None] * norm_b[None, :])


def compensated_similarity_matrix(
    mags_a: np.ndarray, phases_a: np.ndarray,
    mags_b: np.ndarray, phases_b: np.ndarray,
    kvecs: np.ndarray,
) -> np.ndarray:
    """Similarity after estimating and compensating pairwise displacement."""
    d, _, _, _, _ = displacement_matrix(mags_a, phases_a, mags_b, phases_b, kvecs)
    return similarity_matrix(mags_a, phases_a, mags_b, phases_b, kvecs, d)


@dataclass(frozen=True)
class Displacement:
    """Estimated relative shift between two jets' sampling points.

    ``phase_grad`` and ``gram`` are the weighted phase-difference vector and
    the 2x2 system it was solved against; ``clamped`` marks estimates whose
    magnitude exceeded the valid range and was scaled back to it.
    """

    dx: float
    dy: float
    phase_grad: tuple[float, float]
    gram: tuple[float, float, float, float]
    clamped: bool = False

    @property
    def vector(self) -> tuple[float, float]:
        return (self.dx, self.dy)


ZERO_DISPLACEMENT = Displacement(0.0, 0.0, (0.0, 0.0), (0.0, 0.0, 0.0, 0.0))


def _pair_args(a: Jet, b: Jet):
    return (
        a.magnitudes[None, :], a.phases[None, :],
        b.magnitudes[None, :], b.phases[None, :],
    )


def estimate_displacement(a: Jet, b: Jet, bank) -> Displacement:
    """Solve the linearized phase-difference system for the pair's shift.

    Valid when the true displacement is within half the shortest wavelength;
    estimates beyond DISPLACEMENT_LIMIT pixels are clamped (direction kept)
    and flagged.
    """
    if a.norm == 0.0 or b.norm == 0.0:
        raise DegenerateJet("cannot estimate displacement from an all-zero jet")
    kvecs = _as_kvecs(bank)
    d, grad, gram, singular, clamped = displacement_matrix(*_pair_args(a, b), kvecs)
    if singular[0, 0]:
        raise SingularSystem("phase system is singular for this jet pair")
    return Displacement(
        dx=float(d[0, 0, 0]),
        dy=float(d[0, 0, 1]),
        phase_grad=(float(grad[0, 0, 0]), float(grad[0, 0, 1])),
        gram=tuple(float(g) for g in gram[0, 0]),
        clamped=bool(clamped[0, 0]),
    )


def jet_similarity(a: Jet, b: Jet, displacement=None, bank=None) -> float:
    """Phase-sensitive jet similarity, optionally displacement-compensated.

    ``displacement`` may be a Displacement, an (dx, dy) pair, or None for the
    uncompensated score; a bank (or its wave vectors) is required only when a
    non-zero displacement is supplied.
    """
    if displacement is None:
        d = None
    else:
        vec = displacement.vector if isinstance(displacement, Displacement) else tuple(displacement)
        d = np.array(vec, dtype=np.float64).reshape(1, 1, 2)
    kvecs = None
    if d is not None and (d[0, 0, 0] != 0.0 or d[0, 0, 1] != 0.0):
        if bank is None:
            raise InvalidInput("a bank is required for displacement-compensated similarity")
        kvecs = _as_kvecs(bank)
    elif bank is not None:
        kvecs = _as_kvecs(bank)
    else:
        kvecs = np.zeros((len(a.magnitudes), 2))
        d = None
    return float(similarity_matrix(*_pair_args(a, b), kvecs, d)[0, 0])


def jet_similarity_compensated(a: Jet, b: Jet, bank) -> float:
    """Similarity after compensating the estimated displacement.

    Falls back to zero displacement when the phase system is singular.
    """
    try:
        d = estimate_displacement(a, b, bank)
    except SingularSystem:
        d = ZERO_DISPLACEMENT
    return jet_similarity(a, b, d, bank)
