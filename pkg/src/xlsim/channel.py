"""Near-field, spatially non-stationary multiuser channel generation.

A user's channel on a given subcarrier is a sum over clusters of ray
contributions, with each cluster weighted elementwise by a visibility
mask that models which array elements see appreciable power:

    h[m, :, k] = sum_s mask_s * sum_l  a_l(m, t) * b(ray_l, m)

where the steering entry for element n is
``b_n = exp(+j 2*pi*(f_c + m*scs)*D_n/c)`` with ``D_n`` the exact 3D
distance from the ray's source point to element n (spherical wavefront,
no far-field approximation), and the ray coefficient is
``a = gain * exp(-j 2*pi*(f_c + m*scs)*delay) * exp(+j 2*pi*doppler*t)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .numerology import Numerology

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna element positions in metres, optionally with UPA metadata."""

    element_positions: np.ndarray
    rows: int | None = None
    cols: int | None = None
    spacing_m: float | None = None
    reference_freq_hz: float | None = None

    def __post_init__(self):
        pos = np.asarray(self.element_positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ConfigurationError("element_positions must be (N, 3)")
        if not np.all(np.isfinite(pos)):
            raise ConfigurationError("element positions must be finite")
        object.__setattr__(self, "element_positions", pos)

    @property
    def n_elements(self) -> int:
        return self.element_positions.shape[0]

    @property
    def aperture_m(self) -> float:
        """Largest pairwise element distance."""
        pos = self.element_positions
        diff = pos[:, np.newaxis, :] - pos[np.newaxis, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())


def upa_geometry(
    rows: int,
    cols: int,
    spacing_m: float | None = None,
    reference_freq_hz: float = 6.8e9,
) -> ArrayGeometry:
    """Uniform planar array in the x-z plane, centred at the origin.

    x runs along the columns (horizontal), z along the rows (vertical),
    and boresight is +y.  Elements are ordered horizontal-first, so the
    first ``cols`` indices sweep one horizontal row.  Default spacing is
    half a wavelength at ``reference_freq_hz``.
    """
    if rows < 1 or cols < 1:
        raise ConfigurationError("rows and cols must be >= 1")
    if spacing_m is None:
        spacing_m = SPEED_OF_LIGHT / reference_freq_hz / 2.0
    x = (np.arange(cols) - (cols - 1) / 2.0) * spacing_m
    z = (np.arange(rows) - (rows - 1) / 2.0) * spacing_m
    zz, xx = np.meshgrid(z, x, indexing="ij")
    pos = np.column_stack([xx.ravel(), np.zeros(rows * cols), zz.ravel()])
    return ArrayGeometry(pos, rows=rows, cols=cols, spacing_m=spacing_m,
                         reference_freq_hz=reference_freq_hz)


@dataclass(frozen=True)
class RayParams:
    """One propagation ray in polar coordinates relative to the array centre."""

    r_m: float
    theta_rad: float = 0.0
    phi_rad: float = 0.0
    gain: complex = 1.0 + 0.0j
    delay_s: float = 0.0
    doppler_hz: float = 0.0

    def __post_init__(self):
        if not (self.r_m > 0 and np.isfinite(self.r_m)):
            raise DomainError(f"ray distance must be positive, got {self.r_m}")
        if not np.isfinite(self.gain):
            raise DomainError("ray gain must be finite")

    def source_position(self) -> np.ndarray:
        """Cartesian source point: azimuth from boresight +y, phi is downtilt."""
        r, th, ph = self.r_m, self.theta_rad, self.phi_rad
        return np.array([r * np.cos(ph) * np.sin(th),
                         r * np.cos(ph) * np.cos(th),
                         r * np.sin(ph)])


@dataclass(frozen=True)
class VisibilityMask:
    """Per-element visibility weights in [0, 1] ({0,1} in the typical case)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ConfigurationError("visibility weights must be a vector")
        if not np.all(np.isfinite(w)) or w.min() < 0 or w.max() > 1:
            raise ConfigurationError("visibility weights must lie in [0, 1]")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class VisibilityModel:
    """Random visibility description, sampled per (user, cluster)."""

    kind: str  # "bernoulli" or "window"
    p: float | None = None
    width: int | None = None


def bernoulli_visibility(p: float) -> VisibilityModel:
    return VisibilityModel("bernoulli", p=p)


def window_visibility(width: int) -> VisibilityModel:
    return VisibilityModel("window", width=width)


def sample_visibility(model: VisibilityModel, n_elements: int, rng_seed) -> VisibilityMask:
    """Draw a visibility mask; deterministic for a given seed.

    ``bernoulli``: i.i.d. {0,1} entries with probability ``p`` of one.
    ``window``: a single contiguous run of ``width`` ones at a random start.
    """
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    if model.kind == "bernoulli":
        if model.p is None or not (0.0 <= model.p <= 1.0):
            raise ConfigurationError(f"bernoulli visibility needs p in [0,1], got {model.p}")
        return VisibilityMask((rng.random(n_elements) < model.p).astype(np.float64))
    if model.kind == "window":
        if model.width is None or not (1 <= model.width <= n_elements):
            raise ConfigurationError(
                f"window visibility needs 1 <= width <= {n_elements}, got {model.width}"
            )
        start = int(rng.integers(0, n_elements - model.width + 1))
        w = np.zeros(n_elements)
        w[start : start + model.width] = 1.0
        return VisibilityMask(w)
    raise ConfigurationError(f"unknown visibility model {model.kind!r}")


@dataclass(frozen=True)
class ClusterSpec:
    """A cluster of rays sharing one visibility mask.

    ``visibility`` may be an explicit mask, a :class:`VisibilityModel`
    (sampled during generation from the generator seed), or ``None`` for
    a fully visible cluster.
    """

    rays: tuple[RayParams, ...]
    visibility: VisibilityMask | VisibilityModel | None = None

    def __post_init__(self):
        if len(self.rays) < 1:
            raise ConfigurationError("a cluster needs at least one ray")
        object.__setattr__(self, "rays", tuple(self.rays))


@dataclass
class ChannelTensor:
    """Complex channel indexed (subcarrier, element, user)."""

    h: np.ndarray
    f_c_hz: float
    scs_hz: float

    def __post_init__(self):
        arr = np.asarray(self.h, dtype=np.complex128)
        if arr.ndim != 3:
            raise ConfigurationError("channel tensor must be (subcarriers, elements, users)")
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError("channel tensor entries must be finite")
        self.h = arr

    @property
    def n_subcarriers(self) -> int:
        return self.h.shape[0]

    @property
    def n_elements(self) -> int:
        return self.h.shape[1]

    @property
    def n_users(self) -> int:
        return self.h.shape[2]


_COINCIDENCE_M = 1e-9  # treat sub-nanometre source/element separation as degenerate


def element_distances(geometry: ArrayGeometry, ray: RayParams) -> np.ndarray:
    """Exact distance from the ray's source point to every element."""
    src = ray.source_position()
    d = np.sqrt(((geometry.element_positions - src) ** 2).sum(-1))
    if np.any(d < _COINCIDENCE_M):
        raise DomainError("ray source coincides with an array element")
    return d


def steering_vector(
    geometry: ArrayGeometry,
    ray: RayParams,
    m: int,
    f_c_hz: float,
    scs_hz: float,
) -> np.ndarray:
    """Near-field steering vector for signed subcarrier offset ``m``.

    Entry n is ``exp(+j 2*pi*(f_c + m*scs)*D_n/c)`` with unit modulus.
    """
    d = element_distances(geometry, ray)
    freq = f_c_hz + m * scs_hz
    return np.exp(2j * np.pi * freq * d / SPEED_OF_LIGHT)


def rayleigh_distance(aperture_m: float, wavelength_m: float) -> float:
    """Far-field boundary 2*D^2/lambda for an aperture of D metres."""
    if aperture_m <= 0 or wavelength_m <= 0:
        raise DomainError("aperture and wavelength must be positive")
    return 2.0 * aperture_m**2 / wavelength_m


def _resolve_mask(cluster: ClusterSpec, n_elements: int, seed_parts) -> np.ndarray:
    vis = cluster.visibility
    if vis is None:
        return np.ones(n_elements)
    if isinstance(vis, VisibilityMask):
        if vis.weights.shape[0] != n_elements:
            raise ConfigurationError(
                f"visibility mask length {vis.weights.shape[0]} != {n_elements} elements"
            )
        return vis.weights
    return sample_visibility(vis, n_elements, seed_parts).weights


def generate_channel(
    geometry: ArrayGeometry,
    users: list,
    numerology: Numerology,
    f_c_hz: float,
    rng_seed=0,
    time_s: float = 0.0,
) -> ChannelTensor:
    """Generate the (subcarrier, element, user) channel tensor.

    ``users`` is one list of :class:`ClusterSpec` per user.  Subcarrier
    frequencies follow the numerology's symmetric DC-centred mapping.
    Visibility models are sampled from per-(user, cluster) seeds derived
    from ``rng_seed``, so identical seeds give bit-identical tensors and
    per-user generation is order-independent.
    """
    offsets = numerology.subcarrier_offsets()
    freqs = f_c_hz + offsets * numerology.scs_hz  # (M,)
    n = geometry.n_elements
    k_users = len(users)
    h = np.zeros((offsets.size, n, k_users), dtype=np.complex128)

    base = rng_seed if isinstance(rng_seed, (tuple, list)) else (int(rng_seed),)
    for k, clusters in enumerate(users):
        for s, cluster in enumerate(clusters):
            mask = _resolve_mask(cluster, n, tuple(base) + (k, s))
            if not mask.any():
                continue
            acc = np.zeros((offsets.size, n), dtype=np.complex128)
            for ray in cluster.rays:
                d = element_distances(geometry, ray)
                coef = ray.gain * np.exp(-2j * np.pi * freqs * ray.delay_s)
                if ray.doppler_hz:
                    coef = coef * np.exp(2j * np.pi * ray.doppler_hz * time_s)
                phases = np.exp(2j * np.pi * np.outer(freqs, d) / SPEED_OF_LIGHT)
                acc += coef[:, np.newaxis] * phases
            h[:, :, k] += acc * mask[np.newaxis, :]
    return ChannelTensor(h, f_c_hz=f_c_hz, scs_hz=numerology.scs_hz)
