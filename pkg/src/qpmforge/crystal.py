"""Domain-engineered quasi-phasematched crystal design.

A poled crystal is a sequence of ferroelectric domains with orientation
+1 or -1 along z in [-L/2, L/2].  Its phasematching function (PMF) is the
Fourier transform of the orientation profile,

    phi(dk) = (pi / 2L) * integral g(z) exp(-i dk z) dz,

normalised so that a periodically poled crystal of the same length peaks
at 1 at its first-order quasi-phasematching mismatch dk0 = pi / width.

The design target here is a comb of 2 * pair_count Gaussian peaks spaced
by `spacing` around dk0.  The matching continuous nonlinearity is a
Gaussian envelope multiplied by one cosine per peak pair,

    g(z) = (2 / w) exp(i dk0 z - z^2 / (2 w^2)) * sum_j cos((2j+1) d z / 2),

whose Fourier magnitude reproduces the comb.  `design_domains` quantises
that envelope into unit-amplitude domains with a greedy amplitude-tracking
pass: each domain either adds or subtracts its exact contribution to the
accumulated PMF amplitude at dk0, and the orientation keeping the running
total closest to the target envelope integral wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

__all__ = [
    "CombSpec",
    "DomainConfig",
    "NonlinearityProfile",
    "target_pmf",
    "target_profile",
    "sample_profile",
    "design_domains",
    "pmf_of_domains",
    "design_overlap",
    "save_domains",
    "load_domains",
]


@dataclass(frozen=True)
class CombSpec:
    """Comb-shaped PMF target: 2 * pair_count Gaussian peaks about `center`.

    Peaks sit at center +/- (2j+1) * spacing / 2 for j = 0 .. pair_count-1
    and each has amplitude profile exp(-peak_width^2 (dk - peak)^2 / 2).
    A spacing of zero is accepted only for pair_count == 1, where the two
    mirror peaks merge into a single Gaussian centred on `center`.
    """

    pair_count: int
    spacing: float      # rad/m between adjacent comb peaks
    peak_width: float   # m; inverse 1/e half-width of each peak in dk
    center: float       # rad/m; first-order QPM mismatch dk0
    length: float       # m; crystal length

    def __post_init__(self) -> None:
        if self.pair_count < 1:
            raise ValueError("pair_count must be >= 1")
        if self.spacing < 0:
            raise ValueError("spacing must be >= 0")
        if self.spacing == 0 and self.pair_count != 1:
            raise ValueError("spacing == 0 only makes sense for a single peak pair")
        if self.peak_width <= 0:
            raise ValueError("peak_width must be > 0")
        if self.center <= 0:
            raise ValueError("center must be > 0")
        if self.length <= 0:
            raise ValueError("length must be > 0")

    @property
    def well_separated(self) -> bool:
        """True when the comb peaks are cleanly resolved (width * spacing >= 10)."""
        return self.peak_width * self.spacing >= 10.0


@dataclass(eq=False)
class DomainConfig:
    """Poled-crystal realisation: per-domain widths and orientations."""

    widths: np.ndarray        # m, all > 0
    orientations: np.ndarray  # +1 / -1
    total_length: float       # m

    def __post_init__(self) -> None:
        self.widths = np.asarray(self.widths, dtype=float)
        self.orientations = np.asarray(self.orientations, dtype=int)
        if self.widths.ndim != 1 or self.widths.size == 0:
            raise ValueError("widths must be a non-empty 1-d array")
        if self.widths.shape != self.orientations.shape:
            raise ValueError("widths and orientations must have matching shapes")
        if np.any(self.widths <= 0):
            raise ValueError("domain widths must be > 0")
        if not np.all(np.isin(self.orientations, (-1, 1))):
            raise ValueError("orientations must be +1 or -1")
        tol = self.widths.size * np.finfo(float).eps * self.total_length
        if abs(self.widths.sum() - self.total_length) > max(tol, 1e-15):
            raise ValueError("sum of domain widths must equal total_length")

    @property
    def boundaries(self) -> np.ndarray:
        """Domain boundary positions, from -L/2 to +L/2."""
        edges = np.concatenate(([0.0], np.cumsum(self.widths)))
        return edges - self.total_length / 2.0

    def __len__(self) -> int:
        return self.widths.size


@dataclass(frozen=True)
class NonlinearityProfile:
    """Sampled complex nonlinearity profile g(z) over the crystal."""

    positions: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self) -> None:
        z = np.asarray(self.positions, dtype=float)
        g = np.asarray(self.amplitude)
        if z.ndim != 1 or z.size < 2:
            raise ValueError("positions must hold at least two samples")
        if g.shape != z.shape:
            raise ValueError("amplitude must match positions")
        if np.any(np.diff(z) <= 0):
            raise ValueError("positions must be strictly increasing")
        object.__setattr__(self, "positions", z)
        object.__setattr__(self, "amplitude", g)


def target_pmf(comb: CombSpec, delta_k) -> np.ndarray:
    """Evaluate the Gaussian-comb PMF target.

    Parameters
    ----------
    comb : CombSpec
    delta_k : float or array
        Phase mismatch values, rad/m.

    Returns
    -------
    Comb amplitude, peak value 1 for well-separated peaks.  Even about
    comb.center by construction.
    """
    dk = np.asarray(delta_k, dtype=float) - comb.center
    j = np.arange(comb.pair_count)
    offsets = (2.0 * j + 1.0) * comb.spacing / 2.0
    x = dk[..., None]
    w = comb.peak_width
    vals = np.exp(-0.5 * (w * (x - offsets)) ** 2) + np.exp(-0.5 * (w * (x + offsets)) ** 2)
    out = vals.sum(axis=-1)
    return out if out.ndim else float(out)


def _envelope(comb: CombSpec, z: np.ndarray) -> np.ndarray:
    """Real nonlinearity envelope (carrier removed), peak value pair_count at z=0."""
    j = np.arange(comb.pair_count)
    freqs = (2.0 * j + 1.0) * comb.spacing / 2.0
    cos_sum = np.cos(np.multiply.outer(z, freqs)).sum(axis=-1)
    return np.exp(-(z ** 2) / (2.0 * comb.peak_width ** 2)) * cos_sum


def target_profile(comb: CombSpec, z) -> np.ndarray:
    """Continuous nonlinearity profile whose Fourier magnitude is the comb.

    Uses the forward transform phi(dk) = int g(z) exp(-i dk z) dz, so the
    exp(+i center z) carrier places the comb at positive mismatch.
    """
    zz = np.asarray(z, dtype=float)
    out = (2.0 / comb.peak_width) * np.exp(1j * comb.center * zz) * _envelope(comb, zz)
    return out if out.ndim else complex(out)


def sample_profile(comb: CombSpec, n_points: int = 4001) -> NonlinearityProfile:
    """Sample target_profile uniformly over [-L/2, L/2]."""
    z = np.linspace(-comb.length / 2.0, comb.length / 2.0, n_points)
    return NonlinearityProfile(positions=z, amplitude=target_profile(comb, z))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _domain_boundaries(length: float, domain_width: float) -> np.ndarray:
    """Split [-L/2, L/2] into full-width domains plus one shortened remainder."""
    n_full = int(np.floor(length / domain_width + 1e-12))
    remainder = length - n_full * domain_width
    if remainder < 1e-9 * length:
        widths = np.full(n_full, domain_width)
    else:
        widths = np.concatenate([np.full(n_full, domain_width), [remainder]])
    edges = np.concatenate(([0.0], np.cumsum(widths))) - length / 2.0
    edges[-1] = length / 2.0
    return edges


def design_domains(comb: CombSpec, domain_width: float) -> DomainConfig:
    """Greedy domain-by-domain design of a poled crystal matching `comb`.

    Tracks the accumulated complex PMF amplitude at comb.center.  Domain j
    contributes orientation * integral exp(-i dk0 z) dz over the domain;
    the target accumulation is the integral of the envelope (normalised to
    peak 1) scaled so an all-ones envelope reproduces periodic poling.  The
    orientation minimising |accumulated - target| at each domain end is
    kept; near-ties break toward +1 so degenerate inputs stay deterministic.

    Returns
    -------
    DomainConfig with total_length == comb.length; the final domain is
    shortened so the crystal length is met exactly.
    """
    if domain_width <= 0:
        raise ValueError("domain_width must be > 0")
    if domain_width > comb.length:
        raise ValueError("domain_width must not exceed the crystal length")

    edges = _domain_boundaries(comb.length, domain_width)
    n_domains = edges.size - 1
    dk0 = comb.center

    # Exact single-domain contributions for orientation +1, forward transform.
    phases = np.exp(-1j * dk0 * edges)
    contrib = (phases[1:] - phases[:-1]) / (-1j * dk0)

    # Per-domain integral of the normalised envelope (8-point Gauss-Legendre is
    # exact to machine precision at these smoothness scales).
    mids = 0.5 * (edges[1:] + edges[:-1])
    halves = 0.5 * np.diff(edges)
    nodes = mids[:, None] + halves[:, None] * _GL_NODES[None, :]
    env = _envelope(comb, nodes.ravel()).reshape(n_domains, _GL_NODES.size)
    increments = (env * _GL_WEIGHTS).sum(axis=1) * halves / comb.pair_count

    # A unit envelope must accumulate at the periodic-poling rate
    # -(2i/pi) exp(-i dk0 z_left) per unit length.
    rate = (2.0 / (1j * np.pi)) * np.exp(-1j * dk0 * edges[0])
    target = rate * np.cumsum(increments)

    orientations = np.empty(n_domains, dtype=int)
    acc = 0.0 + 0.0j
    tie = 1e-12 * (2.0 * comb.length / np.pi)
    for j in range(n_domains):
        up = acc + contrib[j]
        down = acc - contrib[j]
        if abs(up - target[j]) <= abs(down - target[j]) + tie:
            orientations[j] = 1
            acc = up
        else:
            orientations[j] = -1
            acc = down

    return DomainConfig(
        widths=np.diff(edges),
        orientations=orientations,
        total_length=comb.length,
    )


def _sinc(x: np.ndarray) -> np.ndarray:
    # sin(x)/x with the removable singularity filled in; np.sinc is the
    # normalised variant, hence the pi rescale.
    return np.sinc(x / np.pi)


def pmf_of_domains(config: DomainConfig, delta_k) -> np.ndarray:
    """Exact PMF of a poled crystal at arbitrary mismatch.

    Sums the closed-form domain integrals

        s_j * (exp(-i dk z_{j+1}) - exp(-i dk z_j)) / (-i dk)

    written in the numerically safe midpoint form
    s_j * w_j * sinc(dk w_j / 2) * exp(-i dk z_mid), which also covers the
    dk -> 0 limit.  The result is scaled by pi / (2 L) so a periodically
    poled crystal of the same length peaks at 1.
    """
    dk = np.atleast_1d(np.asarray(delta_k, dtype=float))
    edges = config.boundaries
    mids = 0.5 * (edges[1:] + edges[:-1])
    w = config.widths
    signed = config.orientations * w
    core = signed[None, :] * _sinc(np.multiply.outer(dk, w / 2.0))
    phase = np.exp(-1j * np.multiply.outer(dk, mids))
    vals = (core * phase).sum(axis=1) * (np.pi / (2.0 * config.total_length))
    if np.isscalar(delta_k) or np.asarray(delta_k).ndim == 0:
        return complex(vals[0])
    return vals


def design_overlap(
    config: DomainConfig,
    comb: CombSpec,
    n_points: int = 8192,
    half_span: float | None = None,
) -> float:
    """Normalised |<target, designed>| over the comb band.

    Plain trapezoid quadrature on a band wide enough to contain every comb
    peak plus eight peak widths of tail.
    """
    if half_span is None:
        half_span = (comb.pair_count - 0.5) * comb.spacing + 8.0 / comb.peak_width
    dk = np.linspace(comb.center - half_span, comb.center + half_span, n_points)
    t = target_pmf(comb, dk)
    d = pmf_of_domains(config, dk)
    inner = trapezoid(np.conj(t) * d, dk)
    norm = np.sqrt(trapezoid(np.abs(t) ** 2, dk) * trapezoid(np.abs(d) ** 2, dk))
    return float(np.abs(inner) / norm)


def save_domains(config: DomainConfig, path) -> None:
    """Write a domain listing: header with total length, then width TAB orientation."""
    lines = [f"# total_length_m={config.total_length:.12g}"]
    for w, s in zip(config.widths, config.orientations):
        lines.append(f"{w:.12g}\t{s:+d}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_domains(path) -> DomainConfig:
    """Read a domain listing written by save_domains."""
    widths = []
    orientations = []
    total = None
    with open(path, "r", encoding="ascii") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip() == "total_length_m":
                    total = float(value)
                continue
            w_str, s_str = line.split("\t")
            widths.append(float(w_str))
            orientations.append(int(s_str))
    if total is None:
        raise ValueError(f"{path}: missing total_length_m header")
    return DomainConfig(
        widths=np.array(widths),
        orientations=np.array(orientations),
        total_length=total,
    )
