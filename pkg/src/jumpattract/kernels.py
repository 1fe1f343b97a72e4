"""Jump kernel ``a``, influence kernel ``b`` and the stability analysis.

Everything lives on a periodic torus ``[0, L)^d`` (d = 1 or 2) discretised
by an ``M^d`` grid. Radial profiles are periodised by wrapped-image sums, so
translation invariance is exact and grid convolutions are circular FFT
convolutions.

Grid arrays are stored in FFT order: index ``i`` along an axis carries the
displacement ``i*h`` for ``i < M/2`` and ``(i - M)*h`` otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "TorusDomain",
    "RadialProfile",
    "KernelModel",
    "StabilityReport",
    "ResolutionError",
    "gaussian",
    "exponential",
    "tophat",
    "tabulated",
    "zero_profile",
    "convolve_profiles",
    "eval_a",
    "eval_b",
    "compute_phi",
    "stability_check",
]

FOURIER_TOL = 1e-10
QUAD_TOL = 1e-8
IMAGE_TAIL = 1e-12


class ResolutionError(ValueError):
    """Grid too coarse for the requested kernels."""


@dataclass(frozen=True)
class TorusDomain:
    dimension: int
    length: float
    resolution: int

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        if self.resolution < 8 or self.resolution % 2:
            raise ValueError(f"resolution must be even and >= 8, got {self.resolution}")

    @property
    def spacing(self) -> float:
        return self.length / self.resolution

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dimension

    @property
    def volume(self) -> float:
        return self.length**self.dimension

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.resolution,) * self.dimension

    @cached_property
    def offsets(self) -> NDArray[np.int64]:
        """Signed integer offsets of the grid, FFT order."""
        m = self.resolution
        return np.concatenate([np.arange(m // 2), np.arange(-m // 2, 0)])

    @cached_property
    def displacements(self) -> NDArray[np.float64]:
        """Min-image displacement of every grid node, shape ``shape + (d,)``."""
        axes = [self.offsets * self.spacing] * self.dimension
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def positions(self) -> NDArray[np.float64]:
        """Grid node positions in ``[0, L)^d``, flattened to ``(M^d, d)``."""
        axes = [np.arange(self.resolution) * self.spacing] * self.dimension
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def min_image(self, disp: NDArray) -> NDArray:
        disp = np.asarray(disp, dtype=float)
        return disp - self.length * np.round(disp / self.length)

    def wrap(self, points: NDArray) -> NDArray:
        points = np.asarray(points, dtype=float)
        return np.mod(points, self.length)

    def reflect(self, grid: NDArray) -> NDArray:
        """``f(-r)`` for a grid function ``f(r)`` in FFT order."""
        out = grid
        for ax in range(self.dimension):
            out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
        return out

    def interpolate(self, table: NDArray, disp: NDArray) -> NDArray:
        """(Bi)linear periodic interpolation of a grid table at displacements."""
        disp = np.asarray(disp, dtype=float)
        m, h = self.resolution, self.spacing
        t = disp / h
        base = np.floor(t)
        frac = t - base
        base = base.astype(np.int64) % m
        if self.dimension == 1:
            i0 = base[..., 0]
            f = frac[..., 0]
            return (1.0 - f) * table[i0] + f * table[(i0 + 1) % m]
        i0, j0 = base[..., 0], base[..., 1]
        fx, fy = frac[..., 0], frac[..., 1]
        i1, j1 = (i0 + 1) % m, (j0 + 1) % m
        return ((1 - fx) * (1 - fy) * table[i0, j0] + fx * (1 - fy) * table[i1, j0]
                + (1 - fx) * fy * table[i0, j1] + fx * fy * table[i1, j1])

    def convolve(self, f: NDArray, g: NDArray, symmetric: bool = True) -> NDArray:
        """Circular convolution ``h^d * sum_s f(s) g(r - s)``.

        ``symmetric=True`` averages with the reflection, which makes the
        result of two even inputs exactly even.
        """
        axes = tuple(range(self.dimension))
        c = np.fft.irfftn(np.fft.rfftn(f, axes=axes) * np.fft.rfftn(g, axes=axes),
                          s=self.shape, axes=axes) * self.cell_volume
        return 0.5 * (c + self.reflect(c)) if symmetric else c

    def transform(self, f: NDArray) -> NDArray:
        """Discrete Fourier transform scaled as a quadrature, ``h^d * DFT``."""
        return np.fft.fftn(f) * self.cell_volume


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Nonnegative radial function of the separation.

    ``width`` is the Gaussian standard deviation, the exponential decay
    length, or the top-hat radius. ``table`` holds grid values (FFT order)
    for the tabulated family.
    """

    family: str
    width: float = 1.0
    mass: float = 1.0
    table: NDArray | None = field(default=None, repr=False)
    domain: TorusDomain | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in ("gaussian", "exponential", "tophat", "tabulated", "zero"):
            raise ValueError(f"unknown profile family {self.family!r}")
        if self.family == "tabulated":
            if self.table is None or self.domain is None:
                raise ValueError("tabulated profile needs a table and its domain")
            tab = np.asarray(self.table, dtype=float)
            if tab.shape != self.domain.shape:
                raise ValueError(f"table shape {tab.shape} does not match grid {self.domain.shape}")
            if np.any(tab < 0) or not np.all(np.isfinite(tab)):
                raise ValueError("tabulated profile entries must be finite and nonnegative")
            object.__setattr__(self, "table", tab)
            object.__setattr__(self, "mass", float(tab.sum() * self.domain.cell_volume))
        elif self.family != "zero":
            if not self.width > 0:
                raise ValueError(f"{self.family} width must be positive, got {self.width}")
            if self.mass < 0:
                raise ValueError(f"mass must be nonnegative, got {self.mass}")

    @property
    def is_zero(self) -> bool:
        return self.family == "zero" or self.mass == 0.0

    def radial(self, r: NDArray, d: int) -> NDArray:
        """Unwrapped density on R^d as a function of ``|x|``."""
        r = np.asarray(r, dtype=float)
        s, m = self.width, self.mass
        if self.family == "zero":
            return np.zeros_like(r)
        if self.family == "gaussian":
            return m * (2 * math.pi * s * s) ** (-d / 2) * np.exp(-r * r / (2 * s * s))
        if self.family == "exponential":
            norm = 2 * s if d == 1 else 2 * math.pi * s * s
            return m / norm * np.exp(-r / s)
        if self.family == "tophat":
            norm = 2 * s if d == 1 else math.pi * s * s
            return np.where(r <= s, m / norm, 0.0)
        raise ValueError("tabulated profiles have no unwrapped form")

    def tail_radius(self, d: int) -> float:
        # radius beyond which the unwrapped mass is below IMAGE_TAIL (relative)
        if self.family == "gaussian":
            return 7.5 * self.width
        if self.family == "exponential":
            return 32.0 * self.width
        if self.family == "tophat":
            return self.width
        return 0.0

    def evaluate(self, disp: NDArray, domain: TorusDomain) -> NDArray:
        """Periodised value at displacement(s), shape ``disp.shape[:-1]``."""
        disp = np.abs(domain.min_image(disp))
        if self.family == "zero":
            return np.zeros(disp.shape[:-1])
        if self.family == "tabulated":
            return domain.interpolate(self.table, disp)
        d, L = domain.dimension, domain.length
        k = int(math.floor((self.tail_radius(d) + L / 2) / L))
        images = np.arange(-k, k + 1) * L
        if d == 1:
            r = np.abs(disp[..., 0, None] + images)
            return self.radial(r, 1).sum(axis=-1)
        gx = disp[..., 0, None, None] + images[:, None]
        gy = disp[..., 1, None, None] + images[None, :]
        return self.radial(np.hypot(gx, gy), 2).sum(axis=(-2, -1))

    def on_grid(self, domain: TorusDomain) -> NDArray:
        if self.family == "tabulated":
            return self.table
        if self.family in ("tophat", "exponential"):
            return self._cell_average_grid(domain)
        return self.evaluate(domain.displacements, domain)

    def _cell_average_grid(self, domain: TorusDomain) -> NDArray:
        # point samples of a kinked or discontinuous profile lose O(h) mass
        h, sub = domain.spacing, 16
        frac = (np.arange(sub) + 0.5) / sub - 0.5
        if domain.dimension == 1:
            pts = domain.displacements[..., 0, None] + h * frac
            vals = self.evaluate(pts[..., None], domain).mean(axis=-1)
        else:
            base = domain.displacements
            fx, fy = np.meshgrid(frac, frac, indexing="ij")
            pts = np.stack([base[..., 0, None, None] + h * fx,
                            base[..., 1, None, None] + h * fy], axis=-1)
            vals = self.evaluate(pts, domain).mean(axis=(-2, -1))
        total = vals.sum() * domain.cell_volume
        return vals * (self.mass / total) if total > 0 else vals

    def peak(self, domain: TorusDomain) -> float:
        if self.family == "zero":
            return 0.0
        grid_max = float(self.on_grid(domain).max())
        if self.family == "tabulated":
            return grid_max
        at_zero = float(self.evaluate(np.zeros(domain.dimension), domain))
        return max(at_zero, grid_max)

    def sample_offsets(self, rng: np.random.Generator, size: int, domain: TorusDomain) -> NDArray:
        """Draw ``size`` jump offsets with density ``profile / mass``."""
        d = domain.dimension
        s = self.width
        if self.family == "gaussian":
            return rng.normal(0.0, s, size=(size, d))
        if self.family == "exponential":
            if d == 1:
                return rng.laplace(0.0, s, size=(size, 1))
            r = rng.gamma(2.0, s, size=size)
            return _polar(r, rng.uniform(0, 2 * math.pi, size))
        if self.family == "tophat":
            if d == 1:
                return rng.uniform(-s, s, size=(size, 1))
            r = s * np.sqrt(rng.uniform(0, 1, size))
            return _polar(r, rng.uniform(0, 2 * math.pi, size))
        if self.family == "tabulated":
            # linear interpolant = mixture of hat functions centred on nodes
            flat = self.table.ravel()
            idx = rng.choice(flat.size, size=size, p=flat / flat.sum())
            nodes = domain.displacements.reshape(-1, d)[idx]
            tri = rng.uniform(size=(size, d)) - rng.uniform(size=(size, d))
            return nodes + domain.spacing * tri
        raise ValueError("cannot sample from the zero profile")


def _polar(r: NDArray, phi: NDArray) -> NDArray:
    return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)


def gaussian(sigma: float, mass: float = 1.0) -> RadialProfile:
    return RadialProfile("gaussian", sigma, mass)


def exponential(length: float, mass: float = 1.0) -> RadialProfile:
    return RadialProfile("exponential", length, mass)


def tophat(radius: float, mass: float = 1.0) -> RadialProfile:
    return RadialProfile("tophat", radius, mass)


def tabulated(values: NDArray, domain: TorusDomain) -> RadialProfile:
    return RadialProfile("tabulated", table=np.asarray(values, dtype=float), domain=domain)


def zero_profile() -> RadialProfile:
    return RadialProfile("zero", mass=0.0)


def convolve_profiles(p: RadialProfile, q: RadialProfile, domain: TorusDomain) -> RadialProfile:
    """``p * q`` as a profile: closed form for two Gaussians, else a grid table."""
    if p.is_zero or q.is_zero:
        return zero_profile()
    if p.family == "gaussian" and q.family == "gaussian":
        return gaussian(math.hypot(p.width, q.width), p.mass * q.mass)
    table = np.clip(domain.convolve(p.on_grid(domain), q.on_grid(domain)), 0.0, None)
    return tabulated(table, domain)


class KernelModel:
    """Translation-invariant model data: ``a(x, y) = alpha(y - x)`` and
    ``b(x, y | z) = kappa1(x - z) + kappa2(y - z)``.

    A general translation-invariant ``b`` may instead be given as
    ``b_table[u, v] = b(x, y | z)`` with ``u = x - z``, ``v = y - z`` on the
    grid (shape ``grid + grid``); only the kernel-level analysis supports it.
    """

    def __init__(self, domain: TorusDomain, alpha: RadialProfile,
                 kappa1: RadialProfile | None = None, kappa2: RadialProfile | None = None,
                 b_table: NDArray | None = None, check_resolution: bool = True):
        if alpha.is_zero:
            raise ValueError("jump kernel alpha must have positive mass")
        self.domain = domain
        self.alpha = alpha
        self.kappa1 = kappa1 if kappa1 is not None else zero_profile()
        self.kappa2 = kappa2 if kappa2 is not None else zero_profile()
        if b_table is not None:
            b_table = np.asarray(b_table, dtype=float)
            if b_table.shape != domain.shape * 2:
                raise ValueError(f"b_table must have shape {domain.shape * 2}")
            if np.any(b_table < 0):
                raise ValueError("b_table entries must be nonnegative")
            if not (self.kappa1.is_zero and self.kappa2.is_zero):
                raise ValueError("give either kappa profiles or a b_table, not both")
        self.b_table = b_table
        self.check_resolution = check_resolution
        # build eagerly: the model is immutable and shared read-only afterwards
        self.phi_plus_grid, self.phi_minus_grid = self._phi_tables()

    @property
    def factorized(self) -> bool:
        return self.b_table is None

    @cached_property
    def alpha_grid(self) -> NDArray:
        return self.alpha.on_grid(self.domain)

    @cached_property
    def kappa1_grid(self) -> NDArray:
        return np.zeros(self.domain.shape) if self.kappa1.is_zero else self.kappa1.on_grid(self.domain)

    @cached_property
    def kappa2_grid(self) -> NDArray:
        return np.zeros(self.domain.shape) if self.kappa2.is_zero else self.kappa2.on_grid(self.domain)

    @property
    def mass_a(self) -> float:
        return self.alpha.mass

    @cached_property
    def mass_a_grid(self) -> float:
        return float(self.alpha_grid.sum() * self.domain.cell_volume)

    @cached_property
    def mean_b(self) -> float:
        if self.factorized:
            return self.kappa1.mass + self.kappa2.mass
        # sup over y - x = r of sum_z b(x, y | z); with u = x - z, v = u + r
        dom = self.domain
        d, m = dom.dimension, dom.resolution
        idx_u = np.indices(dom.shape).reshape(d, -1)
        best = 0.0
        for r in np.ndindex(*dom.shape):
            idx_v = (idx_u + np.array(r)[:, None]) % m
            best = max(best, float(self.b_table[tuple(idx_u) + tuple(idx_v)].sum()))
        return best * dom.cell_volume

    @cached_property
    def sup_b(self) -> float:
        if self.factorized:
            return self.kappa1.peak(self.domain) + self.kappa2.peak(self.domain)
        return float(self.b_table.max())

    @cached_property
    def alpha_kappa1(self) -> RadialProfile:
        return convolve_profiles(self.alpha, self.kappa1, self.domain)

    @cached_property
    def alpha_kappa2(self) -> RadialProfile:
        return convolve_profiles(self.alpha, self.kappa2, self.domain)

    def _phi_tables(self) -> tuple[NDArray, NDArray]:
        dom = self.domain
        if not self.factorized:
            return _phi_general(self)
        ma = self.mass_a_grid
        conv1 = dom.convolve(self.alpha_grid, self.kappa1_grid)
        conv2 = dom.convolve(self.alpha_grid, self.kappa2_grid)
        if self.check_resolution:
            for conv, kap in ((conv1, self.kappa1), (conv2, self.kappa2)):
                expected = self.alpha.mass * kap.mass
                got = conv.sum() * dom.cell_volume
                if abs(got - expected) > 1e-6 * max(1.0, expected):
                    raise ResolutionError(
                        f"convolution mass {got:.12g} differs from {expected:.12g}; refine the grid")
        phi_plus = conv1 + ma * self.kappa2_grid
        phi_minus = ma * self.kappa1_grid + conv2
        return phi_plus, phi_minus

    def phi_at(self, disp: NDArray, sign: str) -> NDArray:
        """``phi_sign(x, y)`` at displacement ``x - y`` (continuous evaluation)."""
        if not self.factorized:
            table = self.phi_plus_grid if sign == "+" else self.phi_minus_grid
            return self.domain.interpolate(table, np.abs(self.domain.min_image(disp)))
        dom, ma = self.domain, self.mass_a
        if sign == "+":
            return self.alpha_kappa1.evaluate(disp, dom) + ma * self.kappa2.evaluate(disp, dom)
        if sign == "-":
            return ma * self.kappa1.evaluate(disp, dom) + self.alpha_kappa2.evaluate(disp, dom)
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")

    def constants(self) -> dict[str, float]:
        return {
            "mass_a": self.mass_a,
            "mass_a_grid": self.mass_a_grid,
            "mean_b": self.mean_b,
            "sup_b": self.sup_b,
            "phi_plus_max": float(self.phi_plus_grid.max()),
            "phi_minus_max": float(self.phi_minus_grid.max()),
        }


def _phi_general(model: KernelModel) -> tuple[NDArray, NDArray]:
    """Direct quadrature of phi_+ and phi_- for a tabulated ``b``.

    With ``B[u, v] = b(x, y | z)``, ``u = x - z``, ``v = y - z``:
    phi_+(r) = sum_u h^d alpha(r - u) B[u, r] and
    phi_-(r) = sum_u h^d alpha(u - r) B[r, u].
    """
    dom = model.domain
    d, m, dv = dom.dimension, dom.resolution, dom.cell_volume
    alpha = model.alpha_grid
    tab = model.b_table
    idx = np.indices(dom.shape).reshape(d, -1)
    plus = np.empty(dom.shape)
    minus = np.empty(dom.shape)
    for r in np.ndindex(*dom.shape):
        rr = np.array(r)[:, None]
        diff = tuple((rr - idx) % m)
        plus[r] = np.sum(alpha[diff] * tab[tuple(idx) + r]) * dv
        minus[r] = np.sum(alpha[diff] * tab[r + tuple(idx)]) * dv
    return plus, minus


def eval_a(model: KernelModel, x: NDArray, y: NDArray) -> NDArray:
    """Jump kernel ``a(x, y)``."""
    return model.alpha.evaluate(np.asarray(y, float) - np.asarray(x, float), model.domain)


def eval_b(model: KernelModel, x: NDArray, y: NDArray, z: NDArray) -> NDArray:
    """Influence kernel ``b(x, y | z)``."""
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    dom = model.domain
    if not model.factorized:
        u = np.abs(dom.min_image(x - z))
        v = np.abs(dom.min_image(y - z))
        # nearest grid node; general tables are grid objects
        iu = np.round(u / dom.spacing).astype(int) % dom.resolution
        iv = np.round(v / dom.spacing).astype(int) % dom.resolution
        return model.b_table[tuple(np.moveaxis(iu, -1, 0)) + tuple(np.moveaxis(iv, -1, 0))]
    return model.kappa1.evaluate(x - z, dom) + model.kappa2.evaluate(y - z, dom)


def compute_phi(model: KernelModel) -> tuple[NDArray, NDArray]:
    """Grid tables of ``(phi_plus, phi_minus)`` as functions of separation."""
    bound = model.sup_b * model.mass_a_grid + QUAD_TOL
    for name, tab in (("phi_plus", model.phi_plus_grid), ("phi_minus", model.phi_minus_grid)):
        if tab.min() < -QUAD_TOL or tab.max() > bound:
            raise ResolutionError(f"{name} leaves [0, sup_b]: range [{tab.min()}, {tab.max()}]")
    return model.phi_plus_grid, model.phi_minus_grid


@dataclass
class StabilityReport:
    fourier_ok: bool
    min_product: float
    omega: float
    empirical: bool
    pointwise_T7_ok: bool
    omega_pair_lower: float
    max_imag: float
    evidence: NDArray | None = None
    omega_by_size: dict[int, float] = field(default_factory=dict)
    growth_slope: float | None = None

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.omega)

    @property
    def verdict(self) -> str:
        if self.unbounded:
            return "unbounded"
        return "empirical" if self.empirical else "certified"

    def as_dict(self) -> dict:
        out = {
            "fourier_ok": self.fourier_ok,
            "min_product": self.min_product,
            "omega": "unbounded" if self.unbounded else self.omega,
            "verdict": self.verdict,
            "empirical": self.empirical,
            "pointwise_T7_ok": self.pointwise_T7_ok,
            "omega_pair_lower": self.omega_pair_lower,
            "max_imag": self.max_imag,
            "growth_slope": self.growth_slope,
            "omega_by_size": {str(k): v for k, v in self.omega_by_size.items()},
        }
        if self.evidence is not None:
            out["evidence"] = self.evidence.tolist()
        return out

    def summary(self) -> str:
        lines = [
            f"Fourier criterion: {'PASS' if self.fourier_ok else 'FAIL'} (min product {self.min_product:.3e})",
            f"omega: {'unbounded' if self.unbounded else f'{self.omega:.6g}'} ({self.verdict})",
            f"pairwise lower bound on omega: {self.omega_pair_lower:.6g}",
            f"pointwise phi_- >= phi_+: {'yes' if self.pointwise_T7_ok else 'no'}",
        ]
        if self.evidence is not None:
            lines.append(f"worst configuration: {len(self.evidence)} points")
        return "\n".join(lines)


def fourier_product(model: KernelModel) -> tuple[NDArray, float]:
    """Grid values of the stability symbol and the largest imaginary residue."""
    dom = model.domain
    if model.factorized:
        a_hat = dom.transform(model.alpha_grid)
        k1_hat = dom.transform(model.kappa1_grid)
        k2_hat = dom.transform(model.kappa2_grid)
        imag = max(np.abs(a_hat.imag).max(), np.abs(k1_hat.imag).max(), np.abs(k2_hat.imag).max())
        return (1.0 - a_hat.real) * (k1_hat.real - k2_hat.real), float(imag)
    psi_hat = dom.transform(model.phi_minus_grid - model.phi_plus_grid)
    return psi_hat.real, float(np.abs(psi_hat.imag).max())


def stability_check(model: KernelModel, sample_budget: int = 2000, max_config_size: int = 20,
                    rng: np.random.Generator | int | None = 0) -> StabilityReport:
    """Check ``Phi_+(eta) <= Phi_-(eta) + omega |eta|``.

    A nonnegative Fourier symbol makes ``psi = phi_- - phi_+`` positive
    definite, which yields the certified constant ``omega = psi(0)``.
    Otherwise configurations are sampled and the verdict is empirical.
    """
    from .configurations import big_phi  # noqa: PLC0415  (module cycle)

    product, imag = fourier_product(model)
    min_product = float(product.min())
    psi = model.phi_minus_grid - model.phi_plus_grid
    t7 = bool(np.all(psi >= -QUAD_TOL))
    pair_lower = max(0.0, float(-psi.min()))
    zero_idx = (0,) * model.domain.dimension
    if min_product >= -FOURIER_TOL:
        omega = max(0.0, float(psi[zero_idx]))
        return StabilityReport(True, min_product, omega, False, t7, pair_lower, imag)

    rng = np.random.default_rng(rng)
    dom = model.domain
    sizes = np.arange(2, max(max_config_size, 2) + 1)
    per_size = max(2, sample_budget // len(sizes))
    scale = min(p.width for p in (model.alpha, model.kappa1, model.kappa2)
                if p.family in ("gaussian", "exponential", "tophat")) if model.factorized else dom.spacing
    best: dict[int, float] = {}
    worst_cfg, worst_val = None, -np.inf
    for n in sizes:
        top = 0.0
        for trial in range(per_size):
            if trial == 0:
                pts = np.repeat(rng.uniform(0, dom.length, (1, dom.dimension)), n, axis=0)
            elif trial % 2:
                pts = rng.uniform(0, dom.length, (n, dom.dimension))
            else:
                centre = rng.uniform(0, dom.length, (1, dom.dimension))
                spread = rng.uniform(0, scale)
                pts = dom.wrap(centre + rng.normal(0, spread, (n, dom.dimension)))
            excess = (big_phi(model, pts, "+") - big_phi(model, pts, "-")) / n
            if excess > top:
                top = excess
            if excess > worst_val:
                worst_val, worst_cfg = excess, pts
        best[int(n)] = float(top)
    ns = np.array(sorted(best))
    vals = np.array([best[n] for n in ns])
    slope = float(np.polyfit(ns, vals, 1)[0]) if len(ns) > 1 else 0.0
    omega = math.inf if slope > 0.1 * model.sup_b else float(vals.max())
    return StabilityReport(False, min_product, omega, True, t7, pair_lower, imag,
                           evidence=worst_cfg, omega_by_size=best, growth_slope=slope)
