"""Error norms, correlations, distributions, grids, and shell spectra."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import BandTooNarrowError


def _masked(values, valid):
    values = np.asarray(values, dtype=float)
    flat = values.reshape(len(values), -1)
    if valid is None:
        valid = np.all(np.isfinite(flat), axis=1)
    return flat[valid]


def l2_error(computed, exact, valid=None) -> float:
    """RMS of the difference, normalised by the RMS of the exact field."""
    c = np.asarray(computed, dtype=float).reshape(len(computed), -1)
    e = np.asarray(exact, dtype=float).reshape(len(exact), -1)
    if valid is None:
        valid = np.all(np.isfinite(c), axis=1) & np.all(np.isfinite(e), axis=1)
    c, e = c[valid], e[valid]
    ref = np.sqrt(np.mean(e * e))
    if ref == 0:
        raise ValueError("exact field has zero RMS; use rms_error instead")
    return float(np.sqrt(np.mean((c - e) ** 2)) / ref)


def rms_error(computed, exact, valid=None) -> float:
    """Plain (unnormalised) RMS of the difference."""
    c = np.asarray(computed, dtype=float).reshape(len(computed), -1)
    e = np.asarray(exact, dtype=float).reshape(len(exact), -1)
    if valid is None:
        valid = np.all(np.isfinite(c), axis=1) & np.all(np.isfinite(e), axis=1)
    c, e = c[valid], e[valid]
    return float(np.sqrt(np.mean((c - e) ** 2)))


def pearson(a, b, valid=None) -> float:
    """Pearson correlation; multi-component samples are pooled."""
    x = np.asarray(a, dtype=float).reshape(len(a), -1)
    y = np.asarray(b, dtype=float).reshape(len(b), -1)
    if valid is None:
        valid = np.all(np.isfinite(x), axis=1) & np.all(np.isfinite(y), axis=1)
    x = x[valid].ravel()
    y = y[valid].ravel()
    x = x - x.mean()
    y = y - y.mean()
    denom = np.sqrt((x @ x) * (y @ y))
    if denom == 0:
        raise ValueError("zero-variance input to pearson")
    return float((x @ y) / denom)


def interpolate_crossing(x, y, level) -> float:
    """Abscissa where a decreasing curve y(x) crosses the level.

    Linear interpolation in (log x, y); x ascending.  Raises when the curve
    never brackets the level.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    for i in range(len(x) - 1):
        y0, y1 = y[i], y[i + 1]
        if (y0 - level) * (y1 - level) <= 0 and y0 != y1:
            t = (level - y0) / (y1 - y0)
            return float(np.exp(np.log(x[i]) + t * (np.log(x[i + 1]) - np.log(x[i]))))
    raise ValueError(f"curve never crosses level {level}")


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    window: np.ndarray  # boolean mask of the points used


def preplateau_window(x, errors, floor=0.55, min_points=3) -> np.ndarray:
    """Points in the power-law regime of an error curve.

    Errors typically decay with x until a resolution plateau; scanning from
    the large-x end, the window is the longest suffix over which every local
    log-log slope stays at or above the floor.  At least ``min_points`` are
    kept so a fit is always possible.
    """
    x = np.asarray(x, dtype=float)
    e = np.asarray(errors, dtype=float)
    order = np.argsort(x)
    xs, es = x[order], e[order]
    local = np.diff(np.log(es)) / np.diff(np.log(xs))
    start = 0
    for i in range(len(local) - 1, -1, -1):
        if local[i] < floor:
            start = i + 1
            break
    start = min(start, len(xs) - min_points)
    mask = np.zeros(len(x), dtype=bool)
    mask[order[start:]] = True
    return mask


def fit_loglog_slope(x, errors, window=None) -> SlopeFit:
    """Least-squares slope of log(error) against log(x)."""
    x = np.asarray(x, dtype=float)
    e = np.asarray(errors, dtype=float)
    if window is None:
        window = np.ones(len(x), dtype=bool)
    slope, intercept = np.polyfit(np.log(x[window]), np.log(e[window]), 1)
    return SlopeFit(float(slope), float(intercept), window)


@dataclass
class PdfResult:
    centers: np.ndarray
    density: np.ndarray
    edges: np.ndarray

    @property
    def mass(self) -> float:
        return float(np.sum(self.density * np.diff(self.edges)))


def pdf(values, bins=401, span=10.0, bounds=None, valid=None) -> PdfResult:
    """Histogram density over mean +- span*std (or explicit bounds).

    Multi-component inputs are pooled after masking invalid particles.
    """
    v = _masked(values, valid).ravel()
    if bounds is None:
        mu, sd = v.mean(), v.std()
        if sd == 0:
            sd = max(abs(mu), 1.0)
        bounds = (mu - span * sd, mu + span * sd)
    density, edges = np.histogram(v, bins=bins, range=bounds, density=True)
    centers = 0.5 * (edges[1:] + edges[:-1])
    return PdfResult(centers, density, edges)


def moments(values, valid=None) -> dict:
    """Mean, population variance, and flatness E[(x-mu)^4] / var^2.

    Multi-component inputs are pooled after masking invalid particles.
    """
    v = _masked(values, valid).ravel()
    mu = float(v.mean())
    c = v - mu
    var = float(np.mean(c * c))
    flat = float(np.mean(c ** 4) / var ** 2) if var > 0 else np.nan
    return {"mean": mu, "variance": var, "flatness": flat}


@dataclass
class GridField:
    """Per-cell means of particle values on a regular grid.

    ``values`` holds NaN in empty cells; ``counts`` is the occupancy.
    """

    values: np.ndarray
    counts: np.ndarray
    box_length: float

    @property
    def m(self) -> int:
        return self.counts.shape[0]

    def filled(self, fill=0.0) -> np.ndarray:
        out = self.values.copy()
        out[np.isnan(out)] = fill
        return out


def project_box(domain, positions, values, m, valid=None) -> GridField:
    """Box-kernel projection: mean of particle values in each grid cell."""
    positions = np.asarray(positions, dtype=float)
    values = np.asarray(values, dtype=float)
    scalar = values.ndim == 1
    vals = values.reshape(len(values), -1)
    if valid is None:
        valid = np.all(np.isfinite(vals), axis=1)
    positions, vals = positions[valid], vals[valid]
    dim = domain.dim
    h = domain.length / m
    idx = np.floor((positions - domain.lo_array()) / h).astype(np.int64)
    idx = np.clip(idx, 0, m - 1)
    flat = np.zeros(len(idx), dtype=np.int64)
    for ax in range(dim):
        flat = flat * m + idx[:, ax]
    counts = np.bincount(flat, minlength=m ** dim)
    ncomp = vals.shape[1]
    sums = np.empty((m ** dim, ncomp))
    for c in range(ncomp):
        sums[:, c] = np.bincount(flat, weights=vals[:, c], minlength=m ** dim)
    with np.errstate(divide="ignore", invalid="ignore"):
        means = sums / counts[:, None]
    shape = (m,) * dim if scalar else (m,) * dim + (ncomp,)
    return GridField(
        means.reshape(shape), counts.reshape((m,) * dim), domain.length
    )


@dataclass
class SpectrumResult:
    """Shell-summed power spectrum on integer shells.

    Wavenumbers are in units of 2*pi/box_length; shell k collects modes whose
    integer frequency vector has norm in [k-1/2, k+1/2).  All modes are
    binned (corner shells beyond the Nyquist index included), so the shell
    sum equals the spatial mean square of the field exactly.
    """

    k: np.ndarray
    density: np.ndarray
    dim: int
    nyquist: int
    kind: str = "energy"
    noise_coefficient: float | None = None
    clipped: np.ndarray | None = None

    @property
    def total(self) -> float:
        return float(self.density.sum())


def spectrum(field, box_length=2 * np.pi, kind="energy") -> SpectrumResult:
    """Shell spectrum of a gridded field (components summed).

    Accepts an (M,)*dim array or (M,)*dim + (C,) for C components, or a
    GridField (empty cells zero-filled).
    """
    if isinstance(field, GridField):
        box_length = field.box_length
        field = field.filled(0.0)
    field = np.asarray(field, dtype=float)
    m = field.shape[0]
    # a trailing axis shorter than m is a component axis, not a grid axis
    if field.ndim == 2:
        dim = 2
        comps = field[..., None]
    elif field.ndim == 3:
        dim = 3 if field.shape[2] == m else 2
        comps = field[..., None] if dim == 3 else field
    elif field.ndim == 4:
        dim = 3
        comps = field
    else:
        raise ValueError(f"unsupported field shape {field.shape}")
    freq = np.fft.fftfreq(m, d=1.0 / m)
    grids = np.meshgrid(*([freq] * dim), indexing="ij")
    kmag = np.sqrt(sum(g * g for g in grids))
    shell = np.rint(kmag).astype(np.int64)
    nshell = int(shell.max()) + 1
    density = np.zeros(nshell)
    norm = float(m) ** dim
    for c in range(comps.shape[-1]):
        fk = np.fft.fftn(comps[..., c]) / norm
        density += np.bincount(
            shell.ravel(), weights=(fk * fk.conj()).real.ravel(), minlength=nshell
        )
    return SpectrumResult(
        k=np.arange(nshell), density=density, dim=dim, nyquist=m // 2, kind=kind
    )


def remove_poisson_noise(spec: SpectrumResult, band=(0.7, 1.0)) -> SpectrumResult:
    """Subtract the discreteness noise floor fitted on a high-k band.

    A spatially uncorrelated particle distribution contributes flat modal
    power, i.e. shell density proportional to k**(dim-1).  The coefficient is
    fitted by least squares on shells in [band[0], band[1]] * nyquist and the
    model is subtracted everywhere; negative residuals are clipped to zero
    and flagged.
    """
    k = spec.k.astype(float)
    model = np.where(k > 0, k ** (spec.dim - 1), 0.0)
    lo = int(np.ceil(band[0] * spec.nyquist))
    hi = int(np.floor(band[1] * spec.nyquist))
    sel = (spec.k >= lo) & (spec.k <= hi)
    if sel.sum() < 5:
        raise BandTooNarrowError(
            f"Poisson fit band [{lo}, {hi}] covers {int(sel.sum())} shells; need >= 5"
        )
    denom = float(np.sum(model[sel] ** 2))
    coeff = float(np.sum(spec.density[sel] * model[sel]) / denom)
    resid = spec.density - coeff * model
    clipped = resid < 0
    resid = np.where(clipped, 0.0, resid)
    return replace(
        spec, density=resid, noise_coefficient=coeff, clipped=clipped
    )
