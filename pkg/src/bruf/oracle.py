"""Grid-based ground truth for 2-D posteriors.

Evaluates the unnormalized log posterior (Gaussian prior times measurement
likelihood) on a rectangular grid in log space, normalizes by trapezoidal
mass, and exposes the mode, moments, and highest-density regions. Used as
the independent oracle for the range-observation tests.
"""

from dataclasses import dataclass

import numpy as np

from bruf.belief import GaussianBelief, MeasurementModel
from bruf.exceptions import DimensionError
from bruf.linalg import spd_solve


@dataclass(frozen=True)
class GridPosterior:
    """Normalized posterior density sampled at cell centers."""

    x_centers: np.ndarray
    y_centers: np.ndarray
    density: np.ndarray  # shape (len(x_centers), len(y_centers))
    cell_area: float

    @property
    def total_mass(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.density, self.y_centers, axis=1), self.x_centers))

    def mean(self) -> np.ndarray:
        w = self.density * self.cell_area
        mx = float(np.sum(w * self.x_centers[:, None]))
        my = float(np.sum(w * self.y_centers[None, :]))
        return np.array([mx, my])

    def cov(self) -> np.ndarray:
        w = self.density * self.cell_area
        mean = self.mean()
        dx = self.x_centers[:, None] - mean[0]
        dy = self.y_centers[None, :] - mean[1]
        cxx = float(np.sum(w * dx * dx))
        cyy = float(np.sum(w * dy * dy))
        cxy = float(np.sum(w * dx * dy))
        return np.array([[cxx, cxy], [cxy, cyy]])


def grid_posterior(
    prior: GaussianBelief,
    model: MeasurementModel,
    y,
    bounds=((-6.0, 2.0), (-4.0, 4.0)),
    resolution: int = 800,
) -> GridPosterior:
    """Tabulate the normalized posterior on a ``resolution``-squared grid.

    Computed in log space and shifted by the maximum before exponentiation,
    so small measurement variances cannot underflow the whole grid.
    """
    if prior.dim != 2:
        raise DimensionError("the grid oracle supports 2-D states only")
    if resolution < 100:
        raise ValueError("resolution must be at least 100 cells per axis")
    (x_lo, x_hi), (y_lo, y_hi) = bounds
    dx = (x_hi - x_lo) / resolution
    dy = (y_hi - y_lo) / resolution
    x_centers = x_lo + (np.arange(resolution) + 0.5) * dx
    y_centers = y_lo + (np.arange(resolution) + 0.5) * dy
    cell_area = dx * dy

    xx, yy = np.meshgrid(x_centers, y_centers, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)

    dev = pts - prior.mean
    log_prior = -0.5 * np.einsum("ij,ij->i", dev, spd_solve(prior.cov, dev.T).T)

    y = np.atleast_1d(np.asarray(y, dtype=float))
    res = y[None, :] - model.measure_many(pts)
    log_lik = -0.5 * np.einsum(
        "ij,ij->i", res, spd_solve(model.noise_cov, res.T).T
    )

    log_post = (log_prior + log_lik).reshape(resolution, resolution)
    log_post -= np.max(log_post)
    unnorm = np.exp(log_post)
    mass = float(np.trapezoid(np.trapezoid(unnorm, y_centers, axis=1), x_centers))
    if mass <= 0.0 or not np.isfinite(mass):
        raise FloatingPointError("grid posterior mass underflowed to zero")
    return GridPosterior(
        x_centers=x_centers,
        y_centers=y_centers,
        density=unnorm / mass,
        cell_area=cell_area,
    )


def map_of(grid: GridPosterior) -> np.ndarray:
    """Center of the highest-density cell; ties break at the lowest index."""
    i, j = np.unravel_index(np.argmax(grid.density), grid.density.shape)
    return np.array([grid.x_centers[i], grid.y_centers[j]])


def hdr_mask(grid: GridPosterior, mass: float) -> np.ndarray:
    """Boolean mask of the smallest cell set holding at least ``mass``."""
    if not 0.0 < mass < 1.0:
        raise ValueError("mass must lie in (0, 1)")
    flat = grid.density.ravel()
    order = np.argsort(flat)[::-1]
    cum = np.cumsum(flat[order]) * grid.cell_area
    n_keep = int(np.searchsorted(cum, mass)) + 1
    mask = np.zeros(flat.shape, dtype=bool)
    mask[order[:n_keep]] = True
    return mask.reshape(grid.density.shape)


def hdr_contains(grid: GridPosterior, mask: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Whether each 2-D point falls in a masked cell (outside grid: False)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dx = grid.x_centers[1] - grid.x_centers[0]
    dy = grid.y_centers[1] - grid.y_centers[0]
    ix = np.round((points[:, 0] - grid.x_centers[0]) / dx).astype(int)
    iy = np.round((points[:, 1] - grid.y_centers[0]) / dy).astype(int)
    ok = (
        (ix >= 0)
        & (ix < grid.x_centers.size)
        & (iy >= 0)
        & (iy < grid.y_centers.size)
    )
    out = np.zeros(points.shape[0], dtype=bool)
    out[ok] = mask[ix[ok], iy[ok]]
    return out
