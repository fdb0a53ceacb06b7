"""Gaussian beliefs, ensembles, and model interfaces shared by all filters.

Types are immutable after construction (arrays are copied and marked
read-only), so values can be shared freely across Monte Carlo workers.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from bruf.exceptions import (
    DimensionError,
    InsufficientSamplesError,
    InvalidInflationError,
    NotPositiveSemidefiniteError,
)
from bruf.linalg import cholesky_lower, symmetrize


def _frozen_array(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GaussianBelief:
    """Mean vector and covariance matrix of a Gaussian state estimate.

    The covariance must be symmetric (to 1e-12 of its largest entry) and
    positive semi-definite (smallest eigenvalue >= -1e-10 * trace / n).
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _frozen_array(self.mean)
        cov = _frozen_array(self.cov)
        if mean.ndim != 1:
            raise DimensionError(f"mean must be a vector, got shape {mean.shape}")
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise DimensionError(f"cov shape {cov.shape} does not match mean length {n}")
        scale = np.max(np.abs(cov)) if cov.size else 0.0
        asym = np.max(np.abs(cov - cov.T)) if cov.size else 0.0
        if asym > 1e-12 * max(scale, 1e-300):
            raise DimensionError(
                f"covariance is not symmetric (max asymmetry {asym:.3e} vs scale {scale:.3e})"
            )
        w_min = float(np.linalg.eigvalsh(symmetrize(cov))[0])
        tol = 1e-10 * abs(float(np.trace(cov))) / n
        if w_min < -tol:
            raise NotPositiveSemidefiniteError(
                f"covariance has eigenvalue {w_min:.3e} below tolerance {-tol:.3e}",
                min_eigenvalue=w_min,
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class Ensemble:
    """An ordered collection of M state vectors, stored as an (M, n) array."""

    members: np.ndarray

    def __post_init__(self):
        try:
            members = _frozen_array(self.members)
        except ValueError as err:
            raise DimensionError(f"members must form a rectangular array: {err}") from err
        if members.ndim != 2:
            raise DimensionError(
                f"members must be an (M, n) array, got shape {members.shape}"
            )
        if members.shape[0] < 2:
            raise InsufficientSamplesError(
                f"an ensemble needs at least 2 members, got {members.shape[0]}"
            )
        object.__setattr__(self, "members", members)

    @property
    def size(self) -> int:
        return self.members.shape[0]

    @property
    def dim(self) -> int:
        return self.members.shape[1]


def _as_members(ens) -> np.ndarray:
    if isinstance(ens, Ensemble):
        return ens.members
    arr = np.asarray(ens, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"expected an (M, n) member array, got shape {arr.shape}")
    return arr


def empirical_mean(ens) -> np.ndarray:
    """Arithmetic mean of the members."""
    members = _as_members(ens)
    if members.shape[0] < 1:
        raise DimensionError("cannot average an empty ensemble")
    return members.mean(axis=0)


def empirical_cov(ens) -> np.ndarray:
    """Unbiased sample covariance (divisor M - 1), exactly symmetric."""
    members = _as_members(ens)
    m = members.shape[0]
    if m < 2:
        raise InsufficientSamplesError(f"sample covariance needs M >= 2, got {m}")
    dev = members - members.mean(axis=0)
    cov = dev.T @ dev / (m - 1)
    return symmetrize(cov)


def inflate(ens, factor: float):
    """Scale member deviations about the mean by ``factor`` >= 1.

    Leaves the mean unchanged and multiplies the sample covariance by
    factor^2. A factor of exactly 1 returns the input members unchanged.
    """
    if factor < 1.0:
        raise InvalidInflationError(f"inflation factor must be >= 1, got {factor}")
    members = _as_members(ens)
    if factor == 1.0:
        out = members
    else:
        mean = members.mean(axis=0)
        out = mean + factor * (members - mean)
    return Ensemble(out) if isinstance(ens, Ensemble) else out


def finite_difference_jacobian(
    h: Callable[[np.ndarray], np.ndarray], x: np.ndarray, rel_step: float = 1e-6
) -> np.ndarray:
    """Central-difference Jacobian of ``h`` at ``x``.

    Per-component step max(rel_step, rel_step * |x_i|).
    """
    x = np.asarray(x, dtype=float)
    y0 = np.atleast_1d(np.asarray(h(x), dtype=float))
    jac = np.empty((y0.shape[0], x.shape[0]))
    for i in range(x.shape[0]):
        step = max(rel_step, rel_step * abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        jac[:, i] = (np.atleast_1d(h(xp)) - np.atleast_1d(h(xm))) / (2.0 * step)
    return jac


@dataclass(frozen=True)
class MeasurementModel:
    """A nonlinear measurement map, its Jacobian, and the noise covariance.

    ``h`` maps a state vector (n,) to a measurement vector (m,);
    ``jacobian`` maps a state vector to the (m, n) Jacobian. Optional
    ``h_batch``/``jacobian_batch`` evaluate a stack of states (M, n) at once
    and are used by the ensemble filters; without them the single-state
    callables are applied in a loop.
    """

    h: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    noise_cov: np.ndarray
    h_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jacobian_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        r = _frozen_array(self.noise_cov)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise DimensionError(f"noise_cov must be square, got shape {r.shape}")
        asym = np.max(np.abs(r - r.T)) if r.size else 0.0
        if asym > 1e-12 * max(np.max(np.abs(r)), 1e-300):
            raise DimensionError("noise_cov is not symmetric")
        cholesky_lower(r)  # SPD check; raises NotPositiveDefiniteError
        object.__setattr__(self, "noise_cov", r)

    @property
    def meas_dim(self) -> int:
        return self.noise_cov.shape[0]

    @classmethod
    def with_numeric_jacobian(cls, h, noise_cov, rel_step: float = 1e-6):
        """Build a model whose Jacobian is a central-difference fallback."""
        return cls(
            h=h,
            jacobian=lambda x: finite_difference_jacobian(h, x, rel_step),
            noise_cov=noise_cov,
        )

    def measure_many(self, states: np.ndarray) -> np.ndarray:
        """Evaluate h on a stack of states, shape (M, n) -> (M, m)."""
        states = np.asarray(states, dtype=float)
        if self.h_batch is not None:
            return np.asarray(self.h_batch(states), dtype=float)
        return np.stack([np.atleast_1d(self.h(s)) for s in states])

    def jacobian_many(self, states: np.ndarray) -> np.ndarray:
        """Evaluate the Jacobian on a stack of states, (M, n) -> (M, m, n)."""
        states = np.asarray(states, dtype=float)
        if self.jacobian_batch is not None:
            return np.asarray(self.jacobian_batch(states), dtype=float)
        return np.stack([np.atleast_2d(self.jacobian(s)) for s in states])


@dataclass(frozen=True)
class DynamicsModel:
    """State propagation plus optional process noise and covariance map.

    ``propagate(x, dt)`` advances a state vector by duration ``dt``.
    ``cov_propagator(x, P, dt)``, when present, returns the propagated
    (state, covariance) pair under the linearized dynamics; it is needed
    only by filters that carry a covariance through the dynamics (the
    tracking filters and the particle flow's companion estimator).
    """

    propagate: Callable[[np.ndarray, float], np.ndarray]
    process_noise_cov: Optional[np.ndarray] = None
    cov_propagator: Optional[Callable[[np.ndarray, np.ndarray, float], tuple]] = None

    def __post_init__(self):
        if self.process_noise_cov is not None:
            q = _frozen_array(self.process_noise_cov)
            asym = np.max(np.abs(q - q.T)) if q.size else 0.0
            if asym > 1e-12 * max(np.max(np.abs(q)), 1e-300):
                raise DimensionError("process_noise_cov is not symmetric")
            w_min = float(np.linalg.eigvalsh(symmetrize(q))[0])
            tol = 1e-10 * abs(float(np.trace(q))) / q.shape[0]
            if w_min < -tol:
                raise NotPositiveSemidefiniteError(
                    f"process_noise_cov has eigenvalue {w_min:.3e}",
                    min_eigenvalue=w_min,
                )
            object.__setattr__(self, "process_noise_cov", q)
