"""
Functional dimension reduction of strain datasets

Each of the six strains is reduced independently: pointwise mean and
standard-deviation functions standardise the samples, the grid-by-grid
covariance is eigendecomposed, and the leading eigenfunctions, re-weighted by
the standard-deviation function, become the basis. A strain field is then

    eps_i(s) = mean_i(s) + sum_j alpha_ij * basis_ij(s)

and the coefficients alpha are stored strain-major (i outer, j inner) over
the active strains only. Inextensible rods freeze strains 4-6 at rest.
"""

import hashlib
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy import linalg

from .errors import DegenerateData, LengthMismatch, OutOfRange, ShapeMismatch
from .geom import FloatArray
from .rod import REST_STRAIN, STRAIN_DIM, StrainField

logger = logging.getLogger(__name__)

ALL_STRAINS: Tuple[int, ...] = (0, 1, 2, 3, 4, 5)
ANGULAR_STRAINS: Tuple[int, ...] = (0, 1, 2)
DEFAULT_STD_FLOOR = 1e-8

SeedLike = Union[int, np.random.SeedSequence]


@dataclass(frozen=True)
class StrainDataset:
    """Strain samples (T, N, 6) on a shared grid, with the trajectory each came from"""

    grid: FloatArray
    samples: FloatArray
    trajectory: Optional[npt.NDArray[np.int64]] = None

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=np.float64)
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 3 or samples.shape[1:] != (grid.size, STRAIN_DIM):
            raise ShapeMismatch(
                f"Samples must have shape (T, {grid.size}, 6), got {samples.shape}"
            )
        if samples.shape[0] < 2:
            raise LengthMismatch("A strain dataset needs at least two samples")
        trajectory = (
            np.zeros(samples.shape[0], dtype=np.int64)
            if self.trajectory is None
            else np.asarray(self.trajectory, dtype=np.int64)
        )
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "trajectory", trajectory)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    def field(self, index: int) -> StrainField:
        return StrainField(self.grid, self.samples[index])


@dataclass(frozen=True)
class BasisSet:
    """Per-strain PCA statistics on a grid

    Arrays are indexed by strain first: mean/std (6, N), eigenvectors
    (6, Nb, N) orthonormal in the standardised space, eigenvalues and
    coefficient statistics (6, Nb), retained variance fraction (6,).
    """

    grid: FloatArray
    mean: FloatArray
    std: FloatArray
    eigenvectors: FloatArray
    eigenvalues: FloatArray
    coeff_mean: FloatArray
    coeff_std: FloatArray
    retained_variance: FloatArray
    active: Tuple[int, ...] = ALL_STRAINS

    @property
    def n_basis(self) -> int:
        return int(self.eigenvectors.shape[1])

    @property
    def n_coefficients(self) -> int:
        return len(self.active) * self.n_basis

    @property
    def inextensible(self) -> bool:
        return self.active == ANGULAR_STRAINS

    @cached_property
    def basis_functions(self) -> FloatArray:
        """Eigenfunctions weighted by the standard-deviation function, (6, Nb, N)"""
        return self.std[:, None, :] * self.eigenvectors

    @cached_property
    def design(self) -> FloatArray:
        """Linear synthesis operator (n_coefficients, N, 6)"""
        out = np.zeros((self.n_coefficients, self.grid.size, STRAIN_DIM))
        for slot, (i, j) in enumerate(self.slots()):
            out[slot, :, i] = self.basis_functions[i, j]
        return out

    def slots(self) -> Sequence[Tuple[int, int]]:
        return [(i, j) for i in self.active for j in range(self.n_basis)]

    def coefficient_mean(self) -> FloatArray:
        return np.array([self.coeff_mean[i, j] for i, j in self.slots()])

    def coefficient_std(self) -> FloatArray:
        return np.array([self.coeff_std[i, j] for i, j in self.slots()])

    def checksum(self) -> str:
        """sha256 over the grid, active strains, mean and basis functions"""
        digest = hashlib.sha256()
        digest.update(np.asarray(self.active, dtype="<i8").tobytes())
        for array in (self.grid, self.mean, self.basis_functions):
            digest.update(np.ascontiguousarray(array, dtype="<f8").tobytes())
        return digest.hexdigest()


def _standardize(
    x: FloatArray, std_floor: float, strain: int
) -> Tuple[FloatArray, FloatArray, FloatArray]:
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=1)
    peak = float(std.max())
    if peak == 0.0:
        if std_floor <= 0:
            raise DegenerateData(f"Strain {strain + 1} is constant over the whole dataset")
        std = np.ones_like(std)
    elif std_floor > 0:
        std = np.maximum(std, std_floor * peak)
    elif np.any(std == 0.0):
        raise DegenerateData(f"Strain {strain + 1} has zero variance at some grid nodes")
    return (x - mean) / std, mean, std


def fit_pca(
    data: StrainDataset,
    n_basis: int,
    inextensible: bool = False,
    std_floor: float = DEFAULT_STD_FLOOR,
    rest: Optional[npt.ArrayLike] = None,
) -> BasisSet:
    """Per-strain PCA on the standardised dataset, keeping `n_basis` components"""
    n_samples, n_nodes = len(data), data.grid.size
    if not 1 <= n_basis <= min(n_samples - 1, n_nodes):
        raise OutOfRange(
            f"n_basis must lie in [1, {min(n_samples - 1, n_nodes)}], got {n_basis}"
        )
    rest_values = REST_STRAIN if rest is None else np.asarray(rest, dtype=np.float64)
    active = ANGULAR_STRAINS if inextensible else ALL_STRAINS

    mean = np.tile(rest_values[:, None], (1, n_nodes))
    std = np.ones((STRAIN_DIM, n_nodes))
    vectors = np.zeros((STRAIN_DIM, n_basis, n_nodes))
    values = np.zeros((STRAIN_DIM, n_basis))
    coeff_mean = np.zeros((STRAIN_DIM, n_basis))
    coeff_std = np.zeros((STRAIN_DIM, n_basis))
    retained = np.ones(STRAIN_DIM)

    for i in active:
        z, mean[i], std[i] = _standardize(data.samples[:, :, i], std_floor, i)
        cov = z.T @ z / (n_samples - 1)
        eigval, eigvec = linalg.eigh(cov)
        eigval = np.clip(eigval[::-1], 0.0, None)
        eigvec = eigvec[:, ::-1][:, :n_basis]
        # Fix the sign so the largest entry of each eigenfunction is positive
        pivot = np.abs(eigvec).argmax(axis=0)
        eigvec = eigvec * np.sign(eigvec[pivot, np.arange(n_basis)])
        vectors[i] = eigvec.T
        values[i] = eigval[:n_basis]
        alpha = z @ eigvec
        coeff_mean[i] = alpha.mean(axis=0)
        coeff_std[i] = alpha.std(axis=0, ddof=1)
        total = eigval.sum()
        retained[i] = eigval[:n_basis].sum() / total if total > 0 else 1.0

    basis = BasisSet(
        grid=data.grid.copy(),
        mean=mean,
        std=std,
        eigenvectors=vectors,
        eigenvalues=values,
        coeff_mean=coeff_mean,
        coeff_std=coeff_std,
        retained_variance=retained,
        active=active,
    )
    logger.info(
        "PCA fitted: %d samples, %d nodes, %d components per strain, retained %s",
        n_samples,
        n_nodes,
        n_basis,
        np.array2string(retained[list(active)], precision=6),
    )
    return basis


def project(basis: BasisSet, values: npt.ArrayLike) -> FloatArray:
    """Coefficients (..., n_coefficients) of strain values (..., N, 6) in the standardised space"""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-2:] != (basis.grid.size, STRAIN_DIM):
        raise ShapeMismatch(f"Strain values shape {values.shape} does not match the basis grid")
    z = (np.swapaxes(values, -1, -2) - basis.mean) / basis.std
    alpha = np.einsum("...in,ijn->...ij", z, basis.eigenvectors)
    return np.stack([alpha[..., i, j] for i, j in basis.slots()], axis=-1)


def synthesize_values(basis: BasisSet, coeffs: npt.ArrayLike) -> FloatArray:
    """Strain values (B, N, 6) for a batch of coefficient vectors (B, n_coefficients)"""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
    if coeffs.shape[-1] != basis.n_coefficients:
        raise LengthMismatch(
            f"Expected {basis.n_coefficients} coefficients, got {coeffs.shape[-1]}"
        )
    return basis.mean.T[None] + np.einsum("bk,kni->bni", coeffs, basis.design)


def synthesis_vjp(basis: BasisSet, values_bar: npt.ArrayLike) -> FloatArray:
    """Pull a cotangent on strain values (B, N, 6) back to the coefficients"""
    return np.einsum("bni,kni->bk", np.asarray(values_bar, dtype=np.float64), basis.design)


def synthesize_strain(basis: BasisSet, coeffs: npt.ArrayLike) -> StrainField:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 1:
        raise LengthMismatch(f"Expected a single coefficient vector, got shape {coeffs.shape}")
    return StrainField(basis.grid, synthesize_values(basis, coeffs)[0])


def sample_coefficients(basis: BasisSet, count: int, seed: SeedLike) -> FloatArray:
    """`count` coefficient vectors drawn from independent Normal(mean, std^2)"""
    if count < 1:
        raise OutOfRange(f"count must be at least 1, got {count}")
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((count, basis.n_coefficients))
    return basis.coefficient_mean() + basis.coefficient_std() * draws
