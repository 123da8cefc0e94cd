"""Exact Gaussian-process regression: marginal likelihood and posterior predictive
"""
from dataclasses import dataclass
import csv

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from profgpr.kernels import NumericalError, jittered_cholesky
from profgpr.likelihoods import GaussianLik
from profgpr.logger import get_logger
from profgpr.profiles import DOMAIN

logger = get_logger()

DEFAULT_GRID_SIZE = 220
NEGATIVE_VARIANCE_TOL = 1e-6


def display_grid(n=DEFAULT_GRID_SIZE):
    """Uniform evaluation grid over the profile domain"""
    return np.linspace(*DOMAIN, int(n))


@dataclass(frozen=True)
class GPModel:
    """GP prior with Gaussian observation noise

    Attributes
    ----------
    kernel : profgpr.kernels.KernelFamily
    params : object
        Typed kernel parameters of `kernel`
    noise : GaussianLik
    mean : float
        Constant prior mean
    use_reported_sigma : bool
        If True the noise variance at point i is (sigma_n * sigma_reported_i)^2
    """
    kernel: object
    params: object
    noise: GaussianLik = GaussianLik()
    mean: float = 0.0
    use_reported_sigma: bool = False

    @classmethod
    def from_values(cls, kernel, values, **kwargs):
        """Build from one dict holding kernel hyperparameters and ``sigma_n``"""
        return cls(kernel, kernel.params(values), GaussianLik(values['sigma_n']), **kwargs)

    def values(self):
        return {**self.kernel.values(self.params), 'sigma_n': self.noise.sigma_n}

    def noise_variance(self, data):
        """Per-point noise variance on `data`"""
        rel = data.sigma_reported if self.use_reported_sigma else np.ones(len(data))
        return self.noise.sigma_n**2 * rel**2

    def prior_matrix(self, psi):
        return self.kernel.matrix(self.params, psi)


@dataclass(frozen=True, eq=False)
class PredictiveGrid:
    """Pointwise predictive mean and standard deviation"""
    psi: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    def __len__(self):
        return len(self.psi)

    def to_csv(self, path):
        """Write CSV ``psi,mean,std`` at full round-trip precision"""
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(('psi', 'mean', 'std'))
            for row in zip(self.psi, self.mean, self.std):
                writer.writerow([repr(float(val)) for val in row])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2])


def _factor(model, data):
    cov = model.prior_matrix(data.psi) + np.diag(model.noise_variance(data))
    chol, jitter = jittered_cholesky(cov)
    return chol, jitter


def log_marginal_likelihood(model, data, grad=False):
    """Log marginal likelihood of `data` under `model`

    Parameters
    ----------
    model : GPModel
    data : profgpr.profiles.Dataset
    grad : bool
        Also return the gradient

    Returns
    -------
    lml : float
    gradient : dict
        Only if `grad`; d(lml)/d(theta) keyed by hyperparameter name, theta being the transformed coordinate
        of each kernel hyperparameter and of ``sigma_n``

    Raises
    ------
    profgpr.kernels.CholeskyError
    """
    resid = data.y - model.mean
    chol, _ = _factor(model, data)
    alpha = cho_solve((chol, True), resid, check_finite=False)
    n = len(data)
    lml = -0.5 * resid @ alpha - np.sum(np.log(np.diag(chol))) - 0.5 * n * np.log(2.0 * np.pi)
    if not grad:
        return float(lml)

    # d lml / d p = -1/2 tr(Q dK/dp) with Q = K^-1 - alpha alpha^T
    q = cho_solve((chol, True), np.eye(n), check_finite=False) - np.outer(alpha, alpha)
    values = model.values()
    gradient = {}
    for name, dk in model.kernel.gradients(model.params, data.psi).items():
        transform = model.kernel.transforms[name]
        d_value = -0.5 * np.sum(q * dk)
        gradient[name] = float(d_value * transform.grad(transform.forward(values[name])))
    # noise variance is sigma_n^2 r_i^2, and log sigma_n is the coordinate
    gradient['sigma_n'] = float(-np.sum(np.diag(q) * model.noise_variance(data)))
    return float(lml), gradient


def posterior_predictive(model, data, grid):
    """Predictive mean and std of the latent function on `grid`

    Parameters
    ----------
    model : GPModel
    data : profgpr.profiles.Dataset
    grid : numpy.ndarray

    Returns
    -------
    pred : PredictiveGrid

    Raises
    ------
    profgpr.kernels.NumericalError
        If a predictive variance is more negative than round-off allows
    """
    grid = np.asarray(grid, dtype=float)
    chol, _ = _factor(model, data)
    k_star = model.kernel.matrix(model.params, data.psi, grid)
    alpha = cho_solve((chol, True), data.y - model.mean, check_finite=False)
    mean = model.mean + k_star.T @ alpha
    var = _predictive_variance(model, chol, k_star, grid)
    return PredictiveGrid(grid, mean, np.sqrt(var))


def _predictive_variance(model, chol, k_star, grid):
    tmp = solve_triangular(chol, k_star, lower=True, check_finite=False)
    var = model.kernel.diag(model.params, grid) - np.sum(tmp**2, axis=0)
    floor = -NEGATIVE_VARIANCE_TOL * model.kernel.prior_scale(model.params)
    if np.min(var) < floor:
        msg = f"Predictive variance {np.min(var):.3g} below tolerance {floor:.3g}"
        logger.error(msg)
        raise NumericalError(msg)
    return np.maximum(var, 0.0)


def latent_cholesky(model, psi):
    """Jittered Cholesky factor of the noise-free prior Gram matrix at `psi`"""
    chol, _ = jittered_cholesky(model.prior_matrix(psi))
    return chol


def whiten(chol, f):
    """v such that f = chol @ v"""
    return solve_triangular(chol, f, lower=True, check_finite=False)


def unwhiten(chol, v):
    return chol @ v


def condition_whitened(chol, v, k_star):
    """Noise-free conditional mean K_*^T K^-1 f for f = chol @ v, with one triangular solve"""
    return k_star.T @ solve_triangular(chol.T, v, lower=False, check_finite=False)


def condition_latent(model, psi, f, grid):
    """Noise-free conditional mean on `grid` given latent values `f` at `psi`

    Parameters
    ----------
    model : GPModel
    psi : numpy.ndarray
        Data coordinates
    f : numpy.ndarray
        Latent function values at `psi`
    grid : numpy.ndarray

    Returns
    -------
    mean : numpy.ndarray
    """
    psi = np.asarray(psi, dtype=float)
    f = np.asarray(f, dtype=float)
    if f.shape != psi.shape:
        raise ValueError(f"Latent vector has shape {f.shape}, expected {psi.shape}")
    chol = latent_cholesky(model, psi)
    k_star = model.kernel.matrix(model.params, psi, grid)
    return model.mean + condition_whitened(chol, whiten(chol, f - model.mean), k_star)
