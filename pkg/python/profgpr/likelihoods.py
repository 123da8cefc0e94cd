"""Observation-noise models
"""
from dataclasses import dataclass, asdict, replace
from enum import Enum

import numpy as np
from scipy.special import gammaln

from profgpr.transforms import LOG, LOG_NU

LOG_2PI = np.log(2.0 * np.pi)


def _check_residual(residual):
    residual = np.asarray(residual, dtype=float)
    if not np.all(np.isfinite(residual)):
        raise ValueError("Residuals must be finite")
    return residual


@dataclass(frozen=True)
class GaussianLik:
    """Gaussian noise of scale `sigma_n`"""
    sigma_n: float = 1.0

    name = 'gaussian'
    param_names = ('sigma_n',)
    transforms = {'sigma_n': LOG}

    def __post_init__(self):
        if not (np.isfinite(self.sigma_n) and self.sigma_n > 0):
            raise ValueError(f"GaussianLik.sigma_n must be > 0, got {self.sigma_n}")

    @property
    def scale(self):
        return self.sigma_n

    def log_density(self, residual):
        x = _check_residual(residual) / self.sigma_n
        return -0.5 * LOG_2PI - np.log(self.sigma_n) - 0.5 * x**2


@dataclass(frozen=True)
class StudentTLik:
    """Student's-t noise with scale `sigma_t` and `nu` > 1 degrees of freedom"""
    sigma_t: float = 1.0
    nu: float = 4.0

    name = 'student_t'
    param_names = ('sigma_t', 'nu')
    transforms = {'sigma_t': LOG, 'nu': LOG_NU}

    def __post_init__(self):
        if not (np.isfinite(self.sigma_t) and self.sigma_t > 0):
            raise ValueError(f"StudentTLik.sigma_t must be > 0, got {self.sigma_t}")
        if not (np.isfinite(self.nu) and self.nu > 1):
            raise ValueError(f"StudentTLik.nu must be > 1, got {self.nu}")

    @property
    def scale(self):
        return self.sigma_t

    def log_density(self, residual):
        x = _check_residual(residual) / self.sigma_t
        nu = self.nu
        norm = gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu) - 0.5 * np.log(nu * np.pi) - np.log(self.sigma_t)
        return norm - 0.5 * (nu + 1.0) * np.log1p(x**2 / nu)


class TailFamily(Enum):
    LAPLACE = 'laplace'
    LOGISTIC = 'logistic'


@dataclass(frozen=True)
class HeavyTailLik:
    """Laplace or logistic noise of the given scale"""
    family: TailFamily = TailFamily.LAPLACE
    scale: float = 1.0

    param_names = ('scale',)
    transforms = {'scale': LOG}

    def __post_init__(self):
        object.__setattr__(self, 'family', TailFamily(self.family))
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"HeavyTailLik.scale must be > 0, got {self.scale}")

    @property
    def name(self):
        return self.family.value

    def log_density(self, residual):
        x = np.abs(_check_residual(residual)) / self.scale
        if self.family is TailFamily.LAPLACE:
            return -np.log(2.0 * self.scale) - x
        # log of e^-x / (s (1 + e^-x)^2), written for large |x|
        return -x - 2.0 * np.log1p(np.exp(-x)) - np.log(self.scale)


def log_density(lik, residual):
    """Per-point log density of `residual` under likelihood `lik`"""
    return lik.log_density(residual)


def joint_log_likelihood(lik, residuals):
    """Sum of per-point log densities; 0 for an empty array"""
    residuals = np.asarray(residuals, dtype=float)
    if residuals.size == 0:
        return 0.0
    return float(np.sum(lik.log_density(residuals)))


def lik_values(lik):
    """Hyperparameter value dict of a likelihood"""
    return {name: getattr(lik, name) for name in lik.param_names}


def with_values(lik, values):
    """Copy of `lik` with the named hyperparameters replaced"""
    return replace(lik, **{k: v for k, v in values.items() if k in lik.param_names})


def lik_to_dict(lik):
    """JSON-ready description with a family tag"""
    out = asdict(lik)
    if isinstance(lik, HeavyTailLik):
        out.pop('family')
    return {'likelihood': lik.name, **out}


def lik_from_dict(d):
    d = dict(d)
    tag = d.pop('likelihood')
    return make_likelihood(tag, **d)


def make_likelihood(name, **values):
    """Instantiate a likelihood by family tag (gaussian, student_t, laplace, logistic)"""
    if name == GaussianLik.name:
        return GaussianLik(**values)
    if name == StudentTLik.name:
        return StudentTLik(**values)
    try:
        family = TailFamily(name)
    except ValueError:
        raise ValueError(f"Unknown likelihood '{name}'") from None
    return HeavyTailLik(family=family, **values)
