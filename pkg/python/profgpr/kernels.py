"""Covariance functions, Gram matrices and the Cholesky jitter policy

Kernels are elementwise numpy functions of ``(params, psi, psi2)`` and broadcast like ufuncs, so
``k(p, x[:, None], x[None, :])`` is a Gram matrix and ``k(p, x, x)`` its diagonal.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, asdict

import numpy as np
from scipy.linalg import cholesky, LinAlgError
from scipy.special import expit

from profgpr.logger import get_logger
from profgpr.transforms import IDENTITY, LOG

logger = get_logger()

SQRT5 = np.sqrt(5.0)
JITTER_START = 1e-8
JITTER_MAX = 1e-4


class NumericalError(RuntimeError):
    """Numerical failure of GP linear algebra"""


class CholeskyError(NumericalError):
    """Cholesky factorization failed after the jitter escalation policy was exhausted

    Parameters
    ----------
    msg : str
    diagnostics : dict
        Matrix size, mean and minimum diagonal, last jitter tried
    """
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


def _require_positive(obj, *names):
    for name in names:
        val = getattr(obj, name)
        if not (np.isfinite(val) and val > 0):
            raise ValueError(f"{type(obj).__name__}.{name} must be finite and > 0, got {val}")


@dataclass(frozen=True)
class StationaryParams:
    """Amplitude and correlation length of a stationary kernel"""
    theta_v: float
    theta_l: float

    def __post_init__(self):
        _require_positive(self, 'theta_v', 'theta_l')


@dataclass(frozen=True)
class GibbsTanhParams:
    """Gibbs kernel whose length scale steps from `l_core` to `l_edge` around `psi_0` with width `w_l`"""
    theta_v: float
    l_core: float
    l_edge: float
    psi_0: float
    w_l: float

    def __post_init__(self):
        _require_positive(self, 'theta_v', 'l_core', 'l_edge', 'psi_0', 'w_l')

    def length_scale(self, psi):
        return 0.5 * (self.l_core + self.l_edge) - 0.5 * (self.l_core - self.l_edge) * np.tanh(
            (np.asarray(psi, dtype=float) - self.psi_0) / self.w_l)


@dataclass(frozen=True)
class ChangePointConfig:
    """Two Matérn 5/2 kernels blended by logistic transfer functions

    Kernel A covers [0, c1] and [c2, 1.1]; kernel B covers [c1, c2].
    """
    kernel_a: StationaryParams
    kernel_b: StationaryParams
    locations: tuple = (0.9, 1.0)
    transfer_width: float = 0.01

    def __post_init__(self):
        for name in ('kernel_a', 'kernel_b'):
            val = getattr(self, name)
            if isinstance(val, dict):
                object.__setattr__(self, name, StationaryParams(**val))
        object.__setattr__(self, 'locations', tuple(float(c) for c in self.locations))
        if len(self.locations) != 2 or not self.locations[0] < self.locations[1]:
            raise ValueError(f"ChangePointConfig.locations must be an increasing pair, got {self.locations}")
        _require_positive(self, 'transfer_width')


def k_sek(p, psi, psi2):
    """Squared-exponential kernel, amplitude unsquared: theta_v * exp(-r^2 / (2 theta_l^2))"""
    r = np.asarray(psi, dtype=float) - np.asarray(psi2, dtype=float)
    return p.theta_v * np.exp(-0.5 * r**2 / p.theta_l**2)


def k_matern52(p, psi, psi2):
    """Matérn 5/2 kernel, amplitude squared"""
    a = SQRT5 * np.abs(np.asarray(psi, dtype=float) - np.asarray(psi2, dtype=float)) / p.theta_l
    return p.theta_v**2 * (1.0 + a + a**2 / 3.0) * np.exp(-a)


def k_gibbs_tanh(p, psi, psi2):
    """Gibbs non-stationary kernel with tanh length-scale profile, amplitude squared"""
    l1 = p.length_scale(psi)
    l2 = p.length_scale(psi2)
    s = l1**2 + l2**2
    r = np.asarray(psi, dtype=float) - np.asarray(psi2, dtype=float)
    return p.theta_v**2 * np.sqrt(2.0 * l1 * l2 / s) * np.exp(-r**2 / s)


def changepoint_weights(c, psi):
    """Transfer weights (w_a, w_b) of a change-point kernel; w_a + w_b = 1

    Parameters
    ----------
    c : ChangePointConfig
    psi : numpy.ndarray

    Returns
    -------
    w_a, w_b : numpy.ndarray
    """
    psi = np.asarray(psi, dtype=float)
    c1, c2 = c.locations
    w_b = expit((psi - c1) / c.transfer_width) * (1.0 - expit((psi - c2) / c.transfer_width))
    return 1.0 - w_b, w_b


def k_changepoint(c, psi, psi2):
    """Change-point kernel w_a w_a' K_A + w_b w_b' K_B with Matérn 5/2 sub-kernels"""
    wa1, wb1 = changepoint_weights(c, psi)
    wa2, wb2 = changepoint_weights(c, psi2)
    return wa1 * wa2 * k_matern52(c.kernel_a, psi, psi2) + wb1 * wb2 * k_matern52(c.kernel_b, psi, psi2)


def gram(kernel, xs, xs2=None):
    """Gram matrix M[i, j] = kernel(xs[i], xs2[j])

    Parameters
    ----------
    kernel : callable
        Elementwise, broadcasting ``kernel(a, b)``
    xs : numpy.ndarray
    xs2 : numpy.ndarray
        Defaults to `xs`, in which case the result is symmetrized exactly

    Returns
    -------
    matrix : numpy.ndarray
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    same = xs2 is None
    xs2 = xs if same else np.atleast_1d(np.asarray(xs2, dtype=float))
    if xs.size == 0 or xs2.size == 0:
        raise ValueError("gram requires nonempty coordinate arrays")
    mat = kernel(xs[:, None], xs2[None, :])
    if same:
        mat = 0.5 * (mat + mat.T)
    return mat


def jittered_cholesky(mat):
    """Lower Cholesky factor of `mat`, adding diagonal jitter on failure

    The exact matrix is tried first; after that jitter starts at 1e-8 x mean diagonal and grows by 10x per
    failure up to 1e-4 x mean diagonal.

    Parameters
    ----------
    mat : numpy.ndarray
        Symmetric matrix

    Returns
    -------
    chol : numpy.ndarray
        Lower-triangular factor
    jitter : float
        Jitter added to the diagonal (0 if none)

    Raises
    ------
    CholeskyError
        When the factorization fails at the largest jitter
    """
    diag = np.diag(mat)
    scale = float(np.mean(diag)) if diag.size else 0.0
    diagnostics = {'n': int(diag.size), 'mean_diag': scale,
                   'min_diag': float(np.min(diag)) if diag.size else float('nan'), 'jitter': 0.0}
    if not np.all(np.isfinite(mat)) or not scale > 0:
        msg = f"Matrix is not factorizable (non-finite entries or mean diagonal {scale})"
        logger.error(msg)
        raise CholeskyError(msg, diagnostics)

    jitter = 0.0
    while True:
        try:
            chol = cholesky(mat + jitter * np.eye(diag.size), lower=True, check_finite=False)
            if jitter:
                logger.debug(f"Cholesky succeeded with jitter {jitter:.3g} (n={diag.size})")
            return chol, jitter
        except LinAlgError:
            jitter = JITTER_START * scale if jitter == 0 else jitter * 10
            if jitter > JITTER_MAX * scale * (1 + 1e-9):
                diagnostics['jitter'] = jitter / 10
                msg = f"Cholesky failed after jitter escalation: {diagnostics}"
                logger.error(msg)
                raise CholeskyError(msg, diagnostics) from None


class KernelFamily(ABC):
    """A kernel form with named, transformable hyperparameters

    Values are passed around as dicts keyed by `param_names`. `gradients` returns dK/d(value) per name;
    callers chain rule through the transforms themselves.
    """
    name = None
    param_names = ()
    transforms = {}

    @abstractmethod
    def params(self, values):
        """Build the typed parameter object from a value dict"""

    @abstractmethod
    def values(self, params):
        """Flatten a typed parameter object to a value dict"""

    @abstractmethod
    def function(self, params):
        """Elementwise kernel closure k(a, b)"""

    @abstractmethod
    def gradients(self, params, xs):
        """dK/d(value) of the Gram matrix on `xs`, keyed by parameter name"""

    def matrix(self, params, xs, xs2=None):
        return gram(self.function(params), xs, xs2)

    def diag(self, params, xs):
        xs = np.asarray(xs, dtype=float)
        return self.function(params)(xs, xs)

    @abstractmethod
    def prior_scale(self, params):
        """Zero-distance variance bound, used as the scale of numerical tolerances"""

    def to_dict(self, params):
        """JSON-ready description keyed by kernel name and typed parameter names"""
        return {'kernel': self.name, **asdict(params)}

    def settings(self):
        """Fixed (non-hyperparameter) settings of the family"""
        return {}

    def __repr__(self):
        return f"{type(self).__name__}({', '.join(f'{k}={v!r}' for k, v in self.settings().items())})"


class SquaredExponential(KernelFamily):
    name = 'se'
    param_names = ('theta_v', 'theta_l')
    transforms = {'theta_v': LOG, 'theta_l': LOG}

    def params(self, values):
        return StationaryParams(values['theta_v'], values['theta_l'])

    def values(self, params):
        return {'theta_v': params.theta_v, 'theta_l': params.theta_l}

    def function(self, params):
        return lambda a, b: k_sek(params, a, b)

    def gradients(self, params, xs):
        mat = self.matrix(params, xs)
        r2 = (xs[:, None] - xs[None, :])**2
        return {'theta_v': mat / params.theta_v,
                'theta_l': mat * r2 / params.theta_l**3}

    def prior_scale(self, params):
        return params.theta_v


def _matern52_gradients(params, xs):
    a = SQRT5 * np.abs(xs[:, None] - xs[None, :]) / params.theta_l
    mat = params.theta_v**2 * (1.0 + a + a**2 / 3.0) * np.exp(-a)
    d_l = params.theta_v**2 * a**2 * (1.0 + a) / 3.0 * np.exp(-a) / params.theta_l
    return mat, 2.0 * mat / params.theta_v, d_l


class Matern52(KernelFamily):
    name = 'matern52'
    param_names = ('theta_v', 'theta_l')
    transforms = {'theta_v': LOG, 'theta_l': LOG}

    def params(self, values):
        return StationaryParams(values['theta_v'], values['theta_l'])

    def values(self, params):
        return {'theta_v': params.theta_v, 'theta_l': params.theta_l}

    def function(self, params):
        return lambda a, b: k_matern52(params, a, b)

    def gradients(self, params, xs):
        _, d_v, d_l = _matern52_gradients(params, xs)
        return {'theta_v': d_v, 'theta_l': d_l}

    def prior_scale(self, params):
        return params.theta_v**2


class GibbsTanh(KernelFamily):
    name = 'gibbs_tanh'
    param_names = ('theta_v', 'l_core', 'l_edge', 'psi_0', 'w_l')
    transforms = {'theta_v': LOG, 'l_core': LOG, 'l_edge': LOG, 'psi_0': IDENTITY, 'w_l': LOG}

    def params(self, values):
        return GibbsTanhParams(*(values[name] for name in self.param_names))

    def values(self, params):
        return {name: getattr(params, name) for name in self.param_names}

    def function(self, params):
        return lambda a, b: k_gibbs_tanh(params, a, b)

    def gradients(self, params, xs):
        xs = np.asarray(xs, dtype=float)
        mat = self.matrix(params, xs)
        ls = params.length_scale(xs)
        z = (xs - params.psi_0) / params.w_l
        t = np.tanh(z)
        sech2 = 1.0 - t**2
        # d l(psi) / d param, per point
        dl = {'l_core': 0.5 * (1.0 - t),
              'l_edge': 0.5 * (1.0 + t),
              'psi_0': 0.5 * (params.l_core - params.l_edge) * sech2 / params.w_l,
              'w_l': 0.5 * (params.l_core - params.l_edge) * sech2 * z / params.w_l}

        l1, l2 = ls[:, None], ls[None, :]
        s = l1**2 + l2**2
        r2 = (xs[:, None] - xs[None, :])**2
        # d log K / d l1 and d log K / d l2
        g1 = 0.5 / l1 - l1 / s + 2.0 * r2 * l1 / s**2
        g2 = 0.5 / l2 - l2 / s + 2.0 * r2 * l2 / s**2

        grads = {'theta_v': 2.0 * mat / params.theta_v}
        for name, d in dl.items():
            grads[name] = mat * (g1 * d[:, None] + g2 * d[None, :])
        return grads

    def prior_scale(self, params):
        return params.theta_v**2


class ChangePoint(KernelFamily):
    """Change-point family over Matérn 5/2 sub-kernels with fixed locations and transfer width"""
    name = 'changepoint'
    param_names = ('theta_v_a', 'theta_l_a', 'theta_v_b', 'theta_l_b')
    transforms = {name: LOG for name in param_names}

    def __init__(self, locations=(0.9, 1.0), transfer_width=0.01):
        # validate once through the config type
        ChangePointConfig(StationaryParams(1.0, 1.0), StationaryParams(1.0, 1.0), locations, transfer_width)
        self.locations = tuple(float(c) for c in locations)
        self.transfer_width = float(transfer_width)

    def params(self, values):
        return ChangePointConfig(StationaryParams(values['theta_v_a'], values['theta_l_a']),
                                 StationaryParams(values['theta_v_b'], values['theta_l_b']),
                                 self.locations, self.transfer_width)

    def values(self, params):
        return {'theta_v_a': params.kernel_a.theta_v, 'theta_l_a': params.kernel_a.theta_l,
                'theta_v_b': params.kernel_b.theta_v, 'theta_l_b': params.kernel_b.theta_l}

    def function(self, params):
        return lambda a, b: k_changepoint(params, a, b)

    def gradients(self, params, xs):
        xs = np.asarray(xs, dtype=float)
        w_a, w_b = changepoint_weights(params, xs)
        outer_a = w_a[:, None] * w_a[None, :]
        outer_b = w_b[:, None] * w_b[None, :]
        _, da_v, da_l = _matern52_gradients(params.kernel_a, xs)
        _, db_v, db_l = _matern52_gradients(params.kernel_b, xs)
        return {'theta_v_a': outer_a * da_v, 'theta_l_a': outer_a * da_l,
                'theta_v_b': outer_b * db_v, 'theta_l_b': outer_b * db_l}

    def prior_scale(self, params):
        return max(params.kernel_a.theta_v**2, params.kernel_b.theta_v**2)

    def to_dict(self, params):
        out = asdict(params)
        out['locations'] = list(params.locations)
        return {'kernel': self.name, **out}

    def settings(self):
        return {'locations': self.locations, 'transfer_width': self.transfer_width}


KERNEL_FAMILIES = {cls.name: cls for cls in (SquaredExponential, Matern52, GibbsTanh, ChangePoint)}


def get_kernel(name, **settings):
    """Instantiate a kernel family by name"""
    try:
        return KERNEL_FAMILIES[name](**settings)
    except KeyError:
        raise ValueError(f"Unknown kernel '{name}', choices are: {', '.join(KERNEL_FAMILIES)}") from None
