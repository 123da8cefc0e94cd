"""Hyperparameter inference: empirical Bayes (marginal likelihood optimization) and full Bayes (MCMC)
"""
from dataclasses import dataclass, field, asdict
import csv
import json
import time

import numpy as np
from scipy.linalg import cholesky, cho_factor, cho_solve, LinAlgError
from scipy.optimize import minimize
from scipy.stats import norm

from profgpr._version import __version__
from profgpr.config import from_section
from profgpr.gp import (GPModel, PredictiveGrid, display_grid, log_marginal_likelihood, posterior_predictive,
                        condition_whitened)
from profgpr.kernels import NumericalError, jittered_cholesky
from profgpr.likelihoods import (GaussianLik, joint_log_likelihood, lik_to_dict, with_values)
from profgpr.logger import get_logger
from profgpr.transforms import IDENTITY, LOG, Transform, get_transform

logger = get_logger()

ACCEPT_RANGE = (0.05, 0.8)
PRIOR_BOUND_WIDTHS = 4.0

# Prior centres of length-like hyperparameters, in constrained units
_LENGTH_PRIOR_LOCS = {'theta_l': 0.5, 'theta_l_a': 0.5, 'theta_l_b': 0.1,
                      'l_core': 0.5, 'l_edge': 0.05, 'w_l': 0.02}


class FitError(RuntimeError):
    """A fit could not be produced

    Parameters
    ----------
    msg : str
    diagnostics : dict
    """
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class HyperPrior:
    """Gaussian prior on the transformed coordinate of one hyperparameter"""
    transform: Transform
    loc: float
    width: float = 1.0

    def __post_init__(self):
        if isinstance(self.transform, str):
            object.__setattr__(self, 'transform', get_transform(self.transform))
        if not (np.isfinite(self.loc) and np.isfinite(self.width) and self.width > 0):
            raise ValueError(f"HyperPrior requires finite loc and width > 0, got ({self.loc}, {self.width})")

    def log_pdf(self, theta):
        return norm.logpdf(theta, self.loc, self.width)

    def sample(self, rng):
        return rng.normal(self.loc, self.width)

    def bounds(self, n_widths=PRIOR_BOUND_WIDTHS):
        return self.loc - n_widths * self.width, self.loc + n_widths * self.width

    def to_dict(self):
        return {'transform': repr(self.transform), 'loc': self.loc, 'width': self.width}


def default_priors(kernel, lik, data, use_reported_sigma=False):
    """Weakly informative hyperpriors scaled to `data`

    Parameters
    ----------
    kernel : profgpr.kernels.KernelFamily
    lik : likelihood
    data : profgpr.profiles.Dataset
    use_reported_sigma : bool
        Noise scale is a multiplier of the reported sigma, centred on 1

    Returns
    -------
    priors : dict of HyperPrior
    """
    y_std = float(np.std(data.y))
    if not y_std > 0:
        y_std = float(np.mean(np.abs(data.y))) or 1.0
    noise_loc = 0.0 if use_reported_sigma else float(np.log(np.median(data.sigma_reported)))

    priors = {}
    for name in kernel.param_names:
        if name.startswith('theta_v'):
            # squared-exponential amplitude is a variance, the others a standard deviation
            amp = y_std**2 if kernel.name == 'se' else y_std
            priors[name] = HyperPrior(LOG, float(np.log(amp)))
        elif name == 'psi_0':
            priors[name] = HyperPrior(IDENTITY, 0.95, 0.03)
        else:
            priors[name] = HyperPrior(kernel.transforms[name], float(np.log(_LENGTH_PRIOR_LOCS[name])))
    for name in lik.param_names:
        if name == 'nu':
            priors[name] = HyperPrior(lik.transforms[name], 0.0)
        else:
            priors[name] = HyperPrior(lik.transforms[name], noise_loc)
    return priors


class ParamSpace:
    """Free hyperparameters in transformed coordinates, with their priors and the fixed remainder

    Parameters
    ----------
    names : sequence of str
        All hyperparameter names of the model, in order
    priors : dict of HyperPrior
    fixed : dict
        Name -> constrained value, held constant
    """
    def __init__(self, names, priors, fixed=None):
        self.fixed = dict(fixed or {})
        unknown = sorted(set(self.fixed) - set(names))
        if unknown:
            raise ValueError(f"Unknown fixed hyperparameter(s) {unknown}, model has {list(names)}")
        missing = sorted(set(names) - set(self.fixed) - set(priors))
        if missing:
            raise ValueError(f"No prior for hyperparameter(s) {missing}")
        self.names = tuple(names)
        self.free = tuple(name for name in names if name not in self.fixed)
        self.priors = {name: priors[name] for name in self.free}

    @property
    def dim(self):
        return len(self.free)

    def values(self, theta):
        out = dict(self.fixed)
        for name, t in zip(self.free, theta):
            out[name] = float(self.priors[name].transform.inverse(t))
        return {name: out[name] for name in self.names}

    def theta(self, values):
        return np.array([float(self.priors[name].transform.forward(values[name])) for name in self.free])

    def log_prior(self, theta):
        return float(sum(self.priors[name].log_pdf(t) for name, t in zip(self.free, theta)))

    def locs(self):
        return np.array([self.priors[name].loc for name in self.free])

    def sample(self, rng):
        return np.array([self.priors[name].sample(rng) for name in self.free])

    def bounds(self):
        return [self.priors[name].bounds() for name in self.free]


@dataclass(frozen=True)
class ChainConfig:
    """Settings of one adaptive Metropolis chain

    Attributes
    ----------
    n_burn : int
        Burn-in (adaptation) steps
    n_samples : int
        Post-burn-in steps; ``n_samples // thin`` states are retained
    thin : int
    seed : int
    target_accept : float
    adapt_interval : int
        Steps between proposal-scale updates during burn-in
    """
    n_burn: int = 2000
    n_samples: int = 5000
    thin: int = 5
    seed: int = 0
    target_accept: float = 0.25
    adapt_interval: int = 100

    def __post_init__(self):
        for name in ('n_burn', 'n_samples', 'thin', 'adapt_interval'):
            val = getattr(self, name)
            if int(val) != val or val <= 0:
                raise ValueError(f"ChainConfig.{name} must be a positive integer, got {val}")
        if not 0 < self.target_accept < 1:
            raise ValueError(f"ChainConfig.target_accept must lie in (0, 1), got {self.target_accept}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"ChainConfig.seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.n_samples < self.thin:
            raise ValueError(f"ChainConfig retains no samples: n_samples={self.n_samples} < thin={self.thin}")

    @property
    def n_retained(self):
        return self.n_samples // self.thin

    @classmethod
    def from_config(cls, conf=None, conf_path=None, **overrides):
        """Initialize ChainConfig from the [chain] section of a Config or Config file"""
        return from_section(cls, 'chain', conf=conf, conf_path=conf_path, **overrides)

    def to_dict(self):
        return asdict(self)


class AdaptiveMetropolis:
    """Random-walk Metropolis with a Gaussian proposal adapted during burn-in

    The proposal is a mixture: with probability ``1 - fixed_prob`` a step from N(0, lambda * 2.38^2/d * C),
    otherwise an isotropic step N(0, fixed_variance/d * I). During burn-in log(lambda) follows a
    Robbins-Monro update toward `target_accept` every `adapt_interval` steps, and from half-way through
    burn-in C is replaced by the running covariance of the chain once it holds 10*d states. The proposal is
    frozen after burn-in.

    Parameters
    ----------
    log_target : callable
        Unnormalized log density; may return -inf
    x0 : numpy.ndarray
        Initial state, with finite log density
    cov0 : numpy.ndarray
        Initial proposal shape C
    rng : numpy.random.Generator
    target_accept : float
    adapt_interval : int
    fixed_prob : float
    fixed_variance : float
    """
    def __init__(self, log_target, x0, cov0, rng, target_accept=0.25, adapt_interval=100,
                 fixed_prob=0.05, fixed_variance=0.01):
        self.log_target = log_target
        self.x = np.array(x0, dtype=float)
        self.dim = self.x.size
        if self.dim == 0:
            raise ValueError("AdaptiveMetropolis requires at least one dimension")
        self.lp = log_target(self.x)
        if not np.isfinite(self.lp):
            raise ValueError(f"Initial state has log density {self.lp}")
        self.rng = rng
        self.target_accept = target_accept
        self.adapt_interval = adapt_interval
        self.fixed_prob = fixed_prob
        self.fixed_sd = np.sqrt(fixed_variance / self.dim)
        self.scale = 2.38**2 / self.dim
        self.log_lambda = 0.0
        if not self._set_cov(np.asarray(cov0, dtype=float)):
            raise ValueError("Initial proposal covariance is not positive definite")
        self._count = 0
        self._mean = np.zeros(self.dim)
        self._m2 = np.zeros((self.dim, self.dim))

    def _set_cov(self, cov):
        try:
            chol = cholesky(self.scale * cov, lower=True)
        except LinAlgError:
            return False
        self.cov = cov
        self._chol = chol
        return True

    def step(self):
        """Advance one Metropolis step, returning True if the proposal was accepted"""
        use_fixed = self.rng.uniform() < self.fixed_prob
        z = self.rng.standard_normal(self.dim)
        dx = self.fixed_sd * z if use_fixed else np.exp(0.5 * self.log_lambda) * (self._chol @ z)
        proposal = self.x + dx
        lp_prop = self.log_target(proposal)
        if np.log(self.rng.uniform()) < lp_prop - self.lp:
            self.x, self.lp = proposal, lp_prop
            return True
        return False

    def _track(self):
        # Welford update of running mean / covariance
        self._count += 1
        delta = self.x - self._mean
        self._mean += delta / self._count
        self._m2 += np.outer(delta, self.x - self._mean)

    def _adapt(self, rate, k):
        self.log_lambda += (rate - self.target_accept) / np.sqrt(k)
        if self._count >= 10 * self.dim:
            self._set_cov(self._m2 / (self._count - 1) + 1e-10 * np.eye(self.dim))

    def run(self, n_burn, n_samples, thin):
        """Burn in with adaptation, then sample with a frozen proposal

        Returns
        -------
        samples : numpy.ndarray
            ``(n_samples // thin, dim)`` retained states
        stats : dict
            Acceptance rates of burn-in and sampling phases and the final proposal scale
        """
        window = 0
        burn_accepted = 0
        for i in range(n_burn):
            accepted = self.step()
            window += accepted
            burn_accepted += accepted
            if i >= n_burn // 2:
                self._track()
            if (i + 1) % self.adapt_interval == 0:
                self._adapt(window / self.adapt_interval, (i + 1) // self.adapt_interval)
                window = 0

        retained = []
        accepted = 0
        for i in range(n_samples):
            accepted += self.step()
            if (i + 1) % thin == 0:
                retained.append(self.x.copy())
        stats = {'accept_rate_burn': burn_accepted / n_burn if n_burn else float('nan'),
                 'accept_rate': accepted / n_samples,
                 'proposal_scale': float(np.exp(self.log_lambda) * self.scale)}
        return np.reshape(retained, (-1, self.dim)), stats


def batch_means_se(samples, n_batches=20):
    """Monte-Carlo standard error of the mean of correlated samples by non-overlapping batch means

    Parameters
    ----------
    samples : numpy.ndarray
        Chain along axis 0
    n_batches : int

    Returns
    -------
    se : numpy.ndarray or float
        nan when there are fewer than 2 samples
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    n_batches = min(n_batches, n)
    if n_batches < 2:
        return np.full(samples.shape[1:], np.nan) if samples.ndim > 1 else float('nan')
    size = n // n_batches
    means = samples[:n_batches * size].reshape((n_batches, size) + samples.shape[1:]).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of one fit

    Attributes
    ----------
    method : str
    predictive : PredictiveGrid
        Fit on the evaluation grid
    at_data : PredictiveGrid
        Fit at the data coordinates
    kernel : dict
        Kernel description at `hyperparameters`
    likelihood : dict
        Likelihood description at `hyperparameters`
    hyperparameters : dict
        Optimum (empirical Bayes) or posterior means (full Bayes), constrained units
    samples : dict of numpy.ndarray or None
        Retained samples per free hyperparameter (full Bayes only)
    diagnostics : dict
    runtime_s : float
    rmse : float or None
    mean_mcse : numpy.ndarray or None
        Batch-means standard error of the predictive mean on the grid (full Bayes only)
    """
    method: str
    predictive: PredictiveGrid
    at_data: PredictiveGrid
    kernel: dict
    likelihood: dict
    hyperparameters: dict
    samples: dict = None
    diagnostics: dict = field(default_factory=dict)
    runtime_s: float = 0.0
    rmse: float = None
    mean_mcse: np.ndarray = None

    def __post_init__(self):
        if self.rmse is not None and not self.rmse >= 0:
            raise ValueError(f"FitResult.rmse must be >= 0, got {self.rmse}")
        if self.samples:
            lengths = {len(arr) for arr in self.samples.values()}
            if len(lengths) > 1:
                raise ValueError(f"FitResult sample arrays differ in length: {sorted(lengths)}")

    @property
    def is_full_bayes(self):
        return self.samples is not None

    def to_dict(self):
        """JSON-ready metadata and hyperparameter summaries"""
        out = {'method': self.method, 'version': __version__, 'kernel': self.kernel, 'likelihood': self.likelihood,
               'hyperparameters': self.hyperparameters, 'grid_size': len(self.predictive),
               'diagnostics': self.diagnostics, 'runtime_s': self.runtime_s, 'rmse': self.rmse}
        if self.is_full_bayes:
            mc_se = self.diagnostics.get('mc_se', {})
            out['posterior'] = {
                name: {'mean': float(np.mean(arr)), 'std': float(np.std(arr)), 'median': float(np.median(arr)),
                       'q05': float(np.quantile(arr, 0.05)), 'q95': float(np.quantile(arr, 0.95)),
                       'mc_se': mc_se.get(name)}
                for name, arr in self.samples.items()}
        return out

    def write(self, prefix, provenance=None, bins=20):
        """Write ``<prefix>.json``, ``<prefix>_grid.csv`` and, for full Bayes, ``<prefix>_hist.csv``

        Returns
        -------
        paths : list of str
        """
        out = self.to_dict()
        if provenance is not None:
            out['provenance'] = provenance
        paths = [f'{prefix}.json', f'{prefix}_grid.csv']
        with open(paths[0], 'w') as f:
            json.dump(out, f, indent=2)
            f.write('\n')
        self.predictive.to_csv(paths[1])
        if self.is_full_bayes:
            paths.append(f'{prefix}_hist.csv')
            histograms_to_csv(extract_histograms(self, bins), paths[2])
        return paths


def extract_histograms(result, bins=20):
    """Histogram of every sampled hyperparameter

    Parameters
    ----------
    result : FitResult
        Full-Bayes result
    bins : int

    Returns
    -------
    hists : dict
        name -> (bin_edges, counts)

    Raises
    ------
    NotImplementedError
        For an empirical-Bayes result, which holds no samples
    """
    if not result.is_full_bayes:
        raise NotImplementedError(f"'{result.method}' holds a point estimate; histograms need a full-Bayes result")
    hists = {}
    for name, arr in result.samples.items():
        counts, edges = np.histogram(arr, bins=bins)
        hists[name] = (edges, counts)
    return hists


def histograms_to_csv(hists, path):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(('param', 'bin_lo', 'bin_hi', 'count'))
        for name, (edges, counts) in hists.items():
            for lo, hi, count in zip(edges[:-1], edges[1:], counts):
                writer.writerow((name, repr(float(lo)), repr(float(hi)), int(count)))


def _grid(grid):
    return display_grid() if grid is None else np.asarray(grid, dtype=float)


def fit_empirical_bayes(kernel, data, restarts=8, grid=None, priors=None, fixed=None, use_reported_sigma=False,
                        seed=0, method='eb'):
    """Maximize the log marginal likelihood over kernel hyperparameters and Gaussian noise

    Restart 0 starts at the prior locations, the others at prior draws. Each runs L-BFGS-B in the
    transformed space within prior location +- 4 prior widths.

    Parameters
    ----------
    kernel : profgpr.kernels.KernelFamily
    data : profgpr.profiles.Dataset
    restarts : int
    grid : numpy.ndarray
        Evaluation grid, the 220-point display grid by default
    priors : dict of HyperPrior
        Overrides of `default_priors`, which set starting points and bounds
    fixed : dict
        Hyperparameters held at the given values
    use_reported_sigma : bool
    seed : int
        Seed of the starting-point draws
    method : str
        Tag stored in the result

    Returns
    -------
    result : FitResult

    Raises
    ------
    FitError
        If every restart fails
    """
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    start_time = time.perf_counter()
    grid = _grid(grid)
    lik = GaussianLik()
    space = ParamSpace(kernel.param_names + lik.param_names,
                       {**default_priors(kernel, lik, data, use_reported_sigma), **(priors or {})}, fixed)

    def model_at(theta):
        return GPModel.from_values(kernel, space.values(theta), use_reported_sigma=use_reported_sigma)

    def objective(theta):
        try:
            lml, grad = log_marginal_likelihood(model_at(theta), data, grad=True)
        except (NumericalError, ValueError):
            return np.inf, np.zeros(space.dim)
        return -lml, -np.array([grad[name] for name in space.free])

    rng = np.random.Generator(np.random.Philox(seed))
    bounds = space.bounds()
    lower, upper = np.reshape(bounds, (-1, 2)).T
    runs = []
    n_failed = 0
    for i in range(restarts):
        x0 = space.locs() if i == 0 else np.clip(space.sample(rng), lower, upper)
        if not np.isfinite(objective(x0)[0]):
            n_failed += 1
            logger.warning(f"Restart {i} of {method}: start point is not factorizable")
            continue
        if space.dim == 0:
            runs.append((objective(x0)[0], x0, True, 'no free hyperparameters'))
            continue
        res = minimize(objective, x0, jac=True, method='L-BFGS-B', bounds=bounds,
                       options={'gtol': 1e-6, 'maxiter': 500})
        if not np.isfinite(res.fun):
            n_failed += 1
            logger.warning(f"Restart {i} of {method}: optimizer ended at a non-factorizable point")
            continue
        runs.append((float(res.fun), res.x, bool(res.success), str(res.message)))

    diagnostics = {'restarts': restarts, 'n_failed': n_failed}
    if not runs:
        msg = f"All {restarts} restarts of {method} failed"
        logger.error(msg)
        raise FitError(msg, diagnostics)

    best = min(runs, key=lambda run: run[0])
    model = model_at(best[1])
    try:
        pred = posterior_predictive(model, data, np.concatenate([grid, data.psi]))
    except NumericalError as err:
        raise FitError(f"{method}: prediction at the optimum failed: {err}", diagnostics) from err

    m = grid.size
    values = space.values(best[1])
    diagnostics.update(lml=-best[0], converged=best[2], message=best[3], lml_restarts=[-run[0] for run in runs])
    logger.debug(f"{method}: lml={-best[0]:.6g} after {restarts} restart(s), {n_failed} failed")
    return FitResult(method=method,
                     predictive=PredictiveGrid(grid, pred.mean[:m], pred.std[:m]),
                     at_data=PredictiveGrid(data.psi, pred.mean[m:], pred.std[m:]),
                     kernel=kernel.to_dict(model.params), likelihood=lik_to_dict(model.noise),
                     hyperparameters=values, diagnostics=diagnostics,
                     runtime_s=time.perf_counter() - start_time)


class _MarginalTarget:
    """Hyperparameter posterior with the latent function integrated out (Gaussian noise only)"""

    def __init__(self, kernel, data, space, use_reported_sigma):
        self.kernel = kernel
        self.data = data
        self.space = space
        self.use_reported_sigma = use_reported_sigma

    def model(self, theta):
        return GPModel.from_values(self.kernel, self.space.values(theta), use_reported_sigma=self.use_reported_sigma)

    def log_density(self, theta):
        try:
            return self.space.log_prior(theta) + log_marginal_likelihood(self.model(theta), self.data)
        except (NumericalError, ValueError):
            return -np.inf

    def initial_state(self):
        return self.space.locs()

    def initial_cov(self):
        return 0.01 * np.eye(self.space.dim)

    def predict(self, theta, grid):
        """Per-sample predictive mean and variance on grid and data coordinates"""
        m = grid.size
        pred = posterior_predictive(self.model(theta), self.data, np.concatenate([grid, self.data.psi]))
        var = pred.std**2
        return pred.mean[:m], var[:m], pred.mean[m:], var[m:]


class _LatentTarget:
    """Joint posterior of hyperparameters and the whitened latent vector v, f = L(theta) v"""

    def __init__(self, kernel, lik, data, space):
        self.kernel = kernel
        self.lik = lik
        self.data = data
        self.space = space
        self._key = None
        self._chol = None
        self._params = None

    def _split(self, x):
        return x[:self.space.dim], x[self.space.dim:]

    def factor(self, theta):
        """Kernel parameters and Cholesky factor at `theta`, cached for the last theta seen"""
        key = theta.tobytes()
        if key != self._key:
            params = self.kernel.params(self.space.values(theta))
            chol, _ = jittered_cholesky(self.kernel.matrix(params, self.data.psi))
            self._key, self._params, self._chol = key, params, chol
        return self._params, self._chol

    def log_density(self, x):
        theta, v = self._split(x)
        try:
            _, chol = self.factor(theta)
            lik = with_values(self.lik, self.space.values(theta))
        except (NumericalError, ValueError):
            return -np.inf
        return self.space.log_prior(theta) - 0.5 * v @ v + joint_log_likelihood(lik, self.data.y - chol @ v)

    def initial_state(self):
        theta = self.space.locs()
        _, chol = self.factor(theta)
        s2 = with_values(self.lik, self.space.values(theta)).scale**2
        # v at the Gaussian-noise posterior mean of f: L^T (K + s2 I)^-1 y
        cov = chol @ chol.T + s2 * np.eye(len(self.data))
        v0 = chol.T @ cho_solve(cho_factor(cov, lower=True), self.data.y)
        return np.concatenate([theta, v0])

    def initial_cov(self):
        theta = self.space.locs()
        _, chol = self.factor(theta)
        s2 = with_values(self.lik, self.space.values(theta)).scale**2
        n = len(self.data)
        # posterior covariance of v under Gaussian noise: (I + L^T L / s2)^-1
        prec = np.eye(n) + chol.T @ chol / s2
        cov_v = cho_solve(cho_factor(prec, lower=True), np.eye(n))
        out = np.zeros((self.space.dim + n, self.space.dim + n))
        out[:self.space.dim, :self.space.dim] = 0.01 * np.eye(self.space.dim)
        out[self.space.dim:, self.space.dim:] = 0.5 * (cov_v + cov_v.T)
        return out

    def predict(self, x, grid):
        theta, v = self._split(x)
        params, chol = self.factor(theta)
        curve = condition_whitened(chol, v, self.kernel.matrix(params, self.data.psi, grid))
        return curve, np.zeros(grid.size), chol @ v, np.zeros(len(self.data))


def fit_full_bayes(kernel, lik, data, chain=None, grid=None, priors=None, fixed=None, marginalize=False,
                   use_reported_sigma=False, method='fb'):
    """Sample kernel and likelihood hyperparameters (and latents) by adaptive Metropolis

    The final fit is the mean of the sampled fits. With latents sampled, its std is the pointwise std of
    the sampled curves; with latents marginalized (Gaussian noise only) the per-sample predictive
    variances are combined by the law of total variance.

    Parameters
    ----------
    kernel : profgpr.kernels.KernelFamily
    lik : likelihood
        Initial values of fixed likelihood parameters are ignored; `fixed` pins values
    data : profgpr.profiles.Dataset
    chain : ChainConfig
    grid : numpy.ndarray
    priors : dict of HyperPrior
        Overrides of `default_priors`
    fixed : dict
        Hyperparameters held at the given values and not sampled
    marginalize : bool
        Integrate the latent function out analytically (Gaussian likelihood only)
    use_reported_sigma : bool
        Noise variance (sigma_n sigma_reported_i)^2; requires `marginalize`
    method : str

    Returns
    -------
    result : FitResult

    Raises
    ------
    FitError
        If the chain cannot be initialised
    """
    chain = ChainConfig() if chain is None else chain
    if marginalize and not isinstance(lik, GaussianLik):
        raise ValueError(f"marginalize=True requires a Gaussian likelihood, got '{lik.name}'")
    if use_reported_sigma and not marginalize:
        raise ValueError("use_reported_sigma requires marginalize=True with a Gaussian likelihood")
    start_time = time.perf_counter()
    grid = _grid(grid)
    space = ParamSpace(kernel.param_names + lik.param_names,
                       {**default_priors(kernel, lik, data, use_reported_sigma), **(priors or {})}, fixed)
    target = (_MarginalTarget(kernel, data, space, use_reported_sigma) if marginalize
              else _LatentTarget(kernel, lik, data, space))
    rng = np.random.Generator(np.random.Philox(chain.seed))

    try:
        x0 = target.initial_state()
        if space.dim == 0 and marginalize:
            states, stats = np.tile(x0, (chain.n_retained, 1)), {'accept_rate_burn': 1.0, 'accept_rate': 1.0}
        else:
            sampler = AdaptiveMetropolis(target.log_density, x0, target.initial_cov(), rng,
                                         target_accept=chain.target_accept, adapt_interval=chain.adapt_interval)
            states, stats = sampler.run(chain.n_burn, chain.n_samples, chain.thin)
    except (NumericalError, ValueError, LinAlgError) as err:
        msg = f"{method}: chain could not be initialised: {err}"
        logger.error(msg)
        raise FitError(msg, {'chain': chain.to_dict()}) from err

    means_grid, vars_grid, means_data, vars_data = (np.array(arr) for arr in zip(
        *(target.predict(x, grid) for x in states)))
    theta_samples = states[:, :space.dim]
    sampled_values = [space.values(t) for t in theta_samples]
    samples = {name: np.array([vals[name] for vals in sampled_values]) for name in space.free}
    point = {**space.fixed, **{name: float(np.mean(arr)) for name, arr in samples.items()}}
    point = {name: point[name] for name in space.names}

    diagnostics = {**stats, 'n_retained': int(states.shape[0]), 'marginalized': bool(marginalize),
                   'fixed': dict(space.fixed), 'chain': chain.to_dict(), 'warnings': [],
                   'mc_se': {name: float(batch_means_se(arr)) for name, arr in samples.items()}}
    lo, hi = ACCEPT_RANGE
    if not lo <= stats['accept_rate'] <= hi:
        warning = f"acceptance rate {stats['accept_rate']:.3f} outside [{lo}, {hi}]"
        diagnostics['warnings'].append(warning)
        logger.warning(f"{method}: {warning}")

    logger.debug(f"{method}: {states.shape[0]} samples, acceptance {stats['accept_rate']:.3f}")
    return FitResult(method=method,
                     predictive=_combine(grid, means_grid, vars_grid),
                     at_data=_combine(data.psi, means_data, vars_data),
                     kernel=kernel.to_dict(kernel.params(point)),
                     likelihood=lik_to_dict(with_values(lik, point)),
                     hyperparameters=point, samples=samples, diagnostics=diagnostics,
                     runtime_s=time.perf_counter() - start_time,
                     mean_mcse=batch_means_se(means_grid))


def _combine(psi, means, variances):
    # law of total variance over retained samples
    var = np.mean(variances, axis=0) + np.var(means, axis=0)
    return PredictiveGrid(psi, np.mean(means, axis=0), np.sqrt(var))
