"""Analytic ground-truth profiles and synthetic noisy datasets
"""
from dataclasses import dataclass, field, asdict, fields
from enum import Enum
import csv
import hashlib
import itertools as it
import json

import numpy as np

from profgpr.config import from_section
from profgpr.logger import get_logger

logger = get_logger()

DOMAIN = (0.0, 1.1)
PEDESTAL_REGION = (0.9, 1.0)
GRID_MERGE_TOL = 1e-9

DATASET_HEADER = ('psi', 'y', 'sigma', 'truth', 'is_outlier')

# Benchmark parameter space
SIGMA_FRACS = (0.1, 0.15, 0.2, 0.25, 0.33)
SHIFT_FRACS = (0.0, 0.02, 0.05, 0.10)
N_OUTLIERS = (0, 3, 5, 10)
OUTLIER_SCALES = (2.0, 3.0, 4.0)
N_EDGES = (0.01, 0.05, 0.1, 0.2)
W_PEDS = (0.01, 0.015, 0.02)
W_ITBS = (0.01, 0.015, 0.02)
N_ITBS = (0.5, 1.0, 1.5)


class Regime(Enum):
    """Tokamak confinement regime of a ground-truth profile"""
    LMODE = 'lmode'
    HMODE = 'hmode'
    HMODE_ITB = 'hmode_itb'

    @classmethod
    def parse(cls, value):
        """Accept an enum member or its (case-insensitive) name/value"""
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace('-', '_').replace('+', '_')
        for member in cls:
            if key in (member.value, member.name.lower()):
                return member
        raise ValueError(f"Unknown regime '{value}', choices are: {', '.join(m.value for m in cls)}")


def _check_finite(obj):
    for f in fields(obj):
        val = getattr(obj, f.name)
        if isinstance(val, float) and not np.isfinite(val):
            raise ValueError(f"{type(obj).__name__}.{f.name} must be finite, got {val}")


@dataclass(frozen=True)
class ProfileSpec:
    """Parameters of an analytic L-mode, H-mode or H-mode+ITB profile

    Pedestal fields are ignored for L-mode and ITB fields unless the regime is H-mode+ITB.
    """
    regime: Regime = Regime.HMODE
    f_o: float = 1.0
    f_edge: float = 0.05
    alpha1: float = 2.0
    alpha2: float = 1.5
    f_ped: float = 0.3
    w_ped: float = 0.015
    psi_ped: float = 0.95
    n_itb: float = 1.0
    w_itb: float = 0.015
    psi_itb: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, 'regime', Regime.parse(self.regime))
        _check_finite(self)
        if self.f_o <= 0:
            raise ValueError(f"ProfileSpec.f_o must be > 0, got {self.f_o}")
        if self.alpha1 <= 0 or self.alpha2 <= 0:
            raise ValueError(f"ProfileSpec.alpha1/alpha2 must be > 0, got {self.alpha1}, {self.alpha2}")
        if self.w_ped <= 0 or self.w_itb <= 0:
            raise ValueError(f"ProfileSpec.w_ped/w_itb must be > 0, got {self.w_ped}, {self.w_itb}")
        if self.regime is not Regime.LMODE and not 0.9 < self.psi_ped < 1.0:
            raise ValueError(f"ProfileSpec.psi_ped must lie in (0.9, 1.0), got {self.psi_ped}")
        if self.regime is Regime.HMODE_ITB and not 0.3 < self.psi_itb < 0.7:
            raise ValueError(f"ProfileSpec.psi_itb must lie in (0.3, 0.7), got {self.psi_itb}")

    @classmethod
    def from_config(cls, conf=None, conf_path=None, **overrides):
        """Initialize ProfileSpec from the [profile] section of a Config or Config file"""
        return from_section(cls, 'profile', conf=conf, conf_path=conf_path, **overrides)

    def to_dict(self):
        out = asdict(self)
        out['regime'] = self.regime.value
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def __call__(self, psi):
        return eval_profile(self, psi)


@dataclass(frozen=True)
class NoiseSpec:
    """Synthetic noise model: relative Gaussian noise, systematic shift and outliers"""
    sigma_frac: float = 0.1
    shift_frac: float = 0.0
    n_outliers: int = 0
    outlier_scale: float = 2.0
    seed: int = 0

    def __post_init__(self):
        _check_finite(self)
        if not 0 < self.sigma_frac < 1:
            raise ValueError(f"NoiseSpec.sigma_frac must lie in (0, 1), got {self.sigma_frac}")
        if self.shift_frac < 0:
            raise ValueError(f"NoiseSpec.shift_frac must be >= 0, got {self.shift_frac}")
        if int(self.n_outliers) != self.n_outliers or self.n_outliers < 0:
            raise ValueError(f"NoiseSpec.n_outliers must be a non-negative integer, got {self.n_outliers}")
        if self.outlier_scale < 1:
            raise ValueError(f"NoiseSpec.outlier_scale must be >= 1, got {self.outlier_scale}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"NoiseSpec.seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, 'n_outliers', int(self.n_outliers))
        object.__setattr__(self, 'seed', int(self.seed))

    @classmethod
    def from_config(cls, conf=None, conf_path=None, **overrides):
        """Initialize NoiseSpec from the [noise] section of a Config or Config file"""
        return from_section(cls, 'noise', conf=conf, conf_path=conf_path, **overrides)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations of a profile, with the hidden truth when it is known

    Attributes
    ----------
    psi : numpy.ndarray
        Strictly increasing observation coordinates
    y : numpy.ndarray
        Observed values
    sigma_reported : numpy.ndarray
        Reported 1-sigma uncertainty per point
    truth : numpy.ndarray or None
        Ground-truth values; None for external data without a truth column
    outlier_mask : numpy.ndarray of bool
        True where an outlier was injected
    provenance : tuple of (ProfileSpec, NoiseSpec) or str
        Generating specs, or "external"
    """
    psi: np.ndarray
    y: np.ndarray
    sigma_reported: np.ndarray
    truth: np.ndarray = None
    outlier_mask: np.ndarray = None
    provenance: object = 'external'

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        n = psi.size
        arrays = {'y': self.y, 'sigma_reported': self.sigma_reported}
        if self.truth is not None:
            arrays['truth'] = self.truth
        mask = np.zeros(n, dtype=bool) if self.outlier_mask is None else np.asarray(self.outlier_mask, dtype=bool)
        for name, arr in arrays.items():
            if np.shape(arr) != (n,):
                raise ValueError(f"Dataset.{name} has shape {np.shape(arr)}, expected ({n},)")
        if mask.shape != (n,):
            raise ValueError(f"Dataset.outlier_mask has shape {mask.shape}, expected ({n},)")
        if n == 0:
            raise ValueError("Dataset is empty")
        if np.any(np.diff(psi) <= 0):
            raise ValueError("Dataset.psi must be strictly increasing")
        y = np.asarray(self.y, dtype=float)
        sigma = np.asarray(self.sigma_reported, dtype=float)
        if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(y)) and np.all(np.isfinite(sigma))):
            raise ValueError("Dataset contains non-finite values")
        if np.any(sigma <= 0):
            raise ValueError("Dataset.sigma_reported must be > 0 everywhere")
        if np.any(y <= 0):
            if self.provenance == 'external':
                logger.warning(f"External dataset has {np.sum(y <= 0)} non-positive values")
            else:
                raise ValueError("Generated Dataset.y must be > 0 everywhere")
        object.__setattr__(self, 'psi', psi)
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 'sigma_reported', sigma)
        object.__setattr__(self, 'outlier_mask', mask)
        if self.truth is not None:
            object.__setattr__(self, 'truth', np.asarray(self.truth, dtype=float))

    def __len__(self):
        return self.psi.size

    @property
    def has_truth(self):
        return self.truth is not None

    def to_csv(self, path):
        """Write the dataset as CSV ``psi,y,sigma,truth,is_outlier`` at full round-trip precision

        Parameters
        ----------
        path : str or path-like
        """
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(DATASET_HEADER if self.has_truth else DATASET_HEADER[:3] + DATASET_HEADER[4:])
            for i in range(len(self)):
                row = [repr(float(self.psi[i])), repr(float(self.y[i])), repr(float(self.sigma_reported[i]))]
                if self.has_truth:
                    row.append(repr(float(self.truth[i])))
                row.append(int(self.outlier_mask[i]))
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path):
        """Read a dataset CSV; ``truth`` and ``is_outlier`` columns are optional

        Rows are sorted by psi. Raises ValueError on a malformed file.

        Parameters
        ----------
        path : str or path-like

        Returns
        -------
        dataset : Dataset
        """
        with open(path, newline='') as f:
            reader = csv.DictReader(f)
            header = reader.fieldnames or []
            missing = [col for col in DATASET_HEADER[:3] if col not in header]
            if missing:
                raise ValueError(f"{path}: missing required column(s) {missing}")
            unknown = [col for col in header if col not in DATASET_HEADER]
            if unknown:
                raise ValueError(f"{path}: unexpected column(s) {unknown}")
            cols = {col: [] for col in header}
            for lineno, row in enumerate(reader, start=2):
                try:
                    for col in header:
                        cols[col].append(float(row[col]))
                except (TypeError, ValueError):
                    raise ValueError(f"{path}:{lineno}: malformed row {row}") from None
        if not cols['psi']:
            raise ValueError(f"{path}: no data rows")
        order = np.argsort(cols['psi'], kind='stable')
        take = {col: np.asarray(vals)[order] for col, vals in cols.items()}
        return cls(psi=take['psi'], y=take['y'], sigma_reported=take['sigma'],
                   truth=take.get('truth'),
                   outlier_mask=take['is_outlier'].astype(bool) if 'is_outlier' in take else None,
                   provenance='external')

    def provenance_dict(self):
        """JSON-ready provenance"""
        if self.provenance == 'external':
            return {'source': 'external'}
        spec, noise = self.provenance
        return {'source': 'synthetic', 'profile': spec.to_dict(), 'noise': noise.to_dict(), 'n_points': len(self)}


def _base_term(spec, psi):
    # (1 - psi^a1)^a2 is not real for psi > 1 with non-integer a2; clamp to 0 past the separatrix
    inner = 1.0 - np.power(np.minimum(psi, 1.0), spec.alpha1)
    return spec.f_o * np.power(np.maximum(inner, 0.0), spec.alpha2)


def _tanh_step(height, center, width, psi):
    return 0.5 * height * (1.0 - np.tanh((psi - center) / width))


def eval_profile(spec, psi):
    """Evaluate an analytic profile

    Parameters
    ----------
    spec : ProfileSpec
    psi : float or numpy.ndarray
        Normalized flux coordinate(s), >= 0

    Returns
    -------
    value : float or numpy.ndarray
    """
    psi_arr = np.asarray(psi, dtype=float)
    if np.any(psi_arr < 0) or not np.all(np.isfinite(psi_arr)):
        raise ValueError("eval_profile requires finite psi >= 0")
    value = _base_term(spec, psi_arr) + spec.f_edge
    if spec.regime in (Regime.HMODE, Regime.HMODE_ITB):
        value = value + _tanh_step(spec.f_ped, spec.psi_ped, spec.w_ped, psi_arr)
    if spec.regime is Regime.HMODE_ITB:
        value = value + _tanh_step(spec.n_itb, spec.psi_itb, spec.w_itb, psi_arr)
    return value if np.ndim(psi) else float(value)


def make_grid(n_core=48, n_ped=40):
    """Observation coordinates: uniform over the domain plus a dense pedestal set

    Parameters
    ----------
    n_core : int
        Points uniform on [0, 1.1], at least 2
    n_ped : int
        Points uniform on [0.9, 1.0]

    Returns
    -------
    psi : numpy.ndarray
        Strictly increasing coordinates. Pedestal points that coincide with a core point
        (within ``GRID_MERGE_TOL``) are dropped, so the length is n_core + n_ped minus the
        number of coincidences; the default grid has none and is 88 long.
    """
    if n_core < 2 or n_ped < 0:
        raise ValueError(f"make_grid requires n_core >= 2 and n_ped >= 0, got ({n_core}, {n_ped})")
    core = np.linspace(*DOMAIN, int(n_core))
    ped = np.linspace(*PEDESTAL_REGION, int(n_ped))
    if ped.size:
        gap = np.min(np.abs(ped[:, None] - core[None, :]), axis=1)
        dropped = int(np.sum(gap <= GRID_MERGE_TOL))
        if dropped:
            logger.debug(f"make_grid({n_core}, {n_ped}): dropping {dropped} pedestal points on the core lattice")
        ped = ped[gap > GRID_MERGE_TOL]
    return np.sort(np.concatenate([core, ped]), kind='stable')


def generate_dataset(spec, noise, grid):
    """Sample a noisy synthetic dataset from an analytic profile

    Parameters
    ----------
    spec : ProfileSpec
    noise : NoiseSpec
    grid : numpy.ndarray
        Observation coordinates

    Returns
    -------
    dataset : Dataset

    Notes
    -----
    Draw order from ``Generator(Philox(noise.seed))``: n standard normals for the base noise, then the
    outlier indices, then the outlier values. Absolute values are taken so that every value is positive.
    """
    grid = np.asarray(grid, dtype=float)
    n = grid.size
    if n == 0:
        raise ValueError("generate_dataset requires a nonempty grid")
    if noise.n_outliers >= n:
        msg = f"n_outliers={noise.n_outliers} must be smaller than the number of points ({n})"
        logger.error(msg)
        raise ValueError(msg)
    truth = eval_profile(spec, grid)
    if np.any(truth <= 0):
        raise ValueError("Profile must be strictly positive on the grid to scale relative noise")

    rng = np.random.Generator(np.random.Philox(noise.seed))
    sigma = noise.sigma_frac * truth
    y = np.abs(truth * (1.0 + noise.shift_frac) + sigma * rng.standard_normal(n))

    mask = np.zeros(n, dtype=bool)
    if noise.n_outliers:
        idx = rng.choice(n, size=noise.n_outliers, replace=False)
        y[idx] = np.abs(rng.normal(truth[idx], noise.outlier_scale * truth[idx]))
        mask[idx] = True

    logger.debug(f"Generated {spec.regime.value} dataset: n={n}, seed={noise.seed}, outliers={noise.n_outliers}")
    return Dataset(psi=grid, y=y, sigma_reported=sigma, truth=truth, outlier_mask=mask, provenance=(spec, noise))


@dataclass(frozen=True)
class SweepCase:
    """One synthetic profile of the benchmark parameter space"""
    index: int
    profile: ProfileSpec
    noise: NoiseSpec
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def regime(self):
        return self.profile.regime

    @property
    def seed(self):
        return self.noise.seed

    def dataset(self, grid=None):
        """Generate this case's dataset (on the default 88-point grid unless given)"""
        return generate_dataset(self.profile, self.noise, make_grid() if grid is None else grid)


def case_seed(key):
    """Stable 64-bit seed from a case's parameter tuple

    Parameters
    ----------
    key : tuple
        JSON-serializable parameter tuple

    Returns
    -------
    seed : int
    """
    digest = hashlib.sha256(json.dumps(key, separators=(',', ':')).encode()).digest()
    return int.from_bytes(digest[:8], 'little')


def sweep_space(base=None):
    """Full Cartesian benchmark space: 240 L-mode, 2880 H-mode and 2160 H-mode+ITB cases

    Parameters
    ----------
    base : ProfileSpec
        Shape parameters not varied by the sweep (defaults of ProfileSpec if None)

    Returns
    -------
    cases : list of SweepCase
        Ordered L-mode, H-mode, H-mode+ITB; ``meta`` holds the swept profile parameters
    """
    base = ProfileSpec() if base is None else base
    noise_grid = list(it.product(SIGMA_FRACS, SHIFT_FRACS, N_OUTLIERS, OUTLIER_SCALES))
    shapes = [(Regime.LMODE, {})]
    shapes += [(Regime.HMODE, {'f_edge': n_edge, 'w_ped': w_ped}) for n_edge, w_ped in it.product(N_EDGES, W_PEDS)]
    shapes += [(Regime.HMODE_ITB, {'w_itb': w_itb, 'n_itb': n_itb}) for w_itb, n_itb in it.product(W_ITBS, N_ITBS)]

    cases = []
    for regime, shape in shapes:
        profile_kwargs = base.to_dict()
        profile_kwargs.update(regime=regime, **shape)
        profile = ProfileSpec(**profile_kwargs)
        for sigma_frac, shift_frac, n_outliers, outlier_scale in noise_grid:
            key = (regime.value, sorted(shape.items()), sigma_frac, shift_frac, n_outliers, outlier_scale)
            noise = NoiseSpec(sigma_frac=sigma_frac, shift_frac=shift_frac, n_outliers=n_outliers,
                              outlier_scale=outlier_scale, seed=case_seed(key))
            cases.append(SweepCase(index=len(cases), profile=profile, noise=noise, meta=dict(shape)))
    return cases


def desk_space(per_cell=2, seed=2022):
    """Stratified subset of the full space: `per_cell` cases per (regime, sigma_frac, n_outliers) cell

    With the default of 2 this is 3 x 5 x 4 x 2 = 120 cases.

    Parameters
    ----------
    per_cell : int
    seed : int
        Seed of the stratified draw

    Returns
    -------
    cases : list of SweepCase
        Sorted by case index
    """
    rng = np.random.Generator(np.random.Philox(seed))
    cells = {}
    for case in sweep_space():
        cells.setdefault((case.regime, case.noise.sigma_frac, case.noise.n_outliers), []).append(case)
    chosen = []
    for key in sorted(cells, key=lambda k: (list(Regime).index(k[0]), k[1], k[2])):
        members = cells[key]
        picks = rng.choice(len(members), size=min(per_cell, len(members)), replace=False)
        chosen.extend(members[i] for i in picks)
    return sorted(chosen, key=lambda c: c.index)


PRESETS = {'paper': sweep_space, 'desk': desk_space}


def preset_cases(name):
    """Cases of a named sweep preset (``paper`` or ``desk``)"""
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"Unknown preset '{name}', choices are: {', '.join(PRESETS)}") from None
