"""Benchmark harness: run the four fitting methods over synthetic profiles and summarize RMSE
"""
from dataclasses import dataclass, asdict, fields, replace
from datetime import datetime, timezone
from enum import Enum
from multiprocessing import Pool
import csv
import json
import os
import time

import numpy as np

from profgpr._version import __version__
from profgpr.config import from_section
from profgpr.gp import display_grid
from profgpr.inference import ChainConfig, FitError, fit_empirical_bayes, fit_full_bayes
from profgpr.kernels import ChangePoint, GibbsTanh, NumericalError
from profgpr.likelihoods import GaussianLik, StudentTLik
from profgpr.logger import get_logger
from profgpr.profiles import Regime, eval_profile, sweep_space

logger = get_logger()


class MethodSpec(Enum):
    """The four benchmarked fitting methods"""
    EB_GIBBS = 'eb-gibbs'
    EB_CHANGEPOINT = 'eb-cp'
    FB_CHANGEPOINT_GAUSSIAN = 'fb-cp-gauss'
    FB_CHANGEPOINT_STUDENTT = 'fb-cp-t'

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"Unknown method '{value}', choices are: {', '.join(m.value for m in cls)}") from None

    @property
    def index(self):
        return list(MethodSpec).index(self)

    @property
    def is_full_bayes(self):
        return self.value.startswith('fb')


ALL_METHODS = tuple(MethodSpec)


@dataclass(frozen=True)
class FitSettings:
    """Method settings shared by every fit of a run

    Attributes
    ----------
    restarts : int
        Empirical-Bayes optimizer restarts
    grid_size : int
        Points of the evaluation grid
    rmse_on : str
        'data' (dataset coordinates) or 'grid' (evaluation grid against the analytic truth)
    marginalize_gaussian : bool
        Integrate latents out in the Gaussian full-Bayes method
    use_reported_sigma : bool
        Scale Gaussian noise by reported error bars
    transfer_width : float
        Change-point transfer width
    bins : int
        Hyperparameter histogram bins
    """
    restarts: int = 8
    grid_size: int = 220
    rmse_on: str = 'data'
    marginalize_gaussian: bool = True
    use_reported_sigma: bool = False
    transfer_width: float = 0.01
    bins: int = 20

    def __post_init__(self):
        if self.rmse_on not in ('data', 'grid'):
            raise ValueError(f"FitSettings.rmse_on must be 'data' or 'grid', got '{self.rmse_on}'")
        if self.restarts < 1 or self.grid_size < 2 or self.bins < 1:
            raise ValueError(f"FitSettings requires restarts >= 1, grid_size >= 2, bins >= 1, got {self}")
        if not self.transfer_width > 0:
            raise ValueError(f"FitSettings.transfer_width must be > 0, got {self.transfer_width}")

    @classmethod
    def from_config(cls, conf=None, conf_path=None, **overrides):
        """Initialize FitSettings from the [fit] section of a Config or Config file"""
        return from_section(cls, 'fit', conf=conf, conf_path=conf_path, **overrides)

    def to_dict(self):
        return asdict(self)


def rmse(fit, truth):
    """Root mean square of fit - truth

    Parameters
    ----------
    fit : numpy.ndarray
    truth : numpy.ndarray

    Returns
    -------
    rmse : float
    """
    fit = np.asarray(fit, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if fit.shape != truth.shape:
        raise ValueError(f"rmse: fit has shape {fit.shape}, truth has shape {truth.shape}")
    if fit.size == 0:
        raise ValueError("rmse of empty arrays")
    return float(np.sqrt(np.mean((fit - truth)**2)))


def method_seed(case_seed, method):
    """Chain seed of `method` on a case, independent of which other methods run"""
    seq = np.random.SeedSequence([int(case_seed), MethodSpec.parse(method).index])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def run_method(method, data, chain=None, settings=None, seed=0):
    """Fit `data` with one benchmark method and attach its RMSE when the truth is known

    Parameters
    ----------
    method : MethodSpec or str
    data : profgpr.profiles.Dataset
    chain : ChainConfig
        Chain settings; its seed is replaced by `seed`
    settings : FitSettings
    seed : int

    Returns
    -------
    result : profgpr.inference.FitResult
    """
    method = MethodSpec.parse(method)
    chain = replace(ChainConfig() if chain is None else chain, seed=seed)
    settings = FitSettings() if settings is None else settings
    grid = display_grid(settings.grid_size)
    changepoint = ChangePoint(transfer_width=settings.transfer_width)
    common = dict(grid=grid, method=method.value)

    if method is MethodSpec.EB_GIBBS:
        result = fit_empirical_bayes(GibbsTanh(), data, settings.restarts, seed=seed,
                                     use_reported_sigma=settings.use_reported_sigma, **common)
    elif method is MethodSpec.EB_CHANGEPOINT:
        result = fit_empirical_bayes(changepoint, data, settings.restarts, seed=seed,
                                     use_reported_sigma=settings.use_reported_sigma, **common)
    elif method is MethodSpec.FB_CHANGEPOINT_GAUSSIAN:
        result = fit_full_bayes(changepoint, GaussianLik(), data, chain, marginalize=settings.marginalize_gaussian,
                                use_reported_sigma=settings.use_reported_sigma and settings.marginalize_gaussian,
                                **common)
    else:
        result = fit_full_bayes(changepoint, StudentTLik(), data, chain, **common)

    return replace(result, rmse=_result_rmse(result, data, settings))


def _result_rmse(result, data, settings):
    if settings.rmse_on == 'grid':
        if data.provenance == 'external':
            return None
        spec, _ = data.provenance
        return rmse(result.predictive.mean, eval_profile(spec, result.predictive.psi))
    if not data.has_truth:
        return None
    return rmse(result.at_data.mean, data.truth)


@dataclass(frozen=True)
class SweepRecord:
    """One row of the benchmark database; ``rmse`` is None for a failed fit"""
    case: int
    method: MethodSpec
    regime: Regime
    sigma_frac: float
    shift_frac: float
    n_outliers: int
    outlier_scale: float
    n_edge: float
    w_ped: float
    w_itb: float
    n_itb: float
    seed: int
    rmse: float
    runtime_s: float
    flags: str = ''

    @property
    def key(self):
        return self.case, self.method

    @property
    def failed(self):
        return self.rmse is None

    @classmethod
    def for_case(cls, case, method, rmse=None, runtime_s=0.0, flags=''):
        """Record of `method` on `case`; ignored profile fields are left empty"""
        prof = case.profile
        has_ped = prof.regime is not Regime.LMODE
        has_itb = prof.regime is Regime.HMODE_ITB
        return cls(case=case.index, method=MethodSpec.parse(method), regime=prof.regime,
                   sigma_frac=case.noise.sigma_frac, shift_frac=case.noise.shift_frac,
                   n_outliers=case.noise.n_outliers, outlier_scale=case.noise.outlier_scale,
                   n_edge=prof.f_edge, w_ped=prof.w_ped if has_ped else None,
                   w_itb=prof.w_itb if has_itb else None, n_itb=prof.n_itb if has_itb else None,
                   seed=case.seed, rmse=rmse, runtime_s=runtime_s, flags=flags)

    def to_row(self):
        row = []
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, Enum):
                val = val.value
            elif val is None:
                val = ''
            elif isinstance(val, float):
                val = repr(val)
            row.append(val)
        return row

    @classmethod
    def from_row(cls, row):
        def num(text, typ=float):
            return None if text == '' else typ(text)
        return cls(case=int(row['case']), method=MethodSpec.parse(row['method']), regime=Regime.parse(row['regime']),
                   sigma_frac=float(row['sigma_frac']), shift_frac=float(row['shift_frac']),
                   n_outliers=int(row['n_outliers']), outlier_scale=float(row['outlier_scale']),
                   n_edge=num(row['n_edge']), w_ped=num(row['w_ped']), w_itb=num(row['w_itb']),
                   n_itb=num(row['n_itb']), seed=int(row['seed']), rmse=num(row['rmse']),
                   runtime_s=float(row['runtime_s']), flags=row['flags'])


RECORD_FIELDS = tuple(f.name for f in fields(SweepRecord))
GROUP_KEYS = RECORD_FIELDS[2:11]


def read_records(path):
    """Read a records CSV

    Raises
    ------
    FileNotFoundError
    ValueError
        On a header or row that does not match the record schema
    """
    if not os.path.exists(path):
        err_msg = f"Unable to find records database: {path}"
        logger.error(err_msg)
        raise FileNotFoundError(err_msg)
    with open(path, newline='') as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            return []
        if tuple(reader.fieldnames) != RECORD_FIELDS:
            raise ValueError(f"{path}: header {reader.fieldnames} does not match {list(RECORD_FIELDS)}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            try:
                records.append(SweepRecord.from_row(row))
            except (KeyError, TypeError, ValueError) as err:
                raise ValueError(f"{path}:{lineno}: malformed record ({err})") from None
    return records


class RecordWriter:
    """Append-only records CSV; every append is flushed to disk before returning"""

    def __init__(self, path):
        self.path = path
        new = not os.path.exists(path) or os.path.getsize(path) == 0
        self._file = open(path, 'a', newline='')
        self._writer = csv.writer(self._file, lineterminator='\n')
        if new:
            self._writer.writerow(RECORD_FIELDS)
            self._sync()

    def _sync(self):
        self._file.flush()
        os.fsync(self._file.fileno())

    def append(self, record):
        self._writer.writerow(record.to_row())
        self._sync()

    def close(self):
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def drop_torn_tail(path):
    """Truncate a final record that was cut off mid-write

    Records are written one line at a time, so a file that does not end in a newline lost its last
    append. Returns the number of bytes removed.
    """
    with open(path, 'rb+') as f:
        content = f.read()
        if not content or content.endswith(b'\n'):
            return 0
        cut = content.rfind(b'\n') + 1
        f.truncate(cut)
    logger.warning(f"{path}: dropped a torn final record ({len(content) - cut} bytes)")
    return len(content) - cut


def sidecar_path(db_path):
    return f'{db_path}.json'


def read_sidecar(db_path):
    """Run metadata of a records database, or {} if none was written"""
    path = sidecar_path(db_path)
    if not os.path.exists(path):
        return {}
    with open(path) as f:
        return json.load(f)


def _write_sidecar(db_path, meta):
    with open(sidecar_path(db_path), 'w') as f:
        json.dump(meta, f, indent=2)
        f.write('\n')


def _now():
    return datetime.now(timezone.utc).isoformat(timespec='seconds')


def _run_case(task):
    """Fit one case with the pending methods; worker entry point

    No exception escapes: a failing fit becomes a flagged record so the sweep carries on.
    """
    case, methods, chain, settings = task
    try:
        data = case.dataset()
    except Exception as err:
        logger.exception(f"Case {case.index}: dataset generation failed: {err}")
        return [SweepRecord.for_case(case, method, flags='data_error') for method in methods]
    records = []
    for method in methods:
        start = time.perf_counter()
        try:
            result = run_method(method, data, chain, settings, seed=method_seed(case.seed, method))
        except Exception as err:
            if isinstance(err, (FitError, NumericalError)):
                logger.warning(f"Case {case.index} {method.value}: fit failed: {err}")
                flag = 'fit_error' if isinstance(err, FitError) else 'numerical_error'
            else:
                logger.exception(f"Case {case.index} {method.value}: unexpected {type(err).__name__}: {err}")
                flag = 'internal_error'
            records.append(SweepRecord.for_case(case, method, runtime_s=time.perf_counter() - start, flags=flag))
            continue
        flags = 'accept_rate' if result.diagnostics.get('warnings') else ''
        records.append(SweepRecord.for_case(case, method, rmse=result.rmse, runtime_s=result.runtime_s, flags=flags))
    return records


def run_sweep(cases, methods=ALL_METHODS, parallelism=1, out='sweep.csv', chain=None, settings=None, meta=None):
    """Fit every (case, method) pair not already in the database at `out`

    Each case's dataset is generated once in its worker and shared by its methods. Records are appended
    in case order as cases complete, so an interrupted sweep resumes where it stopped. Failed fits are
    stored as flagged records and are not retried.

    Parameters
    ----------
    cases : list of profgpr.profiles.SweepCase
    methods : sequence of MethodSpec
    parallelism : int
        Worker processes; 1 runs in-process
    out : str or path-like
        Records CSV; run metadata go to ``<out>.json``
    chain : ChainConfig
    settings : FitSettings
    meta : dict
        Extra metadata for the sidecar

    Returns
    -------
    records : list of SweepRecord
        Full database content
    """
    if not cases:
        raise ValueError("run_sweep requires at least one case")
    if parallelism < 1:
        raise ValueError(f"parallelism must be >= 1, got {parallelism}")
    methods = [MethodSpec.parse(m) for m in methods]
    chain = ChainConfig() if chain is None else chain
    settings = FitSettings() if settings is None else settings

    done = set()
    if os.path.exists(out):
        drop_torn_tail(out)
        done = {rec.key for rec in read_records(out)}
    tasks = []
    for case in cases:
        pending = [m for m in methods if (case.index, m) not in done]
        if pending:
            tasks.append((case, pending, chain, settings))
    n_pending = sum(len(t[1]) for t in tasks)
    logger.info(f"Sweep of {len(cases)} case(s) x {len(methods)} method(s): {n_pending} fit(s) pending, "
                f"{len(done)} record(s) present")

    sidecar = read_sidecar(out)
    if sidecar and (sidecar.get('chain') != chain.to_dict() or sidecar.get('settings') != settings.to_dict()):
        logger.warning(f"Resuming {out} with settings that differ from its sidecar")
    sidecar.setdefault('started', _now())
    sidecar.update({'version': __version__, 'methods': [m.value for m in methods], 'n_cases': len(cases),
                    'chain': chain.to_dict(), 'settings': settings.to_dict(), **(meta or {})})
    sidecar.setdefault('resumed', [])
    if done:
        sidecar['resumed'].append(_now())
    _write_sidecar(out, sidecar)

    with RecordWriter(out) as writer:
        if parallelism == 1 or len(tasks) <= 1:
            batches = map(_run_case, tasks)
            for records in batches:
                for rec in records:
                    writer.append(rec)
        else:
            with Pool(parallelism) as pool:
                for records in pool.imap(_run_case, tasks):
                    for rec in records:
                        writer.append(rec)

    sidecar['finished'] = _now()
    _write_sidecar(out, sidecar)
    return read_records(out)


@dataclass(frozen=True)
class SummaryRow:
    group: str
    method: MethodSpec
    mean_rmse: float
    std_rmse: float
    count: int

    def to_row(self):
        return [self.group, self.method.value, repr(self.mean_rmse), repr(self.std_rmse), self.count]


def parse_group_keys(group_by):
    """Normalize group-key names (``n-outliers`` -> ``n_outliers``), rejecting unknown ones"""
    if isinstance(group_by, str):
        group_by = [key for key in group_by.split(',') if key.strip()]
    keys = tuple(key.strip().replace('-', '_') for key in group_by)
    unknown = [key for key in keys if key not in GROUP_KEYS]
    if unknown:
        raise ValueError(f"Unknown group key(s) {unknown}, choices are: {', '.join(GROUP_KEYS)}")
    return keys


def _group_label(record, keys):
    vals = []
    for key in keys:
        val = getattr(record, key)
        vals.append(val.value if isinstance(val, Enum) else ('' if val is None else f'{val:g}'))
    return '|'.join(vals)


def _sort_key(label):
    parts = []
    for part in label.split('|'):
        try:
            parts.append((0, float(part), ''))
        except ValueError:
            parts.append((1, 0.0, part))
    return parts


def summarize(records, group_by=('regime',)):
    """Mean and std (ddof=0) of RMSE per group and method; failed fits are left out

    Parameters
    ----------
    records : list of SweepRecord
    group_by : sequence of str or str
        Record fields, e.g. ``('regime',)`` or ``'n-outliers'``

    Returns
    -------
    rows : list of SummaryRow
        Ordered by group then method
    """
    keys = parse_group_keys(group_by)
    if not records:
        raise ValueError("summarize requires a nonempty database")
    groups = {}
    for rec in records:
        if not rec.failed:
            groups.setdefault((_group_label(rec, keys), rec.method), []).append(rec.rmse)
    rows = []
    for label, method in sorted(groups, key=lambda k: (_sort_key(k[0]), k[1].index)):
        # sorted so the result is independent of record order
        vals = np.sort(groups[(label, method)])
        rows.append(SummaryRow(label, method, float(np.mean(vals)), float(np.std(vals)), int(vals.size)))
    return rows


@dataclass(frozen=True)
class RuntimeRow:
    group: str
    method: MethodSpec
    mean_runtime_s: float
    std_runtime_s: float
    total_runtime_s: float
    count: int

    def to_row(self):
        return [self.group, self.method.value, repr(self.mean_runtime_s), repr(self.std_runtime_s),
                repr(self.total_runtime_s), self.count]


def summarize_runtime(records, group_by=('regime',)):
    """Mean, std (ddof=0) and total wall-clock cost per group and method

    Flagged failures are included, since their time was spent all the same. The table is kept
    apart from the RMSE summary because its content depends on the machine.

    Returns
    -------
    rows : list of RuntimeRow
        Ordered by group then method
    """
    keys = parse_group_keys(group_by)
    if not records:
        raise ValueError("summarize_runtime requires a nonempty database")
    groups = {}
    for rec in records:
        groups.setdefault((_group_label(rec, keys), rec.method), []).append(rec.runtime_s)
    rows = []
    for label, method in sorted(groups, key=lambda k: (_sort_key(k[0]), k[1].index)):
        vals = np.sort(groups[(label, method)])
        rows.append(RuntimeRow(label, method, float(np.mean(vals)), float(np.std(vals)), float(np.sum(vals)),
                               int(vals.size)))
    return rows


def _mean_rmse(records, method, **match):
    vals = [rec.rmse for rec in records
            if rec.method is method and not rec.failed and all(getattr(rec, k) == v for k, v in match.items())]
    return float(np.mean(np.sort(vals))) if vals else None


def outlier_slope(records, method):
    """Least-squares slope of mean RMSE against the number of outliers for one method

    Returns None when fewer than two outlier counts have successful fits.
    """
    method = MethodSpec.parse(method)
    counts = sorted({rec.n_outliers for rec in records if rec.method is method and not rec.failed})
    if len(counts) < 2:
        return None
    means = [_mean_rmse(records, method, n_outliers=n) for n in counts]
    return float(np.polyfit(np.asarray(counts, dtype=float), means, 1)[0])


def _ratio(num, den):
    return None if num is None or den is None or den == 0 else float(num / den)


def directional_summary(records):
    """Method-comparison statistics of a sweep database

    Returns
    -------
    summary : dict
        ``ordering_ratio``: mean RMSE of fb-cp-t over that of eb-cp.
        ``outlier_slopes``: per-method slope of mean RMSE against the number of outliers.
        ``slope_ratio``: fb-cp-t slope over fb-cp-gauss slope.
        ``outlier_accuracy_ratio``: at ``outlier_count``, the largest count present, mean RMSE of fb-cp-t
        over that of fb-cp-gauss.
        ``regime_ratio``: per method, H-mode over L-mode mean RMSE.
        Entries whose inputs are absent from the database are None.
    """
    if not records:
        raise ValueError("directional_summary requires a nonempty database")
    t_fit, gauss = MethodSpec.FB_CHANGEPOINT_STUDENTT, MethodSpec.FB_CHANGEPOINT_GAUSSIAN
    present = sorted({rec.method for rec in records}, key=lambda m: m.index)
    slopes = {m.value: outlier_slope(records, m) for m in present}
    n_max = max(rec.n_outliers for rec in records)
    return {
        'ordering_ratio': _ratio(_mean_rmse(records, t_fit), _mean_rmse(records, MethodSpec.EB_CHANGEPOINT)),
        'outlier_slopes': slopes,
        'slope_ratio': _ratio(slopes.get(t_fit.value), slopes.get(gauss.value)),
        'outlier_count': n_max,
        'outlier_accuracy_ratio': _ratio(_mean_rmse(records, t_fit, n_outliers=n_max),
                                         _mean_rmse(records, gauss, n_outliers=n_max)),
        'regime_ratio': {m.value: _ratio(_mean_rmse(records, m, regime=Regime.HMODE),
                                         _mean_rmse(records, m, regime=Regime.LMODE)) for m in present},
    }


def write_directional(summary, path):
    with open(path, 'w') as f:
        json.dump(summary, f, indent=2)
        f.write('\n')


def rmse_histograms(records, bins=20):
    """RMSE histogram per method and regime

    Returns
    -------
    rows : list of tuple
        ``(method, regime, bin_lo, bin_hi, count)``
    """
    cells = {}
    for rec in records:
        if not rec.failed:
            cells.setdefault((rec.method, rec.regime), []).append(rec.rmse)
    rows = []
    for method, regime in sorted(cells, key=lambda k: (k[0].index, list(Regime).index(k[1]))):
        counts, edges = np.histogram(np.sort(cells[(method, regime)]), bins=bins)
        rows.extend((method.value, regime.value, float(lo), float(hi), int(c))
                    for lo, hi, c in zip(edges[:-1], edges[1:], counts))
    return rows


def write_summary(rows, path):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(('group', 'method', 'mean_rmse', 'std_rmse', 'count'))
        writer.writerows(row.to_row() for row in rows)


def write_runtime(rows, path):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(('group', 'method', 'mean_runtime_s', 'std_runtime_s', 'total_runtime_s', 'count'))
        writer.writerows(row.to_row() for row in rows)


def write_histograms(rows, path):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(('method', 'regime', 'bin_lo', 'bin_hi', 'count'))
        for method, regime, lo, hi, count in rows:
            writer.writerow((method, regime, repr(lo), repr(hi), count))


def worst_fits(records, per_method=1):
    """Highest-RMSE records of each method; ties go to the lower case index

    Returns
    -------
    worst : list of SweepRecord
        Grouped by method in MethodSpec order
    """
    if per_method < 1:
        raise ValueError(f"per_method must be >= 1, got {per_method}")
    by_method = {}
    for rec in records:
        if not rec.failed:
            by_method.setdefault(rec.method, []).append(rec)
    worst = []
    for method in sorted(by_method, key=lambda m: m.index):
        ranked = sorted(by_method[method], key=lambda r: (-r.rmse, r.case))
        worst.extend(ranked[:per_method])
    return worst


def write_worst_bundle(record, out_dir, chain=None, settings=None, methods=ALL_METHODS, cases=None):
    """Re-fit the case of a worst-fit record with every method and write the curves side by side

    Writes ``worst_<method>_case<N>.csv`` with columns ``psi,truth,<method>_mean,<method>_std,...`` on the
    evaluation grid, and ``worst_<method>_case<N>_data.csv`` holding the case's dataset. Fits use the same
    per-method seeds as the sweep.

    Returns
    -------
    paths : list of str
    """
    cases = sweep_space() if cases is None else cases
    case = next((c for c in cases if c.index == record.case), None)
    if case is None:
        raise ValueError(f"Case {record.case} is not in the sweep space")
    settings = FitSettings() if settings is None else settings
    data = case.dataset()
    grid = display_grid(settings.grid_size)
    columns = {'psi': grid, 'truth': eval_profile(case.profile, grid)}
    for method in (MethodSpec.parse(m) for m in methods):
        try:
            result = run_method(method, data, chain, settings, seed=method_seed(case.seed, method))
        except (FitError, NumericalError) as err:
            logger.warning(f"Worst-fit re-fit of case {case.index} with {method.value} failed: {err}")
            result = None
        columns[f'{method.value}_mean'] = result.predictive.mean if result else np.full(grid.size, np.nan)
        columns[f'{method.value}_std'] = result.predictive.std if result else np.full(grid.size, np.nan)

    stem = os.path.join(out_dir, f'worst_{record.method.value}_case{case.index}')
    with open(f'{stem}.csv', 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in zip(*columns.values()):
            writer.writerow([repr(float(val)) for val in row])
    data.to_csv(f'{stem}_data.csv')
    return [f'{stem}.csv', f'{stem}_data.csv']
