"""profgpr CLI script
"""
from configparser import ConfigParser
from dataclasses import dataclass, asdict, field
import argparse
import json
import os
import sys

from profgpr import default_config_path
from profgpr._version import __version__
from profgpr.bench import (ALL_METHODS, FitSettings, MethodSpec, directional_summary, read_records, read_sidecar,
                           rmse_histograms, run_method, run_sweep, summarize, summarize_runtime, worst_fits,
                           write_directional, write_histograms, write_runtime, write_summary, write_worst_bundle)
from profgpr.config import from_section, read_config
from profgpr.inference import ChainConfig, FitError
from profgpr.kernels import NumericalError
from profgpr.logger import get_logger, echo_to_stderr
from profgpr.profiles import Dataset, NoiseSpec, ProfileSpec, PRESETS, Regime, generate_dataset, make_grid, \
    preset_cases

_no_arg_commands = []
_command_parsers = {}

logger = get_logger()


@dataclass(frozen=True)
class GridSpec:
    """Observation grid of generated datasets"""
    n_core: int = 48
    n_ped: int = 40

    def __post_init__(self):
        if self.n_core < 2 or self.n_ped < 0:
            raise ValueError(f"GridSpec requires n_core >= 2 and n_ped >= 0, got ({self.n_core}, {self.n_ped})")

    def grid(self):
        return make_grid(self.n_core, self.n_ped)


@dataclass(frozen=True)
class SweepSettings:
    preset: str = 'desk'
    parallelism: int = 1
    out: str = 'sweep.csv'
    methods: tuple = tuple(m.value for m in ALL_METHODS)
    limit: int = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"Unknown preset '{self.preset}', choices are: {', '.join(PRESETS)}")
        if self.parallelism < 1:
            raise ValueError(f"SweepSettings.parallelism must be >= 1, got {self.parallelism}")
        if self.limit is not None and self.limit < 1:
            raise ValueError(f"SweepSettings.limit must be >= 1, got {self.limit}")
        methods = (self.methods,) if isinstance(self.methods, str) else self.methods
        object.__setattr__(self, 'methods', tuple(MethodSpec.parse(m).value for m in methods))


@dataclass(frozen=True)
class ReportSettings:
    db: str = 'sweep.csv'
    group: str = 'regime'
    worst: int = 0
    bins: int = 20
    out_dir: str = 'report'

    def __post_init__(self):
        if self.worst < 0 or self.bins < 1:
            raise ValueError(f"ReportSettings requires worst >= 0 and bins >= 1, got ({self.worst}, {self.bins})")


_SECTIONS = {'profile': ProfileSpec, 'noise': NoiseSpec, 'grid': GridSpec, 'chain': ChainConfig,
             'fit': FitSettings, 'sweep': SweepSettings, 'report': ReportSettings}


@dataclass(frozen=True)
class RunConfig:
    """Every setting of a command, one attribute per configuration section"""
    profile: ProfileSpec = field(default_factory=ProfileSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    chain: ChainConfig = field(default_factory=ChainConfig)
    fit: FitSettings = field(default_factory=FitSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    report: ReportSettings = field(default_factory=ReportSettings)

    @classmethod
    def from_config(cls, conf=None, conf_path=None, overrides=None):
        """Build from a Config or Config file; `overrides` maps section -> {key: value} and wins over the file

        With neither `conf` nor `conf_path`, the shipped default configuration is read if present.
        """
        if conf is None and conf_path is None:
            conf_path = default_config_path()
            conf = ConfigParser() if not os.path.exists(conf_path) else None
        conf = read_config(conf, conf_path)
        unknown = [sec for sec in conf.sections() if sec not in _SECTIONS]
        if unknown:
            msg = f"Config. contains unexpected section(s): {unknown}"
            logger.error(msg)
            raise TypeError(msg)
        overrides = overrides or {}
        return cls(**{sec: from_section(typ, sec, conf=conf, **overrides.get(sec, {}))
                      for sec, typ in _SECTIONS.items()})

    def as_dict(self):
        out = {}
        for sec in _SECTIONS:
            obj = getattr(self, sec)
            out[sec] = obj.to_dict() if hasattr(obj, 'to_dict') else asdict(obj)
        return out


class _CustomUsageFormatter(argparse.HelpFormatter):
    """Custom formatter to clarify profgpr command usage
    """
    def add_usage(self, usage, actions, groups, prefix=None):
        """Adds `profgpr` to beginning of usage string
        """
        if prefix is None:
            prefix = 'profgpr '
        return super(_CustomUsageFormatter, self).add_usage(
             usage, actions, groups, prefix)


def _setup_command_parser(subparsers, name, desc, *, has_args=True):
    """Initialize argparse ArgumentParser for a profgpr command, with the options every command shares

    Parameters
    ----------
    subparsers : argparse._SubParsersAction
        argparse subparsers object
    name : str
        profgpr command name
    desc : str
        profgpr command description
    has_args : bool
        Switch for whether command requires arguments (True) or not (False)

    Returns
    -------
    parser: argparse.ArgumentParser
        profgpr Command argument parser
    """
    parser = subparsers.add_parser(
        name=name,
        prog=name,
        description=desc,
        help=desc,
        formatter_class=_CustomUsageFormatter,
    )
    parser.add_argument('--conf', metavar='CONFIG_FILE', default=None,
                        help='Config. file, values are overridden by flags (default: etc/default.ini)')
    parser.add_argument('-v', '--verbose', action='store_true', help='Echo progress messages to stderr')
    _command_parsers.update({parser.prog: parser})
    if not has_args:
        _no_arg_commands.append(parser.prog)
    return parser


# flag dest -> (config section, key)
_FLAG_KEYS = {
    'regime': ('profile', 'regime'), 'f_o': ('profile', 'f_o'), 'f_edge': ('profile', 'f_edge'),
    'f_ped': ('profile', 'f_ped'), 'w_ped': ('profile', 'w_ped'), 'n_itb': ('profile', 'n_itb'),
    'w_itb': ('profile', 'w_itb'),
    'sigma_frac': ('noise', 'sigma_frac'), 'shift_frac': ('noise', 'shift_frac'),
    'n_outliers': ('noise', 'n_outliers'), 'outlier_scale': ('noise', 'outlier_scale'), 'seed': ('noise', 'seed'),
    'n_core': ('grid', 'n_core'), 'n_ped': ('grid', 'n_ped'),
    'n_burn': ('chain', 'n_burn'), 'n_samples': ('chain', 'n_samples'), 'thin': ('chain', 'thin'),
    'chain_seed': ('chain', 'seed'),
    'restarts': ('fit', 'restarts'), 'grid_size': ('fit', 'grid_size'), 'rmse_on': ('fit', 'rmse_on'),
    'use_reported_sigma': ('fit', 'use_reported_sigma'),
    'preset': ('sweep', 'preset'), 'jobs': ('sweep', 'parallelism'), 'db_out': ('sweep', 'out'),
    'methods': ('sweep', 'methods'), 'limit': ('sweep', 'limit'),
    'db': ('report', 'db'), 'group': ('report', 'group'), 'worst': ('report', 'worst'), 'bins': ('report', 'bins'),
    'out_dir': ('report', 'out_dir'),
}


def _add_chain_args(parser):
    parser.add_argument('--n-burn', type=int, default=None, help='Burn-in steps')
    parser.add_argument('--n-samples', type=int, default=None, help='Post-burn-in steps')
    parser.add_argument('--thin', type=int, default=None, help='Thinning stride')
    parser.add_argument('--restarts', type=int, default=None, help='Empirical-Bayes restarts')
    parser.add_argument('--grid-size', type=int, default=None, help='Evaluation grid points')


def _setup_generate_parser(subparsers):
    """Setup profgpr `generate` command parser

    Parameters
    ----------
    subparsers : argparse._SubParsersAction
        argparse subparsers object
    """
    parser = _setup_command_parser(subparsers, 'generate', 'Generate a synthetic noisy profile dataset',
                                   has_args=False)
    choices = [r.value for r in Regime]
    parser.add_argument('--regime', choices=choices, default=None,
                        help=f'Profile regime, choices are: {", ".join(choices)}')
    for flag in ('f-o', 'f-edge', 'f-ped', 'w-ped', 'n-itb', 'w-itb'):
        parser.add_argument(f'--{flag}', type=float, default=None, help=f'Profile {flag.replace("-", "_")}')
    parser.add_argument('--sigma-frac', type=float, default=None, help='Noise width relative to the truth')
    parser.add_argument('--shift-frac', type=float, default=None, help='Systematic shift relative to the truth')
    parser.add_argument('--n-outliers', type=int, default=None, help='Number of outliers')
    parser.add_argument('--outlier-scale', type=float, default=None, help='Outlier width relative to the truth')
    parser.add_argument('--seed', type=int, default=None, help='Noise RNG seed')
    parser.add_argument('--n-core', type=int, default=None, help='Uniform grid points on [0, 1.1]')
    parser.add_argument('--n-ped', type=int, default=None, help='Extra grid points on [0.9, 1.0]')
    parser.add_argument('-o', '--out', default='dataset.csv', help='Dataset CSV path (provenance goes to .json)')


def _setup_fit_parser(subparsers):
    """Setup profgpr `fit` command parser

    Parameters
    ----------
    subparsers : argparse._SubParsersAction
        argparse subparsers object
    """
    parser = _setup_command_parser(subparsers, 'fit', 'Fit a dataset CSV with one method')
    choices = [m.value for m in MethodSpec]
    parser.add_argument('data', metavar='DATA', help='Dataset CSV: psi,y,sigma[,truth,is_outlier]')
    parser.add_argument('--method', choices=choices, default=MethodSpec.FB_CHANGEPOINT_STUDENTT.value,
                        help=f'Fitting method, choices are: {", ".join(choices)}')
    _add_chain_args(parser)
    parser.add_argument('--chain-seed', type=int, default=None, help='Chain / restart RNG seed')
    parser.add_argument('--rmse-on', choices=('data', 'grid'), default=None, help='RMSE evaluation coordinates')
    parser.add_argument('--use-reported-sigma', action='store_true', default=None,
                        help='Scale Gaussian noise by the reported sigma column')
    parser.add_argument('-o', '--out', default=None,
                        help='Output prefix (default: <DATA stem>_<method>)')


def _setup_sweep_parser(subparsers):
    """Setup profgpr `sweep` command parser

    Parameters
    ----------
    subparsers : argparse._SubParsersAction
        argparse subparsers object
    """
    parser = _setup_command_parser(subparsers, 'sweep', 'Run the benchmark sweep', has_args=False)
    parser.add_argument('--preset', choices=list(PRESETS), default=None, help='Case set')
    parser.add_argument('-j', '--jobs', type=int, default=None, help='Worker processes')
    parser.add_argument('-o', '--out', dest='db_out', default=None, help='Records CSV')
    parser.add_argument('--methods', nargs='+', choices=[m.value for m in MethodSpec], default=None,
                        help='Methods to run (default: all four)')
    parser.add_argument('--limit', type=int, default=None, help='Run only the first N cases')
    parser.add_argument('--dry-run', action='store_true', help='Count cases per regime and exit')
    _add_chain_args(parser)


def _setup_report_parser(subparsers):
    """Setup profgpr `report` command parser

    Parameters
    ----------
    subparsers : argparse._SubParsersAction
        argparse subparsers object
    """
    parser = _setup_command_parser(subparsers, 'report', 'Summarize a sweep database', has_args=False)
    parser.add_argument('--db', default=None, help='Records CSV')
    parser.add_argument('--group', default=None, help='Comma-separated group keys, e.g. regime,n-outliers')
    parser.add_argument('--worst', type=int, default=None, help='Worst fits per method to re-fit and bundle')
    parser.add_argument('--bins', type=int, default=None, help='RMSE histogram bins')
    parser.add_argument('--out-dir', default=None, help='Output directory')


def _run_config(args):
    overrides = {}
    for dest, (sec, key) in _FLAG_KEYS.items():
        val = getattr(args, dest, None)
        if val is not None:
            overrides.setdefault(sec, {})[key] = val
    return RunConfig.from_config(conf_path=args.conf, overrides=overrides)


def _write_json(path, obj):
    with open(path, 'w') as f:
        json.dump(obj, f, indent=2)
        f.write('\n')


def _generate(args):
    """Execute profgpr `generate` command"""
    run = _run_config(args)
    data = generate_dataset(run.profile, run.noise, run.grid.grid())
    data.to_csv(args.out)
    prov_path = f'{os.path.splitext(args.out)[0]}.json'
    _write_json(prov_path, {'version': __version__, 'dataset': data.provenance_dict(), 'config': run.as_dict()})
    logger.info(f"Wrote {len(data)}-point {run.profile.regime.value} dataset to {args.out} and {prov_path}")


def _fit(args):
    """Execute profgpr `fit` command"""
    run = _run_config(args)
    if not os.path.exists(args.data):
        msg = f"Unable to find dataset: {args.data}"
        logger.error(msg)
        raise FileNotFoundError(msg)
    data = Dataset.from_csv(args.data)
    method = MethodSpec.parse(args.method)
    prefix = args.out or f'{os.path.splitext(args.data)[0]}_{method.value}'
    logger.info(f"Fitting {args.data} ({len(data)} points) with {method.value}")
    result = run_method(method, data, run.chain, run.fit, seed=run.chain.seed)
    paths = result.write(prefix, provenance={'data': os.path.abspath(args.data), 'config': run.as_dict()},
                         bins=run.fit.bins)
    rmse_msg = '' if result.rmse is None else f", rmse={result.rmse:.6g}"
    logger.info(f"Wrote {', '.join(paths)}{rmse_msg}")


def _sweep(args):
    """Execute profgpr `sweep` command"""
    run = _run_config(args)
    cases = preset_cases(run.sweep.preset)
    if run.sweep.limit:
        cases = cases[:run.sweep.limit]
    if args.dry_run:
        counts = {r.value: sum(c.regime is r for c in cases) for r in Regime}
        print(json.dumps({'preset': run.sweep.preset, 'cases': len(cases), 'by_regime': counts,
                          'methods': list(run.sweep.methods),
                          'fits': len(cases) * len(run.sweep.methods)}))
        return
    records = run_sweep(cases, run.sweep.methods, run.sweep.parallelism, run.sweep.out, run.chain, run.fit,
                        meta={'preset': run.sweep.preset, 'limit': run.sweep.limit})
    n_failed = sum(rec.failed for rec in records)
    logger.info(f"Sweep database {run.sweep.out} holds {len(records)} record(s), {n_failed} flagged failure(s)")


def _report(args):
    """Execute profgpr `report` command"""
    run = _run_config(args)
    rep = run.report
    records = read_records(rep.db)
    if not records:
        msg = f"Records database {rep.db} is empty"
        logger.error(msg)
        raise ValueError(msg)
    os.makedirs(rep.out_dir, exist_ok=True)
    label = rep.group.replace(',', '_').replace('-', '_')
    written = [os.path.join(rep.out_dir, f'summary_{label}.csv'), os.path.join(rep.out_dir, 'histograms.csv'),
               os.path.join(rep.out_dir, f'runtime_{label}.csv')]
    write_summary(summarize(records, rep.group), written[0])
    write_histograms(rmse_histograms(records, rep.bins), written[1])
    write_runtime(summarize_runtime(records, rep.group), written[2])
    directional = directional_summary(records)
    written.append(os.path.join(rep.out_dir, 'directional.json'))
    write_directional(directional, written[-1])
    logger.info(f"Directional statistics: ordering {directional['ordering_ratio']}, "
                f"outlier accuracy {directional['outlier_accuracy_ratio']}, slope ratio {directional['slope_ratio']}")

    if rep.worst:
        sidecar = read_sidecar(rep.db)
        chain = ChainConfig(**sidecar['chain']) if 'chain' in sidecar else run.chain
        settings = FitSettings(**sidecar['settings']) if 'settings' in sidecar else run.fit
        methods = sidecar.get('methods', [m.value for m in ALL_METHODS])
        for rec in worst_fits(records, rep.worst):
            written.extend(write_worst_bundle(rec, rep.out_dir, chain, settings, methods))
    logger.info(f"Wrote {', '.join(written)}")


_COMMANDS = {'generate': _generate, 'fit': _fit, 'sweep': _sweep, 'report': _report}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = argparse.ArgumentParser(
        prog='profgpr',
        description='Gaussian-process fitting of tokamak profiles and its synthetic benchmark'
    )
    parser.add_argument('--version', action='version', version=f'profgpr {__version__}')
    subparsers = parser.add_subparsers(
        title='Commands',
        help='profgpr Commands',
        dest='command'
    )

    # These functions extend the `subparsers` object in-place
    # They also extend the list `_no_arg_commands` and dict `_command_parsers`
    _setup_generate_parser(subparsers)
    _setup_fit_parser(subparsers)
    _setup_sweep_parser(subparsers)
    _setup_report_parser(subparsers)

    # If no arguments or commands are provided, print the top-level help message
    if not argv:
        parser.print_help()
        return 0
    # If a command with required arguments is provided *without* arguments, print that command's help message
    elif len(argv) == 1 and argv[0] not in _no_arg_commands + ['-h', '--help', '--version']:
        try:
            _command_parsers[argv[0]].print_help()
        except KeyError:
            print(f"Unrecognized Command '{argv[0]}'\nSee `profgpr --help` for available options", file=sys.stderr)
            return 1
        return 0

    args = parser.parse_args(argv)
    if args.verbose:
        echo_to_stderr(logger)
    logger.debug(f'Received `{args.command}` Command with args: {args}')
    try:
        _COMMANDS[args.command](args)
    except (ValueError, TypeError, FileNotFoundError, FitError, NumericalError) as err:
        logger.error(f"`{args.command}` failed: {err}")
        print(f"profgpr {args.command}: error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
