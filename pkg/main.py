import os
import sys
import csv
import json
import argparse
import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional
import numpy as np
from omegaconf import OmegaConf
from omegaconf.errors import OmegaConfBaseException
from scipy.stats import ttest_ind
from qstate import bloch_to_density, random_pure_bloch
from cloning import CloneParams, emulate_clone_state, gisin_massar_single_clone_marginal, shrinking_factor, ORACLE_MAX_M
from experiments import (
    METRICS,
    BreakevenRecord,
    DistributionSample,
    FidelityPoint,
    SweepRecord,
    compute_breakeven,
    converge_in_m,
    default_error_grid,
    error_distribution,
    ideal_fidelity_curve,
    run_state_instance,
    sweep,
)
from visualizer import Visualizer
from utils import (
    STREAM_IDS,
    ConfigError,
    OracleFailure,
    ResultsIOError,
    bcolors,
    derive_stream,
    get_clock_time,
    get_config,
    log_spaced_ints,
    print_run_debug_dict,
)

SCHEMA_VERSION = 1
EXPERIMENTS = ('sweep-direct', 'sweep-clone', 'converge-m', 'breakeven', 'distribution', 'verify-oracle', 'ideal-fidelity')
# experiment name -> section of configs/config.yaml
CONFIG_SECTIONS = {
    'sweep-direct': 'sweep',
    'sweep-clone': 'sweep',
    'converge-m': 'converge_m',
    'breakeven': 'breakeven',
    'distribution': 'distribution',
    'verify-oracle': 'verify_oracle',
    'ideal-fidelity': 'ideal_fidelity',
}
MAX_SEED = 2 ** 64 - 1
# execution knobs; left out of the CSV header so results compare byte-for-byte
EXECUTION_FIELDS = ('num_workers', 'batch_size', 'verbose', 'output_path', 'emit_plot')


@dataclass
class RunConfig:
    experiment: str = 'breakeven'
    master_seed: Optional[int] = None
    m_values: List[int] = field(default_factory=lambda: [2, 3, 10, 100, 1000, 100000])
    shots_grid: List[int] = field(default_factory=lambda: log_spaced_ints(1, 6, 4))
    instances: int = 200
    instances_per_point: Optional[int] = None  # distribution only; M * instances when unset
    output_path: Optional[str] = None
    emit_plot: bool = False
    num_workers: int = 1
    batch_size: int = 10000
    message: List[float] = field(default_factory=lambda: [3 ** -0.5] * 3)
    metrics: List[str] = field(default_factory=lambda: list(METRICS))
    target_errors: Optional[List[float]] = None
    num_target_errors: int = 8
    trials: int = 100
    sigma_threshold: float = 4.0
    tolerance: float = 1e-12
    eta_scale: float = 1.0
    n_in: int = 1
    verbose: bool = True

    @property
    def csv_path(self):
        return self.output_path or os.path.join('results', f'{self.experiment}.csv')


# ====================================
# = configuration
# ====================================
class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f'{self.prog}: {message}')


def _number_list(cast):
    def parse(text):
        try:
            values = [float(v) for v in text.split(',') if v.strip() != '']
        except ValueError:
            raise argparse.ArgumentTypeError(f'expected a comma-separated list of numbers, got {text!r}')
        if cast is int:
            if any(v != int(v) for v in values):
                raise argparse.ArgumentTypeError(f'expected integers, got {text!r}')
            return [int(v) for v in values]
        return values
    return parse


def build_arg_parser():
    parser = _ArgumentParser(prog='main.py', description='single-qubit distribution through a 1->M cloning node')
    parser.add_argument('--experiment', choices=EXPERIMENTS, default=None, help='experiment to run')
    parser.add_argument('--seed', type=int, default=None, help='master seed (required)')
    parser.add_argument('--m', type=_number_list(int), default=None, help='comma-separated clone counts M')
    parser.add_argument('--shots', type=_number_list(int), default=None, help='comma-separated shots per basis')
    parser.add_argument('--instances', type=int, default=None, help='instances per grid point')
    parser.add_argument('--out', type=str, default=None, help='CSV output path; JSON and SVG share its stem')
    parser.add_argument('--plot', action='store_true', default=None, help='also write an SVG chart')
    parser.add_argument('--workers', type=int, default=None, help='worker processes')
    parser.add_argument('--trials', type=int, default=None, help='random messages per M for verify-oracle')
    parser.add_argument('--config', type=str, default=None, help='flat YAML file with RunConfig fields')
    parser.add_argument('--defaults', type=str, default=None, help='defaults file (default: configs/config.yaml)')
    parser.add_argument('--quiet', action='store_true', help='no progress output')
    return parser


def _load_defaults(path, experiment):
    if path is None:
        this_file_dir = os.path.dirname(os.path.abspath(__file__))
        path = os.path.join(this_file_dir, 'configs/config.yaml')
        if not os.path.exists(path):
            # dataclass defaults mirror the file
            return []
    global_config = get_config(config_path=path)
    sections = [global_config.get('main') or {}, global_config.get(CONFIG_SECTIONS[experiment]) or {}]
    for section in sections:
        if not isinstance(section, dict):
            raise ConfigError(f'config sections must be mappings ({path})')
    return sections


def check_eta_scale(m_list, eta_scale):
    """The corrupted channel must stay physical: 0 < eta_scale * eta(1, M) <= 1 for every M."""
    for m_out in m_list:
        scaled = eta_scale * shrinking_factor(1, m_out)
        if not 0 < scaled <= 1:
            raise ConfigError(f'eta_scale={eta_scale} gives shrinking factor {scaled:.4f} at M={m_out}; must lie in (0, 1]')


def validate_config(config):
    """
    Reject combinations the selected experiment cannot run.

    Raises:
        ConfigError: with a message naming the offending field.
    """
    if config.experiment not in EXPERIMENTS:
        raise ConfigError(f'unknown experiment {config.experiment}, expected one of {EXPERIMENTS}')
    if config.master_seed is None:
        raise ConfigError('--seed is required')
    if not 0 <= config.master_seed <= MAX_SEED:
        raise ConfigError(f'--seed must be a 64-bit unsigned integer, got {config.master_seed}')
    for name in ('instances', 'num_workers', 'batch_size', 'num_target_errors', 'trials', 'n_in'):
        if getattr(config, name) < 1:
            raise ConfigError(f'{name} must be positive, got {getattr(config, name)}')
    if config.instances_per_point is not None and config.instances_per_point < 1:
        raise ConfigError(f'instances_per_point must be positive, got {config.instances_per_point}')
    if config.experiment != 'ideal-fidelity':
        if len(config.shots_grid) == 0:
            raise ConfigError('shots_grid must not be empty (use --shots)')
        if min(config.shots_grid) < 1:
            raise ConfigError(f'shots_grid must contain positive integers, got {config.shots_grid}')
    if config.experiment != 'sweep-direct':
        if len(config.m_values) == 0:
            raise ConfigError('m_values must not be empty (use --m)')
        min_m = config.n_in + 1 if config.experiment == 'ideal-fidelity' else 2
        if min(config.m_values) < min_m:
            raise ConfigError(f'{config.experiment} needs M >= {min_m}, got {config.m_values}')
    if config.experiment == 'verify-oracle':
        if max(config.m_values) > ORACLE_MAX_M:
            raise ConfigError(f'verify-oracle supports M <= {ORACLE_MAX_M}, got {config.m_values}')
        check_eta_scale(config.m_values, config.eta_scale)
    if config.experiment == 'distribution' and len(config.m_values) != 1:
        raise ConfigError(f'distribution takes a single M, got {config.m_values}')
    if len(config.message) != 3 or abs(np.linalg.norm(config.message) - 1) > 1e-9:
        raise ConfigError(f'message must be a unit Bloch vector, got {config.message}')
    if len(config.metrics) == 0 or any(m not in METRICS for m in config.metrics):
        raise ConfigError(f'metrics must be a non-empty subset of {METRICS}, got {config.metrics}')
    if config.target_errors is not None and (len(config.target_errors) == 0 or min(config.target_errors) <= 0):
        raise ConfigError(f'target_errors must be positive, got {config.target_errors}')
    if config.sigma_threshold <= 0 or config.tolerance <= 0:
        raise ConfigError('sigma_threshold and tolerance must be positive')
    return config


def parse_config(argv=None, config_path=None):
    """
    Build the RunConfig for one run.

    Precedence, lowest first: RunConfig defaults, the `main` and experiment
    sections of the defaults file, the user config file, command-line flags.
    Args:
        argv (list): command-line arguments (sys.argv[1:] if None).
        config_path (str): user config file; overridden by --config.
    Returns:
        RunConfig
    Raises:
        ConfigError: unknown flag, malformed file, invalid values.
    """
    args = build_arg_parser().parse_args(argv)
    config_path = args.config or config_path
    user = get_config(config_path=config_path) if config_path is not None else {}
    cli = {
        'experiment': args.experiment,
        'master_seed': args.seed,
        'm_values': args.m,
        'shots_grid': args.shots,
        'instances': args.instances,
        'output_path': args.out,
        'emit_plot': args.plot,
        'num_workers': args.workers,
        'trials': args.trials,
        'verbose': False if args.quiet else None,
    }
    cli = {k: v for k, v in cli.items() if v is not None}
    experiment = cli.get('experiment', user.get('experiment', RunConfig.experiment))
    if experiment not in EXPERIMENTS:
        raise ConfigError(f'unknown experiment {experiment}, expected one of {EXPERIMENTS}')
    defaults = _load_defaults(args.defaults, experiment)
    try:
        merged = OmegaConf.merge(OmegaConf.structured(RunConfig), *defaults, user, cli)
        config = OmegaConf.to_object(merged)
    except OmegaConfBaseException as e:
        raise ConfigError(f'invalid configuration: {e}') from e
    return validate_config(config)


# ====================================
# = output
# ====================================
def _fmt(value):
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return 'unreachable'
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f'{float(value):.16e}'


def _sweep_rows(records, config):
    rows = []
    for metric in config.metrics:
        for r in records:
            p05, p50, p95 = r.quantiles(metric)
            rows.append({'experiment': config.experiment, 'method': r.method, 'metric': metric, 'm': r.m_out,
                         'shots_per_basis': r.shots_per_basis, 'instances': r.instances, 'mean': r.mean(metric),
                         'p05': p05, 'p50': p50, 'p95': p95})
    return rows


def _breakeven_rows(records, config):
    records = sorted(records, key=lambda r: (config.metrics.index(r.metric) if r.metric in config.metrics else len(config.metrics), r.target_error))
    return [{'metric': r.metric, 'target_error': r.target_error, 'breakeven_m': r.breakeven_m,
             'shots_direct': r.shots_direct_at_eps, 'shots_clone': r.shots_clone_at_eps,
             'breakeven_m_ceil': r.breakeven_m_ceil, 'below_grid': r.below_grid} for r in records]


def _distribution_rows(records, config):
    return [{'experiment': config.experiment, 'm': d.m_out, 'shots_per_basis': d.shots_per_basis, 'instance': d.instance,
             'geodesic': d.sample.geodesic, 'infidelity': d.sample.infidelity, 'degenerate': d.sample.degenerate}
            for d in records]


def _fidelity_rows(records, config):
    return [{'experiment': config.experiment, 'n': p.n_in, 'm': p.m_out, 'eta': p.eta, 'fidelity': p.fidelity} for p in records]


def _oracle_rows(records, config):
    return [{'check': c.check, 'm': c.m_out, 'shots_per_basis': c.shots_per_basis, 'value': c.value,
             'threshold': c.threshold, 'passed': c.passed} for c in records]


@dataclass(frozen=True)
class OracleCheck:
    check: str
    m_out: int
    shots_per_basis: int  # 0 for the exact check
    value: float
    threshold: float
    passed: bool


# record type -> (header without seed, row builder)
CSV_SCHEMAS = {
    SweepRecord: (['experiment', 'method', 'metric', 'm', 'shots_per_basis', 'instances', 'mean', 'p05', 'p50', 'p95'], _sweep_rows),
    BreakevenRecord: (['metric', 'target_error', 'breakeven_m', 'shots_direct', 'shots_clone', 'breakeven_m_ceil', 'below_grid'], _breakeven_rows),
    DistributionSample: (['experiment', 'm', 'shots_per_basis', 'instance', 'geodesic', 'infidelity', 'degenerate'], _distribution_rows),
    FidelityPoint: (['experiment', 'n', 'm', 'eta', 'fidelity'], _fidelity_rows),
    OracleCheck: (['check', 'm', 'shots_per_basis', 'value', 'threshold', 'passed'], _oracle_rows),
}


def config_to_dict(config):
    return dataclasses.asdict(config)


def write_results(records, config):
    """
    Write the CSV table, its JSON sidecar and (if emit_plot) an SVG chart.

    Every file depends only on (records, config), so identical runs give
    byte-identical output.
    Returns:
        dict: written paths keyed by 'csv', 'json' and optionally 'svg'.
    Raises:
        ResultsIOError: a file could not be written; the path is in the message.
    """
    if len(records) == 0:
        raise ConfigError('no records to write')
    record_type = type(records[0])
    assert all(type(r) is record_type for r in records), 'records must share one type'
    header, build_rows = CSV_SCHEMAS[record_type]
    header = header + ['seed']
    rows = build_rows(records, config)
    csv_path = config.csv_path
    stem = os.path.splitext(csv_path)[0]
    paths = {'csv': csv_path, 'json': stem + '.json'}
    config_dict = config_to_dict(config)
    result_config = {k: v for k, v in config_dict.items() if k not in EXECUTION_FIELDS}
    config_json = json.dumps(result_config, sort_keys=True)
    try:
        out_dir = os.path.dirname(csv_path)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
        with open(csv_path, 'w', encoding='utf-8', newline='') as f:
            f.write(f'# schema={SCHEMA_VERSION}\n')
            f.write(f'# seed={config.master_seed}\n')
            f.write(f'# config={config_json}\n')
            writer = csv.DictWriter(f, fieldnames=header, lineterminator='\n')
            writer.writeheader()
            for row in rows:
                writer.writerow({**{k: _fmt(v) for k, v in row.items()}, 'seed': str(config.master_seed)})
        if config.emit_plot:
            paths['svg'] = stem + '.svg'
            Visualizer(config).save(records, paths['svg'], description=f'seed={config.master_seed} config={config_json}')
        sidecar = {'schema': SCHEMA_VERSION, 'config': config_dict, 'num_rows': len(rows), 'files': paths}
        with open(paths['json'], 'w', encoding='utf-8') as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)
            f.write('\n')
    except OSError as e:
        raise ResultsIOError(f'cannot write results to {e.filename or csv_path}: {e.strerror or e}') from e
    return paths


# ====================================
# = oracle verification
# ====================================
@dataclass(frozen=True)
class OracleReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def max_deviation(self):
        return max([c.value for c in self.checks if c.check == 'exact'], default=0.0)


def _emulated_state(message, m_out, eta_scale=1.0):
    params = CloneParams.create(1, m_out)
    if eta_scale == 1.0:
        return emulate_clone_state(message, params)
    # corrupted channel, negative control only
    return bloch_to_density(eta_scale * params.eta * message)


def _welch_statistic(a, b):
    if np.all(a == a[0]) and np.all(b == b[0]):
        return 0.0 if a[0] == b[0] else np.inf
    return abs(float(ttest_ind(a, b, equal_var=False).statistic))


def verify_oracle_command(m_list, trials, master_seed,
                          message=None,
                          shots_grid=(100, 10000),
                          instances=200,
                          tolerance=1e-12,
                          sigma_threshold=4.0,
                          eta_scale=1.0,
                          verbose=False):
    """
    Check the clone emulation against the term-by-term symmetric-subspace marginal.

    Exact check: for each M and `trials` random pure messages, the maximum
    entrywise deviation must not exceed `tolerance`. Statistical check: for
    each M and S, mean geodesic errors of tomography on the emulated state and
    on the oracle marginal (independent streams) must agree within
    `sigma_threshold` Welch standard errors.
    Returns:
        OracleReport
    """
    check_eta_scale(m_list, eta_scale)
    message = np.asarray(message if message is not None else [3 ** -0.5] * 3, dtype=np.float64)
    checks = []
    for m_out in m_list:
        deviation = 0.0
        for trial in range(trials):
            trial_message = random_pure_bloch(derive_stream(master_seed, STREAM_IDS['verify-oracle-message'], trial))
            emulated = _emulated_state(trial_message, m_out, eta_scale)
            oracle = gisin_massar_single_clone_marginal(trial_message, m_out)
            deviation = max(deviation, float(np.max(np.abs(emulated - oracle))))
        checks.append(OracleCheck('exact', int(m_out), 0, deviation, tolerance, deviation <= tolerance))
        if verbose:
            color = bcolors.OKGREEN if checks[-1].passed else bcolors.FAIL
            print(f'{color}[{get_clock_time()}] M={m_out}: max deviation {deviation:.3e} over {trials} messages{bcolors.ENDC}')
        emulated = _emulated_state(message, m_out, eta_scale)
        oracle = gisin_massar_single_clone_marginal(message, m_out)
        for shots in shots_grid:
            emulated_errors = np.array([run_state_instance(message, emulated, shots, derive_stream(master_seed, STREAM_IDS['verify-oracle'], i)).geodesic
                                        for i in range(instances)])
            oracle_errors = np.array([run_state_instance(message, oracle, shots, derive_stream(master_seed, STREAM_IDS['verify-oracle-marginal'], i)).geodesic
                                      for i in range(instances)])
            z = _welch_statistic(emulated_errors, oracle_errors)
            checks.append(OracleCheck('statistical', int(m_out), int(shots), z, sigma_threshold, z <= sigma_threshold))
            if verbose:
                color = bcolors.OKGREEN if checks[-1].passed else bcolors.FAIL
                print(f'{color}[{get_clock_time()}] M={m_out}, S={shots}: |z| = {z:.3f}{bcolors.ENDC}')
    return OracleReport(checks=checks)


# ====================================
# = driver
# ====================================
class Main:
    def __init__(self, config):
        self.config = config
        self.sweep_kwargs = dict(
            message=np.array(config.message),
            num_workers=config.num_workers,
            batch_size=config.batch_size,
            verbose=config.verbose,
        )

    def run(self):
        config = self.config
        if config.verbose:
            print(f'{bcolors.HEADER}[{get_clock_time()}] running {config.experiment} (seed {config.master_seed}){bcolors.ENDC}')
        runner = getattr(self, '_run_' + config.experiment.replace('-', '_'))
        records, summary = runner()
        paths = write_results(records, config)
        if config.verbose:
            print_run_debug_dict({**summary, **{f'{k} file': v for k, v in paths.items()}}, title=config.experiment)
        if isinstance(summary.get('passed'), bool) and not summary['passed']:
            raise OracleFailure(f'oracle verification failed (report in {paths["csv"]})')
        return records

    def _run_sweep_direct(self):
        c = self.config
        records = sweep('direct', [1], c.shots_grid, c.instances, c.master_seed, **self.sweep_kwargs)
        return records, {'points': len(records), 'instances': c.instances,
                         'final mean geodesic': records[-1].mean_geodesic}

    def _run_sweep_clone(self):
        c = self.config
        records = sweep('clone', c.m_values, c.shots_grid, c.instances, c.master_seed, **self.sweep_kwargs)
        return records, {'points': len(records), 'instances': c.instances, 'm_values': list(c.m_values)}

    def _run_converge_m(self):
        c = self.config
        records = []
        for shots in c.shots_grid:
            records += converge_in_m(c.m_values, shots, c.instances, c.master_seed, **self.sweep_kwargs)
        return records, {'points': len(records), 'shots_grid': list(c.shots_grid),
                         'mean geodesic at largest M': records[-1].mean_geodesic}

    def _run_breakeven(self):
        c = self.config
        kwargs = dict(self.sweep_kwargs, stream_name='breakeven')
        direct = sweep('direct', [1], c.shots_grid, c.instances, c.master_seed, **kwargs)
        clone = sweep('clone', c.m_values, c.shots_grid, c.instances, c.master_seed, **kwargs)
        if c.target_errors is not None:
            error_grid = list(c.target_errors)
        else:
            error_grid = {metric: default_error_grid(direct, clone, c.num_target_errors, metric) for metric in c.metrics}
        records = compute_breakeven(direct, clone, error_grid, metrics=tuple(c.metrics))
        unreachable = sum(not r.reachable for r in records)
        if c.verbose and unreachable > 0:
            print(f'{bcolors.WARNING}{unreachable} of {len(records)} target errors are unreachable on this grid{bcolors.ENDC}')
        reachable = [r.breakeven_m for r in records if r.reachable]
        return records, {'targets': len(records), 'unreachable': unreachable,
                         'max breakeven M': float(max(reachable)) if reachable else float('nan')}

    def _run_distribution(self):
        c = self.config
        m_out = c.m_values[0]
        per_point = c.instances_per_point or m_out * c.instances
        records = error_distribution(m_out, c.shots_grid, per_point, c.master_seed, **self.sweep_kwargs)
        return records, {'M': m_out, 'samples per point': per_point, 'samples': len(records),
                         'degenerate': sum(d.sample.degenerate for d in records)}

    def _run_ideal_fidelity(self):
        c = self.config
        records = ideal_fidelity_curve(c.n_in, list(range(c.n_in + 1, max(c.m_values) + 1)))
        return records, {'N': c.n_in, 'M max': max(c.m_values), 'fidelity at M max': records[-1].fidelity}

    def _run_verify_oracle(self):
        c = self.config
        report = verify_oracle_command(c.m_values, c.trials, c.master_seed,
                                       message=c.message,
                                       shots_grid=c.shots_grid,
                                       instances=c.instances,
                                       tolerance=c.tolerance,
                                       sigma_threshold=c.sigma_threshold,
                                       eta_scale=c.eta_scale,
                                       verbose=c.verbose)
        return report.checks, {'checks': len(report.checks), 'max deviation': report.max_deviation, 'passed': report.passed}


def main(argv=None):
    try:
        config = parse_config(argv)
        Main(config).run()
    except ConfigError as e:
        print(f'{bcolors.FAIL}{e}{bcolors.ENDC}', file=sys.stderr)
        return 1
    except OracleFailure as e:
        print(f'{bcolors.FAIL}{e}{bcolors.ENDC}', file=sys.stderr)
        return 2
    except ResultsIOError as e:
        print(f'{bcolors.FAIL}{e}{bcolors.ENDC}', file=sys.stderr)
        return 3
    return 0


if __name__ == '__main__':
    sys.exit(main())
