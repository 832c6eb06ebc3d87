"""
End-to-end protocol instances and the experiment drivers built on them:
direct-vs-clone sweeps, convergence in M, breakeven analysis, error-rate
distributions and the ideal fidelity curve.

Alice's preparation cost: direct transmission needs M * 3 * S_direct message
qubits (every receiver gets its own copies); the cloning node needs 3 * S_clone
regardless of M, since every cloning execution serves all M receivers.
"""

import math
from dataclasses import dataclass
from multiprocessing import Pool
import numpy as np
from qstate import (
    bloch_to_density,
    fidelity,
    geodesic_distance,
    extrapolate_to_sphere,
    as_bloch_vector,
)
from cloning import CloneParams, emulate_clone_state, optimal_fidelity
from tomography import sample_pauli_counts, reconstruct_state
from utils import (
    ConfigError,
    DomainError,
    STREAM_IDS,
    bcolors,
    derive_stream,
    get_clock_time,
    loglog_interpolate,
)

METHODS = ('direct', 'clone')
METRICS = ('geodesic', 'infidelity')
QUANTILE_LEVELS = (0.05, 0.5, 0.95)
DEFAULT_MESSAGE = np.ones(3) / np.sqrt(3)


@dataclass(frozen=True)
class ErrorSample:
    geodesic: float
    infidelity: float
    degenerate: bool


# zero-norm reconstructions carry no direction; they are scored as antipodal
MAX_ERROR = ErrorSample(geodesic=math.pi, infidelity=1.0, degenerate=True)


@dataclass(frozen=True)
class SweepRecord:
    method: str
    m_out: int
    shots_per_basis: int
    instances: int
    mean_geodesic: float
    mean_infidelity: float
    geodesic_quantiles: tuple
    infidelity_quantiles: tuple
    degenerate_count: int = 0

    def mean(self, metric):
        return self.mean_geodesic if metric == 'geodesic' else self.mean_infidelity

    def quantiles(self, metric):
        return self.geodesic_quantiles if metric == 'geodesic' else self.infidelity_quantiles


@dataclass(frozen=True)
class BreakevenRecord:
    metric: str
    target_error: float
    breakeven_m: float
    shots_direct_at_eps: float
    shots_clone_at_eps: float
    reachable: bool = True
    # clones already cheaper at the smallest simulated M; breakeven_m is only an upper bound
    below_grid: bool = False

    @property
    def breakeven_m_ceil(self):
        return math.ceil(self.breakeven_m) if self.reachable else None


@dataclass(frozen=True)
class DistributionSample:
    m_out: int
    shots_per_basis: int
    instance: int
    sample: ErrorSample


@dataclass(frozen=True)
class FidelityPoint:
    n_in: int
    m_out: int
    eta: float
    fidelity: float


# ====================================
# = single instances
# ====================================
def score_counts(message, counts):
    """
    Reconstruct from counts, extrapolate to the sphere and score against the message.

    Both metrics use the extrapolated (pure) reconstruction.
    """
    estimate = reconstruct_state(counts)
    extrapolated = extrapolate_to_sphere(estimate.projected)
    if extrapolated.degenerate:
        return MAX_ERROR
    geodesic = geodesic_distance(message, extrapolated.point)
    infidelity = 1.0 - fidelity(bloch_to_density(message), bloch_to_density(extrapolated.point))
    return ErrorSample(geodesic=geodesic, infidelity=float(np.clip(infidelity, 0.0, 1.0)), degenerate=False)


def run_state_instance(message, state, shots, stream):
    """Tomography of `shots` copies per basis of the received `state`, scored against `message`."""
    counts = sample_pauli_counts(state, shots, stream)
    return score_counts(message, counts)


def _pure_message(message):
    message = as_bloch_vector(message)
    if abs(np.linalg.norm(message) - 1) > 1e-9:
        raise DomainError(f'message must be a pure state (norm 1), got norm {np.linalg.norm(message)}')
    return message


def run_direct_instance(message, shots, stream):
    message = _pure_message(message)
    return run_state_instance(message, bloch_to_density(message), shots, stream)


def run_clone_instance(message, m_out, shots, stream):
    """
    One receiver's view of the cloning protocol: S clones per basis, each from a
    separate 1 -> M cloning execution.
    """
    message = _pure_message(message)
    if m_out < 2:
        raise DomainError(f'clone pipeline needs M >= 2, got {m_out}')
    state = emulate_clone_state(message, CloneParams.create(1, m_out))
    return run_state_instance(message, state, shots, stream)


def received_state(method, message, m_out):
    if method == 'direct':
        return bloch_to_density(message)
    return emulate_clone_state(message, CloneParams.create(1, m_out))


# ====================================
# = batched execution
# ====================================
def _run_batch(task):
    """
    Run instances [start, stop) of one grid point.

    Top-level so it can be shipped to pool workers.
    Returns:
        tuple: (geodesic, infidelity, degenerate) arrays of length stop - start.
    """
    method, message, m_out, shots, master_seed, stream_id, start, stop = task
    message = np.asarray(message, dtype=np.float64)
    state = received_state(method, message, m_out)
    geodesic = np.empty(stop - start)
    infidelity = np.empty(stop - start)
    degenerate = np.zeros(stop - start, dtype=bool)
    for i, instance in enumerate(range(start, stop)):
        stream = derive_stream(master_seed, stream_id, instance)
        sample = run_state_instance(message, state, shots, stream)
        geodesic[i] = sample.geodesic
        infidelity[i] = sample.infidelity
        degenerate[i] = sample.degenerate
    return geodesic, infidelity, degenerate


def _run_points(points, instances, master_seed, stream_name, message, num_workers=1, batch_size=10000):
    """
    Evaluate `instances` instances at every (method, M, S) point.

    Instance i of every point uses stream (master_seed, stream id, i); batches
    are reassembled in index order, so results do not depend on num_workers.
    Returns:
        list: one (geodesic, infidelity, degenerate) triple of arrays per point.
    """
    assert batch_size >= 1, f'batch_size must be positive, got {batch_size}'
    stream_id = STREAM_IDS[stream_name]
    message = tuple(float(c) for c in message)
    tasks = []
    owners = []
    for point_idx, (method, m_out, shots) in enumerate(points):
        for start in range(0, instances, batch_size):
            stop = min(start + batch_size, instances)
            tasks.append((method, message, int(m_out), int(shots), int(master_seed), stream_id, start, stop))
            owners.append(point_idx)
    if num_workers > 1 and len(tasks) > 1:
        with Pool(num_workers) as pool:
            results = pool.map(_run_batch, tasks)
    else:
        results = [_run_batch(task) for task in tasks]
    per_point = [[] for _ in points]
    for owner, result in zip(owners, results):
        per_point[owner].append(result)
    return [tuple(np.concatenate([r[k] for r in chunks]) for k in range(3)) for chunks in per_point]


def aggregate_samples(method, m_out, shots, geodesic, infidelity, degenerate):
    return SweepRecord(
        method=method,
        m_out=int(m_out),
        shots_per_basis=int(shots),
        instances=len(geodesic),
        mean_geodesic=float(np.mean(geodesic)),
        mean_infidelity=float(np.mean(infidelity)),
        geodesic_quantiles=tuple(float(q) for q in np.quantile(geodesic, QUANTILE_LEVELS)),
        infidelity_quantiles=tuple(float(q) for q in np.quantile(infidelity, QUANTILE_LEVELS)),
        degenerate_count=int(np.sum(degenerate)),
    )


def _check_grid(name, values, minimum=1):
    if values is None or len(values) == 0:
        raise ConfigError(f'{name} must not be empty')
    for v in values:
        if int(v) != v or v < minimum:
            raise ConfigError(f'{name} must contain integers >= {minimum}, got {v}')


# ====================================
# = experiments
# ====================================
def sweep(method, m_values, shots_grid, instances, master_seed,
          message=DEFAULT_MESSAGE,
          num_workers=1,
          batch_size=10000,
          stream_name=None,
          verbose=False):
    """
    Mean and quantile errors over a (M, S) grid for one transmission method.

    Args:
        method (str): 'direct' or 'clone'. Direct ignores m_values (M = 1).
        m_values (list): clone counts M >= 2.
        shots_grid (list): shots per basis.
        instances (int): independent instances per grid point.
        master_seed (int): root of every instance stream.
        stream_name (str): key of utils.STREAM_IDS; defaults to 'sweep-<method>'.
    Returns:
        list[SweepRecord]: ordered by M, then S.
    """
    if method not in METHODS:
        raise ConfigError(f'unknown method {method}, expected one of {METHODS}')
    _check_grid('shots_grid', shots_grid)
    if instances < 1:
        raise ConfigError(f'instances must be positive, got {instances}')
    if method == 'direct':
        m_values = [1]
    else:
        _check_grid('m_values', m_values, minimum=2)
    stream_name = stream_name or f'sweep-{method}'
    message = _pure_message(message)
    points = [(method, int(m), int(s)) for m in m_values for s in shots_grid]
    if verbose:
        print(f'{bcolors.HEADER}[{get_clock_time()}] {stream_name}: {len(points)} points x {instances} instances{bcolors.ENDC}')
    results = _run_points(points, instances, master_seed, stream_name, message, num_workers, batch_size)
    records = [aggregate_samples(method, m, s, *arrays) for (_, m, s), arrays in zip(points, results)]
    degenerate = sum(r.degenerate_count for r in records)
    if verbose and degenerate > 0:
        print(f'{bcolors.WARNING}{degenerate} degenerate reconstructions scored as maximal error{bcolors.ENDC}')
    return records


def converge_in_m(m_grid, shots, instances, master_seed, **kwargs):
    """Clone pipeline at fixed shots per basis, sweeping M."""
    kwargs.setdefault('stream_name', 'converge-m')
    return sweep('clone', m_grid, [shots], instances, master_seed, **kwargs)


def _curve(records, metric):
    records = sorted(records, key=lambda r: r.shots_per_basis)
    return np.array([r.shots_per_basis for r in records], dtype=np.float64), np.array([r.mean(metric) for r in records])


def _unreachable(metric, eps, shots_direct=np.nan):
    return BreakevenRecord(metric=metric, target_error=float(eps), breakeven_m=np.nan,
                           shots_direct_at_eps=float(shots_direct), shots_clone_at_eps=np.nan, reachable=False)


def _breakeven_at(metric, eps, direct_curve, clone_curves):
    shots_direct = loglog_interpolate(*direct_curve, eps)
    if not np.isfinite(shots_direct):
        return _unreachable(metric, eps)
    m_values = sorted(clone_curves)
    log_m = np.log(np.array(m_values, dtype=np.float64))
    log_clone = np.array([np.log(loglog_interpolate(*clone_curves[m], eps)) for m in m_values])
    # h(M) = log S_clone(M) - log(M S_direct); decreasing through zero at the breakeven
    h = log_clone - log_m - np.log(shots_direct)
    for i in range(len(m_values)):
        if not np.isfinite(h[i]):
            break
        if h[i] <= 0:
            if i == 0:
                return BreakevenRecord(metric, float(eps), float(m_values[0]), float(shots_direct), float(np.exp(log_clone[0])),
                                       below_grid=bool(h[0] < 0))
            w = h[i-1] / (h[i-1] - h[i])
            log_m_star = log_m[i-1] + w * (log_m[i] - log_m[i-1])
            log_shots_clone = log_clone[i-1] + w * (log_clone[i] - log_clone[i-1])
            return BreakevenRecord(metric, float(eps), float(np.exp(log_m_star)), float(shots_direct), float(np.exp(log_shots_clone)))
    return _unreachable(metric, eps, shots_direct)


def compute_breakeven(direct_records, clone_records, error_grid, metrics=METRICS):
    """
    Receiver count M* at which both methods cost Alice the same number of
    message qubits for a target error eps.

    S_direct(eps) and S_clone(eps, M) come from log-log linear interpolation of
    the mean-error curves; M* solves S_clone(eps, M*) = M* S_direct(eps) by
    log-log interpolation across the M grid.
    Args:
        direct_records (list[SweepRecord]): one direct curve.
        clone_records (list[SweepRecord]): clone curves for several M.
        error_grid (list or dict): target errors, or a metric -> list mapping.
        metrics (tuple): metrics to analyse.
    Returns:
        list[BreakevenRecord]: sorted by metric, then ascending target error.
    """
    if len(direct_records) == 0 or len(clone_records) == 0:
        raise ConfigError('breakeven analysis needs direct and clone records')
    if any(r.method != 'direct' for r in direct_records) or any(r.method != 'clone' for r in clone_records):
        raise ConfigError('direct_records and clone_records must come from the direct and clone sweeps')
    records = []
    for metric in metrics:
        eps_values = error_grid[metric] if isinstance(error_grid, dict) else error_grid
        if eps_values is None or len(eps_values) == 0:
            raise ConfigError(f'error grid for {metric} must not be empty')
        direct_curve = _curve(direct_records, metric)
        clone_curves = {}
        for m_out in sorted(set(r.m_out for r in clone_records)):
            clone_curves[m_out] = _curve([r for r in clone_records if r.m_out == m_out], metric)
        for eps in sorted(eps_values):
            records.append(_breakeven_at(metric, eps, direct_curve, clone_curves))
    return records


def default_error_grid(direct_records, clone_records, num, metric):
    """
    Log-spaced target errors inside the range reached by the direct curve and
    by every clone curve.
    """
    _, direct = _curve(direct_records, metric)
    clone_by_m = {}
    for r in clone_records:
        clone_by_m.setdefault(r.m_out, []).append(r.mean(metric))
    lo = max([direct.min()] + [min(v) for v in clone_by_m.values()])
    hi = min([direct.max()] + [max(v) for v in clone_by_m.values()])
    if not (0 < lo < hi):
        raise ConfigError(f'direct and clone {metric} curves do not overlap; widen shots_grid')
    # stay strictly inside the sampled range
    lo, hi = lo * 1.001, hi / 1.001
    return [float(v) for v in np.geomspace(lo, hi, num)]


def error_distribution(m_out, shots_grid, instances_per_point, master_seed,
                       message=DEFAULT_MESSAGE,
                       num_workers=1,
                       batch_size=10000,
                       verbose=False):
    """
    Every individual ErrorSample of the clone pipeline at each shots value.

    Returns:
        list[DistributionSample]: ordered by S, then instance index.
    """
    _check_grid('shots_grid', shots_grid)
    if m_out < 2:
        raise ConfigError(f'distribution needs M >= 2, got {m_out}')
    if instances_per_point < 1:
        raise ConfigError(f'instances must be positive, got {instances_per_point}')
    message = _pure_message(message)
    points = [('clone', int(m_out), int(s)) for s in shots_grid]
    if verbose:
        print(f'{bcolors.HEADER}[{get_clock_time()}] distribution: M={m_out}, {len(points)} points x {instances_per_point} instances{bcolors.ENDC}')
    results = _run_points(points, instances_per_point, master_seed, 'distribution', message, num_workers, batch_size)
    samples = []
    for (_, m, s), (geodesic, infidelity, degenerate) in zip(points, results):
        for i in range(len(geodesic)):
            sample = ErrorSample(geodesic=float(geodesic[i]), infidelity=float(infidelity[i]), degenerate=bool(degenerate[i]))
            samples.append(DistributionSample(m_out=m, shots_per_basis=s, instance=i, sample=sample))
    return samples


def summarize_distribution(samples):
    """Aggregate a distribution table back into one SweepRecord per shots value."""
    records = []
    for m_out, shots in sorted(set((d.m_out, d.shots_per_basis) for d in samples)):
        rows = [d.sample for d in samples if d.m_out == m_out and d.shots_per_basis == shots]
        records.append(aggregate_samples('clone', m_out, shots,
                                         np.array([r.geodesic for r in rows]),
                                         np.array([r.infidelity for r in rows]),
                                         np.array([r.degenerate for r in rows])))
    return records


def ideal_fidelity_curve(n_in, m_values):
    """Optimal clone fidelity and shrinking factor for each M."""
    _check_grid('m_values', m_values, minimum=n_in)
    return [FidelityPoint(n_in=int(n_in), m_out=int(m), eta=CloneParams.create(n_in, m).eta,
                          fidelity=optimal_fidelity(n_in, m)) for m in m_values]
