import os
import datetime
import numpy as np
from numba import njit
import yaml

# ===============================================
# = errors
# ===============================================
class QubitDistributionError(Exception):
    pass

class DomainError(QubitDistributionError, ValueError):
    """A state, count table or clone parameter violates its preconditions."""

class DegenerateInputError(DomainError):
    pass

class ConfigError(QubitDistributionError, ValueError):
    """Invalid command line or configuration file."""

class ResultsIOError(QubitDistributionError, OSError):
    pass

class OracleFailure(QubitDistributionError):
    pass

# ===============================================
# = config
# ===============================================
def get_config(config_path=None):
    if config_path is None:
        this_file_dir = os.path.dirname(os.path.abspath(__file__))
        config_path = os.path.join(this_file_dir, 'configs/config.yaml')
    if not os.path.exists(config_path):
        raise ConfigError(f'config file does not exist ({config_path})')
    with open(config_path, 'r') as f:
        try:
            config = yaml.load(f, Loader=yaml.FullLoader)
        except yaml.YAMLError as e:
            raise ConfigError(f'malformed config file {config_path}: {e}') from e
    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ConfigError(f'config file {config_path} must contain a mapping at the top level')
    return config

# ===============================================
# = random streams
# ===============================================
# never renumber: changing an id changes every stream of that experiment
STREAM_IDS = {
    'sweep-direct': 1,
    'sweep-clone': 2,
    'converge-m': 3,
    'breakeven': 4,
    'distribution': 5,
    'verify-oracle': 6,
    'ideal-fidelity': 7,
    'verify-oracle-marginal': 8,
    'verify-oracle-message': 9,
}

def derive_stream(master_seed, stream_id, instance_index):
    """
    Independent generator for one protocol instance.

    The stream is PCG64 seeded by SeedSequence(entropy=master_seed,
    spawn_key=(stream_id, instance_index)), so it depends only on these three
    integers and not on the order in which instances are executed.
    """
    if master_seed is None or master_seed < 0:
        raise ConfigError(f'master seed must be a non-negative integer, got {master_seed}')
    seed_seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(stream_id), int(instance_index)))
    return np.random.Generator(np.random.PCG64(seed_seq))

# ===============================================
# = numerics
# ===============================================
@njit(cache=True, fastmath=True)
def clamped_arccos(cos_theta):
    # dot products of unit vectors can leave [-1, 1] by rounding
    if cos_theta > 1:
        cos_theta = 1.0
    elif cos_theta < -1:
        cos_theta = -1.0
    return np.arccos(cos_theta)

def loglog_interpolate(xs, ys, y_target):
    """
    Invert a sampled curve y(x) at y_target by piecewise-linear interpolation in
    (log x, log y) space.

    The segments are scanned in order of the samples and the first segment that
    brackets y_target is used, so a noisy, non-monotone curve still gives a
    single answer.
    Args:
        xs (array): positive abscissae, ascending.
        ys (array): positive ordinates.
        y_target (float): positive value to locate.
    Returns:
        float: interpolated x, or np.nan if no segment brackets y_target.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    assert xs.shape == ys.shape, f'got {xs.shape} for xs and {ys.shape} for ys'
    if y_target <= 0 or len(xs) == 0 or np.any(xs <= 0) or np.any(ys <= 0):
        return np.nan
    log_x, log_y, log_t = np.log(xs), np.log(ys), np.log(y_target)
    if len(xs) == 1:
        return float(xs[0]) if log_y[0] == log_t else np.nan
    for i in range(len(xs) - 1):
        lo, hi = min(log_y[i], log_y[i+1]), max(log_y[i], log_y[i+1])
        if lo <= log_t <= hi:
            if log_y[i+1] == log_y[i]:
                return float(xs[i])
            alpha = (log_t - log_y[i]) / (log_y[i+1] - log_y[i])
            return float(np.exp(log_x[i] + alpha * (log_x[i+1] - log_x[i])))
    return np.nan

def log_spaced_ints(start_exp, stop_exp, per_decade):
    """Rounded 10**k grid with per_decade points per decade, duplicates removed."""
    num = int(round((stop_exp - start_exp) * per_decade)) + 1
    values = np.round(np.logspace(start_exp, stop_exp, num)).astype(np.int64)
    return sorted(set(int(v) for v in values))

# ===============================================
# = console output
# ===============================================
class bcolors:
    HEADER = '\033[95m'
    OKBLUE = '\033[94m'
    OKCYAN = '\033[96m'
    OKGREEN = '\033[92m'
    WARNING = '\033[93m'
    FAIL = '\033[91m'
    ENDC = '\033[0m'
    BOLD = '\033[1m'
    UNDERLINE = '\033[4m'

def get_clock_time(milliseconds=False):
    curr_time = datetime.datetime.now()
    if milliseconds:
        return f'{curr_time.hour}:{curr_time.minute}:{curr_time.second}.{curr_time.microsecond // 1000}'
    else:
        return f'{curr_time.hour}:{curr_time.minute}:{curr_time.second}'

def print_run_debug_dict(debug_dict, title='Run summary'):
    print('\n' + '#' * 40)
    print(f'# {title}:')
    max_key_length = max(len(str(k)) for k in debug_dict.keys())
    for k, v in debug_dict.items():
        if isinstance(v, bool):
            print(f'# {k:<{max_key_length}}: {v}')
        elif isinstance(v, float):
            print(f'# {k:<{max_key_length}}: {v:.05e}')
        elif isinstance(v, list) and all(isinstance(x, (int, float)) for x in v):
            print(f'# {k:<{max_key_length}}: {np.array(v).round(5)}')
        else:
            print(f'# {k:<{max_key_length}}: {v}')
    print('#' * 40 + '\n')
