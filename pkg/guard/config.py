"""
Run configuration

A run is described by one nested JSON document. DEFAULTS holds every
accepted key; a config file and --set overrides are merged over it and
any key the defaults do not know is rejected with its full dotted path.
Sections listed in OPEN_SECTIONS take free-form keys.
"""
import copy
import hashlib
import json
import os
import torch

DEFAULTS = {
    'seed': 0,
    'seeds': [0],
    'output_dir': 'out',
    'dataset': {
        'name': 'tiny-digits',
        'params': {},
    },
    'model': {
        'kind': 'convnet-s',
        'widths': None,
        'channels': [16, 32],
        'activation': 'relu',
        'batch_norm': True,
    },
    'regularizer': {
        'lam': 1.0,
        'h': None,
        'h_scale': 0.1,
        'lam_g': 0.0,
        'zero_grad_policy': 'zero',
        'space': 'input',
        'stencil': 'forward',
        'direction_from_synthetic': False,
    },
    'attack': {
        'family': 'pgd',
        'norm': 'linf',
        'eps': 1.0 / 255,
        'steps': 10,
        'alpha': None,
        'restarts': 1,
        'momentum': 1.0,
        'c': 1e-5,
        'cw_iters': 100,
        'cw_lr': 0.01,
        'queries': 100,
        'p_init': 0.05,
        'lower': 0.0,
        'upper': 1.0,
    },
    'distill': {
        'method': 'squeeze-recover-relabel',
        'ipc': 10,
        'outer_steps': 10,
        'inner_steps': 10,
        'lr_syn': 0.1,
        'lr_net': 0.01,
        'syn_steps': 1,
        'net_steps': 1,
        'syn_momentum': 0.5,
        'net_momentum': 0.5,
        'batch_real': 64,
        'distance': 'layerwise-cosine',
        'squeeze_epochs': 30,
        'squeeze_lr': 0.025,
        'squeeze_batch_size': 64,
        'squeeze_momentum': 0.9,
        'decay_epochs': None,
        'alpha_tv': 1e-3,
        'alpha_l2': 1e-4,
        'alpha_bn': 0.01,
        'recover_iters': 200,
        'recover_lr': 0.1,
        'relabel': True,
    },
    'train': {
        'objective': 'plain',
        'epochs': 30,
        'lr': 0.01,
        'momentum': 0.9,
        'batch_size': 64,
        'decay_epochs': None,
    },
    'evaluation': {
        'attacks': [
            {'family': 'none'},
            {'family': 'fgsm', 'eps': 8.0 / 255},
            {'family': 'pgd', 'eps': 8.0 / 255},
        ],
        'epochs': 100,
        'lr': 0.01,
        'batch_size': 32,
        'curvature_samples': 20,
        'label': None,
    },
    'profile': {
        'k': 3,
        'samples': 50,
        'iters': 200,
        'tol': 1e-4,
        'h': 1e-4,
    },
    'theory': {
        'trials': 1000,
        'dim': 4,
        'rho': 0.1,
        'samples': 1000,
        'distilled_points': 10,
    },
    'bench': {
        'iterations': 5,
        'warmup': 2,
        'batch_size': 64,
        'adv_steps': 10,
        'min_seconds': 1e-4,
    },
    'inputs': {
        'teacher': None,
        'synthetic': None,
        'model': None,
    },
    'report': {
        'runs': [],
        'ablation_runs': [],
    },
}

OPEN_SECTIONS = ['dataset.params']

THREADS_VARIABLE = 'GUARD_THREADS'
LOCATION_SECTIONS = ['output_dir', 'inputs', 'report']


class ConfigError(ValueError):
    """
    Raised for an invalid configuration; names the offending dotted key path when there is one

    Attributes:
        key: (str) dotted key path (None when the error is not about one key)
    """
    def __init__(self, message, key=None):
        super().__init__(message if key is None else '%s: %s' % (key, message))
        self.key = key


def _merge(base, update, path):
    for key, value in update.items():
        dotted = '%s.%s' % (path, key) if path else key
        if key not in base:
            raise ConfigError('unknown config key', dotted)
        if isinstance(base[key], dict) and dotted not in OPEN_SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError('expected a section, got %r' % (value,), dotted)
            _merge(base[key], value, dotted)
        elif dotted in OPEN_SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError('expected a section, got %r' % (value,), dotted)
            base[key].update(copy.deepcopy(value))
        else:
            base[key] = copy.deepcopy(value)


def parse_override(text):
    """
    Splits a 'a.b.c=value' override; the value is read as JSON, falling back to a plain string
    :return: (list[str], object) key path and value
    """
    if '=' not in text:
        raise ConfigError('override \'%s\' must look like key.path=value' % text)
    key, raw = text.split('=', 1)
    if not key or any(not part for part in key.split('.')):
        raise ConfigError('override \'%s\' has an empty key component' % text)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split('.'), value


def _nest(parts, value):
    nested = value
    for part in reversed(parts):
        nested = {part: nested}
    return nested


def load_config(path=None, overrides=()):
    """
    Builds the effective configuration
    :param path: (str) JSON config file (None for defaults only)
    :param overrides: (list[str]) 'a.b.c=value' overrides applied after the file
    :return: (dict) effective configuration
    """
    config = copy.deepcopy(DEFAULTS)
    if path is not None:
        if not os.path.isfile(path):
            raise FileNotFoundError('Config file %s not found.' % path)
        with open(path) as f:
            try:
                document = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError('malformed JSON in %s: %s' % (path, e))
        if not isinstance(document, dict):
            raise ConfigError('config file %s must hold a JSON object' % path)
        _merge(config, document, '')
    for override in overrides:
        parts, value = parse_override(override)
        _merge(config, _nest(parts, value), '')
    return config


def canonical_json(document):
    return json.dumps(document, sort_keys=True, separators=(',', ':'))


def config_hash(config):
    """
    First 16 hex characters of the SHA-256 of the canonical JSON form
    """
    return hashlib.sha256(canonical_json(config).encode('utf-8')).hexdigest()[:16]


def dataset_hash(config):
    return config_hash({'dataset': config['dataset'], 'seed': config['seed']})


def run_hash(config):
    """
    Hash of the experiment a config describes; the sections locating files are left out
    """
    return config_hash({key: value for key, value in config.items() if key not in LOCATION_SECTIONS})


def apply_threads():
    """
    Caps torch intra-op threads from GUARD_THREADS when it is set
    :return: (int) thread count in effect
    """
    value = os.environ.get(THREADS_VARIABLE)
    if value:
        try:
            threads = int(value)
        except ValueError:
            raise ConfigError('must be a positive integer, got %r' % value, THREADS_VARIABLE)
        if threads < 1:
            raise ConfigError('must be a positive integer, got %r' % value, THREADS_VARIABLE)
        torch.set_num_threads(threads)
    return torch.get_num_threads()
