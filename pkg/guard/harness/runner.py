"""
Subcommands of the guard command line

Every subcommand reads the effective configuration, writes its artifacts
into the output directory next to config.json (the effective config) and
embeds the run hash in each of them. When a subcommand fails, the files it
wrote are removed again and the exit status is 1 (2 for config errors).
"""
import os
import shutil
import numpy as np
import pandas as pd
from guard.config import ConfigError, load_config, run_hash, dataset_hash, apply_threads
from guard.tensors import Rng, ParseError
from guard.datasets import load_dataset
from guard.models import ModelSpec, Model, init_model, get_objective, Learner, DivergenceError
from guard.curvature import RegularizerConfig, profile
from guard.attacks import AttackSpec, attack_dataset
from guard.distill import DistillConfig, SyntheticSet, dc_guard, squeeze, recover, relabel, evaluate
from guard.distill import attack_labels
from guard.theory import QuadModel, QuadraticFamily, LogisticFamily, BoundReport
from guard.theory import per_sample_bound, expectation_bound, jensen_check, distilled_bound_slack
from guard.harness.report import ExperimentReport, robustness_table, ablation_table, write_json, write_csv
from guard.harness.report import print_experiment_report, print_bound_report
from guard.harness.bench import bench_overhead

SUBCOMMANDS = ['squeeze', 'recover', 'relabel', 'distill-dc', 'train', 'attack', 'eval', 'profile',
               'verify-theory', 'bench-overhead', 'report']

CONFIG_FILE = 'config.json'
TEACHER_FILE = 'teacher.gmdl'
RECOVERED_FILE = 'recovered.gset'
SYNTHETIC_FILE = 'synthetic.gset'
MODEL_FILE = 'model.gmdl'
JENSEN_TOLERANCE = 1e-10


class Run:
    """
    State of one subcommand invocation

    Attributes:
        config:       (dict) effective configuration
        out:          (str) output directory
        config_hash:  (str) run hash of the configuration (file locations left out)
        dataset_hash: (str) hash of the dataset selection
        rng:          (Rng) root stream of the run
        written:      (list[str]) files and directories created so far
        verbose:      (bool) progress bars and status lines
    """
    def __init__(self, config, out, verbose=True):
        self.config = config
        self.out = out
        self.config_hash = run_hash(config)
        self.dataset_hash = dataset_hash(config)
        self.rng = Rng(config['seed'])
        self.written = []
        self.verbose = verbose
        self._data = None

    def data(self):
        """
        :return: (Dataset, Dataset) train and test splits of the configured dataset
        """
        if self._data is None:
            section = self.config['dataset']
            self._data = load_dataset(section['name'], section['params'], Rng(self.config['seed'], 'dataset'))
            if self.verbose:
                self._data[0].print_stats()
        return self._data

    def model_spec(self):
        train, _ = self.data()
        section = dict(self.config['model'], input_shape=train.input_shape, num_classes=train.num_classes)
        try:
            return ModelSpec.from_dict(section)
        except AssertionError as e:
            raise ConfigError(str(e), 'model')

    def regularizer(self):
        return RegularizerConfig.from_dict(self.config['regularizer'])

    def attack(self):
        return AttackSpec.from_dict(self.config['attack'])

    def evaluation_attacks(self):
        return [AttackSpec.from_dict(section) for section in self.config['evaluation']['attacks']]

    def distill_config(self):
        return DistillConfig.from_dict(self.config['distill'], self.config['regularizer'], self.config['attack'])

    def header(self):
        return {'config_hash': self.config_hash, 'dataset_hash': self.dataset_hash, 'seed': self.config['seed']}

    def path(self, name):
        """
        Output path of an artifact, remembered for cleanup
        """
        path = os.path.join(self.out, name)
        if not os.path.exists(path):
            self.written.append(path)
        return path

    def input_path(self, key, default):
        """
        Location of an input artifact: inputs.<key> when set, else default in the output directory
        """
        path = self.config['inputs'][key] or os.path.join(self.out, default)
        if not os.path.isfile(path):
            raise FileNotFoundError('%s not found. Set inputs.%s or run the step that writes it first.' % (path, key))
        return path

    def write_frame(self, frame, name):
        frame = frame.copy()
        frame['config_hash'] = self.config_hash
        write_csv(frame, self.path(name))

    def cleanup(self):
        for path in reversed(self.written):
            if os.path.isdir(path):
                shutil.rmtree(path, ignore_errors=True)
            elif os.path.exists(path):
                os.remove(path)
        self.written = []


def _loss_frame(curve):
    return pd.DataFrame({'epoch': list(range(1, len(curve) + 1)), 'loss': curve})


def _squeeze(run):
    train, test = run.data()
    cfg = run.distill_config()
    teacher = squeeze(train, run.model_spec(), cfg, run.rng.spawn('squeeze'), verbose=run.verbose)
    teacher.save_model(run.path(TEACHER_FILE), dict(run.header(), method=cfg.method))
    run.write_frame(_loss_frame(teacher.loss_curve), 'squeeze_loss.csv')
    print('Teacher test accuracy: %.2f%%' % (teacher.accuracy(test) * 100))
    print('Wrote teacher to %s' % os.path.join(run.out, TEACHER_FILE))


def _write_synthetic(run, synthetic, name, trace_name):
    synthetic.provenance.update(run.header())
    synthetic.save(run.path(name))
    if trace_name is not None and synthetic.trace is not None:
        run.write_frame(synthetic.trace, trace_name)
    if len(synthetic.inputs.shape) == 4:
        synthetic.dump_images(run.path(os.path.splitext(name)[0] + '_images'))
    print('Wrote synthetic set to %s' % os.path.join(run.out, name))


def _recover(run):
    cfg = run.distill_config()
    if cfg.is_gradient_matching:
        raise ConfigError('recover needs a squeeze-recover-relabel method, got %s' % cfg.method, 'distill.method')
    teacher, _ = Model.load_model(run.input_path('teacher', TEACHER_FILE))
    synthetic = recover(teacher, cfg.ipc, cfg, run.rng.spawn('recover'), verbose=run.verbose)
    _write_synthetic(run, synthetic, RECOVERED_FILE, 'recover_trace.csv')


def _relabel(run):
    cfg = run.distill_config()
    teacher, _ = Model.load_model(run.input_path('teacher', TEACHER_FILE))
    synthetic = SyntheticSet.load(run.input_path('synthetic', RECOVERED_FILE))
    if cfg.relabel:
        synthetic = relabel(teacher, synthetic)
    _write_synthetic(run, synthetic, SYNTHETIC_FILE, None)


def _distill_dc(run):
    train, _ = run.data()
    cfg = run.distill_config()
    if not cfg.is_gradient_matching:
        raise ConfigError('distill-dc needs dc-guard or dc-plain, got %s' % cfg.method, 'distill.method')
    synthetic = dc_guard(train, run.model_spec(), cfg, run.rng.spawn('distill'), verbose=run.verbose)
    _write_synthetic(run, synthetic, SYNTHETIC_FILE, 'distill_trace.csv')


def _train(run):
    train, test = run.data()
    section = run.config['train']
    objective = get_objective(section['objective'], regularizer=run.regularizer(), attack=run.attack())
    learner = Learner(objective, epochs=section['epochs'], lr=section['lr'], momentum=section['momentum'],
                      batch_size=section['batch_size'], decay_epochs=section['decay_epochs'], verbose=run.verbose)
    model = learner.fit(init_model(run.model_spec(), run.rng.spawn('init')), train, run.rng.spawn('train'))
    model.save_model(run.path(MODEL_FILE), dict(run.header(), objective=objective.nickname))
    run.write_frame(_loss_frame(model.loss_curve), 'train_loss.csv')
    print('Model test accuracy: %.2f%%' % (model.accuracy(test) * 100))
    print('Wrote model to %s' % os.path.join(run.out, MODEL_FILE))


def _attack(run):
    _, test = run.data()
    model, _ = Model.load_model(run.input_path('model', MODEL_FILE))
    attacks = run.evaluation_attacks()
    frames, summary = [], []
    attack_rng = run.rng.spawn('attack')
    for attack, label in zip(attacks, attack_labels(attacks)):
        if run.verbose:
            print('Attacking with %s...' % label)
        frame, violations = attack_dataset(model, test, attack, attack_rng, verbose=run.verbose)
        frame.insert(0, 'attack', label)
        frames.append(frame)
        summary.append(dict({'attack': label, 'robust_accuracy': float(frame['robust'].mean()) if len(frame) else 0.0},
                            **violations))
        print('\t%s Robust Accuracy:\t%.2f%%' % (label, summary[-1]['robust_accuracy'] * 100))
    run.write_frame(pd.concat(frames, ignore_index=True), 'attack_results.csv')
    run.write_frame(pd.DataFrame(summary, columns=['attack', 'robust_accuracy', 'ball', 'range']),
                    'attack_summary.csv')


def _eval(run):
    _, test = run.data()
    section = run.config['evaluation']
    synthetic = SyntheticSet.load(run.input_path('synthetic', SYNTHETIC_FILE))
    spec = run.model_spec()
    attacks = run.evaluation_attacks()
    run.path('eval')
    for seed in run.config['seeds']:
        report = evaluate(synthetic, spec, test, attacks, section['epochs'], Rng(seed, 'evaluate'),
                          lr=section['lr'], batch_size=section['batch_size'],
                          curvature_samples=section['curvature_samples'], config_hash=run.config_hash,
                          dataset_hash=run.dataset_hash, label=section['label'], verbose=run.verbose)
        report.save(run.path(os.path.join('eval', 'seed-%d' % seed)))
        print_experiment_report(report)


def _profile(run):
    _, test = run.data()
    section = run.config['profile']
    model, _ = Model.load_model(run.input_path('model', MODEL_FILE))
    n = min(section['samples'], len(test))
    curvature = profile(model, test.inputs[:n], test.hard_labels()[:n], k=section['k'], iters=section['iters'],
                        tol=section['tol'], h=section['h'], rng=run.rng.spawn('profile'), verbose=run.verbose)
    run.write_frame(curvature.table, 'profile.csv')
    write_json(run.path('profile.json'), {
        'config_hash': run.config_hash,
        'samples': n,
        'median_lambda1': curvature.median_lambda1() if n else None,
        'converged_fraction': curvature.converged_fraction,
    })
    print('Median lambda1 over %d samples: %.6g' % (n, curvature.median_lambda1() if n else float('nan')))


def _numpy(rng, *shape):
    return rng.normal(*shape).numpy()


def _random_symmetric(rng, d):
    a = _numpy(rng, d, d)
    return 0.5 * (a + a.T)


def per_sample_checks(report, trials, d, rho, rng):
    """
    Curvature bound against the exact trust-region maximum on random quadratic models
    """
    rows, literal, negative = [], 0, 0
    for t in range(trials):
        trial_rng = rng.spawn('trial', t)
        q = QuadModel(float(_numpy(trial_rng, 1)[0]), _numpy(trial_rng, d), _random_symmetric(trial_rng, d), rho)
        result = per_sample_bound(q)
        literal += result['violated']
        negative += result['lambda1'] < 0
        rows.append({'index': t, 'lhs': result['exact'], 'rhs': result['clamped_bound'],
                     'slack': result['clamped_bound'] - result['exact'], 'lambda1': result['lambda1'],
                     'violated': False})
    return report.add('per-sample', rows, summary={
        'trials': trials,
        'negative_lambda1': int(negative),
        'literal_violations_negative_lambda1': int(literal),
    })


def _convex_family(rng, d, t):
    if t % 2 == 0:
        return LogisticFamily(_numpy(rng, d), b=float(_numpy(rng, 1)[0]), y=1 if t % 4 == 0 else -1)
    a = _numpy(rng, d, d)
    return QuadraticFamily(a @ a.T / d, _numpy(rng, d))


def jensen_checks(report, trials, d, rho, rng, points=20):
    rows = []
    for t in range(trials):
        trial_rng = rng.spawn('trial', t)
        family = _convex_family(trial_rng, d, t)
        x = _numpy(trial_rng, points, d)
        gap = jensen_check(family, x, rho)
        rows.append({'index': t, 'lhs': float(family.adversarial(x.mean(axis=0, keepdims=True), rho)[0]),
                     'rhs': float(family.adversarial(x, rho).mean()), 'slack': gap,
                     'violated': gap < -JENSEN_TOLERANCE})
    return report.add('jensen', rows, summary={'trials': trials, 'min_gap': float(min(r['slack'] for r in rows))})


def gaussian_classes(rng, samples, d=2, separation=2.0):
    """
    Two Gaussian classes and the logistic losses of a fixed separator for each
    :return: (list[(LogisticFamily, np.ndarray)]) family and samples per class
    """
    w = np.full(d, separation / np.sqrt(d))
    classes = []
    for c, y in enumerate([-1, 1]):
        centre = y * w / np.linalg.norm(w)
        classes.append((LogisticFamily(w, 0.0, y), centre + _numpy(rng.spawn('class', c), samples, d)))
    return classes


def expectation_checks(report, samples, d, rho, rng):
    rows = []
    quadratic_rng = rng.spawn('quadratic')
    a = _numpy(quadratic_rng, d, d)
    cases = gaussian_classes(rng.spawn('logistic'), samples)
    cases.append((QuadraticFamily(a @ a.T / d, _numpy(quadratic_rng, d)), _numpy(quadratic_rng, samples, d)))
    for i, (family, x) in enumerate(cases):
        result = expectation_bound(family, x, rho)
        rows.append({'index': i, 'lhs': result['lhs'], 'rhs': result['rhs'], 'slack': result['gap'],
                     'lambda1': result['mean_lambda1'], 'violated': result['violated']})
        report.summary['expectation %s %d' % (family.nickname, i)] = {
            key: value for key, value in result.items() if key != 'violated'}
    return report.add('expectation', rows)


def distilled_checks(report, run, samples, points, rho, rng):
    """
    Distilled-point bound: exact for logistic losses on identity features,
    reported for the teacher's penultimate features when a teacher and a synthetic set exist
    """
    for c, (family, x) in enumerate(gaussian_classes(rng.spawn('logistic'), samples)):
        distilled = x.mean(axis=0) + 0.5 * _numpy(rng.spawn('distilled', c), points, x.shape[1])
        distilled_bound_slack(family, x, distilled, rho, rng=rng.spawn('lipschitz', c), report=report,
                              check='distilled-identity')

    teacher_path = run.config['inputs']['teacher'] or os.path.join(run.out, TEACHER_FILE)
    synthetic_path = run.config['inputs']['synthetic'] or os.path.join(run.out, SYNTHETIC_FILE)
    if not (os.path.isfile(teacher_path) and os.path.isfile(synthetic_path)):
        print('No teacher and synthetic set found; skipping the feature-space distilled bound')
        return report
    teacher, _ = Model.load_model(teacher_path)
    synthetic = SyntheticSet.load(synthetic_path)
    train, _ = run.data()
    for c in range(synthetic.num_classes):
        real = train.inputs[train.class_indices(c)[:samples]]
        if real.shape[0] < 30:
            print('Class %d has %d training samples; skipping its feature-space bound' % (c, real.shape[0]))
            continue
        distilled_bound_slack(teacher, real, synthetic.inputs[synthetic.class_slice(c)], rho, c=c,
                              rng=rng.spawn('features', c), report=report, check='distilled-features')
    return report


def _verify_theory(run):
    section = run.config['theory']
    rng = run.rng.spawn('theory')
    report = BoundReport(config_hash=run.config_hash)
    per_sample_checks(report, section['trials'], section['dim'], section['rho'], rng.spawn('per-sample'))
    jensen_checks(report, section['trials'], section['dim'], section['rho'], rng.spawn('jensen'))
    expectation_checks(report, section['samples'], section['dim'], section['rho'], rng.spawn('expectation'))
    distilled_checks(report, run, section['samples'], section['distilled_points'], section['rho'],
                     rng.spawn('distilled'))
    report.to_json(run.path('bounds.json'))
    report.to_csv(run.path('bounds.csv'))
    print_bound_report(report)
    failed = {check: count for check, count in report.violations.items() if count}
    if failed:
        print('Bound violations: %s' % ', '.join('%s %d' % item for item in sorted(failed.items())))
        return 1
    return 0


def _bench_overhead(run):
    train, _ = run.data()
    section = run.config['bench']
    attack = run.attack()
    if section['adv_steps'] > 0:
        attack = attack.replace(steps=section['adv_steps'])
    else:
        attack = attack.replace(eps=0.0, steps=1)
    frame, checks = bench_overhead(train, run.model_spec(), run.regularizer(), attack,
                                   batch_size=section['batch_size'], iterations=section['iterations'],
                                   warmup=section['warmup'], rng=run.rng.spawn('bench'),
                                   min_seconds=section['min_seconds'], verbose=run.verbose)
    run.write_frame(frame, 'overhead.csv')
    write_json(run.path('overhead.json'), {'config_hash': run.config_hash, 'checks': checks})
    failed = [name for name, passed in checks.items() if passed is False]
    if failed:
        print('Overhead checks failed: %s' % ', '.join(failed))
        return 1
    return 0


def load_reports(directories):
    """
    Reports of prior eval runs; a directory may hold one report or per-seed report directories
    :param directories: (list[str]) report directories or eval output directories
    :return: (list[ExperimentReport])
    """
    reports = []
    for directory in directories:
        if os.path.isfile(os.path.join(directory, 'report.json')):
            reports.append(ExperimentReport.load(directory))
            continue
        if os.path.isdir(os.path.join(directory, 'eval')):
            directory = os.path.join(directory, 'eval')
        seeds = sorted(name for name in os.listdir(directory) if name.startswith('seed-')) \
            if os.path.isdir(directory) else []
        if not seeds:
            raise FileNotFoundError('No reports found in %s.' % directory)
        reports.extend(ExperimentReport.load(os.path.join(directory, name)) for name in seeds)
    return reports


def _report(run):
    section = run.config['report']
    if not section['runs'] and not section['ablation_runs']:
        raise ConfigError('no runs to aggregate', 'report.runs')
    if section['runs']:
        table = robustness_table(load_reports(section['runs']))
        run.write_frame(table, 'table_robustness.csv')
        print(table.to_string(index=False))
    if section['ablation_runs']:
        table = ablation_table(load_reports(section['ablation_runs']))
        run.write_frame(table, 'table_ablation.csv')
        print(table.to_string(index=False))


HANDLERS = {
    'squeeze': _squeeze,
    'recover': _recover,
    'relabel': _relabel,
    'distill-dc': _distill_dc,
    'train': _train,
    'attack': _attack,
    'eval': _eval,
    'profile': _profile,
    'verify-theory': _verify_theory,
    'bench-overhead': _bench_overhead,
    'report': _report,
}


def run(subcommand, config_path=None, overrides=(), out=None, verbose=True):
    """
    Runs one subcommand
    :param subcommand: (str) one of SUBCOMMANDS
    :param config_path: (str) JSON config file (None for the defaults)
    :param overrides: (list[str]) 'a.b.c=value' overrides
    :param out: (str) output directory (overrides output_dir)
    :param verbose: (bool) progress bars and status lines
    :return: (int) exit status: 0 on success, 1 on failure, 2 for an invalid configuration
    """
    assert subcommand in HANDLERS, 'Subcommand must be one of %s' % ', '.join(SUBCOMMANDS)
    try:
        config = load_config(config_path, overrides)
        if out is not None:
            config['output_dir'] = out
        apply_threads()
    except ConfigError as e:
        print('Config error: %s' % e)
        return 2
    except FileNotFoundError as e:
        print('Error: %s' % e)
        return 1

    state = Run(config, config['output_dir'], verbose=verbose)
    if not os.path.isdir(state.out):
        os.makedirs(state.out)
        state.written.append(state.out)
    try:
        write_json(state.path(CONFIG_FILE), config)
        status = HANDLERS[subcommand](state)
    except ConfigError as e:
        state.cleanup()
        print('Config error: %s' % e)
        return 2
    except (AssertionError, ValueError, RuntimeError, FileNotFoundError, ParseError, DivergenceError) as e:
        state.cleanup()
        print('Error: %s' % e)
        return 1
    return status or 0
