"""
Experiment reports, their files, and the aggregated tables

A report directory holds report.json (deterministic content), report.csv
(one row per attack) and timing.json (wall-clock measurements, kept apart
so that re-runs reproduce report.json and report.csv byte for byte).
"""
import json
import os
import numpy as np
import pandas as pd

REPORT_FILE = 'report.json'
TABLE_FILE = 'report.csv'
TIMING_FILE = 'timing.json'


def write_json(path, document):
    with open(path, 'w') as f:
        json.dump(document, f, sort_keys=True, indent=2)
        f.write('\n')


def write_csv(frame, path):
    frame.to_csv(path, index=False, float_format='%.10g')


class ExperimentReport:
    """
    Result of one evaluation run

    Attributes:
        method:          (str) distillation method (or 'model' for a model-only evaluation)
        label:           (str) row/column label used by the aggregated tables
        clean_accuracy:  (float) accuracy on unperturbed test data
        robust_accuracy: (dict[str, float]) robust accuracy per attack label, in evaluation order
        median_lambda1:  (float) median top input-Hessian eigenvalue of the student (None if not measured)
        violations:      (dict[str, int]) attack invariant violations (ball, range, dominance)
        seeds:           (dict[str, int]) seeds of the run
        config_hash:     (str) hash of the effective config
        dataset_hash:    (str) hash of the dataset selection
        timing_mean:     (float) mean seconds per training iteration
        timing_std:      (float) standard deviation of the seconds per iteration
        timing_count:    (int) measured iterations
        peak_mib:        (float) peak autograd memory of a training iteration, MiB
        wall_clock:      (float) seconds for the whole evaluation
        notes:           (list[str]) remarks carried into the report
    """
    def __init__(self, method, clean_accuracy, robust_accuracy=None, median_lambda1=None, violations=None,
                 seeds=None, config_hash=None, dataset_hash=None, label=None, timing=None, peak_mib=None,
                 wall_clock=None, notes=None):
        self.method = method
        self.label = label or method
        self.clean_accuracy = float(clean_accuracy)
        self.robust_accuracy = dict(robust_accuracy or {})
        self.median_lambda1 = None if median_lambda1 is None else float(median_lambda1)
        self.violations = dict(violations or {})
        self.seeds = dict(seeds or {})
        self.config_hash = config_hash
        self.dataset_hash = dataset_hash
        timing = list(timing or [])
        self.timing_count = len(timing)
        self.timing_mean = float(np.mean(timing)) if timing else None
        self.timing_std = float(np.std(timing)) if timing else None
        self.peak_mib = peak_mib
        self.wall_clock = wall_clock
        self.notes = list(notes or [])

    @property
    def attacks(self):
        return list(self.robust_accuracy)

    def to_dict(self):
        """
        Deterministic content (no timings)
        """
        return {
            'method': self.method,
            'label': self.label,
            'clean_accuracy': self.clean_accuracy,
            'robust_accuracy': self.robust_accuracy,
            'attacks': self.attacks,
            'median_lambda1': self.median_lambda1,
            'violations': self.violations,
            'seeds': self.seeds,
            'config_hash': self.config_hash,
            'dataset_hash': self.dataset_hash,
            'notes': self.notes,
        }

    def timing_dict(self):
        return {
            'timing_mean': self.timing_mean,
            'timing_std': self.timing_std,
            'timing_count': self.timing_count,
            'peak_mib': self.peak_mib,
            'wall_clock': self.wall_clock,
        }

    def to_frame(self):
        """
        One row per evaluated attack ('none' carries the clean accuracy)
        """
        rows = [{'attack': name, 'accuracy': accuracy, 'method': self.method, 'label': self.label,
                 'config_hash': self.config_hash}
                for name, accuracy in self.robust_accuracy.items()]
        return pd.DataFrame(rows, columns=['attack', 'accuracy', 'method', 'label', 'config_hash'])

    def save(self, directory):
        """
        Writes report.json, report.csv and the timing.json sidecar
        :param directory: (str) output directory
        """
        os.makedirs(directory, exist_ok=True)
        write_json(os.path.join(directory, REPORT_FILE), self.to_dict())
        write_csv(self.to_frame(), os.path.join(directory, TABLE_FILE))
        write_json(os.path.join(directory, TIMING_FILE), self.timing_dict())

    @classmethod
    def load(cls, directory):
        """
        :param directory: (str) directory written by save()
        :return: (ExperimentReport)
        """
        path = os.path.join(directory, REPORT_FILE)
        if not os.path.isfile(path):
            raise FileNotFoundError('No report found in %s.' % directory)
        with open(path) as f:
            d = json.load(f)
        report = cls(d['method'], d['clean_accuracy'], d['robust_accuracy'], d.get('median_lambda1'),
                     d.get('violations'), d.get('seeds'), d.get('config_hash'), d.get('dataset_hash'),
                     label=d.get('label'), notes=d.get('notes'))
        timing_path = os.path.join(directory, TIMING_FILE)
        if os.path.isfile(timing_path):
            with open(timing_path) as f:
                timing = json.load(f)
            report.timing_mean = timing.get('timing_mean')
            report.timing_std = timing.get('timing_std')
            report.timing_count = timing.get('timing_count', 0)
            report.peak_mib = timing.get('peak_mib')
            report.wall_clock = timing.get('wall_clock')
        return report

    def __eq__(self, other):
        return isinstance(other, ExperimentReport) and self.to_dict() == other.to_dict()


def print_experiment_report(report):
    """
    Prints an experiment report
    """
    print('\n***************************************************\n')
    print('Experiment Report (%s):\n' % report.label)
    print('\tClean Accuracy:\t%.2f%%' % (report.clean_accuracy * 100))
    for name, accuracy in report.robust_accuracy.items():
        if name != 'none':
            print('\t%s Robust Accuracy:\t%.2f%%' % (name, accuracy * 100))
    if report.median_lambda1 is not None:
        print('\n\tMedian Lambda1:\t%.6g' % report.median_lambda1)
    if report.timing_mean is not None:
        print('\tTime per Iteration:\t%.4gs +/- %.4gs (%d iterations)' % (
            report.timing_mean, report.timing_std, report.timing_count))
    if report.peak_mib is not None:
        print('\tPeak Memory:\t%.3f MiB' % report.peak_mib)
    for key, count in sorted(report.violations.items()):
        print('\t%s violations:\t%d' % (key, count))
    print('\tConfig Hash:\t%s' % report.config_hash)
    print('\n***************************************************\n')


def _check_datasets(reports):
    hashes = sorted(set(r.dataset_hash for r in reports))
    if len(hashes) > 1:
        raise ValueError('Refusing to aggregate reports over different datasets (dataset hashes %s)' % ', '.join(
            str(h) for h in hashes))


def robustness_table(reports):
    """
    One row per attack, one column per method, mean accuracy over the runs (seeds) of each method
    :param reports: (list[ExperimentReport]) runs on the same dataset
    :return: (pd.DataFrame)
    """
    if not reports:
        return pd.DataFrame(columns=['attack'])
    _check_datasets(reports)
    frame = pd.concat([r.to_frame() for r in reports], ignore_index=True)
    attacks = list(dict.fromkeys(frame['attack']))
    methods = list(dict.fromkeys(frame['label']))
    table = frame.pivot_table(index='attack', columns='label', values='accuracy', aggfunc='mean')
    table = table.reindex(index=attacks, columns=methods)
    table.columns.name = None
    return table.reset_index()


def ablation_table(reports):
    """
    One row per regularizer arm, one column per attack, mean accuracy over seeds
    """
    table = robustness_table(reports)
    if table.empty:
        return pd.DataFrame(columns=['arm'])
    table = table.set_index('attack').T
    table.index.name = 'arm'
    table.columns.name = None
    return table.reset_index()


def print_overhead_report(frame):
    """
    Prints the per-iteration cost of each training objective
    """
    print('\n***************************************************\n')
    print('Overhead per Training Iteration:\n')
    for _, row in frame.iterrows():
        print('\t%s:\t%.4gs +/- %.4gs\t(peak %.3f MiB, ratio to plain %.3f)' % (
            row['objective'], row['mean_seconds'], row['std_seconds'], row['peak_mib'], row['ratio_to_plain']))
    print('\n***************************************************\n')


def print_bound_report(report):
    """
    Prints the violation counts and summary figures of a BoundReport
    """
    print('\n***************************************************\n')
    print('Bound Report:\n')
    for check, count in sorted(report.violations.items()):
        checked = int((report.records['check'] == check).sum())
        print('\t%s violations:\t%d of %d' % (check, count, checked))
    for check, figures in sorted(report.summary.items()):
        print('\n\t%s:' % check)
        for key, value in sorted(figures.items()):
            print('\t\t%s:\t%s' % (key, '%.6g' % value if isinstance(value, float) else value))
    print('\n***************************************************\n')
