import time
from collections import Counter
from guard.attacks import attack_dataset
from guard.curvature import profile
from guard.models import init_model, Learner, PlainObjective
from guard.harness.bench import iteration_memory
from guard.harness.report import ExperimentReport
from guard.distill.synthetic_set import SyntheticSet

AUTO_LITE_NOTE = 'auto-lite is the worst case over pgd, mim and square; it stands in for AutoAttack'


def attack_labels(attacks):
    """
    Report labels of the attacks: the family, or family@eps when a family appears more than once
    """
    counts = Counter(spec.family for spec in attacks)
    labels = []
    for spec in attacks:
        label = spec.name if counts[spec.family] == 1 else '%s@%.4g' % (spec.family, spec.eps)
        assert label not in labels, 'Attack %s is listed twice' % label
        labels.append(label)
    return labels


def dominance_violations(attacks, labels, results):
    """
    Samples that auto-lite leaves robust although one of its components,
    evaluated with the same budget, broke them
    """
    violations = 0
    for spec, label in zip(attacks, labels):
        if spec.family != 'auto-lite':
            continue
        for other, other_label in zip(attacks, labels):
            if other.family in ['pgd', 'mim', 'square'] and \
                    other.to_dict() == spec.replace(family=other.family).to_dict():
                violations += int((results[label] & ~results[other_label]).sum())
    return violations


def evaluate(synthetic, spec, real_test, attacks, epochs, rng, lr=0.01, batch_size=32, curvature_samples=0,
             config_hash=None, dataset_hash=None, label=None, verbose=False):
    """
    Trains a fresh student on a synthetic set and measures it on real test data
    :param synthetic: (SyntheticSet|Dataset) training data of the student
    :param spec: (ModelSpec) student architecture
    :param real_test: (Dataset) real test split
    :param attacks: (list[AttackSpec]) attacks to evaluate; 'none' gives the clean accuracy row
    :param epochs: (int) student training epochs
    :param rng: (Rng) random stream (student, training, attacks and profiling use separate children)
    :param curvature_samples: (int) test samples whose median lambda1 is reported (0 to skip)
    :return: (ExperimentReport)
    """
    started = time.perf_counter()
    train_set = synthetic.to_dataset() if isinstance(synthetic, SyntheticSet) else synthetic
    assert len(train_set) > 0, 'Cannot evaluate an empty synthetic set'
    method = synthetic.provenance.get('method', 'synthetic') if isinstance(synthetic, SyntheticSet) else 'model'

    learner = Learner(PlainObjective(), epochs=epochs, lr=lr, batch_size=batch_size, verbose=verbose)
    initial = init_model(spec, rng.spawn('student'))
    student = learner.fit(initial, train_set, rng.spawn('train'))
    peak = iteration_memory(initial, learner.objective, train_set.inputs[:batch_size],
                            train_set.labels[:batch_size], rng.spawn('memory'))

    clean = student.accuracy(real_test)
    labels = attack_labels(attacks)
    accuracies, results = {}, {}
    violations = {'ball': 0, 'range': 0, 'dominance': 0}
    attack_rng = rng.spawn('attack')
    for attack, attack_label in zip(attacks, labels):
        if verbose:
            print('Attacking with %s...' % attack_label)
        frame, counts = attack_dataset(student, real_test, attack, attack_rng, verbose=verbose)
        for key, count in counts.items():
            violations[key] += count
        results[attack_label] = frame['robust'].to_numpy()
        accuracies[attack_label] = float(frame['robust'].mean()) if len(frame) else 0.0
    violations['dominance'] = dominance_violations(attacks, labels, results)

    median_lambda1 = None
    if curvature_samples > 0:
        n = min(curvature_samples, len(real_test))
        curvature = profile(student, real_test.inputs[:n], real_test.hard_labels()[:n], k=1,
                            rng=rng.spawn('curvature'))
        median_lambda1 = curvature.median_lambda1()

    notes = [AUTO_LITE_NOTE] if any(a.family == 'auto-lite' for a in attacks) else []
    return ExperimentReport(method, clean, accuracies, median_lambda1, violations,
                            seeds={'evaluation': rng.seed}, config_hash=config_hash, dataset_hash=dataset_hash,
                            label=label, timing=learner.step_times, peak_mib=peak,
                            wall_clock=time.perf_counter() - started, notes=notes)
