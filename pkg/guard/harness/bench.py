"""
Per-iteration cost of the training objectives

Plain, GUARD and adversarial (PGD) training steps are timed on an
identical model, batch and optimizer. Each objective gets warm-up steps
followed by measured steps; when a step is faster than the timer can
resolve, every measurement repeats it until the elapsed time is long enough.
"""
import time
import numpy as np
import pandas as pd
import torch
from guard.tensors import MemoryMeter, Rng
from guard.models import init_model, get_objective
from guard.harness.report import print_overhead_report

MAX_REPEATS = 1 << 12


def iteration_memory(model, objective, x, y, rng):
    """
    Peak bytes autograd saves during one loss evaluation and backward pass, in MiB
    """
    model = model.copy().train()
    with MemoryMeter() as meter:
        loss = objective(model, x, y, rng)
    loss.backward()
    return meter.peak_mib


def _step(model, objective, optimizer, x, y, rng):
    loss = objective(model, x, y, rng)
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()


def time_objective(model, objective, x, y, rng, iterations=5, warmup=2, lr=0.01, min_seconds=1e-4):
    """
    Seconds per optimizer step of one objective
    :return: (list[float], int) per-iteration seconds and the repeat count used per measurement
    """
    assert iterations >= 5, 'At least 5 measured iterations are needed'
    model = model.copy().train()
    objective.prepare(x)
    optimizer = torch.optim.SGD(model.parameters(), lr=lr, momentum=0.9)
    for w in range(warmup):
        _step(model, objective, optimizer, x, y, rng.spawn('warmup', w))
    repeats = 1
    while True:
        started = time.perf_counter()
        for r in range(repeats):
            _step(model, objective, optimizer, x, y, rng.spawn('calibrate', r))
        if time.perf_counter() - started >= min_seconds or repeats >= MAX_REPEATS:
            break
        repeats *= 2
    times = []
    for i in range(iterations):
        started = time.perf_counter()
        for r in range(repeats):
            _step(model, objective, optimizer, x, y, rng.spawn('measure', i, r))
        times.append((time.perf_counter() - started) / repeats)
    return times, repeats


def bench_overhead(train, spec, regularizer, attack, batch_size=64, iterations=5, warmup=2, rng=None,
                   min_seconds=1e-4, verbose=True):
    """
    Compares plain, GUARD and adversarial training per-iteration cost
    :param train: (Dataset) training data (the first batch_size samples are used)
    :param spec: (ModelSpec) architecture shared by every arm
    :param regularizer: (RegularizerConfig) GUARD settings
    :param attack: (AttackSpec) inner attack of adversarial training; with eps = 0 it degenerates
        to plain training and the speed check is not applied
    :return: (pd.DataFrame, dict) one row per objective (mean_seconds, std_seconds, iterations, repeats,
        peak_mib, ratio_to_plain) and the checks {'guard_faster_than_adversarial', 'guard_ratio_below_5'}
        (None when a check does not apply)
    """
    rng = rng if rng is not None else Rng(0)
    model = init_model(spec, rng.spawn('init'))
    x, y = train.inputs[:batch_size], train.hard_labels()[:batch_size]
    rows = []
    for nickname in ['plain', 'guard', 'adversarial']:
        objective = get_objective(nickname, regularizer=regularizer, attack=attack)
        objective.prepare(train.inputs)
        times, repeats = time_objective(model, objective, x, y, rng.spawn(nickname), iterations, warmup,
                                        min_seconds=min_seconds)
        rows.append({
            'objective': nickname,
            'mean_seconds': float(np.mean(times)),
            'std_seconds': float(np.std(times)),
            'iterations': len(times),
            'repeats': repeats,
            'peak_mib': iteration_memory(model, objective, x, y, rng.spawn(nickname, 'memory')),
        })
    frame = pd.DataFrame(rows)
    frame['ratio_to_plain'] = frame['mean_seconds'] / frame.loc[0, 'mean_seconds']
    timing = frame.set_index('objective')['mean_seconds']
    adversarial_active = attack.eps > 0 and attack.steps >= 5
    checks = {
        'guard_faster_than_adversarial':
            bool(timing['guard'] < timing['adversarial']) if adversarial_active else None,
        'guard_ratio_below_5': bool(timing['guard'] / timing['plain'] < 5.0),
    }
    if verbose:
        print_overhead_report(frame)
    return frame, checks
