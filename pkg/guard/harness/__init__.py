from .report import ExperimentReport
from .report import robustness_table
from .report import ablation_table
from .report import print_experiment_report
from .report import print_overhead_report
from .report import print_bound_report
from .bench import bench_overhead
from .bench import time_objective
from .bench import iteration_memory
