from .distill_config import DistillConfig
from .synthetic_set import SyntheticSet
from .matching import matching_distance
from .matching import layer_distances
from .dc_guard import dc_guard
from .srl import squeeze
from .srl import recover
from .srl import relabel
from .srl import total_variation
from .srl import recover_objective
from .evaluation import evaluate
from .evaluation import attack_labels
