from .model_spec import ModelSpec
from .networks import MLP
from .networks import ConvNetS
from .networks import BatchNorm
from .model import Model
from .model import init_model
from .data_iterator import DataIterator
from .objectives import Objective
from .objectives import PlainObjective
from .objectives import GuardObjective
from .objectives import GradPenaltyObjective
from .objectives import AdversarialObjective
from .objectives import get_objective
from .learner import Learner
from .learner import DivergenceError
from .learner import train
