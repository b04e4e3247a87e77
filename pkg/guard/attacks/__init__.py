from .attack_spec import AttackSpec
from .attack import Attack
from .attack import get_attack
from .gradient_attacks import NoAttack
from .gradient_attacks import FGSMAttack
from .gradient_attacks import PGDAttack
from .gradient_attacks import MIMAttack
from .cw_attack import CWL2Attack
from .square_attack import SquareAttack
from .auto_lite import AutoLiteAttack
from .utils import project
from .utils import perturbation_norm
from .utils import margins
from .utils import invariant_violations
from .evaluation import perturb
from .evaluation import attack_dataset
from .evaluation import robust_accuracy
