from .quad_model import QuadModel
from .trust_region import trust_region_max
from .families import LossFamily
from .families import QuadraticFamily
from .families import LinearFamily
from .families import LogisticFamily
from .families import SoftmaxHeadFamily
from .families import ModelFamily
from .families import get_family
from .bounds import per_sample_bound
from .bounds import expectation_bound
from .bounds import jensen_check
from .bounds import estimate_lipschitz
from .bounds import distilled_bound_slack
from .bound_report import BoundReport
