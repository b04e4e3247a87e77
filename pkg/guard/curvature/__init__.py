from .regularizer_config import RegularizerConfig
from .surfaces import Surface
from .surfaces import QuadraticSurface
from .surfaces import LinearSurface
from .regularizer import input_gradients
from .regularizer import normalized_grad
from .regularizer import guard_penalty
from .regularizer import guard_loss
from .regularizer import gradient_penalty
from .regularizer import grad_penalty_loss
from .hessian import EigenEstimate
from .hessian import hvp_fd
from .hessian import power_iteration
from .hessian import lambda1_power
from .profile import CurvatureProfile
from .profile import profile
