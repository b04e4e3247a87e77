from .tensor import DTYPE
from .tensor import tensor
from .tensor import zeros
from .tensor import set_checked
from .tensor import is_checked
from .tensor import checked
from .tensor import check_finite
from .tensor import flatten_rows
from .tensor import row_norms
from .rng import Rng
from .autodiff import Record
from .autodiff import grad
from .autodiff import grad_check
from .autodiff import flatten_grads
from .memory import MemoryMeter
from .serialization import ParseError
from .serialization import save_tensor
from .serialization import load_tensor
from .serialization import write_tensor
from .serialization import read_tensor
from .serialization import write_container
from .serialization import read_container
from . import ops
