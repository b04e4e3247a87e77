from .dataset import Dataset
from .loaders import Loader
from .loaders import TwoMoonsLoader
from .loaders import GaussMixLoader
from .loaders import TinyDigitsLoader
from .loaders import IdxFileLoader
from .loaders import CsvFileLoader
from .loaders import load_dataset
from .utils import read_idx
from .utils import find_file
from guard.tensors import ParseError
