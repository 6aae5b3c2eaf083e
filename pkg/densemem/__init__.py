__version__ = "1.0.0a1"

from .energy import EnergyKind
from .energy import EnergyModel
from .energy import SpinState
from .energy import MemorySet
from .energy import OverlapCache
from .energy import total_energy
from .energy import energy_gap
from .dynamics import DynamicsConfig
from .dynamics import evolve
from .dynamics import evolve_batch
from .dynamics import xor_solve
from .capacity import CapacityTheory
from .capacity import TrialGrid
from .capacity import run_recovery_trials
from .capacity import find_k_half
from .data import load_labeled_images
from .data import split
from .data import minibatches
from .model import ClassifierModel
from .model import TrainConfig
from .model import build_model
from .model import train_model
from .model import evaluate
from .model import save_checkpoint
from .model import load_checkpoint
from .model import export_weights_csv
from . import config
