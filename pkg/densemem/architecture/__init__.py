from .associative import MinibatchTensors
from .associative import build_minibatch_tensors
from .associative import associative_outputs
from .associative import associative_gradient
from .associative import recurrent_outputs
from .dual import Convention
from .dual import dual_outputs
from .dual import dual_gradient
from .dual import hidden_preactivations
