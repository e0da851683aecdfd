"""From-scratch 1-D CNN machinery shared by the beat and fall classifiers."""

from .kernels import BACKEND  # noqa: F401
from .layers import Conv1D, Dense, Flatten, MaxPool1D, Parameter, ReLU  # noqa: F401
from .network import Network, cross_entropy, softmax, softmax_xent_grad  # noqa: F401
from .training import TrainHistory, inverse_frequency_weights, train  # noqa: F401
