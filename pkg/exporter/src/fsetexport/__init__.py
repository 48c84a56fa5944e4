"""Export CNN penultimate-layer activations of CIFAR-10 as .fset files."""

__version__ = "0.1.0"
