"""ensemblekit: CIFAR-10 classification from fused feature sets.

Hand-computed HOG and pixel features plus externally supplied CNN features
are standardized, concatenated, optionally PCA-truncated, and fed to a
small fully-connected network trained with dropout and early stopping.
"""

__version__ = "0.1.0"
