"""hyperem: hyperspectral image emulation toolkit.

Synthetic radiative-transfer data generation, classical (PCA + kernel
regression, MLP) and VAE-based (pixel-wise and fully convolutional)
emulators, reconstruction-quality metrics, and LUT-based parameter
retrieval as a downstream validation task.
"""

__version__ = "0.1.0"
