"""accwave: mixed ACC/manual freeway traffic lab with a learned gap controller."""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
