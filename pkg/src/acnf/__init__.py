"""Standard-compatible learned image compression around a stock JPEG codec.

A compact-representation network (CRNet) shrinks the image, an unmodified
JPEG codec compresses it, and a postprocessing network (PPNet) restores it.
The two networks are trained through differentiable surrogates of the codec:
an auxiliary codec network (ACN) for the decoded pixels and a bit estimation
network (BENet) for the stream size.
"""

from . import codec, container, data, eval, networks, training

__version__ = "0.1.0"

__all__ = ["codec", "container", "data", "eval", "networks", "training"]
