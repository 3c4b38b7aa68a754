"""veriframe: build face corpora from labeled videos, train CNN counterfeit
discriminators, evaluate them, and serve verdicts over a stateless API."""

from .errors import VeriframeError

__version__ = "0.1.0"

__all__ = ["VeriframeError", "__version__"]
