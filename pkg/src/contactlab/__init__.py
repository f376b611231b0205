"""Monte Carlo toolkit for the contact process on graphs."""

__version__ = "0.1.0"

from .errors import AcceptanceError, SamplingAborted, TruncationError  # noqa: E402
from .graph import Graph, GraphSpec, build_graph, halfline, lattice, regular_tree  # noqa: E402

__all__ = ["AcceptanceError", "Graph", "GraphSpec", "SamplingAborted", "TruncationError",
           "__version__", "build_graph", "halfline", "lattice", "regular_tree"]
