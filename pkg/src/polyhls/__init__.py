"""polyhls: a polyhedral high-level-synthesis compiler.

Parses SCoP-annotated loop nests in a restricted C-like language, models
them polyhedrally, applies dependence-checked tiling/skewing/wavefront
transforms, and lowers through a textual Affine IR to HLS C with
directives and a host/kernel split — with a reference interpreter
validating every stage.
"""

__version__ = "0.1.0"

from .errors import PolyHlsError  # noqa: F401
