"""Edge/cloud split-inference pipeline and evaluation bench for in-cabin
object detection and localization."""

__version__ = "0.1.0"

from .ontology import (  # noqa: F401
    CabinOntology,
    UNKNOWN_CLASS,
    UNPARSEABLE_POSITION,
    canonicalize_class,
    load_ontology,
    mirror_position,
    validate_position,
)
from .labels import FrameLabel, GroundTruthObject  # noqa: F401
from .verdicts import Detection, ObjectOutcome, ParseStatus, Verdict  # noqa: F401
