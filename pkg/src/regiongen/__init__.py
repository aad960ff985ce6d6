"""regiongen: sketch-conditioned region-to-image generation engine.

Turns a rough color-coded sketch into a structured scene description, a set
of per-object shape candidates, and finally a fully conditioned generation
request (edge anchor + disjoint region masks + attention weight plan)
against pluggable model backends.
"""

from .attention import (
    AttentionMap,
    AttentionWeightPlan,
    TokenSpan,
    WeightEntry,
    apply_plan,
    build_negative_prompts,
    build_plan,
)
from .categories import CategoryList, default_categories
from .config import DEFAULT_CONFIG, EngineConfig
from .errors import (
    BackendError,
    CompletionParseError,
    ConflictError,
    EngineError,
    FormatError,
    InvalidArgumentError,
    ValidationError,
)
from .masks import (
    AffineTransform,
    EdgeMap,
    GrayImage,
    RasterMask,
    Region,
    RegionSketch,
    apply_transform,
    background_mask,
    canny,
    compose_anchor,
    downsample_majority,
    extract_regions,
    iou,
    joint_mask,
    mask_difference,
    render_regions,
    resize_mask,
)
from .palette import BACKGROUND_REGION_ID, PALETTE, WHITE, Legend, LegendEntry
from .pipeline import (
    Candidate,
    CandidateRound,
    GenerationRequest,
    ObjectPlacement,
    SampleResult,
    adjust_placement,
    assemble_request,
    classify,
    generate_candidates,
    run_generation,
    select_candidate,
)
from .recommend import (
    Completion,
    FewShotExample,
    InferenceRequest,
    PromptTemplate,
    infer_space,
    parse_completion,
    render_template,
)
from .semantic import (
    CrossObjectPrompt,
    OverallPrompt,
    SemanticSpace,
    SingleObjectPrompt,
    Violation,
    flatten_region,
    merge_user_first,
    relationship_prompt,
    skeleton,
    validate,
)
from .lexicon import Lexicon, SampleConfig, ingest, sample_attributes, sample_relationships

__version__ = "0.1.0"
