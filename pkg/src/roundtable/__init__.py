"""Group chat with an embedded agent participant.

The pieces compose in layers: `model` (events, transcripts, rosters),
`settings` + `governance` (what the agent is allowed to do and who may
change that), `provider` (prompt assembly and decision parsing),
`gating` (addressing, thresholds, scheduling, placement), `pipeline`
(the sans-IO room loop), `replay` (deterministic re-runs and metrics),
and `service` (the live TCP server speaking the wire protocol).
"""

from .decisionlog import DecisionLog, DecisionRecord, read_decision_log
from .gating import (
    AddresseeClass,
    AgentAction,
    Placement,
    apply_threshold,
    classify_addressee,
    decide,
    schedule,
    should_invoke,
)
from .governance import (
    Applied,
    BehaviorPreset,
    Denied,
    GovernanceError,
    Governor,
    Intent,
    PendingIntent,
    Proposal,
    ProposalOpened,
    VoteState,
    builtin_presets,
    classify_confirmation,
    detect_settings_intent,
    load_presets,
)
from .model import (
    AgentDecision,
    ChatEvent,
    Participant,
    ReactionToken,
    RoomTranscript,
    Roster,
    TranscriptError,
    dump_transcript,
    load_transcript,
)
from .pipeline import PipelineConfig, RoomPipeline
from .provider import (
    GenParams,
    ParseError,
    PromptConfig,
    ProviderScript,
    RemoteProvider,
    ScriptRule,
    ScriptedProvider,
    assemble_prompt,
    default_prompt_config,
    load_script,
    map_reaction,
    parse_decision,
    serialize_decision,
)
from .replay import (
    Metrics,
    ReplayResult,
    compute_metrics,
    generate_script,
    generate_transcript,
    replay,
    sweep,
)
from .service import ChatServer, RoomRuntime, build_room
from .settings import (
    THRESHOLDS,
    AgentSettings,
    SettingsError,
    apply_patch,
    describe_patch,
    load_settings,
    save_settings,
)

__version__ = "0.1.0"

__all__ = [
    "AddresseeClass",
    "AgentAction",
    "AgentDecision",
    "AgentSettings",
    "Applied",
    "BehaviorPreset",
    "ChatEvent",
    "ChatServer",
    "DecisionLog",
    "DecisionRecord",
    "Denied",
    "GenParams",
    "GovernanceError",
    "Governor",
    "Intent",
    "Metrics",
    "ParseError",
    "Participant",
    "PendingIntent",
    "PipelineConfig",
    "Placement",
    "PromptConfig",
    "Proposal",
    "ProposalOpened",
    "ProviderScript",
    "ReactionToken",
    "RemoteProvider",
    "ReplayResult",
    "RoomPipeline",
    "RoomRuntime",
    "RoomTranscript",
    "Roster",
    "ScriptRule",
    "ScriptedProvider",
    "SettingsError",
    "THRESHOLDS",
    "TranscriptError",
    "VoteState",
    "apply_patch",
    "apply_threshold",
    "assemble_prompt",
    "build_room",
    "builtin_presets",
    "classify_addressee",
    "classify_confirmation",
    "compute_metrics",
    "decide",
    "default_prompt_config",
    "describe_patch",
    "detect_settings_intent",
    "dump_transcript",
    "generate_script",
    "generate_transcript",
    "load_presets",
    "load_script",
    "load_settings",
    "load_transcript",
    "map_reaction",
    "parse_decision",
    "read_decision_log",
    "replay",
    "save_settings",
    "schedule",
    "serialize_decision",
    "should_invoke",
    "sweep",
    "__version__",
]
