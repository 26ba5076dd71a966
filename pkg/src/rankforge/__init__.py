"""rankforge: black-box adversarial rank-attack pipeline.

Generates and validates adversarial sentence injections against a victim
ranker, distills them into supervised and preference training data, runs the
inference-time attack, and scores attack performance, fidelity, and stealth.
Rankers, generators, and neural metrics attach over small HTTP protocols;
deterministic builtin substitutes cover desk-scale runs end to end.
"""

from .attack import AttackResult, attack_batch, attack_document
from .datasets import (
    PreferencePair,
    SftExample,
    build_diamond,
    build_gold,
    build_preference_pairs,
    dpo_loss,
    export_sft,
    pick_preference,
    reward_indicator,
    select_targets,
    split_train_test,
)
from .errors import (
    ConfigError,
    DataError,
    GenerationParseError,
    GenerationValidationError,
    MetricError,
    NotFoundError,
    RankforgeError,
    RunFormatError,
    SelectionError,
    ServiceError,
    StatsError,
)
from .generation import (
    GenerationMode,
    GenerationRequest,
    GenerationResponse,
    GeneratorPort,
    MockGenerator,
    RemoteGenerator,
    parse_generation,
    render_feedback_prompt,
    render_initial_prompt,
)
from .metrics import (
    EvalReport,
    MetricClient,
    adt,
    asr,
    ati,
    avg_boost,
    compare_attacks,
    evaluate_attack,
    lor,
    paired_t_test,
    spam_flag_curve,
    spam_score,
    top_k_rate,
)
from .models import AdversarialVariant, Document, Query, TargetGroup, TargetPair, TraceRecord
from .ranking import (
    LexicalRanker,
    RankedList,
    RankerPort,
    RankOnlyView,
    RemoteRanker,
    build_lexical_ranker,
    rank_of,
    read_run,
    rerank,
    write_run,
)
from .stage1 import (
    Stage1Config,
    check_indirect_relevance,
    coherence_count,
    run_stage1,
    run_stage1_batch,
    select_context,
)
from .textops import insert_sentence, insertion_positions, split_sentences, tokenize

__version__ = "0.1.0"
