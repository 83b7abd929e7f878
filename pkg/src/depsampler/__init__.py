"""Probabilistic transition-based dependency parsing with exact joint
sampling and Monte Carlo marginal inference."""

from .conllu import (
    ConlluError,
    Edge,
    ParseTree,
    Sentence,
    Token,
    TreeValidationError,
    is_projective,
    read_conllu,
    write_conllu,
)
from .transition import (
    Action,
    ParserState,
    ROOT_LABEL,
    apply_action,
    initial_state,
    is_terminal,
    legal_actions,
    oracle_actions,
)
from .features import extract_features
from .model import (
    ActionModel,
    TrainConfig,
    TrainResult,
    action_distribution,
    load_model,
    save_model,
    train,
)
from .inference import (
    SampledParse,
    SampleSet,
    draw_parses,
    draw_samples,
    enumerate_exact,
    greedy_parse,
    load_sample_sets,
    mbr_parse,
    mc_map,
    sample_parse,
    write_sample_file,
)
from .marginals import (
    StructureQuery,
    enumerate_paths,
    eval_query,
    load_keywords,
    parse_query_file,
    parse_query_text,
    path_marginals,
    predict_paths,
    query_marginal,
    sample_summary,
    tree_entropy,
)
from .analysis import (
    calibration_pairs,
    calibration_table,
    entropy_report,
    greedy_path_pr,
    las,
    path_pr_curve,
)
from .applications import (
    EntityMention,
    RoleInstance,
    SemanticModel,
    assign_role,
    expected_features,
    most_common_label,
    noisy_or,
    rank_entities,
    rule_match,
    sentence_match_prob,
    train_semantic,
)
from .parser import TransitionParser

__version__ = "0.1.0"
