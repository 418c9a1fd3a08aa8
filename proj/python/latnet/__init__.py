"""Word-lattice inputs for a transformer encoder.

The heavy lifting lives in the compiled extension; this package re-exports
it and adds nothing else. See ``help(latnet._core)`` for the full surface.
"""

from latnet._core import (  # noqa: F401
    BOS_LABEL,
    EOS_LABEL,
    MASKED_LOGIT,
    AttentionMask,
    Checkpoint,
    Edge,
    EncodedInput,
    EpochMetrics,
    EvalMetrics,
    EvalScores,
    Example,
    Grammar,
    InputMode,
    LabelInventory,
    Lattice,
    LmEpochMetrics,
    ModelConfig,
    ModelParams,
    Node,
    NoiseModel,
    OptimizerConfig,
    PreparedExample,
    Task,
    Tokenizer,
    TrainConfig,
    TrainResult,
    binary_mask,
    build_subword_vocab,
    causal_mask,
    classification_loss_eval,
    classify_eval,
    corpus_one_best_wer,
    corpus_words,
    corrupt,
    corrupt_corpus,
    encode_eval,
    encode_lattice_input,
    evaluate,
    evaluate_model,
    forward_mass,
    generate_corpus,
    input_mode_from_string,
    lattice_from_json,
    lattice_to_json,
    linearize,
    lm_loss_eval,
    load_checkpoint,
    load_examples,
    load_lattice_file,
    longest_path_distance,
    one_best_path,
    one_best_words,
    path_mass_between,
    predecessor_prob,
    predecessors,
    predict_labels,
    prepare_corpus,
    prepare_example,
    prob_mask,
    save_checkpoint,
    save_examples,
    split_nodes,
    task_from_string,
    topological_order,
    train,
    validate,
    wer,
)

__version__ = "0.1.0"
