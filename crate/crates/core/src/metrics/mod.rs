//! Evaluation: IoU cell matching, detection and adjacency F1, logical
//! accuracy, TEDS and BLEU.

mod matching;
mod report;
mod scores;
mod teds;

pub use matching::{match_cells, match_tables, MatchPair, MatchResult};
pub use report::{
    detection_scores, evaluate_dataset, evaluate_tables, MetricsAccumulator, MetricsReport, DEFAULT_IOU_THRESHOLD,
};
pub use scores::{adjacency_f1, bleu, detection_f1, logical_accuracy, relation_counts, LogicalAccuracy, Prf, RelationCounts};
pub use teds::{
    markup_rename_cost, markup_tree, normalized_levenshtein, teds, teds_trees, tree_edit_distance, MarkupNode, TreeNode,
};
