//! Quantitative protocols: attribute classifiers, switched-output accuracy,
//! identity-paired squared error and a mutual-information probe.
//!
//! Every report renders as a text table and as `metric.path = value`
//! records.

mod classifier;
mod method1;
mod method2;
mod mi;
mod report;

pub use classifier::{
    classifier_spec_for, fit_logit_net, majority_rate, train_attr_classifier, AttrClassifier, Criterion, FitConfig,
    FitOutcome, LogitNet,
};
pub use method1::{eval_switch_accuracy, reconstruct, AccuracyReport, AttrAccuracy, SwitchPolicy};
pub use method2::{
    apply_candidate, candidate_loss, default_candidates, eval_identity_mse, pairs_in, sq_error, Candidate, CandidateSet,
    MseReport, Sweep, LABEL_SCALES,
};
pub use mi::{encoded_splits, label_entropy, mi_from_features, mi_probe, Latent, MiEstimate, Part, ProbeConfig};
pub use report::{parse_records, pct, render_records, Record, Table};
