//! Phantom datasets, cross-validation, evaluation and reporting.

pub mod dataset;
pub mod eval;
pub mod folds;
pub mod phantom;
pub mod report;
pub mod train;

pub use dataset::{
    case_id, load_cases, load_model_set, phantom_cases, write_case, Case, ModelSet, Scale,
    TrainedModels,
};
pub use eval::{evaluate, CaseResult, EvalConfig, EvalReport, RowSpec, RowSummary, Stats};
pub use folds::{make_folds, FoldPlan, DEFAULT_FOLDS};
pub use phantom::{gen_phantom, Phantom, PhantomSpec};
pub use report::{read_case_csv, render, write_case_csv, ReportFormat};
pub use train::{train_models, training_samples, TrainConfig};
