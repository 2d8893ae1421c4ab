//! Source-source adversarial training: task loss, gradient-reversed
//! multi-class domain loss, optional entropy term, phased-in trade-off.

mod batch;
mod objective;
mod trainer;

pub use batch::LabeledBatch;
pub use objective::{
    entropy_term, lambda_schedule, mean_domain_loss, objective, source_domain_loss, task_loss, ObjectiveStep,
    ObjectiveWeights, TripleGradients,
};
pub use trainer::{
    accuracy, dataset_domain_loss, select_step_size, train, train_dann, StepSizeSelection, EpochMetrics, LambdaMode, Method, StepObserver, TrainingConfig,
};
