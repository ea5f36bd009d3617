//! Offline evaluation: IPS and loss metrics, nested cross-validation,
//! learning curves and the cross-task table.

pub mod crosstask;
pub mod curve;
pub mod cv;
pub mod metrics;
pub mod report;

pub use crosstask::{cross_task_table, CrossTaskRow, CrossTaskTable, DiagonalFlags};
pub use curve::{geometric_sizes, learning_curve, CurvePoint, LearningCurve};
pub use cv::{evaluate_policy, nested_cv, nested_cv_many, train_policy, CvConfig, Grid};
pub use metrics::{
    assignment_entropy, assignment_shares, entropy_bits, ips_value, lift_vs_control, mean_weight,
    mse_effect_exact, mse_effect_proxy, mse_outcome, wmr,
};
pub use report::{ci95, share_table_csv, Approach, EvalReport, FoldMetrics, Interval, METRICS};
