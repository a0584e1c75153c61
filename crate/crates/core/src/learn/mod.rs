//! From-scratch learners: KNN, RBF-SVM, MLP, random forest and the linear family.

pub mod forest;
pub mod knn;
pub mod linear;
pub mod mlp;
pub mod persist;
pub mod svm;

pub use forest::{forest_fit, forest_importance, ForestModel, ForestParams};
pub use knn::{knn_fit, knn_predict, KnnModel};
pub use linear::{
    export_error_model, linear_fit, linear_predict, rmse, ErrorModel, LinearModel, LinearOptions,
    Penalty,
};
pub use mlp::{mlp_fit, MlpModel, MlpParams, MlpTask};
pub use persist::{load_bundle, save_bundle, ModelBundle};
pub use svm::{svm_fit, svm_predict, SvmModel, SvmParams};

use crate::error::{Error, Result};

/// Any trained model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Knn(KnnModel),
    Svm(SvmModel),
    Mlp(MlpModel),
    Forest(ForestModel),
    Linear(LinearModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Knn(_) => "knn",
            Model::Svm(_) => "svm",
            Model::Mlp(_) => "mlp",
            Model::Forest(_) => "forest",
            Model::Linear(_) => "linear",
        }
    }

    pub fn is_classifier(&self) -> bool {
        match self {
            Model::Knn(_) | Model::Svm(_) | Model::Forest(_) => true,
            Model::Mlp(m) => matches!(m.task, MlpTask::Classifier { .. }),
            Model::Linear(_) => false,
        }
    }

    pub fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        match self {
            Model::Knn(m) => Ok(m.predict(rows)),
            Model::Svm(m) => Ok(m.predict(rows)),
            Model::Forest(m) => Ok(m.predict(rows)),
            Model::Mlp(m) if self.is_classifier() => m.predict_labels(rows),
            _ => Err(Error::usage(format!(
                "{} model is a regressor",
                self.kind()
            ))),
        }
    }

    pub fn predict_values(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        match self {
            Model::Linear(m) => m.predict(rows),
            Model::Mlp(m) if !self.is_classifier() => m.predict_values(rows),
            _ => Err(Error::usage(format!(
                "{} model is a classifier",
                self.kind()
            ))),
        }
    }
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}
