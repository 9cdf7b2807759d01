//! Metrics, evaluation protocols and a synthetic corpus generator.

pub mod classifier;
pub mod fewshot;
pub mod metrics;
pub mod report;
pub mod synthetic;
pub mod wsd;

pub use classifier::{train_linear_classifier, ClassifierOptions, LinearClassifier};
pub use fewshot::{run_fewshot_protocol, FewShotBenchmark, Inducer, Method, SimilarityPair};
pub use metrics::{rank_retrieval, spearman, RetrievalResult};
pub use report::EvalReport;
pub use synthetic::{generate_synthetic_corpus, SyntheticCorpus, SyntheticParams};
pub use wsd::disambiguate;
