use bookrec_core::corpus::CorpusError;
use bookrec_core::evaluation::EvalError;
use bookrec_core::hybrid::HybridError;
use bookrec_core::predictor::PredictError;
use bookrec_core::similarity::SimilarityError;

/// A failed command, classified by exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad files, flags or config values. Exit 1.
    Input(String),
    /// Well-formed input the model cannot serve, such as an unknown user.
    /// Exit 2.
    Domain(String),
    /// Anything else. Exit 3.
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Failure>;

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Domain(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Domain(m) | Failure::Internal(m) => m,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Failure::Input(msg.into())
    }

    pub fn internal(msg: impl std::fmt::Display) -> Self {
        Failure::Internal(msg.to_string())
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        let msg = e.to_string();
        match e {
            CorpusError::UnknownUser(_) => Failure::Domain(msg),
            CorpusError::CatalogMismatch(_) => Failure::Internal(msg),
            _ => Failure::Input(msg),
        }
    }
}

impl From<PredictError> for Failure {
    fn from(e: PredictError) -> Self {
        match e {
            PredictError::InvalidK(_) => Failure::Input(e.to_string()),
            _ => Failure::internal(e),
        }
    }
}

impl From<HybridError> for Failure {
    fn from(e: HybridError) -> Self {
        let msg = e.to_string();
        match e {
            HybridError::UnknownUser(_) => Failure::Domain(msg),
            HybridError::InvalidLimit | HybridError::AlphaOutOfRange(_) | HybridError::InvalidTopN => {
                Failure::Input(msg)
            }
            HybridError::Predict(p) => p.into(),
            HybridError::Corpus(c) => c.into(),
            HybridError::KindMismatch { .. } | HybridError::InconsistentEngine(_) => Failure::Internal(msg),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let msg = e.to_string();
        match e {
            EvalError::EmptyTestSet | EvalError::NoEvaluableUsers => Failure::Domain(msg),
            EvalError::InvalidThreshold(_) => Failure::Input(msg),
            EvalError::Hybrid(h) => h.into(),
            EvalError::Csv(_) | EvalError::Io(_) => Failure::Internal(msg),
        }
    }
}

impl From<SimilarityError> for Failure {
    fn from(e: SimilarityError) -> Self {
        match e {
            SimilarityError::Corpus(c) => c.into(),
            other => Failure::internal(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::internal(e)
    }
}
