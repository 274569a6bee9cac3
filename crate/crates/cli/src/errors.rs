//! Error classification: every library error maps to a stable machine-
//! readable kind and one of two exit codes. Code 2 means an input file or
//! flag value violated its schema; code 3 means the input was well-formed
//! but the numerics could not deliver (degenerate data, unphysical results,
//! exhausted budgets).

use std::path::Path;

use biphoton::counts::CountsError;
use biphoton::fitstats::FitError;
use biphoton::io::IoError;
use biphoton::mcerr::McError;
use biphoton::metrics::MetricsError;
use biphoton::qstate::StateError;
use biphoton::tomo::TomoError;

pub const EXIT_SCHEMA: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// A classified failure ready to print and exit with.
#[derive(Debug)]
pub struct AppError {
    pub kind: &'static str,
    pub message: String,
    pub code: u8,
}

impl AppError {
    pub fn file(path: &Path, err: std::io::Error) -> Self {
        AppError {
            kind: "io",
            message: format!("{}: {err}", path.display()),
            code: EXIT_SCHEMA,
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        AppError {
            kind: "bad_arguments",
            message: message.into(),
            code: EXIT_SCHEMA,
        }
    }
}

fn classify_state(err: &StateError) -> (&'static str, u8) {
    // A state file that parses but fails validation (wrong shape, not
    // Hermitian, not a unit-trace PSD matrix) is a schema problem: the file
    // does not contain what it claims to.
    match err {
        StateError::UnsupportedDimension(_) | StateError::DimensionMismatch { .. } => {
            ("bad_shape", EXIT_SCHEMA)
        }
        _ => ("invalid_state", EXIT_SCHEMA),
    }
}

fn classify_tomo(err: &TomoError) -> (&'static str, u8) {
    match err {
        TomoError::BadLabel(_) => ("bad_label", EXIT_SCHEMA),
        TomoError::DuplicateSetting(_) => ("duplicate_setting", EXIT_SCHEMA),
        TomoError::InvalidRecord { .. } => ("invalid_record", EXIT_SCHEMA),
        TomoError::BadConfig(_) => ("bad_config", EXIT_SCHEMA),
        TomoError::DegenerateSigma(_) => ("degenerate_sigma", EXIT_NUMERICAL),
        TomoError::UnderdeterminedSystem { .. } => ("underdetermined_system", EXIT_NUMERICAL),
    }
}

fn classify_counts(err: &CountsError) -> (&'static str, u8) {
    match err {
        CountsError::DuplicateSetting(_) => ("duplicate_setting", EXIT_SCHEMA),
        CountsError::MissingRule(_) => ("missing_rule", EXIT_SCHEMA),
        CountsError::MissingSetting { .. } => ("missing_setting", EXIT_SCHEMA),
        CountsError::BadRule(_) => ("bad_rule", EXIT_SCHEMA),
        CountsError::BadParameters(_) => ("bad_parameters", EXIT_SCHEMA),
        CountsError::ZeroCoincidences(_) => ("zero_coincidences", EXIT_NUMERICAL),
        CountsError::ZeroAccidentals(_) => ("zero_accidentals", EXIT_NUMERICAL),
        CountsError::ZeroPeaks(_) => ("zero_peaks", EXIT_NUMERICAL),
        CountsError::ZeroDenominator(_) => ("zero_denominator", EXIT_NUMERICAL),
        CountsError::NoCompleteQuadruple => ("no_complete_quadruple", EXIT_NUMERICAL),
    }
}

fn classify_metrics(err: &MetricsError) -> (&'static str, u8) {
    match err {
        MetricsError::NotTwoPhoton(_) | MetricsError::NotSingleQubit(_) => {
            ("bad_shape", EXIT_SCHEMA)
        }
        MetricsError::OutOfRange { .. } => ("out_of_range", EXIT_NUMERICAL),
        MetricsError::DegenerateDenominator => ("degenerate_denominator", EXIT_NUMERICAL),
    }
}

fn classify_mc(err: &McError) -> (&'static str, u8) {
    match err {
        McError::BadParameters(_) => ("bad_parameters", EXIT_SCHEMA),
        McError::NonPhysical { .. } => ("non_physical", EXIT_NUMERICAL),
        McError::RejectionBudgetExhausted { .. } => {
            ("rejection_budget_exhausted", EXIT_NUMERICAL)
        }
        McError::EmptyEnsemble => ("empty_ensemble", EXIT_NUMERICAL),
        McError::Member { source, .. } => (classify_tomo(source).0, EXIT_NUMERICAL),
        McError::Metrics(inner) => classify_metrics(inner),
    }
}

fn classify_fit(err: &FitError) -> (&'static str, u8) {
    match err {
        FitError::TooFewPoints { .. } => ("too_few_points", EXIT_SCHEMA),
        FitError::InvalidPoint { .. } => ("invalid_point", EXIT_SCHEMA),
        FitError::BadPeriod(_) => ("bad_period", EXIT_SCHEMA),
        FitError::NonPositiveSigma(_) => ("non_positive_sigma", EXIT_SCHEMA),
        FitError::SingularDesign => ("singular_design", EXIT_NUMERICAL),
    }
}

fn classify_io(err: &IoError) -> (&'static str, u8) {
    match err {
        IoError::Json(_) => ("json", EXIT_SCHEMA),
        IoError::BadShape(_) => ("bad_shape", EXIT_SCHEMA),
        IoError::Csv { .. } => ("csv", EXIT_SCHEMA),
        IoError::State(inner) => classify_state(inner),
        IoError::Tomo(inner) => classify_tomo(inner),
    }
}

macro_rules! convert {
    ($err:ty, $classify:ident) => {
        impl From<$err> for AppError {
            fn from(err: $err) -> Self {
                let (kind, code) = $classify(&err);
                AppError {
                    kind,
                    message: err.to_string(),
                    code,
                }
            }
        }
    };
}

convert!(IoError, classify_io);
convert!(StateError, classify_state);
convert!(TomoError, classify_tomo);
convert!(CountsError, classify_counts);
convert!(MetricsError, classify_metrics);
convert!(McError, classify_mc);
convert!(FitError, classify_fit);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_and_numerical_failures_split_as_documented() {
        let schema: AppError = TomoError::BadLabel("XZ".into()).into();
        assert_eq!(schema.code, EXIT_SCHEMA);
        assert_eq!(schema.kind, "bad_label");

        let numerical: AppError = McError::NonPhysical {
            min_eigenvalue: -0.02,
        }
        .into();
        assert_eq!(numerical.code, EXIT_NUMERICAL);
        assert_eq!(numerical.kind, "non_physical");

        let nested: AppError = IoError::Tomo(TomoError::DuplicateSetting(
            "HH".parse().unwrap(),
        ))
        .into();
        assert_eq!(nested.code, EXIT_SCHEMA);
        assert_eq!(nested.kind, "duplicate_setting");
    }
}
