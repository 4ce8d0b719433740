//! Small hand-checkable three-label instances used throughout the tests,
//! the acceptance suite and the `verify` command.
//!
//! Both share the score vector `f = (0.4, 0.35, 0.25)`.

use crate::types::{validate_confusion, ConfusionMatrix, ProbVector, INGEST_TOL};

fn scores() -> ProbVector {
    ProbVector::new(vec![0.4, 0.35, 0.25]).expect("valid fixture scores")
}

/// An instance where no ranking prefix is optimal: the best set is `{2,3}`
/// (value 0.6) while the best prefix `{1,2,3}` reaches only 37/75.
///
/// The first column is given rounded (0.33 each, summing to 0.99) and is
/// renormalized on validation; ratios, hence objective values, are unaffected.
pub fn conformal_gap_instance() -> (ProbVector, ConfusionMatrix) {
    let c = validate_confusion(
        vec![
            vec![0.33, 0.4, 0.4],
            vec![0.33, 0.6, 0.0],
            vec![0.33, 0.0, 0.6],
        ],
        INGEST_TOL,
    )
    .expect("valid fixture matrix");
    (scores(), c)
}

/// An instance whose objective is neither monotone nor submodular:
/// values 0.4, 103/300 and 0.44 on `{1}`, `{1,2}`, `{1,2,3}`.
pub fn non_monotone_instance() -> (ProbVector, ConfusionMatrix) {
    let c = validate_confusion(
        vec![
            vec![0.2, 0.4, 0.4],
            vec![0.4, 0.6, 0.0],
            vec![0.4, 0.0, 0.6],
        ],
        1e-9,
    )
    .expect("valid fixture matrix");
    (scores(), c)
}
