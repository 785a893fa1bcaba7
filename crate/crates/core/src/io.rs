//! Operator JSON: `{"modes": m, "dims": [d1, ..], "matrix": [[[re, im], ..], ..]}`,
//! row-major over the tensor number basis with mode 1 slowest.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockOperator, C64};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorFile {
    modes: usize,
    dims: Vec<usize>,
    matrix: Vec<Vec<[f64; 2]>>,
}

pub fn operator_from_json(text: &str) -> Result<FockOperator> {
    let file: OperatorFile = serde_json::from_str(text)?;
    if file.modes != file.dims.len() {
        return Err(Error::Format(format!("modes = {} but {} cutoffs given", file.modes, file.dims.len())));
    }
    let size: usize = file.dims.iter().product();
    if file.matrix.len() != size || file.matrix.iter().any(|row| row.len() != size) {
        return Err(Error::Format(format!("matrix must be {size} x {size} for cutoffs {:?}", file.dims)));
    }
    let m = DMatrix::from_fn(size, size, |r, c| C64::new(file.matrix[r][c][0], file.matrix[r][c][1]));
    FockOperator::new(file.dims, m)
}

pub fn operator_to_json(op: &FockOperator) -> String {
    let m = op.matrix();
    let file = OperatorFile {
        modes: op.modes(),
        dims: op.dims().to_vec(),
        matrix: (0..op.size()).map(|r| (0..op.size()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect(),
    };
    serde_json::to_string(&file).expect("plain data serialises")
}

pub fn read_operator(path: impl AsRef<Path>) -> Result<FockOperator> {
    operator_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_operator(op: &FockOperator, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, operator_to_json(op))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 3)] = C64::new(0.1 / 3.0, -0.2);
        m[(3, 0)] = C64::new(0.1 / 3.0, 0.2);
        m[(1, 1)] = C64::new(1.0, 0.0);
        let op = FockOperator::new(vec![2, 2], m).unwrap();
        let back = operator_from_json(&operator_to_json(&op)).unwrap();
        assert_eq!(back.matrix(), op.matrix());
        assert_eq!(back.dims(), op.dims());
    }

    #[test]
    fn arbitrary_floats_survive_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = DMatrix::from_fn(6, 6, |_, _| C64::new(rng.gen::<f64>() / 7.0, 0.0));
        let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let op = FockOperator::new(vec![6], m).unwrap();
        assert_eq!(operator_from_json(&operator_to_json(&op)).unwrap().matrix(), op.matrix());
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(operator_from_json("{"), Err(Error::Json(_))));
        let bad = r#"{"modes": 2, "dims": [2], "matrix": [[[1,0],[0,0]],[[0,0],[0,0]]]}"#;
        assert!(matches!(operator_from_json(bad), Err(Error::Format(_))));
        let short = r#"{"modes": 1, "dims": [2], "matrix": [[[1,0]]]}"#;
        assert!(matches!(operator_from_json(short), Err(Error::Format(_))));
    }
}
