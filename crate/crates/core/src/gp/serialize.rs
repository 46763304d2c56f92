//! Binary model file: magic `TGP1`, then little-endian `N: u64`, hyper
//! (`w0..w3, sigma_s, sigma_y` as f64), `mean_const`, `X` row-major (N x 4),
//! `alpha` (N), and the row-major packed lower Cholesky factor (N(N+1)/2).

use std::fs;
use std::io::Write;
use std::path::Path;

use super::cholesky::PackedLower;
use super::{FeatureVector, FittedGp, Hyperparams, DIM};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"TGP1";

fn expected_len(n: usize) -> Option<usize> {
    let floats = 6usize
        .checked_add(1)?
        .checked_add(n.checked_mul(DIM)?)?
        .checked_add(n)?
        .checked_add(n.checked_mul(n.checked_add(1)?)? / 2)?;
    floats.checked_mul(8)?.checked_add(4 + 8)
}

pub fn encode_model(gp: &FittedGp) -> Vec<u8> {
    let n = gp.len();
    let mut out = Vec::with_capacity(expected_len(n).unwrap_or(0));
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    let h = gp.hyper();
    let head = [
        h.w[0],
        h.w[1],
        h.w[2],
        h.w[3],
        h.sigma_s,
        h.sigma_y,
        gp.mean_const(),
    ];
    let body = gp
        .inputs()
        .iter()
        .flatten()
        .chain(gp.alpha())
        .chain(gp.cholesky().as_packed());
    for v in head.iter().chain(body) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<FittedGp> {
    if bytes.len() < 12 || &bytes[..4] != MODEL_MAGIC {
        return Err(Error::Format("not a TGP1 model file (bad magic)".into()));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes"));
    let n = usize::try_from(n).map_err(|_| Error::Format(format!("model size {n} too large")))?;
    match expected_len(n) {
        Some(len) if len == bytes.len() => {}
        _ => {
            return Err(Error::Format(format!(
                "model declares N = {n} but file has {} bytes",
                bytes.len()
            )))
        }
    }
    let mut floats = bytes[12..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut take = |k: usize| -> Vec<f64> { floats.by_ref().take(k).collect() };
    let head = take(7);
    let hyper = Hyperparams::new([head[0], head[1], head[2], head[3]], head[4], head[5])
        .map_err(|e| Error::Format(format!("invalid hyperparameters in model: {e}")))?;
    let x: Vec<FeatureVector> = take(n * DIM)
        .chunks_exact(DIM)
        .map(|c| [c[0], c[1], c[2], c[3]])
        .collect();
    let alpha = take(n);
    let chol = PackedLower::from_packed(n, take(n * (n + 1) / 2))?;
    if chol.diag().any(|d| !(d > 0.0)) {
        return Err(Error::Format(
            "Cholesky factor has a non-positive diagonal".into(),
        ));
    }
    FittedGp::from_parts(x, hyper, head[6], chol, alpha, 0.0)
}

pub fn write_model(gp: &FittedGp, path: &Path) -> Result<()> {
    let bytes = encode_model(gp);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<FittedGp> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{fit, TrainingSet};

    fn model() -> FittedGp {
        let x = vec![
            [0.0, 0.1, 0.5, 10.0],
            [0.2, -0.1, 0.6, 13.0],
            [0.1, 0.0, 0.7, 16.0],
        ];
        let t = TrainingSet::new(x, vec![0.01, -0.003, 0.02]).unwrap();
        fit(
            &t,
            &Hyperparams::new([2.0, 0.04, 1.29, 0.002], 0.031, 0.044).unwrap(),
            0.001,
        )
        .unwrap()
    }

    #[test]
    fn layout_is_exact() {
        let gp = model();
        let bytes = encode_model(&gp);
        assert_eq!(&bytes[..4], b"TGP1");
        assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 12 + 8 * (7 + 12 + 3 + 6));
        let sigma_s = f64::from_le_bytes(bytes[12 + 4 * 8..12 + 5 * 8].try_into().unwrap());
        assert_eq!(sigma_s, 0.031);
        // L(1,0) is the second packed entry
        let l_off = 12 + 8 * (7 + 12 + 3);
        let l10 = f64::from_le_bytes(bytes[l_off + 8..l_off + 16].try_into().unwrap());
        assert_eq!(l10, gp.cholesky().get(1, 0));
    }

    #[test]
    fn round_trip_preserves_predictions() {
        let gp = model();
        let back = decode_model(&encode_model(&gp)).unwrap();
        let q = [[0.05, 0.0, 0.55, 12.0]];
        assert_eq!(gp.predict(&q).unwrap(), back.predict(&q).unwrap());
        assert_eq!(back.inputs(), gp.inputs());
    }

    #[test]
    fn rejects_bad_magic_and_size() {
        let mut bytes = encode_model(&model());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_model(&bad), Err(Error::Format(_))));
        bytes.pop();
        assert!(matches!(decode_model(&bytes), Err(Error::Format(_))));
        let mut huge = encode_model(&model());
        huge[4..12].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode_model(&huge), Err(Error::Format(_))));
    }
}
