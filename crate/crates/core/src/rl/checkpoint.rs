//! Policy checkpoint wire format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic            6 bytes  "VIVRL1"
//! n_dims           u32
//! layer_dims       n_dims x u32
//! activation tag   u8       (0 = tanh, 1 = relu)
//! log_std          action_dim x f64  (action_dim = last layer dim)
//! parameters       f64 x param_count, layer order:
//!                  weights row-major, then biases, per layer
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, VivError};
use crate::rl::gaussian::GaussianHead;
use crate::rl::net::{Activation, DenseNet};

pub const MAGIC: &[u8; 6] = b"VIVRL1";

pub fn save_policy(path: &Path, net: &DenseNet, head: &GaussianHead) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(net.layer_dims.len() as u32).to_le_bytes());
    for &d in &net.layer_dims {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    buf.push(net.activation.tag());
    if head.log_std.len() != net.output_dim() {
        return Err(VivError::Shape(format!(
            "head has {} log_std entries, net outputs {}",
            head.log_std.len(),
            net.output_dim()
        )));
    }
    for &ls in &head.log_std {
        buf.extend_from_slice(&ls.to_le_bytes());
    }
    let mut flat = Vec::new();
    net.write_flat(&mut flat);
    for v in flat {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<(DenseNet, GaussianHead)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut at = 0usize;

    let take = |at: &mut usize, n: usize| -> Result<&[u8]> {
        if *at + n > bytes.len() {
            return Err(VivError::Checkpoint(format!(
                "truncated checkpoint: needed {} bytes at offset {}",
                n, *at
            )));
        }
        let s = &bytes[*at..*at + n];
        *at += n;
        Ok(s)
    };

    if take(&mut at, 6)? != MAGIC {
        return Err(VivError::Checkpoint("bad magic; not a VIVRL1 file".into()));
    }
    let n_dims = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
    if !(2..=16).contains(&n_dims) {
        return Err(VivError::Checkpoint(format!(
            "implausible layer count {n_dims}"
        )));
    }
    let mut dims = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        dims.push(u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize);
    }
    let activation = Activation::from_tag(take(&mut at, 1)?[0])?;
    let action_dim = *dims.last().ok_or_else(|| {
        VivError::Checkpoint("empty dims".into())
    })?;
    let mut log_std = Vec::with_capacity(action_dim);
    for _ in 0..action_dim {
        log_std.push(f64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()));
    }

    let mut net = DenseNet::new(dims, activation)?;
    let mut flat = vec![0.0; net.param_count()];
    for v in flat.iter_mut() {
        *v = f64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap());
    }
    if at != bytes.len() {
        return Err(VivError::Checkpoint(format!(
            "{} trailing bytes after parameters",
            bytes.len() - at
        )));
    }
    net.read_flat(&flat)?;
    Ok((net, GaussianHead { log_std }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_preserves_everything() {
        let mut net = DenseNet::new(vec![4, 8, 1], Activation::Tanh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        net.init_scaled_uniform(&mut rng, 1.0, 0.01);
        let head = GaussianHead::new(1, -0.5);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        save_policy(&path, &net, &head).unwrap();
        let (net2, head2) = load_policy(&path).unwrap();
        assert_eq!(net.layer_dims, net2.layer_dims);
        assert_eq!(head.log_std, head2.log_std);
        for (a, b) in net.weights.iter().flatten().zip(net2.weights.iter().flatten()) {
            assert_eq!(a, b);
        }
        for (a, b) in net.biases.iter().flatten().zip(net2.biases.iter().flatten()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn header_is_bit_exact() {
        let net = DenseNet::new(vec![2, 3, 1], Activation::Tanh).unwrap();
        let head = GaussianHead::new(1, -0.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        save_policy(&path, &net, &head).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..6], b"VIVRL1");
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[14..18].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[18..22].try_into().unwrap()), 1);
        assert_eq!(bytes[22], 0); // tanh
        let ls = f64::from_le_bytes(bytes[23..31].try_into().unwrap());
        assert_eq!(ls, -0.5);
        // 6 + 4 + 12 + 1 + 8 + (2*3+3 + 3*1+1) * 8
        assert_eq!(bytes.len(), 31 + (9 + 4) * 8);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOTAVIVRL").unwrap();
        assert!(matches!(load_policy(&path), Err(VivError::Checkpoint(_))));

        let net = DenseNet::new(vec![2, 3, 1], Activation::Tanh).unwrap();
        let head = GaussianHead::new(1, -0.5);
        let good = dir.path().join("good.ckpt");
        save_policy(&good, &net, &head).unwrap();
        let mut bytes = std::fs::read(&good).unwrap();
        bytes.truncate(bytes.len() - 5);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_policy(&path), Err(VivError::Checkpoint(_))));
    }
}
