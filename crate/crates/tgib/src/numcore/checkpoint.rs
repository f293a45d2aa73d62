//! Single-file checkpoint format: magic, format version byte, a JSON header
//! for hyperparameters, then named tensors as raw little-endian f64.
//!
//! Layout:
//! ```text
//! "TGCK"  u8 version  u32 header_len  header (utf-8 json)
//! u32 tensor_count
//! per tensor: u16 name_len, name, u32 rows, u32 cols, rows*cols f64 (LE)
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::Tensor;

const MAGIC: &[u8; 4] = b"TGCK";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0}")]
    BadVersion(u8),
    #[error("truncated checkpoint: missing {section}")]
    Truncated { section: &'static str },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

fn read_exact(
    r: &mut impl Read,
    buf: &mut [u8],
    section: &'static str,
) -> Result<(), CheckpointError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            CheckpointError::Truncated { section }
        } else {
            CheckpointError::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read, section: &'static str) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, section)?;
    Ok(u32::from_le_bytes(b))
}

pub fn save_checkpoint(
    path: &Path,
    header: &str,
    tensors: &[(&str, &Tensor)],
) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[FORMAT_VERSION])?;
    let hb = header.as_bytes();
    w.write_all(&(hb.len() as u32).to_le_bytes())?;
    w.write_all(hb)?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        let nb = name.as_bytes();
        w.write_all(&(nb.len() as u16).to_le_bytes())?;
        w.write_all(nb)?;
        w.write_all(&(t.rows() as u32).to_le_bytes())?;
        w.write_all(&(t.cols() as u32).to_le_bytes())?;
        for x in &t.data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Returns the header string and the named tensors in file order.
pub fn load_checkpoint(path: &Path) -> Result<(String, Vec<(String, Tensor)>), CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut ver = [0u8; 1];
    read_exact(&mut r, &mut ver, "format version")?;
    if ver[0] != FORMAT_VERSION {
        return Err(CheckpointError::BadVersion(ver[0]));
    }
    let hlen = read_u32(&mut r, "header length")? as usize;
    let mut hb = vec![0u8; hlen];
    read_exact(&mut r, &mut hb, "header")?;
    let header =
        String::from_utf8(hb).map_err(|e| CheckpointError::Corrupt(format!("header: {e}")))?;

    let count = read_u32(&mut r, "tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let mut nlen = [0u8; 2];
        read_exact(&mut r, &mut nlen, "tensor name length")?;
        let mut nb = vec![0u8; u16::from_le_bytes(nlen) as usize];
        read_exact(&mut r, &mut nb, "tensor name")?;
        let name = String::from_utf8(nb)
            .map_err(|e| CheckpointError::Corrupt(format!("tensor name: {e}")))?;
        let rows = read_u32(&mut r, "tensor shape")? as usize;
        let cols = read_u32(&mut r, "tensor shape")? as usize;
        let mut data = vec![0.0f64; rows * cols];
        for x in data.iter_mut() {
            let mut b = [0u8; 8];
            read_exact(&mut r, &mut b, "tensor data")?;
            *x = f64::from_le_bytes(b);
        }
        let t = Tensor::from_vec(rows, cols, data)
            .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        tensors.push((name, t));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(CheckpointError::Corrupt(
            "trailing bytes after last tensor".to_string(),
        ));
    }
    Ok((header, tensors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn sample_tensors() -> Vec<(String, Tensor)> {
        vec![
            (
                "layer0.w_q".to_string(),
                Tensor::from_vec(2, 3, vec![1.0, -2.0, 0.5, 3.25, 0.0, -0.125]).unwrap(),
            ),
            (
                "time.omega".to_string(),
                Tensor::from_vec(1, 4, vec![1.0, 0.1, 0.01, 0.001]).unwrap(),
            ),
        ]
    }

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let tensors = sample_tensors();
        let refs: Vec<(&str, &Tensor)> = tensors.iter().map(|(n, t)| (n.as_str(), t)).collect();
        save_checkpoint(&path, r#"{"embed_dim":8}"#, &refs).unwrap();

        let (header, loaded) = load_checkpoint(&path).unwrap();
        assert_eq!(header, r#"{"embed_dim":8}"#);
        assert_eq!(loaded.len(), 2);
        for ((n0, t0), (n1, t1)) in tensors.iter().zip(&loaded) {
            assert_eq!(n0, n1);
            assert_eq!(t0.shape, t1.shape);
            assert_eq!(t0.data, t1.data);
        }
    }

    #[test]
    fn save_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
        let tensors = sample_tensors();
        let refs: Vec<(&str, &Tensor)> = tensors.iter().map(|(n, t)| (n.as_str(), t)).collect();
        save_checkpoint(&a, "{}", &refs).unwrap();
        save_checkpoint(&b, "{}", &refs).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let tensors = sample_tensors();
        let refs: Vec<(&str, &Tensor)> = tensors.iter().map(|(n, t)| (n.as_str(), t)).collect();
        save_checkpoint(&path, "{}", &refs).unwrap();
        let bytes = fs::read(&path).unwrap();

        let bad_magic = path.with_extension("magic");
        let mut m = bytes.clone();
        m[0] = b'X';
        fs::write(&bad_magic, &m).unwrap();
        assert!(matches!(
            load_checkpoint(&bad_magic),
            Err(CheckpointError::BadMagic)
        ));

        let bad_ver = path.with_extension("ver");
        let mut v = bytes.clone();
        v[4] = 99;
        fs::write(&bad_ver, &v).unwrap();
        assert!(matches!(
            load_checkpoint(&bad_ver),
            Err(CheckpointError::BadVersion(99))
        ));

        let trunc = path.with_extension("trunc");
        fs::write(&trunc, &bytes[..bytes.len() - 11]).unwrap();
        match load_checkpoint(&trunc) {
            Err(CheckpointError::Truncated { section }) => assert_eq!(section, "tensor data"),
            other => panic!("expected truncation error, got {other:?}"),
        }

        let extra = path.with_extension("extra");
        let mut e = bytes;
        e.push(0);
        fs::write(&extra, &e).unwrap();
        assert!(matches!(
            load_checkpoint(&extra),
            Err(CheckpointError::Corrupt(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_checkpoint(Path::new("/nonexistent/nope.ckpt")).unwrap_err();
        assert!(matches!(err, CheckpointError::Io(_)));
    }
}
