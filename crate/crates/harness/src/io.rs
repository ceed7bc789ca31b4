//! Key files (raw little-endian `u64`, no header) and rank files (one
//! decimal rank per line, strictly increasing).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::{HarnessError, Result};

pub fn decode_keys(bytes: &[u8]) -> Result<Vec<u64>> {
    if bytes.len() % 8 != 0 {
        return Err(HarnessError::Workload(format!(
            "key file length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn encode_keys(keys: &[u64]) -> Vec<u8> {
    keys.iter().flat_map(|k| k.to_le_bytes()).collect()
}

pub fn read_keys(path: &Path) -> Result<Vec<u64>> {
    decode_keys(&fs::read(path)?)
}

pub fn write_keys(path: &Path, keys: &[u64]) -> Result<()> {
    fs::write(path, encode_keys(keys))?;
    Ok(())
}

/// Parses newline-delimited ranks; blank lines are skipped. Only the
/// format is checked here, range and order are validated by the caller.
pub fn parse_ranks(text: &str, origin: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(line.parse().map_err(|e| HarnessError::Parse {
            path: origin.to_string(),
            line: i + 1,
            msg: format!("{e}: {line:?}"),
        })?);
    }
    Ok(out)
}

pub fn read_ranks(path: &Path) -> Result<Vec<usize>> {
    parse_ranks(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn write_ranks(path: &Path, ranks: &[usize]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for r in ranks {
        writeln!(f, "{r}")?;
    }
    f.flush()?;
    Ok(())
}

/// A comma-separated list, or `@path` for a rank file.
pub fn parse_rank_arg(arg: &str) -> Result<Vec<usize>> {
    if let Some(path) = arg.strip_prefix('@') {
        return read_ranks(Path::new(path));
    }
    let list = arg.replace(',', "\n");
    parse_ranks(&list, "--ranks")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_round_trip() {
        let keys = [0u64, 1, u64::MAX, 1 << 40];
        let bytes = encode_keys(&keys);
        assert_eq!(bytes.len(), 32);
        assert_eq!(&bytes[8..16], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(decode_keys(&bytes).unwrap(), keys);
        assert!(decode_keys(&bytes[..7]).is_err());
    }

    #[test]
    fn rank_lists() {
        assert_eq!(parse_rank_arg("1,2,3,8").unwrap(), vec![1, 2, 3, 8]);
        assert_eq!(parse_ranks("4\n\n 9\n", "x").unwrap(), vec![4, 9]);
        assert!(matches!(
            parse_ranks("4\nfive\n", "x"),
            Err(HarnessError::Parse { line: 2, .. })
        ));
    }
}
