use sha2::{Digest, Sha256};

/// 64-bit FNV-1a. Stable across platforms and compiler versions, unlike
/// `std::hash`.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Uniform draw in [0, 1) derived from a key, for per-item decisions that must
/// not depend on iteration order.
pub(crate) fn unit_hash(seed: u64, key: &str) -> f64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(key.as_bytes());
    let h = fnv1a(&bytes);
    // splitmix finaliser to spread low-entropy keys
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Largest-remainder apportionment of `total` across groups proportional to
/// `weights`. Ties go to the earlier group.
pub(crate) fn apportion(weights: &[usize], total: usize) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let mut out = Vec::with_capacity(weights.len());
    let mut rems = Vec::with_capacity(weights.len());
    for (i, w) in weights.iter().enumerate() {
        let exact = (*w as u128) * (total as u128);
        out.push((exact / sum as u128) as usize);
        rems.push(((exact % sum as u128) as usize, i));
    }
    let assigned: usize = out.iter().sum();
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, i) in rems.into_iter().take(total - assigned) {
        out[i] += 1;
    }
    out
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Pretty JSON with a trailing newline, written atomically enough for our
/// purposes (create parent, write whole file).
pub(crate) fn write_json<T: serde::Serialize + ?Sized>(path: &std::path::Path, value: &T) -> crate::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub(crate) fn write_bytes(path: &std::path::Path, bytes: &[u8]) -> crate::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| crate::Error::io(format!("creating {}", parent.display()), e))?;
    }
    std::fs::write(path, bytes).map_err(|e| crate::Error::io(format!("writing {}", path.display()), e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> crate::Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| crate::Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| crate::Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub(crate) fn read_bytes(path: &std::path::Path) -> crate::Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| crate::Error::io(format!("reading {}", path.display()), e))
}

/// SHA-256 of a value's JSON serialisation. Struct fields serialise in
/// declaration order and maps are `BTreeMap`s, so the text is canonical.
pub(crate) fn config_hash<T: serde::Serialize + ?Sized>(value: &T) -> crate::Result<String> {
    Ok(sha256_hex(serde_json::to_string(value)?.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_sums_to_total() {
        assert_eq!(apportion(&[3, 7], 2), vec![1, 1]);
        assert_eq!(apportion(&[238, 1231], 294).iter().sum::<usize>(), 294);
        assert_eq!(apportion(&[0, 0], 4), vec![0, 0]);
    }

    #[test]
    fn unit_hash_is_in_range_and_stable() {
        let a = unit_hash(7, "s1");
        assert!((0.0..1.0).contains(&a));
        assert_eq!(a, unit_hash(7, "s1"));
        assert_ne!(a, unit_hash(8, "s1"));
    }
}
