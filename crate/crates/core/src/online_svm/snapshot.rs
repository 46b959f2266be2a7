//! Debug snapshot: a text header followed by little-endian `f64` records.

use std::io::{Read, Write};

use super::{Example, MarginSet, SvmError, SvmModel};

const MAGIC: &str = "SALTRK-SVM-1";

pub fn write_snapshot<W: Write>(model: &SvmModel, mut out: W) -> Result<(), SvmError> {
    let err = |e: std::io::Error| SvmError::Snapshot(e.to_string());
    let dim = model.dim.unwrap_or(0);
    write!(
        out,
        "{MAGIC}\nC {:e}\ndim {dim}\nn {}\nbias {:e}\nmargin {}\n",
        model.c,
        model.examples.len(),
        model.bias,
        model.on_margin.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
    )
    .map_err(err)?;
    for e in &model.examples {
        let set = match e.set {
            MarginSet::E1 => 1.0,
            MarginSet::E2 => 2.0,
            MarginSet::E3 => 3.0,
        };
        for v in [e.y, e.alpha, set].iter().chain(&e.x) {
            out.write_all(&v.to_le_bytes()).map_err(err)?;
        }
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<SvmModel, SvmError> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| SvmError::Snapshot(e.to_string()))?;
    let bad = |msg: &str| SvmError::Snapshot(msg.to_string());

    // Six header lines.
    let mut pos = 0;
    let mut header = Vec::new();
    for _ in 0..6 {
        let end = bytes[pos..].iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated header"))?;
        header.push(String::from_utf8_lossy(&bytes[pos..pos + end]).into_owned());
        pos += end + 1;
    }
    if header[0] != MAGIC {
        return Err(bad("bad magic"));
    }
    let field = |i: usize, key: &str| -> Result<String, SvmError> {
        header[i]
            .strip_prefix(key)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| bad(&format!("expected {key}")))
    };
    let c: f64 = field(1, "C")?.parse().map_err(|_| bad("C"))?;
    let dim: usize = field(2, "dim")?.parse().map_err(|_| bad("dim"))?;
    let n: usize = field(3, "n")?.parse().map_err(|_| bad("n"))?;
    let bias: f64 = field(4, "bias")?.parse().map_err(|_| bad("bias"))?;
    let on_margin: Result<Vec<usize>, _> = field(5, "margin")?.split_whitespace().map(str::parse).collect();
    let on_margin = on_margin.map_err(|_| bad("margin"))?;

    let rec = 3 + dim;
    let body = &bytes[pos..];
    if body.len() != n * rec * 8 {
        return Err(bad("payload length does not match header"));
    }
    let vals: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();

    let mut model = SvmModel::new(c)?;
    model.dim = if n > 0 || dim > 0 { Some(dim) } else { None };
    model.bias = bias;
    for r in vals.chunks_exact(rec) {
        let set = match r[2] as u8 {
            1 => MarginSet::E1,
            2 => MarginSet::E2,
            3 => MarginSet::E3,
            _ => return Err(bad("bad set code")),
        };
        model.examples.push(Example {
            x: r[3..].to_vec(),
            y: r[0],
            alpha: r[1],
            g: 0.0,
            set,
        });
    }
    if on_margin.iter().any(|&i| i >= n) {
        return Err(bad("margin index out of range"));
    }
    model.on_margin = on_margin;
    model.rebuild_system();
    model.refresh();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip() {
        let mut m = SvmModel::new(0.5).unwrap();
        m.partial_fit(&[
            (vec![1.0, 0.5], 1.0),
            (vec![-1.0, 0.2], -1.0),
            (vec![0.3, -0.4], -1.0),
            (vec![2.0, 2.0], 1.0),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_snapshot(&m, &mut buf).unwrap();
        let mut r = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(r.alphas(), m.alphas());
        assert_eq!(r.bias(), m.bias());
        assert_eq!(r.weight_vector(), m.weight_vector());
        // The restored model keeps learning exactly.
        r.learn_one(&[0.0, 1.0], 1.0).unwrap();
        assert!(r.kkt_violation() < 1e-9);
    }

    #[test]
    fn truncated_snapshot_rejected() {
        assert!(read_snapshot(&b"SALTRK-SVM-1\nC 1\n"[..]).is_err());
    }
}
