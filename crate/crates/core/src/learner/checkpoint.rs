//! Model checkpoints: one line of JSON header (`arch`, `version`, `len`)
//! terminated by `\n`, then `len` little-endian `f64` values.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ModelArch, ModelParams};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Header {
    arch: ModelArch,
    version: u32,
    len: usize,
}

pub fn write_checkpoint<W: Write>(params: &ModelParams, mut out: W) -> Result<()> {
    params.check()?;
    let header = Header {
        arch: params.arch.clone(),
        version: params.version,
        len: params.theta.len(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for t in &params.theta {
        out.write_all(&t.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(mut input: R) -> Result<ModelParams> {
    let mut line = Vec::new();
    input.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("checkpoint header is not newline-terminated".into()));
    }
    let header: Header = serde_json::from_slice(&line[..line.len() - 1])?;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != header.len * 8 {
        return Err(Error::Format(format!(
            "checkpoint declares {} values but carries {} bytes",
            header.len,
            body.len()
        )));
    }
    let theta = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let params = ModelParams {
        arch: header.arch,
        version: header.version,
        theta,
    };
    params.check()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(seed in any::<u64>(), version in 0u32..8) {
            let arch = ModelArch::mlp(3, &[4, 2], 2).unwrap();
            let mut p = ModelParams::init(arch, seed).unwrap();
            p.version = version;
            let mut buf = Vec::new();
            write_checkpoint(&p, &mut buf).unwrap();
            prop_assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), p);
        }
    }

    #[test]
    fn layout_is_header_then_le_floats() {
        let p = ModelParams { arch: ModelArch { widths: vec![1, 1, 1] }, version: 2, theta: vec![1.0, -2.0, 0.5, 0.25] };
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        let nl = buf.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(&buf[..nl], br#"{"arch":{"widths":[1,1,1]},"version":2,"len":4}"#);
        assert_eq!(&buf[nl + 1..nl + 9], &1.0f64.to_le_bytes());
        assert_eq!(buf.len(), nl + 1 + 32);
    }

    #[test]
    fn truncated_body_rejected() {
        let p = ModelParams { arch: ModelArch { widths: vec![1, 1, 1] }, version: 0, theta: vec![0.0; 4] };
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        buf.pop();
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
