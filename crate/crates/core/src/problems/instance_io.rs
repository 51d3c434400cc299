//! Versioned binary container for generated instances.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "RFVIINST"
//! version u32      currently 1
//! hlen    u64      length of the JSON header in bytes
//! header  hlen     {"kind", "meta", "arrays": [{"name", "shape"}, ...]}
//! payload          f64 LE values of each listed array, in order
//! ```
//!
//! Matrices are stored column-major. Every floating-point value that affects
//! a run lives in the payload, so a reloaded instance is bit-identical.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::families::QuadraticConstraint;
use super::{ImitationGame, ImitationGameParams, MatrixGame, MatrixGameAgent, MatrixGameParams, ProblemData};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RFVIINST";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ArrayHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    meta: serde_json::Value,
    arrays: Vec<ArrayHeader>,
}

#[derive(Default)]
struct Arrays {
    headers: Vec<ArrayHeader>,
    data: Vec<f64>,
}

impl Arrays {
    fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, values: &[f64]) {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.headers.push(ArrayHeader {
            name: name.into(),
            shape,
        });
        self.data.extend_from_slice(values);
    }
}

fn format_err(message: impl Into<String>) -> Error {
    Error::Format {
        path: "<instance>".into(),
        message: message.into(),
    }
}

fn encode_parts(kind: &str, meta: serde_json::Value, arrays: Arrays) -> Vec<u8> {
    let header = Header {
        kind: kind.to_string(),
        meta,
        arrays: arrays.headers,
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(20 + header.len() + 8 * arrays.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for v in &arrays.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode(data: &ProblemData) -> Vec<u8> {
    let mut arrays = Arrays::default();
    match data {
        ProblemData::MatrixGame(g) => {
            let n = g.jacobian.nrows();
            let d = g.params.n_per_agent;
            arrays.push("mu_lipschitz", vec![2], &[g.mu, g.lipschitz]);
            arrays.push("jacobian", vec![n, n], g.jacobian.as_slice());
            arrays.push("offset", vec![n], &g.offset);
            arrays.push("solution", vec![n], &g.solution);
            for (a, agent) in g.agents.iter().enumerate() {
                let m = agent.constraints.len();
                let q: Vec<f64> = agent
                    .constraints
                    .iter()
                    .flat_map(|c| c.q.as_slice().iter().copied())
                    .collect();
                let b: Vec<f64> = agent.constraints.iter().flat_map(|c| c.b.iter().copied()).collect();
                let c: Vec<f64> = agent.constraints.iter().map(|c| c.c).collect();
                arrays.push(format!("agent{a}.q"), vec![m, d, d], &q);
                arrays.push(format!("agent{a}.b"), vec![m, d], &b);
                arrays.push(format!("agent{a}.c"), vec![m], &c);
                arrays.push(format!("agent{a}.slack"), vec![m], &agent.slack);
                arrays.push(format!("agent{a}.curvature"), vec![m], &agent.curvature);
                arrays.push(format!("agent{a}.constants"), vec![2], &[agent.mg, agent.regularity_c]);
            }
            encode_parts("matrix_game", serde_json::to_value(&g.params).expect("params"), arrays)
        }
        ProblemData::Imitation(g) => {
            arrays.push("constants", vec![2], &[g.mg, g.regularity_c]);
            encode_parts("imitation", serde_json::to_value(&g.params).expect("params"), arrays)
        }
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Option<u32> {
    Some(u32::from_le_bytes(bytes.get(at..at + 4)?.try_into().ok()?))
}

fn read_u64(bytes: &[u8], at: usize) -> Option<u64> {
    Some(u64::from_le_bytes(bytes.get(at..at + 8)?.try_into().ok()?))
}

pub fn decode(bytes: &[u8]) -> Result<ProblemData> {
    if bytes.get(..8) != Some(MAGIC.as_slice()) {
        return Err(format_err("missing RFVIINST magic"));
    }
    let version = read_u32(bytes, 8).ok_or_else(|| format_err("truncated version"))?;
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let hlen = read_u64(bytes, 12).ok_or_else(|| format_err("truncated header length"))? as usize;
    let header_bytes = bytes
        .get(20..20 + hlen)
        .ok_or_else(|| format_err("truncated header"))?;
    let header: Header =
        serde_json::from_slice(header_bytes).map_err(|e| format_err(format!("bad header: {e}")))?;

    let payload = &bytes[20 + hlen..];
    let total: usize = header
        .arrays
        .iter()
        .map(|a| a.shape.iter().product::<usize>())
        .sum();
    if payload.len() != 8 * total {
        return Err(format_err(format!(
            "payload holds {} bytes, header describes {}",
            payload.len(),
            8 * total
        )));
    }
    let mut arrays: HashMap<String, (Vec<usize>, Vec<f64>)> = HashMap::new();
    let mut at = 0;
    for a in header.arrays {
        let len: usize = a.shape.iter().product();
        let values = payload[at..at + 8 * len]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        at += 8 * len;
        arrays.insert(a.name, (a.shape, values));
    }
    let mut take = |name: &str| -> Result<(Vec<usize>, Vec<f64>)> {
        arrays
            .remove(name)
            .ok_or_else(|| format_err(format!("missing array `{name}`")))
    };

    match header.kind.as_str() {
        "matrix_game" => {
            let params: MatrixGameParams = serde_json::from_value(header.meta)
                .map_err(|e| format_err(format!("bad matrix game params: {e}")))?;
            let d = params.n_per_agent;
            let n = 2 * d;
            let (_, ml) = take("mu_lipschitz")?;
            let (shape, jac) = take("jacobian")?;
            if shape != [n, n] {
                return Err(format_err("jacobian shape does not match the generator parameters"));
            }
            let (_, offset) = take("offset")?;
            let (_, solution) = take("solution")?;
            let mut agents = Vec::with_capacity(2);
            for a in 0..2 {
                let (qshape, q) = take(&format!("agent{a}.q"))?;
                let (_, b) = take(&format!("agent{a}.b"))?;
                let (_, c) = take(&format!("agent{a}.c"))?;
                let (_, slack) = take(&format!("agent{a}.slack"))?;
                let (_, curvature) = take(&format!("agent{a}.curvature"))?;
                let (_, constants) = take(&format!("agent{a}.constants"))?;
                if qshape.len() != 3 || qshape[1] != d || qshape[2] != d {
                    return Err(format_err("constraint matrix shape does not match the generator parameters"));
                }
                let m = qshape[0];
                if b.len() != m * d || c.len() != m || slack.len() != m || curvature.len() != m {
                    return Err(format_err("constraint arrays disagree in length"));
                }
                let constraints = (0..m)
                    .map(|i| QuadraticConstraint {
                        q: DMatrix::from_column_slice(d, d, &q[i * d * d..(i + 1) * d * d]),
                        b: b[i * d..(i + 1) * d].to_vec(),
                        c: c[i],
                    })
                    .collect();
                agents.push(MatrixGameAgent {
                    constraints,
                    slack,
                    curvature,
                    mg: constants[0],
                    regularity_c: constants[1],
                });
            }
            Ok(ProblemData::MatrixGame(MatrixGame {
                params,
                jacobian: DMatrix::from_column_slice(n, n, &jac),
                offset,
                solution,
                mu: ml[0],
                lipschitz: ml[1],
                agents,
            }))
        }
        "imitation" => {
            let params: ImitationGameParams = serde_json::from_value(header.meta)
                .map_err(|e| format_err(format!("bad imitation params: {e}")))?;
            let (_, constants) = take("constants")?;
            Ok(ProblemData::Imitation(ImitationGame {
                params,
                mg: constants[0],
                regularity_c: constants[1],
            }))
        }
        other => Err(format_err(format!("unknown instance kind `{other}`"))),
    }
}

pub fn save_problem(data: &ProblemData, path: &Path) -> Result<()> {
    std::fs::write(path, encode(data)).map_err(|e| Error::io(path, e))
}

pub fn load_problem(path: &Path) -> Result<ProblemData> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format { message, .. } => Error::Format {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_imitation_game, build_matrix_game};

    #[test]
    fn matrix_game_roundtrip_is_bit_exact() {
        let params = MatrixGameParams {
            n_per_agent: 3,
            n_constraints: 5,
            calibration_points: 4,
            ..MatrixGameParams::desk_scale(0.5, 2.0, 9)
        };
        let game = build_matrix_game(&params).unwrap();
        let data = ProblemData::MatrixGame(game.clone());
        match decode(&encode(&data)).unwrap() {
            ProblemData::MatrixGame(back) => assert_eq!(back, game),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn imitation_roundtrip_through_file() {
        let game = build_imitation_game(&ImitationGameParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("imitation.rfvi");
        save_problem(&ProblemData::Imitation(game.clone()), &path).unwrap();
        match load_problem(&path).unwrap() {
            ProblemData::Imitation(back) => assert_eq!(back, game),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(decode(b"nope").is_err());
        let game = build_imitation_game(&ImitationGameParams::default()).unwrap();
        let mut bytes = encode(&ProblemData::Imitation(game));
        bytes.pop();
        assert!(decode(&bytes).is_err());
        bytes[8] = 7;
        assert!(decode(&bytes).is_err());
    }
}
