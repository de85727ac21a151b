//! Binary score-table exchange format.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic      4 bytes  "PCRF"
//! version    u32      1
//! n_players  u32
//! n_out      u32
//! steps      u32
//! mode       u8       0 none, 1 dynamic, 2 static
//! masked     u8       0 or 1
//! checksum   u32      RuleSet::checksum of the allowed list
//! emission   f32      steps x |E|, step major
//! payload    f32      dynamic: (steps - 1) x |A| in allowed-list order
//!                     static:  |A| in allowed-list order, then the remaining
//!                              |E|^2 - |A| pairs in row-major order
//! ```
//!
//! The mask value is not stored; tables read back use the default.

use std::path::Path;

use possession_core::{CrfError, RuleSet, ScoreTable, Transitions};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"PCRF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 26;

#[derive(Debug, Error)]
pub enum ScoreFileError {
    #[error("not a score file (bad magic)")]
    BadMagic,
    #[error("unsupported score file version {0}")]
    Version(u32),
    #[error("truncated score file: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("score file has {extra} trailing bytes")]
    TrailingBytes { extra: usize },
    #[error("allowed-list checksum {file:#010x} does not match the rule set ({rules:#010x})")]
    ChecksumMismatch { file: u32, rules: u32 },
    #[error("score file is for {file_players} players and {file_out} outside nodes, rule set has {players} and {out}")]
    RosterMismatch { file_players: u32, file_out: u32, players: usize, out: usize },
    #[error("invalid {what} byte {value}")]
    BadByte { what: &'static str, value: u8 },
    #[error("score {value} does not fit in 32 bits")]
    Overflow { value: f64 },
    #[error(transparent)]
    Table(#[from] CrfError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn mode_byte(t: &Transitions) -> u8 {
    match t {
        Transitions::None => 0,
        Transitions::DynamicSparse(_) => 1,
        Transitions::StaticDense(_) => 2,
    }
}

/// Static tables: allowed pairs in list order, then every other pair row-major.
fn static_order(rules: &RuleSet) -> Vec<usize> {
    let n = rules.n_edges();
    let mut order: Vec<usize> = rules.allowed_list().iter().map(|tr| tr.prev.index() * n + tr.next.index()).collect();
    let mut seen = vec![false; n * n];
    for &k in &order {
        seen[k] = true;
    }
    order.extend((0..n * n).filter(|&k| !seen[k]));
    order
}

fn push_f32(out: &mut Vec<u8>, v: f64) -> Result<(), ScoreFileError> {
    let x = v as f32;
    if !x.is_finite() {
        return Err(ScoreFileError::Overflow { value: v });
    }
    out.extend_from_slice(&x.to_le_bytes());
    Ok(())
}

pub fn encode(table: &ScoreTable, rules: &RuleSet) -> Result<Vec<u8>, ScoreFileError> {
    let n = rules.n_edges();
    if table.n_edges() != n {
        return Err(CrfError::Shape { what: "rule set edges", expected: table.n_edges(), actual: n }.into());
    }
    let steps = table.steps();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * (steps * n + table.transitions().values().len()));
    out.extend_from_slice(MAGIC);
    for v in [VERSION, rules.n_players() as u32, rules.n_out() as u32, steps as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(mode_byte(table.transitions()));
    out.push(u8::from(table.masked()));
    out.extend_from_slice(&rules.checksum().to_le_bytes());
    for &v in table.emission() {
        push_f32(&mut out, v)?;
    }
    match table.transitions() {
        Transitions::None => {}
        Transitions::DynamicSparse(v) => {
            for &x in v {
                push_f32(&mut out, x)?;
            }
        }
        Transitions::StaticDense(m) => {
            for k in static_order(rules) {
                push_f32(&mut out, m[k])?;
            }
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        b
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn f32s(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| f32::from_le_bytes(self.take()) as f64).collect()
    }
}

pub fn decode(bytes: &[u8], rules: &RuleSet) -> Result<ScoreTable, ScoreFileError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ScoreFileError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(ScoreFileError::Truncated { expected: HEADER_LEN, actual: bytes.len() });
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32();
    if version != VERSION {
        return Err(ScoreFileError::Version(version));
    }
    let (players, out, steps) = (r.u32(), r.u32(), r.u32() as usize);
    let [mode, masked] = r.take::<2>();
    let checksum = r.u32();
    if players as usize != rules.n_players() || out as usize != rules.n_out() {
        return Err(ScoreFileError::RosterMismatch {
            file_players: players,
            file_out: out,
            players: rules.n_players(),
            out: rules.n_out(),
        });
    }
    if checksum != rules.checksum() {
        return Err(ScoreFileError::ChecksumMismatch { file: checksum, rules: rules.checksum() });
    }
    let masked = match masked {
        0 => false,
        1 => true,
        value => return Err(ScoreFileError::BadByte { what: "masked flag", value }),
    };
    let n = rules.n_edges();
    let payload = match mode {
        0 => 0,
        1 => steps.saturating_sub(1) * rules.n_allowed(),
        2 => n * n,
        value => return Err(ScoreFileError::BadByte { what: "transition mode", value }),
    };
    let expected = HEADER_LEN + 4 * (steps * n + payload);
    if bytes.len() < expected {
        return Err(ScoreFileError::Truncated { expected, actual: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(ScoreFileError::TrailingBytes { extra: bytes.len() - expected });
    }
    let emission = r.f32s(steps * n);
    let transitions = match mode {
        0 => Transitions::None,
        1 => Transitions::DynamicSparse(r.f32s(payload)),
        _ => {
            let values = r.f32s(payload);
            let mut m = vec![0.0; n * n];
            for (k, v) in static_order(rules).into_iter().zip(values) {
                m[k] = v;
            }
            Transitions::StaticDense(m)
        }
    };
    Ok(ScoreTable::new(rules, steps, emission, transitions, masked)?)
}

pub fn write_score_file(path: &Path, table: &ScoreTable, rules: &RuleSet) -> Result<(), ScoreFileError> {
    std::fs::write(path, encode(table, rules)?)?;
    Ok(())
}

pub fn read_score_file(path: &Path, rules: &RuleSet) -> Result<ScoreTable, ScoreFileError> {
    decode(&std::fs::read(path)?, rules)
}
