//! JSON report envelope and run manifest.

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::cli::argv;

/// Bumped whenever a key is renamed or removed.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Every option after defaults and generated values are filled in.
    pub options: Value,
    /// Command line that reproduces the report.
    pub argv: Vec<String>,
    /// SHA-256 of the data or configuration file read.
    pub input_sha256: Option<String>,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u128>,
}

impl Manifest {
    pub fn new(command: &str, options: &impl Serialize, input: Option<&[u8]>, seed: Option<u64>) -> Self {
        let options = serde_json::to_value(options).expect("options serialize");
        Manifest {
            tool: "lqmle".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            argv: argv(command, &options),
            options,
            input_sha256: input.map(crate::data::sha256_hex),
            seed,
            elapsed_ms: None,
        }
    }

    pub fn timed(mut self, on: bool, start: Instant) -> Self {
        if on {
            self.elapsed_ms = Some(start.elapsed().as_millis());
        }
        self
    }
}

/// `{schema_version, kind, manifest, ...body}` as pretty JSON with a trailing newline.
pub fn document(kind: &str, manifest: &Manifest, body: Value) -> String {
    let mut map = Map::new();
    map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    map.insert("kind".into(), json!(kind));
    map.insert(
        "manifest".into(),
        serde_json::to_value(manifest).expect("manifest serializes"),
    );
    if let Value::Object(body) = body {
        for (k, v) in body {
            map.insert(k, v);
        }
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("report serializes");
    s.push('\n');
    s
}

/// JSON number, or `null` when not finite.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn nums(x: &[f64]) -> Value {
    Value::Array(x.iter().map(|v| num(*v)).collect())
}

pub fn matrix(m: &nalgebra::DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| num(m[(i, j)])).collect()))
            .collect(),
    )
}

/// Uses `given`, or draws a fresh seed and announces it on stderr.
pub fn resolve_seed(given: Option<u64>) -> u64 {
    if let Some(s) = given {
        return s;
    }
    use std::hash::{BuildHasher, Hasher};
    let mut h = std::collections::hash_map::RandomState::new().build_hasher();
    h.write_u128(
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0),
    );
    let seed = h.finish() >> 32;
    eprintln!("lqmle: no --seed given, using --seed {seed}");
    seed
}
