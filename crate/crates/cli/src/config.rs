//! Canonical run configuration and its provenance hash.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Everything that determines a command's output. Output paths and worker
/// counts are excluded; the input file enters through its content digest.
#[derive(Debug, Serialize)]
pub struct RunConfig<'a, P: Serialize> {
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_sha256: Option<&'a str>,
    pub params: &'a P,
}

impl<P: Serialize> RunConfig<'_, P> {
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("run config serializes");
        sha256_hex(&bytes)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// First line of every CSV the tool writes.
pub fn hash_comment(hash: &str) -> String {
    format!("# config-hash: {hash}")
}
