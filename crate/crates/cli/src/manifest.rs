use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::{Resolved, Source};

/// Everything needed to re-run a command: its arguments and the settings
/// they resolved to. Written as JSON lines, header first, then one line per
/// setting in key order.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub argv: Vec<String>,
    /// Subcommand options, defaults included.
    pub options: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

#[derive(Serialize)]
struct Setting<'a> {
    key: &'a str,
    value: &'a str,
    source: Source,
}

impl RunManifest {
    pub fn to_jsonl(&self, resolved: &Resolved) -> String {
        let mut out = serde_json::to_string(self).expect("manifest serializes");
        out.push('\n');
        for (key, entry) in resolved.entries() {
            let line = Setting {
                key,
                value: &entry.value,
                source: entry.source,
            };
            out.push_str(&serde_json::to_string(&line).expect("setting serializes"));
            out.push('\n');
        }
        out
    }
}
