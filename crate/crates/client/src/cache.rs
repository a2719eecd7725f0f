use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use langconf_core::corpus::{ChatTurn, ResponseRecord};
use langconf_core::decoding::{SamplingConfig, TraceStep};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CachedGeneration {
    pub key: String,
    pub response: ResponseRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceStep>>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    model: &'a str,
    messages: &'a [ChatTurn],
    temperature: f64,
    top_p: f64,
    top_k: Option<usize>,
    seed: u64,
    max_tokens: usize,
    logprobs_top_n: Option<u32>,
}

/// Hex SHA-256 over a canonical JSON rendering of everything that can
/// change the reply.
pub fn cache_key(
    model: &str,
    messages: &[ChatTurn],
    sampling: &SamplingConfig,
    logprobs_top_n: Option<u32>,
) -> String {
    let material = KeyMaterial {
        model,
        messages,
        temperature: sampling.temperature,
        top_p: sampling.top_p,
        top_k: sampling.top_k,
        seed: sampling.seed,
        max_tokens: sampling.max_tokens,
        logprobs_top_n,
    };
    let bytes = serde_json::to_vec(&material).expect("key material serializes");
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Content-addressed store: `{dir}/{key[..2]}/{key}.json`.
///
/// Writes go to a temporary sibling and are renamed into place, so readers
/// never see a partial file and concurrent writers of one key are harmless.
#[derive(Clone, Debug)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        let prefix = key.get(..2).unwrap_or(key);
        self.dir.join(prefix).join(format!("{key}.json"))
    }

    /// A corrupt entry reads as a miss.
    pub fn get(&self, key: &str) -> Option<CachedGeneration> {
        let text = std::fs::read_to_string(self.path_for(key)).ok()?;
        serde_json::from_str::<CachedGeneration>(&text)
            .ok()
            .filter(|c| c.key == key)
    }

    pub fn put(&self, entry: &CachedGeneration) -> io::Result<()> {
        let path = self.path_for(&entry.key);
        let parent = path.parent().expect("cache path has a parent");
        std::fs::create_dir_all(parent)?;
        let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let tmp = parent.join(format!(".{}.{}.{n}.tmp", entry.key, std::process::id()));
        let mut text = serde_json::to_string_pretty(entry)?;
        text.push('\n');
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, &path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use langconf_core::corpus::ChatRole;

    fn msgs() -> Vec<ChatTurn> {
        vec![ChatTurn {
            role: ChatRole::User,
            content: "hola".into(),
        }]
    }

    #[test]
    fn key_is_stable_and_sensitive() {
        let s = SamplingConfig::default();
        let k = cache_key("m", &msgs(), &s, None);
        assert_eq!(k.len(), 64);
        assert_eq!(k, cache_key("m", &msgs(), &s, None));
        let variants = [
            SamplingConfig { temperature: 0.7, ..s.clone() },
            SamplingConfig { top_p: 0.9, ..s.clone() },
            SamplingConfig { seed: 1, ..s.clone() },
            SamplingConfig { max_tokens: 50, ..s.clone() },
            SamplingConfig { top_k: Some(3), ..s.clone() },
        ];
        for v in &variants {
            assert_ne!(k, cache_key("m", &msgs(), v, None));
        }
        assert_ne!(k, cache_key("m2", &msgs(), &s, None));
        assert_ne!(k, cache_key("m", &msgs(), &s, Some(5)));
    }

    #[test]
    fn roundtrip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let entry = CachedGeneration {
            key: "abcdef".into(),
            response: ResponseRecord {
                id: None,
                prompt_id: "p".into(),
                model: "m".into(),
                text: "  raw\ttext \n".into(),
                sampling: None,
                trace_path: None,
            },
            trace: None,
            created_at: 0,
        };
        assert!(cache.get("abcdef").is_none());
        cache.put(&entry).unwrap();
        assert!(cache.path_for("abcdef").ends_with("ab/abcdef.json"));
        assert_eq!(cache.get("abcdef").unwrap(), entry);
        std::fs::write(cache.path_for("abcdef"), "{").unwrap();
        assert!(cache.get("abcdef").is_none());
    }
}
