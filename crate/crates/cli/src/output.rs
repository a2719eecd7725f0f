use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;

/// Writes to `out`, or stdout when absent.
pub fn emit(out: Option<&Path>, content: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(p, content).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

pub fn jsonl<T: Serialize>(items: &[T]) -> anyhow::Result<String> {
    let mut s = String::new();
    for item in items {
        s.push_str(&serde_json::to_string(item)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn pretty<T: Serialize + ?Sized>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Refuses to write over any input file.
pub fn guard_inputs(out: Option<&Path>, inputs: &[&Path]) -> anyhow::Result<()> {
    let Some(out) = out else { return Ok(()) };
    let resolve = |p: &Path| -> PathBuf { std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf()) };
    let target = resolve(out);
    for input in inputs {
        if resolve(input) == target {
            bail!("--out {} would overwrite an input file", out.display());
        }
    }
    Ok(())
}

pub fn parse_list<T, E>(s: &str) -> anyhow::Result<Vec<T>>
where
    T: std::str::FromStr<Err = E>,
    E: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|e| anyhow::anyhow!("{e}")))
        .collect()
}
