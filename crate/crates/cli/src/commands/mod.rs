pub mod blob;
pub mod dump;
pub mod framecheck;
pub mod reconstruct;
pub mod scatter;
pub mod stability;

/// A bad flag combination detected after parsing; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Writes one JSON value per line to `out`, or to stdout when `out` is `None`.
pub fn emit_rows<T: serde::Serialize>(
    rows: &[T],
    out: Option<&std::path::Path>,
) -> anyhow::Result<()> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(row)?);
        text.push('\n');
    }
    match out {
        Some(path) => scatlite::io::write_atomic(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}
