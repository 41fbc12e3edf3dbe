pub mod infer;
pub mod limits;
pub mod simulate;
pub mod verify;

use serde::Serialize;

use crate::exit::Failure;

/// Pretty JSON on stdout.
pub fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Internal(e.to_string()))?;
    println!("{text}");
    Ok(())
}
