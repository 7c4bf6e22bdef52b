use crate::Failure;
use anyhow::Context;
use std::path::PathBuf;
use wheelsim_core::level::{validate_accessibility, AccessibilityRules};
use wheelsim_core::{load_level, LevelError};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    level: PathBuf,
}

/// Prints one line per problem; exit 0 only for a clean level.
pub fn run(args: Args) -> Result<u8, Failure> {
    let bytes = std::fs::read(&args.level)
        .with_context(|| format!("cannot read {}", args.level.display()))
        .map_err(Failure::input)?;
    let shown = args.level.display();
    let level = match load_level(&bytes) {
        Ok(level) => level,
        Err(LevelError::Validation(problems)) => {
            for p in problems {
                println!("{shown}: invariant: {p}");
            }
            return Ok(1);
        }
        Err(e) => {
            println!("{shown}: parse: {e}");
            return Ok(1);
        }
    };
    let violations = validate_accessibility(&level, &AccessibilityRules::default());
    if violations.is_empty() {
        println!("{shown}: ok ({})", level.id);
        return Ok(0);
    }
    for v in violations {
        println!("{shown}: accessibility: {v}");
    }
    Ok(1)
}
