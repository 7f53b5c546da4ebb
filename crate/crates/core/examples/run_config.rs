//! Driving the batch runner from a JSON config, as the CLI does.

use std::path::PathBuf;

use torus_action::runner::{execute, load_field, Command, Overrides, RunConfig, FIELD_FILE};

fn main() -> torus_action::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/manufactured.json");
    let config = RunConfig::load(&path)?;
    let out = std::env::temp_dir().join("torus-action-example");
    let outcome = execute(
        Command::Solve,
        &config,
        &Overrides {
            out: Some(out.clone()),
            seed: None,
        },
    )?;
    println!("exit code {}", outcome.exit_code);
    for key in ["status", "residual_inf", "error_vs_exact_inf", "verdict"] {
        println!("{key}: {}", outcome.report[key]);
    }
    let u = load_field(&out.join(FIELD_FILE))?;
    println!(
        "reloaded field with {} components on {:?}",
        u.n(),
        u.grid().resolutions()
    );
    Ok(())
}
