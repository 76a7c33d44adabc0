//! Artifact headers and file writing.

use std::path::{Path, PathBuf};

use noon_core::dynamics::SteadyStateOptions;
use noon_core::ode::Tolerances;
use noon_core::report::{JsonReport, Metadata};
use sha2::{Digest, Sha256};

use crate::commands::{Artifact, Context, RunOutput};
use crate::scenario::ScenarioFile;
use crate::CliError;

/// Metadata shared by every artifact of a run. Deliberately free of
/// timestamps and paths so reruns are byte-identical.
pub fn header(command: &str, scenario: &ScenarioFile, ctx: &Context) -> Result<Metadata, CliError> {
    let resolved = serde_json::json!({
        "command": command,
        "system": ctx.system,
        "n_max": ctx.n_max,
        "scenario": scenario,
    });
    let digest = Sha256::digest(resolved.to_string().as_bytes());
    let ode = Tolerances::default();
    Ok(Metadata::new()
        .with("tool", env!("CARGO_PKG_NAME"))
        .with("version", env!("CARGO_PKG_VERSION"))
        .with("command", command)
        .with("scenario_sha256", hex::encode(digest))
        .with("system", serde_json::to_value(ctx.system).map_err(|e| CliError::Config(e.to_string()))?.as_str().unwrap_or("n2"))
        .with("ode_rtol", ode.rtol)
        .with("ode_atol", ode.atol)
        .with("steady_state_tolerance", SteadyStateOptions::default().tolerance))
}

/// Renders everything first, then writes; a rendering failure leaves the
/// output directory untouched.
pub fn write_all(dir: &Path, header: &Metadata, run: RunOutput) -> Result<Vec<PathBuf>, CliError> {
    let mut meta = header.clone();
    for (k, v) in run.metadata.entries() {
        meta.push(k.clone(), v);
    }
    let mut rendered = Vec::with_capacity(run.artifacts.len());
    for a in run.artifacts {
        match a {
            Artifact::Csv(name, mut table) => {
                table.metadata = meta.clone();
                rendered.push((name, table.render()?));
            }
            Artifact::Json(name, value) => {
                let text = JsonReport {
                    metadata: &meta,
                    data: &value,
                }
                .render()?;
                rendered.push((name, text));
            }
        }
    }
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for (name, text) in rendered {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
