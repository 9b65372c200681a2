use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use decurtain_core::io::{self, SliceSelection};
use decurtain_core::pipeline::{self, CompareParams};
use decurtain_core::{generate_phantom, Error, ErrorKind, MetricsReport, Model, ModelParams, PhantomSpec, Volume};
use serde_json::{json, Value};

use crate::args::*;

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        };
        CliError { code, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

pub fn run(cli: &Cli) -> CliResult<()> {
    let threads = decurtain_core::par::current_threads();
    match &cli.command {
        Command::Decurtain(a) => decurtain(a, threads),
        Command::DestripeM1(a) => destripe(a, threads),
        Command::Phantom(a) => phantom(a),
        Command::Compare(a) => compare(a, threads),
        Command::Metrics(a) => metrics(a),
        Command::ExportSlices(a) => export(a),
    }
}

/// Input volume plus the reference used for metrics, if any.
struct Loaded {
    f: Volume,
    reference: Option<Volume>,
    origin: Value,
}

fn load_spec(path: &Path) -> CliResult<PhantomSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError { code: 3, message: format!("reading {}: {e}", path.display()) })?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: invalid phantom spec: {e}", path.display())))
}

fn customize(mut spec: PhantomSpec, seed: Option<u64>, dims: Option<decurtain_core::Dims>) -> PhantomSpec {
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(dims) = dims {
        spec = spec.with_dims(dims);
    }
    spec
}

fn load_source(src: &Source, preset: Option<PresetArg>) -> CliResult<Loaded> {
    let spec = match (&src.input, &src.spec, preset.and_then(PresetArg::phantom_name)) {
        (Some(input), _, None) => {
            let f = io::load_volume(input)?;
            let reference = src.reference.as_deref().map(io::load_volume).transpose()?;
            let origin = json!({ "input": input });
            return Ok(Loaded { f, reference, origin });
        }
        (Some(_), _, Some(name)) => {
            return Err(CliError::config(format!("--input conflicts with phantom preset {name}")))
        }
        (None, Some(path), None) => load_spec(path)?,
        (None, Some(_), Some(_)) => return Err(CliError::config("--spec conflicts with a phantom preset")),
        (None, None, Some(name)) => PhantomSpec::preset(name).expect("known preset"),
        (None, None, None) => {
            return Err(CliError::config("an input is required: --input, --spec or --preset hard-edge|smooth-laminar"))
        }
    };
    let spec = customize(spec, src.seed, src.dims);
    let ph = generate_phantom(&spec)?;
    let reference = match &src.reference {
        Some(path) => Some(io::load_volume(path)?),
        None => Some(ph.clean),
    };
    Ok(Loaded { f: ph.corrupted, reference, origin: json!({ "phantom": spec }) })
}

fn apply_stopping(p: &mut ModelParams, s: &Stopping) {
    if let Some(v) = s.tau {
        p.tau = v;
    }
    if let Some(v) = s.sigma {
        p.sigma = v;
    }
    if let Some(v) = s.theta {
        p.theta = v;
    }
    if let Some(v) = s.iters {
        p.max_iters = v;
    }
    if let Some(v) = s.tol {
        p.rel_tol = v;
    }
}

fn require_prefix(o: &Outputs) -> CliResult<&Path> {
    o.output_prefix
        .as_deref()
        .ok_or_else(|| CliError::config("--output-prefix is required"))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError { code: 3, message: format!("creating {}: {e}", dir.display()) })?;
    }
    Ok(())
}

/// Checks slice indices up front so no file is written for a bad selection.
fn check_slices(v: &Volume, selections: &[SliceSelection]) -> CliResult<()> {
    let d = v.dims();
    for sel in selections {
        let count = match sel.plane {
            io::SlicePlane::Xy => d.nz,
            io::SlicePlane::Xz => d.ny,
            io::SlicePlane::Yz => d.nx,
        };
        if let Some(bad) = sel.indices.iter().find(|&&i| i >= count) {
            return Err(CliError::config(format!(
                "slice {}:{bad} out of range ({count} slices)",
                sel.plane
            )));
        }
    }
    Ok(())
}

fn write_slices(v: &Volume, selections: &[SliceSelection], prefix: &Path) -> CliResult<()> {
    for sel in selections {
        io::export_slices(v, sel, prefix)?;
    }
    Ok(())
}

fn report_value<T: serde::Serialize>(report: &T, origin: Value, threads: usize) -> CliResult<Value> {
    let mut value = serde_json::to_value(report).map_err(Error::from)?;
    let obj = value.as_object_mut().expect("reports are objects");
    obj.insert("source".into(), origin);
    obj.insert("threads".into(), json!(threads));
    Ok(value)
}

fn decurtain(a: &DecurtainArgs, threads: usize) -> CliResult<()> {
    let prefix = require_prefix(&a.outputs)?;
    let mut params = match a.preset {
        Some(PresetArg::Modis) => ModelParams::modis(),
        _ => ModelParams::fib(),
    };
    if a.model == ModelArg::Icrev {
        params.model = Model::IcRev;
        params.mu2 = 0.0;
    }
    for (slot, v) in [(&mut params.mu1, a.mu1), (&mut params.mu2, a.mu2), (&mut params.mu3, a.mu3)] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    apply_stopping(&mut params, &a.stopping);
    params.validate()?;

    let input = load_source(&a.source, a.preset)?;
    check_slices(&input.f, &a.outputs.slices)?;
    let (x, report) = pipeline::run_decurtain(&input.f, &params, input.reference.as_ref())?;
    let value = report_value(&report, input.origin, threads)?;

    ensure_parent(prefix)?;
    io::save_volume(&x.u, &with_suffix(prefix, "_u.npy"))?;
    io::save_volume(&x.s, &with_suffix(prefix, "_s.npy"))?;
    io::save_volume(&x.l, &with_suffix(prefix, "_l.npy"))?;
    write_slices(&x.u, &a.outputs.slices, &with_suffix(prefix, "_u"))?;
    let report_path = a.outputs.report.clone().unwrap_or_else(|| with_suffix(prefix, "_report.json"));
    ensure_parent(&report_path)?;
    io::write_json(&report_path, &value)?;
    eprintln!(
        "{}: {} iterations, final energy {:.6e}, max |u+s+l-f| = {:.2e}",
        report.params.model,
        report.iterations,
        report.final_energy.unwrap_or(f64::NAN),
        report.feasibility_residual
    );
    Ok(())
}

fn destripe(a: &DestripeArgs, threads: usize) -> CliResult<()> {
    let prefix = require_prefix(&a.outputs)?;
    if let Some(p @ (PresetArg::Fib | PresetArg::Modis)) = a.preset {
        return Err(CliError::config(format!("preset {p:?} sets IC weights; destripe-m1 takes --nu1/--nu2")));
    }
    let mut params = ModelParams::m1(a.nu1, a.nu2);
    apply_stopping(&mut params, &a.stopping);
    params.validate()?;

    let input = load_source(&a.source, a.preset)?;
    check_slices(&input.f, &a.outputs.slices)?;
    let (u, report) = pipeline::run_destripe_m1(&input.f, &params, a.median_len, input.reference.as_ref())?;
    let value = report_value(&report, input.origin, threads)?;

    ensure_parent(prefix)?;
    io::save_volume(&u, &with_suffix(prefix, "_u.npy"))?;
    write_slices(&u, &a.outputs.slices, &with_suffix(prefix, "_u"))?;
    let report_path = a.outputs.report.clone().unwrap_or_else(|| with_suffix(prefix, "_report.json"));
    ensure_parent(&report_path)?;
    io::write_json(&report_path, &value)?;
    Ok(())
}

fn phantom(a: &PhantomArgs) -> CliResult<()> {
    let prefix = require_prefix(&a.outputs)?;
    let spec = match (&a.spec, a.preset) {
        (Some(_), Some(_)) => return Err(CliError::config("--spec conflicts with --preset")),
        (Some(path), None) => load_spec(path)?,
        (None, Some(p)) => match p.phantom_name() {
            Some(name) => PhantomSpec::preset(name).expect("known preset"),
            None => return Err(CliError::config("phantom needs --preset hard-edge or smooth-laminar")),
        },
        (None, None) => return Err(CliError::config("phantom needs --preset or --spec")),
    };
    let spec = customize(spec, a.seed, a.dims);
    let ph = generate_phantom(&spec)?;
    check_slices(&ph.corrupted, &a.outputs.slices)?;
    let metrics = MetricsReport::compute(&ph.clean, &ph.corrupted)?;

    ensure_parent(prefix)?;
    io::save_volume(&ph.clean, &with_suffix(prefix, "_clean.npy"))?;
    io::save_volume(&ph.corrupted, &with_suffix(prefix, "_corrupted.npy"))?;
    io::save_volume(&ph.stripes, &with_suffix(prefix, "_stripes.npy"))?;
    io::save_volume(&ph.laminar, &with_suffix(prefix, "_laminar.npy"))?;
    io::write_json(&with_suffix(prefix, "_spec.json"), &spec)?;
    write_slices(&ph.corrupted, &a.outputs.slices, &with_suffix(prefix, "_corrupted"))?;
    if let Some(path) = &a.outputs.report {
        ensure_parent(path)?;
        let value = json!({
            "schema": pipeline::SCHEMA_VERSION,
            "command": "phantom",
            "spec": spec,
            "corrupted_metrics": metrics,
        });
        io::write_json(path, &value)?;
    }
    Ok(())
}

fn compare(a: &CompareArgs, threads: usize) -> CliResult<()> {
    let (clean, corrupted, mut params, origin) = match (&a.input, &a.reference) {
        (Some(input), Some(reference)) => (
            io::load_volume(reference)?,
            io::load_volume(input)?,
            CompareParams::default(),
            json!({ "input": input, "reference": reference }),
        ),
        _ => {
            let (spec, params) = match (&a.spec, a.preset.and_then(PresetArg::phantom_name)) {
                (Some(path), _) => (load_spec(path)?, CompareParams::default()),
                (None, Some(name)) => (PhantomSpec::preset(name).expect("known preset"), CompareParams::for_phantom(name)),
                (None, None) => {
                    return Err(CliError::config(
                        "compare needs --preset hard-edge|smooth-laminar, --spec, or --input with --reference",
                    ))
                }
            };
            let spec = customize(spec, a.seed, a.dims);
            let ph = generate_phantom(&spec)?;
            (ph.clean, ph.corrupted, params, json!({ "phantom": spec }))
        }
    };
    for p in [&mut params.ic, &mut params.icrev, &mut params.m1] {
        if let Some(v) = a.iters {
            p.max_iters = v;
        }
        if let Some(v) = a.tol {
            p.rel_tol = v;
        }
    }
    if let Some(m) = a.median_len {
        params.median_len = m;
    }
    let table = pipeline::run_compare(&clean, &corrupted, &params)?;
    let csv = table.to_csv();
    let value = report_value(&table, origin, threads)?;

    if let Some(prefix) = &a.output_prefix {
        ensure_parent(prefix)?;
        io::write_atomic(&with_suffix(prefix, "_table.csv"), csv.as_bytes())?;
    }
    let report = a
        .report
        .clone()
        .or_else(|| a.output_prefix.as_deref().map(|p| with_suffix(p, "_compare.json")));
    if let Some(path) = report {
        ensure_parent(&path)?;
        io::write_json(&path, &value)?;
    }
    print!("{csv}");
    Ok(())
}

fn metrics(a: &MetricsArgs) -> CliResult<()> {
    let x = io::read_volume(&a.input)?;
    let reference = io::read_volume(&a.reference)?;
    let m = MetricsReport::compute(&reference, &x)?;
    let value = json!({
        "schema": pipeline::SCHEMA_VERSION,
        "command": "metrics",
        "input": a.input,
        "reference": a.reference,
        "metrics": m,
    });
    if let Some(path) = &a.report {
        ensure_parent(path)?;
        io::write_json(path, &value)?;
    }
    println!("{}", serde_json::to_string_pretty(&value).map_err(Error::from)?);
    Ok(())
}

fn export(a: &ExportArgs) -> CliResult<()> {
    let v = io::read_volume(&a.input)?;
    check_slices(&v, &a.slices)?;
    ensure_parent(&a.output_prefix)?;
    write_slices(&v, &a.slices, &a.output_prefix)
}
