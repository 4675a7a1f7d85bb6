use std::path::{Path, PathBuf};

use dpscale::kernels::{list_workloads, workload_spec, KernelError, Workload};
use dpscale::policy::{self, OmissionSchedule, PolicyError, PolicyKind};
use dpscale::profiler::{self, AccLossMatrices, ProfileError, ProfileOptions};
use dpscale::report::{self, PipelineError, WorkloadId};
use serde::Serialize;

use crate::{config, CliError, PlanArgs, ProfileArgs, RunArgs, SweepArgs, WorkloadArgs};

/// Fixed-width scientific notation, 13 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

pub fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| data(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize") + "\n"
}

fn pipeline_error(e: PipelineError) -> CliError {
    match e {
        PipelineError::ScheduleLength { schedule, calls } => CliError::Data(format!(
            "schedule covers {schedule} dynamic calls but this run makes {calls}; \
             was it planned for a different input?"
        )),
        PipelineError::Kernel(KernelError::UnknownWorkload(name)) => unknown_workload(&name),
        PipelineError::Policy(e) => policy_error(e),
        other => data(other),
    }
}

fn unknown_workload(name: &str) -> CliError {
    let known: Vec<_> = list_workloads().iter().map(|w| w.name).collect();
    CliError::Usage(format!("unknown workload `{name}` (available: {})", known.join(", ")))
}

fn policy_error(e: PolicyError) -> CliError {
    match e {
        PolicyError::BadTarget(_) | PolicyError::BadFraction(_) | PolicyError::UnknownPolicy(_) => {
            CliError::Usage(e.to_string())
        }
        PolicyError::NoCalls => data(e),
    }
}

fn build(args: &WorkloadArgs) -> Result<(Workload, WorkloadId), CliError> {
    let spec = workload_spec(&args.workload).ok_or_else(|| unknown_workload(&args.workload))?;
    let workload = Workload::build(&args.workload, &args.input, args.seed).map_err(|e| match e {
        KernelError::UnsupportedInput { .. } => CliError::Usage(e.to_string()),
        other => data(other),
    })?;
    let id = WorkloadId {
        name: args.workload.clone(),
        input: args.input.to_string(),
        seed: args.seed,
        format: args.precision.unwrap_or(spec.format),
    };
    Ok((workload, id))
}

pub fn list() -> Result<(), CliError> {
    for w in list_workloads() {
        println!(
            "{:<20} {:<6} calls={:<4} outputs={:<4} fns={}  {}",
            w.name,
            w.format,
            w.dynamic_calls,
            w.output_len,
            w.static_functions.join(","),
            w.summary
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct ProfileMeta<'a> {
    workload: &'a WorkloadId,
    fingerprint: String,
    matrices: String,
    num_calls: usize,
    num_bits: u32,
    fault_runs: usize,
}

fn meta_path(prefix: &Path) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn run_campaign(w: &Workload, id: &WorkloadId, bits: Option<u32>, parallel: bool) -> Result<profiler::Profile, CliError> {
    profiler::profile(w, id.format, ProfileOptions { num_bits: bits, parallel }).map_err(|e| match e {
        ProfileError::TooManyBits { .. } => CliError::Usage(e.to_string()),
        other => data(other),
    })
}

pub fn profile(a: &ProfileArgs) -> Result<(), CliError> {
    let (w, id) = build(&a.workload)?;
    let p = run_campaign(&w, &id, a.bits, !a.serial)?;
    let (s0, s1) = p.matrices.write_files(&a.out_prefix).map_err(data)?;
    let meta = ProfileMeta {
        workload: &id,
        fingerprint: report::workload_fingerprint(&id, &p.golden),
        matrices: p.matrices.fingerprint(),
        num_calls: p.matrices.num_calls(),
        num_bits: p.matrices.num_bits(),
        fault_runs: p.fault_runs,
    };
    let mp = meta_path(&a.out_prefix);
    write_output(Some(&mp), &to_json(&meta))?;
    println!(
        "{} calls x {} bits, {} runs -> {}, {}, {}",
        meta.num_calls,
        meta.num_bits,
        meta.fault_runs,
        s0.display(),
        s1.display(),
        mp.display()
    );
    Ok(())
}

fn read_matrices(prefix: &Path) -> Result<AccLossMatrices, CliError> {
    AccLossMatrices::read_files(prefix).map_err(data)
}

pub fn plan(a: &PlanArgs) -> Result<(), CliError> {
    let parameter = match (a.policy, a.target, a.fraction) {
        (PolicyKind::Sps, None, Some(f)) => f,
        (PolicyKind::Sps, _, _) => return Err(CliError::Usage("sps takes --fraction (and no --target)".into())),
        (_, Some(t), None) => t,
        (p, _, _) => return Err(CliError::Usage(format!("{p} takes --target (and no --fraction)"))),
    };
    let m = read_matrices(&a.matrices)?;
    let schedule = policy::plan(&m, a.policy, parameter).map_err(policy_error)?;
    write_output(a.out.as_deref(), &to_json(&schedule))
}

pub fn run(a: &RunArgs) -> Result<(), CliError> {
    let settings = config::load(a.config.as_deref())?;
    let text = std::fs::read_to_string(&a.schedule)
        .map_err(|e| data(format!("cannot read {}: {e}", a.schedule.display())))?;
    let schedule: OmissionSchedule =
        serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", a.schedule.display())))?;
    let (w, id) = build(&a.workload)?;
    let golden = report::golden_run(&w, id.format, &settings).map_err(pipeline_error)?;
    let r = report::replay(&w, &id, &golden, &schedule, &settings).map_err(pipeline_error)?;
    write_output(a.out.as_deref(), &to_json(&r))
}

pub fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let settings = config::load(a.config.as_deref())?;
    let (w, id) = build(&a.workload)?;
    let m = match &a.matrices {
        Some(prefix) => read_matrices(prefix)?,
        None => run_campaign(&w, &id, a.bits, true)?.matrices,
    };
    let golden = report::golden_run(&w, id.format, &settings).map_err(pipeline_error)?;

    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record([
        "workload",
        "input",
        "seed",
        "policy",
        "parameter",
        "mre",
        "energy_savings",
        "mean_omitted",
        "valid",
    ])
    .map_err(data)?;
    for &kind in &a.policies {
        let params = if kind.uses_target() { &a.targets } else { &a.fractions };
        let rows = report::sweep(&w, &id, &golden, &m, &[kind], params, &settings).map_err(pipeline_error)?;
        for r in rows {
            out.write_record([
                id.name.clone(),
                id.input.clone(),
                id.seed.to_string(),
                r.policy.to_string(),
                r.parameter.to_string(),
                num(r.mre),
                num(r.savings),
                num(r.mean_omitted),
                r.valid.to_string(),
            ])
            .map_err(data)?;
        }
    }
    let bytes = out.into_inner().map_err(data)?;
    write_output(a.out.as_deref(), &String::from_utf8(bytes).expect("csv output is utf-8"))
}
