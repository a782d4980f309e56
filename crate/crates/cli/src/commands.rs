use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use upa_codebook::codebook::{
    baseline_allones, baseline_kp_dft, design_codebook, Codebook, CodebookKind, DesignOptions,
    Sweep,
};
use upa_codebook::io::{read_codebook, write_codebook};
use upa_codebook::pattern::pattern_report;
use upa_codebook::sim::{
    evaluate_rate, paired_difference, simulate_outcomes, with_workers, RateTable, SimParams,
};
use upa_codebook::verify::{self, VerifyConfig};
use upa_codebook::Error;

use crate::config::RunConfig;
use crate::CliError;

pub struct DesignArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub stride: Option<u64>,
    pub requantize_shift: bool,
    pub checkpoint: Option<PathBuf>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::new(1, format!("{}: {e}", path.display()))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::new(1, e.to_string())),
    }
}

fn load_codebook(path: &Path) -> Result<Codebook, CliError> {
    read_codebook(path).map_err(|e| match e {
        Error::Io(io) => CliError::new(4, format!("{}: {io}", path.display())),
        other => CliError::new(4, format!("{}: {other}", path.display())),
    })
}

fn maybe_pooled<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match workers {
        None => f(),
        Some(n) => with_workers(n, f)?,
    }
}

pub fn design(args: &DesignArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(&args.config)?;
    let upa = cfg.upa()?;
    let block = cfg.codebook()?;
    let kind = cfg.kind()?;
    let cb = block.to_config(kind)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let sweep = match args.stride {
        Some(k) => Sweep::Strided(k),
        None => cfg.sweep()?,
    };
    let opts = DesignOptions {
        quantize: block.quantize,
        requantize_shift: block.requantize_shift || args.requantize_shift,
        checkpoint: args.checkpoint.clone(),
        ..Default::default()
    };
    if kind == CodebookKind::Proposed && cb.undercomplete(&upa) {
        eprintln!("warning: L*Q < M, the direction dictionary is rank deficient");
    }

    let started = Instant::now();
    let book = maybe_pooled(args.workers, || {
        Ok(match kind {
            CodebookKind::Proposed => design_codebook(&upa, &cb, &sweep, seed, &opts)?,
            CodebookKind::AllOnes => baseline_allones(&upa, cb.q_h, cb.q_v)?,
            CodebookKind::KpDft => baseline_kp_dft(&upa, cb.q_h, cb.q_v)?,
        })
    })?;
    let wall = started.elapsed().as_secs_f64();

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cfg.output_dir().join("codebook.txt"));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    write_codebook(&out, &book).map_err(|e| io_err(&out, e))?;

    let stats = json!({
        "codebook": out.display().to_string(),
        "kind": book.kind.as_str(),
        "sweep": book.sweep,
        "seed": book.seed,
        "candidates_evaluated": book.stats.candidates_evaluated,
        "best_index": book.stats.best_index,
        "best_mse": book.stats.best_mse,
        "requantize_mse_delta": book.stats.requantize_mse_delta,
        "ideal_clipped": book.stats.ideal_clipped,
        "mean_gain": book.coverage.mean_gain,
        "min_gain": book.coverage.min_gain,
        "mean_gain_psi": book.coverage.mean_gain_psi,
        "min_gain_psi": book.coverage.min_gain_psi,
        "wall_time_s": wall,
    });
    let stats_path = out.with_extension("stats.json");
    let text = serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n";
    fs::write(&stats_path, &text).map_err(|e| io_err(&stats_path, e))?;
    print!("{text}");
    eprintln!("wrote {} and {}", out.display(), stats_path.display());
    Ok(())
}

pub fn parse_grid_res(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::new(2, format!("bad --grid-res `{s}` (expected HxV or N)"));
    let (h, v) = match s.split_once(['x', 'X']) {
        Some((h, v)) => (
            h.trim().parse().map_err(|_| bad())?,
            v.trim().parse().map_err(|_| bad())?,
        ),
        None => {
            let n: usize = s.trim().parse().map_err(|_| bad())?;
            (n, n / 2)
        }
    };
    if h == 0 || v == 0 {
        return Err(bad());
    }
    Ok((h, v))
}

pub fn pattern(codebook: &Path, grid_res: &str, out: Option<&Path>) -> Result<(), CliError> {
    let (gh, gv) = parse_grid_res(grid_res)?;
    let book = load_codebook(codebook)?;
    let report = pattern_report(&book.composites(), book.cb.q_v, &book.upa, gh, gv);
    write_output(out, &report.to_csv())?;
    eprintln!(
        "mean gain {:.6}, min gain {:.6} over {} directions",
        report.mean_gain,
        report.min_gain,
        report.rows.len()
    );
    Ok(())
}

fn load_matching(paths: &[PathBuf], cfg: &RunConfig) -> Result<Vec<(String, Codebook)>, CliError> {
    let mut books = Vec::with_capacity(paths.len());
    for p in paths {
        books.push(load_codebook(p)?);
    }
    let reference = match cfg.upa {
        Some(u) => u,
        None => books[0].upa,
    };
    for (p, b) in paths.iter().zip(&books) {
        if b.upa != reference {
            return Err(CliError::new(
                5,
                format!(
                    "{}: array {}x{} (N={}, B={}) does not match {}x{} (N={}, B={})",
                    p.display(),
                    b.upa.m_h,
                    b.upa.m_v,
                    b.upa.n_rf,
                    b.upa.b_phase,
                    reference.m_h,
                    reference.m_v,
                    reference.n_rf,
                    reference.b_phase
                ),
            ));
        }
    }
    let mut labelled = Vec::with_capacity(books.len());
    for (k, (p, b)) in paths.iter().zip(books).enumerate() {
        let stem = p
            .file_stem()
            .map(|s| s.to_string_lossy().replace(',', "_"))
            .unwrap_or_else(|| format!("codebook{k}"));
        let label = if labelled.iter().any(|(l, _): &(String, Codebook)| *l == stem) {
            format!("{stem}#{k}")
        } else {
            stem
        };
        labelled.push((label, b));
    }
    Ok(labelled)
}

fn sim_params(cfg: &RunConfig, seed: Option<u64>) -> Result<(SimParams, Vec<f64>), CliError> {
    let sim = cfg.simulation()?;
    let mut params = SimParams::new(cfg.scenario()?, sim.realizations, seed.unwrap_or(cfg.seed));
    params.tau_t = sim.tau_t();
    Ok((params, sim.snr_grid()))
}

pub fn simulate(
    codebooks: &[PathBuf],
    config: &Path,
    out: Option<&Path>,
    workers: Option<usize>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let (params, snr) = sim_params(&cfg, seed)?;
    let books = load_matching(codebooks, &cfg)?;
    let table = maybe_pooled(workers, || {
        let mut all = RateTable::default();
        for (label, book) in &books {
            all.rows.extend(evaluate_rate(book, label, &params, &snr)?.rows);
        }
        Ok(all)
    })?;
    write_output(out, &table.to_csv(true))
}

pub const COMPARE_CSV_HEADER: &str = "snr_db,codebook_a,codebook_b,mean_diff,stderr_diff,z";

pub fn compare(
    a: &Path,
    b: &Path,
    config: &Path,
    out: Option<&Path>,
    workers: Option<usize>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let (params, snr) = sim_params(&cfg, seed)?;
    let books = load_matching(&[a.to_path_buf(), b.to_path_buf()], &cfg)?;
    let text = maybe_pooled(workers, || {
        let mut s = format!("{COMPARE_CSV_HEADER}\n");
        for &x in &snr {
            let oa = simulate_outcomes(&books[0].1, &params, x)?;
            let ob = simulate_outcomes(&books[1].1, &params, x)?;
            let (d, se) = paired_difference(&oa, &ob)?;
            let z = if se > 0.0 { d / se } else { 0.0 };
            s.push_str(&format!(
                "{x},{},{},{d:.17e},{se:.17e},{z:.17e}\n",
                books[0].0, books[1].0
            ));
        }
        Ok(s)
    })?;
    write_output(out, &text)
}

pub fn verify(
    config: Option<&Path>,
    tolerance_scale: f64,
    trials: Option<usize>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut vc = VerifyConfig::default();
    if let Some(path) = config {
        let cfg = RunConfig::load(path)?;
        if let Some(u) = cfg.upa {
            vc.upa = u;
        }
        if cfg.codebook.is_some() {
            vc.cb = cfg.codebook()?.to_config(CodebookKind::Proposed)?;
        }
        vc.seed = cfg.seed;
    }
    vc.tolerance_scale = tolerance_scale;
    if let Some(t) = trials {
        vc.trials = t;
    }
    if let Some(s) = seed {
        vc.seed = s;
    }
    let report = verify::run(&vc)?;
    let text = serde_json::to_string_pretty(&json!({
        "config": vc,
        "checks": report.checks,
        "all_passed": report.all_passed(),
    }))
    .expect("report serialize")
        + "\n";
    write_output(out, &text)?;
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed && !c.informational)
            .map(|c| c.name)
            .collect();
        Err(CliError::new(1, format!("failed checks: {}", failed.join(", "))))
    }
}
