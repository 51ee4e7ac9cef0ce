//! Subcommand execution and file emission. Every run writes its outputs under
//! the configured directory together with a manifest naming each file, the
//! subcommand that produced it, and the seed, so runs are auditable and
//! byte-reproducible.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fuelgame_core::{
    build_geometry, classify_region, compare_games, deviation_test, estimate_value,
    relative_positions, simulate_path, value_game, BoundarySolution, JointState, NoisePath,
    Perturbation, RegionLabel, Side, ValueQuery, Variant,
};

use crate::config::RunConfig;

/// Outcome of a dispatched subcommand.
pub struct DispatchReport {
    /// Emitted file names (relative to the output directory), manifest last.
    pub files: Vec<String>,
    /// False when the run completed but an acceptance check failed.
    pub accepted: bool,
    /// Human-readable summary lines.
    pub summary: Vec<String>,
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    fs::write(dir.join(name), body).map_err(|e| format!("cannot write {name}: {e}"))
}

/// Symmetric joint positions giving `player` the centered position `xt`.
fn positions_for(n: usize, player: usize, xt: f64) -> Vec<f64> {
    let nf = n as f64;
    let mut x = vec![-xt / nf; n];
    x[player] = xt * (nf - 1.0) / nf;
    x
}

fn run_boundary(cfg: &RunConfig, b: &BoundarySolution) -> Result<(String, Vec<String>), String> {
    let mut csv = String::from("x,f,f_prime,a\n");
    for (x, f, fp) in b.table() {
        let a = b.a_at_x(x);
        writeln!(csv, "{x},{f},{fp},{a}").unwrap();
    }
    let summary = vec![
        format!("intercept x0 = {}", b.x0()),
        format!(
            "table covers fuel up to {} over x in [{}, {}]",
            cfg.y_max,
            b.x_min(),
            b.x0()
        ),
    ];
    Ok((csv, summary))
}

fn run_value(cfg: &RunConfig, b: &BoundarySolution) -> Result<(String, Vec<String>), String> {
    let n = cfg.spec.n_players();
    let span = 1.2 * b.x0();
    let mut csv = String::from("index,x_centered,region,value\n");
    for g in 0..cfg.grid_points {
        let t = if cfg.grid_points == 1 {
            0.5
        } else {
            g as f64 / (cfg.grid_points - 1) as f64
        };
        let xt = -span + 2.0 * span * t;
        let state = JointState::new(positions_for(n, cfg.player, xt), cfg.start.resources.clone());
        let region = match classify_region(&cfg.spec, b, &state).map_err(|e| e.to_string())? {
            RegionLabel::Waiting => "waiting".to_string(),
            RegionLabel::Action { player, side } => format!(
                "action_p{player}_{}",
                if side == Side::Plus { "plus" } else { "minus" }
            ),
        };
        let query = ValueQuery {
            spec: &cfg.spec,
            boundary: b,
            state,
            player: cfg.player,
        };
        let v = value_game(&query).map_err(|e| e.to_string())?;
        writeln!(csv, "{g},{xt},{region},{v}").unwrap();
    }
    let summary = vec![format!(
        "{} states for player {} across x_centered in [-{span}, {span}]",
        cfg.grid_points, cfg.player
    )];
    Ok((csv, summary))
}

fn run_simulate(
    cfg: &RunConfig,
    b: &BoundarySolution,
) -> Result<(String, String, Vec<String>), String> {
    let geom = build_geometry(&cfg.spec, b);
    let n = cfg.spec.n_players();
    let m = cfg.spec.n_resources();
    let steps = cfg.params.steps();

    let mut header = String::from("step,t");
    for i in 0..n {
        write!(header, ",x{i}").unwrap();
    }
    for j in 0..m {
        write!(header, ",y{j}").unwrap();
    }
    header.push('\n');

    let noise = NoisePath::generate(cfg.params.seed, 0, n, steps, cfg.params.dt);
    let record = simulate_path(&geom, &cfg.start, &cfg.params, &noise)
        .map_err(|e| e.to_string())?;
    let mut traj = header.clone();
    for (k, s) in record.states.iter().enumerate() {
        write!(traj, "{k},{}", k as f64 * cfg.params.dt).unwrap();
        for x in &s.positions {
            write!(traj, ",{x}").unwrap();
        }
        for y in &s.resources {
            write!(traj, ",{y}").unwrap();
        }
        traj.push('\n');
    }

    let mut header_end = String::from("path");
    for i in 0..n {
        write!(header_end, ",x{i}").unwrap();
    }
    for j in 0..m {
        write!(header_end, ",y{j}").unwrap();
    }
    header_end.push('\n');
    let mut ends = header_end;
    for p in 0..cfg.n_paths {
        let noise = NoisePath::generate(cfg.params.seed, p as u64, n, steps, cfg.params.dt);
        let rec = simulate_path(&geom, &cfg.start, &cfg.params, &noise)
            .map_err(|e| e.to_string())?;
        let last = rec.states.last().expect("simulation records the start state");
        write!(ends, "{p}").unwrap();
        for x in &last.positions {
            write!(ends, ",{x}").unwrap();
        }
        for y in &last.resources {
            write!(ends, ",{y}").unwrap();
        }
        ends.push('\n');
    }
    let summary = vec![format!(
        "{} steps per path at dt = {}; {} endpoint samples",
        steps, cfg.params.dt, cfg.n_paths
    )];
    Ok((traj, ends, summary))
}

fn run_verify(cfg: &RunConfig, b: &BoundarySolution) -> Result<(String, bool, Vec<String>), String> {
    let geom = build_geometry(&cfg.spec, b);
    let n = cfg.spec.n_players();
    let mut csv = String::from("check,player,detail,observed,reference,stat,pass\n");
    let mut all_ok = true;
    let mut summary = Vec::new();

    for player in 0..n {
        let query = ValueQuery {
            spec: &cfg.spec,
            boundary: b,
            state: cfg.start.clone(),
            player,
        };
        let analytic = value_game(&query).map_err(|e| e.to_string())?;
        let report = estimate_value(
            &geom,
            &cfg.start,
            player,
            cfg.n_paths,
            &cfg.params,
            Some(analytic),
        )
        .map_err(|e| e.to_string())?;
        let z = report.z_score.unwrap_or(0.0);
        let pass = z.abs() <= 3.0;
        all_ok &= pass;
        writeln!(
            csv,
            "value,{player},{}_paths,{},{analytic},{z},{}",
            report.n_paths, report.mean, pass
        )
        .unwrap();
        summary.push(format!(
            "player {player}: monte-carlo {:.6} vs candidate {analytic:.6} (z = {z:.2}) -> {}",
            report.mean,
            if pass { "pass" } else { "FAIL" }
        ));
    }

    let mut perturbations = Vec::new();
    for player in 0..n {
        for eps in [-0.3, -0.1, 0.1, 0.3] {
            perturbations.push(Perturbation::ThresholdShift { player, eps });
        }
    }
    perturbations.push(Perturbation::RoundTrip {
        player: cfg.player,
        size: 0.1,
    });
    let rows = deviation_test(
        &cfg.spec,
        b,
        &cfg.start,
        &perturbations,
        cfg.n_paths,
        &cfg.params,
    )
    .map_err(|e| e.to_string())?;
    let mut dev_fail = 0usize;
    for row in &rows {
        all_ok &= row.satisfied;
        dev_fail += usize::from(!row.satisfied);
        let (kind, detail) = match row.perturbation {
            Perturbation::ThresholdShift { eps, .. } => ("deviation_shift", format!("eps={eps}")),
            Perturbation::RoundTrip { size, .. } => ("deviation_roundtrip", format!("size={size}")),
        };
        writeln!(
            csv,
            "{kind},{},{detail},{},{},{},{}",
            row.perturbation.player(),
            row.deviated_mean,
            row.baseline_mean,
            row.diff_mean / row.diff_std_error.max(f64::MIN_POSITIVE),
            row.satisfied
        )
        .unwrap();
    }
    summary.push(format!(
        "{} deviations tested, {dev_fail} improved significantly on the candidate profile",
        rows.len()
    ));
    Ok((csv, all_ok, summary))
}

fn run_compare(cfg: &RunConfig, b: &BoundarySolution) -> Result<(String, bool, Vec<String>), String> {
    if cfg.spec.variant() == Variant::Pooling {
        return Err("compare needs a dividing or sharing game (one pool per player)".into());
    }
    let n = cfg.spec.n_players();
    let y_pool: f64 = cfg.start.resources.iter().sum();
    let thr = b.f_inverse(y_pool).map_err(|e| e.to_string())?;
    let span = 0.9 * thr;
    let mut csv = String::from("index,x_centered,v_pooling,v_sharing,v_dividing,ordered\n");
    let mut all_ok = true;
    for g in 0..cfg.grid_points {
        let t = if cfg.grid_points == 1 {
            0.5
        } else {
            g as f64 / (cfg.grid_points - 1) as f64
        };
        let xt = -span + 2.0 * span * t;
        let state = JointState::new(positions_for(n, cfg.player, xt), cfg.start.resources.clone());
        let xts = relative_positions(&state.positions).map_err(|e| e.to_string())?;
        if xts.iter().any(|x| x.abs() > thr) {
            continue;
        }
        let row = compare_games(&cfg.spec, b, &state, cfg.player, 1e-12)
            .map_err(|e| e.to_string())?;
        all_ok &= row.ordered;
        writeln!(
            csv,
            "{g},{xt},{},{},{},{}",
            row.v_pooling, row.v_sharing, row.v_dividing, row.ordered
        )
        .unwrap();
    }
    let summary = vec![format!(
        "pooling <= sharing <= dividing ordering {} on the grid",
        if all_ok { "holds" } else { "FAILS" }
    )];
    Ok((csv, all_ok, summary))
}

/// Runs `command` under `cfg`, writing all outputs plus `manifest.csv` under
/// the configured directory.
pub fn dispatch(command: &str, cfg: &RunConfig) -> Result<DispatchReport, String> {
    let b = BoundarySolution::solve(
        cfg.spec.cost(),
        cfg.spec.n_players(),
        cfg.spec.discount(),
        cfg.y_max,
    )
    .map_err(|e| e.to_string())?;

    let mut files: Vec<(String, String)> = Vec::new();
    let mut accepted = true;
    let summary;
    match command {
        "boundary" => {
            let (csv, s) = run_boundary(cfg, &b)?;
            files.push(("boundary.csv".into(), csv));
            summary = s;
        }
        "value" => {
            let (csv, s) = run_value(cfg, &b)?;
            files.push(("value.csv".into(), csv));
            summary = s;
        }
        "simulate" => {
            let (traj, ends, s) = run_simulate(cfg, &b)?;
            files.push(("trajectory.csv".into(), traj));
            files.push(("endpoints.csv".into(), ends));
            summary = s;
        }
        "verify" => {
            let (csv, ok, s) = run_verify(cfg, &b)?;
            files.push(("verify.csv".into(), csv));
            accepted = ok;
            summary = s;
        }
        "compare" => {
            let (csv, ok, s) = run_compare(cfg, &b)?;
            files.push(("compare.csv".into(), csv));
            accepted = ok;
            summary = s;
        }
        other => return Err(format!("unknown subcommand `{other}`")),
    }

    let mut manifest = String::from("file,subcommand,seed\n");
    let mut names = Vec::new();
    for (name, body) in &files {
        write_file(&cfg.output_dir, name, body)?;
        writeln!(manifest, "{name},{command},{}", cfg.params.seed).unwrap();
        names.push(name.clone());
    }
    writeln!(manifest, "manifest.csv,{command},{}", cfg.params.seed).unwrap();
    write_file(&cfg.output_dir, "manifest.csv", &manifest)?;
    names.push("manifest.csv".into());
    Ok(DispatchReport {
        files: names,
        accepted,
        summary,
    })
}
