use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use reebchord::diagnostics::{read_jsonl, starshape_scan, to_json_line, write_jsonl, DEDUPE_TOL};
use reebchord::dynamics::{hamiltonian, lagrange_points, oberth_energy_gain, PhaseState, SystemParams};
use reebchord::integrator::{integrate, write_csv, FlowModel, Initial, IntegrationSettings, AT_COLLISION_TOL};
use reebchord::regularization::RegularizedLevel;
use reebchord::search::{run_search, RejectionKind, SearchConfig};
use reebchord::shooting::{
    axis_initial_state, chord_from_shot, collision_passages, Branch, ShootingOptions, ShotSpec, Side,
};

use crate::config::{settings, JacobiArg, RunConfig, StarshapeGrid};
use crate::{BranchSel, Cli, Command, Common, SideSel, UsageError};

pub fn run(cli: &Cli) -> Result<u8> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.common.jobs {
        if jobs == 0 {
            bail!(UsageError("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().context("starting the worker pool")?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<u8> {
    let c = &cli.common;
    match &cli.command {
        Command::Lagrange { mu } => lagrange(c, *mu),
        Command::Scan {
            mu,
            jacobi,
            branch,
            side,
            s_range,
            grid,
            force,
            out,
        } => {
            let params = SystemParams::new(*mu)?;
            let mut cfg = SearchConfig::new(*mu, jacobi.resolve(&params)?);
            cfg.branches = branches(*branch);
            cfg.sides = match side {
                SideSel::Negative => vec![Side::Negative],
                SideSel::Positive => vec![Side::Positive],
                SideSel::Both => vec![Side::Negative, Side::Positive],
            };
            cfg.s_range = s_range.map(|r| (r.0, r.1));
            cfg.grid = *grid;
            cfg.force = *force;
            cfg.shooting.k_max = c.k_max;
            cfg.integrator = settings(c.rel_tol, c.abs_tol, c.t_max)?;
            scan(c, cfg, *jacobi, out)
        }
        Command::Integrate {
            mu,
            state,
            shot,
            branch,
            jacobi,
            regularized,
            out,
        } => {
            let params = SystemParams::new(*mu)?;
            let jacobi_value = jacobi.map(|j| j.resolve(&params)).transpose()?;
            let initial = match (state, shot) {
                (Some(st), None) => PhaseState::from_array(&st.0),
                (None, Some(s)) => {
                    let Some(jv) = jacobi_value else {
                        bail!(UsageError("--shot needs --jacobi".into()));
                    };
                    let b = match branch {
                        BranchSel::Plus => Branch::Plus,
                        BranchSel::Minus => Branch::Minus,
                        BranchSel::Both => bail!(UsageError("--shot takes a single --branch".into())),
                    };
                    axis_initial_state(&ShotSpec::new(*s, b, RegularizedLevel::from_jacobi(params, jv)))?
                }
                _ => bail!(UsageError("give exactly one of --state or --shot".into())),
            };
            integrate_cmd(c, params, initial, jacobi_value, *jacobi, *regularized, out.as_deref())
        }
        Command::Starshape {
            mu,
            jacobi,
            base_grid,
            ray_grid,
            out,
        } => starshape(c, *mu, *jacobi, *base_grid, *ray_grid, out.as_deref()),
        Command::OrbitSvg {
            catalog,
            index,
            out,
            samples,
        } => orbit_svg(c, catalog, *index, out, *samples),
        Command::Oberth { v, dv } => {
            if !v.is_finite() || !dv.is_finite() {
                bail!(UsageError("--v and --dv must be finite".into()));
            }
            let gain = oberth_energy_gain(*v, *dv);
            if c.json {
                let value = serde_json::json!({ "v": v, "dv": dv, "energy_gain": gain });
                println!("{}", to_json_line(&value)?);
            } else {
                println!("energy gain {gain:.16e}");
            }
            Ok(0)
        }
    }
}

fn branches(sel: BranchSel) -> Vec<Branch> {
    match sel {
        BranchSel::Plus => vec![Branch::Plus],
        BranchSel::Minus => vec![Branch::Minus],
        BranchSel::Both => vec![Branch::Plus, Branch::Minus],
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn lagrange(c: &Common, mu: f64) -> Result<u8> {
    let config = lagrange_points(&SystemParams::new(mu)?)?;
    if c.json {
        println!("{}", to_json_line(&config)?);
        return Ok(0);
    }
    println!("mu {:.16e}", config.mu);
    for p in &config.points {
        println!(
            "{:?} {:>24.16e} {:>24.16e} H {:.16e}",
            p.label, p.position[0], p.position[1], p.value
        );
    }
    println!("first_critical_value {:.16e}", config.first_critical_value);
    if config.degenerate {
        println!("degenerate: the critical set is the unit circle");
    }
    Ok(0)
}

fn scan(c: &Common, cfg: SearchConfig, jacobi_arg: JacobiArg, out: &Path) -> Result<u8> {
    if cfg.force {
        let critical = lagrange_points(&SystemParams::new(cfg.mu)?)?.first_critical_value;
        if cfg.jacobi >= critical {
            eprintln!(
                "warning: jacobi {:.16e} is not below the first critical value {:.16e}; star-shapedness is not guaranteed",
                cfg.jacobi, critical
            );
        }
    }
    let outcome = run_search(&cfg)?;

    let mut rc = RunConfig::new("scan", cfg.integrator, cfg.shooting.k_max);
    rc.mu = Some(cfg.mu);
    rc.jacobi = Some(cfg.jacobi);
    rc.jacobi_arg = Some(jacobi_arg.to_string());
    rc.search = Some(cfg.clone());
    rc.out = Some(out.display().to_string());
    let mut catalog = outcome.catalog;
    catalog.set_run_config(&rc.to_value()?);

    let mut w = create(out)?;
    write_jsonl(&catalog, &mut w)?;
    w.flush()?;

    for r in &outcome.rejections {
        let (lo, hi) = r.bracket.s_range();
        eprintln!(
            "rejected {}/{} k={} s in [{lo:.16e}, {hi:.16e}]: {}",
            r.family.branch.name(),
            r.family.side.name(),
            r.bracket.k(),
            r.reason
        );
    }

    let stdout = io::stdout();
    let mut so = stdout.lock();
    if c.json {
        for e in catalog.entries() {
            writeln!(so, "{}", to_json_line(e)?)?;
        }
    } else {
        writeln!(
            so,
            "{:>5} {:>6} {:>8} {:>2} {:>24} {:>24} {:>24}",
            "index", "branch", "side", "k", "s*", "tau", "flight_time"
        )?;
        for (i, e) in catalog.entries().iter().enumerate() {
            writeln!(
                so,
                "{i:>5} {:>6} {:>8} {:>2} {:>24.16e} {:>24.16e} {:>24.16e}",
                e.branch.name(),
                e.side.name(),
                e.pericenter_index,
                e.s0,
                e.tau_reeb,
                e.flight_time
            )?;
        }
        writeln!(
            so,
            "{} chords from {} brackets, {} rejected",
            catalog.len(),
            outcome.brackets,
            outcome.rejections.len()
        )?;
    }

    if !catalog.is_empty() {
        return Ok(0);
    }
    let all_numerical =
        !outcome.rejections.is_empty() && outcome.rejections.iter().all(|r| r.kind == RejectionKind::Numerical);
    Ok(if all_numerical { 4 } else { 3 })
}

fn integrate_cmd(
    c: &Common,
    params: SystemParams,
    initial: PhaseState,
    jacobi: Option<f64>,
    jacobi_arg: Option<JacobiArg>,
    regularized: bool,
    out: Option<&Path>,
) -> Result<u8> {
    let s = settings(c.rel_tol, c.abs_tol, c.t_max)?;
    let jacobi = match jacobi {
        Some(j) => j,
        None => hamiltonian(&initial, &params)?,
    };
    let model = if regularized {
        FlowModel::regularized(RegularizedLevel::from_jacobi(params, jacobi))
    } else {
        FlowModel::physical(params, -jacobi)
    };
    let traj = integrate(&model, &Initial::Physical(initial), &s)?;
    let extra = if regularized {
        collision_passages(&traj, AT_COLLISION_TOL)
    } else {
        Vec::new()
    };

    let mut rc = RunConfig::new("integrate", s, c.k_max);
    rc.mu = Some(params.mu());
    rc.jacobi = Some(jacobi);
    rc.jacobi_arg = jacobi_arg.map(|j| j.to_string());
    rc.initial = Some(initial.to_array());
    rc.regularized = Some(regularized);
    rc.out = out.map(|p| p.display().to_string());
    let preamble = vec![format!("run_config {}", rc.to_json()?)];

    match out {
        Some(path) => {
            let mut w = create(path)?;
            write_csv(&traj, &extra, &preamble, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write_csv(&traj, &extra, &preamble, &mut w)?;
            w.flush()?;
        }
    }
    if !extra.is_empty() {
        eprintln!("{} collision passage(s)", extra.len());
    }
    Ok(0)
}

fn starshape(
    c: &Common,
    mu: f64,
    jacobi: JacobiArg,
    base_grid: usize,
    ray_grid: usize,
    out: Option<&Path>,
) -> Result<u8> {
    let params = SystemParams::new(mu)?;
    let jv = jacobi.resolve(&params)?;
    let report = starshape_scan(&RegularizedLevel::from_jacobi(params, jv), base_grid, ray_grid)?;

    let mut rc = RunConfig::new("starshape", IntegrationSettings::default(), c.k_max);
    rc.mu = Some(mu);
    rc.jacobi = Some(jv);
    rc.jacobi_arg = Some(jacobi.to_string());
    rc.starshape = Some(StarshapeGrid { base_grid, ray_grid });
    rc.out = out.map(|p| p.display().to_string());
    let mut value = serde_json::to_value(&report)?;
    value["run_config"] = rc.to_value()?;
    let line = to_json_line(&value)?;

    if let Some(path) = out {
        let mut w = create(path)?;
        writeln!(w, "{line}")?;
        w.flush()?;
    }
    if c.json {
        println!("{line}");
    } else {
        println!(
            "mu {:.16e} jacobi {:.16e} (critical {:.16e})",
            report.mu, report.jacobi, report.first_critical_value
        );
        println!(
            "{} base points x {} directions = {} rays",
            report.base_points, ray_grid, report.rays
        );
        for (k, n) in &report.crossing_histogram {
            println!("  {n} ray(s) with {k} crossing(s)");
        }
        println!("min margin {:.16e}", report.min_margin);
        for f in &report.failures {
            println!(
                "  failure {:?} a=({:.6e}, {:.6e}) dir=({:.6e}, {:.6e}) crossings {} margin {:.6e}",
                f.chart, f.a[0], f.a[1], f.direction[0], f.direction[1], f.crossings, f.margin
            );
        }
        println!("{}", if report.pass { "PASS" } else { "FAIL" });
    }
    Ok(if report.pass { 0 } else { 3 })
}

fn orbit_svg(c: &Common, catalog_path: &Path, index: usize, out: &Path, samples: usize) -> Result<u8> {
    if samples < 2 {
        bail!(UsageError("--samples must be at least 2".into()));
    }
    let f = File::open(catalog_path).with_context(|| format!("opening {}", catalog_path.display()))?;
    let catalog =
        read_jsonl(BufReader::new(f), DEDUPE_TOL).with_context(|| format!("reading {}", catalog_path.display()))?;
    let Some(entry) = catalog.entries().get(index) else {
        bail!(UsageError(format!(
            "index {index} out of range: {} holds {} chord(s)",
            catalog_path.display(),
            catalog.len()
        )));
    };

    let params = SystemParams::new(entry.mu)?;
    let level = RegularizedLevel::from_jacobi(params, entry.jacobi);
    let spec = ShotSpec::new(entry.s0, entry.branch, level);
    let opts = entry
        .run_config
        .get("search")
        .and_then(|s| s.get("shooting"))
        .and_then(|v| serde_json::from_value::<ShootingOptions>(v.clone()).ok())
        .unwrap_or_default();
    let chord = chord_from_shot(
        &spec,
        entry.pericenter_index,
        (entry.s0, entry.s0),
        entry.dm_ds.unwrap_or(f64::NAN),
        &opts,
        &entry.integrator_tolerances,
    )
    .context("rebuilding the chord")?;

    let mut rc = RunConfig::new("orbit-svg", entry.integrator_tolerances, c.k_max);
    rc.mu = Some(entry.mu);
    rc.jacobi = Some(entry.jacobi);
    rc.catalog = Some(catalog_path.display().to_string());
    rc.index = Some(index);
    rc.out = Some(out.display().to_string());
    let mut meta = serde_json::json!({ "run_config": rc.to_value()?, "entry": serde_json::to_value(entry)? });
    reebchord::diagnostics::normalize_floats(&mut meta);
    let svg = crate::svg::render(&chord, samples, &serde_json::to_string(&meta)?);

    let mut w = create(out)?;
    w.write_all(svg.as_bytes())?;
    w.flush()?;
    if !c.json {
        println!("wrote {}", out.display());
    }
    Ok(0)
}
