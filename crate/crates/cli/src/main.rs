use std::fs;
use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use infinitas::acv::{estimate_k, AcvOptions, AcvReport};
use infinitas::density::{estimate, level_mesh, DensityEstimate, DensityStatus, DensityTarget};
use infinitas::output::{self, fmt_num, Table};
use infinitas::rabier::{check_rabier_equivalences, rabier_number, transport_fiber, FlowOptions, LinearMap};
use infinitas::topology::{chi_l_infty, stable_link, AlgebraicSet, SetKind};
use infinitas::verify::{continuity_scan, gb_identity_check, hypersurface_gb_check, IdentityResidual, Verdict};
use infinitas::{catalog, par, FamilySpec, GridAxis, RadiusSchedule};
use serde::Serialize;

const EXIT_IDENTITY: u8 = 2;
const EXIT_UNSTABLE: u8 = 3;
const EXIT_SPEC: u8 = 4;

/// Numerical geometry at infinity for polynomial families.
#[derive(Parser)]
#[command(name = "infinitas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Family spec file (TOML).
    #[arg(long, value_name = "FILE", conflicts_with = "catalog")]
    spec: Option<PathBuf>,
    /// Built-in family or set instead of a spec file.
    #[arg(long, value_name = "NAME")]
    catalog: Option<String>,
    /// Overrides the seed in the spec.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for CSV (and SVG) output.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print machine-readable JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Radius schedule `r0:factor:steps`.
    #[arg(long, value_name = "R0:F:K")]
    schedule: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Rabier number and the three equivalent characterizations of a matrix.
    Rabier {
        /// Matrix rows, one per line or separated by `;`, entries by commas or spaces
        /// (`-` or absent reads stdin).
        #[arg(long, value_name = "FILE")]
        matrix: Option<PathBuf>,
        /// Random starts on the sphere.
        #[arg(long, default_value_t = 32)]
        density: usize,
        #[arg(long)]
        json: bool,
    },
    /// Transport a fiber point along the trivialization flow.
    Flow {
        #[command(flatten)]
        common: Common,
        /// Start point `x1,…,xn`.
        #[arg(long, value_name = "X")]
        start: String,
        /// Target value.
        #[arg(long, value_name = "Y")]
        to: String,
        /// Expected value at the start (checked against `G(start)`).
        #[arg(long, value_name = "C")]
        from: Option<String>,
    },
    /// Estimate the generalized critical values over the scan grid.
    Acv {
        #[command(flatten)]
        common: Common,
        /// Grid `min:max:steps` (repeat for two parameters).
        #[arg(long, value_name = "A:B:N")]
        grid: Vec<String>,
    },
    /// Curvature densities at infinity of one fiber.
    Density {
        #[command(flatten)]
        common: Common,
        /// Parameter value, comma-separated (defaults to the origin).
        #[arg(long, value_name = "Y")]
        at: Option<String>,
        /// Comma-separated targets: kappa:I, sigma:I, theta, lambda:K[:sublevel].
        #[arg(long, default_value = "kappa:0,sigma:1")]
        targets: String,
        /// Write the level mesh at every radius as OBJ text into DIR.
        #[arg(long, value_name = "DIR")]
        dump_mesh: Option<PathBuf>,
    },
    /// Euler characteristic of the link at infinity across the schedule.
    Links {
        #[command(flatten)]
        common: Common,
        /// Parameter value, comma-separated (defaults to the origin).
        #[arg(long, value_name = "Y")]
        at: Option<String>,
        #[arg(long, value_enum, default_value_t = SetArg::Fiber)]
        set: SetArg,
    },
    /// Grassmannian average of section links.
    Chi {
        #[command(flatten)]
        common: Common,
        /// Parameter value, comma-separated (defaults to the origin).
        #[arg(long, value_name = "Y")]
        at: Option<String>,
        #[arg(long, value_enum, default_value_t = SetArg::Fiber)]
        set: SetArg,
        /// Dimension of the random linear sections (`l = n` is exact).
        #[arg(long)]
        l: usize,
        /// Grassmannian samples (overrides the spec).
        #[arg(long)]
        planes: Option<usize>,
    },
    /// Gauss-Bonnet identities at infinity for one fiber.
    GbCheck {
        #[command(flatten)]
        common: Common,
        /// Parameter value, comma-separated (defaults to the origin).
        #[arg(long, value_name = "Y")]
        at: Option<String>,
        #[arg(long, value_enum, default_value_t = CheckArg::All)]
        check: CheckArg,
        /// Grassmannian samples (overrides the spec).
        #[arg(long)]
        planes: Option<usize>,
    },
    /// Invariants over the scan grid with jump detection.
    Scan {
        #[command(flatten)]
        common: Common,
        /// Grid `min:max:steps` (repeat for two parameters).
        #[arg(long, value_name = "A:B:N")]
        grid: Vec<String>,
        /// Grassmannian samples (overrides the spec).
        #[arg(long)]
        planes: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SetArg {
    Fiber,
    Sublevel,
}

impl From<SetArg> for SetKind {
    fn from(s: SetArg) -> Self {
        match s {
            SetArg::Fiber => SetKind::Fiber,
            SetArg::Sublevel => SetKind::Sublevel,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum CheckArg {
    Fiber,
    Sublevel,
    Hypersurface,
    All,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_SPEC)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = threads_from_env() {
        par::set_threads(n);
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn threads_from_env() -> Option<usize> {
    let v = std::env::var("INFINITAS_THREADS").ok()?;
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => Some(n),
        _ => {
            eprintln!("warning: ignoring INFINITAS_THREADS={v}");
            None
        }
    }
}

/// Input errors are 4, non-stabilized links 3, anything else 1.
fn exit_code_for(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<SpecInput>() {
            return EXIT_SPEC;
        }
        if let Some(err) = cause.downcast_ref::<infinitas::Error>() {
            return match err {
                infinitas::Error::Spec(_) | infinitas::Error::Poly(_) => EXIT_SPEC,
                infinitas::Error::NotStabilized(_) => EXIT_UNSTABLE,
                _ => 1,
            };
        }
    }
    1
}

/// Marks an error in the command-line or spec input.
#[derive(Debug)]
struct SpecInput(String);

impl std::fmt::Display for SpecInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SpecInput {}

fn input_err(msg: impl Into<String>) -> anyhow::Error {
    SpecInput(msg.into()).into()
}

fn load_spec(c: &Common) -> anyhow::Result<FamilySpec> {
    let mut spec = match (&c.spec, &c.catalog) {
        (Some(path), _) => {
            let text =
                fs::read_to_string(path).map_err(|e| input_err(format!("cannot read spec {}: {e}", path.display())))?;
            FamilySpec::from_toml(&text).with_context(|| format!("in {}", path.display()))?
        }
        (None, Some(name)) => {
            if let Ok(f) = catalog::family(name) {
                f.spec()
            } else if let Ok(s) = catalog::set(name) {
                s.spec()
            } else {
                return Err(input_err(format!("unknown catalog entry '{name}'")));
            }
        }
        (None, None) => return Err(input_err("one of --spec or --catalog is required")),
    };
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    if let Some(s) = &c.schedule {
        spec.schedule = RadiusSchedule::parse(s)?;
    }
    Ok(spec)
}

fn parse_vec(text: &str, what: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| input_err(format!("{what} '{text}' is not a comma-separated list of numbers")))
        })
        .collect()
}

fn parameter(spec: &FamilySpec, at: &Option<String>) -> anyhow::Result<Vec<f64>> {
    let y = match at {
        Some(t) => parse_vec(t, "--at")?,
        None => vec![0.0; spec.s],
    };
    if y.len() != spec.s {
        return Err(input_err(format!(
            "--at has {} entries, the family has s = {}",
            y.len(),
            spec.s
        )));
    }
    Ok(y)
}

fn apply_grid(spec: &mut FamilySpec, grid: &[String]) -> anyhow::Result<()> {
    if !grid.is_empty() {
        spec.grid = grid.iter().map(|g| GridAxis::parse(g)).collect::<Result<_, _>>()?;
        spec.validate()?;
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_out(dir: &Option<PathBuf>, name: &str, table: &Table) -> anyhow::Result<()> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        output::write_table(&dir.join(name), table)?;
    }
    Ok(())
}

fn fmt_y(y: &[f64]) -> String {
    y.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(";")
}

fn run(cmd: Command) -> anyhow::Result<u8> {
    match cmd {
        Command::Rabier { matrix, density, json } => rabier(matrix.as_deref(), density, json),
        Command::Flow {
            common,
            start,
            to,
            from,
        } => flow(&common, &start, &to, from.as_deref()),
        Command::Acv { common, grid } => acv(&common, &grid),
        Command::Density {
            common,
            at,
            targets,
            dump_mesh,
        } => density(&common, &at, &targets, dump_mesh.as_deref()),
        Command::Links { common, at, set } => links(&common, &at, set.into()),
        Command::Chi {
            common,
            at,
            set,
            l,
            planes,
        } => chi(&common, &at, set.into(), l, planes),
        Command::GbCheck {
            common,
            at,
            check,
            planes,
        } => gb_check(&common, &at, check, planes),
        Command::Scan { common, grid, planes } => scan(&common, &grid, planes),
    }
}

fn read_matrix(path: Option<&Path>) -> anyhow::Result<Vec<Vec<f64>>> {
    let text = match path {
        Some(p) if p != Path::new("-") => {
            fs::read_to_string(p).map_err(|e| input_err(format!("cannot read {}: {e}", p.display())))?
        }
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    let mut rows = Vec::new();
    for line in text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split(';'))
        .map(str::trim)
        .filter(|l| !l.is_empty())
    {
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| input_err(format!("bad matrix entry '{t}'")))
            })
            .collect::<anyhow::Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(input_err("matrix rows are empty or ragged"));
    }
    Ok(rows)
}

#[derive(Serialize)]
struct RabierOut {
    q: usize,
    p: usize,
    nu: f64,
    equivalences: Option<infinitas::rabier::EquivalenceReport>,
}

fn rabier(path: Option<&Path>, density: usize, json: bool) -> anyhow::Result<u8> {
    let rows = read_matrix(path)?;
    let a = LinearMap::from_rows(&rows).map_err(|e| input_err(e.to_string()))?;
    let out = RabierOut {
        q: a.q(),
        p: a.p(),
        nu: rabier_number(&a),
        // the three characterizations only apply to maps that can be onto
        equivalences: (a.q() <= a.p())
            .then(|| check_rabier_equivalences(&a, density))
            .transpose()?,
    };
    if json {
        print_json(&out)?;
    } else {
        println!("shape = {}x{}", out.q, out.p);
        println!("nu = {}", out.nu);
        if let Some(e) = &out.equivalences {
            println!("infimum = {}", e.infimum);
            println!("inscribed_radius = {}", e.inscribed_radius);
            println!("distance_to_singular = {}", e.distance_to_singular);
            println!("discrepancy = {:e}", e.discrepancy);
        }
    }
    Ok(0)
}

fn flow(c: &Common, start: &str, to: &str, from: Option<&str>) -> anyhow::Result<u8> {
    let spec = load_spec(c)?;
    let x0 = parse_vec(start, "--start")?;
    let y = parse_vec(to, "--to")?;
    if x0.len() != spec.n || y.len() != spec.s {
        return Err(input_err(format!(
            "need --start with {} and --to with {} entries",
            spec.n, spec.s
        )));
    }
    if let Some(from) = from {
        let c0 = parse_vec(from, "--from")?;
        let g: Vec<f64> = spec.polys.iter().map(|p| p.eval(&x0)).collect();
        let gap = c0.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if c0.len() != spec.s || gap > 1e-6 {
            return Err(input_err(format!(
                "start point lies over {g:?}, not over --from {c0:?}"
            )));
        }
    }
    let r = transport_fiber(&spec, &x0, &y, &FlowOptions::default())?;
    if let Some(dir) = &c.out {
        let mut t = Table::new("# infinitas flow v1", &["t", "x"]);
        for (tt, x) in &r.trajectory {
            t.push(vec![fmt_num(*tt), fmt_y(x)]);
        }
        write_out(&Some(dir.clone()), "flow.csv", &t)?;
    }
    if c.json {
        print_json(&r)?;
    } else {
        println!("start = {}", fmt_y(&r.start));
        println!("c = {}", fmt_y(&r.c));
        println!("target = {}", fmt_y(&r.target));
        println!("endpoint = {}", fmt_y(&r.endpoint));
        println!("max_residual = {:e}", r.max_residual);
        println!(
            "steps = {} accepted, {} rejected, {} corrections",
            r.accepted, r.rejected, r.corrections
        );
    }
    Ok(0)
}

fn acv_table(rep: &AcvReport) -> Table {
    let mut t = Table::new(output::ACV_SCHEMA, &["y", "R", "inf_M", "class"]);
    for node in &rep.nodes {
        let class = match (&node.class, &node.error) {
            (Some(c), _) => c.label().to_string(),
            (None, Some(e)) => format!("error: {e}"),
            (None, None) => String::new(),
        };
        match &node.profile {
            Some(p) => {
                for e in &p.entries {
                    t.push(vec![
                        fmt_y(&node.c),
                        fmt_num(e.r),
                        e.value.map(fmt_num).unwrap_or_default(),
                        class.clone(),
                    ]);
                }
            }
            None => t.push(vec![fmt_y(&node.c), String::new(), String::new(), class]),
        }
    }
    t
}

fn acv(c: &Common, grid: &[String]) -> anyhow::Result<u8> {
    let mut spec = load_spec(c)?;
    apply_grid(&mut spec, grid)?;
    let rep = estimate_k(&spec, &spec.schedule, &AcvOptions::default(), spec.seed)?;
    write_out(&c.out, "acv.csv", &acv_table(&rep))?;
    if c.json {
        print_json(&rep)?;
    } else {
        println!("critical values (K0): {}", rep.k0.witnesses.len());
        if rep.k0.coverage_warning {
            println!("warning: no critical-point start converged; K0 may be incomplete");
        }
        for e in &rep.k {
            let src = match e.source {
                infinitas::acv::KSource::K0 => "K0",
                infinitas::acv::KSource::Kinf => "Kinf",
            };
            println!("K {src} [{}, {}]", fmt_y(&e.lo), fmt_y(&e.hi));
        }
        if rep.k.is_empty() {
            println!("K is empty on the grid");
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct DensitySummary {
    target: String,
    limit: Option<f64>,
    value: Option<f64>,
    error: Option<f64>,
    status: String,
}

fn density(c: &Common, at: &Option<String>, targets: &str, dump: Option<&Path>) -> anyhow::Result<u8> {
    let spec = load_spec(c)?;
    let y = parameter(&spec, at)?;
    let targets = targets
        .split(',')
        .map(DensityTarget::parse)
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(dir) = dump {
        let f = spec.level_polynomial(&y)?;
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for r in spec.schedule.radii() {
            let mesh = level_mesh(&f, r, spec.sampling.mesh_level)?;
            let p = dir.join(format!("mesh_R{}.obj", fmt_num(r)));
            fs::write(&p, mesh.to_obj()).with_context(|| format!("writing {}", p.display()))?;
        }
    }
    let mut table = Table::new(output::DENSITY_SCHEMA, &["target", "R", "raw", "normalized"]);
    let mut summary = Vec::new();
    for t in targets {
        let res: infinitas::Result<DensityEstimate> = estimate(&spec, &y, t, &spec.schedule);
        match res {
            Ok(e) => {
                for row in &e.table {
                    table.push(vec![
                        t.to_string(),
                        fmt_num(row.r),
                        fmt_num(row.raw),
                        fmt_num(row.normalized),
                    ]);
                }
                summary.push(DensitySummary {
                    target: t.to_string(),
                    limit: e.limit,
                    value: Some(e.value),
                    error: Some(e.error),
                    status: match e.status {
                        DensityStatus::Converged => "converged".into(),
                        DensityStatus::NonConvergent => "non-convergent".into(),
                    },
                });
            }
            Err(err) => summary.push(DensitySummary {
                target: t.to_string(),
                limit: None,
                value: None,
                error: None,
                status: err.to_string(),
            }),
        }
    }
    write_out(&c.out, "density.csv", &table)?;
    if c.json {
        print_json(&summary)?;
    } else {
        for s in &summary {
            match s.value {
                Some(v) => println!("{} = {} ± {:.2e} ({})", s.target, v, s.error.unwrap_or(0.0), s.status),
                None => println!("{}: {}", s.target, s.status),
            }
        }
    }
    Ok(0)
}

fn links(c: &Common, at: &Option<String>, kind: SetKind) -> anyhow::Result<u8> {
    let spec = load_spec(c)?;
    let y = parameter(&spec, at)?;
    let set = AlgebraicSet {
        poly: spec.level_polynomial(&y)?,
        kind,
    };
    let rep = stable_link(&set, &spec.schedule)?;
    let mut t = Table::new(output::LINKS_SCHEMA, &["R", "chi", "status"]);
    for ((r, s), e) in rep.radii.iter().zip(&rep.samples).zip(&rep.errors) {
        let (chi, status) = match (s, e) {
            (Some(s), _) => (s.chi.to_string(), "ok".to_string()),
            (None, Some(e)) => (String::new(), e.clone()),
            (None, None) => (String::new(), String::new()),
        };
        t.push(vec![fmt_num(*r), chi, status]);
    }
    write_out(&c.out, "links.csv", &t)?;
    if c.json {
        print_json(&rep)?;
    } else {
        for row in &t.rows {
            if row[2] == "ok" {
                println!("R = {}: chi = {}", row[0], row[1]);
            } else {
                println!("R = {}: chi = {} ({})", row[0], row[1], row[2]);
            }
        }
        match rep.stable_chi {
            Some(chi) => println!(
                "stable chi = {chi} from R = {}",
                fmt_num(rep.stable_from.unwrap_or(0.0))
            ),
            None => println!("not stabilized"),
        }
    }
    Ok(if rep.is_stable() { 0 } else { EXIT_UNSTABLE })
}

fn chi(c: &Common, at: &Option<String>, kind: SetKind, l: usize, planes: Option<usize>) -> anyhow::Result<u8> {
    let spec = load_spec(c)?;
    let y = parameter(&spec, at)?;
    let set = AlgebraicSet {
        poly: spec.level_polynomial(&y)?,
        kind,
    };
    let planes = planes.unwrap_or(spec.sampling.planes);
    let est = chi_l_infty(&set, l, planes, &spec.schedule, spec.seed)?;
    let mut t = Table::new(output::CHI_SCHEMA, &["plane", "chi", "status"]);
    for (i, v) in est.per_plane.iter().enumerate() {
        let (chi, status) = match v {
            Some(v) => (v.to_string(), "ok"),
            None => (String::new(), "failed"),
        };
        t.push(vec![i.to_string(), chi, status.into()]);
    }
    write_out(&c.out, "chi.csv", &t)?;
    if c.json {
        print_json(&est)?;
    } else {
        let how = if est.exact {
            "exact".to_string()
        } else {
            format!(
                "{} planes, {} failed, {} resampled",
                est.planes, est.failed, est.resampled
            )
        };
        println!("chi_{l} = {} ± {:.3e} ({how})", est.value, est.stderr);
    }
    Ok(0)
}

fn gb_check(c: &Common, at: &Option<String>, check: CheckArg, planes: Option<usize>) -> anyhow::Result<u8> {
    let spec = load_spec(c)?;
    let y = parameter(&spec, at)?;
    let planes = planes.unwrap_or(spec.sampling.planes);
    let sched = spec.schedule;
    let mut rows: Vec<(&str, IdentityResidual)> = Vec::new();
    if matches!(check, CheckArg::Fiber | CheckArg::All) {
        let r = gb_identity_check(&spec, &y, SetKind::Fiber, &sched, planes, spec.seed)?;
        rows.extend(r.into_iter().map(|r| ("fiber", r)));
    }
    if matches!(check, CheckArg::Sublevel | CheckArg::All) {
        let r = gb_identity_check(&spec, &y, SetKind::Sublevel, &sched, planes, spec.seed)?;
        rows.extend(r.into_iter().map(|r| ("sublevel", r)));
    }
    if matches!(check, CheckArg::Hypersurface | CheckArg::All) {
        let r = hypersurface_gb_check(&spec, &y, &sched, planes, spec.seed)?;
        rows.extend(r.into_iter().map(|r| ("hypersurface", r)));
    }
    let mut t = Table::new(
        output::GB_SCHEMA,
        &["set", "identity", "left", "right", "error", "verdict", "note"],
    );
    for (set, r) in &rows {
        t.push(vec![
            set.to_string(),
            r.id.clone(),
            r.left.map(fmt_num).unwrap_or_default(),
            r.right.map(fmt_num).unwrap_or_default(),
            fmt_num(r.error),
            r.verdict.as_str().into(),
            r.note.clone().unwrap_or_default(),
        ]);
    }
    write_out(&c.out, "gb.csv", &t)?;
    if c.json {
        let v: Vec<_> = rows
            .iter()
            .map(|(s, r)| serde_json::json!({ "set": s, "residual": r }))
            .collect();
        print_json(&v)?;
    } else {
        let short = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}").replace("-0.000000", "0.000000"));
        for (set, r) in &rows {
            let note = r.note.as_ref().map(|n| format!(" ({n})")).unwrap_or_default();
            println!(
                "{set:<12} {:<24} {:>12} {:>12} ± {:<9.2e} {}{note}",
                r.id,
                short(r.left),
                short(r.right),
                r.error,
                r.verdict.as_str()
            );
        }
    }
    Ok(gb_exit(rows.iter().map(|(_, r)| r)))
}

/// A failed identity outranks an unsettled link.
fn gb_exit<'a>(rows: impl Iterator<Item = &'a IdentityResidual>) -> u8 {
    let mut code = 0;
    for r in rows {
        if r.verdict == Verdict::Fail {
            return EXIT_IDENTITY;
        }
        if r.note.as_deref().is_some_and(|n| n.contains("did not stabilize")) {
            code = EXIT_UNSTABLE;
        }
    }
    code
}

fn scan(c: &Common, grid: &[String], planes: Option<usize>) -> anyhow::Result<u8> {
    let mut spec = load_spec(c)?;
    apply_grid(&mut spec, grid)?;
    let planes = planes.unwrap_or(spec.sampling.planes);
    let rep = continuity_scan(&spec, &spec.schedule, planes, &AcvOptions::default(), spec.seed)?;
    if let Some(dir) = &c.out {
        output::emit_outputs(&rep, dir)?;
    }
    if c.json {
        print_json(&rep)?;
    } else {
        println!("nodes = {}", rep.nodes.len());
        for e in &rep.acv.k {
            println!("K [{}, {}]", fmt_y(&e.lo), fmt_y(&e.hi));
        }
        for j in &rep.jumps {
            println!(
                "jump {} {} between {} and {}: delta {} > {} ({})",
                j.quantity,
                j.component,
                fmt_y(&j.from),
                fmt_y(&j.to),
                fmt_num(j.delta),
                fmt_num(j.threshold),
                if j.contains_k { "contains K" } else { "outside K" }
            );
        }
        if rep.jumps.is_empty() {
            println!("no jumps");
        }
        println!("jumps contained in K: {}", rep.jumps_contained());
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(verdict: Verdict, note: Option<&str>) -> IdentityResidual {
        IdentityResidual {
            id: "GB-0".into(),
            left: Some(0.0),
            right: Some(1.0),
            error: 0.0,
            verdict,
            note: note.map(String::from),
        }
    }

    #[test]
    fn gb_exit_codes() {
        let pass = residual(Verdict::Pass, None);
        let fail = residual(Verdict::Fail, None);
        let open = residual(Verdict::Inconclusive, Some("did not stabilize: link"));
        assert_eq!(gb_exit([&pass].into_iter()), 0);
        assert_eq!(gb_exit([&pass, &open].into_iter()), EXIT_UNSTABLE);
        assert_eq!(gb_exit([&open, &fail].into_iter()), EXIT_IDENTITY);
    }

    #[test]
    fn library_errors_map_to_exit_codes() {
        let spec: anyhow::Error = infinitas::Error::Spec("x".into()).into();
        assert_eq!(exit_code_for(&spec), EXIT_SPEC);
        let unstable = anyhow::Error::from(infinitas::Error::NotStabilized("x".into())).context("links");
        assert_eq!(exit_code_for(&unstable), EXIT_UNSTABLE);
        assert_eq!(exit_code_for(&input_err("bad")), EXIT_SPEC);
        assert_eq!(exit_code_for(&anyhow::anyhow!("other")), 1);
    }
}
