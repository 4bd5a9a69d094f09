use std::fs;
use std::path::Path;

use gainpdf::io::{parse_scenarios_csv, parse_scenarios_json, save_scenarios, write_json, Format};
use gainpdf::synth::{default_profiles, generate, AssetProfile};
use gainpdf::workflow::{
    landscape_iso, parse_list, parse_range, run_frontier, run_landscape, run_marginal, run_match, solve_point,
    BoostConfig, Dataset, MarginalRequest, MatchReport, MatchTarget,
};
use gainpdf::{Error, Portfolio, Result, SweepOptions, TargetSpec};

use crate::args::*;
use crate::svg;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen(&a),
        Command::Frontier(a) => frontier(&a),
        Command::Match(a) => match_cmd(&a),
        Command::Marginal(a) => marginal(&a),
        Command::Landscape(a) => landscape_cmd(&a),
        Command::Serve(a) => serve(&a),
    }
}

/// Parses `start:stop:step` or a comma-separated list.
fn values(spec: &str) -> Result<Vec<f64>> {
    if spec.contains(':') {
        parse_range(spec)
    } else {
        parse_list(spec)
    }
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load(d: &DataArgs) -> Result<Dataset> {
    let text = read(&d.scenarios)?;
    let y = match Format::from_path(&d.scenarios)? {
        Format::Json => parse_scenarios_json(&text)?,
        Format::Csv => parse_scenarios_csv(&text)?,
    };
    let cs = serde_json::from_str(&read(&d.constraints)?)?;
    Dataset::new(y, cs)
}

fn gen(a: &GenArgs) -> Result<()> {
    let profiles: Vec<AssetProfile> = match &a.profiles {
        Some(p) => serde_json::from_str(&read(p)?)?,
        None => default_profiles(a.assets),
    };
    let (y, cs) = generate::<f64>(&profiles, a.scenarios, a.seed)?;
    out_dir(&a.out)?;
    let (name, fmt) = match a.format {
        FileFormat::Json => ("scenarios.json", Format::Json),
        FileFormat::Csv => ("scenarios.csv", Format::Csv),
    };
    save_scenarios(&y, &a.out.join(name), fmt)?;
    write_json(&a.out.join("constraints.json"), &cs)?;
    println!(
        "wrote {} and constraints.json to {}: N={} assets, S={} scenarios, seed {}",
        name,
        a.out.display(),
        y.n_assets(),
        y.n_scenarios(),
        a.seed
    );
    Ok(())
}

fn frontier(a: &FrontierArgs) -> Result<()> {
    let mut data = load(&a.data)?;
    if a.data.uncap {
        data = data.uncapped();
    }
    let cfg = a.problem.config(a.data.budget);
    let f = run_frontier(&cfg, &data, &values(&a.a)?)?;
    let out = &a.output.out;
    out_dir(out)?;
    fs::write(out.join("frontier.csv"), f.to_csv())?;
    write_json(&out.join("frontier.json"), &f)?;
    for v in &f.monotonicity_violations {
        eprintln!("warning: {v}");
    }
    if a.output.plot {
        let pts: Vec<(f64, f64)> = f.points.iter().map(|p| (p.risk, p.gain)).collect();
        let plot = svg::LinePlot {
            title: "Efficient frontier".into(),
            x_label: "risk".into(),
            y_label: "expected gain".into(),
            series: vec![svg::Series::markers("frontier", svg::BLACK, pts)],
            vlines: Vec::new(),
        };
        fs::write(out.join("frontier.svg"), plot.render())?;
    }
    println!("{} frontier points written to {}", f.points.len(), out.display());
    Ok(())
}

fn read_portfolio(path: &Path) -> Result<Portfolio<f64>> {
    let v: serde_json::Value = serde_json::from_str(&read(path)?)?;
    let w = match v.get("weights").or_else(|| v.get("matched")).unwrap_or(&v) {
        serde_json::Value::Array(items) => items
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| Error::Parse("portfolio weights must be numbers".into())))
            .collect::<Result<Vec<f64>>>()?,
        _ => return Err(Error::Parse(format!("{} holds no weight list", path.display()))),
    };
    Portfolio::new(w)
}

fn match_cmd(a: &MatchArgs) -> Result<()> {
    let data = load(&a.data)?;
    let cfg = a.problem.config(a.data.budget);
    // The start is the capped optimum even when the match drops the caps.
    let initial = match &a.init {
        Some(p) => read_portfolio(p)?,
        None => solve_point(&cfg, &data, a.a)?.portfolio,
    };
    if initial.len() != data.scenarios.n_assets() {
        return Err(Error::Dimension(format!(
            "start portfolio has {} weights for {} assets",
            initial.len(),
            data.scenarios.n_assets()
        )));
    }
    let matching = if a.data.uncap { data.uncapped() } else { data };
    let spec;
    let d = BoostConfig::default();
    let boost = BoostConfig {
        from: a.boost_from.clone().unwrap_or(d.from),
        gamma: a.gamma.unwrap_or(d.gamma),
        width: a.width,
        theta_center: a.theta_center.clone(),
    };
    let target = match &a.target {
        Some(p) => {
            spec = serde_json::from_str::<TargetSpec<f64>>(&read(p)?)?;
            MatchTarget::Spec(&spec)
        }
        None => MatchTarget::Boost(&boost),
    };
    let pdf = a.pdf.config();
    let solver = a.problem.solver.options();
    let outcome = run_match(&cfg, &pdf, &solver, &matching, a.a, &initial, target)?;

    let out = &a.output.out;
    out_dir(out)?;
    write_json(&out.join("portfolio.json"), &outcome.portfolio_artifact())?;
    let report = outcome.report_artifact();
    write_json(&out.join("report.json"), &report)?;
    write_json(&out.join("target.json"), &outcome.target)?;
    fs::write(out.join("pdfs.csv"), outcome.pdfs_csv()?)?;
    if a.output.plot {
        fs::write(out.join("match.svg"), svg::match_plot(&outcome)?)?;
        fs::write(out.join("portfolio.svg"), svg::portfolio_bars(&outcome.portfolio_artifact()))?;
    }
    print_match(&report);
    Ok(())
}

fn print_match(r: &MatchReport) {
    let reduction = if r.initial_discrepancy > 0.0 {
        100.0 * (1.0 - r.discrepancy / r.initial_discrepancy)
    } else {
        0.0
    };
    println!(
        "D {:.6e} -> {:.6e} ({reduction:.1}% reduction), F_a {:.6e} -> {:.6e}, {} iterations ({:?})",
        r.initial_discrepancy,
        r.discrepancy,
        r.initial_objective,
        r.matched_objective,
        r.solve.iterations,
        r.solve.termination
    );
}

fn marginal(a: &MarginalArgs) -> Result<()> {
    let mut data = load(&a.data)?;
    if a.data.uncap {
        data = data.uncapped();
    }
    let cfg = a.problem.config(a.data.budget);
    let target_objective = match (&a.from_report, a.target_objective) {
        (Some(p), _) => {
            let r: MatchReport = serde_json::from_str(&read(p)?)?;
            Some(r.matched_objective)
        }
        (None, t) => t,
    };
    if target_objective.is_none() && a.delta_a.is_none() {
        return Err(Error::Invalid(
            "give --target-objective, --from-report or --delta-a".into(),
        ));
    }
    let d = SweepOptions::default();
    let req = MarginalRequest {
        a: a.a,
        target_objective,
        delta_a: a.delta_a,
        sweep: SweepOptions {
            points: a.sweep_points.unwrap_or(d.points),
            rel_span: a.rel_span.unwrap_or(d.rel_span),
            ..d
        },
        fd: Default::default(),
    };
    let r = run_marginal(&cfg, &data, &req)?;
    out_dir(&a.out)?;
    write_json(&a.out.join("marginal.json"), &r)?;
    match r.bracket {
        Some([lo, hi]) => println!("delta_B = {:.6e} (bracket [{lo:.4e}, {hi:.4e}])", r.delta_b),
        None => println!("delta_B = {:.6e}", r.delta_b),
    }
    if let Some(res) = r.relative_residual {
        println!("relative residual {res:.3e}");
    }
    Ok(())
}

fn landscape_cmd(a: &LandscapeArgs) -> Result<()> {
    let mut data = load(&a.data)?;
    if a.data.uncap {
        data = data.uncapped();
    }
    let cfg = a.problem.config(a.data.budget);
    let grid = run_landscape(&cfg, &data, &values(&a.b_values)?, &values(&a.a_values)?)?;
    let iso = landscape_iso(&cfg, &data, &grid, a.iso_level, a.iso_a)?;
    let out = &a.output.out;
    out_dir(out)?;
    fs::write(out.join("landscape.csv"), grid.to_csv())?;
    write_json(&out.join("landscape.json"), &grid)?;
    write_json(&out.join("iso.json"), &iso)?;
    if a.output.plot {
        fs::write(out.join("landscape.svg"), svg::landscape_heatmap(&grid, &iso))?;
    }
    let failed = grid.cells.iter().flatten().filter(|c| c.error.is_some()).count();
    println!(
        "{}x{} landscape written to {} ({failed} cells failed); iso-line at F = {:.6e} has {} points",
        grid.b_values.len(),
        grid.a_values.len(),
        out.display(),
        iso.level,
        iso.points.len()
    );
    Ok(())
}

fn serve(a: &ServeArgs) -> Result<()> {
    let addr: std::net::SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| Error::Invalid(format!("bad listen address: {e}")))?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    println!("listening on http://{addr}");
    rt.block_on(gainpdf_service::serve(addr, a.cors_origin.as_deref()))?;
    Ok(())
}
