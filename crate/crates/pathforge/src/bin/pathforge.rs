//! pathforge: transition pathways for a sector-coupled energy system with an
//! explicit chemical process network.
//!
//! Exit codes: 0 success, 2 validation failure, 3 infeasible window,
//! 4 IO/parse error.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pathforge::analytics::{
    annual_mixes, cost_avoided, cost_avoided_per_unit, curve_svg, load_duration,
    merit_order_curve, predict_dispatch, route_profile, utilization_rate, Mixes, Service,
};
use pathforge::dataset::{load_model, BASE_SCENARIO};
use pathforge::lp_build::{build_window_lp, cap_col};
use pathforge::manifest::RunManifest;
use pathforge::model::{retire, validate_model, CapacityStock, Model};
use pathforge::mps::export_mps;
use pathforge::pathway::{run_pathway, PathwayResult};
use pathforge::timeagg::{aggregate, reconstruction_error};
use pathforge::{Error, Result};

#[derive(Parser)]
#[command(name = "pathforge", version, about = "Cost-optimal transition pathways for chemicals + energy")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Path to the dataset's model.json
    #[arg(long, global = true, default_value = "datasets/desk/model.json")]
    dataset: PathBuf,
    /// Scenario name ("base" or a key under scenario_overrides)
    #[arg(long, global = true, default_value = BASE_SCENARIO)]
    scenario: String,
    /// Output root; results land in <out>/<scenario>/<command>/
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the scenario RNG seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dump each foresight window as fixed-format MPS next to the results
    #[arg(long, global = true, default_value_t = false)]
    dump_mps: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the dataset for structural problems
    Validate,
    /// Aggregate hourly profiles into weighted typical periods
    Aggregate {
        /// Number of typical periods
        #[arg(short = 'n', long, default_value_t = 6)]
        periods: usize,
        /// Hours per typical period
        #[arg(short = 'k', long, default_value_t = 6)]
        hours: usize,
    },
    /// Run the rolling-horizon transition pathway
    Pathway,
    /// Electrification analytics on a solved pathway
    Analyze {
        /// Investment year to analyze
        #[arg(long)]
        year: i32,
        /// Restrict merit-order output to one typical step "period,step"
        #[arg(long)]
        t: Option<String>,
        /// Path to result.json (defaults to this scenario's pathway output)
        #[arg(long)]
        result: Option<PathBuf>,
    },
    /// Export the first foresight window as fixed-format MPS
    ExportMps {
        /// Window start year (defaults to the first investment year)
        #[arg(long)]
        year: Option<i32>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Worker cap honored for forward compatibility; all current operations
    // are single-threaded by contract.
    let _threads: usize = std::env::var("PATHFORGE_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .map(|n: usize| n.max(1))
        .unwrap_or(1);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Parse(_) => 4,
        Error::InfeasibleWindow { .. } => 3,
        Error::InvalidModel { .. } | Error::InvalidArgument(_) | Error::UnresolvedProduct(_) => 2,
        Error::Solver(_) => 1,
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Validate => "validate",
        Command::Aggregate { .. } => "aggregate",
        Command::Pathway => "pathway",
        Command::Analyze { .. } => "analyze",
        Command::ExportMps { .. } => "export-mps",
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut model = load_model(&cli.global.dataset, &cli.global.scenario)?;
    if let Some(seed) = cli.global.seed {
        model.scenario.seed = seed;
    }
    let out_dir = cli
        .global
        .out
        .join(&cli.global.scenario)
        .join(command_name(&cli.command));
    std::fs::create_dir_all(&out_dir)?;

    match &cli.command {
        Command::Validate => cmd_validate(&model, &out_dir),
        Command::Aggregate { periods, hours } => {
            cmd_aggregate(&model, *periods, *hours, &out_dir)
        }
        Command::Pathway => cmd_pathway(cli, &model, &out_dir),
        Command::Analyze { year, t, result } => {
            let result_path = result.clone().unwrap_or_else(|| {
                cli.global
                    .out
                    .join(&cli.global.scenario)
                    .join("pathway/result.json")
            });
            cmd_analyze(&model, &result_path, *year, t.as_deref(), &out_dir)
        }
        Command::ExportMps { year } => cmd_export_mps(&model, *year, &out_dir),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

fn cmd_validate(model: &Model, out_dir: &Path) -> Result<()> {
    let violations = validate_model(model);
    let report = serde_json::to_string_pretty(&violations)?;
    write_file(&out_dir.join("report.json"), &(report + "\n"))?;
    if violations.is_empty() {
        println!("ok: model '{}' is well-formed", model.name);
        Ok(())
    } else {
        for v in &violations {
            println!("{}: {}", v.code, v.message);
        }
        Err(Error::InvalidModel {
            count: violations.len(),
        })
    }
}

// ---------------------------------------------------------------------------
// aggregate
// ---------------------------------------------------------------------------

fn cmd_aggregate(model: &Model, periods: usize, hours: usize, out_dir: &Path) -> Result<()> {
    let referenced = model.referenced_series();
    let series: BTreeMap<String, Vec<f64>> = referenced
        .iter()
        .filter_map(|id| model.profiles.get(id).map(|v| (id.clone(), v.clone())))
        .collect();
    if series.is_empty() {
        return Err(Error::InvalidArgument(
            "dataset references no hourly series; nothing to aggregate".into(),
        ));
    }
    let tps = aggregate(&series, periods, hours, model.scenario.seed)?;
    write_file(
        &out_dir.join("typical_periods.json"),
        &(serde_json::to_string_pretty(&tps)? + "\n"),
    )?;

    let mut csv = String::from("period,step,weight [h]");
    for id in tps.values.keys() {
        csv.push_str(&format!(",{id}"));
    }
    csv.push('\n');
    for (p, s, w) in tps.steps() {
        csv.push_str(&format!("{p},{s},{w}"));
        for vals in tps.values.values() {
            csv.push_str(&format!(",{}", vals[p * tps.steps_per_period + s]));
        }
        csv.push('\n');
    }
    write_file(&out_dir.join("typical_periods.csv"), &csv)?;

    let errors = reconstruction_error(&series, &tps);
    println!(
        "aggregated {} series into {} periods x {} h (seed {})",
        series.len(),
        tps.n_periods,
        tps.steps_per_period,
        tps.seed
    );
    for (id, err) in errors {
        println!("  {id}: normalized RMS reconstruction error {err:.4}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// pathway
// ---------------------------------------------------------------------------

fn cmd_pathway(cli: &Cli, model: &Model, out_dir: &Path) -> Result<()> {
    let manifest_args = [
        ("seed", model.scenario.seed.to_string()),
        ("dump_mps", cli.global.dump_mps.to_string()),
    ];
    let mut manifest = RunManifest::new(
        &cli.global.dataset,
        &cli.global.scenario,
        "pathway",
        model,
        &manifest_args,
    )?;

    let result = match run_pathway(model) {
        Ok(r) => r,
        Err(Error::InfeasibleWindow { window_start, detail }) => {
            let cert = serde_json::json!({
                "window_start": window_start,
                "detail": detail,
            });
            write_file(
                &out_dir.join("infeasibility_certificate.json"),
                &(serde_json::to_string_pretty(&cert)? + "\n"),
            )?;
            return Err(Error::InfeasibleWindow { window_start, detail });
        }
        Err(e) => return Err(e),
    };

    write_file(
        &out_dir.join("result.json"),
        &(serde_json::to_string(&result)? + "\n"),
    )?;

    // capacities.csv
    let mut csv = String::from(
        "year,process,new_capacity [unit/h],installed_capacity [unit/h]\n",
    );
    for yr in &result.years {
        for (pid, cap) in &yr.new_capacity {
            let installed = yr
                .stock_after
                .surviving_capacity(&model.processes, pid, yr.year);
            csv.push_str(&format!("{},{pid},{cap},{installed}\n", yr.year));
        }
    }
    write_file(&out_dir.join("capacities.csv"), &csv)?;

    // operation.csv
    let spp = result.tps.steps_per_period;
    let mut csv = String::from("year,process,period,step,weight [h],level [unit/h]\n");
    for yr in &result.years {
        for (pid, levels) in &yr.operation {
            for (p, s, w) in result.tps.steps() {
                csv.push_str(&format!(
                    "{},{pid},{p},{s},{w},{}\n",
                    yr.year,
                    levels[p * spp + s]
                ));
            }
        }
    }
    write_file(&out_dir.join("operation.csv"), &csv)?;

    // emissions.csv
    let mut csv = String::from("year,sector,emissions [Mt CO2-eq]\n");
    for yr in &result.years {
        for (sector, mt) in &yr.emissions_by_sector {
            csv.push_str(&format!("{},{sector},{mt}\n", yr.year));
        }
        csv.push_str(&format!("{},residual,{}\n", yr.year, yr.residual_mt));
    }
    write_file(&out_dir.join("emissions.csv"), &csv)?;

    // prices.csv
    let mut csv =
        String::from("year,co2_price [k€/t CO2-eq],residual [Mt CO2-eq],total_cost [k€/yr]\n");
    for yr in &result.years {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            yr.year, yr.co2_price, yr.residual_mt, yr.total_cost
        ));
    }
    write_file(&out_dir.join("prices.csv"), &csv)?;

    if cli.global.dump_mps {
        dump_window_mps(model, &result, out_dir)?;
        manifest.outputs.push("window_<year>.mps".into());
    }
    for name in [
        "result.json",
        "capacities.csv",
        "operation.csv",
        "emissions.csv",
        "prices.csv",
    ] {
        manifest.outputs.push(name.to_string());
    }
    manifest.write(&out_dir.join("manifest.json"))?;

    let last = result.years.last().unwrap();
    println!(
        "pathway solved: {} periods, final-year residual {:.4} Mt, final CO2 price {:.3} k€/t",
        result.years.len(),
        last.residual_mt,
        last.co2_price
    );
    Ok(())
}

/// Rebuilds each committed window's LP (first year only) and exports it.
fn dump_window_mps(model: &Model, result: &PathwayResult, out_dir: &Path) -> Result<()> {
    let years = &model.scenario.investment_years;
    let foresight = model.scenario.foresight_periods.max(1);
    for (i, yr) in result.years.iter().enumerate() {
        // Stock as the window saw it: its stock_after minus this year's
        // commits.
        let stock_before = CapacityStock {
            vintages: yr
                .stock_after
                .vintages
                .iter()
                .filter(|v| v.build_year != yr.year)
                .cloned()
                .collect(),
        };
        let window = &years[i..(i + foresight).min(years.len())];
        let caps: BTreeMap<i32, f64> = window
            .iter()
            .map(|y| {
                (
                    *y,
                    model
                        .emissions_schedule
                        .cap_tonnes(*y)
                        .unwrap_or(f64::INFINITY),
                )
            })
            .collect();
        let lp = build_window_lp(model, &stock_before, window, &result.tps, &caps)?;
        export_mps(&lp, &out_dir.join(format!("window_{}", yr.year)))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

fn load_result(path: &Path) -> Result<PathwayResult> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// The year's production mixes, extended with synthetic equal-share mixes
/// for products that nothing produced yet (so electrified supply chains can
/// be priced before they are built). When a product carries electrified
/// producers, the not-yet-built fallback prefers those.
fn mixes_with_fallback(model: &Model, mixes: &Mixes, year: i32) -> Mixes {
    let mut extended = mixes.clone();
    for (prid, _) in &model.products {
        if extended.contains_key(prid) {
            continue;
        }
        let producers: Vec<&String> = model
            .processes
            .iter()
            .filter(|(_, p)| p.reference_product == *prid && year >= p.available_from)
            .map(|(id, _)| id)
            .collect();
        let preferred: Vec<&String> = producers
            .iter()
            .copied()
            .filter(|id| model.processes[*id].has_tag("electrified"))
            .collect();
        let chosen = if preferred.is_empty() { producers } else { preferred };
        if chosen.is_empty() {
            continue;
        }
        let share = 1.0 / chosen.len() as f64;
        extended.insert(
            prid.clone(),
            chosen.into_iter().map(|id| (id.clone(), share)).collect(),
        );
    }
    extended
}

/// Products that have both a fossil and an electrified route, as
/// (product, fossil process, electrified process).
fn electrification_pairs(model: &Model) -> Vec<(String, String, String)> {
    let mut pairs = Vec::new();
    for (prid, _) in &model.products {
        let fossil = model
            .processes
            .iter()
            .find(|(_, p)| p.reference_product == *prid && p.has_tag("fossil"));
        let elec = model
            .processes
            .iter()
            .find(|(_, p)| p.reference_product == *prid && p.has_tag("electrified"));
        if let (Some((f, _)), Some((e, _))) = (fossil, elec) {
            pairs.push((prid.clone(), f.clone(), e.clone()));
        }
    }
    pairs
}

fn cmd_analyze(
    model: &Model,
    result_path: &Path,
    year: i32,
    t: Option<&str>,
    out_dir: &Path,
) -> Result<()> {
    let result = load_result(result_path)?;
    let yr = result.year(year)?;
    let mixes = mixes_with_fallback(model, &annual_mixes(&result, year)?, year);
    let co2_price = yr.co2_price;

    // Cost-Avoided table.
    let mut rows: Vec<(String, String, String, f64, f64, f64)> = Vec::new();
    let mut csv = String::from(
        "product,fossil_process,electrified_process,E [MWh/unit],delta_c [k€/MWh],delta_c_per_unit [k€/unit]\n",
    );
    for (prid, fossil_id, elec_id) in electrification_pairs(model) {
        let fossil = route_profile(model, &mixes, &fossil_id, year)?;
        let elec = route_profile(model, &mixes, &elec_id, year)?;
        if elec.electricity <= 0.0 {
            continue;
        }
        let dc = cost_avoided(&fossil, &elec, co2_price)?;
        let dc_unit = cost_avoided_per_unit(&fossil, &elec, co2_price);
        csv.push_str(&format!(
            "{prid},{fossil_id},{elec_id},{},{dc},{dc_unit}\n",
            elec.electricity
        ));
        rows.push((prid, fossil_id, elec_id, elec.electricity, dc, dc_unit));
    }
    write_file(&out_dir.join(format!("cost_avoided_{year}.csv")), &csv)?;

    // Merit-order curves, one per requested timestamp.
    let timestamps: Vec<(usize, usize)> = match t {
        Some(spec) => {
            let parts: Vec<&str> = spec.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::InvalidArgument(format!(
                    "--t must be 'period,step', got '{spec}'"
                )));
            }
            let p: usize = parts[0].trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("bad period in --t '{spec}'"))
            })?;
            let s: usize = parts[1].trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("bad step in --t '{spec}'"))
            })?;
            vec![(p, s)]
        }
        None => result.tps.steps().map(|(p, s, _)| (p, s)).collect(),
    };

    for (p, s) in timestamps {
        if p >= result.tps.n_periods || s >= result.tps.steps_per_period {
            return Err(Error::InvalidArgument(format!(
                "typical step ({p},{s}) out of range"
            )));
        }
        let mut services = Vec::new();
        for (prid, fossil_id, elec_id) in electrification_pairs(model) {
            let fossil = route_profile(model, &mixes, &fossil_id, year)?;
            let elec = route_profile(model, &mixes, &elec_id, year)?;
            if elec.electricity <= 0.0 {
                continue;
            }
            let capacity = yr
                .stock_after
                .surviving_capacity(&model.processes, &elec_id, year);
            let demand = match model.demands.get(&prid) {
                Some(spec) => match spec.constant_hourly() {
                    Some(v) => v,
                    None => match spec {
                        pathforge::model::DemandSpec::Series(id) => {
                            result.tps.try_value(id, p, s)?
                        }
                        _ => 0.0,
                    },
                },
                None => 0.0,
            };
            services.push(Service {
                id: prid,
                delta_c: cost_avoided(&fossil, &elec, co2_price)?,
                electricity_intensity: elec.electricity,
                capacity,
                demand,
            });
        }
        // Renewable supply at (p, s): tagged-renewable installed capacity
        // times availability.
        let mut renewable = 0.0;
        for (pid, proc) in &model.processes {
            if !proc.has_tag("renewable") {
                continue;
            }
            let installed = yr
                .stock_after
                .surviving_capacity(&model.processes, pid, year);
            let avail = match &proc.availability_series {
                Some(id) => result.tps.try_value(id, p, s)?,
                None => 1.0,
            };
            renewable += installed * avail;
        }
        let curve = merit_order_curve(&services, (p, s), renewable);
        let mut csv = String::from(
            "service,delta_c [k€/MWh],width [MWh/h],cumulative_start [MWh/h],predicted_electrified_fraction\n",
        );
        let dispatch = predict_dispatch(&curve, renewable)?;
        let frac: BTreeMap<&str, f64> =
            dispatch.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        for e in &curve.entries {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                e.service,
                e.delta_c,
                e.width,
                e.cumulative_start,
                frac[e.service.as_str()]
            ));
        }
        write_file(&out_dir.join(format!("merit_order_{year}_{p}_{s}.csv")), &csv)?;
        write_file(
            &out_dir.join(format!("merit_order_{year}_{p}_{s}.svg")),
            &curve_svg(&curve),
        )?;
    }

    // Load-duration table.
    let ld = load_duration(&result, model, year)?;
    let mut products: Vec<&String> = Vec::new();
    for row in &ld {
        for k in row.split.keys() {
            if !products.contains(&k) {
                products.push(k);
            }
        }
    }
    products.sort();
    let mut csv = String::from("rank,hour,excess_renewables [MWh/h]");
    for p in &products {
        csv.push_str(&format!(",{p}_electrified [unit/h],{p}_fossil [unit/h]"));
    }
    csv.push('\n');
    for (rank, row) in ld.iter().enumerate() {
        csv.push_str(&format!("{rank},{},{}", row.hour, row.excess_renewables));
        for p in &products {
            let (e, f) = row.split.get(*p).copied().unwrap_or((0.0, 0.0));
            csv.push_str(&format!(",{e},{f}"));
        }
        csv.push('\n');
    }
    write_file(&out_dir.join(format!("load_duration_{year}.csv")), &csv)?;

    // Utilization table.
    let mut csv = String::from("process,utilization [fraction]\n");
    for pid in model.processes.keys() {
        let u = utilization_rate(&result, model, pid, year)?;
        csv.push_str(&format!("{pid},{u}\n"));
    }
    write_file(&out_dir.join(format!("utilization_{year}.csv")), &csv)?;

    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "analyzed {year}: {} electrification pairs, CO2 price {:.3} k€/t",
        rows.len(),
        co2_price
    )
    .ok();
    for (prid, _, _, e, dc, dcu) in &rows {
        writeln!(
            stdout,
            "  {prid}: E {e:.2} MWh/unit, dC {dc:.4} k€/MWh ({dcu:.3} k€/unit)"
        )
        .ok();
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// export-mps
// ---------------------------------------------------------------------------

fn cmd_export_mps(model: &Model, year: Option<i32>, out_dir: &Path) -> Result<()> {
    let violations = validate_model(model);
    if !violations.is_empty() {
        return Err(Error::InvalidModel {
            count: violations.len(),
        });
    }
    let years = &model.scenario.investment_years;
    let start = year.unwrap_or_else(|| years[0]);
    let i = years
        .iter()
        .position(|y| *y == start)
        .ok_or_else(|| Error::InvalidArgument(format!("{start} is not an investment year")))?;
    let foresight = model.scenario.foresight_periods.max(1);
    let window = &years[i..(i + foresight).min(years.len())];

    let tps = pathforge::pathway::pathway_tps(model)?;
    let mut stock = pathforge::model::retire_and_seed_stock(
        &CapacityStock::default(),
        model,
        model.scenario.base_year,
    );
    stock = retire(&stock, &model.processes, start);
    let caps: BTreeMap<i32, f64> = window
        .iter()
        .map(|y| {
            (
                *y,
                model
                    .emissions_schedule
                    .cap_tonnes(*y)
                    .unwrap_or(f64::INFINITY),
            )
        })
        .collect();
    let lp = build_window_lp(model, &stock, window, &tps, &caps)?;
    let stem = out_dir.join(format!("window_{start}"));
    export_mps(&lp, &stem)?;
    // Sanity marker for downstream tooling: the first-year capacity columns
    // exist under their hashed names via the side-car map.
    let _ = cap_col("", start);
    println!(
        "exported {} ({} columns, {} rows)",
        stem.with_extension("mps").display(),
        lp.columns.len(),
        lp.rows.len()
    );
    Ok(())
}
