//! Rolling-horizon driver: iterate investment periods, build and solve each
//! foresight window, commit only the first period's decisions, evolve the
//! capacity stock, and assemble the transition result.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lp_build::{
    build_window_lp, cap_col, co2cap_row, dis_col, emission_coefficient, imp_col, op_col,
    resid_col, vent_col,
};
use crate::model::{
    annuity_factor, retire, retire_and_seed_stock, CapacityStock, Disposal, Model, Vintage,
};
use crate::simplex::{shadow_price, solve, LpSolution, SolveStatus, Tolerances};
use crate::timeagg::{aggregate, TypicalPeriodSet};
use crate::{Error, Result};

/// Everything committed and accounted for one investment year.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct YearResult {
    pub year: i32,
    /// process -> committed new capacity, unit/h.
    pub new_capacity: BTreeMap<String, f64>,
    /// process -> per (period, step) operation, period-major, unit/h.
    /// Storage processes report their discharge.
    pub operation: BTreeMap<String, Vec<f64>>,
    /// product -> per (period, step) imports, unit/h.
    pub imports: BTreeMap<String, Vec<f64>>,
    /// sector tag -> Mt CO2-eq of accounted operating emissions.
    pub emissions_by_sector: BTreeMap<String, f64>,
    /// Mt CO2-eq bought out of the cap at the residual penalty.
    pub residual_mt: f64,
    /// k€/t CO2-eq: shadow price of this year's emissions cap.
    pub co2_price: f64,
    /// k€/yr: annualized capital plus operating cost of the committed system
    /// (endogenous builds only; the inherited base stock is sunk).
    pub total_cost: f64,
    /// product -> process -> annual output (product units/yr).
    pub production: BTreeMap<String, BTreeMap<String, f64>>,
    /// Surviving stock after retirement and this year's commitment.
    pub stock_after: CapacityStock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathwayResult {
    pub years: Vec<YearResult>,
    pub tps: TypicalPeriodSet,
    /// Stock fixed at base-year instantiation, before the first window.
    pub base_stock: CapacityStock,
}

impl PathwayResult {
    pub fn year(&self, year: i32) -> Result<&YearResult> {
        self.years
            .iter()
            .find(|y| y.year == year)
            .ok_or_else(|| Error::InvalidArgument(format!("year {year} was not solved")))
    }
}

/// Builds the typical-period set the whole pathway shares. Models without
/// any hourly series collapse to a single weighted step.
pub fn pathway_tps(model: &Model) -> Result<TypicalPeriodSet> {
    let referenced = model.referenced_series();
    if referenced.is_empty() {
        return Ok(TypicalPeriodSet::single_step(model.scenario.seed));
    }
    let series: BTreeMap<String, Vec<f64>> = referenced
        .iter()
        .filter_map(|id| model.profiles.get(id).map(|v| (id.clone(), v.clone())))
        .collect();
    if series.len() != referenced.len() {
        return Err(Error::InvalidArgument(
            "model references hourly series that are missing from profiles".into(),
        ));
    }
    aggregate(
        &series,
        model.scenario.typical_periods,
        model.scenario.hours_per_typical_period,
        model.scenario.seed,
    )
}

fn infeasibility_detail(sol: &LpSolution) -> String {
    let mut detail = sol.diagnostics.clone();
    if let Some(ray) = &sol.dual_ray {
        let mut top: Vec<(usize, f64)> = ray
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| v.abs() > 1e-9)
            .collect();
        top.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        let rows: Vec<String> = top
            .iter()
            .take(8)
            .map(|(i, v)| format!("{}={v:.3e}", sol.row_names[*i]))
            .collect();
        detail = format!("{detail}; certificate rows: {}", rows.join(", "));
    }
    detail
}

pub fn run_pathway(model: &Model) -> Result<PathwayResult> {
    let violations = crate::model::validate_model(model);
    if !violations.is_empty() {
        return Err(Error::InvalidModel {
            count: violations.len(),
        });
    }
    let tps = pathway_tps(model)?;
    let tol = Tolerances::default();
    let years = &model.scenario.investment_years;
    let foresight = model.scenario.foresight_periods.max(1);

    // Base-year instantiation: fix pre-existing stock without optimization.
    let base_stock = retire_and_seed_stock(
        &CapacityStock::default(),
        model,
        model.scenario.base_year,
    );

    let mut stock = base_stock.clone();
    let mut committed: Vec<Vintage> = Vec::new();
    let mut results: Vec<YearResult> = Vec::new();

    for (i, &year) in years.iter().enumerate() {
        stock = retire(&stock, &model.processes, year);
        let window = &years[i..(i + foresight).min(years.len())];
        let caps: BTreeMap<i32, f64> = window
            .iter()
            .map(|y| {
                let cap = model
                    .emissions_schedule
                    .cap_tonnes(*y)
                    .unwrap_or(f64::INFINITY);
                (*y, cap)
            })
            .collect();
        let lp = build_window_lp(model, &stock, window, &tps, &caps)?;
        let sol = solve(&lp, &tol)?;
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => {
                return Err(Error::InfeasibleWindow {
                    window_start: year,
                    detail: infeasibility_detail(&sol),
                })
            }
            other => {
                return Err(Error::Solver(format!(
                    "window starting {year} ended {other:?}: {}",
                    sol.diagnostics
                )))
            }
        }

        // Commit first-period capacities; later window years are discarded.
        let mut new_capacity = BTreeMap::new();
        for pid in model.processes.keys() {
            let built = sol.value_of(&cap_col(pid, year))?.max(0.0);
            let built = if built < 1e-9 { 0.0 } else { built };
            new_capacity.insert(pid.clone(), built);
            if built > 0.0 {
                stock.add(pid, year, built);
                committed.push(Vintage {
                    process: pid.clone(),
                    build_year: year,
                    capacity: built,
                });
            }
        }

        // First-period operation, imports, accounting.
        let mut operation: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut production: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        let mut emissions_by_sector: BTreeMap<String, f64> = BTreeMap::new();
        let mut var_cost = 0.0;
        for (pid, proc) in &model.processes {
            let mut levels = Vec::with_capacity(tps.n_steps());
            let mut annual_out = 0.0;
            for (p, s, w) in tps.steps() {
                let col = if proc.is_storage() {
                    dis_col(pid, year, p, s)
                } else {
                    op_col(pid, year, p, s)
                };
                let v = sol.value_of(&col)?.max(0.0);
                levels.push(v);
                annual_out += v * w;
            }
            operation.insert(pid.clone(), levels.clone());
            if proc.is_storage() {
                continue;
            }
            var_cost += proc.opex_var_at(year) * annual_out;
            let e = emission_coefficient(model, proc, year)?;
            if e != 0.0 && annual_out > 0.0 {
                let sector = proc
                    .sector
                    .clone()
                    .or_else(|| {
                        model
                            .products
                            .get(&proc.reference_product)
                            .and_then(|pr| pr.sector.clone())
                    })
                    .unwrap_or_else(|| "other".to_string());
                *emissions_by_sector.entry(sector).or_insert(0.0) += e * annual_out / 1e6;
            }
            for (product_id, flow) in proc.flows_at(year) {
                if flow > 0.0 {
                    let out = annual_out * flow;
                    if out > 1e-9 {
                        *production
                            .entry(product_id)
                            .or_default()
                            .entry(pid.clone())
                            .or_insert(0.0) += out;
                    }
                }
            }
        }

        let mut imports: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (prid, product) in &model.products {
            let price = match model.import_price(product) {
                Some(p) => p,
                None => continue,
            };
            let mut levels = Vec::with_capacity(tps.n_steps());
            let mut annual = 0.0;
            for (p, s, w) in tps.steps() {
                let v = sol.value_of(&imp_col(prid, year, p, s))?.max(0.0);
                levels.push(v);
                annual += v * w;
            }
            if annual > 1e-9 {
                var_cost += price * annual;
                if let Some(e) = product.import_emissions {
                    let sector = product.sector.clone().unwrap_or_else(|| "imports".into());
                    *emissions_by_sector.entry(sector).or_insert(0.0) += e * annual / 1e6;
                }
                *production
                    .entry(prid.clone())
                    .or_default()
                    .entry("import".to_string())
                    .or_insert(0.0) += annual;
            }
            imports.insert(prid.clone(), levels);
        }

        // Vented surplus counted as emissions of the product's sector.
        for (prid, product) in &model.products {
            if product.disposal != Disposal::VentCo2 {
                continue;
            }
            let mut annual = 0.0;
            for (p, s, w) in tps.steps() {
                annual += sol.value_of(&vent_col(prid, year, p, s))?.max(0.0) * w;
            }
            if annual > 1e-9 {
                let sector = product.sector.clone().unwrap_or_else(|| "other".into());
                *emissions_by_sector.entry(sector).or_insert(0.0) += annual / 1e6;
            }
        }

        let residual_t = if model.emissions_schedule.residual_penalty.is_finite() {
            sol.value_of(&resid_col(year))?.max(0.0)
        } else {
            0.0
        };
        let co2_price = if lp.row_index(&co2cap_row(year)).is_some() {
            shadow_price(&sol, &co2cap_row(year))?
        } else {
            0.0
        };

        let annuity = annuity_factor(model.scenario.interest_rate, model.scenario.annuity_years)?;
        let mut fixed_cost = 0.0;
        for v in &committed {
            let proc = model.process(&v.process)?;
            if year - v.build_year < proc.lifetime {
                fixed_cost += (annuity * proc.capex_at(v.build_year)
                    + proc.opex_fixed_annual(v.build_year))
                    * v.capacity;
            }
        }
        // Skip the product when no residual was bought: 0 × ∞ is NaN.
        let residual_cost = if residual_t > 0.0 {
            residual_t * model.emissions_schedule.residual_penalty
        } else {
            0.0
        };
        let total_cost = fixed_cost + var_cost + residual_cost;

        results.push(YearResult {
            year,
            new_capacity,
            operation,
            imports,
            emissions_by_sector,
            residual_mt: residual_t / 1e6,
            co2_price,
            total_cost,
            production,
            stock_after: stock.clone(),
        });
    }

    Ok(PathwayResult {
        years: results,
        tps,
        base_stock,
    })
}

/// Accounted operating emissions by sector tag, Mt CO2-eq.
pub fn sector_emissions(result: &PathwayResult, year: i32) -> Result<BTreeMap<String, f64>> {
    Ok(result.year(year)?.emissions_by_sector.clone())
}

/// Share of each producing process in a product's annual output; shares sum
/// to 1 where the product is produced at all.
pub fn production_mix(
    result: &PathwayResult,
    product: &str,
    year: i32,
) -> Result<BTreeMap<String, f64>> {
    let yr = result.year(year)?;
    let by_proc = match yr.production.get(product) {
        Some(m) => m,
        None => return Ok(BTreeMap::new()),
    };
    let total: f64 = by_proc.values().sum();
    if total <= 0.0 {
        return Ok(BTreeMap::new());
    }
    Ok(by_proc
        .iter()
        .map(|(k, v)| (k.clone(), v / total))
        .collect())
}

/// First investment year in which processes carrying `tag` supply at least
/// `min_share` of the product's output; `None` if that never happens.
pub fn first_year_with_tagged_share(
    result: &PathwayResult,
    model: &Model,
    product: &str,
    tag: &str,
    min_share: f64,
) -> Result<Option<i32>> {
    for yr in &result.years {
        let mix = production_mix(result, product, yr.year)?;
        let tagged: f64 = mix
            .iter()
            .filter(|(pid, _)| {
                model
                    .processes
                    .get(*pid)
                    .map(|p| p.has_tag(tag))
                    .unwrap_or(false)
            })
            .map(|(_, share)| share)
            .sum();
        if tagged >= min_share {
            return Ok(Some(yr.year));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::tiny_model;
    use crate::model::{DemandSpec, YearSeries};

    /// tiny_model without the fossil tag, so the base stock starts empty and
    /// all capacity is endogenous.
    fn greenfield_model() -> Model {
        let mut model = tiny_model();
        model
            .processes
            .get_mut("widget_fossil")
            .unwrap()
            .tags
            .clear();
        model
    }

    #[test]
    fn single_process_builds_once_and_never_rebuilds() {
        let model = greenfield_model();
        let result = run_pathway(&model).unwrap();
        assert_eq!(result.years.len(), 6);
        let first = &result.years[0];
        assert!((first.new_capacity["widget_fossil"] - 1.0).abs() < 1e-7);
        for yr in &result.years[1..] {
            assert!(
                yr.new_capacity["widget_fossil"].abs() < 1e-7,
                "rebuilt in {}",
                yr.year
            );
        }
        // Demand served every year.
        for yr in &result.years {
            let mix = production_mix(&result, "widget", yr.year).unwrap();
            assert!((mix["widget_fossil"] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn seeded_fossil_stock_defers_building() {
        // With the fossil tag, the base stock covers demand; nothing is
        // built until vintages retire.
        let model = tiny_model();
        let result = run_pathway(&model).unwrap();
        let first = &result.years[0];
        assert!(first.new_capacity["widget_fossil"].abs() < 1e-7);
        // The base stock erodes over the horizon.
        let base_total = result.base_stock.total_capacity("widget_fossil");
        let final_surviving: f64 = result
            .years
            .last()
            .unwrap()
            .stock_after
            .vintages
            .iter()
            .filter(|v| v.build_year <= model.scenario.base_year)
            .map(|v| v.capacity)
            .sum();
        assert!(final_surviving < base_total);
    }

    #[test]
    fn stock_conservation_across_periods() {
        let mut model = tiny_model();
        // Shorter lifetime so retirements actually occur in the horizon.
        model.processes.get_mut("widget_fossil").unwrap().lifetime = 15;
        let result = run_pathway(&model).unwrap();
        let mut prev = retire(
            &result.base_stock,
            &model.processes,
            model.scenario.investment_years[0],
        );
        for yr in &result.years {
            let mut expected = retire(&prev, &model.processes, yr.year);
            for (pid, cap) in &yr.new_capacity {
                expected.add(pid, yr.year, *cap);
            }
            assert_eq!(expected, yr.stock_after, "stock mismatch in {}", yr.year);
            prev = yr.stock_after.clone();
        }
    }

    #[test]
    fn full_foresight_no_costlier_than_myopic() {
        // Clean process becomes mandatory by a zero final cap: seeing it
        // coming cannot make the plan worse.
        let mut model = tiny_model();
        let dirty = model.processes.get_mut("widget_fossil").unwrap();
        dirty.tags.clear();
        dirty.opex_var = YearSeries::constant(0.1);
        let mut clean = model.processes["widget_fossil"].clone();
        clean.id = "widget_clean".into();
        clean.capex = YearSeries::constant(300.0);
        clean.opex_var = YearSeries::constant(0.3);
        clean.direct_emissions = YearSeries::constant(0.0);
        model.processes.insert("widget_clean".into(), clean);
        model.emissions_schedule.caps =
            [(2020, 1.0), (2025, 1.0), (2030, 1.0), (2035, 1.0), (2040, 0.0), (2045, 0.0)]
                .into_iter()
                .collect();
        model.emissions_schedule.residual_penalty = 10.0;

        let mut farsighted = model.clone();
        farsighted.scenario.foresight_periods = 6;
        let mut myopic = model.clone();
        myopic.scenario.foresight_periods = 1;

        let far_cost: f64 = run_pathway(&farsighted)
            .unwrap()
            .years
            .iter()
            .map(|y| y.total_cost)
            .sum();
        let myo_cost: f64 = run_pathway(&myopic)
            .unwrap()
            .years
            .iter()
            .map(|y| y.total_cost)
            .sum();
        assert!(
            far_cost <= myo_cost + 1e-6 * (1.0 + myo_cost.abs()),
            "foresight {far_cost} vs myopic {myo_cost}"
        );
    }

    #[test]
    fn emissions_accounting_matches_direct_product() {
        // Single dirty process at demand d with coefficient e: annual
        // emissions = d * e * 8760.
        let mut model = greenfield_model();
        model.demands.insert("widget".into(), DemandSpec::Constant(2.0));
        let result = run_pathway(&model).unwrap();
        let em = sector_emissions(&result, 2020).unwrap();
        let expected = 2.0 * 1.0 * 8760.0 / 1e6;
        assert!((em["chemicals"] - expected).abs() < 1e-9);
        assert!(sector_emissions(&result, 1999).is_err());
    }

    #[test]
    fn rerun_is_bit_identical() {
        let model = tiny_model();
        let a = serde_json::to_string(&run_pathway(&model).unwrap()).unwrap();
        let b = serde_json::to_string(&run_pathway(&model).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_model_is_rejected_before_solving() {
        let mut model = tiny_model();
        model
            .demands
            .insert("ghost".into(), DemandSpec::Constant(1.0));
        match run_pathway(&model) {
            Err(Error::InvalidModel { count }) => assert!(count >= 1),
            other => panic!("expected InvalidModel, got {other:?}"),
        }
    }
}
