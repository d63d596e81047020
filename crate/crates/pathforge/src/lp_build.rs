//! Translates (model, capacity stock, foresight window, typical periods,
//! emission caps) into a named sparse linear program.
//!
//! Naming scheme (used by the pathway driver to read solutions back):
//!   columns  cap:{proc}:{year}             new capacity, unit/h
//!            op:{proc}:{year}:{p}:{s}      operation, unit/h
//!            chg:/dis:/soc:{proc}:{y}:{p}:{s}  storage charge/discharge/state
//!            imp:{product}:{year}:{p}:{s}  imports, unit/h
//!            vent:{product}:{year}:{p}:{s} disposal of surplus, unit/h
//!            resid:{year}                  residual emissions, tonne
//!   rows     bal:{product}:{year}:{p}:{s}  product balance (=)
//!            lim:{proc}:{year}:{p}:{s}     capacity limit (<=)
//!            soc:{proc}:{year}:{p}:{s}     cyclic state-of-charge (=)
//!            elim:{proc}:{year}:{p}:{s}    stored-energy limit (<=)
//!            co2cap:{year}                 annual operating emissions (<=)

use std::collections::BTreeMap;

use crate::lp::{LinearProgram, Sense};
use crate::model::{
    annuity_factor, use_phase_emissions, CapacityStock, DemandSpec, Disposal, Model, ProcessSpec,
    Unit,
};
use crate::timeagg::TypicalPeriodSet;
use crate::{Error, Result};

pub fn cap_col(proc: &str, year: i32) -> String {
    format!("cap:{proc}:{year}")
}
pub fn op_col(proc: &str, year: i32, p: usize, s: usize) -> String {
    format!("op:{proc}:{year}:{p}:{s}")
}
pub fn chg_col(proc: &str, year: i32, p: usize, s: usize) -> String {
    format!("chg:{proc}:{year}:{p}:{s}")
}
pub fn dis_col(proc: &str, year: i32, p: usize, s: usize) -> String {
    format!("dis:{proc}:{year}:{p}:{s}")
}
pub fn soc_col(proc: &str, year: i32, p: usize, s: usize) -> String {
    format!("soc:{proc}:{year}:{p}:{s}")
}
pub fn imp_col(product: &str, year: i32, p: usize, s: usize) -> String {
    format!("imp:{product}:{year}:{p}:{s}")
}
pub fn vent_col(product: &str, year: i32, p: usize, s: usize) -> String {
    format!("vent:{product}:{year}:{p}:{s}")
}
pub fn resid_col(year: i32) -> String {
    format!("resid:{year}")
}
pub fn bal_row(product: &str, year: i32, p: usize, s: usize) -> String {
    format!("bal:{product}:{year}:{p}:{s}")
}
pub fn lim_row(proc: &str, year: i32, p: usize, s: usize) -> String {
    format!("lim:{proc}:{year}:{p}:{s}")
}
pub fn co2cap_row(year: i32) -> String {
    format!("co2cap:{year}")
}

/// Operating-emissions coefficient in tonne CO2-eq per unit of output:
/// direct process emissions (atom-balance closure), plus signed captured-CO2
/// (100 bar) flows — inflows negative, outflows positive — plus use-phase
/// combustion of the reference product.
pub fn emission_coefficient(model: &Model, proc: &ProcessSpec, year: i32) -> Result<f64> {
    let mut coefficient = proc.direct_emissions_at(year);
    for (product_id, flow) in proc.flows_at(year) {
        let product = model.product(&product_id)?;
        if product.is_captured_co2() {
            coefficient += flow;
        }
    }
    let reference = model.product(&proc.reference_product)?;
    if reference.use_phase_combusts && reference.unit == Unit::Tonne {
        coefficient += use_phase_emissions(reference)?;
    }
    Ok(coefficient)
}

/// Hourly demand of a product at a typical step, in unit/h.
fn demand_at(model: &Model, tps: &TypicalPeriodSet, product: &str, p: usize, s: usize) -> Result<f64> {
    match model.demands.get(product) {
        None => Ok(0.0),
        Some(spec) => match spec {
            DemandSpec::Constant(v) => Ok(*v),
            DemandSpec::Annual(v) => Ok(*v / crate::model::HOURS_PER_YEAR as f64),
            DemandSpec::Series(id) => tps.try_value(id, p, s),
        },
    }
}

fn availability_at(
    proc: &ProcessSpec,
    tps: &TypicalPeriodSet,
    p: usize,
    s: usize,
) -> Result<f64> {
    match &proc.availability_series {
        None => Ok(1.0),
        Some(id) => tps.try_value(id, p, s),
    }
}

/// Builds the foresight-window LP. `caps` maps each window year to its
/// operating-emissions cap in tonnes; `stock` is the surviving capacity at
/// the window start.
pub fn build_window_lp(
    model: &Model,
    stock: &CapacityStock,
    window_years: &[i32],
    tps: &TypicalPeriodSet,
    caps: &BTreeMap<i32, f64>,
) -> Result<LinearProgram> {
    if window_years.is_empty() {
        return Err(Error::InvalidArgument("empty foresight window".into()));
    }
    for v in &stock.vintages {
        if !model.processes.contains_key(&v.process) {
            return Err(Error::InvalidArgument(format!(
                "stock references unknown process '{}'",
                v.process
            )));
        }
    }
    for y in window_years {
        if !caps.contains_key(y) {
            return Err(Error::InvalidArgument(format!(
                "no emissions cap for window year {y}"
            )));
        }
    }

    let annuity = annuity_factor(model.scenario.interest_rate, model.scenario.annuity_years)?;
    let spp = tps.steps_per_period;
    let mut lp = LinearProgram::new(&format!("window-{}", window_years[0]));

    // --- columns -----------------------------------------------------------

    // New capacity: one column per (process, window year). Processes not yet
    // available get a pinned zero column so the naming stays uniform. The
    // objective charges the annualized capex plus fixed opex once per window
    // year the vintage is alive within the window.
    for (pid, proc) in &model.processes {
        for (yi, &y) in window_years.iter().enumerate() {
            let alive_years = window_years[yi..]
                .iter()
                .filter(|&&y2| y2 - y < proc.lifetime)
                .count() as f64;
            let annual_cost = annuity * proc.capex_at(y) + proc.opex_fixed_annual(y);
            let upper = if y < proc.available_from { 0.0 } else { f64::INFINITY };
            let j = lp.add_column(&cap_col(pid, y), 0.0, upper, alive_years * annual_cost);
            lp.tag(&lp.columns[j].name.clone(), "capacity");
        }
    }

    // Operation / storage columns.
    for (pid, proc) in &model.processes {
        for &y in window_years {
            for (p, s, w) in tps.steps() {
                let weight = w as f64;
                if proc.is_storage() {
                    lp.add_column(&chg_col(pid, y, p, s), 0.0, f64::INFINITY, 0.0);
                    lp.add_column(&dis_col(pid, y, p, s), 0.0, f64::INFINITY, 0.0);
                    lp.add_column(&soc_col(pid, y, p, s), 0.0, f64::INFINITY, 0.0);
                } else {
                    lp.add_column(
                        &op_col(pid, y, p, s),
                        0.0,
                        f64::INFINITY,
                        proc.opex_var_at(y) * weight,
                    );
                }
            }
        }
    }

    // Imports, disposal, residual emissions.
    for (prid, product) in &model.products {
        for &y in window_years {
            for (p, s, w) in tps.steps() {
                let weight = w as f64;
                if let Some(price) = model.import_price(product) {
                    lp.add_column(&imp_col(prid, y, p, s), 0.0, f64::INFINITY, price * weight);
                }
                if product.disposal != Disposal::None {
                    lp.add_column(&vent_col(prid, y, p, s), 0.0, f64::INFINITY, 0.0);
                }
            }
        }
    }
    // A non-finite penalty disables the residual escape valve entirely,
    // turning the emission caps into hard constraints.
    if model.emissions_schedule.residual_penalty.is_finite() {
        for &y in window_years {
            lp.add_column(
                &resid_col(y),
                0.0,
                f64::INFINITY,
                model.emissions_schedule.residual_penalty,
            );
        }
    }

    // --- rows ---------------------------------------------------------------

    // Product balances: production + imports + discharge = demand + charge,
    // with an optional disposal outlet.
    for (prid, product) in &model.products {
        for &y in window_years {
            for (p, s, _) in tps.steps() {
                let mut coeffs: Vec<(usize, f64)> = Vec::new();
                for (pid, proc) in &model.processes {
                    if proc.is_storage() {
                        if proc.reference_product == *prid {
                            let chg = lp.column_index(&chg_col(pid, y, p, s)).unwrap();
                            let dis = lp.column_index(&dis_col(pid, y, p, s)).unwrap();
                            coeffs.push((chg, -1.0));
                            coeffs.push((dis, 1.0));
                        }
                        continue;
                    }
                    if let Some(flow) = proc.flows_at(y).get(prid) {
                        if *flow != 0.0 {
                            let op = lp.column_index(&op_col(pid, y, p, s)).unwrap();
                            coeffs.push((op, *flow));
                        }
                    }
                }
                if model.import_price(product).is_some() {
                    let imp = lp.column_index(&imp_col(prid, y, p, s)).unwrap();
                    coeffs.push((imp, 1.0));
                }
                if product.disposal != Disposal::None {
                    let vent = lp.column_index(&vent_col(prid, y, p, s)).unwrap();
                    coeffs.push((vent, -1.0));
                }
                let rhs = demand_at(model, tps, prid, p, s)?;
                if coeffs.is_empty() && rhs == 0.0 {
                    continue;
                }
                let name = bal_row(prid, y, p, s);
                lp.add_row(&name, coeffs, Sense::Eq, rhs);
                lp.tag(&name, if model.demands.contains_key(prid) { "demand" } else { "balance" });
            }
        }
    }

    // Capacity limits: operation <= availability * (stock + builds so far).
    for (pid, proc) in &model.processes {
        for (yi, &y) in window_years.iter().enumerate() {
            let surviving = stock.surviving_capacity(&model.processes, pid, y);
            for (p, s, _) in tps.steps() {
                let avail = availability_at(proc, tps, p, s)?;
                let mut push_limit = |col: String, suffix: &str, scale: f64| {
                    let j = lp.column_index(&col).unwrap();
                    let mut coeffs = vec![(j, 1.0)];
                    for &yb in &window_years[..=yi] {
                        if y - yb < proc.lifetime {
                            let capj = lp.column_index(&cap_col(pid, yb)).unwrap();
                            coeffs.push((capj, -avail * scale));
                        }
                    }
                    let name = format!("{}{}", suffix, lim_row(pid, y, p, s));
                    lp.add_row(&name, coeffs, Sense::Le, avail * scale * surviving);
                    lp.tag(&name, "capacity");
                };
                if let Some(st) = &proc.storage {
                    push_limit(chg_col(pid, y, p, s), "c", 1.0);
                    push_limit(dis_col(pid, y, p, s), "d", 1.0);
                    push_limit(soc_col(pid, y, p, s), "e", st.duration_hours);
                } else if proc.is_storage() {
                    return Err(Error::InvalidArgument(format!(
                        "process '{pid}' is tagged storage but has no storage parameters"
                    )));
                } else {
                    push_limit(op_col(pid, y, p, s), "", 1.0);
                }
            }
        }
    }

    // Cyclic state of charge within each typical period:
    // soc[s+1] - soc[s] = eta_c * chg[s] - dis[s] / eta_d.
    for (pid, proc) in &model.processes {
        let st = match &proc.storage {
            Some(st) => st,
            None => continue,
        };
        for &y in window_years {
            for p in 0..tps.n_periods {
                for s in 0..spp {
                    let s_next = (s + 1) % spp;
                    let soc_now = lp.column_index(&soc_col(pid, y, p, s)).unwrap();
                    let soc_next = lp.column_index(&soc_col(pid, y, p, s_next)).unwrap();
                    let chg = lp.column_index(&chg_col(pid, y, p, s)).unwrap();
                    let dis = lp.column_index(&dis_col(pid, y, p, s)).unwrap();
                    let name = format!("soc:{pid}:{y}:{p}:{s}");
                    lp.add_row(
                        &name,
                        vec![
                            (soc_next, 1.0),
                            (soc_now, -1.0),
                            (chg, -st.charge_efficiency),
                            (dis, 1.0 / st.discharge_efficiency),
                        ],
                        Sense::Eq,
                        0.0,
                    );
                    lp.tag(&name, "balance");
                }
            }
        }
    }

    // Annual operating-emissions caps; an infinite cap means no row.
    for &y in window_years {
        if caps[&y].is_infinite() {
            continue;
        }
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for (pid, proc) in &model.processes {
            if proc.is_storage() {
                continue;
            }
            let e = emission_coefficient(model, proc, y)?;
            if e == 0.0 {
                continue;
            }
            for (p, s, w) in tps.steps() {
                let j = lp.column_index(&op_col(pid, y, p, s)).unwrap();
                coeffs.push((j, e * w as f64));
            }
        }
        for (prid, product) in &model.products {
            if let Some(e) = product.import_emissions {
                if model.import_price(product).is_some() && e != 0.0 {
                    for (p, s, w) in tps.steps() {
                        let j = lp.column_index(&imp_col(prid, y, p, s)).unwrap();
                        coeffs.push((j, e * w as f64));
                    }
                }
            }
            if product.disposal == Disposal::VentCo2 {
                for (p, s, w) in tps.steps() {
                    let j = lp.column_index(&vent_col(prid, y, p, s)).unwrap();
                    coeffs.push((j, w as f64));
                }
            }
        }
        if let Some(resid) = lp.column_index(&resid_col(y)) {
            coeffs.push((resid, -1.0));
        }
        let name = co2cap_row(y);
        lp.add_row(&name, coeffs, Sense::Le, caps[&y]);
        lp.tag(&name, "emissions");
    }

    lp.validate()?;
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::tiny_model;
    use crate::model::{Product, YearSeries};
    use crate::simplex::{shadow_price, solve, SolveStatus, Tolerances};
    use crate::timeagg::TypicalPeriodSet;

    fn single_step_tps() -> TypicalPeriodSet {
        TypicalPeriodSet::single_step(0)
    }

    fn solve_window(
        model: &Model,
        stock: &CapacityStock,
        years: &[i32],
        caps: &BTreeMap<i32, f64>,
    ) -> crate::simplex::LpSolution {
        let tps = single_step_tps();
        let lp = build_window_lp(model, stock, years, &tps, caps).unwrap();
        solve(&lp, &Tolerances::default()).unwrap()
    }

    #[test]
    fn forced_build_meets_constant_demand() {
        // 1 product, 1 process, demand 1/h, empty stock, loose cap: optimum
        // builds exactly the demand and runs at it every step.
        let model = tiny_model();
        let caps = BTreeMap::from([(2020, f64::INFINITY)]);
        let sol = solve_window(&model, &CapacityStock::default(), &[2020], &caps);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.value_of("cap:widget_fossil:2020").unwrap() - 1.0).abs() < 1e-8);
        assert!((sol.value_of("op:widget_fossil:2020:0:0").unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cheap_dirty_vs_clean_splits_at_half_cap() {
        // Analytic 2-variable oracle: demand 10/h, dirty opex 1 and 1 t/unit,
        // clean opex 2 and 0 t/unit; cap at half the dirty-only tonnage forces
        // a 50/50 split; the cap dual is the opex spread.
        let mut model = tiny_model();
        model.demands.insert("widget".into(), DemandSpec::Constant(10.0));
        let dirty = model.processes.get_mut("widget_fossil").unwrap();
        dirty.opex_var = YearSeries::constant(1.0);
        dirty.direct_emissions = YearSeries::constant(1.0);
        dirty.capex = YearSeries::constant(0.0);
        let mut clean = model.processes["widget_fossil"].clone();
        clean.id = "widget_clean".into();
        clean.opex_var = YearSeries::constant(2.0);
        clean.direct_emissions = YearSeries::constant(0.0);
        clean.tags.clear();
        model.processes.insert("widget_clean".into(), clean);

        // dirty-only annual tonnage = 10 * 8760; cap at half of it
        let cap = 10.0 * 8760.0 / 2.0;
        let caps = BTreeMap::from([(2020, cap)]);
        let sol = solve_window(&model, &CapacityStock::default(), &[2020], &caps);
        assert_eq!(sol.status, SolveStatus::Optimal);
        let dirty_op = sol.value_of("op:widget_fossil:2020:0:0").unwrap();
        let clean_op = sol.value_of("op:widget_clean:2020:0:0").unwrap();
        assert!((dirty_op - 5.0).abs() < 1e-7, "dirty {dirty_op}");
        assert!((clean_op - 5.0).abs() < 1e-7, "clean {clean_op}");
        let price = shadow_price(&sol, "co2cap:2020").unwrap();
        assert!((price - 1.0).abs() < 1e-7, "price {price}");
    }

    #[test]
    fn uncovered_demand_is_infeasible() {
        let mut model = tiny_model();
        model.products.insert(
            "orphan".into(),
            Product {
                id: "orphan".into(),
                name: String::new(),
                unit: Unit::Tonne,
                carbon_mass_fraction: 0.0,
                use_phase_combusts: false,
                import_price: None,
                import_emissions: None,
                co2_pressure_bar: None,
                sector: None,
                disposal: Disposal::None,
                provenance: None,
            },
        );
        model.demands.insert("orphan".into(), DemandSpec::Constant(1.0));
        let caps = BTreeMap::from([(2020, f64::INFINITY)]);
        let tps = single_step_tps();
        let lp = build_window_lp(&model, &CapacityStock::default(), &[2020], &tps, &caps).unwrap();
        let sol = solve(&lp, &Tolerances::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn demand_scaling_scales_objective_linearly() {
        let model = tiny_model();
        let caps = BTreeMap::from([(2020, f64::INFINITY)]);
        let base = solve_window(&model, &CapacityStock::default(), &[2020], &caps);
        let mut scaled = tiny_model();
        scaled.demands.insert("widget".into(), DemandSpec::Constant(3.0));
        let tripled = solve_window(&scaled, &CapacityStock::default(), &[2020], &caps);
        assert!(
            (tripled.objective - 3.0 * base.objective).abs()
                < 1e-7 * (1.0 + base.objective.abs())
        );
    }

    #[test]
    fn emission_coefficient_signs() {
        // DAC-like: pulls CO2 from air (direct -0.96) and emits 1 t of
        // captured CO2, which leaves as a 100-bar product flow (+1).
        let mut model = tiny_model();
        model.products.insert(
            "co2_100bar".into(),
            Product {
                id: "co2_100bar".into(),
                name: String::new(),
                unit: Unit::Tonne,
                carbon_mass_fraction: 12.0 / 44.0,
                use_phase_combusts: false,
                import_price: None,
                import_emissions: None,
                co2_pressure_bar: Some(100.0),
                sector: None,
                disposal: Disposal::None,
                provenance: None,
            },
        );
        let mut dac = model.processes["widget_fossil"].clone();
        dac.id = "dac".into();
        dac.reference_product = "co2_100bar".into();
        dac.flows = BTreeMap::from([("co2_100bar".to_string(), 1.0)]);
        dac.direct_emissions = YearSeries::constant(-0.96);
        let coeff = emission_coefficient(&model, &dac, 2020).unwrap();
        // -0.96 uptake + 1.0 captured outflow: the stream nets positive until
        // a consumer takes the 100-bar CO2 back as a negative inflow.
        assert!((coeff - 0.04).abs() < 1e-12);

        // CCU consumer: 1.46 t CO2 inflow (-1.46), use-phase re-release of a
        // fully combusting reference product cancels against it.
        let mut meoh = model.products["widget"].clone();
        meoh.id = "methanol".into();
        meoh.carbon_mass_fraction = 12.0 / 32.0;
        meoh.use_phase_combusts = true;
        model.products.insert("methanol".into(), meoh);
        let mut ccu = model.processes["widget_fossil"].clone();
        ccu.id = "ccu".into();
        ccu.reference_product = "methanol".into();
        ccu.flows = BTreeMap::from([
            ("methanol".to_string(), 1.0),
            ("co2_100bar".to_string(), -1.46),
        ]);
        ccu.direct_emissions = YearSeries::constant(0.0);
        let coeff = emission_coefficient(&model, &ccu, 2020).unwrap();
        let use_phase = 12.0 / 32.0 * 44.0 / 12.0; // 1.375
        assert!((coeff - (use_phase - 1.46)).abs() < 1e-12);

        // No CO2 flows, no combustion, direct 0 -> 0.
        let mut inert = model.processes["widget_fossil"].clone();
        inert.direct_emissions = YearSeries::constant(0.0);
        assert_eq!(emission_coefficient(&model, &inert, 2020).unwrap(), 0.0);
    }

    #[test]
    fn availability_scales_capacity_need() {
        // A 50% availability profile forces 2 units of capacity per unit of
        // flat demand.
        let mut model = tiny_model();
        model
            .processes
            .get_mut("widget_fossil")
            .unwrap()
            .availability_series = Some("cf".into());
        let mut tps = TypicalPeriodSet::single_step(0);
        tps.values.insert("cf".into(), vec![0.5]);
        let caps = BTreeMap::from([(2020, f64::INFINITY)]);
        let lp = build_window_lp(&model, &CapacityStock::default(), &[2020], &tps, &caps).unwrap();
        let sol = solve(&lp, &Tolerances::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.value_of("cap:widget_fossil:2020").unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn residual_slack_keeps_tight_cap_feasible() {
        let model = tiny_model();
        let caps = BTreeMap::from([(2020, 0.0)]);
        let sol = solve_window(&model, &CapacityStock::default(), &[2020], &caps);
        assert_eq!(sol.status, SolveStatus::Optimal);
        // 1 unit/h at 1 t/unit: all 8760 t become residual
        assert!((sol.value_of("resid:2020").unwrap() - 8760.0).abs() < 1e-6);
    }

    #[test]
    fn storage_shifts_supply_into_gap_hours() {
        // Renewable available only in step 0; demand in both steps. Lossless
        // 2-hour storage bridges the gap.
        let mut model = tiny_model();
        model.processes.clear();
        model.demands.clear();
        model.products.insert(
            "electricity".into(),
            Product {
                id: "electricity".into(),
                name: String::new(),
                unit: Unit::MWh,
                carbon_mass_fraction: 0.0,
                use_phase_combusts: false,
                import_price: None,
                import_emissions: None,
                co2_pressure_bar: None,
                sector: Some("energy".into()),
                disposal: Disposal::Free,
                provenance: None,
            },
        );
        let mut wind = crate::dataset::tests::tiny_model().processes["widget_fossil"].clone();
        wind.id = "wind".into();
        wind.reference_product = "electricity".into();
        wind.flows = BTreeMap::from([("electricity".to_string(), 1.0)]);
        wind.direct_emissions = YearSeries::constant(0.0);
        wind.opex_var = YearSeries::constant(0.0);
        wind.capex = YearSeries::constant(10.0);
        wind.availability_series = Some("wind_cf".into());
        model.processes.insert("wind".into(), wind);
        let mut battery = crate::dataset::tests::tiny_model().processes["widget_fossil"].clone();
        battery.id = "battery".into();
        battery.reference_product = "electricity".into();
        battery.flows = BTreeMap::from([("electricity".to_string(), 1.0)]);
        battery.direct_emissions = YearSeries::constant(0.0);
        battery.capex = YearSeries::constant(1.0);
        battery.storage = Some(crate::model::StorageParams {
            charge_efficiency: 1.0,
            discharge_efficiency: 1.0,
            duration_hours: 2.0,
        });
        model.processes.insert("battery".into(), battery);
        model
            .demands
            .insert("electricity".into(), DemandSpec::Constant(1.0));

        let mut tps = TypicalPeriodSet::single_step(0);
        tps.steps_per_period = 2;
        tps.weights = vec![4380];
        tps.values.insert("wind_cf".into(), vec![1.0, 0.0]);
        tps.hour_map = (0..crate::model::HOURS_PER_YEAR)
            .map(|h| (0u16, (h % 2) as u16))
            .collect();

        let caps = BTreeMap::from([(2020, f64::INFINITY)]);
        let lp = build_window_lp(&model, &CapacityStock::default(), &[2020], &tps, &caps).unwrap();
        let sol = solve(&lp, &Tolerances::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "{}", sol.diagnostics);
        // Wind must produce 2 in step 0 (1 consumed, 1 charged) and the
        // battery discharges 1 in step 1.
        assert!((sol.value_of("op:wind:2020:0:0").unwrap() - 2.0).abs() < 1e-7);
        assert!((sol.value_of("dis:battery:2020:0:1").unwrap() - 1.0).abs() < 1e-7);
        assert!((sol.value_of("chg:battery:2020:0:0").unwrap() - 1.0).abs() < 1e-7);
    }
}
