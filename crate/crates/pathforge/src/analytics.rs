//! Post-solution electrification analytics: supply-chain intensity rollup,
//! Cost-Avoided, merit-order curves with dispatch prediction, load-duration
//! and utilization reporting.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::lp_build::emission_coefficient;
use crate::model::{Model, HOURS_PER_YEAR};
use crate::pathway::PathwayResult;
use crate::{Error, Result};

/// Which per-unit quantity a rollup resolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// MWh of electricity consumed, directly or through inputs; the
    /// electricity product itself is pinned at 1.
    Electricity,
    /// k€ of operating cost (variable opex and import prices; no capital).
    Cost,
    /// tonne CO2-eq of operating emissions including use phase and signed
    /// captured-CO2 flows.
    Emissions,
}

/// product -> supplier -> share. Suppliers are process ids or the literal
/// "import"; shares per product sum to 1.
pub type Mixes = BTreeMap<String, BTreeMap<String, f64>>;

/// The solved year's aggregate annual production mix, the default supply
/// chain for rollups.
pub fn annual_mixes(result: &PathwayResult, year: i32) -> Result<Mixes> {
    let yr = result.year(year)?;
    let mut mixes = Mixes::new();
    for (product, by_proc) in &yr.production {
        let total: f64 = by_proc.values().sum();
        if total <= 0.0 {
            continue;
        }
        mixes.insert(
            product.clone(),
            by_proc.iter().map(|(k, v)| (k.clone(), v / total)).collect(),
        );
    }
    Ok(mixes)
}

pub fn import_burden(model: &Model, product_id: &str, quantity: Quantity) -> Result<f64> {
    let product = model.product(product_id)?;
    Ok(match quantity {
        Quantity::Electricity => 0.0,
        Quantity::Cost => model.import_price(product).unwrap_or(0.0),
        Quantity::Emissions => product.import_emissions.unwrap_or(0.0),
    })
}

pub fn direct_coefficient(model: &Model, proc_id: &str, year: i32, quantity: Quantity) -> Result<f64> {
    let proc = model.process(proc_id)?;
    Ok(match quantity {
        Quantity::Electricity => 0.0,
        Quantity::Cost => proc.opex_var_at(year),
        Quantity::Emissions => emission_coefficient(model, proc, year)?,
    })
}

/// Input flows of a process that carry upstream burden: negative flows,
/// as (product, magnitude). For the emissions quantity, captured-CO2 flows
/// are already inside the direct coefficient and are excluded here.
pub fn burdened_inputs(
    model: &Model,
    proc_id: &str,
    year: i32,
    quantity: Quantity,
) -> Result<Vec<(String, f64)>> {
    let proc = model.process(proc_id)?;
    let mut inputs = Vec::new();
    for (product_id, flow) in proc.flows_at(year) {
        if flow >= 0.0 {
            continue;
        }
        if quantity == Quantity::Emissions && model.product(&product_id)?.is_captured_co2() {
            continue;
        }
        inputs.push((product_id, -flow));
    }
    Ok(inputs)
}

/// Per-unit intensities of every product reachable from `roots`, solved as a
/// linear fixed point (cycles permitted):
///   intensity(p) = Σ_supplier share × [direct + Σ_inputs |flow| × intensity(q)]
/// with 100% allocation to reference products: a by-product supply share
/// contributes zero upstream burden.
pub fn rollup_intensities(
    model: &Model,
    mixes: &Mixes,
    roots: &[&str],
    year: i32,
    quantity: Quantity,
) -> Result<BTreeMap<String, f64>> {
    // Discover the involved product set.
    let mut involved: BTreeSet<String> = BTreeSet::new();
    let mut frontier: Vec<String> = roots.iter().map(|s| s.to_string()).collect();
    while let Some(p) = frontier.pop() {
        if !involved.insert(p.clone()) {
            continue;
        }
        if quantity == Quantity::Electricity && p == model.scenario.electricity_product {
            continue; // pinned, no upstream expansion
        }
        if let Some(suppliers) = mixes.get(&p) {
            for (supplier, _) in suppliers {
                if supplier == "import" {
                    continue;
                }
                let proc = model.process(supplier)?;
                if proc.reference_product != p {
                    continue; // by-product share: no upstream burden
                }
                for (q, _) in burdened_inputs(model, supplier, year, quantity)? {
                    if !involved.contains(&q) {
                        frontier.push(q);
                    }
                }
            }
        }
    }

    let ids: Vec<String> = involved.into_iter().collect();
    let index: BTreeMap<&str, usize> = ids.iter().map(|s| s.as_str()).zip(0..).collect();
    let n = ids.len();
    let mut a = vec![0.0f64; n * n];
    let mut b = vec![0.0f64; n];
    for (i, p) in ids.iter().enumerate() {
        a[i * n + i] = 1.0;
        if quantity == Quantity::Electricity && *p == model.scenario.electricity_product {
            b[i] = 1.0;
            continue;
        }
        match mixes.get(p) {
            Some(suppliers) => {
                let total: f64 = suppliers.values().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "mix shares for '{p}' sum to {total}, expected 1"
                    )));
                }
                for (supplier, share) in suppliers {
                    if supplier == "import" {
                        b[i] += share * import_burden(model, p, quantity)?;
                        continue;
                    }
                    let proc = model.process(supplier)?;
                    if proc.reference_product != *p {
                        continue;
                    }
                    b[i] += share * direct_coefficient(model, supplier, year, quantity)?;
                    for (q, magnitude) in burdened_inputs(model, supplier, year, quantity)? {
                        let j = index[q.as_str()];
                        a[i * n + j] -= share * magnitude;
                    }
                }
            }
            None => {
                let product = model.product(p)?;
                if model.import_price(product).is_some() {
                    b[i] = import_burden(model, p, quantity)?;
                } else {
                    return Err(Error::UnresolvedProduct(p.clone()));
                }
            }
        }
    }

    // Gaussian elimination with partial pivoting; the systems are tiny.
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() < 1e-12 {
            return Err(Error::UnresolvedProduct(ids[col].clone()));
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col] / d;
            if f != 0.0 {
                for c in col..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Ok(ids
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), b[i] / a[i * n + i]))
        .collect())
}

/// Intensity of one product under the given mixes.
pub fn rollup_intensity(
    model: &Model,
    mixes: &Mixes,
    product: &str,
    year: i32,
    quantity: Quantity,
) -> Result<f64> {
    let solved = rollup_intensities(model, mixes, &[product], year, quantity)?;
    Ok(solved[product])
}

/// Intensity of one specific route (process), per unit of its reference
/// product: its direct coefficient plus the rolled-up burden of its inputs.
pub fn route_intensity(
    model: &Model,
    mixes: &Mixes,
    proc_id: &str,
    year: i32,
    quantity: Quantity,
) -> Result<f64> {
    let split = flow_contribution_split(model, mixes, proc_id, year, quantity)?;
    Ok(split.values().sum())
}

/// Breakdown of a route's intensity: the "direct" coefficient plus one entry
/// per burdened input flow.
pub fn flow_contribution_split(
    model: &Model,
    mixes: &Mixes,
    proc_id: &str,
    year: i32,
    quantity: Quantity,
) -> Result<BTreeMap<String, f64>> {
    let inputs = burdened_inputs(model, proc_id, year, quantity)?;
    let roots: Vec<&str> = inputs.iter().map(|(q, _)| q.as_str()).collect();
    let solved = if roots.is_empty() {
        BTreeMap::new()
    } else {
        rollup_intensities(model, mixes, &roots, year, quantity)?
    };
    let mut split = BTreeMap::new();
    split.insert(
        "direct".to_string(),
        direct_coefficient(model, proc_id, year, quantity)?,
    );
    for (q, magnitude) in inputs {
        *split.entry(q.clone()).or_insert(0.0) += magnitude * solved[&q];
    }
    Ok(split)
}

/// The three per-unit intensities a Cost-Avoided comparison needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteProfile {
    /// MWh electricity per unit.
    pub electricity: f64,
    /// k€ operating cost per unit.
    pub op_cost: f64,
    /// tonne CO2-eq per unit.
    pub emissions: f64,
}

pub fn route_profile(
    model: &Model,
    mixes: &Mixes,
    proc_id: &str,
    year: i32,
) -> Result<RouteProfile> {
    Ok(RouteProfile {
        electricity: route_intensity(model, mixes, proc_id, year, Quantity::Electricity)?,
        op_cost: route_intensity(model, mixes, proc_id, year, Quantity::Cost)?,
        emissions: route_intensity(model, mixes, proc_id, year, Quantity::Emissions)?,
    })
}

/// Cost-Avoided per MWh of renewable electricity: with M = 1/E of the
/// electrified route, ΔC = M·(C_fossil − C_elec) + price·M·(e_fossil −
/// e_elec).
pub fn cost_avoided(fossil: &RouteProfile, electrified: &RouteProfile, co2_price: f64) -> Result<f64> {
    if electrified.electricity <= 0.0 {
        return Err(Error::InvalidArgument(
            "electrified route consumes no electricity; Cost-Avoided undefined".into(),
        ));
    }
    let m = 1.0 / electrified.electricity;
    let dc_op = m * (fossil.op_cost - electrified.op_cost);
    let de = m * (fossil.emissions - electrified.emissions);
    Ok(dc_op + co2_price * de)
}

/// The per-unit (e.g. per-tonne) composite ΔC_op + price·Δe, without the
/// division by electricity intensity.
pub fn cost_avoided_per_unit(
    fossil: &RouteProfile,
    electrified: &RouteProfile,
    co2_price: f64,
) -> f64 {
    (fossil.op_cost - electrified.op_cost) + co2_price * (fossil.emissions - electrified.emissions)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeritOrderEntry {
    pub service: String,
    /// k€ per MWh.
    pub delta_c: f64,
    /// MWh/h at full electrification: E × min(P, D).
    pub width: f64,
    /// MWh/h where this bar starts on the cumulative axis.
    pub cumulative_start: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeritOrderCurve {
    pub entries: Vec<MeritOrderEntry>,
    /// (typical period, step) this curve belongs to.
    pub timestamp: (usize, usize),
    /// MWh/h of renewable supply available at the timestamp.
    pub renewable_supply: f64,
}

/// One service bidding into the merit order.
#[derive(Debug, Clone)]
pub struct Service {
    pub id: String,
    pub delta_c: f64,
    /// MWh per unit.
    pub electricity_intensity: f64,
    /// unit/h installed.
    pub capacity: f64,
    /// unit/h demanded at the timestamp.
    pub demand: f64,
}

/// Sorts services by descending ΔC (ties by id) with widths E·min(P, D).
pub fn merit_order_curve(
    services: &[Service],
    timestamp: (usize, usize),
    renewable_supply: f64,
) -> MeritOrderCurve {
    let mut ordered: Vec<&Service> = services.iter().collect();
    ordered.sort_by(|a, b| b.delta_c.total_cmp(&a.delta_c).then(a.id.cmp(&b.id)));
    let mut entries = Vec::with_capacity(ordered.len());
    let mut cumulative = 0.0;
    for s in ordered {
        let width = (s.electricity_intensity * s.capacity.min(s.demand)).max(0.0);
        entries.push(MeritOrderEntry {
            service: s.id.clone(),
            delta_c: s.delta_c,
            width,
            cumulative_start: cumulative,
        });
        cumulative += width;
    }
    MeritOrderCurve {
        entries,
        timestamp,
        renewable_supply,
    }
}

/// Electrified fraction per service at renewable supply `r`: bars fully left
/// of `r` run electrified, the straddling bar partially, the rest fossil.
pub fn predict_dispatch(curve: &MeritOrderCurve, r: f64) -> Result<Vec<(String, f64)>> {
    if r < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "renewable supply must be non-negative, got {r}"
        )));
    }
    Ok(curve
        .entries
        .iter()
        .map(|e| {
            let fraction = if e.width <= 0.0 {
                if e.cumulative_start <= r {
                    1.0
                } else {
                    0.0
                }
            } else {
                ((r - e.cumulative_start) / e.width).clamp(0.0, 1.0)
            };
            (e.service.clone(), fraction)
        })
        .collect())
}

/// One hour of the load-duration table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadDurationRow {
    pub hour: usize,
    /// MWh/h renewable potential minus exogenous electricity demand.
    pub excess_renewables: f64,
    /// product -> (electrified output, fossil output) in unit/h.
    pub split: BTreeMap<String, (f64, f64)>,
}

/// Expands typical steps back to 8760 hours via the hour map and sorts the
/// hours by descending excess renewables. Renewable potential is the
/// surviving capacity of processes tagged `renewable` times availability;
/// electrified output is by processes tagged `electrified`.
pub fn load_duration(
    result: &PathwayResult,
    model: &Model,
    year: i32,
) -> Result<Vec<LoadDurationRow>> {
    let yr = result.year(year)?;
    let tps = &result.tps;
    let spp = tps.steps_per_period;
    let elec = &model.scenario.electricity_product;

    // Per typical step: renewable potential, exogenous electricity demand,
    // per-product electrified/fossil split.
    let n = tps.n_steps();
    let mut potential = vec![0.0f64; n];
    let mut demand = vec![0.0f64; n];
    let mut split: Vec<BTreeMap<String, (f64, f64)>> = vec![BTreeMap::new(); n];
    for (pid, proc) in &model.processes {
        if proc.is_storage() {
            continue;
        }
        let installed = yr.stock_after.surviving_capacity(&model.processes, pid, year);
        for (p, s, _) in tps.steps() {
            let idx = p * spp + s;
            if proc.has_tag("renewable") && proc.reference_product == *elec {
                let avail = match &proc.availability_series {
                    Some(id) => tps.try_value(id, p, s)?,
                    None => 1.0,
                };
                potential[idx] += installed * avail;
            }
            let level = yr.operation.get(pid).map(|v| v[idx]).unwrap_or(0.0);
            if level > 0.0 {
                let slot = split[idx]
                    .entry(proc.reference_product.clone())
                    .or_insert((0.0, 0.0));
                if proc.has_tag("electrified") {
                    slot.0 += level;
                } else {
                    slot.1 += level;
                }
            }
        }
    }
    if let Some(crate::model::DemandSpec::Series(id)) = model.demands.get(elec) {
        for (p, s, _) in tps.steps() {
            demand[p * spp + s] = tps.try_value(id, p, s)?;
        }
    } else if let Some(spec) = model.demands.get(elec) {
        if let Some(v) = spec.constant_hourly() {
            demand.iter_mut().for_each(|d| *d = v);
        }
    }

    let mut rows: Vec<LoadDurationRow> = (0..HOURS_PER_YEAR)
        .map(|hour| {
            let (p, s) = tps.hour_map[hour];
            let idx = p as usize * spp + s as usize;
            LoadDurationRow {
                hour,
                excess_renewables: potential[idx] - demand[idx],
                split: split[idx].clone(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.excess_renewables
            .total_cmp(&a.excess_renewables)
            .then(a.hour.cmp(&b.hour))
    });
    Ok(rows)
}

/// Annual weighted output over installed capacity × 8760.
pub fn utilization_rate(
    result: &PathwayResult,
    model: &Model,
    process: &str,
    year: i32,
) -> Result<f64> {
    let yr = result.year(year)?;
    let installed = yr
        .stock_after
        .surviving_capacity(&model.processes, process, year);
    if installed <= 0.0 {
        return Ok(0.0);
    }
    let levels = yr
        .operation
        .get(process)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown process '{process}'")))?;
    let spp = result.tps.steps_per_period;
    let annual: f64 = result
        .tps
        .steps()
        .map(|(p, s, w)| levels[p * spp + s] * w)
        .sum();
    Ok(annual / (installed * HOURS_PER_YEAR as f64))
}

/// Minimal staircase rendering of a merit-order curve with the renewable
/// supply marked as a vertical line.
pub fn curve_svg(curve: &MeritOrderCurve) -> String {
    let total_width: f64 = curve.entries.iter().map(|e| e.width).sum();
    let max_dc = curve
        .entries
        .iter()
        .map(|e| e.delta_c.abs())
        .fold(0.0, f64::max)
        .max(1e-9);
    let w = 640.0;
    let h = 360.0;
    let margin = 40.0;
    let x_span = total_width.max(curve.renewable_supply).max(1e-9);
    let sx = |v: f64| margin + v / x_span * (w - 2.0 * margin);
    let sy = |v: f64| h - margin - (v / max_dc).max(0.0) * (h - 2.0 * margin);
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    out.push_str(&format!(
        "  <line x1=\"{m}\" y1=\"{y}\" x2=\"{x}\" y2=\"{y}\" stroke=\"black\"/>\n",
        m = margin,
        x = w - margin,
        y = h - margin
    ));
    for e in &curve.entries {
        if e.width <= 0.0 {
            continue;
        }
        let x0 = sx(e.cumulative_start);
        let x1 = sx(e.cumulative_start + e.width);
        let y = sy(e.delta_c);
        out.push_str(&format!(
            "  <rect x=\"{x0:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"steelblue\" stroke=\"white\"><title>{}: dC={:.4}</title></rect>\n",
            x1 - x0,
            (h - margin) - y,
            e.service,
            e.delta_c
        ));
    }
    let xr = sx(curve.renewable_supply);
    out.push_str(&format!(
        "  <line x1=\"{xr:.2}\" y1=\"{m}\" x2=\"{xr:.2}\" y2=\"{y}\" stroke=\"darkred\" stroke-dasharray=\"4 3\"/>\n",
        m = margin,
        y = h - margin
    ));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::tiny_model;
    use crate::model::{Product, ProcessSpec, Unit, YearSeries};
    use std::collections::BTreeSet;

    fn product(id: &str, unit: Unit) -> Product {
        Product {
            id: id.into(),
            name: String::new(),
            unit,
            carbon_mass_fraction: 0.0,
            use_phase_combusts: false,
            import_price: None,
            import_emissions: None,
            co2_pressure_bar: None,
            sector: None,
            disposal: crate::model::Disposal::None,
            provenance: None,
        }
    }

    fn process(id: &str, reference: &str, flows: &[(&str, f64)]) -> ProcessSpec {
        ProcessSpec {
            id: id.into(),
            name: String::new(),
            reference_product: reference.into(),
            flows: flows.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            flow_overrides: Default::default(),
            capex: YearSeries::constant(0.0),
            opex_fixed: Default::default(),
            opex_var: YearSeries::constant(0.0),
            direct_emissions: YearSeries::constant(0.0),
            lifetime: 30,
            available_from: i32::MIN,
            tags: BTreeSet::new(),
            sector: None,
            availability_series: None,
            storage: None,
            provenance: None,
        }
    }

    /// CO2-supply-chain fixture: methanol from captured CO2 where capture is
    /// 96% from air / 4% point source, air capture also burns low-T heat
    /// served by a heat pump.
    fn co2_chain_model() -> (Model, Mixes) {
        let mut model = tiny_model();
        model.products.clear();
        model.processes.clear();
        model.demands.clear();
        model.products.insert("electricity".into(), product("electricity", Unit::MWh));
        model.products.insert("heat_lt".into(), product("heat_lt", Unit::MWh));
        let mut co2 = product("co2_100bar", Unit::Tonne);
        co2.co2_pressure_bar = Some(100.0);
        model.products.insert("co2_100bar".into(), co2);
        model.products.insert("methanol".into(), product("methanol", Unit::Tonne));

        model.processes.insert(
            "dac".into(),
            process(
                "dac",
                "co2_100bar",
                &[("co2_100bar", 1.0), ("electricity", -0.67), ("heat_lt", -2.0)],
            ),
        );
        model.processes.insert(
            "psc".into(),
            process("psc", "co2_100bar", &[("co2_100bar", 1.0), ("electricity", -0.1)]),
        );
        model.processes.insert(
            "heat_pump".into(),
            process("heat_pump", "heat_lt", &[("heat_lt", 1.0), ("electricity", -0.4)]),
        );
        model.processes.insert(
            "meoh_ccu".into(),
            process("meoh_ccu", "methanol", &[("methanol", 1.0), ("co2_100bar", -1.46)]),
        );
        model.processes.insert(
            "wind".into(),
            process("wind", "electricity", &[("electricity", 1.0)]),
        );

        let mixes: Mixes = [
            (
                "electricity".to_string(),
                [("wind".to_string(), 1.0)].into_iter().collect(),
            ),
            (
                "co2_100bar".to_string(),
                [("dac".to_string(), 0.96), ("psc".to_string(), 0.04)]
                    .into_iter()
                    .collect(),
            ),
            (
                "heat_lt".to_string(),
                [("heat_pump".to_string(), 1.0)].into_iter().collect(),
            ),
            (
                "methanol".to_string(),
                [("meoh_ccu".to_string(), 1.0)].into_iter().collect(),
            ),
        ]
        .into_iter()
        .collect();
        (model, mixes)
    }

    #[test]
    fn input_free_process_rolls_up_to_its_direct_coefficient() {
        let mut model = tiny_model();
        model
            .processes
            .get_mut("widget_fossil")
            .unwrap()
            .opex_var = YearSeries::constant(0.7);
        let mixes: Mixes = [(
            "widget".to_string(),
            [("widget_fossil".to_string(), 1.0)].into_iter().collect(),
        )]
        .into_iter()
        .collect();
        let cost = rollup_intensity(&model, &mixes, "widget", 2020, Quantity::Cost).unwrap();
        assert!((cost - 0.7).abs() < 1e-12);
        let elec =
            rollup_intensity(&model, &mixes, "widget", 2020, Quantity::Electricity).unwrap();
        assert_eq!(elec, 0.0);
    }

    #[test]
    fn co2_chain_branch_contributions() {
        let (model, mixes) = co2_chain_model();
        // Direct-capture electricity branch: 1.46 × (0.96·0.67 + 0.04·0.1)
        let dac_split =
            flow_contribution_split(&model, &mixes, "dac", 2040, Quantity::Electricity).unwrap();
        assert!((dac_split["electricity"] - 0.67).abs() < 1e-12);
        assert!((dac_split["heat_lt"] - 0.8).abs() < 1e-12);

        let co2_intensity =
            rollup_intensity(&model, &mixes, "co2_100bar", 2040, Quantity::Electricity).unwrap();
        let direct_branch: f64 = 1.46 * (0.96 * 0.67 + 0.04 * 0.1);
        let heat_branch: f64 = 1.46 * 0.96 * 2.0 * 0.4;
        assert!((direct_branch - 0.94).abs() < 0.01);
        assert!((heat_branch - 1.12).abs() < 0.01);
        assert!((1.46 * co2_intensity - (direct_branch + heat_branch)).abs() < 1e-9);
        assert!((1.46 * co2_intensity - 2.06).abs() < 0.01);

        let meoh =
            rollup_intensity(&model, &mixes, "methanol", 2040, Quantity::Electricity).unwrap();
        assert!((meoh - 2.0662).abs() < 1e-3);
    }

    /// Brute-force oracle: expand the supply tree recursively (acyclic).
    fn tree_expand(
        model: &Model,
        mixes: &Mixes,
        product: &str,
        year: i32,
        quantity: Quantity,
    ) -> f64 {
        if quantity == Quantity::Electricity && product == model.scenario.electricity_product {
            return 1.0;
        }
        match mixes.get(product) {
            None => import_burden(model, product, quantity).unwrap(),
            Some(suppliers) => suppliers
                .iter()
                .map(|(supplier, share)| {
                    if supplier == "import" {
                        return share * import_burden(model, product, quantity).unwrap();
                    }
                    let proc = &model.processes[supplier];
                    if proc.reference_product != product {
                        return 0.0;
                    }
                    let mut v = direct_coefficient(model, supplier, year, quantity).unwrap();
                    for (q, mag) in burdened_inputs(model, supplier, year, quantity).unwrap() {
                        v += mag * tree_expand(model, mixes, &q, year, quantity);
                    }
                    share * v
                })
                .sum(),
        }
    }

    #[test]
    fn rollup_matches_tree_expansion_on_random_acyclic_chains() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..25 {
            // 4-level chain: d -> c -> b -> a, plus electricity at the leaves.
            let mut model = tiny_model();
            model.products.clear();
            model.processes.clear();
            model.demands.clear();
            model
                .products
                .insert("electricity".into(), product("electricity", Unit::MWh));
            let mut wind = process("wind", "electricity", &[("electricity", 1.0)]);
            wind.opex_var = YearSeries::constant(rng.gen_range(0.0..1.0));
            model.processes.insert("wind".into(), wind);
            let names = ["a", "b", "c", "d"];
            let mut mixes = Mixes::new();
            mixes.insert(
                "electricity".to_string(),
                [("wind".to_string(), 1.0)].into_iter().collect(),
            );
            for (lvl, name) in names.iter().enumerate() {
                model.products.insert(name.to_string(), product(name, Unit::Tonne));
                let mut flows: Vec<(String, f64)> = vec![(name.to_string(), 1.0)];
                flows.push(("electricity".into(), -rng.gen_range(0.0..2.0)));
                if lvl > 0 {
                    flows.push((names[lvl - 1].to_string(), -rng.gen_range(0.1..1.5)));
                }
                let fl: Vec<(&str, f64)> = flows.iter().map(|(k, v)| (k.as_str(), *v)).collect();
                let mut proc = process(&format!("make_{name}"), name, &fl);
                proc.opex_var = YearSeries::constant(rng.gen_range(0.0..3.0));
                proc.direct_emissions = YearSeries::constant(rng.gen_range(-1.0..2.0));
                model.processes.insert(proc.id.clone(), proc);
                mixes.insert(
                    name.to_string(),
                    [(format!("make_{name}"), 1.0)].into_iter().collect(),
                );
            }
            for q in [Quantity::Electricity, Quantity::Cost, Quantity::Emissions] {
                let fixed = rollup_intensity(&model, &mixes, "d", 2020, q).unwrap();
                let oracle = tree_expand(&model, &mixes, "d", 2020, q);
                assert!(
                    (fixed - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()),
                    "trial {trial} {q:?}: {fixed} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn rollup_is_linear_in_direct_coefficients() {
        let (model, mixes) = co2_chain_model();
        let mut doubled = model.clone();
        for proc in doubled.processes.values_mut() {
            let v = proc.opex_var.at(2040);
            proc.opex_var = YearSeries::constant(v * 2.0);
        }
        // opex all zero here; instead perturb then double
        for (i, proc) in doubled.processes.values_mut().enumerate() {
            proc.opex_var = YearSeries::constant((i + 1) as f64);
        }
        let mut base = model.clone();
        for (i, proc) in base.processes.values_mut().enumerate() {
            proc.opex_var = YearSeries::constant((i + 1) as f64 / 2.0);
        }
        let a = rollup_intensity(&base, &mixes, "methanol", 2040, Quantity::Cost).unwrap();
        let b = rollup_intensity(&doubled, &mixes, "methanol", 2040, Quantity::Cost).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-9);
    }

    #[test]
    fn unresolved_product_is_an_error() {
        let (model, mut mixes) = co2_chain_model();
        mixes.remove("heat_lt");
        let err = rollup_intensity(&model, &mixes, "methanol", 2040, Quantity::Electricity);
        assert!(matches!(err, Err(Error::UnresolvedProduct(p)) if p == "heat_lt"));
        // Bad mix sums are rejected.
        let (model, mut mixes) = co2_chain_model();
        mixes.get_mut("co2_100bar").unwrap().insert("psc".into(), 0.2);
        let err = rollup_intensity(&model, &mixes, "methanol", 2040, Quantity::Electricity);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn cost_avoided_identities() {
        let fossil = RouteProfile {
            electricity: 0.0,
            op_cost: 1.0,
            emissions: 2.0,
        };
        let elec = RouteProfile {
            electricity: 4.0,
            op_cost: 0.5,
            emissions: 0.5,
        };
        // per-unit: (1-0.5) + 3·(2-0.5) = 5; per-MWh: 5/4
        assert!((cost_avoided_per_unit(&fossil, &elec, 3.0) - 5.0).abs() < 1e-12);
        assert!((cost_avoided(&fossil, &elec, 3.0).unwrap() - 1.25).abs() < 1e-12);
        // identical routes -> 0
        assert_eq!(cost_avoided_per_unit(&elec, &elec, 3.0), 0.0);
        assert_eq!(cost_avoided(&elec, &elec, 3.0).unwrap(), 0.0);
        // no electricity -> error
        assert!(cost_avoided(&elec, &fossil, 3.0).is_err());
    }

    fn three_equal_services() -> Vec<Service> {
        (0..3)
            .map(|i| Service {
                id: format!("s{i}"),
                delta_c: 3.0 - i as f64,
                electricity_intensity: 1.0,
                capacity: 10.0,
                demand: 10.0,
            })
            .collect()
    }

    #[test]
    fn merit_order_sorting_widths_and_ties() {
        let services = three_equal_services();
        let curve = merit_order_curve(&services, (0, 0), 15.0);
        assert_eq!(
            curve.entries.iter().map(|e| e.service.as_str()).collect::<Vec<_>>(),
            vec!["s0", "s1", "s2"]
        );
        for (i, e) in curve.entries.iter().enumerate() {
            assert_eq!(e.width, 10.0);
            assert_eq!(e.cumulative_start, 10.0 * i as f64);
        }
        // ties break by id
        let tied: Vec<Service> = ["b", "a"]
            .iter()
            .map(|id| Service {
                id: id.to_string(),
                delta_c: 1.0,
                electricity_intensity: 1.0,
                capacity: 1.0,
                demand: 2.0,
            })
            .collect();
        let curve = merit_order_curve(&tied, (0, 0), 0.0);
        assert_eq!(curve.entries[0].service, "a");
        // width uses min(P, D)
        assert_eq!(curve.entries[0].width, 1.0);
        // zero capacity -> zero width
        let empty = merit_order_curve(
            &[Service {
                id: "x".into(),
                delta_c: 1.0,
                electricity_intensity: 5.0,
                capacity: 0.0,
                demand: 3.0,
            }],
            (0, 0),
            0.0,
        );
        assert_eq!(empty.entries[0].width, 0.0);
    }

    #[test]
    fn dispatch_prediction_piecewise() {
        let curve = merit_order_curve(&three_equal_services(), (0, 0), 0.0);
        let all_zero = predict_dispatch(&curve, 0.0).unwrap();
        assert!(all_zero.iter().all(|(_, f)| *f == 0.0));
        let all_one = predict_dispatch(&curve, 30.0).unwrap();
        assert!(all_one.iter().all(|(_, f)| *f == 1.0));
        let bisect = predict_dispatch(&curve, 15.0).unwrap();
        assert_eq!(bisect[0].1, 1.0);
        assert_eq!(bisect[1].1, 0.5);
        assert_eq!(bisect[2].1, 0.0);
        assert!(predict_dispatch(&curve, -1.0).is_err());
        // monotone in R
        let mut prev = vec![0.0; 3];
        for r in 0..=30 {
            let f = predict_dispatch(&curve, r as f64).unwrap();
            for (i, (_, v)) in f.iter().enumerate() {
                assert!(*v >= prev[i] - 1e-12);
                prev[i] = *v;
            }
        }
    }

    #[test]
    fn utilization_examples() {
        use crate::pathway::run_pathway;
        // Always-at-capacity greenfield process: utilization 1.
        let mut model = tiny_model();
        model.processes.get_mut("widget_fossil").unwrap().tags.clear();
        let result = run_pathway(&model).unwrap();
        let u = utilization_rate(&result, &model, "widget_fossil", 2020).unwrap();
        assert!((u - 1.0).abs() < 1e-7, "u = {u}");
        // Unknown year errors, unknown process errors.
        assert!(utilization_rate(&result, &model, "widget_fossil", 1999).is_err());
        assert!(utilization_rate(&result, &model, "nope", 2020).is_ok_and(|v| v == 0.0));
    }

    #[test]
    fn svg_emitter_produces_well_formed_staircase() {
        let curve = merit_order_curve(&three_equal_services(), (1, 2), 12.0);
        let svg = curve_svg(&curve);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<rect").count(), 3);
    }
}
