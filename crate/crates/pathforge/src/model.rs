//! Domain data model: products, conversion processes, capacity vintages,
//! demands and emission schedules, plus the elementary accounting formulas
//! (annualization, combustion stoichiometry, vintage retirement).
//!
//! All types are immutable after load/validation and safe to share across
//! workers; the operations here are pure functions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const HOURS_PER_YEAR: usize = 8760;

/// kg CO2 released per kg carbon on complete combustion (44/12).
pub const CO2_PER_CARBON: f64 = 44.0 / 12.0;

/// Measurement unit of a tradable commodity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "tonne")]
    Tonne,
    #[serde(rename = "MWh")]
    MWh,
    #[serde(rename = "vehicle-km")]
    VehicleKm,
    #[serde(rename = "tonne-CO2")]
    TonneCo2,
}

/// What happens to surplus of a product that no process consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposal {
    /// Balance is a strict equality; oversupply makes the LP infeasible.
    #[default]
    None,
    /// Surplus may be discarded at zero cost (curtailment, waste heat).
    Free,
    /// Surplus is vented to the atmosphere and counts as emissions, one
    /// tonne CO2-eq per tonne.
    VentCo2,
}

/// A tradable commodity: chemical, energy carrier, or service.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Product {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub unit: Unit,
    /// kg carbon per kg product; only meaningful for `unit = tonne`.
    #[serde(default)]
    pub carbon_mass_fraction: f64,
    /// Whether the product's carbon is released as CO2 during its use phase.
    #[serde(default)]
    pub use_phase_combusts: bool,
    /// k€ per unit for imports; `None` means the product cannot be imported.
    #[serde(default)]
    pub import_price: Option<f64>,
    /// tonne CO2-eq per imported unit (upstream supply chain).
    #[serde(default)]
    pub import_emissions: Option<f64>,
    /// Pressure level for CO2 products; captured CO2 streams carry 100 here
    /// and point-source streams 1. `None` for everything else.
    #[serde(default)]
    pub co2_pressure_bar: Option<f64>,
    /// Reporting sector this product belongs to (used for venting and
    /// use-phase attribution).
    #[serde(default)]
    pub sector: Option<String>,
    #[serde(default)]
    pub disposal: Disposal,
    /// Data provenance marker; placeholder coefficients carry "placeholder".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl Product {
    pub fn is_captured_co2(&self) -> bool {
        matches!(self.co2_pressure_bar, Some(p) if p >= 10.0)
    }

    pub fn importable(&self) -> bool {
        self.import_price.is_some()
    }
}

/// A parameter listed for discrete years, filled piecewise-constant between
/// them: the value at year `y` is the entry with the greatest key `<= y`,
/// or the earliest entry when `y` precedes all keys.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct YearSeries(pub BTreeMap<i32, f64>);

impl YearSeries {
    pub fn constant(v: f64) -> Self {
        YearSeries(BTreeMap::from([(i32::MIN, v)]))
    }

    pub fn at(&self, year: i32) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        match self.0.range(..=year).next_back() {
            Some((_, v)) => *v,
            None => *self.0.values().next().unwrap(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for YearSeries {
    fn default() -> Self {
        YearSeries::constant(0.0)
    }
}

impl<'de> Deserialize<'de> for YearSeries {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = YearSeries;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or a {year: value} map")
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                Ok(YearSeries::constant(v))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                Ok(YearSeries::constant(v as f64))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                Ok(YearSeries::constant(v as f64))
            }

            fn visit_map<A>(self, mut map: A) -> std::result::Result<Self::Value, A::Error>
            where
                A: serde::de::MapAccess<'de>,
            {
                let mut out = BTreeMap::new();
                while let Some((key, value)) = map.next_entry::<String, f64>()? {
                    let year: i32 = key.parse().map_err(|_| {
                        serde::de::Error::custom(format!("year key '{key}' is not an integer"))
                    })?;
                    out.insert(year, value);
                }
                Ok(YearSeries(out))
            }
        }
        deserializer.deserialize_any(V)
    }
}

/// Fixed operating cost specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpexFixed {
    /// k€ per (unit/hour) of capacity per year, by investment year.
    PerCapacity(YearSeries),
    /// Percent of the vintage's capex per year.
    PercentOfCapex(f64),
}

impl Default for OpexFixed {
    fn default() -> Self {
        OpexFixed::PerCapacity(YearSeries::constant(0.0))
    }
}

/// Parameters of a generic storage technology. Charge/discharge power is
/// bounded by installed capacity; stored energy by capacity times duration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StorageParams {
    pub charge_efficiency: f64,
    pub discharge_efficiency: f64,
    pub duration_hours: f64,
}

/// A conversion technology. Flows are signed rates per unit of reference
/// output: inputs negative, outputs positive, the reference product fixed
/// at exactly +1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub reference_product: String,
    pub flows: BTreeMap<String, f64>,
    /// Year-keyed partial flow replacements (piecewise-constant fill).
    #[serde(default)]
    pub flow_overrides: BTreeMap<i32, BTreeMap<String, f64>>,
    /// k€ per (unit/hour) of capacity, by investment year.
    #[serde(default)]
    pub capex: YearSeries,
    #[serde(default)]
    pub opex_fixed: OpexFixed,
    /// k€ per unit of output.
    #[serde(default)]
    pub opex_var: YearSeries,
    /// tonne CO2-eq per unit of output (atom-balance closure; negative for
    /// atmospheric uptake).
    #[serde(default)]
    pub direct_emissions: YearSeries,
    #[serde(default = "default_lifetime")]
    pub lifetime: i32,
    #[serde(default = "default_available_from")]
    pub available_from: i32,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    #[serde(default)]
    pub sector: Option<String>,
    /// Hourly capacity factor series id; absent means firm capacity.
    #[serde(default)]
    pub availability_series: Option<String>,
    #[serde(default)]
    pub storage: Option<StorageParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

/// New builds default to the 30-year annualization horizon when the dataset
/// does not specify a technology lifetime.
fn default_lifetime() -> i32 {
    30
}

fn default_available_from() -> i32 {
    i32::MIN
}

impl ProcessSpec {
    /// Signed flows effective at `year`, with year-keyed overrides applied.
    pub fn flows_at(&self, year: i32) -> BTreeMap<String, f64> {
        let mut flows = self.flows.clone();
        for (_, patch) in self.flow_overrides.range(..=year) {
            for (k, v) in patch {
                flows.insert(k.clone(), *v);
            }
        }
        flows
    }

    pub fn capex_at(&self, year: i32) -> f64 {
        self.capex.at(year)
    }

    pub fn opex_var_at(&self, year: i32) -> f64 {
        self.opex_var.at(year)
    }

    pub fn direct_emissions_at(&self, year: i32) -> f64 {
        self.direct_emissions.at(year)
    }

    /// Annual fixed operating cost per (unit/hour) of capacity built in
    /// `build_year`.
    pub fn opex_fixed_annual(&self, build_year: i32) -> f64 {
        match &self.opex_fixed {
            OpexFixed::PerCapacity(s) => s.at(build_year),
            OpexFixed::PercentOfCapex(pct) => pct / 100.0 * self.capex_at(build_year),
        }
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }

    pub fn is_storage(&self) -> bool {
        self.storage.is_some() || self.has_tag("storage")
    }
}

/// A capacity tranche identified by its build year; retired once its age
/// reaches the technology lifetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vintage {
    pub process: String,
    pub build_year: i32,
    /// unit/hour.
    pub capacity: f64,
}

/// Installed capacity as a list of vintages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CapacityStock {
    pub vintages: Vec<Vintage>,
}

impl CapacityStock {
    pub fn is_empty(&self) -> bool {
        self.vintages.is_empty()
    }

    /// Total capacity of `process` still alive at `year`.
    pub fn surviving_capacity(
        &self,
        processes: &BTreeMap<String, ProcessSpec>,
        process: &str,
        year: i32,
    ) -> f64 {
        self.vintages
            .iter()
            .filter(|v| v.process == process)
            .filter(|v| {
                let lifetime = processes.get(&v.process).map(|p| p.lifetime).unwrap_or(0);
                year - v.build_year < lifetime
            })
            .map(|v| v.capacity)
            .sum()
    }

    pub fn total_capacity(&self, process: &str) -> f64 {
        self.vintages
            .iter()
            .filter(|v| v.process == process)
            .map(|v| v.capacity)
            .sum()
    }

    pub fn add(&mut self, process: &str, build_year: i32, capacity: f64) {
        if capacity > 0.0 {
            self.vintages.push(Vintage {
                process: process.to_string(),
                build_year,
                capacity,
            });
        }
    }
}

/// Demand for one product.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandSpec {
    /// Constant unit/hour for every hour of the year.
    Constant(f64),
    /// Annual tonnage, spread evenly: value / 8760 per hour.
    Annual(f64),
    /// Hourly profile referenced by series id (8760 values).
    Series(String),
}

impl DemandSpec {
    /// The constant hourly value, if the demand is flat.
    pub fn constant_hourly(&self) -> Option<f64> {
        match self {
            DemandSpec::Constant(v) => Some(*v),
            DemandSpec::Annual(v) => Some(*v / HOURS_PER_YEAR as f64),
            DemandSpec::Series(_) => None,
        }
    }
}

/// Annual operating-emissions caps and the penalty on residual emissions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmissionsSchedule {
    /// investment year -> cap in Mt CO2-eq.
    pub caps: BTreeMap<i32, f64>,
    /// k€ per tonne CO2-eq of residual emissions above the cap; `null`
    /// (infinite) makes the caps hard constraints.
    #[serde(
        default = "no_residual_penalty",
        deserialize_with = "penalty_or_infinite",
        serialize_with = "finite_or_null"
    )]
    pub residual_penalty: f64,
}

fn no_residual_penalty() -> f64 {
    f64::INFINITY
}

fn penalty_or_infinite<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

fn finite_or_null<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_some(v)
    } else {
        s.serialize_none()
    }
}

impl EmissionsSchedule {
    pub fn cap_tonnes(&self, year: i32) -> Option<f64> {
        self.caps.get(&year).map(|mt| mt * 1e6)
    }
}

/// Run configuration for a transition-pathway optimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub base_year: i32,
    pub investment_years: Vec<i32>,
    pub foresight_periods: usize,
    pub typical_periods: usize,
    pub hours_per_typical_period: usize,
    /// fraction per year (0.05 = 5%).
    pub interest_rate: f64,
    pub annuity_years: i32,
    /// Optional override of the H2 import price (k€/tonne) used to force
    /// domestic production first.
    #[serde(default)]
    pub h2_import_penalty: Option<f64>,
    /// Product id treated as electricity in analytics.
    #[serde(default = "default_electricity_product")]
    pub electricity_product: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_electricity_product() -> String {
    "electricity".to_string()
}

impl ScenarioConfig {
    /// Spacing between investment years; the step of the uniform vintage
    /// seeding. Falls back to 5 when fewer than two years are listed.
    pub fn investment_step(&self) -> i32 {
        if self.investment_years.len() >= 2 {
            self.investment_years[1] - self.investment_years[0]
        } else {
            5
        }
    }
}

/// A full model: the immutable input to validation, LP construction and the
/// pathway driver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model {
    #[serde(default)]
    pub name: String,
    pub products: BTreeMap<String, Product>,
    pub processes: BTreeMap<String, ProcessSpec>,
    pub demands: BTreeMap<String, DemandSpec>,
    pub emissions_schedule: EmissionsSchedule,
    pub scenario: ScenarioConfig,
    /// Hourly series referenced by demands and availability, 8760 values each.
    #[serde(default)]
    pub profiles: BTreeMap<String, Vec<f64>>,
}

impl Model {
    pub fn product(&self, id: &str) -> Result<&Product> {
        self.products
            .get(id)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown product '{id}'")))
    }

    pub fn process(&self, id: &str) -> Result<&ProcessSpec> {
        self.processes
            .get(id)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown process '{id}'")))
    }

    /// Effective import price of a product, with the scenario H2 penalty
    /// override applied.
    pub fn import_price(&self, product: &Product) -> Option<f64> {
        if product.id == "h2" {
            if let Some(p) = self.scenario.h2_import_penalty {
                return Some(p);
            }
        }
        product.import_price
    }

    /// Ids of all hourly series the model references.
    pub fn referenced_series(&self) -> BTreeSet<String> {
        let mut ids = BTreeSet::new();
        for spec in self.demands.values() {
            if let DemandSpec::Series(s) = spec {
                ids.insert(s.clone());
            }
        }
        for proc in self.processes.values() {
            if let Some(s) = &proc.availability_series {
                ids.insert(s.clone());
            }
        }
        ids
    }
}

/// One diagnostic from model validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub message: String,
}

impl Violation {
    fn new(code: &str, message: String) -> Self {
        Violation {
            code: code.to_string(),
            message,
        }
    }
}

/// Checks structural well-formedness of a model. Returns diagnostics, not
/// errors: the list is empty iff the model is well-formed.
pub fn validate_model(model: &Model) -> Vec<Violation> {
    let mut out = Vec::new();

    for (id, p) in &model.products {
        if !(0.0..=1.0).contains(&p.carbon_mass_fraction) {
            out.push(Violation::new(
                "carbon-fraction-range",
                format!(
                    "product '{id}' has carbon_mass_fraction {} outside [0,1]",
                    p.carbon_mass_fraction
                ),
            ));
        }
        if p.import_price.is_some() && p.import_emissions.is_none() {
            out.push(Violation::new(
                "import-emissions-missing",
                format!("product '{id}' has an import price but no import emissions"),
            ));
        }
    }

    for (id, proc) in &model.processes {
        if !model.products.contains_key(&proc.reference_product) {
            out.push(Violation::new(
                "dangling-product",
                format!(
                    "process '{id}' references unknown product '{}'",
                    proc.reference_product
                ),
            ));
        }
        match proc.flows.get(&proc.reference_product) {
            Some(v) if (*v - 1.0).abs() < 1e-12 => {}
            Some(v) => out.push(Violation::new(
                "missing-reference-flow",
                format!("process '{id}' has reference flow {v}, must be exactly +1"),
            )),
            None => out.push(Violation::new(
                "missing-reference-flow",
                format!("process '{id}' omits its reference product from flows"),
            )),
        }
        for flow_id in proc.flows.keys() {
            if !model.products.contains_key(flow_id) {
                out.push(Violation::new(
                    "dangling-product",
                    format!("process '{id}' flow references unknown product '{flow_id}'"),
                ));
            }
        }
        for patch in proc.flow_overrides.values() {
            for flow_id in patch.keys() {
                if !model.products.contains_key(flow_id) {
                    out.push(Violation::new(
                        "dangling-product",
                        format!(
                            "process '{id}' flow override references unknown product '{flow_id}'"
                        ),
                    ));
                }
            }
        }
        if proc.lifetime <= 0 {
            out.push(Violation::new(
                "bad-lifetime",
                format!("process '{id}' has non-positive lifetime {}", proc.lifetime),
            ));
        }
        if model.scenario.investment_years.iter().any(|y| {
            *y >= proc.available_from && proc.capex_at(*y) < 0.0
        }) {
            out.push(Violation::new(
                "negative-capex",
                format!("process '{id}' has a negative capex entry"),
            ));
        }
        if let Some(series) = &proc.availability_series {
            if !model.profiles.contains_key(series) {
                out.push(Violation::new(
                    "missing-series",
                    format!("process '{id}' references missing series '{series}'"),
                ));
            }
        }
        if let Some(st) = &proc.storage {
            if st.charge_efficiency <= 0.0
                || st.charge_efficiency > 1.0
                || st.discharge_efficiency <= 0.0
                || st.discharge_efficiency > 1.0
                || st.duration_hours <= 0.0
            {
                out.push(Violation::new(
                    "bad-storage",
                    format!("process '{id}' has out-of-range storage parameters"),
                ));
            }
        }
    }

    for (id, spec) in &model.demands {
        if !model.products.contains_key(id) {
            out.push(Violation::new(
                "dangling-product",
                format!("demand references unknown product '{id}'"),
            ));
            continue;
        }
        match spec {
            DemandSpec::Constant(v) | DemandSpec::Annual(v) => {
                if *v < 0.0 {
                    out.push(Violation::new(
                        "negative-demand",
                        format!("demand for '{id}' is negative"),
                    ));
                }
            }
            DemandSpec::Series(s) => match model.profiles.get(s) {
                None => out.push(Violation::new(
                    "missing-series",
                    format!("demand for '{id}' references missing series '{s}'"),
                )),
                Some(vals) => {
                    if vals.len() != HOURS_PER_YEAR {
                        out.push(Violation::new(
                            "bad-series-length",
                            format!("series '{s}' has {} values, expected 8760", vals.len()),
                        ));
                    }
                    if vals.iter().any(|v| *v < 0.0) {
                        out.push(Violation::new(
                            "negative-demand",
                            format!("series '{s}' for '{id}' contains negative values"),
                        ));
                    }
                }
            },
        }
        let covered = model
            .processes
            .values()
            .any(|p| p.flows.get(id).map(|v| *v > 0.0).unwrap_or(false))
            || model
                .products
                .get(id)
                .map(|p| p.importable())
                .unwrap_or(false);
        if !covered {
            out.push(Violation::new(
                "uncovered-demand",
                format!("demanded product '{id}' has no producing process and no import"),
            ));
        }
    }

    for y in &model.scenario.investment_years {
        if !model.emissions_schedule.caps.contains_key(y) {
            out.push(Violation::new(
                "cap-coverage",
                format!("emissions schedule has no cap for investment year {y}"),
            ));
        }
    }

    out
}

/// Annuity factor r(1+r)^n / ((1+r)^n - 1); the zero-rate limit is 1/n.
pub fn annuity_factor(rate: f64, years: i32) -> Result<f64> {
    if years <= 0 {
        return Err(Error::InvalidArgument(format!(
            "annuity years must be positive, got {years}"
        )));
    }
    if rate < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "interest rate must be non-negative, got {rate}"
        )));
    }
    if rate == 0.0 {
        return Ok(1.0 / years as f64);
    }
    let growth = (1.0 + rate).powi(years);
    Ok(rate * growth / (growth - 1.0))
}

/// tonne CO2 released per tonne of product on complete combustion during the
/// use phase; zero for carbon-free or non-combusting products.
pub fn use_phase_emissions(product: &Product) -> Result<f64> {
    if product.unit != Unit::Tonne {
        return Err(Error::InvalidArgument(format!(
            "use-phase emissions are defined for mass units only; product '{}' has a non-mass unit",
            product.id
        )));
    }
    if product.use_phase_combusts {
        Ok(product.carbon_mass_fraction * CO2_PER_CARBON)
    } else {
        Ok(0.0)
    }
}

/// Retires aged vintages at `period_year` and, when the stock is empty,
/// seeds the initial fossil stock: for each chemical, capacity equal to its
/// hourly demand, split into lifetime/step equal vintages spaced one
/// investment step apart so that an equal share retires each period.
pub fn retire_and_seed_stock(
    stock: &CapacityStock,
    model: &Model,
    period_year: i32,
) -> CapacityStock {
    if stock.is_empty() {
        let mut seeded = CapacityStock::default();
        let step = model.scenario.investment_step().max(1);
        for (product_id, demand) in &model.demands {
            let product = match model.products.get(product_id) {
                Some(p) if p.unit == Unit::Tonne => p,
                _ => continue,
            };
            let hourly = match demand.constant_hourly() {
                Some(v) if v > 0.0 => v,
                _ => continue,
            };
            // The chemical's incumbent fossil route, by tag; skip products
            // without one (energy carriers handled endogenously).
            let fossil = model
                .processes
                .values()
                .find(|p| p.reference_product == product.id && p.has_tag("fossil"));
            let fossil = match fossil {
                Some(f) => f,
                None => continue,
            };
            let n_vintages = (fossil.lifetime / step).max(1);
            let share = hourly / n_vintages as f64;
            for k in 0..n_vintages {
                seeded.add(&fossil.id, period_year - k * step, share);
            }
        }
        retire(&seeded, &model.processes, period_year)
    } else {
        retire(stock, &model.processes, period_year)
    }
}

/// Removes vintages whose age has reached their process lifetime at `year`.
pub fn retire(
    stock: &CapacityStock,
    processes: &BTreeMap<String, ProcessSpec>,
    year: i32,
) -> CapacityStock {
    CapacityStock {
        vintages: stock
            .vintages
            .iter()
            .filter(|v| {
                let lifetime = processes
                    .get(&v.process)
                    .map(|p| p.lifetime)
                    .unwrap_or(default_lifetime());
                year - v.build_year < lifetime && v.capacity > 0.0
            })
            .cloned()
            .collect(),
    }
}
