//! Fixed-format MPS export with a side-car JSON name map.
//!
//! Fixed MPS limits names to 8 characters. Names that fit the charset and
//! length pass through unchanged; anything longer is replaced by `x`/`r`
//! plus the first 7 hex digits of its SHA-256, and the mapping is written
//! next to the model file so external tooling can translate back.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::lp::{LinearProgram, Sense};
use crate::{Error, Result};

fn fits_fixed(name: &str) -> bool {
    name.len() <= 8
        && !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn hashed(prefix: char, name: &str) -> String {
    let digest = Sha256::digest(name.as_bytes());
    format!("{prefix}{}", &hex::encode(digest)[..7])
}

/// Assigns fixed-format-safe names; returns short -> original.
fn assign_names<'a>(
    names: impl Iterator<Item = &'a str>,
    prefix: char,
) -> Result<(Vec<String>, BTreeMap<String, String>)> {
    let mut short_names = Vec::new();
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for name in names {
        let mut short = if fits_fixed(name) {
            name.to_string()
        } else {
            hashed(prefix, name)
        };
        let mut bump = 0u32;
        while map.contains_key(&short) {
            // Hash collisions are effectively impossible; pass-through names
            // can still collide with a hash, so disambiguate.
            bump += 1;
            short = hashed(prefix, &format!("{name}#{bump}"));
            if bump > 64 {
                return Err(Error::Solver(format!("cannot shorten name '{name}'")));
            }
        }
        map.insert(short.clone(), name.to_string());
        short_names.push(short);
    }
    Ok((short_names, map))
}

fn fmt_value(v: f64) -> String {
    // Fixed MPS value fields are 12 characters wide.
    let s = format!("{v:.6}");
    if s.len() <= 12 && s.parse::<f64>().map(|p| (p - v).abs() <= 1e-9 * (1.0 + v.abs())) == Ok(true)
    {
        s
    } else {
        format!("{v:.5E}")
    }
}

/// Renders the program in fixed MPS format. Returns the file body and the
/// short-name -> original-name map covering both rows and columns.
pub fn render_mps(lp: &LinearProgram) -> Result<(String, BTreeMap<String, String>)> {
    let (row_names, row_map) = assign_names(lp.rows.iter().map(|r| r.name.as_str()), 'r')?;
    let (col_names, col_map) = assign_names(lp.columns.iter().map(|c| c.name.as_str()), 'x')?;
    let mut name_map = row_map;
    for (k, v) in col_map {
        if name_map.contains_key(&k) {
            return Err(Error::Solver(format!("row/column short-name clash '{k}'")));
        }
        name_map.insert(k, v);
    }

    let prog_name: String = lp
        .name
        .chars()
        .filter(|c| c.is_ascii_graphic())
        .take(8)
        .collect();
    let mut out = String::new();
    writeln!(out, "NAME          {prog_name}").unwrap();
    writeln!(out, "ROWS").unwrap();
    writeln!(out, " N  COST").unwrap();
    for (row, short) in lp.rows.iter().zip(&row_names) {
        let tag = match row.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        writeln!(out, " {tag}  {short}").unwrap();
    }

    // COLUMNS wants entries grouped by column; gather row coefficients
    // column-wise first.
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.columns.len()];
    for (i, row) in lp.rows.iter().enumerate() {
        for (j, v) in &row.coeffs {
            if *v != 0.0 {
                by_col[*j].push((i, *v));
            }
        }
    }

    writeln!(out, "COLUMNS").unwrap();
    for (j, col) in lp.columns.iter().enumerate() {
        let cname = &col_names[j];
        let mut entries: Vec<(String, f64)> = Vec::new();
        if col.obj != 0.0 {
            entries.push(("COST".to_string(), col.obj));
        }
        for (i, v) in &by_col[j] {
            entries.push((row_names[*i].clone(), *v));
        }
        if entries.is_empty() {
            // Keep the column present so bounds below stay valid.
            entries.push(("COST".to_string(), 0.0));
        }
        for pair in entries.chunks(2) {
            let mut line = format!("    {cname:<8}  {:<8}  {:>12}", pair[0].0, fmt_value(pair[0].1));
            if let Some(second) = pair.get(1) {
                write!(line, "   {:<8}  {:>12}", second.0, fmt_value(second.1)).unwrap();
            }
            writeln!(out, "{}", line.trim_end()).unwrap();
        }
    }

    writeln!(out, "RHS").unwrap();
    for (i, row) in lp.rows.iter().enumerate() {
        if row.rhs != 0.0 {
            writeln!(
                out,
                "    RHS       {:<8}  {:>12}",
                row_names[i],
                fmt_value(row.rhs)
            )
            .unwrap();
        }
    }

    writeln!(out, "BOUNDS").unwrap();
    for (j, col) in lp.columns.iter().enumerate() {
        let cname = &col_names[j];
        let lower_default = col.lower == 0.0;
        let upper_default = col.upper.is_infinite() && col.upper > 0.0;
        if lower_default && upper_default {
            continue;
        }
        if col.lower.is_finite() && col.upper.is_finite() && col.lower == col.upper {
            writeln!(out, " FX BND       {cname:<8}  {:>12}", fmt_value(col.lower)).unwrap();
            continue;
        }
        if !col.lower.is_finite() && !col.upper.is_finite() {
            writeln!(out, " FR BND       {cname:<8}").unwrap();
            continue;
        }
        if !col.lower.is_finite() {
            writeln!(out, " MI BND       {cname:<8}").unwrap();
        } else if !lower_default {
            writeln!(out, " LO BND       {cname:<8}  {:>12}", fmt_value(col.lower)).unwrap();
        }
        if col.upper.is_finite() {
            writeln!(out, " UP BND       {cname:<8}  {:>12}", fmt_value(col.upper)).unwrap();
        }
    }
    writeln!(out, "ENDATA").unwrap();
    Ok((out, name_map))
}

/// Writes `<stem>.mps` and `<stem>.names.json` (short name -> original).
pub fn export_mps(lp: &LinearProgram, stem: &Path) -> Result<()> {
    let (body, name_map) = render_mps(lp)?;
    let mps_path = stem.with_extension("mps");
    let map_path = stem.with_extension("names.json");
    std::fs::write(&mps_path, body)?;
    let map_json = serde_json::to_string_pretty(&name_map)?;
    std::fs::write(&map_path, map_json + "\n")?;
    Ok(())
}

/// Parses fixed-format MPS (the subset this crate emits) back into a
/// [`LinearProgram`] for round-trip verification.
pub fn parse_mps(text: &str) -> Result<LinearProgram> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Rows,
        Columns,
        Rhs,
        Bounds,
        Done,
    }
    let mut lp = LinearProgram::new("parsed");
    let mut section = Section::None;
    let mut row_sense: BTreeMap<String, Sense> = BTreeMap::new();
    let mut row_order: Vec<String> = Vec::new();
    let mut obj_row: Option<String> = None;
    let mut col_entries: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    let mut col_order: Vec<String> = Vec::new();
    let mut rhs: BTreeMap<String, f64> = BTreeMap::new();
    let mut bounds: BTreeMap<String, (f64, f64)> = BTreeMap::new();

    let parse_num = |tok: &str| -> Result<f64> {
        tok.parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad MPS number '{tok}': {e}")))
    };

    for raw in text.lines() {
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let indicator = !raw.starts_with(' ');
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if indicator {
            section = match tokens[0] {
                "NAME" => {
                    if let Some(n) = tokens.get(1) {
                        lp.name = n.to_string();
                    }
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => {
                    return Err(Error::Parse("RANGES section is not supported".into()))
                }
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::Done,
                other => return Err(Error::Parse(format!("unknown MPS section '{other}'"))),
            };
            continue;
        }
        match section {
            Section::Rows => {
                if tokens.len() != 2 {
                    return Err(Error::Parse(format!("bad ROWS line: '{raw}'")));
                }
                let name = tokens[1].to_string();
                match tokens[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(name);
                        }
                    }
                    "L" => {
                        row_sense.insert(name.clone(), Sense::Le);
                        row_order.push(name);
                    }
                    "G" => {
                        row_sense.insert(name.clone(), Sense::Ge);
                        row_order.push(name);
                    }
                    "E" => {
                        row_sense.insert(name.clone(), Sense::Eq);
                        row_order.push(name);
                    }
                    other => return Err(Error::Parse(format!("bad row type '{other}'"))),
                }
            }
            Section::Columns => {
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(Error::Parse(format!("bad COLUMNS line: '{raw}'")));
                }
                let col = tokens[0].to_string();
                if !col_entries.contains_key(&col) {
                    col_order.push(col.clone());
                    col_entries.insert(col.clone(), Vec::new());
                }
                let entries = col_entries.get_mut(&col).unwrap();
                entries.push((tokens[1].to_string(), parse_num(tokens[2])?));
                if tokens.len() == 5 {
                    entries.push((tokens[3].to_string(), parse_num(tokens[4])?));
                }
            }
            Section::Rhs => {
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(Error::Parse(format!("bad RHS line: '{raw}'")));
                }
                rhs.insert(tokens[1].to_string(), parse_num(tokens[2])?);
                if tokens.len() == 5 {
                    rhs.insert(tokens[3].to_string(), parse_num(tokens[4])?);
                }
            }
            Section::Bounds => {
                let kind = tokens[0];
                let col = tokens
                    .get(2)
                    .ok_or_else(|| Error::Parse(format!("bad BOUNDS line: '{raw}'")))?
                    .to_string();
                let entry = bounds.entry(col).or_insert((0.0, f64::INFINITY));
                match kind {
                    "LO" => entry.0 = parse_num(tokens[3])?,
                    "UP" => entry.1 = parse_num(tokens[3])?,
                    "FX" => {
                        let v = parse_num(tokens[3])?;
                        *entry = (v, v);
                    }
                    "FR" => *entry = (f64::NEG_INFINITY, f64::INFINITY),
                    "MI" => entry.0 = f64::NEG_INFINITY,
                    "PL" => entry.1 = f64::INFINITY,
                    other => return Err(Error::Parse(format!("bound type '{other}' unsupported"))),
                }
            }
            Section::None | Section::Done => {
                return Err(Error::Parse(format!("data outside a section: '{raw}'")))
            }
        }
    }
    if section != Section::Done {
        return Err(Error::Parse("missing ENDATA".into()));
    }
    let obj_row = obj_row.ok_or_else(|| Error::Parse("no objective (N) row".into()))?;

    let mut row_coeffs: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for name in &col_order {
        let (lower, upper) = bounds.get(name).copied().unwrap_or((0.0, f64::INFINITY));
        let mut obj = 0.0;
        let j = lp.add_column(name, lower, upper, 0.0);
        for (row, v) in &col_entries[name] {
            if *row == obj_row {
                obj += v;
            } else {
                if !row_sense.contains_key(row) {
                    return Err(Error::Parse(format!("coefficient for unknown row '{row}'")));
                }
                row_coeffs.entry(row.clone()).or_default().push((j, *v));
            }
        }
        lp.columns[j].obj = obj;
    }
    for name in &row_order {
        let coeffs = row_coeffs.remove(name).unwrap_or_default();
        lp.add_row(
            name,
            coeffs,
            row_sense[name],
            rhs.get(name).copied().unwrap_or(0.0),
        );
    }
    lp.validate()?;
    Ok(lp)
}

/// Maps short MPS names in an external solution back to original names.
pub fn translate_solution(
    values: &BTreeMap<String, f64>,
    name_map: &BTreeMap<String, String>,
) -> BTreeMap<String, f64> {
    values
        .iter()
        .map(|(k, v)| {
            let name = name_map.get(k).cloned().unwrap_or_else(|| k.clone());
            (name, *v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{solve, SolveStatus, Tolerances};

    fn sample_lp() -> LinearProgram {
        let mut lp = LinearProgram::new("sample");
        let x = lp.add_column("x", 0.0, f64::INFINITY, 2.0);
        let y = lp.add_column("a_rather_long_column_name", -1.0, 4.0, -1.0);
        let z = lp.add_column("z_free", f64::NEG_INFINITY, f64::INFINITY, 0.5);
        lp.add_row("supply", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 2.0);
        lp.add_row(
            "an_exceedingly_long_row_name",
            vec![(y, 2.0), (z, -1.0)],
            Sense::Le,
            3.0,
        );
        lp.add_row("pin", vec![(z, 1.0), (x, 0.25)], Sense::Eq, 1.0);
        lp
    }

    #[test]
    fn golden_tiny_export() {
        let mut lp = LinearProgram::new("tiny");
        let x = lp.add_column("x", 0.0, f64::INFINITY, -1.0);
        lp.add_row("cap", vec![(x, 1.0)], Sense::Le, 5.0);
        let (body, map) = render_mps(&lp).unwrap();
        let expected = "\
NAME          tiny
ROWS
 N  COST
 L  cap
COLUMNS
    x         COST         -1.000000   cap           1.000000
RHS
    RHS       cap           5.000000
BOUNDS
ENDATA
";
        assert_eq!(body, expected);
        assert_eq!(map.get("x").map(String::as_str), Some("x"));
        assert_eq!(map.get("cap").map(String::as_str), Some("cap"));
    }

    #[test]
    fn long_names_hash_to_eight_chars() {
        let (body, map) = render_mps(&sample_lp()).unwrap();
        for line in body.lines() {
            for tok in line.split_whitespace().skip(1) {
                if tok.parse::<f64>().is_err() {
                    assert!(tok.len() <= 8, "token '{tok}' exceeds 8 chars");
                }
            }
        }
        assert!(map
            .values()
            .any(|v| v == "a_rather_long_column_name"));
        assert!(map.values().any(|v| v == "an_exceedingly_long_row_name"));
    }

    #[test]
    fn round_trip_preserves_optimum() {
        let lp = sample_lp();
        let (body, map) = render_mps(&lp).unwrap();
        let parsed = parse_mps(&body).unwrap();
        let tol = Tolerances::default();
        let a = solve(&lp, &tol).unwrap();
        let b = solve(&parsed, &tol).unwrap();
        assert_eq!(a.status, SolveStatus::Optimal);
        assert_eq!(b.status, SolveStatus::Optimal);
        assert!(
            (a.objective - b.objective).abs() <= 1e-6 * (1.0 + a.objective.abs()),
            "objectives diverge: {} vs {}",
            a.objective,
            b.objective
        );
        // Per-column values agree after translating short names back.
        let by_name: BTreeMap<String, f64> = b
            .col_names
            .iter()
            .zip(&b.primal)
            .map(|(n, v)| (map[n].clone(), *v))
            .collect();
        for (name, v) in a.col_names.iter().zip(&a.primal) {
            assert!((by_name[name] - v).abs() < 1e-6, "column {name} differs");
        }
    }

    #[test]
    fn bounds_survive_round_trip() {
        let mut lp = LinearProgram::new("b");
        lp.add_column("fixed", 3.0, 3.0, 1.0);
        lp.add_column("boxed", -2.0, 7.0, 0.0);
        lp.add_column("free", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_column("default", 0.0, f64::INFINITY, 0.0);
        let j = 0;
        lp.add_row("touch", vec![(j, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)], Sense::Ge, 0.0);
        let (body, _) = render_mps(&lp).unwrap();
        let parsed = parse_mps(&body).unwrap();
        let find = |n: &str| {
            let j = parsed.column_index(n).unwrap();
            (parsed.columns[j].lower, parsed.columns[j].upper)
        };
        assert_eq!(find("fixed"), (3.0, 3.0));
        assert_eq!(find("boxed"), (-2.0, 7.0));
        assert_eq!(find("free"), (f64::NEG_INFINITY, f64::INFINITY));
        assert_eq!(find("default"), (0.0, f64::INFINITY));
    }
}
