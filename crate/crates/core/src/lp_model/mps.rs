//! MPS reader and writer.
//!
//! Supports NAME, ROWS, COLUMNS, RHS, BOUNDS, ENDATA and an optional OBJSENSE
//! section. Lines are split on whitespace; when that yields an unexpected number
//! of fields the fixed-format column layout is tried instead. Integrality
//! markers are skipped, so MIP files load as their LP relaxation.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{BoundSide, ImpliedBound, InputLp, DEFAULT_BIG_BOUND};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpsOptions {
    /// Magnitude substituted for infinite bounds.
    pub big_bound: f64,
    /// Treat the objective as maximized when the file has no OBJSENSE section.
    pub maximize: bool,
}

impl Default for MpsOptions {
    fn default() -> Self {
        MpsOptions {
            big_bound: DEFAULT_BIG_BOUND,
            maximize: false,
        }
    }
}

/// Parses MPS text with default options (minimize, big bound `1e4`).
pub fn parse_mps<T: Scalar>(text: &str) -> Result<InputLp<T>> {
    parse_mps_with(text, &MpsOptions::default())
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    ObjSense,
}

#[derive(Clone, Copy, PartialEq)]
enum RowType {
    L,
    G,
}

fn syntax(line: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        message: message.into(),
    }
}

fn number(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| syntax(line, format!("invalid number `{tok}`")))
}

/// Fixed-format fields: 2-3, 5-12, 15-22, 25-36, 40-47, 50-61 (1-based).
fn fixed_fields(line: &str) -> Vec<String> {
    const SPANS: [(usize, usize); 6] = [(1, 3), (4, 12), (14, 22), (24, 36), (39, 47), (49, 61)];
    let bytes = line.as_bytes();
    SPANS
        .iter()
        .filter(|(s, _)| *s < bytes.len())
        .map(|&(s, e)| String::from_utf8_lossy(&bytes[s..e.min(bytes.len())]).trim().to_owned())
        .collect::<Vec<_>>()
}

/// Splits a data line, falling back to fixed columns when the free split does
/// not produce one of the accepted field counts.
fn fields(line: &str, accept: &[usize], has_code: bool) -> Vec<String> {
    let free: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
    if accept.contains(&free.len()) {
        return free;
    }
    let mut fixed = fixed_fields(line);
    if !has_code && !fixed.is_empty() {
        fixed.remove(0);
    }
    while fixed.last().is_some_and(String::is_empty) {
        fixed.pop();
    }
    if accept.contains(&fixed.len()) {
        fixed
    } else {
        free
    }
}

pub fn parse_mps_with<T: Scalar>(text: &str, opts: &MpsOptions) -> Result<InputLp<T>> {
    let mut name = String::new();
    let mut section = Section::None;
    let mut maximize = opts.maximize;
    let mut objective_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut row_types: Vec<RowType> = Vec::new();
    let mut row_names: Vec<String> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut col_names: Vec<String> = Vec::new();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut cost: Vec<f64> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut lower: Vec<f64> = Vec::new();
    let mut upper: Vec<Option<f64>> = Vec::new();
    let mut lower_inf: Vec<bool> = Vec::new();
    let mut saw_end = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        if !line.starts_with([' ', '\t']) {
            let mut toks = line.split_whitespace();
            let head = toks.next().unwrap_or_default().to_ascii_uppercase();
            section = match head.as_str() {
                "NAME" => {
                    name = toks.collect::<Vec<_>>().join(" ");
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "OBJSENSE" => {
                    if let Some(s) = toks.next() {
                        maximize = parse_sense(s, lineno)?;
                        Section::None
                    } else {
                        Section::ObjSense
                    }
                }
                "RANGES" => return Err(Error::Unsupported("RANGES section".into())),
                "SOS" => return Err(Error::Unsupported("SOS section".into())),
                "ENDATA" => {
                    saw_end = true;
                    break;
                }
                other => return Err(syntax(lineno, format!("unknown section `{other}`"))),
            };
            continue;
        }

        match section {
            Section::None => return Err(syntax(lineno, "data line outside of any section")),
            Section::ObjSense => {
                let tok = line.split_whitespace().next().unwrap_or_default();
                maximize = parse_sense(tok, lineno)?;
            }
            Section::Rows => {
                let f = fields(line, &[2], true);
                if f.len() != 2 {
                    return Err(syntax(lineno, "ROWS entry needs a type and a name"));
                }
                let (kind, rname) = (f[0].to_ascii_uppercase(), f[1].clone());
                if row_index.contains_key(&rname) || objective_row.as_deref() == Some(rname.as_str()) {
                    return Err(syntax(lineno, format!("duplicate row `{rname}`")));
                }
                match kind.as_str() {
                    "N" => {
                        if objective_row.is_none() {
                            objective_row = Some(rname);
                        }
                    }
                    "L" | "G" => {
                        row_index.insert(rname.clone(), row_names.len());
                        row_names.push(rname);
                        row_types.push(if kind == "L" { RowType::L } else { RowType::G });
                        rhs.push(0.0);
                    }
                    "E" => return Err(Error::UnsupportedEquality(rname)),
                    other => return Err(syntax(lineno, format!("unknown row type `{other}`"))),
                }
            }
            Section::Columns => {
                if line.contains("'MARKER'") {
                    continue;
                }
                let f = fields(line, &[3, 5], false);
                if f.len() != 3 && f.len() != 5 {
                    return Err(syntax(lineno, "COLUMNS entry needs a column and row/value pairs"));
                }
                let col = match col_index.get(&f[0]) {
                    Some(&c) => c,
                    None => {
                        let c = col_names.len();
                        col_index.insert(f[0].clone(), c);
                        col_names.push(f[0].clone());
                        cost.push(0.0);
                        lower.push(0.0);
                        upper.push(None);
                        lower_inf.push(false);
                        c
                    }
                };
                for pair in f[1..].chunks(2) {
                    let v = number(&pair[1], lineno)?;
                    if objective_row.as_deref() == Some(pair[0].as_str()) {
                        cost[col] += v;
                    } else if let Some(&r) = row_index.get(&pair[0]) {
                        entries.push((r, col, v));
                    } else {
                        return Err(syntax(lineno, format!("unknown row `{}`", pair[0])));
                    }
                }
            }
            Section::Rhs => {
                let f = fields(line, &[2, 3, 4, 5], false);
                // The set name is optional; an even field count means it is absent.
                let pairs = if f.len() % 2 == 1 { &f[1..] } else { &f[..] };
                if pairs.is_empty() {
                    return Err(syntax(lineno, "RHS entry needs row/value pairs"));
                }
                for pair in pairs.chunks(2) {
                    if pair.len() != 2 {
                        return Err(syntax(lineno, "dangling RHS field"));
                    }
                    let v = number(&pair[1], lineno)?;
                    if objective_row.as_deref() == Some(pair[0].as_str()) {
                        continue;
                    }
                    let &r = row_index
                        .get(&pair[0])
                        .ok_or_else(|| syntax(lineno, format!("unknown row `{}`", pair[0])))?;
                    rhs[r] = v;
                }
            }
            Section::Bounds => {
                let f = fields(line, &[3, 4], true);
                if f.len() < 3 {
                    return Err(syntax(lineno, "BOUNDS entry too short"));
                }
                let kind = f[0].to_ascii_uppercase();
                match kind.as_str() {
                    "FX" => return Err(Error::Unsupported(format!("fixed bound in line {lineno}"))),
                    "BV" => return Err(Error::Unsupported(format!("binary bound in line {lineno}"))),
                    _ => {}
                }
                let needs_value = matches!(kind.as_str(), "UP" | "LO" | "LI" | "UI");
                // With a value the set name precedes the column; without one it is optional.
                let (cname, value) = match (needs_value, f.len()) {
                    (true, 4) => (&f[2], Some(number(&f[3], lineno)?)),
                    (true, 3) => (&f[1], Some(number(&f[2], lineno)?)),
                    (false, 3) => (&f[2], None),
                    (false, 2) => (&f[1], None),
                    _ => return Err(syntax(lineno, "malformed BOUNDS entry")),
                };
                let &c = col_index
                    .get(cname)
                    .ok_or_else(|| syntax(lineno, format!("unknown column `{cname}`")))?;
                match kind.as_str() {
                    "UP" | "UI" => upper[c] = value,
                    "LO" | "LI" => {
                        lower[c] = value.unwrap_or(0.0);
                        lower_inf[c] = false;
                    }
                    "MI" => lower_inf[c] = true,
                    "PL" => upper[c] = None,
                    "FR" => {
                        lower_inf[c] = true;
                        upper[c] = None;
                    }
                    other => return Err(syntax(lineno, format!("unknown bound type `{other}`"))),
                }
            }
        }
    }
    if !saw_end {
        return Err(syntax(text.lines().count(), "missing ENDATA"));
    }
    if col_names.is_empty() {
        return Err(Error::EmptyProblem);
    }

    let (n, d) = (row_names.len(), col_names.len());
    let big = opts.big_bound;
    let mut a = vec![vec![0.0_f64; d]; n];
    for (r, c, v) in entries {
        a[r][c] += v;
    }
    for i in 0..n {
        if row_types[i] == RowType::G {
            a[i].iter_mut().for_each(|x| *x = -*x);
            rhs[i] = -rhs[i];
        }
    }
    let mut implied_bounds = Vec::new();
    let mut lo = Vec::with_capacity(d);
    let mut hi = Vec::with_capacity(d);
    for j in 0..d {
        if lower_inf[j] {
            implied_bounds.push(ImpliedBound { col: j, side: BoundSide::Lower });
            lo.push(-big);
        } else {
            lo.push(lower[j]);
        }
        match upper[j] {
            Some(u) => hi.push(u),
            None => {
                implied_bounds.push(ImpliedBound { col: j, side: BoundSide::Upper });
                hi.push(big);
            }
        }
    }
    let sign = if maximize { 1.0 } else { -1.0 };
    let conv = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
    let rows: Vec<Vec<T>> = a.iter().map(|r| conv(r)).collect();
    let lp = InputLp {
        name,
        matrix: if n == 0 { Matrix::zeros(0, d) } else { Matrix::from_rows(&rows)? },
        rhs: conv(&rhs),
        lower: conv(&lo),
        upper: conv(&hi),
        objective: cost.iter().map(|&c| T::lit(sign * c)).collect(),
        row_names,
        col_names,
        implied_bounds,
    };
    lp.validate()?;
    Ok(lp)
}

fn parse_sense(tok: &str, line: usize) -> Result<bool> {
    match tok.to_ascii_uppercase().as_str() {
        "MAX" | "MAXIMIZE" => Ok(true),
        "MIN" | "MINIMIZE" => Ok(false),
        other => Err(syntax(line, format!("unknown objective sense `{other}`"))),
    }
}

/// Emits free-format MPS that [`parse_mps_with`] reads back to the same problem.
///
/// All rows are written as `L` rows, the objective as `MAX`, and bounds recorded
/// in `implied_bounds` as `MI`/`PL`.
pub fn write_mps<T: Scalar>(lp: &InputLp<T>) -> String {
    let mut out = String::new();
    let name = if lp.name.is_empty() { "LP" } else { lp.name.as_str() };
    let _ = writeln!(out, "NAME {name}");
    let _ = writeln!(out, "OBJSENSE\n    MAX");
    let _ = writeln!(out, "ROWS\n N  OBJ");
    for r in &lp.row_names {
        let _ = writeln!(out, " L  {r}");
    }
    let _ = writeln!(out, "COLUMNS");
    for (j, c) in lp.col_names.iter().enumerate() {
        let _ = writeln!(out, "    {c}  OBJ  {}", lp.objective[j]);
        for (i, r) in lp.row_names.iter().enumerate() {
            let v = lp.matrix[(i, j)];
            if v != T::zero() {
                let _ = writeln!(out, "    {c}  {r}  {v}");
            }
        }
    }
    let _ = writeln!(out, "RHS");
    for (i, r) in lp.row_names.iter().enumerate() {
        let _ = writeln!(out, "    RHS  {r}  {}", lp.rhs[i]);
    }
    let _ = writeln!(out, "BOUNDS");
    for (j, c) in lp.col_names.iter().enumerate() {
        let implied = |side| lp.implied_bounds.contains(&ImpliedBound { col: j, side });
        if implied(BoundSide::Lower) {
            let _ = writeln!(out, " MI BND  {c}");
        } else {
            let _ = writeln!(out, " LO BND  {c}  {}", lp.lower[j]);
        }
        if implied(BoundSide::Upper) {
            let _ = writeln!(out, " PL BND  {c}");
        } else {
            let _ = writeln!(out, " UP BND  {c}  {}", lp.upper[j]);
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "\
NAME          TINY
ROWS
 N  COST
 L  LIM1
COLUMNS
    X1        COST         1.0   LIM1         1.0
    X2        COST         1.0   LIM1         1.0
RHS
    RHS       LIM1         1.0
BOUNDS
 UP BND       X1           1.0
 UP BND       X2           1.0
ENDATA
";

    #[test]
    fn parses_minimal_file() {
        let lp: InputLp<f64> = parse_mps(TINY).unwrap();
        assert_eq!(lp.name, "TINY");
        assert_eq!((lp.num_rows(), lp.num_cols()), (1, 2));
        assert_eq!(lp.matrix.to_rows(), vec![vec![1.0, 1.0]]);
        assert_eq!(lp.rhs, vec![1.0]);
        assert_eq!(lp.lower, vec![0.0, 0.0]);
        assert_eq!(lp.upper, vec![1.0, 1.0]);
        // minimize by default, so the max-form objective is negated
        assert_eq!(lp.objective, vec![-1.0, -1.0]);
        assert!(lp.implied_bounds.is_empty());
    }

    #[test]
    fn greater_equal_rows_are_negated() {
        let text = TINY.replace(" L  LIM1", " G  LIM1").replace("LIM1         1.0\nBOUNDS", "LIM1        -1.0\nBOUNDS");
        let lp: InputLp<f64> = parse_mps(&text).unwrap();
        assert_eq!(lp.matrix.to_rows(), vec![vec![-1.0, -1.0]]);
        assert_eq!(lp.rhs, vec![1.0]);
    }

    #[test]
    fn equality_rows_are_rejected() {
        let text = TINY.replace(" L  LIM1", " E  LIM1");
        assert_eq!(
            parse_mps::<f64>(&text).unwrap_err(),
            Error::UnsupportedEquality("LIM1".into())
        );
    }

    #[test]
    fn missing_bounds_use_big_bound() {
        let text = TINY.replace(" UP BND       X2           1.0\n", " FR BND       X2\n");
        let lp: InputLp<f64> = parse_mps(&text).unwrap();
        assert_eq!(lp.lower[1], -1e4);
        assert_eq!(lp.upper[1], 1e4);
        assert_eq!(lp.implied_bounds.len(), 2);
        let opts = MpsOptions { big_bound: 50.0, ..Default::default() };
        let lp: InputLp<f64> = parse_mps_with(&text, &opts).unwrap();
        assert_eq!(lp.upper[1], 50.0);
    }

    #[test]
    fn rejects_unsupported_and_malformed() {
        assert!(matches!(
            parse_mps::<f64>(&TINY.replace("BOUNDS", "RANGES")),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            parse_mps::<f64>(&TINY.replace(" UP BND       X2", " FX BND       X2")),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            parse_mps::<f64>(&TINY.replace(" UP BND       X1", " BV BND       X1")),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            parse_mps::<f64>(&TINY.replace("X2        COST         1.0", "X2        COST         abc")),
            Err(Error::Syntax { line: 7, .. })
        ));
        assert!(matches!(parse_mps::<f64>(&TINY.replace("ENDATA\n", "")), Err(Error::Syntax { .. })));
        let empty = "NAME E\nROWS\n N  COST\nCOLUMNS\nRHS\nENDATA\n";
        assert_eq!(parse_mps::<f64>(empty).unwrap_err(), Error::EmptyProblem);
    }

    #[test]
    fn objsense_and_markers() {
        let text = TINY
            .replace("ROWS\n", "OBJSENSE\n    MAX\nROWS\n")
            .replace("COLUMNS\n", "COLUMNS\n    MARKER                 'MARKER'                 'INTORG'\n");
        let lp: InputLp<f64> = parse_mps(&text).unwrap();
        assert_eq!(lp.objective, vec![1.0, 1.0]);
    }

    fn fixed_line(code: &str, f: [&str; 5]) -> String {
        format!(" {code:<2} {:<8}  {:<8}  {:>12}   {:<8}  {:>12}", f[0], f[1], f[2], f[3], f[4])
            .trim_end()
            .to_owned()
    }

    #[test]
    fn fixed_format_column_names_with_spaces() {
        let text = [
            "NAME          FIXED".to_owned(),
            "ROWS".to_owned(),
            " N  COST".to_owned(),
            " L  LIM1".to_owned(),
            "COLUMNS".to_owned(),
            fixed_line("", ["X 1", "COST", "2.0", "LIM1", "1.0"]),
            "RHS".to_owned(),
            fixed_line("", ["RHS", "LIM1", "4.0", "", ""]),
            "BOUNDS".to_owned(),
            fixed_line("UP", ["BND", "X 1", "3.0", "", ""]),
            "ENDATA".to_owned(),
        ]
        .join("\n");
        let lp: InputLp<f64> = parse_mps(&text).unwrap();
        assert_eq!(lp.col_names, vec!["X 1".to_string()]);
        assert_eq!(lp.objective, vec![-2.0]);
        assert_eq!(lp.rhs, vec![4.0]);
        assert_eq!(lp.upper, vec![3.0]);
    }

    #[test]
    fn writer_round_trips() {
        let text = TINY.replace(" UP BND       X2           1.0\n", " MI BND       X2\n");
        let lp: InputLp<f64> = parse_mps(&text).unwrap();
        let again: InputLp<f64> = parse_mps(&write_mps(&lp)).unwrap();
        assert_eq!(lp, again);
    }
}
