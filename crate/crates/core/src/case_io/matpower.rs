//! Reader for the subset of the Matpower case format needed for shutoff
//! studies: `mpc.baseMVA`, `mpc.bus`, `mpc.gen` and `mpc.branch`.
//!
//! Consumed columns (1-based, standard Matpower layout):
//! bus 1 `BUS_I`, 3 `PD`; gen 1 `GEN_BUS`, 8 `STATUS`, 9 `PMAX`, 10 `PMIN`;
//! branch 1-2 `F_BUS`/`T_BUS`, 4 `X`, 6 `RATE_A`, 11 `STATUS`.
//! Everything else is read and discarded.
//!
//! Id conventions: buses keep `BUS_I`; lines and generators are numbered by
//! their 1-based row in `mpc.branch` / `mpc.gen` (out-of-service rows keep
//! their number but are skipped); a load carries the id of its bus.

use std::collections::BTreeMap;

use super::CaseError;
use crate::network::{Bus, Generator, Line, LoadPoint, Network, DEFAULT_ANGLE_DIFF_CAP};

/// `RATE_A = 0` means unlimited; it is replaced by this multiple of total demand.
pub const UNLIMITED_RATING_FACTOR: f64 = 100.0;

const BUS_I: usize = 0;
const PD: usize = 2;
const GEN_BUS: usize = 0;
const GEN_STATUS: usize = 7;
const PMAX: usize = 8;
const PMIN: usize = 9;
const F_BUS: usize = 0;
const T_BUS: usize = 1;
const BR_X: usize = 3;
const RATE_A: usize = 5;
const BR_STATUS: usize = 10;

/// Raw numeric content of a case file.
#[derive(Clone, Debug, PartialEq)]
pub struct MatpowerCase {
    pub base_mva: f64,
    pub bus_rows: Vec<Vec<f64>>,
    pub gen_rows: Vec<Vec<f64>>,
    pub branch_rows: Vec<Vec<f64>>,
}

#[derive(Clone, Copy)]
struct Ch {
    c: char,
    line: usize,
    col: usize,
}

struct Cursor {
    chars: Vec<Ch>,
    pos: usize,
}

impl Cursor {
    fn new(text: &str) -> Self {
        let mut chars = Vec::with_capacity(text.len());
        for (lineno, line) in text.lines().enumerate() {
            let mut in_string = false;
            for (colno, c) in line.chars().enumerate() {
                if c == '\'' {
                    in_string = !in_string;
                }
                if c == '%' && !in_string {
                    break;
                }
                chars.push(Ch {
                    c,
                    line: lineno + 1,
                    col: colno + 1,
                });
            }
            chars.push(Ch {
                c: '\n',
                line: lineno + 1,
                col: line.chars().count() + 1,
            });
        }
        Self { chars, pos: 0 }
    }

    fn peek(&self) -> Option<Ch> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<Ch> {
        let ch = self.peek();
        self.pos += 1;
        ch
    }

    fn skip_blank(&mut self, newlines: bool) {
        while let Some(ch) = self.peek() {
            if ch.c == ' ' || ch.c == '\t' || ch.c == '\r' || (newlines && ch.c == '\n') {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars()
            .enumerate()
            .all(|(i, c)| self.chars.get(self.pos + i).map(|ch| ch.c) == Some(c))
    }

    fn at_word_boundary(&self) -> bool {
        self.pos == 0
            || self
                .chars
                .get(self.pos - 1)
                .map(|ch| !(ch.c.is_alphanumeric() || ch.c == '_' || ch.c == '.'))
                .unwrap_or(true)
    }

    fn ident(&mut self) -> String {
        let mut out = String::new();
        while let Some(ch) = self.peek() {
            if ch.c.is_alphanumeric() || ch.c == '_' {
                out.push(ch.c);
                self.pos += 1;
            } else {
                break;
            }
        }
        out
    }

    fn syntax(&self, msg: impl Into<String>) -> CaseError {
        let (line, col) = self
            .peek()
            .or_else(|| self.chars.last().copied())
            .map(|ch| (ch.line, ch.col))
            .unwrap_or((1, 1));
        CaseError::Syntax {
            line,
            col,
            message: msg.into(),
        }
    }

    /// Skips a value that is not consumed, honouring nested brackets.
    fn skip_value(&mut self) {
        let mut depth = 0i32;
        let mut in_string = false;
        while let Some(ch) = self.bump() {
            match ch.c {
                '\'' => in_string = !in_string,
                '[' | '{' if !in_string => depth += 1,
                ']' | '}' if !in_string => depth -= 1,
                ';' if !in_string && depth <= 0 => return,
                '\n' if depth <= 0 && !in_string => return,
                _ => {}
            }
        }
    }

    fn token(&mut self) -> (String, usize, usize) {
        let start = self.peek().map(|ch| (ch.line, ch.col)).unwrap_or((0, 0));
        let mut out = String::new();
        while let Some(ch) = self.peek() {
            if ch.c.is_whitespace() || matches!(ch.c, ',' | ';' | ']') {
                break;
            }
            out.push(ch.c);
            self.pos += 1;
        }
        (out, start.0, start.1)
    }

    fn number(&mut self) -> Result<f64, CaseError> {
        let (tok, line, col) = self.token();
        tok.parse::<f64>().map_err(|_| CaseError::NonNumeric {
            token: tok,
            line,
            col,
        })
    }

    fn matrix(&mut self) -> Result<Vec<Vec<f64>>, CaseError> {
        // Opening bracket already consumed.
        let mut rows = Vec::new();
        let mut row = Vec::new();
        loop {
            self.skip_blank(false);
            let Some(ch) = self.peek() else {
                return Err(self.syntax("unterminated matrix"));
            };
            match ch.c {
                ']' => {
                    self.pos += 1;
                    if !row.is_empty() {
                        rows.push(std::mem::take(&mut row));
                    }
                    return Ok(rows);
                }
                ';' | '\n' => {
                    self.pos += 1;
                    if !row.is_empty() {
                        rows.push(std::mem::take(&mut row));
                    }
                }
                ',' => self.pos += 1,
                '.' if self.starts_with("...") => {
                    // line continuation
                    while let Some(ch) = self.bump() {
                        if ch.c == '\n' {
                            break;
                        }
                    }
                }
                _ => row.push(self.number()?),
            }
        }
    }
}

/// Parses the raw matrices of a Matpower case.
pub fn parse_matpower_case(text: &str) -> Result<MatpowerCase, CaseError> {
    let mut cur = Cursor::new(text);
    let mut base_mva = None;
    let mut matrices: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();

    while cur.peek().is_some() {
        if cur.starts_with("mpc.") && cur.at_word_boundary() {
            cur.pos += 4;
            let name = cur.ident();
            cur.skip_blank(false);
            if cur.peek().map(|c| c.c) != Some('=') {
                cur.skip_value();
                continue;
            }
            cur.pos += 1;
            cur.skip_blank(true);
            match name.as_str() {
                "baseMVA" => {
                    base_mva = Some(cur.number()?);
                    cur.skip_value();
                }
                "bus" | "gen" | "branch" => {
                    if cur.peek().map(|c| c.c) != Some('[') {
                        return Err(cur.syntax(format!("expected '[' after mpc.{name} =")));
                    }
                    cur.pos += 1;
                    let rows = cur.matrix()?;
                    matrices.insert(name, rows);
                    cur.skip_value();
                }
                _ => cur.skip_value(),
            }
        } else {
            cur.pos += 1;
        }
    }

    let base_mva = base_mva.ok_or_else(|| CaseError::MissingMatrix("mpc.baseMVA".into()))?;
    let mut take = |name: &str, min_cols: usize| -> Result<Vec<Vec<f64>>, CaseError> {
        let rows = matrices
            .remove(name)
            .ok_or_else(|| CaseError::MissingMatrix(format!("mpc.{name}")))?;
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(CaseError::Data(format!("mpc.{name} is not rectangular")));
            }
            if first.len() < min_cols {
                return Err(CaseError::Data(format!(
                    "mpc.{name} has {} columns, at least {min_cols} required",
                    first.len()
                )));
            }
        }
        Ok(rows)
    };
    let bus_rows = take("bus", PD + 1)?;
    let gen_rows = take("gen", PMIN + 1)?;
    let branch_rows = take("branch", BR_STATUS + 1)?;
    Ok(MatpowerCase {
        base_mva,
        bus_rows,
        gen_rows,
        branch_rows,
    })
}

fn as_id(value: f64, what: &str) -> Result<u32, CaseError> {
    if value.fract() != 0.0 || value < 1.0 || value > u32::MAX as f64 {
        return Err(CaseError::Data(format!("{what}: {value} is not a positive integer id")));
    }
    Ok(value as u32)
}

impl MatpowerCase {
    pub fn into_network(self) -> Result<Network, CaseError> {
        let base = self.base_mva;
        if !(base > 0.0) || !base.is_finite() {
            return Err(CaseError::Data(format!("baseMVA {base} must be positive")));
        }
        let mut buses = Vec::with_capacity(self.bus_rows.len());
        let mut loads = Vec::new();
        for (row_no, row) in self.bus_rows.iter().enumerate() {
            let id = as_id(row[BUS_I], &format!("bus row {}", row_no + 1))?;
            buses.push(Bus { id, name: None });
            if row[PD] > 0.0 {
                loads.push(LoadPoint {
                    id,
                    bus: id,
                    demand: row[PD] / base,
                });
            }
        }
        let total_demand: f64 = loads.iter().map(|l| l.demand).sum();

        let mut generators = Vec::new();
        for (row_no, row) in self.gen_rows.iter().enumerate() {
            if row[GEN_STATUS] == 0.0 {
                continue;
            }
            let id = (row_no + 1) as u32;
            generators.push(Generator {
                id,
                bus: as_id(row[GEN_BUS], &format!("gen row {id}"))?,
                p_min: row[PMIN].max(0.0) / base,
                p_max: row[PMAX] / base,
                flex: 1.0,
            });
        }

        let mut lines = Vec::new();
        for (row_no, row) in self.branch_rows.iter().enumerate() {
            if row[BR_STATUS] == 0.0 {
                continue;
            }
            let id = (row_no + 1) as u32;
            let x = row[BR_X];
            if !(x > 0.0) {
                return Err(CaseError::Data(format!(
                    "branch {id}: reactance X = {x} must be positive"
                )));
            }
            let rate = row[RATE_A];
            let thermal_limit = if rate == 0.0 {
                UNLIMITED_RATING_FACTOR * total_demand
            } else {
                rate / base
            };
            lines.push(Line {
                id,
                from_bus: as_id(row[F_BUS], &format!("branch {id} from bus"))?,
                to_bus: as_id(row[T_BUS], &format!("branch {id} to bus"))?,
                susceptance: 1.0 / x,
                thermal_limit,
                risk: 0.0,
                angle_diff_cap: DEFAULT_ANGLE_DIFF_CAP,
            });
        }

        let network = Network {
            base_mva: base,
            buses,
            lines,
            generators,
            loads,
        };
        let report = network.validate();
        if !report.is_empty() {
            return Err(CaseError::Invalid(report));
        }
        Ok(network)
    }
}

/// Parses Matpower text straight into a validated [`Network`].
pub fn parse_matpower(text: &str) -> Result<Network, CaseError> {
    parse_matpower_case(text)?.into_network()
}

/// Renders a network as a minimal Matpower case (used for fixtures and
/// export). Risk and angle caps are not representable and are dropped.
pub fn write_matpower(network: &Network) -> String {
    use std::fmt::Write;
    let base = network.base_mva;
    let mut demand: BTreeMap<u32, f64> = BTreeMap::new();
    for load in &network.loads {
        *demand.entry(load.bus).or_default() += load.demand;
    }
    let mut out = String::new();
    let _ = writeln!(out, "function mpc = psps_export");
    let _ = writeln!(out, "mpc.version = '2';");
    let _ = writeln!(out, "mpc.baseMVA = {base};");
    let _ = writeln!(out, "mpc.bus = [");
    for bus in &network.buses {
        let pd = demand.get(&bus.id).copied().unwrap_or(0.0) * base;
        let _ = writeln!(out, "\t{}\t1\t{pd}\t0\t0\t0\t1\t1\t0\t345\t1\t1.1\t0.9;", bus.id);
    }
    let _ = writeln!(out, "];");
    let _ = writeln!(out, "mpc.gen = [");
    for gen in &network.generators {
        let _ = writeln!(
            out,
            "\t{}\t0\t0\t0\t0\t1\t{base}\t1\t{}\t{};",
            gen.bus,
            gen.p_max * base,
            gen.p_min * base
        );
    }
    let _ = writeln!(out, "];");
    let _ = writeln!(out, "mpc.branch = [");
    for line in &network.lines {
        let _ = writeln!(
            out,
            "\t{}\t{}\t0\t{}\t0\t{}\t0\t0\t0\t0\t1\t-360\t360;",
            line.from_bus,
            line.to_bus,
            1.0 / line.susceptance,
            line.thermal_limit * base
        );
    }
    let _ = writeln!(out, "];");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tri3;

    const TRI3_M: &str = "function mpc = tri3
% three bus triangle
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	345	1	1.1	0.9;
	2	1	100	0	0	0	1	1	0	345	1	1.1	0.9;
	3	1	50	0	0	0	1	1	0	345	1	1.1	0.9;
];
mpc.gen = [
	1	0	0	0	0	1	100	1	200	0;
];
mpc.branch = [
	1	2	0	0.1	0	150	150	150	0	0	1	-360	360;
	1	3	0	0.1	0	150	150	150	0	0	1	-360	360;
	2	3	0	0.1	0	150	150	150	0	0	1	-360	360;
];
mpc.gencost = [ 2 0 0 3 0.01 0.3 0.2 ];
";

    #[test]
    fn tri3_text_converts_to_per_unit() {
        let net = parse_matpower(TRI3_M).unwrap();
        let mut expected = tri3();
        for line in &mut expected.lines {
            line.risk = 0.0;
        }
        assert_eq!(net.buses, expected.buses);
        assert_eq!(net.loads, expected.loads);
        assert_eq!(net.generators, expected.generators);
        for (a, b) in net.lines.iter().zip(&expected.lines) {
            assert_eq!((a.id, a.from_bus, a.to_bus), (b.id, b.from_bus, b.to_bus));
            assert!((a.susceptance - b.susceptance).abs() < 1e-12);
            assert!((a.thermal_limit - b.thermal_limit).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_bus_matrix() {
        let err = parse_matpower("mpc.baseMVA = 100;").unwrap_err();
        assert_eq!(err.to_string(), "missing mpc.bus");
    }

    #[test]
    fn non_numeric_token_reports_position() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n 1 1 abc;\n];";
        match parse_matpower(text).unwrap_err() {
            CaseError::NonNumeric { token, line, col } => {
                assert_eq!(token, "abc");
                assert_eq!((line, col), (3, 6));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nonpositive_reactance_names_branch() {
        let text = TRI3_M.replace("2\t3\t0\t0.1", "2\t3\t0\t0");
        let err = parse_matpower(&text).unwrap_err();
        assert!(err.to_string().contains("branch 3"), "{err}");
    }

    #[test]
    fn unlimited_rating_uses_demand_multiple() {
        let text = TRI3_M.replace("1\t3\t0\t0.1\t0\t150", "1\t3\t0\t0.1\t0\t0");
        let net = parse_matpower(&text).unwrap();
        assert!((net.lines[1].thermal_limit - 150.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_service_rows_are_skipped() {
        let text = TRI3_M.replace("0\t0\t1\t-360", "0\t0\t0\t-360");
        let net = parse_matpower(&text).unwrap();
        assert!(net.lines.is_empty());
    }

    #[test]
    fn export_round_trips_topology() {
        let net = parse_matpower(&write_matpower(&tri3())).unwrap();
        assert_eq!(net.lines.len(), 3);
        assert!((net.total_demand() - 1.5).abs() < 1e-12);
    }
}
