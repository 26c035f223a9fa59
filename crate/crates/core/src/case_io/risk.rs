//! Per-line wildfire risk tables: CSV ingestion and seeded generation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CaseError;
use crate::network::{LineId, Network};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskOrigin {
    File,
    Seeded { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub entries: BTreeMap<LineId, f64>,
    pub origin: RiskOrigin,
}

impl RiskTable {
    /// Overwrites line risks in `network`. Every line must be covered and
    /// every entry must name a line of the network.
    pub fn apply(&self, network: &mut Network) -> Result<(), CaseError> {
        let ids = network.line_ids();
        if let Some(unknown) = self.entries.keys().find(|id| !ids.contains(id)) {
            return Err(CaseError::UnknownRiskLine(*unknown));
        }
        for line in &mut network.lines {
            let risk = *self
                .entries
                .get(&line.id)
                .ok_or(CaseError::MissingRisk(line.id))?;
            line.risk = risk;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("line_id,risk\n");
        for (id, risk) in &self.entries {
            out.push_str(&format!("{id},{risk}\n"));
        }
        out
    }
}

/// Reads a `line_id,risk` CSV covering every line of `network` exactly once.
pub fn parse_risk_csv(text: &str, network: &Network) -> Result<RiskTable, CaseError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CaseError::Csv(e.to_string()))?
        .clone();
    if headers.len() != 2 || &headers[0] != "line_id" || &headers[1] != "risk" {
        return Err(CaseError::Csv(format!(
            "expected header `line_id,risk`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let ids = network.line_ids();
    let mut entries = BTreeMap::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CaseError::Csv(e.to_string()))?;
        let row = row_no + 2;
        let field = |i: usize| record.get(i).unwrap_or("");
        let id: LineId = field(0)
            .parse()
            .map_err(|_| CaseError::Csv(format!("row {row}: bad line id `{}`", field(0))))?;
        let risk: f64 = field(1)
            .parse()
            .map_err(|_| CaseError::Csv(format!("row {row}: bad risk `{}`", field(1))))?;
        if !ids.contains(&id) {
            return Err(CaseError::UnknownRiskLine(id));
        }
        if !risk.is_finite() || risk < 0.0 {
            return Err(CaseError::NegativeRisk { line: id, value: risk });
        }
        if entries.insert(id, risk).is_some() {
            return Err(CaseError::DuplicateRisk(id));
        }
    }
    if let Some(missing) = ids.iter().find(|id| !entries.contains_key(id)) {
        return Err(CaseError::MissingRisk(*missing));
    }
    Ok(RiskTable {
        entries,
        origin: RiskOrigin::File,
    })
}

/// Deterministic generator behind [`generate_risk`].
///
/// The seed is expanded with one SplitMix64 step into the state of an
/// xorshift64* generator (shifts 12/25/27, multiplier `0x2545F4914F6CDD1D`).
/// A zero state is replaced by `0x9E3779B97F4A7C15`. Uniform draws on
/// `[0, 1)` take the top 53 bits of each output: `(x >> 11) * 2^-53`.
///
/// Test vectors, seed 42: `0x31b0ece7c4f697a2`, `0x9008a3b1cb686f03`,
/// `0x7c7173abd97be16f`.
#[derive(Clone, Debug)]
pub struct RiskRng {
    state: u64,
}

impl RiskRng {
    pub fn new(seed: u64) -> Self {
        let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        if z == 0 {
            z = 0x9E37_79B9_7F4A_7C15;
        }
        Self { state: z }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// One uniform `[0, 1)` risk per line, drawn in network line order.
pub fn generate_risk(network: &Network, seed: u64) -> RiskTable {
    let mut rng = RiskRng::new(seed);
    let entries = network
        .lines
        .iter()
        .map(|line| (line.id, rng.next_f64()))
        .collect();
    RiskTable {
        entries,
        origin: RiskOrigin::Seeded { seed },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tri3;

    #[test]
    fn rng_matches_reference_vectors() {
        let mut rng = RiskRng::new(42);
        assert_eq!(rng.next_u64(), 0x31b0_ece7_c4f6_97a2);
        assert_eq!(rng.next_u64(), 0x9008_a3b1_cb68_6f03);
        assert_eq!(rng.next_u64(), 0x7c71_73ab_d97b_e16f);
        let mut rng = RiskRng::new(42);
        assert_eq!(rng.next_f64(), 0.1941059175341826);
        assert_eq!(rng.next_f64(), 0.5626318272656207);
    }

    #[test]
    fn seeds_one_and_two_differ() {
        let a = generate_risk(&tri3(), 1);
        let b = generate_risk(&tri3(), 2);
        assert_eq!(a.entries[&1], 0.29404672187536496);
        assert_eq!(b.entries[&1], 0.5407577847936206);
        assert_ne!(a.entries, b.entries);
    }

    #[test]
    fn generation_is_repeatable() {
        let net = tri3();
        assert_eq!(generate_risk(&net, 42), generate_risk(&net, 42));
    }

    #[test]
    fn csv_reads_every_line() {
        let table = parse_risk_csv("line_id,risk\n1,0.9\n2,0.2\n3,0.1", &tri3()).unwrap();
        assert_eq!(table.entries, BTreeMap::from([(1, 0.9), (2, 0.2), (3, 0.1)]));
    }

    #[test]
    fn csv_accepts_crlf() {
        let table = parse_risk_csv("line_id,risk\r\n1,0.9\r\n2,0.2\r\n3,0.1\r\n", &tri3()).unwrap();
        assert_eq!(table.entries.len(), 3);
    }

    #[test]
    fn csv_errors() {
        let net = tri3();
        let err = parse_risk_csv("line_id,risk\n1,0.9\n2,0.2", &net).unwrap_err();
        assert_eq!(err.to_string(), "risk missing for line 3");
        let err = parse_risk_csv("line_id,risk\n1,-0.5\n2,0.2\n3,0.1", &net).unwrap_err();
        assert!(err.to_string().starts_with("negative risk"));
        let err = parse_risk_csv("line_id,risk\n1,0.5\n1,0.2\n3,0.1", &net).unwrap_err();
        assert_eq!(err, CaseError::DuplicateRisk(1));
        let err = parse_risk_csv("line_id,risk\n9,0.5", &net).unwrap_err();
        assert_eq!(err, CaseError::UnknownRiskLine(9));
    }

    #[test]
    fn apply_and_csv_round_trip() {
        let mut net = tri3();
        let table = generate_risk(&net, 7);
        table.apply(&mut net).unwrap();
        let back = parse_risk_csv(&table.to_csv(), &net).unwrap();
        assert_eq!(back.entries, table.entries);
    }
}
