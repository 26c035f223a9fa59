//! External MILP solvers driven through MPS files.
//!
//! The command template is run with `sh -c` after `{mps}` and `{sol}` are
//! replaced by (quoted) temporary paths, `{time_limit}` by the time limit in
//! seconds (`inf` when unset) and `{gap}` by the relative MIP gap. Two solution-file grammars are
//! accepted, detected from the first non-empty line.
//!
//! HiGHS (`writeSolution` style 0):
//!
//! ```text
//! Model status
//! Optimal
//!
//! # Primal solution values
//! Feasible
//! Objective 0.3
//! # Columns 2
//! zL[1] 0
//! x 0.5
//! # Rows 1
//! ...
//! ```
//!
//! CBC (`solution` command): a status line followed by one row per nonzero
//! column, `index name value reduced_cost`, optionally prefixed with `**`
//! when the value violates a bound:
//!
//! ```text
//! Optimal - objective value 0.30000000
//!       0 zL#5b1#5d            1                     0.9
//! ```
//!
//! Names are mangled as in the MPS writer and demangled on the way back.

use std::collections::HashMap;
use std::fs;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use log::debug;

use super::{relative_gap, SolveResult, SolveStatus, SolverError, SolverOptions};
use crate::milp::{audit, demangle_name, write_mps, Assignment, MilpModel};

/// Tolerance at which external assignments must pass the audit.
pub const EXTERNAL_AUDIT_TOL: f64 = 1e-6;
/// Extra time granted to the external process beyond `time_limit`.
const KILL_GRACE: Duration = Duration::from_secs(10);

#[derive(Clone, Debug, PartialEq)]
pub struct ExternalSolution {
    pub status: SolveStatus,
    /// Objective reported by the solver, if any.
    pub objective: Option<f64>,
    /// Column values by (demangled) variable name.
    pub values: Option<HashMap<String, f64>>,
    /// Whether columns absent from `values` are zero (CBC prints only nonzeros).
    pub sparse: bool,
}

fn parse_value(token: &str, line_no: usize) -> Result<f64, SolverError> {
    match token {
        "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
        "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
        _ => token
            .parse()
            .map_err(|_| SolverError::SolutionParse(format!("line {line_no}: bad number `{token}`"))),
    }
}

fn demangled(name: &str, line_no: usize) -> Result<String, SolverError> {
    demangle_name(name).ok_or_else(|| SolverError::SolutionParse(format!("line {line_no}: bad column name `{name}`")))
}

pub fn parse_highs_solution(text: &str) -> Result<ExternalSolution, SolverError> {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    let model_status = match lines.iter().position(|l| *l == "Model status") {
        Some(i) => lines.get(i + 1).copied().unwrap_or(""),
        None => return Err(SolverError::SolutionParse("missing `Model status` header".into())),
    };
    let status = match model_status.to_ascii_lowercase().as_str() {
        "optimal" => SolveStatus::Optimal,
        "infeasible" => SolveStatus::Infeasible,
        "unbounded" | "primal infeasible or unbounded" => SolveStatus::Unbounded,
        s if s.starts_with("time limit") => SolveStatus::TimeLimit,
        s if s.contains("limit") || s.starts_with("interrupted") => SolveStatus::NodeLimit,
        other => return Err(SolverError::SolutionParse(format!("unknown model status `{other}`"))),
    };

    let Some(start) = lines.iter().position(|l| *l == "# Primal solution values") else {
        return Ok(ExternalSolution {
            status,
            objective: None,
            values: None,
            sparse: false,
        });
    };
    let mut i = start + 1;
    let feasibility = lines.get(i).copied().unwrap_or("None");
    if feasibility == "None" {
        return Ok(ExternalSolution {
            status,
            objective: None,
            values: None,
            sparse: false,
        });
    }
    i += 1;
    let mut objective = None;
    if let Some(rest) = lines.get(i).and_then(|l| l.strip_prefix("Objective ")) {
        objective = Some(parse_value(rest.trim(), i + 1)?);
        i += 1;
    }
    let count: usize = lines
        .get(i)
        .and_then(|l| l.strip_prefix("# Columns "))
        .and_then(|n| n.trim().parse().ok())
        .ok_or_else(|| SolverError::SolutionParse(format!("line {}: expected `# Columns <n>`", i + 1)))?;
    let mut values = HashMap::with_capacity(count);
    for k in 0..count {
        let line_no = i + 2 + k;
        let line = lines
            .get(i + 1 + k)
            .ok_or_else(|| SolverError::SolutionParse(format!("truncated column block at line {line_no}")))?;
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(SolverError::SolutionParse(format!("line {line_no}: expected `name value`")));
        };
        values.insert(demangled(name, line_no)?, parse_value(value, line_no)?);
    }
    Ok(ExternalSolution {
        status,
        objective,
        values: Some(values),
        sparse: false,
    })
}

pub fn parse_cbc_solution(text: &str) -> Result<ExternalSolution, SolverError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| SolverError::SolutionParse("empty solution file".into()))?;
    let header = header.trim();
    let lower = header.to_ascii_lowercase();
    let status = if lower.starts_with("optimal") {
        SolveStatus::Optimal
    } else if lower.contains("infeasible") {
        SolveStatus::Infeasible
    } else if lower.starts_with("unbounded") {
        SolveStatus::Unbounded
    } else if lower.starts_with("stopped on time") {
        SolveStatus::TimeLimit
    } else if lower.starts_with("stopped") {
        SolveStatus::NodeLimit
    } else {
        return Err(SolverError::SolutionParse(format!("unknown status line `{header}`")));
    };
    let objective = match header.rsplit_once("objective value") {
        Some((_, v)) => Some(parse_value(v.trim(), 1)?),
        None => None,
    };
    if status == SolveStatus::Infeasible || status == SolveStatus::Unbounded {
        return Ok(ExternalSolution {
            status,
            objective: None,
            values: None,
            sparse: true,
        });
    }
    let mut values = HashMap::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let tokens: Vec<&str> = line.split_whitespace().filter(|t| *t != "**").collect();
        let tokens: Vec<&str> = match tokens.first() {
            Some(t) if t.starts_with("**") => {
                let mut v = tokens.clone();
                v[0] = t.trim_start_matches('*');
                v
            }
            _ => tokens,
        };
        if tokens.len() < 3 {
            return Err(SolverError::SolutionParse(format!("line {line_no}: expected `index name value`")));
        }
        tokens[0]
            .parse::<usize>()
            .map_err(|_| SolverError::SolutionParse(format!("line {line_no}: bad column index `{}`", tokens[0])))?;
        values.insert(demangled(tokens[1], line_no)?, parse_value(tokens[2], line_no)?);
    }
    Ok(ExternalSolution {
        status,
        objective,
        values: Some(values),
        sparse: true,
    })
}

fn parse_solution(text: &str) -> Result<ExternalSolution, SolverError> {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    if first == "Model status" {
        parse_highs_solution(text)
    } else {
        parse_cbc_solution(text)
    }
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Kills the shell and everything it started. The shell leads its own
/// process group, so the solver it spawned goes down with it.
fn kill_tree(child: &mut std::process::Child) {
    #[cfg(unix)]
    {
        let _ = Command::new("kill")
            .args(["-KILL", "--", &format!("-{}", child.id())])
            .stderr(Stdio::null())
            .status();
    }
    let _ = child.kill();
    let _ = child.wait();
}

/// Writes `model` as MPS, runs the configured command and reads back its
/// solution. Returned assignments have passed the audit.
pub fn solve_external(model: &MilpModel, options: &SolverOptions) -> Result<SolveResult, SolverError> {
    options.validate()?;
    let super::Backend::External(template) = &options.backend else {
        return Err(SolverError::Options("solve_external needs an external backend".into()));
    };
    let started = Instant::now();
    let dir = tempfile::tempdir()?;
    let mps_path = dir.path().join("model.mps");
    let sol_path = dir.path().join("model.sol");
    fs::write(&mps_path, write_mps(model))?;
    let command = template
        .replace("{mps}", &shell_quote(&mps_path.to_string_lossy()))
        .replace("{sol}", &shell_quote(&sol_path.to_string_lossy()))
        .replace(
            "{time_limit}",
            &options.time_limit.map_or("inf".to_string(), |t| t.as_secs_f64().to_string()),
        )
        .replace("{gap}", &options.mip_rel_gap.to_string());
    debug!("running external solver: {command}");

    let mut shell = Command::new("sh");
    shell
        .arg("-c")
        .arg(&command)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    std::os::unix::process::CommandExt::process_group(&mut shell, 0);
    let mut child = shell
        .spawn()
        .map_err(|e| SolverError::Environment(format!("cannot start shell: {e}")))?;
    let kill_at = options.time_limit.map(|t| started + t + KILL_GRACE);
    let exit = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if kill_at.is_some_and(|t| Instant::now() >= t) {
            kill_tree(&mut child);
            break None;
        }
        std::thread::sleep(Duration::from_millis(20));
    };
    let wall_time = started.elapsed().as_secs_f64();
    let Some(exit) = exit else {
        return Ok(SolveResult::without_solution(SolveStatus::TimeLimit, f64::NEG_INFINITY, 0, wall_time));
    };
    let stderr = {
        use std::io::Read;
        let mut s = String::new();
        if let Some(mut pipe) = child.stderr.take() {
            let _ = pipe.read_to_string(&mut s);
        }
        s.trim().to_string()
    };
    if exit.code() == Some(127) {
        return Err(SolverError::Environment(format!("command not found: {stderr}")));
    }
    if !exit.success() {
        return Err(SolverError::ExternalExit {
            status: exit.to_string(),
            stderr,
        });
    }
    let text = fs::read_to_string(&sol_path)
        .map_err(|e| SolverError::SolutionParse(format!("solver wrote no solution file: {e}")))?;
    let parsed = parse_solution(&text)?;
    into_result(model, options, parsed, wall_time)
}

fn into_result(
    model: &MilpModel,
    options: &SolverOptions,
    parsed: ExternalSolution,
    wall_time: f64,
) -> Result<SolveResult, SolverError> {
    let Some(values) = parsed.values else {
        let bound = match parsed.status {
            SolveStatus::Infeasible => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        };
        return Ok(SolveResult::without_solution(parsed.status, bound, 0, wall_time));
    };
    let mut assignment = Assignment::zeros(model.num_vars());
    for (j, var) in model.variables().iter().enumerate() {
        let value = match values.get(&var.name) {
            Some(&v) => v,
            None if parsed.sparse => 0.0,
            None => return Err(SolverError::SolutionParse(format!("no value for column `{}`", var.name))),
        };
        let snapped = value.round();
        assignment.values[j] = if var.domain.is_binary() && (value - snapped).abs() <= options.integrality_tol {
            snapped
        } else {
            value
        };
    }
    let report = audit(model, &assignment, EXTERNAL_AUDIT_TOL)?;
    if !report.is_clean() {
        return Err(SolverError::Integrity(Box::new(report)));
    }
    let objective = report.objective;
    let best_bound = if parsed.status == SolveStatus::Optimal {
        objective
    } else {
        f64::NEG_INFINITY
    };
    Ok(SolveResult {
        status: parsed.status,
        objective: Some(objective),
        assignment: Some(assignment),
        best_bound,
        gap: relative_gap(objective, best_bound),
        nodes_explored: 0,
        wall_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Sense;

    const HIGHS_OPTIMAL: &str = "Model status
Optimal

# Primal solution values
Feasible
Objective 0.5
# Columns 2
x 0.5
z#5ba#20b#5d 1
# Rows 2
R0 0.5
R1 -0.5

# Dual solution values
None
";

    const HIGHS_INFEASIBLE: &str = "Model status
Infeasible

# Primal solution values
None
";

    const CBC_OPTIMAL: &str = "Optimal - objective value 0.50000000
      0 x                      0.5                       1
      1 z#5ba#20b#5d             1                       0
";

    fn tiny() -> MilpModel {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        let z = m.add_binary("z[a b]").unwrap();
        m.add_constraint("lb", [(1.0, x)], Sense::Ge, 0.5).unwrap();
        m.add_constraint("link", [(1.0, x), (-1.0, z)], Sense::Le, 0.0).unwrap();
        m.set_objective([(1.0, x)]).unwrap();
        m
    }

    #[test]
    fn highs_grammar() {
        let s = parse_highs_solution(HIGHS_OPTIMAL).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective, Some(0.5));
        let values = s.values.unwrap();
        assert_eq!(values["z[a b]"], 1.0);
        assert_eq!(values["x"], 0.5);

        let s = parse_highs_solution(HIGHS_INFEASIBLE).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(s.values.is_none());
        assert!(parse_highs_solution("garbage").is_err());
    }

    #[test]
    fn cbc_grammar() {
        let s = parse_cbc_solution(CBC_OPTIMAL).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective, Some(0.5));
        assert_eq!(s.values.as_ref().unwrap()["z[a b]"], 1.0);
        let s = parse_cbc_solution("Infeasible - objective value 0.00000000\n").unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        let s = parse_cbc_solution("Stopped on time - objective value 3\n**  0 x  2  0\n").unwrap();
        assert_eq!(s.status, SolveStatus::TimeLimit);
        assert_eq!(s.values.unwrap()["x"], 2.0);
        assert!(parse_cbc_solution("Optimal - objective value 1\n 0 x\n").is_err());
    }

    #[test]
    fn results_are_audited() {
        let m = tiny();
        let ok = into_result(&m, &SolverOptions::default(), parse_solution(HIGHS_OPTIMAL).unwrap(), 0.0).unwrap();
        assert_eq!(ok.status, SolveStatus::Optimal);
        assert_eq!(ok.objective, Some(0.5));

        let lying = HIGHS_OPTIMAL.replace("x 0.5", "x 0.2");
        match into_result(&m, &SolverOptions::default(), parse_solution(&lying).unwrap(), 0.0) {
            Err(SolverError::Integrity(report)) => assert_eq!(report.violated_tags(), vec!["lb"]),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    fn external(cmd: &str) -> SolverOptions {
        SolverOptions {
            backend: super::super::Backend::External(cmd.into()),
            ..Default::default()
        }
    }

    #[test]
    fn missing_command_is_environment_error() {
        let r = solve_external(&tiny(), &external("definitely-not-a-solver-xyz {mps} {sol}"));
        assert!(matches!(r, Err(SolverError::Environment(_))), "{r:?}");
    }

    #[test]
    fn failing_command_is_exit_error() {
        let r = solve_external(&tiny(), &external("echo oops >&2; false {mps} {sol}"));
        match r {
            Err(SolverError::ExternalExit { stderr, .. }) => assert_eq!(stderr, "oops"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn canned_solution_round_trip() {
        // A fake solver that copies a canned HiGHS file into place.
        let dir = tempfile::tempdir().unwrap();
        let canned = dir.path().join("canned.sol");
        fs::write(&canned, HIGHS_OPTIMAL).unwrap();
        let cmd = format!("test -s {{mps}} && cp {} {{sol}}", shell_quote(&canned.to_string_lossy()));
        let r = solve_external(&tiny(), &external(&cmd)).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, Some(0.5));
    }

    #[cfg(target_os = "linux")]
    #[test]
    fn timeout_kills_grandchildren() {
        let dir = tempfile::tempdir().unwrap();
        let pid_file = dir.path().join("pid");
        let cmd = format!(
            "sleep 120 & echo $! > {}; wait; : {{mps}} {{sol}}",
            shell_quote(&pid_file.to_string_lossy())
        );
        let options = SolverOptions {
            time_limit: Some(Duration::from_millis(100)),
            ..external(&cmd)
        };
        let r = solve_external(&tiny(), &options).unwrap();
        assert_eq!(r.status, SolveStatus::TimeLimit);
        let pid = fs::read_to_string(&pid_file).unwrap();
        std::thread::sleep(Duration::from_millis(200));
        let stat = fs::read_to_string(format!("/proc/{}/stat", pid.trim())).unwrap_or_default();
        assert!(stat.is_empty() || stat.contains(") Z "), "sleep survived: {stat}");
    }
}
