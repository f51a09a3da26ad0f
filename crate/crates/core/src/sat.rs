//! Satisfiability by forced collapse.
//!
//! The oracle state `2^{-n/2} Σ_j |j⟩|f(j)⟩` has a flag register whose `|1⟩`
//! branch is non-empty exactly when `f` has a satisfying input. Forcing the
//! flag to `|1⟩` therefore either succeeds, after which measuring the input
//! register yields a uniformly random witness, or is rejected as an
//! inadmissible outcome, which decides unsatisfiability.
//!
//! Building the state evaluates `f` on all `2^n` inputs, so this is a
//! demonstration of the decision logic and says nothing about running time.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::policy::{draw, sample_outcome, CollapsePolicy};
use crate::quantum::{
    born_distribution, collapse, re, ProjectiveMeasurement, StateVector, Subsystem, C64,
};

/// Largest supported number of input bits (state dimension 8192).
pub const MAX_BITS: usize = 12;

/// A total boolean function on `n`-bit inputs, stored as a truth table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleFunction {
    n: usize,
    table: Vec<bool>,
}

impl OracleFunction {
    /// `table[j] = f(j)`; the length must be `2^n` with `1 ≤ n ≤ 12`.
    pub fn from_truth_table(table: Vec<bool>) -> Result<Self> {
        let len = table.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::BadParameter(format!(
                "truth table length {len} is not a power of two ≥ 2"
            )));
        }
        let n = len.trailing_zeros() as usize;
        if n > MAX_BITS {
            return Err(Error::TooLarge(len * 2));
        }
        Ok(Self { n, table })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadParameter("n must be positive".into()));
        }
        if n > MAX_BITS {
            return Err(Error::TooLarge(1 << (n + 1)));
        }
        Self::from_truth_table((0..1usize << n).map(f).collect())
    }

    /// The `index`-th boolean function on `n` bits: bit `j` of `index` is `f(j)`.
    pub fn from_index(n: usize, index: u64) -> Result<Self> {
        if n > 6 {
            return Err(Error::BadParameter("function index only covers n ≤ 6".into()));
        }
        Self::from_fn(n, |j| (index >> j) & 1 == 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn evaluate(&self, j: usize) -> bool {
        self.table[j]
    }

    pub fn satisfying_inputs(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.table[j]).collect()
    }

    /// Truth-table text: one `0`/`1` character per input in order `j = 0, 1, …`;
    /// whitespace is ignored and `#` starts a comment line.
    pub fn parse_truth_table(text: &str) -> Result<Self> {
        let mut table = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.starts_with('#') {
                continue;
            }
            for ch in line.chars().filter(|c| !c.is_whitespace()) {
                match ch {
                    '0' => table.push(false),
                    '1' => table.push(true),
                    other => {
                        return Err(Error::Parse(format!("unexpected `{other}` in truth table")))
                    }
                }
            }
        }
        Self::from_truth_table(table)
    }

    /// DIMACS CNF. Variable `v` (1-based) is bit `v − 1` of the input index.
    pub fn parse_cnf(text: &str) -> Result<Self> {
        let mut vars: Option<usize> = None;
        let mut clauses: Vec<Vec<i64>> = Vec::new();
        let mut current = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if let Some(header) = line.strip_prefix('p') {
                let parts: Vec<&str> = header.split_whitespace().collect();
                if parts.len() != 3 || parts[0] != "cnf" {
                    return Err(Error::Parse(format!("bad problem line `{line}`")));
                }
                let v = parts[1]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad variable count in `{line}`")))?;
                vars = Some(v);
                continue;
            }
            for tok in line.split_whitespace() {
                let lit: i64 = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad literal `{tok}`")))?;
                if lit == 0 {
                    clauses.push(std::mem::take(&mut current));
                } else {
                    current.push(lit);
                }
            }
        }
        if !current.is_empty() {
            clauses.push(current);
        }
        let n = vars.ok_or_else(|| Error::Parse("missing `p cnf` line".into()))?;
        if n == 0 {
            return Err(Error::Parse("CNF has no variables".into()));
        }
        if n > MAX_BITS {
            return Err(Error::TooLarge(1 << (n + 1)));
        }
        if let Some(lit) = clauses.iter().flatten().find(|l| l.unsigned_abs() as usize > n) {
            return Err(Error::Parse(format!("literal {lit} exceeds {n} variables")));
        }
        Self::from_fn(n, |j| {
            clauses.iter().all(|clause| {
                clause.iter().any(|&lit| {
                    let bit = (j >> (lit.unsigned_abs() - 1)) & 1 == 1;
                    if lit > 0 {
                        bit
                    } else {
                        !bit
                    }
                })
            })
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SatResult {
    pub satisfiable: bool,
    pub witness: Option<usize>,
    pub queries_quantum: u64,
    pub queries_classical_oracle: u64,
}

/// `2^{-n/2} Σ_j |j⟩|f(j)⟩`, with index `2j + f(j)`.
pub fn build_sat_state(f: &OracleFunction) -> Result<StateVector> {
    if f.n > MAX_BITS {
        return Err(Error::TooLarge(f.len() * 2));
    }
    let amp = re((f.len() as f64).sqrt().recip());
    let mut amps = vec![C64::new(0.0, 0.0); f.len() * 2];
    for j in 0..f.len() {
        amps[2 * j + usize::from(f.evaluate(j))] = amp;
    }
    StateVector::new(&amps)
}

/// Forces the flag register to `|1⟩`. A forbidden-outcome rejection means
/// no satisfying input exists; otherwise the input register is measured
/// with the Born rule and the witness is checked against `f`.
pub fn decide_sat<R: Rng + ?Sized>(f: &OracleFunction, rng: &mut R) -> Result<SatResult> {
    let state = build_sat_state(f)?;
    let dims = (f.len(), 2);
    let flag = ProjectiveMeasurement::local(ProjectiveMeasurement::computational(2), dims, Subsystem::B)?;
    let queries_quantum = f.len() as u64;
    match sample_outcome(&mut CollapsePolicy::Forced(1), &state, &flag, rng) {
        Err(Error::ForbiddenOutcome { .. }) => Ok(SatResult {
            satisfiable: false,
            witness: None,
            queries_quantum,
            queries_classical_oracle: 0,
        }),
        Err(e) => Err(e),
        Ok(sample) => {
            let post = collapse(&state, &flag, sample.outcome)?;
            let input = ProjectiveMeasurement::local(ProjectiveMeasurement::computational(f.len()), dims, Subsystem::A)?;
            let witness = draw(&born_distribution(&post, &input)?, rng);
            assert!(
                f.evaluate(witness),
                "collapsed witness {witness} does not satisfy f"
            );
            Ok(SatResult {
                satisfiable: true,
                witness: Some(witness),
                queries_quantum,
                queries_classical_oracle: 1,
            })
        }
    }
}

/// Linear scan; the witness is the smallest satisfying input.
pub fn classical_brute_force(f: &OracleFunction) -> SatResult {
    let mut queries = 0u64;
    for j in 0..f.len() {
        queries += 1;
        if f.evaluate(j) {
            return SatResult {
                satisfiable: true,
                witness: Some(j),
                queries_quantum: 0,
                queries_classical_oracle: queries,
            };
        }
    }
    SatResult {
        satisfiable: false,
        witness: None,
        queries_quantum: 0,
        queries_classical_oracle: queries,
    }
}
