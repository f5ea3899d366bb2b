//! File formats: instance JSON, run configuration, and SDPA sparse export
//! of the relaxation.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linnet::{ProblemInstance, TrainOptions};
use crate::random;
use crate::relax::{RelaxationProblem, SolveOptions};
use crate::tensor::DenseMatrix;

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk instance. `X` and `Y` are row-major nested arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: u32,
    pub widths: Vec<usize>,
    pub n: usize,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    #[serde(rename = "Y")]
    pub y: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorRecord>,
}

/// Provenance of a generated instance; informational only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorRecord {
    pub kind: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
}

impl InstanceFile {
    pub fn from_instance(inst: &ProblemInstance, generator: Option<GeneratorRecord>) -> Self {
        Self {
            version: SCHEMA_VERSION,
            widths: inst.widths().to_vec(),
            n: inst.n(),
            x: inst.x().to_rows(),
            y: inst.y().to_rows(),
            generator,
        }
    }

    /// Shape checks with field-level locations, then instance validation.
    pub fn to_instance(&self) -> Result<ProblemInstance> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::UnknownSchema(self.version));
        }
        if self.widths.len() < 2 {
            return Err(Error::shape(
                "widths",
                "need at least two entries (d_0 and d_N)",
            ));
        }
        if let Some(k) = self.widths.iter().position(|&w| w == 0) {
            return Err(Error::shape(
                format!("widths[{k}]"),
                "widths must be positive",
            ));
        }
        if self.n == 0 {
            return Err(Error::shape("n", "need at least one sample"));
        }
        let d_in = self.widths[0];
        let d_out = *self.widths.last().expect("len >= 2");
        let x = rows_to_matrix("X", &self.x, d_in, self.n)?;
        let y = rows_to_matrix("Y", &self.y, d_out, self.n)?;
        ProblemInstance::new(x, y, self.widths.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance files always serialize")
    }
}

fn rows_to_matrix(
    field: &str,
    rows: &[Vec<f64>],
    expect_rows: usize,
    n: usize,
) -> Result<DenseMatrix> {
    if rows.len() != expect_rows {
        return Err(Error::shape(
            field,
            format!(
                "{field} must be {expect_rows}x{n}, found {} rows",
                rows.len()
            ),
        ));
    }
    if let Some((k, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::shape(
            format!("{field}[{k}]"),
            format!("row has {} entries, expected n = {n}", row.len()),
        ));
    }
    DenseMatrix::from_rows(rows)
}

fn json_error(e: serde_json::Error) -> Error {
    Error::parse(
        format!("line {}, column {}", e.line(), e.column()),
        e.to_string(),
    )
}

/// Parses instance JSON. The schema version is checked before the rest of
/// the document so that files from other versions fail with a clear error.
pub fn parse_instance_file(text: &str) -> Result<InstanceFile> {
    #[derive(Deserialize)]
    struct Header {
        version: Option<serde_json::Value>,
    }
    let header: Header = serde_json::from_str(text).map_err(json_error)?;
    let version = match header.version {
        None => return Err(Error::parse("version", "missing schema version")),
        Some(v) => v
            .as_u64()
            .and_then(|v| u32::try_from(v).ok())
            .ok_or_else(|| {
                Error::parse(
                    "version",
                    format!("expected a non-negative integer, found {v}"),
                )
            })?,
    };
    if version != SCHEMA_VERSION {
        return Err(Error::UnknownSchema(version));
    }
    serde_json::from_str(text).map_err(json_error)
}

pub fn parse_instance(text: &str) -> Result<ProblemInstance> {
    parse_instance_file(text)?.to_instance()
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn serialize_instance(inst: &ProblemInstance) -> String {
    InstanceFile::from_instance(inst, None).to_json()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    RandomGaussian,
    /// Plants `U Vᵀ` of rank `r` and sets `Y = U Vᵀ X`, so the optimum is 0.
    ExactFit,
    /// Planted low-rank map plus Gaussian noise on `Y`.
    LowRankPlusNoise,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 3] =
        [Self::RandomGaussian, Self::ExactFit, Self::LowRankPlusNoise];

    pub fn name(self) -> &'static str {
        match self {
            Self::RandomGaussian => "random-gaussian",
            Self::ExactFit => "exact-fit",
            Self::LowRankPlusNoise => "low-rank-plus-noise",
        }
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownGenerator(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub widths: Vec<usize>,
    pub n: usize,
    /// Noise standard deviation for `low-rank-plus-noise`.
    pub noise: f64,
}

impl GeneratorSpec {
    pub const DEFAULT_NOISE: f64 = 0.1;

    pub fn new(kind: GeneratorKind, widths: Vec<usize>, n: usize) -> Self {
        Self {
            kind,
            widths,
            n,
            noise: Self::DEFAULT_NOISE,
        }
    }

    /// Spec from a generator name; unknown names are rejected.
    pub fn named(name: &str, widths: Vec<usize>, n: usize) -> Result<Self> {
        Ok(Self::new(name.parse()?, widths, n))
    }
}

pub fn generate_instance(spec: &GeneratorSpec, seed: u64) -> Result<ProblemInstance> {
    if spec.widths.len() < 2 || spec.widths.contains(&0) {
        return Err(Error::WidthIncompatible(format!(
            "cannot generate with widths {:?}",
            spec.widths
        )));
    }
    if spec.n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let d_in = spec.widths[0];
    let d_out = *spec.widths.last().expect("checked");
    let r = *spec.widths.iter().min().expect("checked");
    let mut rng = random::seeded(seed);
    let x = random::gaussian(&mut rng, d_in, spec.n);
    let y = match spec.kind {
        GeneratorKind::RandomGaussian => random::gaussian(&mut rng, d_out, spec.n),
        GeneratorKind::ExactFit | GeneratorKind::LowRankPlusNoise => {
            let u = random::gaussian(&mut rng, d_out, r);
            let v = random::gaussian(&mut rng, d_in, r);
            let planted = u.mul_unchecked(&v.transpose()).mul_unchecked(&x);
            if spec.kind == GeneratorKind::ExactFit {
                planted
            } else {
                if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
                    return Err(Error::Config(format!(
                        "noise must be a nonnegative number, got {}",
                        spec.noise
                    )));
                }
                planted.add(&random::gaussian(&mut rng, d_out, spec.n).scale(spec.noise))?
            }
        }
    };
    ProblemInstance::new(x, y, spec.widths.clone())
}

/// Generated instance together with its provenance record.
pub fn generate_file(spec: &GeneratorSpec, seed: u64) -> Result<InstanceFile> {
    let inst = generate_instance(spec, seed)?;
    let record = GeneratorRecord {
        kind: spec.kind.name().to_string(),
        seed,
        noise: (spec.kind == GeneratorKind::LowRankPlusNoise).then_some(spec.noise),
    };
    Ok(InstanceFile::from_instance(&inst, Some(record)))
}

/// Tolerances and solver settings for a verification run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Relative eigenvalue threshold for numerical rank.
    pub rank_tol: f64,
    /// Constraint residual tolerance for lifted points and witnesses.
    pub constraint_tol: f64,
    /// Agreement between the lifted objective and the optimum.
    pub objective_tol: f64,
    /// Agreement between successive objective representations.
    pub chain_tol: f64,
    /// Slack allowed in `lower_bound <= optimum`.
    pub sandwich_tol: f64,
    pub hypothesis_samples: usize,
    pub seed: u64,
    pub train: TrainOptions,
    pub relax: SolveOptions,
    /// Multiplies `W′` of the optimal atom before it is checked. Used to
    /// exercise failure reporting; leave unset for real runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tamper_w_prime: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rank_tol: 1e-8,
            constraint_tol: 1e-8,
            objective_tol: 1e-8,
            chain_tol: 1e-9,
            sandwich_tol: 1e-6,
            hypothesis_samples: 100,
            seed: 0,
            train: TrainOptions::default(),
            relax: SolveOptions::default(),
            tamper_w_prime: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [
            ("rank_tol", self.rank_tol),
            ("constraint_tol", self.constraint_tol),
            ("objective_tol", self.objective_tol),
            ("chain_tol", self.chain_tol),
            ("sandwich_tol", self.sandwich_tol),
            ("train.tol", self.train.tol),
            ("train.step", self.train.step),
        ];
        if let Some((name, v)) = tols.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
        if self.train.max_iters == 0 {
            return Err(Error::Config("train.max_iters must be at least 1".into()));
        }
        if self.hypothesis_samples == 0 {
            return Err(Error::Config(
                "hypothesis_samples must be at least 1".into(),
            ));
        }
        if let Some(s) = self.tamper_w_prime {
            if !s.is_finite() {
                return Err(Error::Config("tamper_w_prime must be finite".into()));
            }
        }
        self.relax.validate()
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(json_error)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// One nonzero of an SDPA coefficient matrix; indices are 1-based with
/// `i <= j`, matrix 0 is the objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpaEntry {
    pub matrix: usize,
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// SDPA sparse data. The relaxation `min ⟨C,X⟩ s.t. ⟨A_k,X⟩ = b_k, X ⪰ 0`
/// is written in SDPA's dual form: `F₀ = −C`, `F_k = A_k`, `c = b`.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpaData {
    pub block_sizes: Vec<usize>,
    pub c: Vec<f64>,
    pub entries: Vec<SdpaEntry>,
}

impl SdpaData {
    pub fn from_relaxation(prob: &RelaxationProblem) -> Self {
        let mut entries = Vec::new();
        let mut push = |matrix: usize, list: &[crate::relax::SymEntry], sign: f64| {
            for e in list.iter().filter(|e| e.value != 0.0) {
                entries.push(SdpaEntry {
                    matrix,
                    block: e.block + 1,
                    i: e.i.min(e.j) + 1,
                    j: e.i.max(e.j) + 1,
                    value: sign * e.value,
                });
            }
        };
        push(0, &prob.objective, -1.0);
        for (k, cst) in prob.constraints.iter().enumerate() {
            push(k + 1, &cst.entries, 1.0);
        }
        Self {
            block_sizes: prob.block_sizes.clone(),
            // `+ 0.0` turns a negative zero into zero.
            c: prob.constraints.iter().map(|c| c.rhs + 0.0).collect(),
            entries,
        }
    }

    pub fn num_constraints(&self) -> usize {
        self.c.len()
    }

    pub fn block_struct_line(&self) -> String {
        let sizes: Vec<String> = self.block_sizes.iter().map(|s| s.to_string()).collect();
        format!("{{{}}}", sizes.join(", "))
    }

    /// Numbers use Rust's shortest round-trip exponent form.
    pub fn to_text(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "\"{c}");
        }
        let _ = writeln!(out, "{}", self.num_constraints());
        let _ = writeln!(out, "{}", self.block_sizes.len());
        let _ = writeln!(out, "{}", self.block_struct_line());
        let c: Vec<String> = self.c.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", c.join(" "));
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{} {} {} {} {:e}",
                e.matrix, e.block, e.i, e.j, e.value
            );
        }
        out
    }
}

fn sdpa_tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '(' | ')'))
        .filter(|t| !t.is_empty())
}

fn sdpa_number<T: FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(format!("line {line}"), format!("invalid {what} '{tok}'")))
}

/// Reads the subset of SDPA sparse format written by [`SdpaData::to_text`]:
/// leading comment lines, one header item per line, dense SDP blocks only.
pub fn parse_sdpa(text: &str) -> Result<SdpaData> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .skip_while(|(_, l)| l.starts_with('"') || l.starts_with('*'))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::parse("end of input", format!("missing {what}")))
    };

    let (ln, l) = next("constraint count")?;
    let m: usize = sdpa_number(sdpa_tokens(l).next().unwrap_or(""), ln, "constraint count")?;
    let (ln, l) = next("block count")?;
    let nblocks: usize = sdpa_number(sdpa_tokens(l).next().unwrap_or(""), ln, "block count")?;
    let (ln, l) = next("block structure")?;
    let sizes: Vec<i64> = sdpa_tokens(l)
        .map(|t| sdpa_number(t, ln, "block size"))
        .collect::<Result<_>>()?;
    if sizes.len() != nblocks {
        return Err(Error::parse(
            format!("line {ln}"),
            format!("{} block sizes listed, header says {nblocks}", sizes.len()),
        ));
    }
    if let Some(s) = sizes.iter().find(|&&s| s <= 0) {
        return Err(Error::parse(
            format!("line {ln}"),
            format!("block size {s} not supported (diagonal blocks are not read)"),
        ));
    }
    let block_sizes: Vec<usize> = sizes.into_iter().map(|s| s as usize).collect();

    let (ln, l) = next("objective vector")?;
    let c: Vec<f64> = sdpa_tokens(l)
        .map(|t| sdpa_number(t, ln, "objective entry"))
        .collect::<Result<_>>()?;
    if c.len() != m {
        return Err(Error::parse(
            format!("line {ln}"),
            format!("objective vector has {} entries, expected {m}", c.len()),
        ));
    }

    let mut entries = Vec::new();
    for (ln, l) in lines {
        let toks: Vec<&str> = sdpa_tokens(l).collect();
        if toks.len() != 5 {
            return Err(Error::parse(
                format!("line {ln}"),
                format!("expected 5 fields, found {}", toks.len()),
            ));
        }
        let e = SdpaEntry {
            matrix: sdpa_number(toks[0], ln, "matrix index")?,
            block: sdpa_number(toks[1], ln, "block index")?,
            i: sdpa_number(toks[2], ln, "row index")?,
            j: sdpa_number(toks[3], ln, "column index")?,
            value: sdpa_number(toks[4], ln, "value")?,
        };
        let in_range = e.matrix <= m
            && (1..=nblocks).contains(&e.block)
            && e.i >= 1
            && e.i <= e.j
            && e.j <= block_sizes[e.block - 1];
        if !in_range {
            return Err(Error::parse(
                format!("line {ln}"),
                "entry index out of range or below the diagonal",
            ));
        }
        entries.push(e);
    }
    Ok(SdpaData {
        block_sizes,
        c,
        entries,
    })
}

fn sdpa_comments(prob: &RelaxationProblem) -> Vec<String> {
    vec![
        format!("PSD relaxation of the lifted program, d = {}", prob.d),
        "minimize <C, X> + offset s.t. <A_k, X> = b_k, X psd; written as F0 = -C, F_k = A_k, c = b"
            .to_string(),
        format!("objective offset {:e}", prob.objective_offset),
    ]
}

pub fn write_sdpa(prob: &RelaxationProblem) -> String {
    SdpaData::from_relaxation(prob).to_text(&sdpa_comments(prob))
}

pub fn export_sdpa(prob: &RelaxationProblem, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_sdpa(prob))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp_lift::assemble_qcqp;
    use crate::linnet::oracle_opt;
    use crate::relax::build_relaxation;

    #[test]
    fn minimal_file_parses() {
        let inst =
            parse_instance(r#"{"version": 1, "widths": [1, 1], "n": 1, "X": [[2]], "Y": [[4]]}"#)
                .unwrap();
        assert_eq!(inst.x()[(0, 0)], 2.0);
        assert_eq!(inst.y()[(0, 0)], 4.0);
    }

    #[test]
    fn wrong_x_rows_is_a_shape_error() {
        let text = r#"{"version": 1, "widths": [2, 1, 2], "n": 4,
            "X": [[1,2,3,4],[1,2,3,4],[1,2,3,4]], "Y": [[0,0,0,0],[0,0,0,0]]}"#;
        match parse_instance(text) {
            Err(Error::Shape { field, message }) => {
                assert_eq!(field, "X");
                assert!(message.contains("2x4"), "{message}");
            }
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_row_names_the_row() {
        let text = r#"{"version": 1, "widths": [1, 1], "n": 2, "X": [[1, 2]], "Y": [[1]]}"#;
        assert!(matches!(parse_instance(text), Err(Error::Shape { field, .. }) if field == "Y[0]"));
    }

    #[test]
    fn schema_and_syntax_errors() {
        assert!(matches!(
            parse_instance(r#"{"version": 7, "widths": "nonsense"}"#),
            Err(Error::UnknownSchema(7))
        ));
        assert!(matches!(
            parse_instance("{\"version\": 1,\n \"widths\": [1, 1"),
            Err(Error::Parse { location, .. }) if location.starts_with("line 2")
        ));
        assert!(matches!(
            parse_instance(r#"{"widths": [1, 1]}"#),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn generators_are_deterministic_and_shaped() {
        let spec = GeneratorSpec::new(GeneratorKind::RandomGaussian, vec![3, 2, 3], 5);
        let a = generate_file(&spec, 11).unwrap().to_json();
        let b = generate_file(&spec, 11).unwrap().to_json();
        assert_eq!(a, b);
        let inst = parse_instance(&a).unwrap();
        assert_eq!(inst.x().shape(), (3, 5));
        assert_eq!(inst.y().shape(), (3, 5));
    }

    #[test]
    fn exact_fit_has_zero_optimum() {
        for seed in 0..5 {
            let spec = GeneratorSpec::new(GeneratorKind::ExactFit, vec![3, 1, 2], 6);
            let inst = generate_instance(&spec, seed).unwrap();
            assert!(oracle_opt(&inst).unwrap().opt_value <= 1e-10);
        }
    }

    #[test]
    fn unknown_generator_rejected() {
        assert!(matches!(
            GeneratorSpec::named("uniform", vec![1, 1], 1),
            Err(Error::UnknownGenerator(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(parse_config(r#"{"constraint_tol": 0}"#).is_err());
        assert!(parse_config(r#"{"relax": {"max_iters": 0}}"#).is_err());
        assert!(parse_config(r#"{"train": {"max_iters": 0}}"#).is_err());
        assert!(parse_config(r#"{"no_such_field": 1}"#).is_err());
        let cfg = parse_config(r#"{"seed": 5, "relax": {"rho": 0.5}}"#).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.relax.rho, 0.5);
        assert_eq!(cfg.relax.max_iters, SolveOptions::default().max_iters);
    }

    #[test]
    fn sdpa_block_line_for_d2() {
        let inst = parse_instance(
            r#"{"version": 1, "widths": [1, 1], "n": 2, "X": [[1, 2]], "Y": [[3, -1]]}"#,
        )
        .unwrap();
        let p = build_relaxation(&assemble_qcqp(&inst), &inst).unwrap();
        let text = write_sdpa(&p);
        assert!(text.lines().any(|l| l == "{13, 2, 2, 2, 1}"));
        assert_eq!(parse_sdpa(&text).unwrap(), SdpaData::from_relaxation(&p));
    }

    #[test]
    fn sdpa_parse_errors_carry_lines() {
        let text = "\"c\n1\n1\n{2}\n1e0\n1 1 2 1 3.0\n";
        assert!(
            matches!(parse_sdpa(text), Err(Error::Parse { location, .. }) if location == "line 6")
        );
        assert!(parse_sdpa("1\n1\n{-2}\n1\n").is_err());
    }
}
