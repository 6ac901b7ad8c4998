//! Three-stage proof driver: configuration, stage orchestration, hashing,
//! certificate and profile emission, and re-verification.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bundle::{self, BundleCandidate, BundleCertificate, BundleProblem};
use crate::bvp::{self, BvpCandidate, BvpProblem, ProfileSample, SolitonCertificate};
use crate::certify::Verdict;
use crate::error::{Error, Result};
use crate::interval::{parse_decimal, RIval};
use crate::manifold::{self, ManifoldCandidate, ManifoldCertificate, ManifoldProblem};
use crate::numerics::NewtonReport;

/// User configuration. Numeric inputs are decimal strings; parameters that
/// enter the equations are parsed to enclosing intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub a: String,
    pub b: String,
    pub c: String,
    pub nu: String,
    pub omega: String,
    pub l: String,
    #[serde(rename = "M_F")]
    pub m_f: usize,
    #[serde(rename = "N_T")]
    pub n_t: usize,
    #[serde(rename = "M_C")]
    pub m_c: usize,
    /// Operator truncation of the stage-3 approximate inverse (default `2·M_C`).
    #[serde(rename = "K_C", default, skip_serializing_if = "Option::is_none")]
    pub k_c: Option<usize>,
    pub theta: String,
    /// Domain length: a sum of decimal terms, each optionally multiplied by
    /// `pi` (e.g. `"1+2pi"`, `"7.5"`, `"0.5*pi"`).
    #[serde(rename = "L")]
    pub length: String,
    pub r_star_tf: String,
    pub r_star_c: String,
    /// Half-width of the sampled profile window.
    #[serde(default = "default_xmax")]
    pub profile_xmax: String,
    #[serde(default = "default_points")]
    pub profile_points: usize,
}

fn default_xmax() -> String {
    "20".into()
}

fn default_points() -> usize {
    2001
}

impl RunConfig {
    /// Configuration of the main theorem.
    pub fn main_theorem() -> Self {
        RunConfig {
            a: "1.1025".into(),
            b: "0.55125".into(),
            c: "-0.826875".into(),
            nu: "1.05".into(),
            omega: "1.05".into(),
            l: "0.5".into(),
            m_f: 32,
            n_t: 32,
            m_c: 48,
            k_c: None,
            theta: "1".into(),
            length: "1+2pi".into(),
            r_star_tf: "1e-3".into(),
            r_star_c: "1e-2".into(),
            profile_xmax: default_xmax(),
            profile_points: default_points(),
        }
    }

    /// Same settings with other equation coefficients and truncations.
    pub fn with_params(a: &str, b: &str, c: &str, m_f: usize, n_t: usize, m_c: usize) -> Self {
        RunConfig { a: a.into(), b: b.into(), c: c.into(), m_f, n_t, m_c, ..RunConfig::main_theorem() }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s)?;
        cfg.parse()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunConfig::from_json(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical JSON encoding (hex).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parses and cross-checks every field.
    pub fn parse(&self) -> Result<ParsedConfig> {
        let weight = |name: &str, s: &str| -> Result<f64> {
            let v: f64 = s.trim().parse().map_err(|_| Error::Config(format!("{name} = `{s}` is not a number")))?;
            crate::seqspace::check_weight(v).map_err(|e| Error::Config(format!("{name}: {e}")))
        };
        let radius = |name: &str, s: &str| -> Result<f64> {
            let v: f64 = s.trim().parse().map_err(|_| Error::Config(format!("{name} = `{s}` is not a number")))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
            Ok(v)
        };
        let p = ParsedConfig {
            a: parse_decimal(&self.a)?,
            b: parse_decimal(&self.b)?,
            c: parse_decimal(&self.c)?,
            nu: weight("nu", &self.nu)?,
            omega: weight("omega", &self.omega)?,
            l: parse_decimal(&self.l)?,
            m_f: self.m_f,
            n_t: self.n_t,
            m_c: self.m_c,
            k_c: self.k_c.unwrap_or(2 * self.m_c),
            theta: parse_decimal(&self.theta)?,
            length: parse_length(&self.length)?,
            r_star_tf: radius("r_star_tf", &self.r_star_tf)?,
            r_star_c: radius("r_star_c", &self.r_star_c)?,
            profile_xmax: radius("profile_xmax", &self.profile_xmax)?,
            profile_points: self.profile_points,
        };
        if p.m_f < 4 || p.n_t < 2 || p.m_c < 2 {
            return Err(Error::Config(format!(
                "truncations too small (M_F = {} ≥ 4, N_T = {} ≥ 2, M_C = {} ≥ 2 required)",
                p.m_f, p.n_t, p.m_c
            )));
        }
        if p.k_c < p.m_c {
            return Err(Error::Config(format!("K_C = {} must be at least M_C = {}", p.k_c, p.m_c)));
        }
        if !(p.length.lo() > 0.0) {
            return Err(Error::Config(format!("L = {} must be positive", p.length)));
        }
        if p.l.contains_zero() {
            return Err(Error::Config("the bundle scale l must be nonzero".into()));
        }
        if p.profile_points < 2 {
            return Err(Error::Config("profile_points must be at least 2".into()));
        }
        check_phase(p.theta, p.length)?;
        Ok(p)
    }
}

/// Parsed configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParsedConfig {
    pub a: RIval,
    pub b: RIval,
    pub c: RIval,
    pub nu: f64,
    pub omega: f64,
    pub l: RIval,
    pub m_f: usize,
    pub n_t: usize,
    pub m_c: usize,
    pub k_c: usize,
    pub theta: RIval,
    pub length: RIval,
    pub r_star_tf: f64,
    pub r_star_c: f64,
    pub profile_xmax: f64,
    pub profile_points: usize,
}

/// Parses `term (+|− term)*` where a term is a decimal, `pi`, or a decimal
/// followed by `pi` / `*pi`.
pub fn parse_length(s: &str) -> Result<RIval> {
    let bad = || Error::Config(format!("cannot parse length `{s}`"));
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err(bad());
    }
    let mut terms = Vec::new();
    let mut start = 0;
    let bytes = t.as_bytes();
    for i in 1..bytes.len() {
        let prev = bytes[i - 1].to_ascii_lowercase();
        if (bytes[i] == b'+' || bytes[i] == b'-') && prev != b'e' {
            terms.push(&t[start..i]);
            start = i;
        }
    }
    terms.push(&t[start..]);
    let mut acc = RIval::ZERO;
    for term in terms {
        let (sign, body) = match term.as_bytes()[0] {
            b'+' => (1.0, &term[1..]),
            b'-' => (-1.0, &term[1..]),
            _ => (1.0, term),
        };
        let lower = body.to_ascii_lowercase();
        let v = if let Some(coef) = lower.strip_suffix("pi") {
            let coef = coef.strip_suffix('*').unwrap_or(coef);
            let k = if coef.is_empty() { RIval::ONE } else { parse_decimal(coef).map_err(|_| bad())? };
            k * RIval::pi()
        } else {
            parse_decimal(&lower).map_err(|_| bad())?
        };
        acc = acc + v * sign;
    }
    Ok(acc)
}

/// The forcing phase at `x = L` must match the manifold phase `θ`:
/// `θ ≡ L (mod π)`.
pub fn check_phase(theta: RIval, length: RIval) -> Result<()> {
    let pi = RIval::pi();
    let k = ((length.mid() - theta.mid()) / std::f64::consts::PI).round();
    let d = length - theta - pi * k;
    if d.contains_zero() && d.width() < 1e-12 {
        Ok(())
    } else {
        Err(Error::Config(format!("θ = {theta} is not congruent to L = {length} modulo π (difference {d} after removing {k}π)")))
    }
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Output of one stage.
#[derive(Clone, Debug)]
pub struct StageOutput<C, K> {
    pub candidate: C,
    pub certificate: K,
    pub newton: NewtonReport,
}

pub fn bundle_problem(p: &ParsedConfig) -> Result<BundleProblem> {
    BundleProblem::new(p.a, p.b, p.c, p.nu, p.l, p.m_f)
}

/// Stage 1: seed, refine and validate the Floquet bundle.
pub fn prove_bundle(p: &ParsedConfig) -> Result<StageOutput<BundleCandidate, BundleCertificate>> {
    let prob = bundle_problem(p)?;
    let (candidate, newton) = bundle::seed_and_refine(&prob)?;
    let certificate = bundle::validate_bundle(&candidate, &prob)?;
    Ok(StageOutput { candidate, certificate, newton })
}

/// Stage 2: recursion, Newton polish and validation of the manifold.
pub fn prove_manifold(
    p: &ParsedConfig,
    bcand: &BundleCandidate,
    bcert: &BundleCertificate,
) -> Result<StageOutput<ManifoldCandidate, ManifoldCertificate>> {
    let prob = ManifoldProblem::from_bundle(bcert, bcand, p.n_t, p.m_f)?;
    let (candidate, newton) = manifold::seed_and_refine(&prob)?;
    let certificate = manifold::validate_manifold(&candidate, &prob, p.r_star_tf)?;
    Ok(StageOutput { candidate, certificate, newton })
}

pub fn bvp_problem(p: &ParsedConfig, mcand: &ManifoldCandidate, mcert: &ManifoldCertificate) -> Result<BvpProblem> {
    BvpProblem::new(p.omega, p.m_c, p.theta, p.length, mcert, mcand)?.with_operator_truncation(p.k_c)
}

/// Stage 3: shooting seed, Newton polish and validation of the BVP.
pub fn prove_soliton(
    p: &ParsedConfig,
    mcand: &ManifoldCandidate,
    mcert: &ManifoldCertificate,
) -> Result<StageOutput<BvpCandidate, SolitonCertificate>> {
    let prob = bvp_problem(p, mcand, mcert)?;
    let (candidate, newton) = bvp::seed_and_refine(&prob)?;
    let certificate = bvp::validate_soliton(&candidate, &prob, p.r_star_c)?;
    Ok(StageOutput { candidate, certificate, newton })
}

/// Summary of the sampled profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileMeta {
    pub xmax: f64,
    pub points: usize,
    pub max_err_bound: f64,
    pub max_abs_u: f64,
}

/// The three certificates (truncated at the first failure) bound to the
/// configuration hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofBundle {
    pub config_hash: String,
    pub proved: bool,
    /// Name of the first failing stage, if any.
    pub failed_stage: Option<String>,
    /// Heuristic remediation text for a failure.
    pub hint: Option<String>,
    pub bundle: Option<BundleCertificate>,
    pub manifold: Option<ManifoldCertificate>,
    pub soliton: Option<SolitonCertificate>,
    pub profile: Option<ProfileMeta>,
}

/// Candidates and profile produced alongside a [`ProofBundle`].
#[derive(Clone, Debug, Default)]
pub struct ProofArtifacts {
    pub bundle: Option<BundleCandidate>,
    pub manifold: Option<ManifoldCandidate>,
    pub soliton: Option<BvpCandidate>,
    pub profile: Vec<ProfileSample>,
}

fn hint_for(verdict: &Verdict, stage: &str) -> String {
    let reason = match verdict {
        Verdict::Failed(r) => r.as_str(),
        _ => "",
    };
    let fix = if reason.contains("Z1 <") {
        match stage {
            "bundle" => "raise M_F",
            "manifold" => "raise N_T or M_F",
            _ => "raise M_C or adjust ω",
        }
    } else if reason.contains("Z2 <") {
        "improve the candidate (raise truncations) or shrink r*"
    } else if reason.contains("r_min <") {
        "enlarge r* for this stage"
    } else {
        "inspect the stage diagnostics"
    };
    format!("{stage} stage {verdict}; suggestion: {fix}")
}

/// Stage-1 outcome: a certificate, or an abort of the Floquet seed that is
/// reported as a failed stage rather than as an error.
fn try_prove_bundle(p: &ParsedConfig) -> Result<std::result::Result<StageOutput<BundleCandidate, BundleCertificate>, String>> {
    match prove_bundle(p) {
        Ok(s) => Ok(Ok(s)),
        Err(Error::NoStableExponent(msg)) => {
            let fix = if msg.contains("not in a gap") { "choose (a, b) inside a spectral gap" } else { "raise M_F" };
            Ok(Err(format!("bundle stage aborted: {msg}; suggestion: {fix}")))
        }
        Err(e) => Err(e),
    }
}

/// Equispaced nodes on `[−xmax, xmax]`, exactly symmetric under `x ↦ −x`.
pub fn linspace(xmax: f64, n: usize) -> Vec<f64> {
    let d = (n - 1) as f64;
    (0..n).map(|i| xmax * (2.0 * i as f64 - d) / d).collect()
}

/// Runs all three stages, stopping at the first failed verdict.
pub fn prove_all(cfg: &RunConfig) -> Result<(ProofBundle, ProofArtifacts)> {
    let p = cfg.parse()?;
    let mut out = ProofBundle {
        config_hash: cfg.hash(),
        proved: false,
        failed_stage: None,
        hint: None,
        bundle: None,
        manifold: None,
        soliton: None,
        profile: None,
    };
    let mut art = ProofArtifacts::default();
    let fail = |out: &mut ProofBundle, stage: &str, v: &Verdict| {
        out.failed_stage = Some(stage.into());
        out.hint = Some(hint_for(v, stage));
    };

    log::info!("stage 1: Floquet bundle (M_F = {})", p.m_f);
    let s1 = match try_prove_bundle(&p)? {
        Ok(s) => s,
        Err(hint) => {
            out.failed_stage = Some("bundle".into());
            out.hint = Some(hint);
            return Ok((out, art));
        }
    };
    log::info!("bundle: {} (r_F = {:e})", s1.certificate.verdict, s1.certificate.r);
    out.bundle = Some(s1.certificate.clone());
    art.bundle = Some(s1.candidate.clone());
    if !s1.certificate.verdict.is_proved() {
        fail(&mut out, "bundle", &s1.certificate.verdict);
        return Ok((out, art));
    }

    log::info!("stage 2: stable manifold (N_T = {}, M_F = {})", p.n_t, p.m_f);
    let s2 = prove_manifold(&p, &s1.candidate, &s1.certificate)?;
    log::info!("manifold: {} (r_TF = {:e})", s2.certificate.verdict, s2.certificate.r);
    out.manifold = Some(s2.certificate.clone());
    art.manifold = Some(s2.candidate.clone());
    if !s2.certificate.verdict.is_proved() {
        fail(&mut out, "manifold", &s2.certificate.verdict);
        return Ok((out, art));
    }

    log::info!("stage 3: boundary-value problem (M_C = {})", p.m_c);
    let s3 = prove_soliton(&p, &s2.candidate, &s2.certificate)?;
    log::info!("soliton: {} (r_C = {:e})", s3.certificate.verdict, s3.certificate.r);
    out.soliton = Some(s3.certificate.clone());
    art.soliton = Some(s3.candidate.clone());
    if !s3.certificate.verdict.is_proved() {
        fail(&mut out, "soliton", &s3.certificate.verdict);
        return Ok((out, art));
    }

    let prob = bvp_problem(&p, &s2.candidate, &s2.certificate)?;
    let xs = linspace(p.profile_xmax, p.profile_points);
    art.profile = bvp::assemble_soliton(&s3.certificate, &s3.candidate, &prob, &xs)?;
    out.profile = Some(ProfileMeta {
        xmax: p.profile_xmax,
        points: p.profile_points,
        max_err_bound: art.profile.iter().map(|s| s.err_bound).fold(0.0, f64::max),
        max_abs_u: art.profile.iter().map(|s| s.u_approx.abs()).fold(0.0, f64::max),
    });
    out.proved = true;
    Ok((out, art))
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

pub const BUNDLE_CANDIDATE: &str = "bundle_candidate.json";
pub const MANIFOLD_CANDIDATE: &str = "manifold_candidate.json";
pub const SOLITON_CANDIDATE: &str = "soliton_candidate.json";
pub const PROOF_BUNDLE: &str = "proof.json";
pub const PROFILE_CSV: &str = "profile.csv";

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Writes the profile as CSV with columns `x, u_approx, err_bound, region`.
pub fn write_profile_csv<W: std::io::Write>(w: W, profile: &[ProfileSample]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for s in profile {
        wr.serialize(s).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes the proof bundle, candidates and (when proved) the profile into `dir`.
pub fn write_outputs(dir: &Path, proof: &ProofBundle, art: &ProofArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join(PROOF_BUNDLE), proof)?;
    // Candidate and profile files mirror `art`: files left over from an
    // earlier run of a later (or aborted) stage are removed.
    let remove = |name: &str| -> Result<()> {
        let f = dir.join(name);
        if f.exists() {
            std::fs::remove_file(f)?;
        }
        Ok(())
    };
    match &art.bundle {
        Some(c) => write_json(&dir.join(BUNDLE_CANDIDATE), c)?,
        None => remove(BUNDLE_CANDIDATE)?,
    }
    match &art.manifold {
        Some(c) => write_json(&dir.join(MANIFOLD_CANDIDATE), c)?,
        None => remove(MANIFOLD_CANDIDATE)?,
    }
    match &art.soliton {
        Some(c) => write_json(&dir.join(SOLITON_CANDIDATE), c)?,
        None => remove(SOLITON_CANDIDATE)?,
    }
    if art.profile.is_empty() {
        remove(PROFILE_CSV)?;
    } else {
        write_profile_csv(std::fs::File::create(dir.join(PROFILE_CSV))?, &art.profile)?;
    }
    Ok(())
}

/// Result of recomputing stored certificates.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    /// One line per checked stage.
    pub lines: Vec<String>,
    /// Fields that differ between the stored and recomputed certificates.
    pub mismatches: Vec<String>,
    /// Every stored stage recomputes to a proof.
    pub stages_proved: bool,
    /// All three stages are present.
    pub complete: bool,
}

impl VerifyReport {
    /// The stored certificates are reproduced and every stored stage is a proof.
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty() && self.stages_proved
    }

    /// [`Self::ok`] for a complete three-stage proof.
    pub fn proved(&self) -> bool {
        self.ok() && self.complete
    }
}

fn compare<T: Serialize>(stage: &str, stored: &T, fresh: &T, out: &mut Vec<String>) -> Result<()> {
    let (a, b) = (serde_json::to_value(stored)?, serde_json::to_value(fresh)?);
    if let (serde_json::Value::Object(a), serde_json::Value::Object(b)) = (&a, &b) {
        for (k, v) in a {
            if b.get(k) != Some(v) {
                out.push(format!("{stage}.{k}: stored {v} vs recomputed {}", b.get(k).unwrap_or(&serde_json::Value::Null)));
            }
        }
        for k in b.keys().filter(|k| !a.contains_key(*k)) {
            out.push(format!("{stage}.{k}: missing from the stored certificate"));
        }
    } else if a != b {
        out.push(format!("{stage}: certificates differ"));
    }
    Ok(())
}

/// Recomputes every stored certificate from the stored candidates and the
/// configuration, and compares them field by field.
pub fn verify(cfg: &RunConfig, proof: &ProofBundle, art: &ProofArtifacts) -> Result<VerifyReport> {
    let mut lines = Vec::new();
    let mut mismatches = Vec::new();
    if proof.config_hash != cfg.hash() {
        mismatches.push(format!("config hash: stored {} vs {}", proof.config_hash, cfg.hash()));
        return Ok(VerifyReport { lines, mismatches, stages_proved: false, complete: false });
    }
    let p = cfg.parse()?;
    let mut stages_proved = true;
    let mut complete = false;
    let (Some(bcert), Some(bcand)) = (&proof.bundle, &art.bundle) else {
        return Err(Error::Mismatch("bundle certificate or candidate missing".into()));
    };
    let fresh = bundle::validate_bundle(bcand, &bundle_problem(&p)?)?;
    compare("bundle", bcert, &fresh, &mut mismatches)?;
    lines.push(format!("bundle: {} (r_F = {:e})", fresh.verdict, fresh.r));
    stages_proved &= fresh.verdict.is_proved();
    if let (Some(mcert), Some(mcand)) = (&proof.manifold, &art.manifold) {
        let prob = ManifoldProblem::from_bundle(&fresh, bcand, p.n_t, p.m_f)?;
        let fm = manifold::validate_manifold(mcand, &prob, p.r_star_tf)?;
        compare("manifold", mcert, &fm, &mut mismatches)?;
        lines.push(format!("manifold: {} (r_TF = {:e})", fm.verdict, fm.r));
        stages_proved &= fm.verdict.is_proved();
        if let (Some(scert), Some(scand)) = (&proof.soliton, &art.soliton) {
            let fs = bvp::validate_soliton(scand, &bvp_problem(&p, mcand, &fm)?, p.r_star_c)?;
            compare("soliton", scert, &fs, &mut mismatches)?;
            lines.push(format!("soliton: {} (r_C = {:e})", fs.verdict, fs.r));
            stages_proved &= fs.verdict.is_proved();
            complete = true;
        }
    }
    for (name, stored, cand) in
        [("manifold", proof.manifold.is_some(), art.manifold.is_some()), ("soliton", proof.soliton.is_some(), art.soliton.is_some())]
    {
        if stored != cand {
            mismatches.push(format!("{name}: certificate and candidate must both be present or both absent"));
        }
    }
    let proved = stages_proved && complete;
    if proof.proved != proved {
        mismatches.push(format!("proved flag: stored {} vs recomputed {proved}", proof.proved));
    }
    Ok(VerifyReport { lines, mismatches, stages_proved, complete })
}

/// Loads candidates written by [`write_outputs`].
pub fn load_artifacts(dir: &Path) -> Result<ProofArtifacts> {
    let opt = |name: &str| {
        let p = dir.join(name);
        p.exists().then_some(p)
    };
    Ok(ProofArtifacts {
        bundle: opt(BUNDLE_CANDIDATE).map(|p| read_json(&p)).transpose()?,
        manifold: opt(MANIFOLD_CANDIDATE).map(|p| read_json(&p)).transpose()?,
        soliton: opt(SOLITON_CANDIDATE).map(|p| read_json(&p)).transpose()?,
        profile: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Directory-based stage commands
// ---------------------------------------------------------------------------

pub const CONFIG_FILE: &str = "config.json";

/// Proof stages in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Bundle,
    Manifold,
    Soliton,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Bundle => "bundle",
            Stage::Manifold => "manifold",
            Stage::Soliton => "soliton",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bundle" => Ok(Stage::Bundle),
            "manifold" => Ok(Stage::Manifold),
            "soliton" => Ok(Stage::Soliton),
            _ => Err(Error::Config(format!("unknown stage `{s}` (bundle, manifold, soliton)"))),
        }
    }
}

/// Certificates recomputed from stored candidates (no Newton steps).
#[derive(Clone, Debug, Default)]
pub struct Revalidated {
    pub bundle: Option<BundleCertificate>,
    pub manifold: Option<ManifoldCertificate>,
    pub soliton: Option<SolitonCertificate>,
}

fn need<T: Clone>(v: &Option<T>, what: &str, dir: &Path) -> Result<T> {
    v.clone().ok_or_else(|| Error::Precondition(format!("{what} not found in {}; run the earlier stage first", dir.display())))
}

fn require_proved(v: &Verdict, stage: &str) -> Result<()> {
    if v.is_proved() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("stored {stage} candidate does not validate: {v}")))
    }
}

/// Re-validates the stored candidates of every stage before `stage`.
pub fn revalidate_before(p: &ParsedConfig, art: &ProofArtifacts, stage: Stage, dir: &Path) -> Result<Revalidated> {
    let mut out = Revalidated::default();
    if stage > Stage::Bundle {
        let bcand = need(&art.bundle, BUNDLE_CANDIDATE, dir)?;
        let bc = bundle::validate_bundle(&bcand, &bundle_problem(p)?)?;
        require_proved(&bc.verdict, "bundle")?;
        if stage > Stage::Manifold {
            let mcand = need(&art.manifold, MANIFOLD_CANDIDATE, dir)?;
            let prob = ManifoldProblem::from_bundle(&bc, &bcand, p.n_t, p.m_f)?;
            let mc = manifold::validate_manifold(&mcand, &prob, p.r_star_tf)?;
            require_proved(&mc.verdict, "manifold")?;
            out.manifold = Some(mc);
        }
        out.bundle = Some(bc);
    }
    Ok(out)
}

/// Runs one stage in `dir`, reusing (and re-validating) the candidates of
/// the earlier stages stored there. Writes the configuration, the new
/// candidate and an updated `proof.json` truncated after `stage`.
pub fn run_stage(cfg: &RunConfig, dir: &Path, stage: Stage) -> Result<ProofBundle> {
    let p = cfg.parse()?;
    std::fs::create_dir_all(dir)?;
    let mut art = if stage == Stage::Bundle { ProofArtifacts::default() } else { load_artifacts(dir)? };
    let prev = revalidate_before(&p, &art, stage, dir)?;
    let mut proof = ProofBundle {
        config_hash: cfg.hash(),
        proved: false,
        failed_stage: None,
        hint: None,
        bundle: prev.bundle,
        manifold: prev.manifold,
        soliton: None,
        profile: None,
    };
    let verdict = match stage {
        Stage::Bundle => {
            art.manifold = None;
            art.soliton = None;
            match try_prove_bundle(&p)? {
                Ok(s) => {
                    art.bundle = Some(s.candidate);
                    proof.bundle = Some(s.certificate);
                    proof.bundle.as_ref().map(|c| c.verdict.clone())
                }
                Err(hint) => {
                    art.bundle = None;
                    proof.failed_stage = Some("bundle".into());
                    proof.hint = Some(hint);
                    None
                }
            }
        }
        Stage::Manifold => {
            let bcand = need(&art.bundle, BUNDLE_CANDIDATE, dir)?;
            let s = prove_manifold(&p, &bcand, proof.bundle.as_ref().expect("revalidated"))?;
            art.manifold = Some(s.candidate);
            art.soliton = None;
            proof.manifold = Some(s.certificate);
            proof.manifold.as_ref().map(|c| c.verdict.clone())
        }
        Stage::Soliton => {
            let mcand = need(&art.manifold, MANIFOLD_CANDIDATE, dir)?;
            let s = prove_soliton(&p, &mcand, proof.manifold.as_ref().expect("revalidated"))?;
            art.soliton = Some(s.candidate);
            proof.soliton = Some(s.certificate);
            proof.soliton.as_ref().map(|c| c.verdict.clone())
        }
    };
    match verdict {
        Some(v) if v.is_proved() => proof.proved = stage == Stage::Soliton,
        Some(v) => {
            proof.failed_stage = Some(stage.name().into());
            proof.hint = Some(hint_for(&v, stage.name()));
        }
        None => {}
    }
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    write_outputs(dir, &proof, &art)?;
    Ok(proof)
}

/// Runs the whole pipeline and writes every output (configuration,
/// candidates, `proof.json`, and `profile.csv` when proved) into `dir`.
pub fn run_all(cfg: &RunConfig, dir: &Path) -> Result<ProofBundle> {
    let (proof, art) = prove_all(cfg)?;
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    write_outputs(dir, &proof, &art)?;
    Ok(proof)
}

/// Newton re-polish of a stored candidate; the refined candidate replaces
/// the stored one.
pub fn refine_stage(cfg: &RunConfig, dir: &Path, stage: Stage) -> Result<NewtonReport> {
    let p = cfg.parse()?;
    let art = load_artifacts(dir)?;
    let prev = revalidate_before(&p, &art, stage, dir)?;
    match stage {
        Stage::Bundle => {
            let c = need(&art.bundle, BUNDLE_CANDIDATE, dir)?;
            let (c, rep) = bundle::refine(&c, &bundle_problem(&p)?)?;
            write_json(&dir.join(BUNDLE_CANDIDATE), &c)?;
            Ok(rep)
        }
        Stage::Manifold => {
            let bcand = need(&art.bundle, BUNDLE_CANDIDATE, dir)?;
            let prob = ManifoldProblem::from_bundle(prev.bundle.as_ref().expect("revalidated"), &bcand, p.n_t, p.m_f)?;
            let c = need(&art.manifold, MANIFOLD_CANDIDATE, dir)?;
            let (c, rep) = manifold::refine(&c, &prob)?;
            write_json(&dir.join(MANIFOLD_CANDIDATE), &c)?;
            Ok(rep)
        }
        Stage::Soliton => {
            let mcand = need(&art.manifold, MANIFOLD_CANDIDATE, dir)?;
            let prob = bvp_problem(&p, &mcand, prev.manifold.as_ref().expect("revalidated"))?;
            let c = need(&art.soliton, SOLITON_CANDIDATE, dir)?;
            let (c, rep) = bvp::refine(&c, &prob)?;
            write_json(&dir.join(SOLITON_CANDIDATE), &c)?;
            Ok(rep)
        }
    }
}

/// Re-validates all stored stages and samples the certified profile on
/// `points` equispaced nodes of `[−xmax, xmax]`.
pub fn sample_dir(cfg: &RunConfig, dir: &Path, xmax: f64, points: usize) -> Result<Vec<ProfileSample>> {
    if !(xmax > 0.0 && xmax.is_finite()) || points < 2 {
        return Err(Error::Config("sampling needs xmax > 0 and at least 2 points".into()));
    }
    let p = cfg.parse()?;
    let art = load_artifacts(dir)?;
    let prev = revalidate_before(&p, &art, Stage::Soliton, dir)?;
    let mcand = need(&art.manifold, MANIFOLD_CANDIDATE, dir)?;
    let scand = need(&art.soliton, SOLITON_CANDIDATE, dir)?;
    let prob = bvp_problem(&p, &mcand, prev.manifold.as_ref().expect("revalidated"))?;
    let cert = bvp::validate_soliton(&scand, &prob, p.r_star_c)?;
    require_proved(&cert.verdict, "soliton")?;
    bvp::assemble_soliton(&cert, &scand, &prob, &linspace(xmax, points))
}

/// Loads `config.json`, `proof.json` and the candidates from `dir` and
/// re-verifies them.
pub fn verify_dir(dir: &Path) -> Result<VerifyReport> {
    let cfg = RunConfig::load(&dir.join(CONFIG_FILE))?;
    let proof: ProofBundle = read_json(&dir.join(PROOF_BUNDLE))?;
    let art = load_artifacts(dir)?;
    verify(&cfg, &proof, &art)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_expressions() {
        let l = parse_length("1+2pi").unwrap();
        assert!(l.contains(1.0 + 2.0 * std::f64::consts::PI));
        assert!(l.width() < 1e-14);
        assert!(parse_length("0.5*pi").unwrap().contains(std::f64::consts::FRAC_PI_2));
        assert!(parse_length("7.5").unwrap().contains(7.5));
        assert!(parse_length("pi-1e-3").unwrap().contains(std::f64::consts::PI - 1e-3));
        assert!(parse_length("1+").is_err());
        assert!(parse_length("two").is_err());
    }

    #[test]
    fn phase_condition() {
        let main = RunConfig::main_theorem();
        main.parse().unwrap();
        let bad = RunConfig { theta: "1.5".into(), ..main.clone() };
        assert!(matches!(bad.parse(), Err(Error::Config(_))));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::main_theorem();
        assert_eq!(a.hash(), RunConfig::main_theorem().hash());
        assert_ne!(a.hash(), RunConfig { m_c: 50, ..a.clone() }.hash());
        let back = RunConfig::from_json(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back.hash(), a.hash());
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut v = serde_json::to_value(RunConfig::main_theorem()).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }
}
