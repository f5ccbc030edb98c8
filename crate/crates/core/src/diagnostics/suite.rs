use std::fmt;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::chain::{build_chain, total_variation};
use super::flip::flip_distance;
use super::kolmogorov::{kolmogorov_check, verify_witness, RELATIVE_TOLERANCE};
use super::toy::ToyNetwork;
use super::DiagnosticsError;
use crate::sampler::{init_grid, pick_block, run_observed, CellConstraints, Grid, InitMode, SamplerConfig};
use crate::score::{NoteToken, Voice, VoiceSeq};

pub const SUITES: [&str; 6] = ["all", "gibbs", "kolmogorov", "sampler", "blocks", "representation"];

/// Independent sampler runs behind the agreement check.
pub const AGREEMENT_RUNS: usize = 100_000;
pub const AGREEMENT_TOLERANCE: f64 = 0.05;
pub const STATIONARY_TOLERANCE: f64 = 1e-8;
pub const WITNESS_MIN_DEVIATION: f64 = 1e-3;
pub const BLOCK_DRAWS: usize = 100_000;
pub const BLOCK_MIN_P: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Informational, never fails the suite.
    Report,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Report => "report",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "op", content = "value")]
pub enum Comparison {
    Below(f64),
    Above(f64),
    Equal(f64),
}

impl Comparison {
    fn holds(self, metric: f64) -> bool {
        match self {
            Comparison::Below(t) => metric < t,
            Comparison::Above(t) => metric > t,
            Comparison::Equal(t) => metric == t,
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Comparison::Below(t) => write!(f, "<{t:e}"),
            Comparison::Above(t) => write!(f, ">{t:e}"),
            Comparison::Equal(t) => write!(f, "={t}"),
        }
    }
}

/// One line of a diagnostics report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub verdict: Verdict,
    pub metric: f64,
    pub tolerance: Comparison,
    pub detail: String,
}

impl CheckRecord {
    fn new(name: impl Into<String>, metric: f64, tolerance: Comparison, detail: impl Into<String>) -> Self {
        Self::gated(name, metric, tolerance, true, detail)
    }

    /// Passes only when `ok` holds as well as the comparison.
    fn gated(name: impl Into<String>, metric: f64, tolerance: Comparison, ok: bool, detail: impl Into<String>) -> Self {
        let verdict = if ok && tolerance.holds(metric) { Verdict::Pass } else { Verdict::Fail };
        Self {
            name: name.into(),
            verdict,
            metric,
            tolerance,
            detail: detail.into(),
        }
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

impl fmt::Display for CheckRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} verdict={} metric={:e} tolerance={}",
            self.name, self.verdict, self.metric, self.tolerance
        )?;
        if !self.detail.is_empty() {
            write!(f, " detail={:?}", self.detail)?;
        }
        Ok(())
    }
}

/// Potts-style joint: weight `exp(beta · agreements)` over pairs of cells
/// adjacent in time within a voice or sharing a tick across voices.
pub fn coupled_joint(voices: usize, len: usize, n: usize, beta: f64) -> Vec<f64> {
    let cells = voices * len;
    (0..n.pow(cells as u32))
        .map(|s| {
            let d = |c: usize| (s / n.pow(c as u32)) % n;
            let mut agreements = 0;
            for c in 0..cells {
                let (v, t) = (c / len, c % len);
                if t + 1 < len && d(c) == d(c + 1) {
                    agreements += 1;
                }
                if v + 1 < voices && d(c) == d(c + len) {
                    agreements += 1;
                }
            }
            (beta * agreements as f64).exp()
        })
        .collect()
}

/// The acceptance toy: two voices, three ticks, three values, coupled joint.
pub fn acceptance_toy() -> ToyNetwork {
    ToyNetwork::from_joint("coupled", 2, 3, 3, &coupled_joint(2, 3, 3, 1.0)).expect("toy within bounds")
}

pub fn incompatible_toy() -> ToyNetwork {
    ToyNetwork::from_cell_joints("incompatible", 2, 1, 2, &[vec![0.4, 0.1, 0.2, 0.3], vec![0.1, 0.4, 0.3, 0.2]])
        .expect("toy within bounds")
}

/// Toys exercised by the suite. Those with a `joint` are compatible.
pub fn shipped_toys() -> Vec<ToyNetwork> {
    let t = |r: Result<ToyNetwork, DiagnosticsError>| r.expect("toy within bounds");
    // each voice may not repeat a value at consecutive ticks
    let sparse: Vec<f64> = (0..81)
        .map(|s: usize| {
            let d = |c: usize| (s / 3usize.pow(c as u32)) % 3;
            if d(0) == d(1) || d(2) == d(3) {
                0.0
            } else {
                1.0 + d(0) as f64
            }
        })
        .collect();
    vec![
        t(ToyNetwork::from_joint("single", 1, 1, 2, &[0.3, 0.7])),
        t(ToyNetwork::from_joint("pair", 2, 1, 2, &[0.1, 0.2, 0.3, 0.4])),
        t(ToyNetwork::from_joint("uniform", 2, 3, 3, &[1.0; 729])),
        acceptance_toy(),
        t(ToyNetwork::from_joint("random", 2, 2, 3, &ToyNetwork::random_joint(2, 2, 3, 0.05, 17).expect("bounds"))),
        t(ToyNetwork::from_joint("sparse", 2, 2, 3, &sparse)),
        t(ToyNetwork::point_mass("point-mass", 2, 3, 3, &[0, 1, 2, 2, 1, 0])),
        incompatible_toy(),
    ]
}

fn smoothing_note(toy: &ToyNetwork) -> String {
    match toy.smoothing {
        Some(e) => format!("smoothing={e:e}"),
        None => String::new(),
    }
}

/// Final-state law over `runs` independent runs of the sampler on `toy`,
/// each of `iterations` updates (100 per cell when `None`) from a uniform
/// start. Run `r` uses seed `seed + r`.
pub fn output_distribution(toy: &ToyNetwork, runs: usize, iterations: Option<usize>, seed: u64) -> Result<Vec<f64>, DiagnosticsError> {
    let sizes = vec![toy.n; toy.voices];
    let constraints = CellConstraints::unconstrained(&sizes, toy.len);
    let mut counts = vec![0u64; toy.states()];
    for r in 0..runs as u64 {
        let config = SamplerConfig {
            iterations,
            ..SamplerConfig::with_seed(seed.wrapping_add(r))
        };
        let mut rng = crate::rng_from_seed(config.seed);
        let init = init_grid(&sizes, &constraints, InitMode::Uniform, None, None, &mut rng)?;
        let (grid, _) = crate::sampler::run(toy, &constraints, &config, init, &mut rng)?;
        counts[toy.state_of(&grid)] += 1;
    }
    Ok(frequencies(&counts))
}

/// Visit frequencies of one run of `iterations` updates, counting the state
/// after every update.
pub fn empirical_distribution(toy: &ToyNetwork, iterations: usize, seed: u64) -> Result<Vec<f64>, DiagnosticsError> {
    let sizes = vec![toy.n; toy.voices];
    let constraints = CellConstraints::unconstrained(&sizes, toy.len);
    let mut rng = crate::rng_from_seed(seed);
    let init = init_grid(&sizes, &constraints, InitMode::Uniform, None, None, &mut rng)?;
    let config = SamplerConfig {
        iterations: Some(iterations),
        ..SamplerConfig::with_seed(seed)
    };
    let mut counts = vec![0u64; toy.states()];
    run_observed(toy, &constraints, &config, init, &mut rng, |g: &Grid| counts[toy.state_of(g)] += 1)?;
    Ok(frequencies(&counts))
}

fn frequencies(counts: &[u64]) -> Vec<f64> {
    let total = counts.iter().sum::<u64>().max(1) as f64;
    counts.iter().map(|&c| c as f64 / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockLaw {
    /// Counts per admissible unordered tick pair, pairs in lexicographic order.
    pub counts: Vec<((usize, usize), u64)>,
    pub chi_square: f64,
    pub p_value: f64,
    /// Draws with a pair closer than the minimum distance or the wrong size.
    pub violations: usize,
}

/// Draws `draws` blocks of `block_size = 2` over four voices and `len`
/// ticks, and tests the tick pairs for uniformity over the admissible ones.
pub fn block_law(len: usize, min_distance: usize, draws: usize, seed: u64) -> BlockLaw {
    let free: Vec<(usize, usize)> = (0..4).flat_map(|v| (0..len).map(move |t| (v, t))).collect();
    let pairs: Vec<(usize, usize)> = (0..len)
        .flat_map(|a| (a..len).map(move |b| (a, b)))
        .filter(|&(a, b)| b - a >= min_distance)
        .collect();
    let mut counts = vec![0u64; pairs.len()];
    let mut violations = 0;
    let mut rng = crate::rng_from_seed(seed);
    for _ in 0..draws {
        let pick = pick_block(&free, 2, min_distance, &mut rng);
        if pick.cells.len() != 2 || pick.fell_back {
            violations += 1;
            continue;
        }
        let (a, b) = (pick.cells[0].1, pick.cells[1].1);
        match pairs.binary_search(&(a.min(b), a.max(b))) {
            Ok(i) => counts[i] += 1,
            Err(_) => violations += 1,
        }
    }
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / pairs.len() as f64;
    let chi_square: f64 = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let p_value = if pairs.len() > 1 {
        ChiSquared::new((pairs.len() - 1) as f64).map_or(f64::NAN, |d| 1.0 - d.cdf(chi_square))
    } else {
        1.0
    };
    BlockLaw {
        counts: pairs.into_iter().zip(counts).collect(),
        chi_square,
        p_value,
        violations,
    }
}

fn gibbs_checks(out: &mut Vec<CheckRecord>) -> Result<(), DiagnosticsError> {
    for toy in shipped_toys() {
        let chain = build_chain(&toy)?;
        let note = smoothing_note(&toy);
        out.push(CheckRecord::new(
            format!("gibbs.rows.{}", toy.name),
            chain.max_row_error(),
            Comparison::Below(1e-12),
            "",
        ));
        let exact = chain.exact.as_deref();
        let power_gap = exact.map_or(0.0, |e| total_variation(e, &chain.stationary));
        out.push(CheckRecord::gated(
            format!("gibbs.power.{}", toy.name),
            power_gap,
            Comparison::Below(STATIONARY_TOLERANCE),
            chain.power_converged,
            format!("iterations={}", chain.power_iterations),
        ));
        if let Some(joint) = &toy.joint {
            out.push(CheckRecord::new(
                format!("gibbs.stationary.{}", toy.name),
                total_variation(chain.best_stationary(), joint),
                Comparison::Below(STATIONARY_TOLERANCE),
                note,
            ));
        }
    }
    Ok(())
}

fn kolmogorov_checks(out: &mut Vec<CheckRecord>) -> Result<(), DiagnosticsError> {
    for (i, toy) in shipped_toys().into_iter().enumerate() {
        let chain = build_chain(&toy)?;
        let report = kolmogorov_check(&toy, &chain, 1000, i as u64);
        let detail = format!("cycles={} {}", report.cycles_checked, smoothing_note(&toy));
        if toy.joint.is_some() {
            out.push(CheckRecord::gated(
                format!("kolmogorov.reversible.{}", toy.name),
                report.max_deviation,
                Comparison::Below(RELATIVE_TOLERANCE),
                report.reversible,
                detail.trim_end(),
            ));
        } else {
            let verified = report.witness.as_ref().and_then(|w| verify_witness(&toy, w)).unwrap_or(0.0);
            let cycle = report.witness.as_ref().map(|w| format!(" witness={:?}", w.cycle)).unwrap_or_default();
            out.push(CheckRecord::gated(
                format!("kolmogorov.witness.{}", toy.name),
                verified,
                Comparison::Above(WITNESS_MIN_DEVIATION),
                !report.reversible,
                format!("{}{cycle}", detail.trim_end()),
            ));
        }
    }
    Ok(())
}

fn sampler_checks(out: &mut Vec<CheckRecord>) -> Result<(), DiagnosticsError> {
    let toy = acceptance_toy();
    let chain = build_chain(&toy)?;
    let pi = chain.best_stationary();
    let law = output_distribution(&toy, AGREEMENT_RUNS, None, 0)?;
    out.push(CheckRecord::new(
        format!("sampler.agreement.{}", toy.name),
        total_variation(&law, pi),
        Comparison::Below(AGREEMENT_TOLERANCE),
        format!("runs={AGREEMENT_RUNS} updates_per_run={}", 100 * toy.cells()),
    ));
    let visits = empirical_distribution(&toy, 100_000, 0)?;
    out.push(CheckRecord {
        name: format!("sampler.visits.{}", toy.name),
        verdict: Verdict::Report,
        metric: total_variation(&visits, pi),
        tolerance: Comparison::Below(AGREEMENT_TOLERANCE),
        detail: "one chain of 100000 updates, visit frequencies".into(),
    });
    Ok(())
}

fn block_checks(out: &mut Vec<CheckRecord>) {
    let law = block_law(10, 5, BLOCK_DRAWS, 0);
    out.push(CheckRecord::new(
        "blocks.distance",
        law.violations as f64,
        Comparison::Equal(0.0),
        format!("draws={BLOCK_DRAWS}"),
    ));
    out.push(CheckRecord::gated(
        "blocks.uniform",
        law.p_value,
        Comparison::Above(BLOCK_MIN_P),
        law.counts.len() == 15,
        format!("pairs={} chi2={:.3}", law.counts.len(), law.chi_square),
    ));
}

fn representation_checks(out: &mut Vec<CheckRecord>) -> Result<(), DiagnosticsError> {
    let pitch = |s: &str| s.parse::<NoteToken>().ok().and_then(|t| t.pitch()).expect("literal pitch");
    for d in [1, 2, 4, 8, 16] {
        let mut tokens = vec![NoteToken::Pitch(pitch("C5"))];
        tokens.extend([NoteToken::Hold; 3]);
        tokens.push(NoteToken::Pitch(pitch("E5")));
        tokens.extend(std::iter::repeat_n(NoteToken::Hold, d - 1));
        tokens.push(NoteToken::Pitch(pitch("G4")));
        let (hold, roll) = flip_distance(&VoiceSeq::new(Voice::Soprano, tokens), 5, pitch("D5"))?;
        let off = hold.abs_diff(1) + roll.abs_diff(d);
        out.push(CheckRecord::new(
            format!("representation.flip.d{d}"),
            off as f64,
            Comparison::Equal(0.0),
            format!("hold={hold} roll={roll}"),
        ));
    }
    Ok(())
}

/// Runs one of [`SUITES`] and returns its records.
pub fn run_suite(name: &str) -> Result<Vec<CheckRecord>, DiagnosticsError> {
    let mut out = Vec::new();
    let all = name == "all";
    if !SUITES.contains(&name) {
        return Err(DiagnosticsError::UnknownSuite(name.to_string()));
    }
    if all || name == "gibbs" {
        gibbs_checks(&mut out)?;
    }
    if all || name == "kolmogorov" {
        kolmogorov_checks(&mut out)?;
    }
    if all || name == "representation" {
        representation_checks(&mut out)?;
    }
    if all || name == "blocks" {
        block_checks(&mut out);
    }
    if all || name == "sampler" {
        sampler_checks(&mut out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suites_pass() {
        for suite in ["gibbs", "kolmogorov", "representation", "blocks"] {
            let records = run_suite(suite).unwrap();
            assert!(!records.is_empty());
            for r in &records {
                assert!(!r.failed(), "{r}");
            }
        }
    }

    #[test]
    fn smoothing_is_disclosed() {
        let records = run_suite("gibbs").unwrap();
        let sparse = records.iter().find(|r| r.name == "gibbs.stationary.sparse").unwrap();
        assert!(sparse.detail.contains("smoothing=1e-6"));
    }

    #[test]
    fn record_format_and_unknown_suite() {
        let r = CheckRecord::new("x", 0.5, Comparison::Below(1.0), "");
        assert_eq!(r.to_string(), "check=x verdict=pass metric=5e-1 tolerance=<1e0");
        let r = CheckRecord::new("y", 0.5, Comparison::Above(1.0), "a b");
        assert_eq!(r.to_string(), "check=y verdict=fail metric=5e-1 tolerance=>1e0 detail=\"a b\"");
        assert!(matches!(run_suite("nope"), Err(DiagnosticsError::UnknownSuite(_))));
    }

    #[test]
    fn agreement_on_a_small_toy() {
        let toy = &shipped_toys()[1];
        let law = output_distribution(toy, 20_000, None, 3).unwrap();
        assert!(total_variation(&law, toy.joint.as_ref().unwrap()) < 0.02);
    }

    #[test]
    fn block_law_sees_all_pairs() {
        let law = block_law(10, 5, 30_000, 1);
        assert_eq!(law.counts.len(), 15);
        assert_eq!(law.violations, 0);
        assert!(law.counts.iter().all(|c| c.1 > 1500));
    }
}
