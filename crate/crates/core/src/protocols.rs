//! Builders for two-resource competition networks and outcome classification.
//!
//! Unit convention: the volume is given in ml, resource and cell numbers are
//! absolute counts inside that volume, first-order constants are per minute
//! and second-order constants are per ml per minute, so their pair rate is
//! `alpha / v`. Zero-rate reactions are left out of the built network and
//! listed in [`Brn::elided`].

use serde::{Deserialize, Serialize};

use crate::brn::{Brn, BrnBuilder, Configuration, GrowthRate, SpeciesId};
use crate::error::{Error, Result};
use crate::ssa::Trajectory;

/// Resource-limited growth `gamma(R) = max_rate * R / R(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthSpec {
    /// Rate at the initial resource count (per minute).
    pub max_rate: f64,
    /// Initial resource count `R(0)`.
    pub initial: f64,
    /// Explicit growth bound; defaults to `max_rate`, which is only valid
    /// when the resource never exceeds its initial count.
    pub bound: Option<f64>,
}

impl GrowthSpec {
    pub fn new(max_rate: f64, initial: f64) -> Self {
        Self {
            max_rate,
            initial,
            bound: None,
        }
    }

    pub fn bound(&self) -> f64 {
        self.bound.unwrap_or(self.max_rate)
    }

    /// `R(0)` rounded to a count.
    pub fn initial_count(&self) -> u64 {
        self.initial.round() as u64
    }

    /// Reference count of the rate law; the rounded initial count, so the
    /// rate starts exactly at `max_rate`.
    fn reference(&self) -> f64 {
        self.initial_count().max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoResourceParams {
    pub rho1_in: f64,
    pub rho2_in: f64,
    pub rho_out: f64,
    pub delta: f64,
    pub gamma1: GrowthSpec,
    pub gamma2: GrowthSpec,
    pub volume_ml: f64,
}

impl TwoResourceParams {
    /// Closed 1 ul culture: 20 min doubling on R1, 8% of that on R2,
    /// `[R1] = 2e6 / ml`, `[R2] = 1e8 / ml`, death `1e-4 / min`.
    pub fn table1() -> Self {
        let volume_ml = 1e-3;
        Self {
            rho1_in: 0.0,
            rho2_in: 0.0,
            rho_out: 0.0,
            delta: 1e-4,
            gamma1: GrowthSpec::new(1.0 / 20.0, 2e6 * volume_ml),
            gamma2: GrowthSpec::new(1.0 / 20.0 * 0.08, 1e8 * volume_ml),
            volume_ml,
        }
    }

    /// Same concentrations in `scale` times the volume.
    pub fn scaled(&self, scale: f64) -> Self {
        let mut out = *self;
        out.volume_ml *= scale;
        out.gamma1.initial *= scale;
        out.gamma2.initial *= scale;
        out
    }

    /// Summed bound on the per-cell birth rate from both resources.
    pub fn gamma_sum_bound(&self) -> f64 {
        self.gamma1.bound() + self.gamma2.bound()
    }

    pub fn check(&self) -> Result<()> {
        let named = [
            ("rho1_in", self.rho1_in),
            ("rho2_in", self.rho2_in),
            ("rho_out", self.rho_out),
            ("delta", self.delta),
            ("gamma1_max", self.gamma1.max_rate),
            ("gamma2_max", self.gamma2.max_rate),
            ("R1_0", self.gamma1.initial),
            ("R2_0", self.gamma2.initial),
        ];
        for (name, value) in named {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {value} must be >= 0")));
            }
        }
        if !(self.volume_ml > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "volume_ml = {} must be > 0",
                self.volume_ml
            )));
        }
        for (name, g) in [("R1_0", &self.gamma1), ("R2_0", &self.gamma2)] {
            if g.max_rate > 0.0 && !(g.initial > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0 when its growth rate is")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnihilationParams {
    pub alpha: f64,
    pub alpha_prime: Option<f64>,
    pub intermediate: bool,
}

impl AnnihilationParams {
    pub fn direct(alpha: f64) -> Self {
        Self {
            alpha,
            alpha_prime: None,
            intermediate: false,
        }
    }

    pub fn conjugation(alpha: f64, alpha_prime: f64) -> Self {
        Self {
            alpha,
            alpha_prime: Some(alpha_prime),
            intermediate: true,
        }
    }

    /// Conjugation rate `5e-10 / (ml min)` and intermediate death `0.1 / min`.
    pub fn table1() -> Self {
        Self::conjugation(5e-10, 0.1)
    }
}

/// A two-resource network with named handles to its species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoResource {
    pub brn: Brn,
    pub r1: SpeciesId,
    pub r2: SpeciesId,
    pub cells: Vec<SpeciesId>,
    pub params: TwoResourceParams,
}

struct Staged {
    builder: BrnBuilder,
    r1: SpeciesId,
    r2: SpeciesId,
    cells: Vec<SpeciesId>,
}

fn stage_two_resource(params: &TwoResourceParams, cell_types: &[&str]) -> Result<Staged> {
    params.check()?;
    if cell_types.is_empty() {
        return Err(Error::InvalidParameter("at least one cell type required".into()));
    }
    let mut b = BrnBuilder::new().volume(params.volume_ml).elide_zero_rates(true);
    let r1 = b.species("R1")?;
    let r2 = b.species("R2")?;
    let cells = cell_types
        .iter()
        .map(|name| b.cell_type(name))
        .collect::<Result<Vec<_>>>()?;

    b.mass_action("R1 in-flow", &[], &[(r1, 1)], params.rho1_in);
    b.mass_action("R2 in-flow", &[], &[(r2, 1)], params.rho2_in);
    b.mass_action("R1 out-flow", &[(r1, 1)], &[], params.rho_out);
    b.mass_action("R2 out-flow", &[(r2, 1)], &[], params.rho_out);

    let g1 = params.gamma1;
    let g2 = params.gamma2;
    for (&x, name) in cells.iter().zip(cell_types) {
        let rate1 = GrowthRate::resource_limited(r1, g1.max_rate, g1.reference());
        let rate2 = GrowthRate::resource_limited(r2, g2.max_rate, g2.reference());
        b.growth(&format!("{name} growth on R1"), x, &[(r1, 1)], &[], rate1, g1.bound());
        b.growth(&format!("{name} growth on R2"), x, &[(r2, 1)], &[], rate2, g2.bound());
        b.mass_action(&format!("{name} death"), &[(x, 1)], &[], params.delta);
        b.mass_action(&format!("{name} out-flow"), &[(x, 1)], &[], params.rho_out);
    }
    Ok(Staged { builder: b, r1, r2, cells })
}

/// Resource in/out-flow plus growth on each resource, death and out-flow for
/// every cell type.
pub fn build_two_resource(params: &TwoResourceParams, cell_types: &[&str]) -> Result<TwoResource> {
    let staged = stage_two_resource(params, cell_types)?;
    Ok(TwoResource {
        brn: staged.builder.build(),
        r1: staged.r1,
        r2: staged.r2,
        cells: staged.cells,
        params: *params,
    })
}

/// A competition network between cell types `A` and `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolBrn {
    pub brn: Brn,
    pub a: SpeciesId,
    pub b: SpeciesId,
    pub r1: SpeciesId,
    pub r2: SpeciesId,
    pub ab: Option<SpeciesId>,
    pub params: TwoResourceParams,
}

impl ProtocolBrn {
    /// Initial state with the given cell counts and full resources.
    pub fn initial(&self, a: u64, b: u64) -> Configuration {
        let mut config = Configuration::zeros(self.brn.species_count());
        if let Some(d) = self.brn.dummy {
            config.set(d, 1);
        }
        config.set(self.r1, self.params.gamma1.initial_count());
        config.set(self.r2, self.params.gamma2.initial_count());
        config.set(self.a, a);
        config.set(self.b, b);
        config
    }

    /// Species written to trajectory files: everything except the dummy.
    pub fn observed_species(&self) -> Vec<SpeciesId> {
        self.brn
            .species
            .iter()
            .map(|s| s.id)
            .filter(|id| Some(*id) != self.brn.dummy)
            .collect()
    }
}

fn pair_names(names: [&str; 2]) -> Result<[&str; 2]> {
    if names[0] == names[1] {
        return Err(Error::DuplicateSpecies(names[0].to_string()));
    }
    Ok(names)
}

fn finish(staged: Staged, params: &TwoResourceParams, ab: Option<SpeciesId>) -> ProtocolBrn {
    ProtocolBrn {
        brn: staged.builder.build(),
        a: staged.cells[0],
        b: staged.cells[1],
        r1: staged.r1,
        r2: staged.r2,
        ab,
        params: *params,
    }
}

/// Two-resource network for `A` and `B` without direct interaction.
pub fn build_naive(params: &TwoResourceParams) -> Result<ProtocolBrn> {
    let staged = stage_two_resource(params, &["A", "B"])?;
    Ok(finish(staged, params, None))
}

/// Naive network plus `A + B -> A` and `A + B -> B` at rate `alpha`.
pub fn build_mutual_annihilation(params: &TwoResourceParams, ann: &AnnihilationParams) -> Result<ProtocolBrn> {
    build_mutual_annihilation_labeled(params, ann, ["A", "B"])
}

/// [`build_mutual_annihilation`] with custom cell-type names; the first name
/// takes the `a` role.
pub fn build_mutual_annihilation_labeled(
    params: &TwoResourceParams,
    ann: &AnnihilationParams,
    names: [&str; 2],
) -> Result<ProtocolBrn> {
    if ann.intermediate {
        return Err(Error::InvalidParameter(
            "mutual annihilation has no intermediate type; use the conjugation variant".into(),
        ));
    }
    if !(ann.alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("alpha = {} must be >= 0", ann.alpha)));
    }
    let names = pair_names(names)?;
    let mut staged = stage_two_resource(params, &names)?;
    let (a, b) = (staged.cells[0], staged.cells[1]);
    staged
        .builder
        .mass_action(&format!("{} kills {}", names[0], names[1]), &[(a, 1), (b, 1)], &[(a, 1)], ann.alpha);
    staged
        .builder
        .mass_action(&format!("{} kills {}", names[1], names[0]), &[(a, 1), (b, 1)], &[(b, 1)], ann.alpha);
    Ok(finish(staged, params, None))
}

/// Conjugation with a short-lived doubly-plasmid type:
/// `A + B -> A + AB`, `A + B -> AB + B`, `AB -> 0` at `alpha_prime`.
/// `AB` neither feeds, grows nor conjugates.
pub fn build_conjugation_variant(params: &TwoResourceParams, ann: &AnnihilationParams) -> Result<ProtocolBrn> {
    let alpha_prime = match (ann.intermediate, ann.alpha_prime) {
        (true, Some(ap)) if ap > 0.0 => ap,
        _ => {
            return Err(Error::InvalidParameter(
                "conjugation variant needs intermediate = true and alpha_prime > 0".into(),
            ))
        }
    };
    if !(ann.alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("alpha = {} must be >= 0", ann.alpha)));
    }
    let mut staged = stage_two_resource(params, &["A", "B"])?;
    let (a, b) = (staged.cells[0], staged.cells[1]);
    let ab = staged.builder.species("AB")?;
    staged
        .builder
        .mass_action("A conjugates B", &[(a, 1), (b, 1)], &[(a, 1), (ab, 1)], ann.alpha);
    staged
        .builder
        .mass_action("B conjugates A", &[(a, 1), (b, 1)], &[(ab, 1), (b, 1)], ann.alpha);
    staged
        .builder
        .mass_action("AB death", &[(ab, 1)], &[], alpha_prime);
    Ok(finish(staged, params, Some(ab)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Naive,
    MutualAnnihilation,
    Conjugation,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Naive => "naive",
            ProtocolKind::MutualAnnihilation => "mutual_annihilation",
            ProtocolKind::Conjugation => "conjugation",
        }
    }
}

/// Everything needed to build one of the competition networks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub params: TwoResourceParams,
    pub alpha: f64,
    pub alpha_prime: f64,
}

impl ProtocolSpec {
    /// Closed 1 ul culture with the conjugation constants.
    pub fn table1(kind: ProtocolKind) -> Self {
        let ann = AnnihilationParams::table1();
        Self {
            kind,
            params: TwoResourceParams::table1(),
            alpha: ann.alpha,
            alpha_prime: ann.alpha_prime.unwrap_or(0.0),
        }
    }

    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            params: self.params.scaled(scale),
            ..*self
        }
    }

    pub fn build(&self) -> Result<ProtocolBrn> {
        match self.kind {
            ProtocolKind::Naive => build_naive(&self.params),
            ProtocolKind::MutualAnnihilation => {
                build_mutual_annihilation(&self.params, &AnnihilationParams::direct(self.alpha))
            }
            ProtocolKind::Conjugation => build_conjugation_variant(
                &self.params,
                &AnnihilationParams::conjugation(self.alpha, self.alpha_prime),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    MajorityWins,
    MinorityWins,
    BothExtinct,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub kind: OutcomeKind,
    /// Time the losing species first reached 0.
    pub consensus_time: Option<f64>,
    pub steps: u64,
}

/// Classifies the terminal state of a competition run. Intermediate `AB`
/// cells are ignored.
pub fn classify_outcome(trajectory: &Trajectory, majority: SpeciesId, minority: SpeciesId) -> Result<Outcome> {
    let n = trajectory.final_config.len();
    for s in [majority, minority] {
        if s.0 >= n {
            return Err(Error::UnknownSpecies(format!("index {}", s.0)));
        }
    }
    let maj = trajectory.final_config.get(majority);
    let min = trajectory.final_config.get(minority);
    let ext = |s: SpeciesId| trajectory.extinction_times[s.0];
    let (kind, consensus_time) = match (maj > 0, min > 0) {
        (true, false) => (OutcomeKind::MajorityWins, ext(minority)),
        (false, true) => (OutcomeKind::MinorityWins, ext(majority)),
        (false, false) => (
            OutcomeKind::BothExtinct,
            ext(majority).zip(ext(minority)).map(|(x, y)| x.max(y)),
        ),
        (true, true) => (OutcomeKind::Timeout, None),
    };
    Ok(Outcome {
        kind,
        consensus_time,
        steps: trajectory.step_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brn::PropensityKind;
    use crate::rng::RngStream;
    use crate::ssa::{simulate, RecordingPolicy, StopCondition, Termination};

    fn open_params() -> TwoResourceParams {
        TwoResourceParams {
            rho1_in: 1.0,
            rho2_in: 2.0,
            rho_out: 0.01,
            delta: 0.001,
            gamma1: GrowthSpec {
                max_rate: 0.05,
                initial: 100.0,
                bound: Some(1.0),
            },
            gamma2: GrowthSpec {
                max_rate: 0.004,
                initial: 100.0,
                bound: Some(1.0),
            },
            volume_ml: 1.0,
        }
    }

    #[test]
    fn reaction_counts() {
        let p = open_params();
        assert_eq!(build_two_resource(&p, &["A", "B"]).unwrap().brn.reactions.len(), 12);
        assert_eq!(build_two_resource(&p, &["A"]).unwrap().brn.reactions.len(), 8);
        assert_eq!(build_naive(&p).unwrap().brn.reactions.len(), 12);
        let ma = build_mutual_annihilation(&p, &AnnihilationParams::direct(1.0)).unwrap();
        assert_eq!(ma.brn.reactions.len(), 14);
        let cj = build_conjugation_variant(&p, &AnnihilationParams::conjugation(1.0, 0.1)).unwrap();
        assert_eq!(cj.brn.reactions.len(), 15);
        let names: Vec<_> = cj.brn.species.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["R1", "R2", "A", "B", "AB", "Dummy"]);
    }

    #[test]
    fn in_flow_normalized_with_dummy() {
        let p = open_params();
        let tr = build_two_resource(&p, &["A"]).unwrap();
        assert!(tr.brn.reactions.iter().all(|r| r.order() >= 1));
        let d = tr.brn.dummy.unwrap();
        let c = tr.brn.configuration(&[]).unwrap();
        assert_eq!(c.get(d), 1);
        assert_eq!(tr.brn.propensity(0, &c).unwrap(), 1.0);
    }

    #[test]
    fn closed_system_elides_flows() {
        let p = TwoResourceParams::table1();
        let tr = build_two_resource(&p, &["A", "B"]).unwrap();
        assert_eq!(tr.brn.reactions.len(), 6);
        assert_eq!(tr.brn.elided.len(), 6);
        assert!(tr.brn.dummy.is_none());
        let report = tr.brn.validate(&[]);
        assert!(report.is_clean());
        assert_eq!(report.elided.len(), 6);
    }

    #[test]
    fn table1_conjugation_accepted() {
        let pb = build_conjugation_variant(&TwoResourceParams::table1(), &AnnihilationParams::table1()).unwrap();
        let init = pb.initial(151_000, 149_000);
        assert_eq!(init.get(pb.r1), 2000);
        assert_eq!(init.get(pb.r2), 100_000);
        assert!(pb.brn.validate(std::slice::from_ref(&init)).is_clean());
        // per-pair rate alpha / v with v = 1e-3 ml
        let idx = pb.brn.reactions.iter().position(|r| r.label == "A conjugates B").unwrap();
        let c = pb.initial(3, 2);
        assert!((pb.brn.propensity(idx, &c).unwrap() - 6.0 * 5e-7).abs() < 1e-20);
        assert!((pb.params.gamma_sum_bound() - 0.054).abs() < 1e-15);
    }

    #[test]
    fn annihilation_propensities() {
        let mut p = open_params();
        p.volume_ml = 1.0;
        let pb = build_mutual_annihilation(&p, &AnnihilationParams::direct(1.0)).unwrap();
        let c = pb.initial(3, 2);
        let n = pb.brn.reactions.len();
        let kill_b = pb.brn.propensity(n - 2, &c).unwrap();
        let kill_a = pb.brn.propensity(n - 1, &c).unwrap();
        assert_eq!(kill_b, 6.0);
        assert_eq!(kill_a, 6.0);
    }

    #[test]
    fn zero_alpha_matches_naive() {
        let p = open_params();
        let naive = build_naive(&p).unwrap();
        let ma = build_mutual_annihilation(&p, &AnnihilationParams::direct(0.0)).unwrap();
        assert_eq!(naive.brn.reactions, ma.brn.reactions);
        assert!(!ma.brn.elided.is_empty());
    }

    #[test]
    fn conjugation_zero_alpha_has_inert_ab() {
        let p = open_params();
        let naive = build_naive(&p).unwrap();
        let cj = build_conjugation_variant(&p, &AnnihilationParams::conjugation(0.0, 0.1)).unwrap();
        assert_eq!(cj.brn.reactions.len(), 13);
        let c_naive = naive.initial(30, 20);
        let c_cj = cj.initial(30, 20);
        for i in 0..12 {
            let x = naive.brn.propensity(i, &c_naive).unwrap();
            let y = cj.brn.propensity(i, &c_cj).unwrap();
            assert_eq!(x, y, "reaction {i}");
        }
    }

    #[test]
    fn precondition_errors() {
        let p = open_params();
        assert!(build_mutual_annihilation(&p, &AnnihilationParams::conjugation(1.0, 0.1)).is_err());
        assert!(build_conjugation_variant(&p, &AnnihilationParams::direct(1.0)).is_err());
        assert!(build_two_resource(&p, &[]).is_err());
        let mut bad = p;
        bad.delta = -1.0;
        assert!(build_naive(&bad).is_err());
    }

    #[test]
    fn growth_reactions_are_bounded_growth() {
        let pb = build_naive(&TwoResourceParams::table1()).unwrap();
        let growth = pb
            .brn
            .reactions
            .iter()
            .filter(|r| matches!(r.kind, PropensityKind::Growth { .. }))
            .count();
        assert_eq!(growth, 4);
    }

    fn trajectory_with_final(counts: Vec<u64>, termination: Termination) -> Trajectory {
        let config = Configuration::new(counts);
        Trajectory {
            initial: config.clone(),
            events: vec![],
            snapshots: vec![],
            extinction_times: config.counts().iter().map(|&c| (c == 0).then_some(3.5)).collect(),
            final_config: config,
            final_time: 10.0,
            termination,
            rng_seed: 0,
            replicate: 0,
            step_count: 42,
            reaction_counts: vec![],
        }
    }

    #[test]
    fn classification() {
        let (a, b) = (SpeciesId(2), SpeciesId(3));
        let t = trajectory_with_final(vec![0, 0, 0, 17], Termination::SpeciesExtinct(2));
        assert_eq!(classify_outcome(&t, a, b).unwrap().kind, OutcomeKind::MinorityWins);
        let t = trajectory_with_final(vec![0, 0, 412, 0], Termination::SpeciesExtinct(3));
        let o = classify_outcome(&t, a, b).unwrap();
        assert_eq!(o.kind, OutcomeKind::MajorityWins);
        assert_eq!(o.consensus_time, Some(3.5));
        assert_eq!(o.steps, 42);
        let t = trajectory_with_final(vec![0, 0, 5, 6], Termination::MaxTime);
        assert_eq!(classify_outcome(&t, a, b).unwrap().kind, OutcomeKind::Timeout);
        let t = trajectory_with_final(vec![0, 0, 0, 0], Termination::Absorbed);
        assert_eq!(classify_outcome(&t, a, b).unwrap().kind, OutcomeKind::BothExtinct);
        assert!(matches!(
            classify_outcome(&t, SpeciesId(9), b),
            Err(Error::UnknownSpecies(_))
        ));
    }

    #[test]
    fn annihilation_run_ends_in_consensus_or_timeout() {
        let p = TwoResourceParams::table1().scaled(0.01);
        let pb = build_mutual_annihilation(&p, &AnnihilationParams::direct(5e-10)).unwrap();
        let stop = StopCondition::max_time(5000.0).or_extinct(&[pb.a, pb.b]);
        let mut rng = RngStream::new(5, 0);
        let init = pb.initial(1600, 1400);
        let traj = simulate(&pb.brn, &init, &stop, &mut rng, &RecordingPolicy::SummaryOnly).unwrap();
        let fc = &traj.final_config;
        match traj.termination {
            Termination::SpeciesExtinct(_) => assert!(fc.get(pb.a) == 0 || fc.get(pb.b) == 0),
            Termination::MaxTime => {}
            other => panic!("unexpected termination {other:?}"),
        }
    }
}
