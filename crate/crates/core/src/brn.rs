//! Biological reaction networks: species, configurations, reactions and
//! their propensities.
//!
//! Two propensity families are supported. Mass-action reactions use
//! `xi / v^(o-1) * prod_s C(c(s), r(s))` where `o` is the reaction order and
//! `v` the volume. Growth reactions `T + ... -> 2T + ...` use
//! `c(T) * gamma(c)` where `gamma` is bounded by a declared maximal rate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense index of a species inside one [`Brn`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpeciesId(pub usize);

impl SpeciesId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub id: SpeciesId,
    pub name: String,
}

/// Species counts, indexed by [`SpeciesId`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration(Vec<u64>);

impl Configuration {
    pub fn new(counts: Vec<u64>) -> Self {
        Self(counts)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, id: SpeciesId) -> u64 {
        self.0[id.0]
    }

    pub fn set(&mut self, id: SpeciesId, count: u64) {
        self.0[id.0] = count;
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn into_counts(self) -> Vec<u64> {
        self.0
    }
}

impl From<Vec<u64>> for Configuration {
    fn from(counts: Vec<u64>) -> Self {
        Self(counts)
    }
}

impl std::ops::Index<SpeciesId> for Configuration {
    type Output = u64;

    fn index(&self, id: SpeciesId) -> &u64 {
        &self.0[id.0]
    }
}

/// Individual growth rate `gamma(c) = offset + gain * c(resource) / reference`.
///
/// Without a resource the rate is the constant `offset + gain`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRate {
    pub resource: Option<SpeciesId>,
    pub gain: f64,
    pub reference: f64,
    pub offset: f64,
}

impl GrowthRate {
    /// `gain * c(resource) / reference`, the form used for resource-limited growth.
    pub fn resource_limited(resource: SpeciesId, gain: f64, reference: f64) -> Self {
        Self {
            resource: Some(resource),
            gain,
            reference,
            offset: 0.0,
        }
    }

    pub fn constant(rate: f64) -> Self {
        Self {
            resource: None,
            gain: 0.0,
            reference: 1.0,
            offset: rate,
        }
    }

    pub fn eval(&self, config: &Configuration) -> f64 {
        let limited = match self.resource {
            Some(r) => self.gain * config.get(r) as f64 / self.reference,
            None => self.gain,
        };
        (self.offset + limited).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PropensityKind {
    MassAction {
        rate_constant: f64,
    },
    Growth {
        cell_type: SpeciesId,
        rate: GrowthRate,
        max_rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    pub label: String,
    pub reactants: Vec<u64>,
    pub products: Vec<u64>,
    pub kind: PropensityKind,
}

impl Reaction {
    pub fn order(&self) -> u64 {
        self.reactants.iter().sum()
    }

    pub fn is_applicable(&self, config: &Configuration) -> bool {
        self.reactants
            .iter()
            .zip(config.counts())
            .all(|(&r, &c)| r <= c)
    }
}

/// Binomial coefficient in integer arithmetic, `0` when `k > n`.
///
/// Falls back to floating point only when the exact value does not fit in
/// 128 bits, which no reaction of order <= 4 can reach with 64-bit counts.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        let next = acc
            .checked_mul((n - i) as u128)
            .map(|v| v / (i as u128 + 1));
        match next {
            Some(v) => acc = v,
            None => {
                let mut f = acc as f64;
                for j in i..k {
                    f *= (n - j) as f64 / (j + 1) as f64;
                }
                return f;
            }
        }
    }
    acc as f64
}

/// A biological reaction network.
///
/// Fields are public so that file loaders can assemble networks directly;
/// [`Brn::validate`] reports anything malformed. [`BrnBuilder`] constructs
/// well-formed networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Brn {
    pub species: Vec<Species>,
    pub cell_types: Vec<SpeciesId>,
    pub reactions: Vec<Reaction>,
    pub volume: f64,
    /// Species introduced by [`Brn::normalize_order_zero`]; always at count 1.
    pub dummy: Option<SpeciesId>,
    /// Labels of reactions dropped by builders because their rate is zero.
    pub elided: Vec<String>,
}

impl Brn {
    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn species_id(&self, name: &str) -> Result<SpeciesId> {
        self.species
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.id)
            .ok_or_else(|| Error::UnknownSpecies(name.to_string()))
    }

    pub fn species_name(&self, id: SpeciesId) -> &str {
        &self.species[id.0].name
    }

    pub fn is_cell_type(&self, id: SpeciesId) -> bool {
        self.cell_types.contains(&id)
    }

    fn check_dims(&self, config: &Configuration) -> Result<()> {
        if config.len() != self.species.len() {
            return Err(Error::DimensionMismatch {
                expected: self.species.len(),
                found: config.len(),
            });
        }
        Ok(())
    }

    /// Configuration from named counts; unnamed species start at 0 and the
    /// dummy species, if any, at 1.
    pub fn configuration(&self, counts: &[(&str, u64)]) -> Result<Configuration> {
        let mut config = Configuration::zeros(self.species.len());
        if let Some(d) = self.dummy {
            config.set(d, 1);
        }
        for &(name, count) in counts {
            let id = self.species_id(name)?;
            config.set(id, count);
        }
        Ok(config)
    }

    /// Appends the dummy count to a configuration over the original species.
    pub fn lift(&self, original: &Configuration) -> Result<Configuration> {
        match self.dummy {
            Some(d) if original.len() + 1 == self.species.len() => {
                let mut counts = original.counts().to_vec();
                counts.insert(d.0, 1);
                Ok(Configuration::new(counts))
            }
            _ => {
                self.check_dims(original)?;
                Ok(original.clone())
            }
        }
    }

    /// Propensity of reaction `index` in `config`; zero if not applicable.
    pub fn propensity(&self, index: usize, config: &Configuration) -> Result<f64> {
        self.check_dims(config)?;
        self.propensity_unchecked(index, config)
    }

    pub(crate) fn propensity_unchecked(&self, index: usize, config: &Configuration) -> Result<f64> {
        let reaction = &self.reactions[index];
        match &reaction.kind {
            PropensityKind::MassAction { rate_constant } => {
                let mut combos = 1.0;
                for (&r, &c) in reaction.reactants.iter().zip(config.counts()) {
                    if r > 0 {
                        combos *= binomial(c, r);
                        if combos == 0.0 {
                            return Ok(0.0);
                        }
                    }
                }
                let order = reaction.order() as i32;
                Ok(rate_constant / self.volume.powi(order - 1) * combos)
            }
            PropensityKind::Growth {
                cell_type,
                rate,
                max_rate,
            } => {
                let gamma = rate.eval(config);
                if gamma > max_rate * (1.0 + 1e-12) {
                    return Err(Error::GrowthRateExceedsBound {
                        reaction: index,
                        rate: gamma,
                        bound: *max_rate,
                    });
                }
                if !reaction.is_applicable(config) {
                    return Ok(0.0);
                }
                Ok(config.get(*cell_type) as f64 * gamma)
            }
        }
    }

    /// Writes every propensity into `out` and returns their sum.
    pub fn propensities(&self, config: &Configuration, out: &mut [f64]) -> Result<f64> {
        self.check_dims(config)?;
        let mut total = 0.0;
        for (i, slot) in out.iter_mut().enumerate().take(self.reactions.len()) {
            let a = self.propensity_unchecked(i, config)?;
            *slot = a;
            total += a;
        }
        Ok(total)
    }

    /// `c - r + p` for reaction `index`.
    pub fn apply(&self, index: usize, config: &Configuration) -> Result<Configuration> {
        self.check_dims(config)?;
        let mut next = config.clone();
        self.apply_in_place(index, &mut next)?;
        Ok(next)
    }

    pub(crate) fn apply_in_place(&self, index: usize, config: &mut Configuration) -> Result<()> {
        let reaction = &self.reactions[index];
        if !reaction.is_applicable(config) {
            return Err(Error::NotApplicable { reaction: index });
        }
        for ((c, &r), &p) in config
            .0
            .iter_mut()
            .zip(&reaction.reactants)
            .zip(&reaction.products)
        {
            *c = *c - r + p;
        }
        Ok(())
    }

    /// Rewrites every order-0 reaction `0 -> P` as `D -> D + P` against one
    /// fresh dummy species `D` held at count 1.
    ///
    /// The rate constant is multiplied by the volume so the propensity is
    /// unchanged (the order goes from 0 to 1).
    pub fn normalize_order_zero(&self) -> Brn {
        if self.dummy.is_some() || self.reactions.iter().all(|r| r.order() > 0) {
            return self.clone();
        }
        let mut out = self.clone();
        let mut name = String::from("Dummy");
        while out.species.iter().any(|s| s.name == name) {
            name.push('_');
        }
        let dummy = SpeciesId(out.species.len());
        out.species.push(Species { id: dummy, name });
        out.dummy = Some(dummy);
        for reaction in &mut out.reactions {
            let order_zero = reaction.order() == 0;
            reaction.reactants.push(0);
            reaction.products.push(0);
            if order_zero {
                reaction.reactants[dummy.0] = 1;
                reaction.products[dummy.0] += 1;
                if let PropensityKind::MassAction { rate_constant } = &mut reaction.kind {
                    *rate_constant *= self.volume;
                }
            }
        }
        out
    }

    /// Structural and numeric checks. Growth bounds are probed on the
    /// caller-supplied configurations.
    pub fn validate(&self, probes: &[Configuration]) -> ValidationReport {
        let mut violations = Vec::new();
        let n = self.species.len();

        for (i, s) in self.species.iter().enumerate() {
            if s.id.0 != i {
                violations.push(Violation::NonDenseIndex { species: s.name.clone() });
            }
            if self.species[..i].iter().any(|o| o.name == s.name) {
                violations.push(Violation::DuplicateName { species: s.name.clone() });
            }
        }
        if !(self.volume > 0.0) {
            violations.push(Violation::NonPositiveVolume { volume: self.volume });
        }
        for t in &self.cell_types {
            if t.0 >= n {
                violations.push(Violation::UnknownCellType { index: t.0 });
            }
        }

        for (i, reaction) in self.reactions.iter().enumerate() {
            for (field, len) in [("reactants", reaction.reactants.len()), ("products", reaction.products.len())] {
                if len != n {
                    violations.push(Violation::DimensionMismatch {
                        reaction: i,
                        field,
                        expected: n,
                        found: len,
                    });
                }
            }
            if reaction.reactants.len() != n || reaction.products.len() != n {
                continue;
            }
            match &reaction.kind {
                PropensityKind::MassAction { rate_constant } => {
                    if !(*rate_constant >= 0.0) {
                        violations.push(Violation::NegativeRate {
                            reaction: i,
                            value: *rate_constant,
                        });
                    }
                }
                PropensityKind::Growth {
                    cell_type,
                    rate,
                    max_rate,
                } => {
                    if let Some(reason) = self.growth_shape_error(reaction, *cell_type) {
                        violations.push(Violation::GrowthShape { reaction: i, reason });
                    }
                    if !(*max_rate > 0.0) || rate.gain < 0.0 || rate.offset < 0.0 || !(rate.reference > 0.0) {
                        violations.push(Violation::NegativeRate {
                            reaction: i,
                            value: if rate.gain < 0.0 { rate.gain } else { *max_rate },
                        });
                    }
                    for (probe, config) in probes.iter().enumerate() {
                        if config.len() != n {
                            continue;
                        }
                        let gamma = rate.eval(config);
                        if gamma > max_rate * (1.0 + 1e-12) {
                            violations.push(Violation::GrowthBound {
                                reaction: i,
                                probe,
                                rate: gamma,
                                bound: *max_rate,
                            });
                        }
                    }
                }
            }
        }

        ValidationReport {
            violations,
            elided: self.elided.clone(),
        }
    }

    fn growth_shape_error(&self, reaction: &Reaction, cell_type: SpeciesId) -> Option<String> {
        if cell_type.0 >= self.species.len() || !self.is_cell_type(cell_type) {
            return Some(format!("cell type index {} is not a declared cell type", cell_type.0));
        }
        if reaction.reactants[cell_type.0] != 1 {
            return Some(format!(
                "expected exactly one `{}` among reactants, found {}",
                self.species_name(cell_type),
                reaction.reactants[cell_type.0]
            ));
        }
        if reaction.products[cell_type.0] != 2 {
            return Some(format!(
                "expected exactly two `{}` among products, found {}",
                self.species_name(cell_type),
                reaction.products[cell_type.0]
            ));
        }
        for &other in &self.cell_types {
            if other != cell_type
                && other.0 < self.species.len()
                && (reaction.reactants[other.0] > 0 || reaction.products[other.0] > 0)
            {
                return Some(format!("other cell type `{}` takes part", self.species_name(other)));
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    NonDenseIndex { species: String },
    DuplicateName { species: String },
    NonPositiveVolume { volume: f64 },
    UnknownCellType { index: usize },
    DimensionMismatch { reaction: usize, field: &'static str, expected: usize, found: usize },
    NegativeRate { reaction: usize, value: f64 },
    GrowthShape { reaction: usize, reason: String },
    GrowthBound { reaction: usize, probe: usize, rate: f64, bound: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonDenseIndex { species } => write!(f, "species `{species}` has a non-dense index"),
            Violation::DuplicateName { species } => write!(f, "species name `{species}` is duplicated"),
            Violation::NonPositiveVolume { volume } => write!(f, "volume {volume} is not positive"),
            Violation::UnknownCellType { index } => write!(f, "cell type index {index} out of range"),
            Violation::DimensionMismatch { reaction, field, expected, found } => {
                write!(f, "reaction {reaction}: {field} has {found} entries, expected {expected}")
            }
            Violation::NegativeRate { reaction, value } => write!(f, "reaction {reaction}: invalid rate {value}"),
            Violation::GrowthShape { reaction, reason } => write!(f, "reaction {reaction}: {reason}"),
            Violation::GrowthBound { reaction, probe, rate, bound } => {
                write!(f, "reaction {reaction}: rate {rate} at probe {probe} exceeds bound {bound}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Zero-rate reactions that a builder dropped. Informational only.
    pub elided: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Incremental construction of a [`Brn`] by species name.
#[derive(Debug, Clone, Default)]
pub struct BrnBuilder {
    species: Vec<Species>,
    cell_types: Vec<SpeciesId>,
    reactions: Vec<(String, Vec<(SpeciesId, u64)>, Vec<(SpeciesId, u64)>, PropensityKind)>,
    volume: Option<f64>,
    elided: Vec<String>,
    elide_zero_rates: bool,
}

impl BrnBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn volume(mut self, volume: f64) -> Self {
        self.volume = Some(volume);
        self
    }

    /// Drop mass-action reactions whose rate constant is exactly zero.
    pub fn elide_zero_rates(mut self, yes: bool) -> Self {
        self.elide_zero_rates = yes;
        self
    }

    pub fn species(&mut self, name: &str) -> Result<SpeciesId> {
        if self.species.iter().any(|s| s.name == name) {
            return Err(Error::DuplicateSpecies(name.to_string()));
        }
        let id = SpeciesId(self.species.len());
        self.species.push(Species {
            id,
            name: name.to_string(),
        });
        Ok(id)
    }

    pub fn cell_type(&mut self, name: &str) -> Result<SpeciesId> {
        let id = self.species(name)?;
        self.cell_types.push(id);
        Ok(id)
    }

    pub fn mass_action(
        &mut self,
        label: &str,
        reactants: &[(SpeciesId, u64)],
        products: &[(SpeciesId, u64)],
        rate_constant: f64,
    ) -> &mut Self {
        if self.elide_zero_rates && rate_constant == 0.0 {
            self.elided.push(label.to_string());
            return self;
        }
        self.reactions.push((
            label.to_string(),
            reactants.to_vec(),
            products.to_vec(),
            PropensityKind::MassAction { rate_constant },
        ));
        self
    }

    /// `T + extra -> 2T + products`.
    pub fn growth(
        &mut self,
        label: &str,
        cell_type: SpeciesId,
        consumed: &[(SpeciesId, u64)],
        released: &[(SpeciesId, u64)],
        rate: GrowthRate,
        max_rate: f64,
    ) -> &mut Self {
        if self.elide_zero_rates && rate.gain == 0.0 && rate.offset == 0.0 {
            self.elided.push(label.to_string());
            return self;
        }
        let mut reactants = vec![(cell_type, 1)];
        reactants.extend_from_slice(consumed);
        let mut products = vec![(cell_type, 2)];
        products.extend_from_slice(released);
        self.reactions.push((
            label.to_string(),
            reactants,
            products,
            PropensityKind::Growth {
                cell_type,
                rate,
                max_rate,
            },
        ));
        self
    }

    pub fn build(self) -> Brn {
        let n = self.species.len();
        let dense = |terms: &[(SpeciesId, u64)]| {
            let mut v = vec![0; n];
            for &(id, k) in terms {
                v[id.0] += k;
            }
            v
        };
        let reactions = self
            .reactions
            .iter()
            .map(|(label, r, p, kind)| Reaction {
                label: label.clone(),
                reactants: dense(r),
                products: dense(p),
                kind: kind.clone(),
            })
            .collect();
        Brn {
            species: self.species,
            cell_types: self.cell_types,
            reactions,
            volume: self.volume.unwrap_or(1.0),
            dummy: None,
            elided: self.elided,
        }
        .normalize_order_zero()
    }
}
