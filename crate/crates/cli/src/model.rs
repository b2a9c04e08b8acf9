//! BRN model files.
//!
//! ```toml
//! volume_ml = 1.0
//! species = ["R", "X"]
//! cell_types = ["X"]
//!
//! [[reactions]]
//! label = "X grows on R"
//! kind = "growth"
//! cell_type = "X"
//! consumes = { R = 1 }
//! max_rate = 0.05
//! rate = { resource = "R", gain = 0.05, reference = 100.0 }
//!
//! [[reactions]]
//! label = "X death"
//! kind = "mass_action"
//! reactants = { X = 1 }
//! rate_constant = 0.01
//! ```
//!
//! Growth reactions are `X + consumes -> 2X + releases` with rate
//! `offset + gain * c(resource) / reference`, which must stay below
//! `max_rate`. Mass-action reactions of order 0 get a dummy species.

use std::collections::BTreeMap;

use brnsim_core::{Brn, BrnBuilder, GrowthRate, SpeciesId};
use serde::Deserialize;

use crate::error::{CliError, FieldError, ParseError};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    volume_ml: Option<f64>,
    species: Vec<String>,
    #[serde(default)]
    cell_types: Vec<String>,
    #[serde(default)]
    reactions: Vec<RawReaction>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum RawKind {
    MassAction,
    Growth,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrowthRate {
    resource: Option<String>,
    #[serde(default)]
    gain: f64,
    #[serde(default = "one")]
    reference: f64,
    #[serde(default)]
    offset: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReaction {
    label: String,
    kind: RawKind,
    #[serde(default)]
    reactants: BTreeMap<String, u64>,
    #[serde(default)]
    products: BTreeMap<String, u64>,
    rate_constant: Option<f64>,
    cell_type: Option<String>,
    #[serde(default)]
    consumes: BTreeMap<String, u64>,
    #[serde(default)]
    releases: BTreeMap<String, u64>,
    max_rate: Option<f64>,
    rate: Option<RawGrowthRate>,
}

fn lookup(
    ids: &BTreeMap<String, SpeciesId>,
    field: &str,
    terms: &BTreeMap<String, u64>,
    errors: &mut Vec<FieldError>,
) -> Vec<(SpeciesId, u64)> {
    terms
        .iter()
        .filter_map(|(name, &k)| match ids.get(name) {
            Some(&id) => Some((id, k)),
            None => {
                errors.push(FieldError::new(field, format!("unknown species `{name}`")));
                None
            }
        })
        .collect()
}

/// Parses and checks a model file.
pub fn parse_model(path: &std::path::Path, text: &str) -> Result<Brn, CliError> {
    let raw: RawModel = toml::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        error: ParseError::from_toml(text, &e),
    })?;
    build_model(raw).map_err(CliError::Validation)
}

fn build_model(raw: RawModel) -> Result<Brn, Vec<FieldError>> {
    let mut errors = Vec::new();
    let mut builder = BrnBuilder::new();
    if let Some(v) = raw.volume_ml {
        if !(v > 0.0) {
            errors.push(FieldError::new("volume_ml", "must be > 0"));
        }
        builder = builder.volume(v);
    }
    for c in &raw.cell_types {
        if !raw.species.contains(c) {
            errors.push(FieldError::new("cell_types", format!("`{c}` is not in species")));
        }
    }
    let mut ids = BTreeMap::new();
    for name in &raw.species {
        let added = if raw.cell_types.contains(name) {
            builder.cell_type(name)
        } else {
            builder.species(name)
        };
        match added {
            Ok(id) => {
                ids.insert(name.clone(), id);
            }
            Err(e) => errors.push(FieldError::new("species", e.to_string())),
        }
    }

    for (i, r) in raw.reactions.iter().enumerate() {
        let at = |f: &str| format!("reactions[{i}].{f}");
        match r.kind {
            RawKind::MassAction => {
                let k = match r.rate_constant {
                    Some(k) if k >= 0.0 && k.is_finite() => k,
                    Some(_) => {
                        errors.push(FieldError::new(at("rate_constant"), "must be finite and >= 0"));
                        continue;
                    }
                    None => {
                        errors.push(FieldError::new(at("rate_constant"), "required for mass_action"));
                        continue;
                    }
                };
                let reactants = lookup(&ids, &at("reactants"), &r.reactants, &mut errors);
                let products = lookup(&ids, &at("products"), &r.products, &mut errors);
                builder.mass_action(&r.label, &reactants, &products, k);
            }
            RawKind::Growth => {
                let Some(cell) = r.cell_type.as_ref() else {
                    errors.push(FieldError::new(at("cell_type"), "required for growth"));
                    continue;
                };
                let Some(&cell_id) = ids.get(cell) else {
                    errors.push(FieldError::new(at("cell_type"), format!("unknown species `{cell}`")));
                    continue;
                };
                if !raw.cell_types.contains(cell) {
                    errors.push(FieldError::new(at("cell_type"), format!("`{cell}` is not a cell type")));
                }
                let max_rate = match r.max_rate {
                    Some(m) if m >= 0.0 && m.is_finite() => m,
                    _ => {
                        errors.push(FieldError::new(at("max_rate"), "required, finite and >= 0"));
                        continue;
                    }
                };
                let Some(rate) = r.rate.as_ref() else {
                    errors.push(FieldError::new(at("rate"), "required for growth"));
                    continue;
                };
                if !(rate.reference > 0.0) {
                    errors.push(FieldError::new(at("rate.reference"), "must be > 0"));
                }
                let resource = match rate.resource.as_ref() {
                    Some(name) => match ids.get(name) {
                        Some(&id) => Some(id),
                        None => {
                            errors.push(FieldError::new(at("rate.resource"), format!("unknown species `{name}`")));
                            continue;
                        }
                    },
                    None => None,
                };
                if !r.reactants.is_empty() || !r.products.is_empty() {
                    errors.push(FieldError::new(
                        at("reactants"),
                        "growth reactions use consumes/releases",
                    ));
                }
                let consumed = lookup(&ids, &at("consumes"), &r.consumes, &mut errors);
                let released = lookup(&ids, &at("releases"), &r.releases, &mut errors);
                let g = GrowthRate {
                    resource,
                    gain: rate.gain,
                    reference: rate.reference,
                    offset: rate.offset,
                };
                builder.growth(&r.label, cell_id, &consumed, &released, g, max_rate);
            }
        }
    }
    if errors.is_empty() {
        Ok(builder.build())
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    const LOGISTIC: &str = r#"
volume_ml = 1.0
species = ["R", "X"]
cell_types = ["X"]

[[reactions]]
label = "X grows on R"
kind = "growth"
cell_type = "X"
consumes = { R = 1 }
max_rate = 0.05
rate = { resource = "R", gain = 0.05, reference = 100.0 }

[[reactions]]
label = "X death"
kind = "mass_action"
reactants = { X = 1 }
rate_constant = 0.01

[[reactions]]
label = "R in-flow"
kind = "mass_action"
products = { R = 1 }
rate_constant = 2.0
"#;

    #[test]
    fn parses_example() {
        let brn = parse_model(Path::new("m.toml"), LOGISTIC).unwrap();
        assert_eq!(brn.reactions.len(), 3);
        assert!(brn.dummy.is_some());
        let c = brn.configuration(&[("R", 100), ("X", 10)]).unwrap();
        assert!((brn.propensity(0, &c).unwrap() - 0.5).abs() < 1e-15);
        assert!((brn.propensity(1, &c).unwrap() - 0.1).abs() < 1e-15);
        assert!((brn.propensity(2, &c).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn syntax_error_has_line() {
        let bad = "species = [\"A\"]\nvolume_ml = = 3\n";
        match parse_model(Path::new("m.toml"), bad) {
            Err(CliError::Parse { error, .. }) => assert_eq!(error.line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_species_is_a_field_error() {
        let bad = LOGISTIC.replace("reactants = { X = 1 }", "reactants = { Y = 1 }");
        match parse_model(Path::new("m.toml"), &bad) {
            Err(CliError::Validation(errs)) => {
                assert_eq!(errs.len(), 1);
                assert_eq!(errs[0].field, "reactions[1].reactants");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }
}
