//! JSON interchange formats: `presentation.v1`, `trace.v1`, `witness.v1`
//! and `smachine.v1`. Words are stored as space-separated text.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::presentations::{DerivationTrace, GroupPresentation, Relator, TraceStep};
use crate::smachine::{MachineError, SMachine, SRule};
use crate::verbal::{VerbalWitness, WitnessFactor};
use crate::words::{free_reduce, parse_law, Alphabet, LawWord, WordError};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelatorJson {
    pub word: String,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationJson {
    #[serde(default = "presentation_v1")]
    pub schema: String,
    pub generators: Vec<String>,
    pub relators: Vec<RelatorJson>,
    /// Present when the presentation was built with a non-default `N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn presentation_v1() -> String {
    "presentation.v1".into()
}

impl PresentationJson {
    pub fn from_presentation(p: &GroupPresentation) -> Self {
        let al = p.alphabet();
        PresentationJson {
            schema: presentation_v1(),
            generators: al.names().to_vec(),
            relators: p.relators().iter().map(|r| RelatorJson { word: al.format(&r.word), tag: r.tag.clone() }).collect(),
            note: None,
        }
    }

    pub fn to_presentation(&self) -> Result<GroupPresentation, SchemaError> {
        let al = Alphabet::new(self.generators.iter().cloned())?;
        let relators = self
            .relators
            .iter()
            .map(|r| Ok(Relator { word: al.parse_word(&r.word)?, tag: r.tag.clone() }))
            .collect::<Result<Vec<_>, SchemaError>>()?;
        GroupPresentation::new(al, relators).map_err(|e| SchemaError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepJson {
    Apply { pos: u32, rel: u32, rot: u32, exp: i8, split: u32 },
    Cancel { pos: u32 },
    Insert { pos: u32, letter: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceJson {
    #[serde(default = "trace_v1")]
    pub schema: String,
    pub presentation: PresentationJson,
    pub start: String,
    pub steps: Vec<StepJson>,
    pub end: String,
}

fn trace_v1() -> String {
    "trace.v1".into()
}

impl TraceJson {
    pub fn from_trace(t: &DerivationTrace) -> Self {
        let al = t.presentation.alphabet();
        let steps = t
            .steps
            .iter()
            .map(|s| match *s {
                TraceStep::ApplyRelator { pos, rel, rot, split, exp } => StepJson::Apply { pos, rel, rot, exp, split },
                TraceStep::FreeCancel { pos } => StepJson::Cancel { pos },
                TraceStep::FreeInsert { pos, letter } => StepJson::Insert { pos, letter: al.format(&[letter]) },
            })
            .collect();
        TraceJson {
            schema: trace_v1(),
            presentation: PresentationJson::from_presentation(&t.presentation),
            start: al.format(&t.start),
            steps,
            end: al.format(&t.end),
        }
    }

    /// Rebuilds the trace without replaying it.
    pub fn to_trace(&self) -> Result<DerivationTrace, SchemaError> {
        let pres = self.presentation.to_presentation()?;
        let al = pres.alphabet().clone();
        let steps = self
            .steps
            .iter()
            .map(|s| {
                Ok(match s {
                    StepJson::Apply { pos, rel, rot, exp, split } => {
                        TraceStep::ApplyRelator { pos: *pos, rel: *rel, rot: *rot, split: *split, exp: *exp }
                    }
                    StepJson::Cancel { pos } => TraceStep::FreeCancel { pos: *pos },
                    StepJson::Insert { pos, letter } => {
                        let l = al.parse_letters(letter)?;
                        let [letter] = l[..] else {
                            return Err(SchemaError::Invalid(format!("insert step needs one letter, got `{letter}`")));
                        };
                        TraceStep::FreeInsert { pos: *pos, letter }
                    }
                })
            })
            .collect::<Result<Vec<_>, SchemaError>>()?;
        Ok(DerivationTrace {
            start: al.parse_letters(&self.start)?,
            end: al.parse_letters(&self.end)?,
            presentation: Arc::new(pres),
            steps,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorJson {
    pub u: String,
    #[serde(rename = "X")]
    pub x: Vec<String>,
    pub eps: i8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessJson {
    #[serde(default = "witness_v1")]
    pub schema: String,
    pub law: String,
    /// Alphabet of the target word and of the substituted values.
    pub generators: Vec<String>,
    pub factors: Vec<FactorJson>,
}

fn witness_v1() -> String {
    "witness.v1".into()
}

impl WitnessJson {
    pub fn from_witness(law: &LawWord, al: &Alphabet, w: &VerbalWitness) -> Self {
        WitnessJson {
            schema: witness_v1(),
            law: law.to_string(),
            generators: al.names().to_vec(),
            factors: w
                .factors
                .iter()
                .map(|f| FactorJson {
                    u: al.format(&f.conjugator),
                    x: f.values.iter().map(|v| al.format(v)).collect(),
                    eps: f.sign,
                })
                .collect(),
        }
    }

    pub fn to_witness(&self) -> Result<(LawWord, Alphabet, VerbalWitness), SchemaError> {
        let law = parse_law(&self.law)?;
        let al = Alphabet::new(self.generators.iter().cloned())?;
        let factors = self
            .factors
            .iter()
            .map(|f| {
                if f.eps != 1 && f.eps != -1 {
                    return Err(SchemaError::Invalid(format!("eps must be ±1, got {}", f.eps)));
                }
                Ok(WitnessFactor {
                    conjugator: free_reduce(&al.parse_letters(&f.u)?),
                    values: f.x.iter().map(|x| Ok(free_reduce(&al.parse_letters(x)?))).collect::<Result<_, SchemaError>>()?,
                    sign: f.eps,
                })
            })
            .collect::<Result<_, SchemaError>>()?;
        Ok((law, al, VerbalWitness { factors }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartJson {
    #[serde(rename = "U")]
    pub u: String,
    #[serde(rename = "V")]
    pub v: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SMachineJson {
    #[serde(default = "smachine_v1")]
    pub schema: String,
    pub k: usize,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<String>>,
    #[serde(rename = "Y")]
    pub y: Vec<Vec<String>>,
    pub rules: Vec<Vec<PartJson>>,
    #[serde(rename = "W0")]
    pub w0: String,
    /// Rule names, parallel to `rules`; generated as `rule{i}` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
}

fn smachine_v1() -> String {
    "smachine.v1".into()
}

impl SMachineJson {
    pub fn from_machine(m: &SMachine) -> Self {
        let al = m.alphabet();
        SMachineJson {
            schema: smachine_v1(),
            k: m.tape_count(),
            q: m.q_sets.clone(),
            y: m.y_sets.clone(),
            rules: m
                .rules
                .iter()
                .map(|r| r.parts.iter().map(|(u, v)| PartJson { u: al.format(u), v: al.format(v) }).collect())
                .collect(),
            w0: m.format(&m.w0),
            names: Some(m.rules.iter().map(|r| r.name.clone()).collect()),
        }
    }

    pub fn to_machine(&self) -> Result<SMachine, SchemaError> {
        if self.k != self.y.len() {
            return Err(SchemaError::Invalid(format!("k = {} but {} tape alphabets", self.k, self.y.len())));
        }
        let al = SMachine::alphabet_for(&self.q, &self.y)?;
        if let Some(names) = &self.names {
            if names.len() != self.rules.len() {
                return Err(SchemaError::Invalid("names and rules differ in length".into()));
            }
        }
        let rules = self
            .rules
            .iter()
            .enumerate()
            .map(|(i, parts)| {
                let name = self.names.as_ref().map_or_else(|| format!("rule{}", i + 1), |n| n[i].clone());
                let parts = parts
                    .iter()
                    .map(|p| Ok((al.parse_letters(&p.u)?, al.parse_letters(&p.v)?)))
                    .collect::<Result<_, SchemaError>>()?;
                Ok(SRule { name, parts })
            })
            .collect::<Result<_, SchemaError>>()?;
        Ok(SMachine::new(self.q.clone(), self.y.clone(), rules, &self.w0)?)
    }
}
