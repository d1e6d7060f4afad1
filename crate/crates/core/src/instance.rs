//! The JSON instance format.
//!
//! Complex matrices are rows of `[re, im]` pairs. Syntax and row-shape errors
//! carry serde's line and column; dimension errors found after parsing point
//! at the first occurrence of the offending key.

use std::fmt;
use std::path::Path;

use serde::de::{self, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::ToleranceConfig;
use crate::error::{input, Error, Result};
use crate::frame::{FrameInstance, OperatorFamily};
use crate::linalg::{self, c, CMat, C64};
use crate::module_space::{ModuleKind, ModuleOperator, ModuleSpace};
use crate::quadrature::{discretize_interval, MeasureDiscretization, Provenance, Rule};
use crate::theorems::Auxiliary;

pub const FORMAT_VERSION: &str = "1";

/// A complex matrix in `[re, im]` row form.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix(pub CMat);

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        linalg::mat_to_pairs(&self.0).serialize(serializer)
    }
}

struct MatrixVisitor;

impl<'de> Visitor<'de> for MatrixVisitor {
    type Value = Matrix;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a non-empty list of equally long rows of [re, im] pairs")
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Matrix, A::Error> {
        let mut rows: Vec<Vec<[f64; 2]>> = Vec::new();
        while let Some(row) = seq.next_element::<Vec<[f64; 2]>>()? {
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(de::Error::custom(format!(
                        "matrix row {} has {} entries, expected {}",
                        rows.len() + 1,
                        row.len(),
                        first.len()
                    )));
                }
            } else if row.is_empty() {
                return Err(de::Error::custom("matrix rows must be non-empty"));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(de::Error::custom("matrix must have at least one row"));
        }
        let ncols = rows[0].len();
        Ok(Matrix(CMat::from_fn(rows.len(), ncols, |i, j| c(rows[i][j][0], rows[i][j][1]))))
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        deserializer.deserialize_seq(MatrixVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModuleDesc {
    Free {
        rank: usize,
        algebra_dim: usize,
    },
    /// One-based pattern positions.
    Pattern {
        rows: usize,
        cols: usize,
        pattern: Vec<[usize; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureDesc {
    Interval { a: f64, b: f64, rule: Rule, n: usize },
    Discrete { nodes: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyDesc {
    ScalarProfile { coeffs: Vec<f64>, base: Matrix },
    Table { ops: Vec<Matrix> },
}

/// Operators and scalars used only by theorem verifiers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxDesc {
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Matrix>,
    #[serde(rename = "K2", default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly: Option<Vec<[f64; 2]>>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: String,
    pub algebra_dim: usize,
    pub module: ModuleDesc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_module: Option<ModuleDesc>,
    pub measure: MeasureDesc,
    pub family: FamilyDesc,
    #[serde(rename = "C")]
    pub c: Matrix,
    #[serde(rename = "Cprime")]
    pub c_prime: Matrix,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux: Option<AuxDesc>,
}

/// A parsed file with the objects built from it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub file: InstanceFile,
    pub instance: FrameInstance,
    pub aux: Auxiliary,
}

fn module_space(desc: &ModuleDesc) -> Result<ModuleSpace> {
    match desc {
        ModuleDesc::Free { rank, algebra_dim } => ModuleSpace::free(*rank, *algebra_dim),
        ModuleDesc::Pattern { rows, cols, pattern } => {
            if pattern.iter().any(|p| p[0] == 0 || p[1] == 0) {
                return Err(input("pattern positions are one-based"));
            }
            ModuleSpace::pattern(*rows, *cols, pattern.iter().map(|p| (p[0] - 1, p[1] - 1)).collect())
        }
    }
}

fn module_desc(space: &ModuleSpace) -> ModuleDesc {
    match space.kind() {
        ModuleKind::Free { rank } => ModuleDesc::Free {
            rank: *rank,
            algebra_dim: space.algebra_dim(),
        },
        ModuleKind::Pattern { rows, cols, pattern } => ModuleDesc::Pattern {
            rows: *rows,
            cols: *cols,
            pattern: pattern.iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
        },
    }
}

fn pair(z: [f64; 2]) -> C64 {
    c(z[0], z[1])
}

/// Error located at a JSON key, or at the top of the file when the key is absent.
struct Located {
    key: &'static str,
    error: Error,
}

trait At<T> {
    fn at(self, key: &'static str) -> std::result::Result<T, Located>;
}

impl<T> At<T> for Result<T> {
    fn at(self, key: &'static str) -> std::result::Result<T, Located> {
        self.map_err(|error| Located { key, error })
    }
}

fn locate(text: &str, key: &str) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    match text.find(&needle) {
        Some(offset) => {
            let before = &text[..offset];
            let line = before.matches('\n').count() + 1;
            let column = offset - before.rfind('\n').map_or(0, |p| p + 1) + 1;
            (line, column)
        }
        None => (1, 1),
    }
}

impl InstanceFile {
    pub fn parse(text: &str, path: &str) -> Result<Loaded> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| {
            let mut message = e.to_string();
            // the location is reported separately
            if let Some(at) = message.rfind(" at line ") {
                message.truncate(at);
            }
            Error::Parse {
                path: path.into(),
                line: e.line(),
                column: e.column(),
                message,
            }
        })?;
        match file.build() {
            Ok((instance, aux)) => Ok(Loaded { file, instance, aux }),
            Err(Located { key, error }) => {
                let (line, column) = locate(text, key);
                Err(Error::Parse {
                    path: path.into(),
                    line,
                    column,
                    message: error.to_string(),
                })
            }
        }
    }

    pub fn load(path: &Path) -> Result<Loaded> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    fn build(&self) -> std::result::Result<(FrameInstance, Auxiliary), Located> {
        if self.version != FORMAT_VERSION {
            return Err(input(format!("unsupported version '{}', expected '{FORMAT_VERSION}'", self.version))).at("version");
        }
        let space = module_space(&self.module).at("module")?;
        if space.algebra_dim() != self.algebra_dim {
            return Err(input(format!(
                "algebra_dim {} disagrees with the module's algebra dimension {}",
                self.algebra_dim,
                space.algebra_dim()
            )))
            .at("algebra_dim");
        }
        let range = match &self.range_module {
            Some(desc) => module_space(desc).at("range_module")?,
            None => space.clone(),
        };
        if range.algebra_dim() != self.algebra_dim {
            return Err(input("range module is over a different algebra")).at("range_module");
        }
        let measure = match &self.measure {
            MeasureDesc::Interval { a, b, rule, n } => discretize_interval(*a, *b, *rule, *n),
            MeasureDesc::Discrete { nodes } => MeasureDiscretization::discrete(nodes.iter().map(|p| (p[0], p[1])).collect()),
        }
        .at("measure")?;
        let family = match &self.family {
            FamilyDesc::ScalarProfile { coeffs, base } => {
                if coeffs.is_empty() {
                    return Err(input("scalar profile needs at least one coefficient")).at("coeffs");
                }
                OperatorFamily::ScalarProfile {
                    base: ModuleOperator::new(&space, &range, base.0.clone()).at("base")?,
                    coeffs: coeffs.clone(),
                }
            }
            FamilyDesc::Table { ops } => OperatorFamily::Table(
                ops.iter()
                    .map(|m| ModuleOperator::new(&space, &range, m.0.clone()))
                    .collect::<Result<_>>()
                    .at("ops")?,
            ),
        };
        let endo = |m: &Matrix, key: &'static str| ModuleOperator::endo(&space, m.0.clone()).at(key);
        let c = endo(&self.c, "C")?;
        let c_prime = endo(&self.c_prime, "Cprime")?;
        let k = self.k.as_ref().map(|m| endo(m, "K")).transpose()?;
        let tolerances = self.tolerances.unwrap_or_default();
        tolerances.validate().at("tolerances")?;
        let instance = FrameInstance::new(measure, family, c, c_prime, k, tolerances).at("family")?;
        let aux = match &self.aux {
            None => Auxiliary::default(),
            Some(a) => Auxiliary {
                t: a.t.as_ref().map(|m| endo(m, "T")).transpose()?,
                k2: a.k2.as_ref().map(|m| endo(m, "K2")).transpose()?,
                alpha: a.alpha.map(pair),
                beta: a.beta.map(pair),
                poly: a.poly.as_ref().map(|p| p.iter().copied().map(pair).collect()),
                a: a.a,
            },
        };
        Ok((instance, aux))
    }

    /// File form of an instance and its auxiliary data.
    pub fn from_instance(inst: &FrameInstance, aux: &Auxiliary) -> InstanceFile {
        let measure = match inst.measure.provenance() {
            Provenance::Interval { a, b, rule, n } => MeasureDesc::Interval {
                a: *a,
                b: *b,
                rule: *rule,
                n: *n,
            },
            Provenance::Discrete => MeasureDesc::Discrete {
                nodes: inst.measure.nodes().iter().map(|&(w, x)| [w, x]).collect(),
            },
        };
        let family = match &inst.family {
            OperatorFamily::ScalarProfile { base, coeffs } => FamilyDesc::ScalarProfile {
                coeffs: coeffs.clone(),
                base: Matrix(base.matrix().clone()),
            },
            OperatorFamily::Table(ops) => FamilyDesc::Table {
                ops: ops.iter().map(|op| Matrix(op.matrix().clone())).collect(),
            },
        };
        let to_pair = |z: C64| [z.re, z.im];
        let aux_desc = AuxDesc {
            t: aux.t.as_ref().map(|op| Matrix(op.matrix().clone())),
            k2: aux.k2.as_ref().map(|op| Matrix(op.matrix().clone())),
            alpha: aux.alpha.map(to_pair),
            beta: aux.beta.map(to_pair),
            poly: aux.poly.as_ref().map(|p| p.iter().copied().map(to_pair).collect()),
            a: aux.a,
        };
        InstanceFile {
            version: FORMAT_VERSION.into(),
            algebra_dim: inst.space.algebra_dim(),
            module: module_desc(&inst.space),
            range_module: (inst.range != inst.space).then(|| module_desc(&inst.range)),
            measure,
            family,
            c: Matrix(inst.c.matrix().clone()),
            c_prime: Matrix(inst.c_prime.matrix().clone()),
            k: inst.k.as_ref().map(|op| Matrix(op.matrix().clone())),
            tolerances: (inst.tolerances != ToleranceConfig::default()).then_some(inst.tolerances),
            aux: (aux_desc != AuxDesc::default()).then_some(aux_desc),
        }
    }

    pub fn to_json(&self) -> String {
        crate::json::to_pretty(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::build_paper_example;

    fn example_json() -> String {
        let inst = build_paper_example(1.0, 1.0, Rule::GaussLegendre, 2).unwrap();
        InstanceFile::from_instance(&inst, &Auxiliary::default()).to_json()
    }

    #[test]
    fn example_round_trips() {
        let text = example_json();
        let loaded = InstanceFile::parse(&text, "example.json").unwrap();
        assert_eq!(loaded.file.to_json(), text);
        let again = InstanceFile::from_instance(&loaded.instance, &loaded.aux);
        assert_eq!(again, loaded.file);
    }

    #[test]
    fn ragged_row_is_located() {
        let mut value: serde_json::Value = serde_json::from_str(&example_json()).unwrap();
        value["C"][1].as_array_mut().unwrap().pop();
        let broken = serde_json::to_string_pretty(&value).unwrap();
        match InstanceFile::parse(&broken, "broken.json") {
            Err(Error::Parse { line, message, .. }) => {
                assert!(line > locate(&broken, "C").0, "line {line}");
                assert!(message.contains("row 2"), "{message}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_dimension_points_at_key() {
        let text = example_json().replacen("\"algebra_dim\": 2", "\"algebra_dim\": 3", 1);
        match InstanceFile::parse(&text, "bad.json") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, locate(&text, "algebra_dim").0),
            other => panic!("expected a located error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = example_json().replacen("{", "{\n  \"extra\": 1,", 1);
        assert!(matches!(InstanceFile::parse(&text, "x.json"), Err(Error::Parse { .. })));
    }
}
