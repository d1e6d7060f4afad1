//! Three-valued certification outcomes.

use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::linalg::{mat_to_pairs, vec_to_pairs, CMat, CVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Certified,
    Falsified,
    Undetermined,
}

/// Evidence attached to a falsification: a vector in whatever coordinates the
/// check ran in, and, when known, the evaluated violation and the algebra
/// coefficient involved.
#[derive(Debug, Clone)]
pub struct Witness {
    pub coords: CVec,
    /// Hermitian object whose negative eigenvalue refutes the claim.
    pub violation: Option<CMat>,
    /// Algebra element used by A-linearity witnesses.
    pub coefficient: Option<CMat>,
}

impl Witness {
    pub fn vector(coords: CVec) -> Self {
        Witness {
            coords,
            violation: None,
            coefficient: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub status: Status,
    /// Signed smallest eigenvalue of the decisive Hermitian object.
    pub margin: f64,
    /// Normalisation the tolerances were applied against.
    pub scale: f64,
    pub witness: Option<Witness>,
}

impl Verdict {
    pub fn certified(margin: f64, scale: f64) -> Self {
        Verdict {
            status: Status::Certified,
            margin,
            scale,
            witness: None,
        }
    }

    pub fn undetermined(margin: f64, scale: f64) -> Self {
        Verdict {
            status: Status::Undetermined,
            margin,
            scale,
            witness: None,
        }
    }

    pub fn falsified(margin: f64, scale: f64, witness: Witness) -> Self {
        Verdict {
            status: Status::Falsified,
            margin,
            scale,
            witness: Some(witness),
        }
    }

    pub fn is_certified(&self) -> bool {
        self.status == Status::Certified
    }

    pub fn is_falsified(&self) -> bool {
        self.status == Status::Falsified
    }
}

impl Serialize for Witness {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Witness", 3)?;
        st.serialize_field("coords", &vec_to_pairs(&self.coords))?;
        st.serialize_field("violation", &self.violation.as_ref().map(mat_to_pairs))?;
        st.serialize_field("coefficient", &self.coefficient.as_ref().map(mat_to_pairs))?;
        st.end()
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Verdict", 4)?;
        st.serialize_field("status", &self.status)?;
        st.serialize_field("margin", &self.margin)?;
        st.serialize_field("scale", &self.scale)?;
        st.serialize_field("witness", &self.witness)?;
        st.end()
    }
}
