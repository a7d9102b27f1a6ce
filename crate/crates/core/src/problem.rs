//! Problem files: `{"n":…, "flow":…, "H1":…, "H2":…, "H3":…, "Delta":…, "flags":{…}}`.
//!
//! Each coefficient is a plain matrix or a list of `{k, cos, sin}` trig terms.

use serde::{Deserialize, Serialize};

use crate::base_flow::{make_flow, FlowDescriptor};
use crate::error::{Error, Result};
use crate::hamiltonian::{CoefficientField, DeclaredFlags, Family, FamilyKind};
use crate::trig::{TrigJson, TrigMatrix};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    #[serde(default = "autonomous")]
    pub flow: FlowDescriptor,
    #[serde(rename = "H1")]
    pub h1: TrigJson,
    #[serde(rename = "H2")]
    pub h2: TrigJson,
    #[serde(rename = "H3")]
    pub h3: TrigJson,
    #[serde(rename = "Delta", default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<TrigJson>,
    #[serde(default)]
    pub flags: DeclaredFlags,
    /// Perturbation direction for scans; H2-type when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyKind>,
}

fn autonomous() -> FlowDescriptor {
    FlowDescriptor::Autonomous
}

impl ProblemFile {
    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn field(&self) -> Result<CoefficientField> {
        let flow = make_flow(&self.flow)?;
        let (n, d) = (self.n, flow.dim());
        let t = |j: &TrigJson| TrigMatrix::from_json(j, n, n, d);
        let delta = self.delta.as_ref().map(t).transpose()?;
        CoefficientField::new(flow, t(&self.h1)?, t(&self.h2)?, t(&self.h3)?, delta, self.flags)
    }

    pub fn family(&self) -> Result<Family> {
        Family::new(self.field()?, self.family.unwrap_or(FamilyKind::H2))
    }

    pub fn from_field(field: &CoefficientField, family: Option<FamilyKind>) -> Result<Self> {
        if field.is_complex() {
            return Err(Error::InvalidArgument("complex fields have no problem-file form".into()));
        }
        let (h1, h2, h3) = field.real_tables().ok_or_else(|| Error::InvalidArgument("field has no table form".into()))?;
        Ok(ProblemFile {
            n: field.n(),
            flow: field.flow().descriptor(),
            h1: h1.to_json(),
            h2: h2.to_json(),
            h3: h3.to_json(),
            delta: field.delta().map(|d| d.to_json()),
            flags: field.flags(),
            family,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_errors() {
        let src = r#"{"n": 1, "H1": [[-1.0]], "H2": [[0.0]], "H3": [[1.0]], "Delta": [[1.0]]}"#;
        let p = ProblemFile::parse(src).unwrap();
        let f = p.field().unwrap();
        let back = ProblemFile::from_field(&f, None).unwrap();
        assert_eq!(back.field().unwrap(), f);
        let err = ProblemFile::parse("{\"n\": 1,\n\"H1\": [[1.0]], \"H2\": 3}").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let asym = r#"{"n": 2, "H1": [[0,0],[0,0]], "H2": [[1,2],[0,1]], "H3": [[1,0],[0,1]]}"#;
        assert!(ProblemFile::parse(asym).unwrap().field().is_err());
    }
}
